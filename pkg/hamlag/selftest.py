# -*- coding: utf-8 -*-
"""
invariant suites that can be run without pytest, ``hamlag selftest``
"""

import io
import logging

import numpy as np
import pandas as pd

from hamlag.cons import log2_slope, max_norm, setups
from hamlag.harness import ExperimentConfig, run_trajectory
from hamlag.integrators import predict_stages, solve_gauss_stages
from hamlag.models import build, initial_state
from hamlag.record import emit_csv
from hamlag.spectral import Grid
from hamlag.tableau import gauss_tableau, symplecticity_defect

logger = logging.getLogger(__name__)

adjoint_tol = 1e-11
tableau_tol = 1e-14
slope_tol = 0.25
mass_tol = 1e-12

# small grids keep the operator checks quick, the sine-Gordon one in particular
_operator_grids = {
    "kdv": ([(-3.0, 5.0)], [128]),
    "nls": ([(-64.0, 64.0)], [128]),
    "sg": ([(-7.0, 7.0), (-7.0, 7.0)], [32, 32]),
}


class Check:
    def __init__(self, rows):
        self.rows = rows

    def add(self, check, value, bound, passed=None):
        if passed is None:
            passed = bool(value <= bound)
        self.rows.append(
            {"check": check, "value": float(value), "bound": bound, "passed": passed}
        )
        log = logger.info if passed else logger.warning
        log("%s: %.3e (bound %s) %s" % (check, value, bound, "ok" if passed else "FAILED"))


def _norm(model, a):
    return np.sqrt(max(model.inner(a, a), 0.0))


def operator_checks(check, rng, samples=20):
    """
    S skew-adjoint, L symmetric and non-negative under the discrete inner product
    """
    for name, (bounds, n) in _operator_grids.items():
        model = build(name, Grid(bounds, n), **setups[name][_first(name)]["params"])
        skew = sym = neg = 0.0
        for _ in range(samples):
            a = rng.standard_normal(model.state_shape)
            b = rng.standard_normal(model.state_shape)
            sa, sb = model.apply_S(a), model.apply_S(b)
            la, lb = model.apply_L(a), model.apply_L(b)
            skew = max(
                skew,
                abs(model.inner(a, sb) + model.inner(sa, b))
                / (_norm(model, a) * _norm(model, sb) + _norm(model, sa) * _norm(model, b)),
            )
            sym = max(
                sym,
                abs(model.inner(a, lb) - model.inner(la, b))
                / (_norm(model, a) * _norm(model, lb) + _norm(model, la) * _norm(model, b)),
            )
            neg = max(neg, -model.inner(a, la) / (_norm(model, a) * _norm(model, la)))
        check.add("%s S skew-adjoint" % name, skew, adjoint_tol)
        check.add("%s L symmetric" % name, sym, adjoint_tol)
        check.add("%s L non-negative" % name, max(neg, 0.0), adjoint_tol)


def _first(name):
    return next(iter(setups[name]))


def tableau_checks(check):
    """order conditions and the symplecticity defect of the Gauss tableaux"""
    for s in (1, 2, 3):
        t = gauss_tableau(s)
        order = max(t.order_condition_defect(q) for q in range(1, t.p + 1))
        check.add("%s consistency" % t.name, t.consistency_defect(), tableau_tol)
        check.add("%s quadrature order %s" % (t.name, t.p), order, tableau_tol)
        check.add("%s symplecticity" % t.name, symplecticity_defect(t), tableau_tol)


def prediction_slopes(check, sweeps=(1, 2), stages=2, dt0=0.1, rungs=(5, 6, 7, 8, 9)):
    """
    the predicted stages approach the fully implicit Gauss stages like Δt^(Λ+1),
    measured on the NLS one-soliton
    """
    cfg = ExperimentConfig("nls", "one-soliton")
    model = cfg.build_model()
    z = initial_state(model, cfg.initial)
    t = gauss_tableau(stages)
    dts = [dt0 * 2.0**-k for k in rungs]
    exact = [solve_gauss_stages(model, z, t, dt, tol=1e-14)[0] for dt in dts]
    for m in sweeps:
        errors = [
            max_norm(predict_stages(model, z, t, m, dt) - oracle)
            for dt, oracle in zip(dts, exact)
        ]
        slope = log2_slope(dts, errors)
        check.add(
            "prediction sweeps %s slope" % m,
            abs(slope - (m + 1)),
            slope_tol,
        )


def mass_check(check, steps=20):
    """the spatial mean of the KdV solution is constant"""
    cfg = ExperimentConfig("kdv", "one-soliton", schemes=["LM-CN"], T=steps * 0.002)
    report = run_trajectory(cfg, cfg.schemes[0])
    check.add("kdv mass drift", report.summary["mass_drift"], mass_tol)


def csv_determinism(check, steps=10):
    """two identical runs give identical CSV bytes once wall times are dropped"""
    cfg = ExperimentConfig("kdv", "one-soliton", schemes=["LM-CN"], T=steps * 0.002)
    texts = []
    for _ in range(2):
        report = run_trajectory(cfg, cfg.schemes[0])
        buf = io.StringIO()
        emit_csv(report.series.drop(columns=["wall_ns"]), buf)
        texts.append(buf.getvalue())
    same = texts[0] == texts[1]
    check.add("csv determinism", 0.0 if same else 1.0, 0.0, passed=same)


def selftest(seed=0):
    """
    run every invariant suite

    :param seed: int, seed of the random states
    :return: pd.DataFrame with columns check, value, bound, passed
    """
    rng = np.random.default_rng(seed)
    check = Check([])
    operator_checks(check, rng)
    tableau_checks(check)
    prediction_slopes(check)
    mass_check(check)
    csv_determinism(check)
    table = pd.DataFrame(check.rows, columns=["check", "value", "bound", "passed"])
    failed = int((~table["passed"]).sum())
    if failed:
        logger.warning("%s of %s self checks failed" % (failed, len(table)))
    else:
        logger.info("all %s self checks passed" % len(table))
    return table
