# -*- coding: utf-8 -*-
"""
module for batch experiments: trajectory runs, convergence ladders, multiplier
order ladders and scheme comparisons, configured by one JSON file per experiment
"""

import os
import copy
import json
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from hamlag.cons import (
    eps,
    floor_factor,
    get_threads,
    lambda_floor,
    log2_slope,
    max_ladder,
    max_norm,
    setups,
)
from hamlag.exceptions import ConfigInvalid, HamlagException, StepFailure
from hamlag.integrators import SAVCN, SchemeConfig, get_integrator
from hamlag.models import build, energy, exact_solution, initial_state
from hamlag.record import RunReport, emit_csv
from hamlag.spectral import Grid

logger = logging.getLogger(__name__)

_scheme_keys = {"id", "sweeps", "newton_tol", "newton_maxit", "c0", "fp_tol", "fp_maxit"}
_references = ("gauss-fp", "exact")


class ExperimentConfig:
    """
    one experiment, see ``doc/source/config.rst`` for the JSON schema.
    Everything except ``model`` and ``initial`` defaults to the matching entry of
    :data:`hamlag.cons.setups`.

    :param model: str, "kdv", "nls" or "sg"
    :param initial: str, initial condition id
    :param params: dict, model parameters
    :param bounds: list of (x_L, x_R) per axis
    :param n: list of points per axis
    :param schemes: list of scheme ids or dicts ``{"id": ..., "sweeps": ...}``
    :param dt: float, time step, the coarsest one for ladders
    :param T: float, final time, an integer multiple of dt
    :param out: Optional[str], output directory for CSV files
    :param ladder: int, number of Δt halvings of a convergence ladder
    :param reference: str, "gauss-fp" or "exact"
    :param seed: int, RNG seed for the randomized checks
    """

    fields = (
        "model",
        "initial",
        "params",
        "bounds",
        "n",
        "schemes",
        "dt",
        "T",
        "out",
        "ladder",
        "reference",
        "seed",
    )

    def __init__(
        self,
        model,
        initial,
        params=None,
        bounds=None,
        n=None,
        schemes=None,
        dt=None,
        T=None,
        out=None,
        ladder=3,
        reference="gauss-fp",
        seed=0,
    ):
        try:
            setup = setups[model][initial]
        except KeyError:
            raise ConfigInvalid("no setup for model %s with initial %s" % (model, initial))
        self.model = model
        self.initial = initial
        self.params = dict(setup["params"])
        self.params.update(params or {})
        self.bounds = [tuple(b) for b in (bounds or setup["bounds"])]
        self.n = list(n or setup["n"])
        self.dt = float(setup["dt"] if dt is None else dt)
        self.T = float(setup["T"] if T is None else T)
        self.out = out
        self.ladder = int(ladder)
        self.reference = reference
        self.seed = int(seed)
        self.schemes = [
            self.parse_scheme(s) for s in (schemes or ["LM-CN", "LM-GAUSS2"])
        ]
        self.validate()

    def parse_scheme(self, entry):
        if isinstance(entry, SchemeConfig):
            return entry
        if isinstance(entry, str):
            return SchemeConfig.from_id(entry, self.dt)
        if isinstance(entry, dict):
            unknown = set(entry) - _scheme_keys
            if unknown or "id" not in entry:
                raise ConfigInvalid("bad scheme entry %s" % entry)
            kws = {k: v for k, v in entry.items() if k != "id"}
            return SchemeConfig.from_id(entry["id"], self.dt, **kws)
        raise ConfigInvalid("bad scheme entry %s" % entry)

    def validate(self):
        if not self.T > 0:
            raise ConfigInvalid("final time must be positive, got %s" % self.T)
        if not 0 < self.dt <= self.T:
            raise ConfigInvalid("need 0 < dt <= T, got dt=%s T=%s" % (self.dt, self.T))
        if not 1 <= self.ladder <= max_ladder:
            raise ConfigInvalid(
                "ladder depth must be in [1, %s], got %s" % (max_ladder, self.ladder)
            )
        if self.reference not in _references:
            raise ConfigInvalid("no %s option for reference" % self.reference)
        self.steps(self.dt)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.fields)
        if unknown:
            raise ConfigInvalid("unknown config keys %s" % sorted(unknown))
        missing = {"model", "initial"} - set(d)
        if missing:
            raise ConfigInvalid("missing config keys %s" % sorted(missing))
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        """
        :param path: str, JSON file
        :return: ExperimentConfig
        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                d = json.load(f)
        except (OSError, ValueError) as e:
            raise ConfigInvalid("can not read config %s: %s" % (path, e))
        if not isinstance(d, dict):
            raise ConfigInvalid("config %s is not a JSON object" % path)
        return cls.from_dict(d)

    def steps(self, dt):
        """
        :param dt: float
        :return: int, the step count reaching T exactly
        """
        nsteps = int(round(self.T / dt))
        if nsteps < 1 or abs(nsteps * dt - self.T) > 1e-9 * self.T:
            raise ConfigInvalid("T=%s is not an integer multiple of dt=%s" % (self.T, dt))
        return nsteps

    def grid(self):
        try:
            return Grid(self.bounds, self.n)
        except ValueError as e:
            raise ConfigInvalid(str(e))

    def build_model(self):
        """
        :return: ModelSpec with the configured parameters on the configured grid
        """
        return build(self.model, self.grid(), **self.params)

    def with_n(self, n):
        """
        a copy on another grid, n points on every axis

        :param n: int
        :return: ExperimentConfig
        """
        sized = copy.copy(self)
        sized.n = [int(n)] * len(self.bounds)
        return sized

    def __repr__(self):
        return "ExperimentConfig(%s/%s, dt=%s, T=%s, schemes=%s)" % (
            self.model,
            self.initial,
            self.dt,
            self.T,
            [s.label for s in self.schemes],
        )


def _resolve(cfg, scheme):
    if isinstance(scheme, str):
        return SchemeConfig.from_id(scheme, cfg.dt)
    return scheme


def run_trajectory(cfg, scheme, model=None):
    """
    step from t = 0 to T with a fixed time step

    :param cfg: ExperimentConfig
    :param scheme: SchemeConfig, or a scheme id run at ``cfg.dt``
    :param model: Optional[ModelSpec], built from cfg if None
    :return: RunReport, with ``final_state`` attached
    """
    scheme = _resolve(cfg, scheme)
    model = model or cfg.build_model()
    nsteps = cfg.steps(scheme.dt)
    z0 = initial_state(model, cfg.initial)
    integrator = get_integrator(model, scheme)
    integrator.prepare(z0)
    energy0 = energy(model, z0).total
    modified0 = integrator.modified_energy0 if isinstance(integrator, SAVCN) else None
    mass0 = model.mass(z0) if model.mass is not None else None
    records, masses = [], []
    logger.info(
        "run %s on %s/%s, dt=%s, %s steps"
        % (scheme.label, cfg.model, cfg.initial, scheme.dt, nsteps)
    )
    try:
        for _ in range(nsteps):
            records.append(integrator.step())
            if mass0 is not None:
                masses.append(model.mass(integrator.z))
    except HamlagException as e:
        failed = len(records) + 1
        logger.error("%s aborted at step %s: %s" % (scheme.label, failed, e))
        report = RunReport.from_records(
            scheme.label,
            records,
            energy0,
            modified0=modified0,
            masses=masses if mass0 is not None else None,
            mass0=mass0,
            failed_step=failed,
        )
        raise StepFailure(scheme.label, failed, e, report) from e

    exact = exact_solution(model, cfg.initial)
    error = None
    if exact is not None:
        error = max_norm(integrator.z - exact(cfg.T))
    report = RunReport.from_records(
        scheme.label,
        records,
        energy0,
        modified0=modified0,
        masses=masses if mass0 is not None else None,
        mass0=mass0,
        error=error,
    )
    report.final_state = integrator.z
    logger.info(
        "%s done, max drift %.3e, mean iterations %.3g"
        % (scheme.label, report.summary["max_drift"], report.summary["mean_iters"])
    )
    return report


def _map_cells(fn, cells):
    """run independent cells on at most ``get_threads()`` threads, results keep the cell order"""
    workers = min(get_threads(), max(1, len(cells)))
    if workers == 1:
        return [fn(cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, cells))


def _write(df, cfg, name):
    if cfg.out is None:
        return
    os.makedirs(cfg.out, exist_ok=True)
    emit_csv(df, os.path.join(cfg.out, name))


def _file_label(label):
    return label.replace("/", "_")


def reference_solution(cfg, model=None):
    """
    the state at T the convergence errors are measured against: the exact
    solution, or GAUSS-FP with 3 stages at the coarsest Δt / 64 and fixed point
    tolerance 1e-14

    :param cfg: ExperimentConfig
    :param model: Optional[ModelSpec]
    :return: state array
    """
    model = model or cfg.build_model()
    if cfg.reference == "exact":
        exact = exact_solution(model, cfg.initial)
        if exact is None:
            raise ConfigInvalid(
                "no exact solution for %s/%s, use the gauss-fp reference"
                % (cfg.model, cfg.initial)
            )
        return exact(cfg.T)
    fine = SchemeConfig("GAUSS-FP", cfg.dt / 64, stages=3, fp_tol=1e-14)
    logger.info("computing the GAUSS-FP reference at dt=%s" % fine.dt)
    return run_trajectory(cfg, fine, model=model).final_state


def ladder_dts(cfg):
    """Δt0 / 2^k for k = 0..ladder"""
    return [cfg.dt / 2**k for k in range(cfg.ladder + 1)]


def ladder_orders(values, floor=0.0):
    """
    ``log2(value(Δt) / value(Δt/2))`` down a ladder; the first rung has no order and
    rungs whose value (or predecessor) sits below ``floor`` are marked "floor"

    :param values: list of positive float
    :param floor: float
    :return: list of float, None or "floor"
    """
    orders = [None]
    for coarse, fine in zip(values[:-1], values[1:]):
        if coarse < floor or fine < floor:
            orders.append("floor")
        else:
            orders.append(float(np.log2(coarse / fine)))
    return orders


def convergence_study(cfg, runner=None, reference=None):
    """
    max norm error at T for every scheme on the Δt ladder with the observed orders

    :param cfg: ExperimentConfig
    :param runner: Optional[callable], (SchemeConfig, ModelSpec) -> state at T,
        default runs the scheme with :func:`run_trajectory`
    :param reference: Optional[np.ndarray], the state at T, default :func:`reference_solution`
    :return: pd.DataFrame with columns scheme, dt, error, order
    """
    if cfg.ladder < 2:
        raise ConfigInvalid("convergence ladder needs depth >= 2, got %s" % cfg.ladder)
    model = cfg.build_model()
    if reference is None:
        reference = reference_solution(cfg, model)
    if runner is None:

        def runner(scheme, model):
            return run_trajectory(cfg, scheme, model=model).final_state

    dts = ladder_dts(cfg)
    cells = [(scheme.with_dt(dt), scheme.label) for scheme in cfg.schemes for dt in dts]
    states = _map_cells(lambda cell: runner(cell[0], model), cells)
    floor = floor_factor * eps * max(1.0, max_norm(reference))
    rows = []
    for i, scheme in enumerate(cfg.schemes):
        errors = [
            max_norm(states[i * len(dts) + k] - reference) for k in range(len(dts))
        ]
        for dt, error, order in zip(dts, errors, ladder_orders(errors, floor)):
            rows.append(
                {"scheme": scheme.label, "dt": dt, "error": error, "order": order}
            )
            if order == "floor":
                logger.warning(
                    "%s at dt=%s reached the roundoff floor, order not reported"
                    % (scheme.label, dt)
                )
    table = pd.DataFrame(rows, columns=["scheme", "dt", "error", "order"])
    _write(table, cfg, "convergence.csv")
    return table


def lambda_order_study(cfg):
    """
    |λ-1| on the Δt ladder. Every step takes at least one Newton correction (zero
    residual tolerance, the increment stop ends the iteration), so λ-1 is resolved
    rather than rounded to 1. The deviation of the last step is compared across
    rungs, all of them sit at t = T; the max over the run is reported next to it.

    :param cfg: ExperimentConfig
    :return: pd.DataFrame with columns scheme, dt, max_lambda_dev, final_lambda_dev,
        order, slope
    """
    if cfg.ladder < 2:
        raise ConfigInvalid("multiplier ladder needs depth >= 2, got %s" % cfg.ladder)
    model = cfg.build_model()
    dts = ladder_dts(cfg)
    cells = []
    for scheme in cfg.schemes:
        for dt in dts:
            cell = scheme.with_dt(dt)
            cell.newton_tol = 0.0
            cells.append(cell)
    reports = _map_cells(lambda s: run_trajectory(cfg, s, model=model), cells)
    rows = []
    for i, scheme in enumerate(cfg.schemes):
        rung = reports[i * len(dts) : (i + 1) * len(dts)]
        finals = [abs(float(r.series["lambda"].iloc[-1]) - 1.0) for r in rung]
        slope = np.nan
        if all(d > lambda_floor for d in finals):
            slope = log2_slope(dts, finals)
        else:
            logger.warning(
                "%s: λ-1 at T reached the floor %s, no slope reported"
                % (scheme.label, lambda_floor)
            )
        for dt, report, dev, order in zip(
            dts, rung, finals, ladder_orders(finals, lambda_floor)
        ):
            rows.append(
                {
                    "scheme": scheme.label,
                    "dt": dt,
                    "max_lambda_dev": report.summary["max_lambda_dev"],
                    "final_lambda_dev": dev,
                    "order": order,
                    "slope": float(slope),
                }
            )
    table = pd.DataFrame(
        rows,
        columns=["scheme", "dt", "max_lambda_dev", "final_lambda_dev", "order", "slope"],
    )
    _write(table, cfg, "lambda_order.csv")
    return table


compare_columns = [
    "scheme",
    "max_drift",
    "max_modified_drift",
    "mean_iters",
    "max_iters",
    "max_lambda_dev",
    "mass_drift",
    "wall_s",
    "error",
]


def compare_schemes(cfg):
    """
    one row per scheme at ``cfg.dt``: drifts, iteration counts, multiplier deviation
    and wall time; the per-step series are written next to the table

    :param cfg: ExperimentConfig with at least two schemes
    :return: pd.DataFrame with ``compare_columns``
    """
    if len(cfg.schemes) < 2:
        raise ConfigInvalid("comparison needs at least two schemes")
    model = cfg.build_model()
    reports = _map_cells(lambda s: run_trajectory(cfg, s, model=model), cfg.schemes)
    for report in reports:
        _write(report.series, cfg, "%s.csv" % _file_label(report.scheme))
    table = pd.DataFrame(
        [{k: r.summary[k] for k in compare_columns} for r in reports],
        columns=compare_columns,
    )
    _write(table, cfg, "compare.csv")
    return table


def run_all(cfg):
    """
    every configured scheme at ``cfg.dt``, series written to ``cfg.out``

    :return: list of RunReport
    """
    model = cfg.build_model()
    reports = _map_cells(lambda s: run_trajectory(cfg, s, model=model), cfg.schemes)
    for report in reports:
        _write(report.series, cfg, "%s.csv" % _file_label(report.scheme))
    summary = pd.DataFrame([r.summary for r in reports])
    _write(summary, cfg, "summary.csv")
    return reports


timing_columns = ["scheme", "n", "points", "steps", "wall_s", "step_ms", "max_drift"]


def grid_timing_study(cfg, sizes=None):
    """
    wall time of every scheme from 0 to T while the grid is refined. The cells run
    one after the other so the timings do not compete for cores.

    :param cfg: ExperimentConfig
    :param sizes: Optional[list of int], points per axis, default n/4, n/2 and n
    :return: pd.DataFrame with ``timing_columns``
    """
    if sizes is None:
        sizes = [cfg.n[0] // 4, cfg.n[0] // 2, cfg.n[0]]
    rows = []
    for n in sizes:
        sized = cfg.with_n(n)
        model = sized.build_model()
        for scheme in cfg.schemes:
            report = run_trajectory(sized, scheme, model=model)
            steps = report.summary["steps"]
            rows.append(
                {
                    "scheme": scheme.label,
                    "n": n,
                    "points": int(np.prod(sized.n)),
                    "steps": steps,
                    "wall_s": report.summary["wall_s"],
                    "step_ms": 1e3 * report.summary["wall_s"] / steps,
                    "max_drift": report.summary["max_drift"],
                }
            )
    table = pd.DataFrame(rows, columns=timing_columns)
    _write(table, cfg, "grid_timing.csv")
    return table
