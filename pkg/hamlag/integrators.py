# -*- coding: utf-8 -*-
"""
module for time stepping: the Lagrange multiplier schemes LM-CN and LM-GAUSS,
the SAV-CN baseline, the fully implicit Gauss oracle solved by fixed point sweeps,
the multiplier-free prediction-correction scheme and the scalar Newton solver

The step functions are pure, they own their inputs and return fresh arrays.
The :class:`Integrator` drivers on top keep the trajectory state (previous step for
the extrapolant, the SAV auxiliary variable) and time each step.
"""

import re
import logging
import warnings
from time import perf_counter_ns

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from hamlag.cons import (
    curvature_step,
    degenerate_tol,
    derivative_floor,
    elimination_tol,
    eps,
    fp_maxit,
    fp_tol,
    lambda_window,
    max_norm,
    newton_maxit,
    newton_trust,
    newton_tol,
    newton_xtol,
    orthogonal_tol,
    sav_c0,
    scan_points,
    scan_start,
    tangent_tol,
)
from hamlag.exceptions import (
    ConfigInvalid,
    DegenerateNonlinearity,
    DerivativeUnderflow,
    EliminationSingular,
    FixedPointNonConvergence,
    MultiplierNonConvergence,
    MultiplierOutOfRange,
    NearOrthogonality,
    NonConvergence,
    SAVSqrtDomain,
)
from hamlag.models import energy
from hamlag.tableau import gauss_tableau

logger = logging.getLogger(__name__)

_cn_stage = [[0.5]]


class MultiplierSolve:
    """
    outcome of a scalar root solve

    :param lam: float, the root
    :param iterations: int, Newton updates plus the restart, bracketing or minimization steps
    :param residual: float, residual at the root
    :param converged: bool, False when λ only minimizes the residual
    :param degenerate: bool, the nonlinearity vanished and λ was set to 1
    :param near_orthogonal: bool, the multiplier equation lost its local uniqueness
    :param restarted: bool, Newton from 1 was abandoned and the root nearest 1 searched for
    """

    def __init__(
        self,
        lam,
        iterations,
        residual,
        converged=True,
        degenerate=False,
        near_orthogonal=False,
        restarted=False,
    ):
        self.lam = float(lam)
        self.iterations = int(iterations)
        self.residual = float(residual)
        self.converged = converged
        self.degenerate = degenerate
        self.near_orthogonal = near_orthogonal
        self.restarted = restarted

    def __repr__(self):
        return "MultiplierSolve(lam=%.17g, iterations=%s, residual=%.3e)" % (
            self.lam,
            self.iterations,
            self.residual,
        )


class SchemeConfig:
    """
    one time stepping scheme with its knobs

    :param kind: str, one of ``SchemeConfig.kinds``
    :param dt: float, time step
    :param stages: Optional[int], s of the Gauss tableau, required for the Gauss kinds
    :param sweeps: Optional[int], prediction sweep count Λ, default the order p = 2s
    :param newton_tol: float
    :param newton_maxit: int
    :param c0: float, the SAV shift
    :param fp_tol: float, stopping tolerance of the fixed point sweeps
    :param fp_maxit: int
    """

    kinds = ("LM-CN", "LM-GAUSS", "SAV-CN", "GAUSS-FP", "PC-GAUSS")
    gauss_kinds = ("LM-GAUSS", "GAUSS-FP", "PC-GAUSS")

    def __init__(
        self,
        kind,
        dt,
        stages=None,
        sweeps=None,
        newton_tol=newton_tol,
        newton_maxit=newton_maxit,
        c0=sav_c0,
        fp_tol=fp_tol,
        fp_maxit=fp_maxit,
    ):
        if kind not in self.kinds:
            raise ConfigInvalid("unknown scheme kind %s" % kind)
        if not dt > 0:
            raise ConfigInvalid("time step must be positive, got %s" % dt)
        self.kind = kind
        self.dt = float(dt)
        self.tableau = None
        self.sweeps = None
        if kind in self.gauss_kinds:
            if stages is None:
                raise ConfigInvalid("%s needs a stage count" % kind)
            try:
                self.tableau = gauss_tableau(int(stages))
            except ValueError as e:
                raise ConfigInvalid(str(e))
            self.sweeps = self.tableau.p if sweeps is None else int(sweeps)
            if self.sweeps < 1:
                raise ConfigInvalid("prediction sweeps must be >= 1, got %s" % sweeps)
        self.newton_tol = newton_tol
        self.newton_maxit = newton_maxit
        self.c0 = c0
        self.fp_tol = fp_tol
        self.fp_maxit = fp_maxit

    @classmethod
    def from_id(cls, scheme_id, dt, **kws):
        """
        parse ids like ``LM-CN``, ``SAV-CN``, ``LM-GAUSS3``, ``GAUSS-FP2``, ``PC-GAUSS2``

        :param scheme_id: str
        :param dt: float
        :param kws: the remaining SchemeConfig keywords
        :return: SchemeConfig
        """
        m = re.fullmatch(r"(LM-CN|SAV-CN|LM-GAUSS|GAUSS-FP|PC-GAUSS)([123])?", scheme_id)
        if m is None:
            raise ConfigInvalid("unknown scheme id %s" % scheme_id)
        kind, stages = m.group(1), m.group(2)
        if (stages is None) == (kind in cls.gauss_kinds):
            raise ConfigInvalid("malformed scheme id %s" % scheme_id)
        if stages is not None:
            kws["stages"] = int(stages)
        return cls(kind, dt, **kws)

    @property
    def order(self):
        """the order min{p, Λ} the scheme converges with"""
        if self.kind in ("LM-CN", "SAV-CN"):
            return 2
        if self.kind == "GAUSS-FP":
            return self.tableau.p
        return min(self.tableau.p, self.sweeps)

    @property
    def label(self):
        if self.tableau is None:
            return self.kind
        label = "%s%s" % (self.kind, self.tableau.s)
        if self.kind != "GAUSS-FP" and self.sweeps != self.tableau.p:
            label += "/L%s" % self.sweeps
        return label

    def with_dt(self, dt):
        """a copy at another time step"""
        return SchemeConfig(
            self.kind,
            dt,
            stages=None if self.tableau is None else self.tableau.s,
            sweeps=self.sweeps,
            newton_tol=self.newton_tol,
            newton_maxit=self.newton_maxit,
            c0=self.c0,
            fp_tol=self.fp_tol,
            fp_maxit=self.fp_maxit,
        )

    def __repr__(self):
        return "SchemeConfig(%s, dt=%s)" % (self.label, self.dt)


class StepRecord:
    """
    what one step leaves behind

    :param t_end: float
    :param lam: float, 1.0 for schemes without multiplier
    :param iterations: int, Newton iterations or fixed point sweeps
    :param energy: EnergyReport of the new state
    :param modified_energy: Optional[float], ``1/2 (z, L z) + r²`` for SAV-CN
    """

    def __init__(
        self,
        t_end,
        lam,
        iterations,
        energy,
        modified_energy=None,
        degenerate=False,
        near_orthogonal=False,
    ):
        self.t_end = t_end
        self.lam = lam
        self.iterations = iterations
        self.energy = energy
        self.modified_energy = modified_energy
        self.degenerate = degenerate
        self.near_orthogonal = near_orthogonal
        self.wall_ns = 0

    def __repr__(self):
        return "StepRecord(t=%s, lam=%.17g, iterations=%s, energy=%.17g)" % (
            self.t_end,
            self.lam,
            self.iterations,
            self.energy.total,
        )


## scalar root finding


def newton_scalar(
    g,
    dg,
    x0=1.0,
    tol=newton_tol,
    maxit=newton_maxit,
    scale=1.0,
    error=NonConvergence,
    xtol=None,
    trust=None,
):
    """
    Newton iteration with residual stop ``|g(x)| <= tol * scale``

    :param g: callable, float -> float
    :param dg: callable, the analytic derivative of g
    :param x0: float, starting point
    :param tol: float
    :param maxit: int
    :param scale: float, the magnitude the tolerance is relative to
    :param error: the NonConvergence subclass raised on exhaustion
    :param xtol: Optional[float], also stop once an update is below ``xtol * max(1, |x|)``
        and g changes sign across x
    :param trust: Optional[float], give up once ``|x - x0|`` exceeds it
    :return: MultiplierSolve
    """
    x = float(x0)
    r = g(x)
    it = 0
    while not abs(r) <= tol * scale:
        if it >= maxit or not np.isfinite(r):
            raise error(x, it, r)
        d = dg(x)
        if not abs(d) >= derivative_floor:
            raise DerivativeUnderflow(
                x, it, r, "derivative %.3e vanished at x=%.17g" % (d, x)
            )
        step = r / d
        x = x - step
        it += 1
        if trust is not None and not abs(x - x0) <= trust:
            raise error(x, it, r, "left |x-%s| <= %s at x=%.17g" % (x0, trust, x))
        r = g(x)
        if xtol is not None and abs(step) <= xtol * max(1.0, abs(x)):
            # a small update only ends the iteration next to a sign change
            h = 2 * abs(step) + 4 * eps * max(1.0, abs(x))
            if g(x - h) * g(x + h) <= 0:
                break
    logger.debug("newton converged to %.17g in %s iterations" % (x, it))
    return MultiplierSolve(x, it, r)


def _scan_bracket(g, r1):
    """
    walk outwards from 1 on both sides at geometric offsets up to the window

    :return: tuple (bracket or None, list of (x, g(x)) sampled)
    """
    samples = [(1.0, r1)]
    inner = {1: 1.0, -1: 1.0}
    for h in np.geomspace(scan_start, lambda_window, scan_points, endpoint=False):
        for side in (1, -1):
            x = 1.0 + side * h
            r = g(x)
            samples.append((x, r))
            if np.isfinite(r) and np.sign(r) != np.sign(r1):
                return tuple(sorted((inner[side], x))), samples
            inner[side] = x
    return None, samples


def _tangent_multiplier(g, r1, samples, scale):
    """
    no sign change in the window: the point closest to 1 whose residual is within
    twice the smallest ``|g|`` there

    :return: tuple (λ, function evaluations)
    """
    finite = sorted((x, abs(r)) for x, r in samples if np.isfinite(r))
    i = min(range(len(finite)), key=lambda j: finite[j][1])
    lo = finite[i - 1][0] if i > 0 else 1.0 - lambda_window
    hi = finite[i + 1][0] if i + 1 < len(finite) else 1.0 + lambda_window
    res = minimize_scalar(
        lambda x: abs(g(x)), bounds=(lo, hi), method="bounded", options={"xatol": scan_start}
    )
    xm, rm = (res.x, res.fun) if res.fun < finite[i][1] else finite[i]
    if not rm <= tangent_tol * scale:
        raise MultiplierOutOfRange(xm, lambda_window, residual=rm)
    if abs(r1) <= 2 * rm:
        return 1.0, res.nfev
    if rm == 0:
        return xm, res.nfev
    lam, info = brentq(
        lambda x: abs(g(x)) - 2 * rm, *sorted((1.0, xm)), xtol=eps, full_output=True
    )
    return lam, res.nfev + info.function_calls


def _quadratic_start(g, dg, r1):
    """
    root nearest 1 of the local quadratic model of g, None when the model has none
    in the window
    """
    d1 = dg(1.0)
    c = (dg(1.0 + curvature_step) - dg(1.0 - curvature_step)) / (2 * curvature_step)
    disc = d1**2 - 2 * c * r1
    if c == 0 or not disc >= 0:
        return None
    delta = min(((-d1 + s * np.sqrt(disc)) / c for s in (1.0, -1.0)), key=abs)
    if not 0 < abs(delta) < lambda_window:
        return None
    return 1.0 + delta


def _is_nearest(g, lam, r1):
    # no sign change halfway to the root nor on the mirrored side of 1
    return lam == 1.0 or (
        np.sign(g(2.0 - lam)) == np.sign(r1)
        and np.sign(g(0.5 * (1.0 + lam))) == np.sign(r1)
    )


def nearest_root(g, dg, tol=newton_tol, maxit=newton_maxit, scale=1.0, xtol=newton_xtol):
    """
    root of a multiplier equation closest to 1 inside ``|λ-1| < lambda_window``

    Newton from 1 is kept when it converges within ``newton_trust`` of 1 and g does
    not change sign between 1 and the root or at the mirrored point. Near tangency
    Newton restarts from the nearest root of the local quadratic model of g. If that
    fails too, g is scanned outwards from 1 and the nearest sign change is refined by
    brentq. With no sign change at all the equation is tangent near 1: λ is the point
    closest to 1 whose residual is within twice the smallest one, flagged
    ``near_orthogonal``.

    :param g: callable, the multiplier residual
    :param dg: callable, its derivative
    :param tol: float, residual tolerance relative to ``scale``
    :param maxit: int, Newton budget
    :param scale: float, energy magnitude
    :param xtol: float, Newton increment tolerance
    :return: MultiplierSolve
    """
    r1 = g(1.0)
    if abs(r1) <= tol * scale:
        return MultiplierSolve(1.0, 0, r1)
    newton = dict(
        tol=tol, maxit=maxit, scale=scale, error=MultiplierNonConvergence, xtol=xtol
    )
    try:
        sol = newton_scalar(g, dg, 1.0, trust=newton_trust, **newton)
    except NonConvergence as e:
        logger.debug("newton on the multiplier abandoned: %s" % e)
        spent = e.iterations
    else:
        if _is_nearest(g, sol.lam, r1):
            return sol
        spent = sol.iterations
    start = _quadratic_start(g, dg, r1)
    if start is not None:
        try:
            sol = newton_scalar(g, dg, start, trust=0.5 * abs(start - 1.0), **newton)
        except NonConvergence as e:
            logger.debug("quadratic restart abandoned: %s" % e)
            spent += e.iterations
        else:
            spent += sol.iterations
            if _is_nearest(g, sol.lam, r1):
                return MultiplierSolve(sol.lam, spent, sol.residual, restarted=True)
    bracket, samples = _scan_bracket(g, r1)
    if bracket is not None:
        lam, info = brentq(g, *bracket, xtol=eps, full_output=True)
        return MultiplierSolve(lam, spent + info.iterations, g(lam), restarted=True)
    lam, calls = _tangent_multiplier(g, r1, samples, scale)
    r = g(lam)
    warnings.warn(
        "the multiplier equation has no root near 1, λ = %.17g leaves residual %.3e"
        % (lam, r),
        NearOrthogonality,
    )
    return MultiplierSolve(lam, spent + calls, r, converged=False, near_orthogonal=True)


def _check_window(sol):
    if not abs(sol.lam - 1.0) < lambda_window:
        raise MultiplierOutOfRange(sol.lam, lambda_window)
    return sol


def _is_degenerate(grads, reference):
    scale = max(1.0, max_norm(reference))
    return max_norm(grads) <= degenerate_tol * scale


def energy_scale(model, z, fz=None):
    """
    ``|1/2 (z, L z)| + |F(z)|``, the magnitude multiplier residuals are measured against

    :param model: ModelSpec
    :param z: state
    :param fz: Optional[float], F(z) when already known
    :return: float, 1.0 for a state without energy
    """
    if fz is None:
        fz = model.nonlinear_energy(z)
    scale = abs(0.5 * model.inner(z, model.apply_L(z))) + abs(fz)
    return scale if scale > 0 else 1.0


def solve_multiplier_cn(model, p, q, z, zt, tol=newton_tol, maxit=newton_maxit):
    """
    root nearest 1 of
    ``g(λ) = (N(p+λq) - N(z), 1) - λ (N'(z~), p+λq-z)``

    :param model: ModelSpec
    :param p: state, the Crank-Nicolson part of the update
    :param q: state, the nonlinear part of the update
    :param z: state at t_n
    :param zt: state, the extrapolant z~ at the half step
    :param tol: float
    :param maxit: int
    :return: MultiplierSolve
    """
    nz = model.n_grad(zt)
    fz = model.nonlinear_energy(z)
    lin = model.inner(nz, p - z)
    quad = model.inner(nz, q)

    def g(lam):
        return model.nonlinear_energy(p + lam * q) - fz - lam * (lin + lam * quad)

    if _is_degenerate(nz, zt):
        logger.debug("N'(z~) vanishes, multiplier set to 1")
        return MultiplierSolve(1.0, 0, g(1.0), degenerate=True)

    def dg(lam):
        return model.inner(model.n_grad(p + lam * q), q) - (lin + 2 * lam * quad)

    sol = nearest_root(g, dg, tol=tol, maxit=maxit, scale=energy_scale(model, z, fz))
    return _check_window(sol)


def _stack_f2(model, stages):
    """S N'(z_i) for every stage of a stack"""
    return model.apply_S(np.stack([model.n_grad(zi) for zi in stages]))


def _b_sum(b, stack):
    return np.einsum("i,i...->...", b, stack)


def solve_multiplier_gauss(
    model, l1, r1, l2, r2, z, stages, b, dt, tol=newton_tol, maxit=newton_maxit
):
    """
    root nearest 1 of
    ``G(λ) = (N(L2+λR2) - N(z), 1) - λ dt Σ b_i (N'(z~_i), L1_i+λR1_i)``

    :param model: ModelSpec
    :param l1: stage stack, linear part of the stage slopes
    :param r1: stage stack, nonlinear part of the stage slopes
    :param l2: state, linear part of the update
    :param r2: state, nonlinear part of the update
    :param z: state at t_n
    :param stages: stage stack, the predicted z~_i
    :param b: Gauss weights
    :param dt: float
    :param tol: float
    :param maxit: int
    :return: MultiplierSolve
    """
    grads = [model.n_grad(zi) for zi in stages]
    lin = dt * sum(bi * model.inner(gi, li) for bi, gi, li in zip(b, grads, l1))
    quad = dt * sum(bi * model.inner(gi, ri) for bi, gi, ri in zip(b, grads, r1))
    fz = model.nonlinear_energy(z)
    scale = energy_scale(model, z, fz)

    def g(lam):
        return model.nonlinear_energy(l2 + lam * r2) - fz - lam * (lin + lam * quad)

    if _is_degenerate(np.stack(grads), stages):
        logger.debug("N'(z~_i) vanishes on every stage, multiplier set to 1")
        return MultiplierSolve(1.0, 0, g(1.0), degenerate=True)

    def dg(lam):
        return model.inner(model.n_grad(l2 + lam * r2), r2) - (lin + 2 * lam * quad)

    sol = _check_window(nearest_root(g, dg, tol=tol, maxit=maxit, scale=scale))
    if not sol.near_orthogonal and abs(lin + sol.lam * quad) < orthogonal_tol * dt * scale:
        warnings.warn(
            "Σ b_i (N'(z~_i), k_i) = %.3e is nearly zero, the multiplier may be ill-defined"
            % ((lin + sol.lam * quad) / dt),
            NearOrthogonality,
        )
        sol.near_orthogonal = True
    return sol


## steps


def startup_extrapolant(model, z0, dt):
    """
    explicit half step ``z0 + dt/2 (f1 + f2)(z0)``, the midpoint estimate of the first step

    :param model: ModelSpec
    :param z0: state
    :param dt: float
    :return: state
    """
    if dt == 0:
        return np.array(z0, copy=True)
    return z0 + 0.5 * dt * model.vector_field(z0)


def cn_split(model, z, zt, dt):
    """
    the two Crank-Nicolson pieces ``p = (I-dt/2 SL)^-1 (I+dt/2 SL) z`` and
    ``q = dt (I-dt/2 SL)^-1 S N'(z~)``

    :return: tuple (p, q)
    """
    factor = model.mode_factor(_cn_stage, dt)
    p = factor.solve((z + 0.5 * dt * model.f1(z))[None])[0]
    q = dt * factor.solve(model.f2(zt)[None])[0]
    return p, q


def lm_cn_step(model, z, zt, cfg, t=0.0):
    """
    one step of the Crank-Nicolson Lagrange multiplier scheme, ``z+ = p + λ q``

    :param model: ModelSpec
    :param z: state at t_n
    :param zt: the extrapolant ``(3 z^n - z^(n-1)) / 2``
    :param cfg: SchemeConfig
    :param t: float, t_n
    :return: tuple (state at t_n+1, StepRecord)
    """
    p, q = cn_split(model, z, zt, cfg.dt)
    sol = solve_multiplier_cn(model, p, q, z, zt, cfg.newton_tol, cfg.newton_maxit)
    znew = p + sol.lam * q
    record = StepRecord(
        t + cfg.dt,
        sol.lam,
        sol.iterations,
        energy(model, znew),
        degenerate=sol.degenerate,
        near_orthogonal=sol.near_orthogonal,
    )
    return znew, record


def predict_stages(model, z, tableau, sweeps, dt):
    """
    linearized Gauss sweeps ``Z <- C^-1 (z + dt A f2(Z))`` starting from ``Z_i = z``,
    C being ``I - dt (A ⊗ SL)``; after m sweeps the stages are O(dt^(m+1)) off the
    fully implicit ones

    :param model: ModelSpec
    :param z: state at t_n
    :param tableau: ButcherTableau
    :param sweeps: int, m >= 0
    :param dt: float
    :return: stage stack ``(s, c, *grid.shape)``
    """
    if sweeps < 0:
        raise ValueError("no %s option for prediction sweeps" % sweeps)
    factor = model.mode_factor(tableau.A, dt)
    zvec = np.broadcast_to(z, (tableau.s,) + z.shape)
    stages = np.array(zvec)
    for _ in range(sweeps):
        rhs = zvec + dt * np.einsum("ij,j...->i...", tableau.A, _stack_f2(model, stages))
        stages = factor.solve(rhs)
    return stages


def gauss_split(model, z, stages, tableau, dt):
    """
    ``L1 = C^-1 f1(z)``, ``R1 = C^-1 f2(z~)``, ``L2 = z + dt b L1``, ``R2 = dt b R1``

    :return: tuple (L1, R1, L2, R2)
    """
    factor = model.mode_factor(tableau.A, dt)
    l1 = factor.solve(np.broadcast_to(model.f1(z), (tableau.s,) + z.shape))
    r1 = factor.solve(_stack_f2(model, stages))
    l2 = z + dt * _b_sum(tableau.b, l1)
    r2 = dt * _b_sum(tableau.b, r1)
    return l1, r1, l2, r2


def _predicted_split(model, z, cfg):
    # the correction is the Λ-th sweep, so Λ - 1 predictions come first
    t, dt = cfg.tableau, cfg.dt
    stages = predict_stages(model, z, t, cfg.sweeps - 1, dt)
    return (stages,) + gauss_split(model, z, stages, t, dt)


def lm_gauss_step(model, z, cfg, t=0.0):
    """
    prediction-correction Gauss step with Lagrange multiplier, ``z+ = L2 + λ R2``.
    Λ - 1 prediction sweeps give z~, the multiplier-corrected stage solve is the
    Λ-th, the scheme converges with order min{p, Λ}.

    :param model: ModelSpec
    :param z: state at t_n
    :param cfg: SchemeConfig with a Gauss tableau and Λ
    :param t: float, t_n
    :return: tuple (state at t_n+1, StepRecord)
    """
    stages, l1, r1, l2, r2 = _predicted_split(model, z, cfg)
    sol = solve_multiplier_gauss(
        model,
        l1,
        r1,
        l2,
        r2,
        z,
        stages,
        cfg.tableau.b,
        cfg.dt,
        cfg.newton_tol,
        cfg.newton_maxit,
    )
    znew = l2 + sol.lam * r2
    record = StepRecord(
        t + cfg.dt,
        sol.lam,
        sol.iterations,
        energy(model, znew),
        degenerate=sol.degenerate,
        near_orthogonal=sol.near_orthogonal,
    )
    return znew, record


def pc_gauss_step(model, z, cfg, t=0.0):
    """
    the same prediction-correction step with λ fixed to 1, not energy conserving

    :param model: ModelSpec
    :param z: state at t_n
    :param cfg: SchemeConfig with a Gauss tableau and Λ
    :param t: float, t_n
    :return: tuple (state at t_n+1, StepRecord)
    """
    _, _, _, l2, r2 = _predicted_split(model, z, cfg)
    znew = l2 + r2
    return znew, StepRecord(t + cfg.dt, 1.0, 0, energy(model, znew))


def sav_initial(model, z0, c0=sav_c0):
    """
    ``r0 = sqrt(F(z0) + c0)``
    """
    value = model.nonlinear_energy(z0) + c0
    if not value > 0:
        raise SAVSqrtDomain(value)
    return float(np.sqrt(value))


def modified_energy(model, z, r):
    """``1/2 (z, L z) + r²``"""
    return 0.5 * model.inner(z, model.apply_L(z)) + r**2


def sav_cn_step(model, z, r, zt, cfg, t=0.0):
    """
    SAV Crank-Nicolson step solved by scalar elimination

    :param model: ModelSpec
    :param z: state at t_n
    :param r: float, the auxiliary variable at t_n
    :param zt: the extrapolant at the half step
    :param cfg: SchemeConfig
    :param t: float, t_n
    :return: tuple (state at t_n+1, r at t_n+1, StepRecord)
    """
    dt = cfg.dt
    value = model.nonlinear_energy(zt) + cfg.c0
    if not value > 0:
        raise SAVSqrtDomain(value)
    bt = model.n_grad(zt) / np.sqrt(value)
    sb = model.apply_S(bt)
    factor = model.mode_factor(_cn_stage, dt)
    rhs = z + 0.5 * dt * model.f1(z) + dt * (r - 0.25 * model.inner(bt, z)) * sb
    w1 = factor.solve(rhs[None])[0]
    w2 = 0.25 * dt * factor.solve(sb[None])[0]
    den = 1.0 - model.inner(bt, w2)
    if abs(den) < elimination_tol:
        raise EliminationSingular("SAV elimination denominator %.3e" % den)
    gamma = model.inner(bt, w1) / den
    znew = w1 + gamma * w2
    rnew = r + 0.5 * model.inner(bt, znew - z)
    record = StepRecord(
        t + dt,
        1.0,
        0,
        energy(model, znew),
        modified_energy=modified_energy(model, znew, rnew),
        degenerate=_is_degenerate(bt, zt),
    )
    return znew, rnew, record


def solve_gauss_stages(model, z, tableau, dt, tol=fp_tol, maxit=fp_maxit):
    """
    fully implicit Gauss stages: the stage equations are iterated with the nonlinear
    part lagged and the linear part solved exactly until the max norm increment
    drops below ``tol * max(1, |z|_max)``

    :param model: ModelSpec
    :param z: state at t_n
    :param tableau: ButcherTableau
    :param dt: float
    :param tol: float
    :param maxit: int, sweep budget
    :return: tuple (stage stack, sweeps taken)
    """
    factor = model.mode_factor(tableau.A, dt)
    zvec = np.broadcast_to(z, (tableau.s,) + z.shape)
    stages = np.array(zvec)
    scale = max(1.0, max_norm(z))
    increment = np.inf
    for sweep in range(1, maxit + 1):
        rhs = zvec + dt * np.einsum("ij,j...->i...", tableau.A, _stack_f2(model, stages))
        new = factor.solve(rhs)
        increment = max_norm(new - stages)
        stages = new
        if increment < tol * scale:
            logger.debug("fixed point settled after %s sweeps" % sweep)
            return stages, sweep
    raise FixedPointNonConvergence(maxit, increment)


def gauss_fp_step(model, z, cfg, t=0.0):
    """
    fully implicit s-stage Gauss step through :func:`solve_gauss_stages`

    :param model: ModelSpec
    :param z: state at t_n
    :param cfg: SchemeConfig with a Gauss tableau
    :param t: float, t_n
    :return: tuple (state at t_n+1, StepRecord), iterations are the sweeps that changed the stages
    """
    tab, dt = cfg.tableau, cfg.dt
    stages, sweeps = solve_gauss_stages(model, z, tab, dt, cfg.fp_tol, cfg.fp_maxit)
    k = model.apply_SL(stages) + _stack_f2(model, stages)
    znew = z + dt * _b_sum(tab.b, k)
    return znew, StepRecord(t + dt, 1.0, max(1, sweeps - 1), energy(model, znew))


## stateful drivers


class Integrator:
    """
    trajectory driver over a pure step function, call :meth:`prepare` with the
    initial state, then :meth:`step` or :meth:`run`

    :param model: ModelSpec
    :param cfg: SchemeConfig
    """

    kind = None

    def __init__(self, model, cfg):
        if self.kind is not None and cfg.kind != self.kind:
            raise ConfigInvalid("%s can not drive %s" % (type(self).__name__, cfg.kind))
        self.model = model
        self.cfg = cfg
        self.z = None
        self.n = 0

    def prepare(self, z0):
        """
        reset the trajectory to t = 0

        :param z0: state
        """
        self.z = np.array(z0, dtype=float, copy=True)
        self.n = 0
        self._warned = False

    @property
    def t(self):
        return self.n * self.cfg.dt

    def advance(self):
        raise NotImplementedError

    def step(self):
        """
        :return: StepRecord of the step just taken
        """
        start = perf_counter_ns()
        record = self.advance()
        record.wall_ns = perf_counter_ns() - start
        self.n += 1
        record.t_end = self.t
        if record.degenerate and not self._warned:
            self._warned = True
            warnings.warn(
                "%s: degenerate nonlinearity at step %s, multiplier set to 1"
                % (self.cfg.label, self.n),
                DegenerateNonlinearity,
            )
        return record

    def run(self, nsteps):
        """
        :param nsteps: int
        :return: list of StepRecord
        """
        return [self.step() for _ in range(nsteps)]


class _Extrapolating(Integrator):
    """keeps z^(n-1) for the extrapolant (3 z^n - z^(n-1)) / 2"""

    def prepare(self, z0):
        super().prepare(z0)
        self.previous = None

    def extrapolant(self):
        if self.previous is None:
            return startup_extrapolant(self.model, self.z, self.cfg.dt)
        return 1.5 * self.z - 0.5 * self.previous


class LMCN(_Extrapolating):
    kind = "LM-CN"

    def advance(self):
        znew, record = lm_cn_step(
            self.model, self.z, self.extrapolant(), self.cfg, self.t
        )
        self.previous, self.z = self.z, znew
        return record


class SAVCN(_Extrapolating):
    kind = "SAV-CN"

    def prepare(self, z0):
        super().prepare(z0)
        self.r = sav_initial(self.model, self.z, self.cfg.c0)

    @property
    def modified_energy0(self):
        return modified_energy(self.model, self.z, self.r)

    def advance(self):
        znew, self.r, record = sav_cn_step(
            self.model, self.z, self.r, self.extrapolant(), self.cfg, self.t
        )
        self.previous, self.z = self.z, znew
        return record


class LMGauss(Integrator):
    kind = "LM-GAUSS"

    def advance(self):
        self.z, record = lm_gauss_step(self.model, self.z, self.cfg, self.t)
        return record


class GaussFP(Integrator):
    kind = "GAUSS-FP"

    def advance(self):
        self.z, record = gauss_fp_step(self.model, self.z, self.cfg, self.t)
        return record


class PCGauss(Integrator):
    kind = "PC-GAUSS"

    def advance(self):
        self.z, record = pc_gauss_step(self.model, self.z, self.cfg, self.t)
        return record


drivers = {cls.kind: cls for cls in (LMCN, LMGauss, SAVCN, GaussFP, PCGauss)}


def get_integrator(model, cfg):
    """
    :param model: ModelSpec
    :param cfg: SchemeConfig
    :return: the Integrator for ``cfg.kind``
    """
    return drivers[cfg.kind](model, cfg)
