import sys

sys.path.insert(0, "../")
import hamlag as hl
import numpy as np
import pytest
from scipy.optimize import brentq
from hamlag.exceptions import (
    ConfigInvalid,
    DegenerateNonlinearity,
    DerivativeUnderflow,
    FixedPointNonConvergence,
    MultiplierOutOfRange,
    NearOrthogonality,
    NonConvergence,
    SAVSqrtDomain,
)
from hamlag.integrators import gauss_split, get_integrator, sav_initial

kdv_cfg = hl.ExperimentConfig("kdv", "one-soliton")
kdv = kdv_cfg.build_model()
z0 = hl.initial_state(kdv, "one-soliton")
linear = hl.kdv_model(0.0, kdv.params["mu"], kdv.grid)


def quartic_model():
    """``N(u) = u⁴/4`` on four points of [0, 1] with S = L = 0"""
    grid = hl.Grid((0.0, 1.0), 4)
    zero = np.zeros(grid.shape + (1, 1), dtype=complex)
    return hl.ModelSpec(
        "quartic", grid, 1, zero, zero, lambda z: z[0] ** 4 / 4, lambda z: z**3
    )


def const(v):
    return v * np.ones((1, 4))


def cn_closed_form(model, z, dt):
    m = model.sl_blocks[:, 0, 0]
    return np.fft.ifft((1 + 0.5 * dt * m) / (1 - 0.5 * dt * m) * np.fft.fft(z[0])).real[None]


def test_newton_scalar():
    sol = hl.newton_scalar(lambda x: x - 1, lambda x: 1.0, 3.0)
    assert sol.iterations == 1
    assert sol.lam == 1.0
    sol = hl.newton_scalar(lambda x: x**3 - 8, lambda x: 3 * x**2, 3.0)
    assert abs(sol.lam - 2.0) < 1e-12
    assert sol.iterations <= 8
    assert abs(sol.lam - brentq(lambda x: x**3 - 8, 1, 3, xtol=1e-15)) < 1e-12
    assert hl.newton_scalar(lambda x: x - 1, lambda x: 1.0, 1.0).iterations == 0


def test_newton_scalar_failures():
    with pytest.raises(DerivativeUnderflow):
        hl.newton_scalar(lambda x: 1.0, lambda x: 0.0, 1.0)
    with pytest.raises(NonConvergence) as excinfo:
        hl.newton_scalar(lambda x: x**3 - 8, lambda x: 3 * x**2, 3.0, maxit=2)
    assert excinfo.value.iterations == 2


def test_multiplier_linear_root():
    model = quartic_model()
    z, zt, p = const(1.0), const(1.05), const(1.1)
    sol = hl.solve_multiplier_cn(model, p, np.zeros((1, 4)), z, zt)
    assert sol.iterations == 1
    assert sol.lam == pytest.approx((1.1**4 - 1) / 4 / (0.1 * 1.05**3))


def test_multiplier_bisection_oracle():
    model = quartic_model()
    z, p, q = const(1.0), const(1.0), const(0.1)
    sol = hl.solve_multiplier_cn(model, p, q, z, z, tol=1e-14)

    def g(lam):
        return (1 + 0.1 * lam) ** 4 / 4 - 0.25 - 0.1 * lam**2

    root = brentq(g, 0.5, 1.5, xtol=1e-15)
    assert abs(sol.lam - root) < 1e-12
    assert 1.0 < sol.lam < 1.5


def test_multiplier_out_of_range():
    model = quartic_model()
    with pytest.raises(MultiplierOutOfRange) as excinfo:
        hl.solve_multiplier_cn(model, const(0.0), const(1.0), const(0.0), const(1.0))
    # g(λ) = λ⁴/4 - λ² has no root in (0.5, 1.5), |g| is smallest at the edge
    assert excinfo.value.lam == pytest.approx(0.5, abs=1e-3)
    assert excinfo.value.residual > 0.2


def test_nearest_root_newton_path():
    # roots at 1 + 1e-4 ± 1e-3, Newton from 1 walks to the lower one, which is nearer
    sol = hl.nearest_root(
        lambda x: (x - 1 - 1e-4) ** 2 - 1e-6, lambda x: 2 * (x - 1 - 1e-4)
    )
    assert sol.lam == pytest.approx(1 + 1e-4 - 1e-3, abs=1e-12)
    assert not sol.restarted and not sol.near_orthogonal


def test_nearest_root_far_newton_jump():
    # g'(1) = 1e-9 would throw Newton 1e3 away, the roots sit at about 1 ± 1e-3
    def g(x):
        return (x - 1) ** 2 + 1e-9 * (x - 1) - 1e-6

    sol = hl.nearest_root(g, lambda x: 2 * (x - 1) + 1e-9)
    root = brentq(g, 1.0, 1.1, xtol=1e-16)
    assert sol.restarted and sol.converged
    assert abs(sol.lam - root) < 1e-13
    assert abs(sol.lam - 1) < 1.1e-3
    # the quadratic model of g is exact here, the restart lands on the root
    assert sol.iterations <= 2


def test_nearest_root_mirror_check():
    # Newton lands on 0.98 while g turns negative 1.4e-4 above 1
    def g(x):
        return (x - 0.98) - 1e6 * max(x - 1, 0.0) ** 2

    sol = hl.nearest_root(g, lambda x: 1 - 2e6 * max(x - 1, 0.0))
    assert sol.restarted
    assert sol.lam == pytest.approx(1 + (1 + np.sqrt(1 + 8e4)) / 2e6, abs=1e-12)


def test_nearest_root_tangent():
    with pytest.warns(NearOrthogonality):
        sol = hl.nearest_root(lambda x: (x - 1) ** 2 + 1e-10, lambda x: 2 * (x - 1))
    assert sol.lam == 1.0
    assert sol.near_orthogonal and not sol.converged
    # the minimum sits at 1.01, λ stops where the residual first drops to twice it
    with pytest.warns(NearOrthogonality):
        sol = hl.nearest_root(
            lambda x: (x - 1.01) ** 2 + 1e-10, lambda x: 2 * (x - 1.01)
        )
    assert sol.lam == pytest.approx(1.01 - 1e-5, abs=1e-9)
    assert sol.residual == pytest.approx(2e-10, rel=1e-3)


def test_newton_scalar_guards():
    with pytest.raises(NonConvergence) as excinfo:
        hl.newton_scalar(lambda x: x - 2.0, lambda x: 1.0, 1.0, trust=0.5)
    assert excinfo.value.iterations == 1
    sol = hl.newton_scalar(
        lambda x: x**3 - 8, lambda x: 3 * x**2, 3.0, tol=0.0, xtol=1e-12
    )
    assert abs(sol.lam - 2.0) < 1e-12


def test_energy_scale():
    assert hl.energy_scale(quartic_model(), const(0.0)) == 1.0
    assert hl.energy_scale(quartic_model(), const(1.0)) == pytest.approx(0.25)
    h = hl.energy(kdv, z0)
    assert hl.energy_scale(kdv, z0) == pytest.approx(abs(h.quadratic) + abs(h.nonlinear))


def test_multiplier_degenerate():
    sol = hl.solve_multiplier_cn(linear, z0, np.zeros_like(z0), z0, z0)
    assert sol.degenerate
    assert sol.lam == 1.0 and sol.iterations == 0


def test_scheme_config():
    cfg = hl.SchemeConfig.from_id("LM-GAUSS3", 0.002)
    assert cfg.kind == "LM-GAUSS" and cfg.tableau.s == 3 and cfg.sweeps == 6
    assert cfg.label == "LM-GAUSS3"
    cfg = hl.SchemeConfig.from_id("LM-GAUSS2", 0.002, sweeps=3)
    assert cfg.order == 3
    assert cfg.label == "LM-GAUSS2/L3"
    assert cfg.with_dt(0.001).sweeps == 3
    assert hl.SchemeConfig.from_id("SAV-CN", 0.1).c0 == 1.0
    assert hl.SchemeConfig.from_id("GAUSS-FP3", 0.1).order == 6
    for bad in ("LM-CN2", "LM-GAUSS", "LM-GAUSS4", "IEQ-CN"):
        with pytest.raises(ConfigInvalid):
            hl.SchemeConfig.from_id(bad, 0.1)
    with pytest.raises(ConfigInvalid):
        hl.SchemeConfig("LM-CN", 0.0)
    with pytest.raises(ConfigInvalid):
        hl.SchemeConfig("LM-GAUSS", 0.1, stages=2, sweeps=0)


def test_lm_cn_linear_is_crank_nicolson():
    cfg = hl.SchemeConfig("LM-CN", 0.002)
    zt = hl.startup_extrapolant(linear, z0, 0.002)
    z1, record = hl.lm_cn_step(linear, z0, zt, cfg)
    assert record.lam == 1.0 and record.degenerate
    assert np.max(np.abs(z1 - cn_closed_form(linear, z0, 0.002))) < 1e-13


def test_lm_cn_energy():
    integrator = hl.LMCN(kdv, hl.SchemeConfig("LM-CN", 0.002))
    integrator.prepare(z0)
    h0 = hl.energy(kdv, z0).total
    h = h0
    for record in integrator.run(20):
        assert abs(record.energy.total - h) / abs(h0) < 1e-10
        assert abs(record.lam - 1) < 1e-2
        h = record.energy.total
    assert integrator.t == pytest.approx(0.04)
    assert record.t_end == pytest.approx(0.04)


def test_startup_extrapolant():
    assert np.all(hl.startup_extrapolant(kdv, z0, 0.0) == z0)
    m = linear.sl_blocks[:, 0, 0]
    dts = [0.002 / 2**k for k in range(4)]
    errors = []
    for dt in dts:
        exact = np.fft.ifft(np.exp(0.5 * dt * m) * np.fft.fft(z0[0])).real
        errors.append(np.max(np.abs(hl.startup_extrapolant(linear, z0, dt)[0] - exact)))
    assert abs(hl.cons.log2_slope(dts, errors) - 2) < 0.1


def test_predict_stages_linear():
    t = hl.gauss_tableau(2)
    one = hl.predict_stages(linear, z0, t, 1, 0.002)
    four = hl.predict_stages(linear, z0, t, 4, 0.002)
    assert np.max(np.abs(one - four)) < 1e-14
    tiny = hl.predict_stages(kdv, z0, t, 4, 1e-12)
    assert np.max(np.abs(tiny - z0[None])) < 1e-9
    assert np.all(hl.predict_stages(kdv, z0, t, 0, 0.002) == z0[None])
    with pytest.raises(ValueError):
        hl.predict_stages(kdv, z0, t, -1, 0.002)


def test_correction_is_last_sweep():
    cfg = hl.SchemeConfig("PC-GAUSS", 0.002, stages=2, sweeps=3)
    stages = hl.predict_stages(kdv, z0, cfg.tableau, 2, 0.002)
    _, _, l2, r2 = gauss_split(kdv, z0, stages, cfg.tableau, 0.002)
    z1, _ = hl.pc_gauss_step(kdv, z0, cfg)
    assert np.max(np.abs(z1 - (l2 + r2))) < 1e-15
    assert cfg.order == 3


def test_pure_steps_report_t_end():
    zt = hl.startup_extrapolant(kdv, z0, 0.002)
    _, record = hl.lm_cn_step(kdv, z0, zt, hl.SchemeConfig("LM-CN", 0.002), t=0.1)
    assert record.t_end == pytest.approx(0.102)
    _, record = hl.lm_gauss_step(kdv, z0, hl.SchemeConfig("LM-GAUSS", 0.002, stages=2))
    assert record.t_end == pytest.approx(0.002)
    _, record = hl.pc_gauss_step(kdv, z0, hl.SchemeConfig("PC-GAUSS", 0.002, stages=1), t=1)
    assert record.t_end == pytest.approx(1.002)
    cfg = hl.SchemeConfig("SAV-CN", 0.002)
    _, _, record = hl.sav_cn_step(kdv, z0, sav_initial(kdv, z0), zt, cfg, t=0.5)
    assert record.t_end == pytest.approx(0.502)
    _, record = hl.gauss_fp_step(linear, z0, hl.SchemeConfig("GAUSS-FP", 0.002, stages=1))
    assert record.t_end == pytest.approx(0.002)


@pytest.mark.parametrize("s", [1, 2, 3])
def test_lm_gauss_linear_matches_gauss_fp(s):
    lm = hl.SchemeConfig("LM-GAUSS", 0.002, stages=s)
    fp = hl.SchemeConfig("GAUSS-FP", 0.002, stages=s)
    pc = hl.SchemeConfig("PC-GAUSS", 0.002, stages=s)
    z1, record = hl.lm_gauss_step(linear, z0, lm)
    z2, record2 = hl.gauss_fp_step(linear, z0, fp)
    z3, _ = hl.pc_gauss_step(linear, z0, pc)
    assert record.lam == 1.0 and record.iterations == 0 and record.degenerate
    assert record2.iterations == 1
    assert np.max(np.abs(z1 - z2)) < 1e-12
    assert np.max(np.abs(z1 - z3)) < 1e-14


def test_lm_gauss1_linear_is_crank_nicolson():
    z1, _ = hl.lm_gauss_step(linear, z0, hl.SchemeConfig("LM-GAUSS", 0.002, stages=1))
    assert np.max(np.abs(z1 - cn_closed_form(linear, z0, 0.002))) < 1e-13


@pytest.mark.parametrize("s", [2, 3])
def test_lm_gauss_energy(s):
    cfg = hl.SchemeConfig("LM-GAUSS", 0.002, stages=s)
    z = z0
    h0 = hl.energy(kdv, z0).total
    h = h0
    for _ in range(10):
        z, record = hl.lm_gauss_step(kdv, z, cfg)
        assert abs(record.energy.total - h) / abs(h0) < 1e-10
        assert abs(record.lam - 1) < 0.5
        assert record.iterations <= 4
        h = record.energy.total


def test_gauss_fp_step():
    cfg = hl.SchemeConfig("GAUSS-FP", 0.002, stages=3)
    z1, record = hl.gauss_fp_step(kdv, z0, cfg)
    assert record.lam == 1.0
    assert 1 <= record.iterations < 200
    lm = hl.SchemeConfig("LM-GAUSS", 0.002, stages=3)
    z2, _ = hl.lm_gauss_step(kdv, z0, lm)
    assert np.max(np.abs(z1 - z2)) < 1e-8
    with pytest.raises(FixedPointNonConvergence):
        hl.gauss_fp_step(kdv, z0, hl.SchemeConfig("GAUSS-FP", 0.002, stages=2, fp_maxit=1))


def test_sav_cn_linear():
    cfg = hl.SchemeConfig("SAV-CN", 0.002)
    r0 = sav_initial(linear, z0, cfg.c0)
    assert r0 == 1.0
    z1, r1, record = hl.sav_cn_step(linear, z0, r0, z0, cfg)
    assert r1 == 1.0
    assert record.modified_energy == pytest.approx(
        hl.energy(linear, z1).quadratic + 1.0, rel=1e-14
    )
    assert np.max(np.abs(z1 - cn_closed_form(linear, z0, 0.002))) < 1e-13


def test_sav_cn_modified_energy():
    integrator = hl.SAVCN(kdv, hl.SchemeConfig("SAV-CN", 0.002))
    integrator.prepare(z0)
    m0 = integrator.modified_energy0
    for record in integrator.run(20):
        assert abs(record.modified_energy - m0) / abs(m0) < 1e-10
        assert record.lam == 1.0


def test_sav_sqrt_domain():
    cfg = hl.SchemeConfig("SAV-CN", 0.002, c0=-1.0)
    with pytest.raises(SAVSqrtDomain):
        sav_initial(linear, z0, cfg.c0)
    with pytest.raises(SAVSqrtDomain):
        hl.sav_cn_step(linear, z0, 1.0, z0, cfg)


def test_drivers():
    for scheme in ("LM-CN", "SAV-CN", "LM-GAUSS2", "GAUSS-FP2", "PC-GAUSS2"):
        cfg = hl.SchemeConfig.from_id(scheme, 0.002)
        integrator = get_integrator(kdv, cfg)
        assert integrator.kind == cfg.kind
        integrator.prepare(z0)
        records = integrator.run(3)
        assert [r.t_end for r in records] == pytest.approx([0.002, 0.004, 0.006])
        assert all(r.wall_ns > 0 for r in records)
        assert np.all(np.isfinite(integrator.z))
    with pytest.raises(ConfigInvalid):
        hl.LMCN(kdv, hl.SchemeConfig("SAV-CN", 0.002))


def test_pc_gauss_drifts():
    cfg = hl.SchemeConfig("PC-GAUSS", 0.002, stages=1, sweeps=1)
    z = z0
    h0 = hl.energy(kdv, z0).total
    drift = 0.0
    for _ in range(20):
        z, record = hl.pc_gauss_step(kdv, z, cfg)
        drift = max(drift, abs(record.energy.total - h0) / abs(h0))
    assert drift > 1e-10


def test_degenerate_warned_once():
    integrator = hl.LMCN(linear, hl.SchemeConfig("LM-CN", 0.002))
    integrator.prepare(z0)
    with pytest.warns(DegenerateNonlinearity) as caught:
        records = integrator.run(3)
    assert len([w for w in caught if w.category is DegenerateNonlinearity]) == 1
    assert all(r.degenerate and r.lam == 1.0 for r in records)
