import sys

sys.path.insert(0, "../")
import hamlag as hl
import numpy as np
import pytest
from hamlag.exceptions import ConfigInvalid
from hamlag.models import (
    kdv_one_soliton,
    kdv_two_soliton,
    nls_one_soliton,
    periodic_wrap,
)

kdv_cfg = hl.ExperimentConfig("kdv", "one-soliton")
kdv = kdv_cfg.build_model()
x = kdv.grid.axes[0]


def test_zero_mode_blocks():
    assert np.all(kdv.sl_blocks[0] == 0)
    nls = hl.nls_model(1.0, hl.Grid((-64, 64), 64))
    assert np.all(nls.sl_blocks[0] == 0)
    sg = hl.sg_model(1.0, hl.Grid([(-7, 7), (-7, 7)], 16))
    assert np.allclose(sg.sl_blocks[0, 0], [[0, 1], [0, 0]])


def test_kdv_vector_field():
    g = kdv.grid
    u = kdv_one_soliton(x, 0.0)
    eta, mu = kdv.params["eta"], kdv.params["mu"]
    expected = -eta * hl.spectral_derivative(g, u**2 / 2) - mu**2 * hl.spectral_derivative(
        g, u, order=3
    )
    assert np.max(np.abs(kdv.vector_field(u[None])[0] - expected)) < 1e-9


def test_nls_vector_field():
    g = hl.Grid((-64, 64), 256)
    model = hl.nls_model(1.0, g)
    u = nls_one_soliton(g.axes[0], 0.0)
    z = np.stack([u.real, u.imag])
    uxx = hl.spectral_derivative(g, u.real, order=2) + 1j * hl.spectral_derivative(
        g, u.imag, order=2
    )
    ut = 1j * uxx + 1j * np.abs(u) ** 2 * u
    f = model.vector_field(z)
    assert np.max(np.abs(f[0] - ut.real)) < 1e-12
    assert np.max(np.abs(f[1] - ut.imag)) < 1e-12


def test_sg_vector_field():
    g = hl.Grid([(-7, 7), (-7, 7)], 32)
    model = hl.sg_model(2.0, g)
    z = hl.initial_state(model, "ring")
    z[1] = 0.3
    lap = hl.spectral_derivative(g, z[0], axis=0, order=2) + hl.spectral_derivative(
        g, z[0], axis=1, order=2
    )
    f = model.vector_field(z)
    assert np.max(np.abs(f[0] - 0.3)) < 1e-12
    assert np.max(np.abs(f[1] - (lap - 2.0 * np.sin(z[0])))) < 1e-9


def test_energy():
    z = 0.5 * np.ones((1, 128))
    report = hl.energy(kdv, z)
    assert abs(report.quadratic) < 1e-14
    assert report.nonlinear == pytest.approx(-(0.5**3) / 6 * 8)
    assert report.total == report.quadratic + report.nonlinear
    g = hl.Grid([(-7, 7), (-7, 7)], 16)
    sg = hl.sg_model(1.0, g)
    z = np.zeros((2, 16, 16))
    z[1] = 1.0
    assert hl.energy(sg, z).total == pytest.approx(0.5 * 14 * 14)


def test_mass():
    z = hl.initial_state(kdv, "one-soliton")
    assert kdv.mass(z) == pytest.approx(np.mean(z))
    nls = hl.build("nls", hl.Grid((-64, 64), 128), beta=1.0)
    p, q = np.ones(128), np.ones(128)
    assert nls.mass(np.stack([p, q])) == pytest.approx(2 * 128)
    assert hl.build("sg", hl.Grid([(-7, 7), (-7, 7)], 8)).mass is None


def test_periodic_wrap():
    assert periodic_wrap(1.0, -3, 5) == 1.0
    assert periodic_wrap(6.0, -3, 5) == pytest.approx(-2.0)
    assert periodic_wrap(-4.0, -3, 5) == pytest.approx(4.0)
    assert periodic_wrap(21.0, -3, 5) == pytest.approx(-3.0)
    assert np.allclose(periodic_wrap(np.array([-11.5, 13.5]), -3, 5), [4.5, -2.5])


def test_kdv_one_soliton():
    u0 = kdv_one_soliton(x, 0.0)
    assert np.max(u0) == pytest.approx(1.0)
    assert np.max(np.abs(kdv_one_soliton(x, 24.0) - u0)) < 1e-12
    shifted = kdv_one_soliton(x, 3.0)
    assert x[np.argmax(shifted)] == pytest.approx(1.0, abs=kdv.grid.dx[0])


def test_kdv_two_soliton_initial():
    model = hl.ExperimentConfig("kdv", "two-soliton").build_model()
    z = hl.initial_state(model, "two-soliton")
    assert z.shape == (1, 128)
    assert np.all(np.isfinite(z))
    assert np.max(z) > 0
    assert np.allclose(z[0], kdv_two_soliton(model.grid.axes[0], 0.0))


def test_nls_initial_and_exact():
    model = hl.ExperimentConfig("nls", "one-soliton").build_model()
    z = hl.initial_state(model, "one-soliton")
    exact = hl.exact_solution(model, "one-soliton")
    assert np.max(np.abs(exact(0.0) - z)) < 1e-15
    assert np.max(np.abs(z[0] ** 2 + z[1] ** 2)) == pytest.approx(0.5, rel=1e-3)
    z2 = hl.initial_state(model, "two-soliton")
    assert z2.shape == (2, 128)
    assert hl.exact_solution(model, "two-soliton") is None


def test_sg_initial():
    model = hl.ExperimentConfig("sg", "collision").build_model()
    z = hl.initial_state(model, "collision")
    # mirror image across x = -10
    mirrored = z[:, (128 - np.arange(128)) % 128, :]
    assert np.allclose(z, mirrored, atol=1e-12)
    ring = hl.initial_state(hl.ExperimentConfig("sg", "ring").build_model(), "ring")
    assert np.all(ring[1] == 0)
    assert ring[0, 64, 64] == pytest.approx(4 * np.arctan(np.exp(3)))
    assert hl.exact_solution(model, "collision") is None


def test_registry_errors():
    with pytest.raises(ConfigInvalid):
        hl.build("heat", kdv.grid)
    with pytest.raises(ConfigInvalid):
        hl.build("kdv", kdv.grid, beta=1.0)
    with pytest.raises(ConfigInvalid):
        hl.initial_state(kdv, "ring")
    with pytest.raises(ValueError):
        hl.kdv_model(1.0, 1.0, hl.Grid([(-7, 7), (-7, 7)], 8))


def test_mode_factor_cached():
    a = hl.gauss_tableau(2).A
    assert kdv.mode_factor(a, 0.002) is kdv.mode_factor(a, 0.002)
    assert kdv.mode_factor(a, 0.002) is not kdv.mode_factor(a, 0.001)


def smooth_state(model, modes=4):
    """a few random low Fourier modes per component"""
    rng = np.random.default_rng(7)
    coords = model.grid.mesh()
    z = np.zeros(model.state_shape)
    for c in range(model.ncomp):
        for _ in range(modes):
            phase = rng.uniform(0, 2 * np.pi)
            arg = phase
            for xs, length in zip(coords, model.grid.lengths):
                arg = arg + 2 * np.pi * rng.integers(0, 4) * xs / length
            z[c] += rng.normal(scale=0.5) * np.cos(arg)
    return z


@pytest.mark.parametrize(
    "model",
    [
        kdv,
        hl.nls_model(1.0, hl.Grid((-64, 64), 64)),
        hl.sg_model(1.0, hl.Grid([(-7, 7), (-7, 7)], 16)),
    ],
    ids=["kdv", "nls", "sg"],
)
def test_vector_field_split(model):
    for _ in range(20):
        z = smooth_state(model)
        sl = model.apply_S(model.apply_L(z))
        assert np.max(np.abs(model.f1(z) - sl)) < 1e-10
        full = model.apply_S(model.apply_L(z) + model.n_grad(z))
        assert np.max(np.abs(model.vector_field(z) - full)) < 1e-10


def test_sg_energy_constant_pi():
    sg = hl.sg_model(1.0, hl.Grid([(-7, 7), (-7, 7)], 16))
    z = np.zeros((2, 16, 16))
    z[0] = np.pi
    report = hl.energy(sg, z)
    assert abs(report.quadratic) < 1e-12
    assert report.total == pytest.approx(392.0, rel=1e-12)


def test_mode_factor_eviction():
    from hamlag.cons import factor_cache_size

    model = hl.sg_model(1.0, hl.Grid([(-7, 7), (-7, 7)], 8))
    a = hl.gauss_tableau(1).A
    first = model.mode_factor(a, 0.01)
    for k in range(factor_cache_size):
        model.mode_factor(a, 0.02 + 0.01 * k)
    assert len(model._factors) == factor_cache_size
    assert model.mode_factor(a, 0.01) is not first
    assert model.mode_factor(a, 0.01).dt == 0.01
