# -*- coding: utf-8 -*-
"""
Hamiltonian PDE instances z_t = S(L z + N'(z)) on periodic grids,
their energies and the exact or initial solutions of the three testbeds
"""

import logging
import threading

import numpy as np

from hamlag.cons import factor_cache_size, setups
from hamlag.exceptions import ConfigInvalid
from hamlag.spectral import ModeFactor, apply_blocks, inner_product

logger = logging.getLogger(__name__)


class EnergyReport:
    """
    the Hamiltonian split as ``1/2 (z, L z) + (N(z), 1)``
    """

    def __init__(self, quadratic, nonlinear):
        self.quadratic = float(quadratic)
        self.nonlinear = float(nonlinear)
        self.total = self.quadratic + self.nonlinear

    def __repr__(self):
        return "EnergyReport(quadratic=%.17g, nonlinear=%.17g, total=%.17g)" % (
            self.quadratic,
            self.nonlinear,
            self.total,
        )


class ModelSpec:
    """
    a Hamiltonian PDE discretized by the Fourier pseudo-spectral method

    :param name: str, model id
    :param grid: Grid
    :param ncomp: int, component count c
    :param s_blocks: complex array ``(*grid.shape, c, c)``, symbol of the skew operator S
    :param l_blocks: complex array ``(*grid.shape, c, c)``, symbol of the symmetric operator L
    :param n_density: callable, state -> grid-shaped array N(z)
    :param n_grad: callable, state -> state N'(z)
    :param mass: Optional[callable], state -> float, a quadratic or linear sub-invariant
    :param params: dict, the physical parameters, kept for reports
    """

    def __init__(
        self,
        name,
        grid,
        ncomp,
        s_blocks,
        l_blocks,
        n_density,
        n_grad,
        mass=None,
        params=None,
    ):
        self.name = name
        self.grid = grid
        self.ncomp = ncomp
        self.s_blocks = s_blocks
        self.l_blocks = l_blocks
        self.sl_blocks = np.matmul(s_blocks, l_blocks)
        self.n_density = n_density
        self.n_grad = n_grad
        self.mass = mass
        self.params = params or {}
        self._factors = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return "ModelSpec(%s, %s, %s)" % (self.name, self.params, self.grid)

    @property
    def state_shape(self):
        return (self.ncomp,) + self.grid.shape

    def apply_S(self, z):
        return apply_blocks(self.grid, self.s_blocks, z)

    def apply_L(self, z):
        return apply_blocks(self.grid, self.l_blocks, z)

    def apply_SL(self, z):
        return apply_blocks(self.grid, self.sl_blocks, z)

    def f1(self, z):
        """linear part of the vector field, ``S L z``"""
        return self.apply_SL(z)

    def f2(self, z):
        """nonlinear part of the vector field, ``S N'(z)``"""
        return self.apply_S(self.n_grad(z))

    def vector_field(self, z):
        return self.f1(z) + self.f2(z)

    def inner(self, a, b):
        return inner_product(self.grid, a, b)

    def nonlinear_energy(self, z):
        """``F(z) = (N(z), 1)``"""
        return self.grid.weight * float(np.sum(self.n_density(z)))

    def mode_factor(self, a, dt):
        """
        cached per-mode factorization of ``I - dt (A ⊗ S L)``; the operator is
        constant-coefficient so one factor serves every step of a run

        :param a: s×s stage matrix
        :param dt: float
        :return: :class:`hamlag.spectral.ModeFactor`
        """
        a_key = tuple(tuple(float(v) for v in row) for row in np.atleast_2d(a))
        key = (a_key, float(dt))
        with self._lock:
            if key not in self._factors:
                if len(self._factors) >= factor_cache_size:
                    self._factors.pop(next(iter(self._factors)))
                self._factors[key] = ModeFactor(
                    self.grid, self.sl_blocks, np.array(a_key), key[1]
                )
            return self._factors[key]


def energy(model, state):
    """
    :param model: ModelSpec
    :param state: array ``(c, *grid.shape)``
    :return: EnergyReport
    """
    quadratic = 0.5 * model.inner(state, model.apply_L(state))
    return EnergyReport(quadratic, model.nonlinear_energy(state))


def _pointwise(grid, matrix):
    """the same c×c matrix at every Fourier mode"""
    matrix = np.asarray(matrix, dtype=complex)
    return np.broadcast_to(matrix, grid.shape + matrix.shape).copy()


def _diagonal(grid, *symbols):
    c = len(symbols)
    blocks = np.zeros(grid.shape + (c, c), dtype=complex)
    for i, sym in enumerate(symbols):
        blocks[..., i, i] = np.broadcast_to(sym, grid.shape)
    return blocks


def kdv_model(eta, mu, grid):
    """
    ``u_t + η u u_x + μ² u_xxx = 0`` with S = ∂x, L = -μ² ∂xx, N(u) = -η u³/6

    :param eta: float
    :param mu: float
    :param grid: 1D Grid
    :return: ModelSpec
    """
    if grid.dim != 1:
        raise ValueError("KdV needs a 1D grid, got %sD" % grid.dim)
    s_blocks = _diagonal(grid, grid.symbol(0, 1))
    l_blocks = _diagonal(grid, mu**2 * grid.k_squared())

    def n_density(z):
        return -eta * z[0] ** 3 / 6.0

    def n_grad(z):
        return -eta * z[:1] ** 2 / 2.0

    def mass(z):
        return float(np.mean(z[0]))

    return ModelSpec(
        "kdv",
        grid,
        1,
        s_blocks,
        l_blocks,
        n_density,
        n_grad,
        mass=mass,
        params={"eta": eta, "mu": mu},
    )


_symplectic = [[0.0, 1.0], [-1.0, 0.0]]


def nls_model(beta, grid):
    """
    ``i u_t + u_xx + β|u|²u = 0`` written for z = (Re u, Im u) with
    S = [[0, 1], [-1, 0]], L = diag(-∂xx, -∂xx), N = -(β/4)(p²+q²)²

    :param beta: float
    :param grid: 1D Grid
    :return: ModelSpec
    """
    if grid.dim != 1:
        raise ValueError("NLS needs a 1D grid, got %sD" % grid.dim)
    k2 = grid.k_squared()
    s_blocks = _pointwise(grid, _symplectic)
    l_blocks = _diagonal(grid, k2, k2)

    def n_density(z):
        return -0.25 * beta * (z[0] ** 2 + z[1] ** 2) ** 2

    def n_grad(z):
        return -beta * (z[0] ** 2 + z[1] ** 2) * z

    def mass(z):
        return grid.weight * float(np.sum(z[0] ** 2 + z[1] ** 2))

    return ModelSpec(
        "nls",
        grid,
        2,
        s_blocks,
        l_blocks,
        n_density,
        n_grad,
        mass=mass,
        params={"beta": beta},
    )


def sg_model(phi0, grid):
    """
    ``u_tt - Δu + φ0 sin u = 0`` written for z = (u, u_t) with
    S = [[0, 1], [-1, 0]], L = diag(-Δ, 1), N = φ0 (1 - cos u)

    :param phi0: float
    :param grid: 2D Grid
    :return: ModelSpec
    """
    if grid.dim != 2:
        raise ValueError("sine-Gordon needs a 2D grid, got %sD" % grid.dim)
    s_blocks = _pointwise(grid, _symplectic)
    l_blocks = _diagonal(grid, grid.k_squared(), 1.0)

    def n_density(z):
        return phi0 * (1.0 - np.cos(z[0]))

    def n_grad(z):
        g = np.zeros_like(z)
        g[0] = phi0 * np.sin(z[0])
        return g

    return ModelSpec(
        "sg", grid, 2, s_blocks, l_blocks, n_density, n_grad, params={"phi0": phi0}
    )


## exact and initial solutions


def periodic_wrap(theta, xl, xr):
    """
    map θ back into [x_L, x_R] by the remainder of the integer division,
    separately for θ < x_L and θ > x_R

    :param theta: float or np.ndarray
    :return: same shape as theta
    """
    theta = np.asarray(theta, dtype=float)
    length = xr - xl
    below = xr - np.fmod(xr - theta, length)
    above = xl + np.fmod(theta - xl, length)
    return np.where(theta < xl, below, np.where(theta > xr, above, theta))


def kdv_one_soliton(x, t, gamma=1.0 / 3, mu=None, bounds=(-3.0, 5.0)):
    """
    ``3γ sech²(√γ/(2μ) (x - γt)_Ω)``, periodic in time with period |Ω|/γ

    :param x: float or np.ndarray
    :param t: float
    :param gamma: float, speed
    :param mu: float, default sqrt(0.0013020833)
    :param bounds: (x_L, x_R)
    """
    if mu is None:
        mu = setups["kdv"]["one-soliton"]["params"]["mu"]
    theta = periodic_wrap(np.asarray(x) - gamma * t, *bounds)
    return 3 * gamma / np.cosh(np.sqrt(gamma) / (2 * mu) * theta) ** 2


def two_soliton_phases(x, t, k1=0.4, k2=0.6):
    """
    :return: tuple (ξ1, ξ2, ρ) of the KdV two-soliton formula
    """
    x = np.asarray(x, dtype=float)
    xi1 = k1 * x - k1**3 * t + 4.0
    xi2 = k2 * x - k2**3 * t + 15.0
    rho = (k1 - k2) / (k1 + k2)
    return xi1, xi2, rho


def kdv_two_soliton(x, t, k1=0.4, k2=0.6):
    """
    closed-form two-soliton of ``u_t + u u_x + u_xxx = 0``
    """
    xi1, xi2, rho = two_soliton_phases(x, t, k1, k2)
    e1, e2, e12 = np.exp(xi1), np.exp(xi2), np.exp(xi1 + xi2)
    num = (
        k1**2 * e1
        + k2**2 * e2
        + 2 * (k2 - k1) ** 2 * e12
        + rho**2 * (k2**2 * e1 + k1**2 * e2) * e12
    )
    den = (1 + e1 + e2 + rho**2 * e12) ** 2
    return 12 * num / den


def nls_one_soliton(x, t):
    """
    travelling soliton of ``i u_t + u_xx + |u|²u = 0`` through the printed initial data

    :return: complex np.ndarray
    """
    x = np.asarray(x, dtype=float)
    return (
        np.sqrt(2.0)
        / 2
        * np.exp(0.5j * (x + 20))
        / np.cosh((x + 20 - t) / 2)
    )


def nls_initial(kind, x):
    """
    :param kind: str, "one-soliton" or "two-soliton"
    :param x: np.ndarray
    :return: tuple (p, q) of real and imaginary parts
    """
    x = np.asarray(x, dtype=float)
    if kind in ("one", "one-soliton"):
        u = nls_one_soliton(x, 0.0)
    elif kind in ("two", "two-soliton"):
        u = (
            np.sqrt(2.0)
            / 2
            * (
                np.exp(0.5j * (x + 20)) / np.cosh((x + 20) / 2)
                + np.exp(-0.5j * (x - 20)) / np.cosh((x - 20) / 2)
            )
        )
    else:
        raise ValueError("no %s option for NLS initial data" % kind)
    return u.real, u.imag


def sg_initial(kind, grid):
    """
    :param kind: str, "ring" or "collision"
    :param grid: 2D Grid
    :return: state array (2, *grid.shape) of (u, u_t)
    """
    x, y = grid.mesh()
    z = np.zeros((2,) + grid.shape)
    if kind == "ring":
        z[0] = 4 * np.arctan(np.exp(3 - np.sqrt(x**2 + y**2)))
    elif kind == "collision":
        # second ring is the mirror image across x = -10
        xm = -10 + np.abs(x + 10)
        arg = (4 - np.sqrt((xm + 3) ** 2 + (y + 7) ** 2)) / 0.436
        z[0] = 4 * np.arctan(np.exp(arg))
        z[1] = 4.13 / np.cosh(arg)
    else:
        raise ValueError("no %s option for sine-Gordon initial data" % kind)
    return z


## registry used by the harness

builders = {
    "kdv": lambda grid, eta=1.0, mu=1.0: kdv_model(eta, mu, grid),
    "nls": lambda grid, beta=1.0: nls_model(beta, grid),
    "sg": lambda grid, phi0=1.0: sg_model(phi0, grid),
}


def build(model_id, grid, **params):
    """
    :param model_id: str, "kdv", "nls" or "sg"
    :param grid: Grid
    :param params: model parameters
    :return: ModelSpec
    """
    if model_id not in builders:
        raise ConfigInvalid("unknown model %s" % model_id)
    try:
        return builders[model_id](grid, **params)
    except TypeError as e:
        raise ConfigInvalid("bad parameters %s for %s: %s" % (params, model_id, e))


def initial_state(model, initial):
    """
    :param model: ModelSpec
    :param initial: str, initial condition id
    :return: state array
    """
    grid = model.grid
    if model.name == "kdv":
        x = grid.axes[0]
        if initial == "one-soliton":
            return kdv_one_soliton(x, 0.0, mu=model.params["mu"], bounds=grid.bounds[0])[
                None
            ]
        if initial == "two-soliton":
            return kdv_two_soliton(x, 0.0)[None]
    elif model.name == "nls":
        if initial in ("one-soliton", "two-soliton"):
            return np.stack(nls_initial(initial, grid.axes[0]))
    elif model.name == "sg":
        if initial in ("ring", "collision"):
            return sg_initial(initial, grid)
    raise ConfigInvalid("no initial condition %s for model %s" % (initial, model.name))


def exact_solution(model, initial):
    """
    exact trajectory when the testbed has one

    :return: Optional[callable], t -> state array
    """
    grid = model.grid
    if model.name == "kdv" and initial == "one-soliton":
        x = grid.axes[0]
        return lambda t: kdv_one_soliton(
            x, t, mu=model.params["mu"], bounds=grid.bounds[0]
        )[None]
    if model.name == "nls" and initial == "one-soliton" and model.params["beta"] == 1:
        x = grid.axes[0]

        def nls_exact(t):
            u = nls_one_soliton(x, t)
            return np.stack([u.real, u.imag])

        return nls_exact
    return None
