# -*- coding: utf-8 -*-
"""
module for the Fourier pseudo-spectral core: periodic grids, transforms,
differentiation symbols, discrete inner products and per-mode block solves

A state on a grid is a real ``np.ndarray`` of shape ``(c, *grid.shape)``, c being
the component count of the model. Stacks of stage states carry one more leading
axis, ``(s, c, *grid.shape)``. All transforms act on the trailing ``grid.dim`` axes.
"""

import logging

import numpy as np
import scipy.fft as sfft

from hamlag.cons import get_threads, singular_cond
from hamlag.exceptions import SingularModeBlock

logger = logging.getLogger(__name__)


class Grid:
    """
    periodic uniform mesh on a box in one or two dimensions

    :param bounds: a pair ``(x_L, x_R)`` for 1D, or a sequence of such pairs per axis
    :param n: int or sequence of int, points per axis, even and at least 4
    """

    def __init__(self, bounds, n):
        if np.ndim(bounds) == 1:
            bounds = [bounds]
        bounds = tuple((float(xl), float(xr)) for xl, xr in bounds)
        if isinstance(n, (int, np.integer)):
            n = [n] * len(bounds)
        n = tuple(int(m) for m in n)
        if len(bounds) not in (1, 2):
            raise ValueError("no %s-dimensional option for grid" % len(bounds))
        if len(n) != len(bounds):
            raise ValueError("bounds and n disagree on the dimension")
        for (xl, xr), m in zip(bounds, n):
            if not xr > xl:
                raise ValueError("empty interval [%s, %s]" % (xl, xr))
            if m < 4 or m % 2:
                raise ValueError("points per axis must be even and >= 4, got %s" % m)
        self.dim = len(bounds)
        self.bounds = bounds
        self.n = n
        self.shape = n
        self.lengths = tuple(xr - xl for xl, xr in bounds)
        self.dx = tuple(length / m for length, m in zip(self.lengths, n))
        self.weight = float(np.prod(self.dx))
        self.measure = float(np.prod(self.lengths))
        self.axes = tuple(
            xl + h * np.arange(m) for (xl, _), h, m in zip(bounds, self.dx, n)
        )
        self.wavenumbers = tuple(
            2 * np.pi * sfft.fftfreq(m, d=h) for m, h in zip(n, self.dx)
        )
        # read-only symbol arrays by (name, *args)
        self._symbols = {}

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.bounds == other.bounds
            and self.n == other.n
        )

    def __hash__(self):
        return hash((self.bounds, self.n))

    def __repr__(self):
        return "Grid(bounds=%s, n=%s)" % (self.bounds, self.n)

    @property
    def spatial_axes(self):
        """axes of a stacked array occupied by the grid"""
        return tuple(range(-self.dim, 0))

    def mesh(self):
        """
        :return: tuple of coordinate arrays of grid shape, ``indexing="ij"``
        """
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def wavenumber(self, axis):
        """
        wavenumbers of one axis reshaped to broadcast against grid-shaped arrays
        """
        shape = [1] * self.dim
        shape[axis] = self.n[axis]
        return self.wavenumbers[axis].reshape(shape)

    def _cached(self, key, build):
        if key not in self._symbols:
            arr = build()
            arr.flags.writeable = False
            self._symbols[key] = arr
        return self._symbols[key]

    def symbol(self, axis, order):
        """
        Fourier symbol ``(i k)^order`` of the derivative along ``axis``.
        The Nyquist entry is zeroed for odd orders so real fields stay real.

        :param axis: int, 0 or 1
        :param order: int, 1, 2 or 3
        :return: read-only np.ndarray broadcastable to the grid shape
        """
        if order not in (1, 2, 3):
            raise ValueError("no %s option for derivative order" % order)

        def build():
            sym = (1j * self.wavenumber(axis)) ** order
            if order % 2:
                index = [slice(None)] * self.dim
                index[axis] = self.n[axis] // 2
                sym[tuple(index)] = 0.0
            return sym

        return self._cached(("symbol", axis, order), build)

    def k_squared(self):
        """
        ``|k|^2`` on the full grid, the symbol of ``-Δ``, read-only
        """

        def build():
            total = np.zeros(self.shape)
            for axis in range(self.dim):
                total = total + self.wavenumber(axis) ** 2
            return total

        return self._cached(("k_squared",), build)


def forward_transform(grid, field):
    """
    unscaled DFT over the trailing grid axes

    :param grid: Grid
    :param field: real array whose trailing axes have grid shape
    :return: complex coefficients in standard DFT ordering
    """
    return sfft.fftn(field, axes=grid.spatial_axes, workers=get_threads())


def inverse_transform(grid, coeffs):
    """
    inverse of :func:`forward_transform`, scaled by 1/N per axis, real part only
    """
    return sfft.ifftn(coeffs, axes=grid.spatial_axes, workers=get_threads()).real


def spectral_derivative(grid, field, axis=0, order=1):
    """
    pseudo-spectral derivative of a periodic field

    :param grid: Grid
    :param field: real array with trailing grid axes
    :param axis: int, spatial axis to differentiate along
    :param order: int, 1, 2 or 3
    :return: real array of the same shape
    """
    sym = grid.symbol(axis, order)
    return inverse_transform(grid, sym * forward_transform(grid, field))


def inner_product(grid, a, b):
    """
    discrete L2 inner product, the rectangle rule over gridpoints and components

    :param grid: Grid
    :param a: state array
    :param b: state array of the same shape
    :return: float
    """
    return grid.weight * float(np.sum(np.asarray(a) * np.asarray(b)))


def apply_blocks(grid, blocks, z):
    """
    apply a mode block table to a state (or a stack of states)

    :param grid: Grid
    :param blocks: complex array ``(*grid.shape, c, c)``
    :param z: real array ``(..., c, *grid.shape)``
    :return: real array of the same shape as z
    """
    d = grid.dim
    zhat = np.moveaxis(forward_transform(grid, z), -d - 1, -1)
    yhat = np.einsum("...ij,...j->...i", blocks, zhat)
    return inverse_transform(grid, np.moveaxis(yhat, -1, -d - 1))


class ModeFactor:
    """
    per-mode inverses of ``I - dt (A ⊗ M_k)``, the stage operator of an implicit
    RK method applied to the constant-coefficient part ``S L``

    :param grid: Grid
    :param blocks: complex array ``(*grid.shape, c, c)``, the symbol ``M_k`` of S∘L
    :param a: s×s stage matrix
    :param dt: float, time step
    """

    def __init__(self, grid, blocks, a, dt):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        self.grid = grid
        self.s = a.shape[0]
        self.c = blocks.shape[-1]
        self.dt = dt
        size = self.s * self.c
        kron = np.einsum("ij,...ab->...iajb", a, blocks).reshape(
            grid.shape + (size, size)
        )
        system = np.eye(size) - dt * kron
        cond = np.linalg.cond(system)
        worst = float(np.max(cond)) if np.all(np.isfinite(cond)) else np.inf
        if worst > singular_cond:
            raise SingularModeBlock(worst, dt)
        logger.debug(
            "factorized %s mode blocks of size %s, worst condition %.3e"
            % (int(np.prod(grid.shape)), size, worst)
        )
        self.cond = worst
        self.inverse = np.linalg.inv(system)

    def solve(self, rhs):
        """
        :param rhs: real array ``(s, c, *grid.shape)``
        :return: real array of the same shape solving the coupled stage system
        """
        grid = self.grid
        size = self.s * self.c
        rhat = forward_transform(grid, rhs).reshape((size,) + grid.shape)
        yhat = np.einsum("...ij,...j->...i", self.inverse, np.moveaxis(rhat, 0, -1))
        yhat = np.moveaxis(yhat, -1, 0).reshape((self.s, self.c) + grid.shape)
        return inverse_transform(grid, yhat)

    def apply_system(self, y, a, blocks):
        """
        forward operator ``(I - dt (A ⊗ M)) y``, used to check residuals

        :param y: real array ``(s, c, *grid.shape)``
        :param a: s×s stage matrix the factor was built with
        :param blocks: the block table the factor was built with
        """
        a = np.atleast_2d(np.asarray(a, dtype=float))
        my = apply_blocks(self.grid, blocks, y)
        return y - self.dt * np.einsum("ij,j...->i...", a, my)


def solve_mode_block_system(grid, blocks, a, dt, rhs):
    """
    solve ``(I - dt (A ⊗ S L)) y = rhs`` mode by mode with dense solves

    :param grid: Grid
    :param blocks: complex array ``(*grid.shape, c, c)``
    :param a: s×s stage matrix
    :param dt: float
    :param rhs: real array ``(s, c, *grid.shape)``
    :return: real array ``(s, c, *grid.shape)``
    """
    return ModeFactor(grid, blocks, a, dt).solve(rhs)
