# -*- coding: utf-8 -*-
"""
Butcher tableaux of the Gauss collocation methods and the RK symplecticity check
"""

from functools import lru_cache

import numpy as np


class ButcherTableau:
    """
    Runge-Kutta coefficients

    :param a: s×s stage matrix
    :param b: s weights
    :param c: s nodes
    :param p: int, classical order
    :param name: str, label used in reports
    """

    def __init__(self, a, b, c, p, name=""):
        self.A = np.atleast_2d(np.asarray(a, dtype=float))
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        self.c = np.atleast_1d(np.asarray(c, dtype=float))
        self.s = len(self.b)
        self.p = int(p)
        self.name = name
        if self.A.shape != (self.s, self.s) or self.c.shape != (self.s,):
            raise ValueError("inconsistent tableau shapes for %s" % name)
        # the arrays are shared through the lru cache below
        for arr in (self.A, self.b, self.c):
            arr.setflags(write=False)

    def __repr__(self):
        return "ButcherTableau(%s, s=%s, p=%s)" % (self.name, self.s, self.p)

    def consistency_defect(self):
        """
        :return: float, max of |Σ b_i - 1| and |c_i - Σ_j a_ij|
        """
        return max(
            abs(float(np.sum(self.b)) - 1.0),
            float(np.max(np.abs(self.c - self.A.sum(axis=1)))),
        )

    def order_condition_defect(self, q):
        """
        quadrature condition ``Σ b_i c_i^(q-1) = 1/q``

        :param q: int, at least 1
        :return: float, absolute defect
        """
        return abs(float(np.dot(self.b, self.c ** (q - 1))) - 1.0 / q)


_r3 = np.sqrt(3.0)
_r15 = np.sqrt(15.0)


@lru_cache(maxsize=3)
def gauss_tableau(s):
    """
    s-stage Gauss collocation method of order 2s

    :param s: int, 1, 2 or 3
    :return: ButcherTableau
    """
    if s == 1:
        return ButcherTableau([[0.5]], [1.0], [0.5], p=2, name="GAUSS1")
    if s == 2:
        return ButcherTableau(
            [[0.25, 0.25 - _r3 / 6], [0.25 + _r3 / 6, 0.25]],
            [0.5, 0.5],
            [0.5 - _r3 / 6, 0.5 + _r3 / 6],
            p=4,
            name="GAUSS2",
        )
    if s == 3:
        return ButcherTableau(
            [
                [5 / 36, 2 / 9 - _r15 / 15, 5 / 36 - _r15 / 30],
                [5 / 36 + _r15 / 24, 2 / 9, 5 / 36 - _r15 / 24],
                [5 / 36 + _r15 / 30, 2 / 9 + _r15 / 15, 5 / 36],
            ],
            [5 / 18, 4 / 9, 5 / 18],
            [0.5 - _r15 / 10, 0.5, 0.5 + _r15 / 10],
            p=6,
            name="GAUSS3",
        )
    raise ValueError("no %s-stage option for Gauss tableau" % s)


explicit_euler = ButcherTableau([[0.0]], [1.0], [0.0], p=1, name="Explicit Euler")

crank_nicolson = ButcherTableau(
    [[0.0, 0.0], [0.5, 0.5]], [0.5, 0.5], [0.0, 1.0], p=2, name="Crank-Nicolson"
)


def symplecticity_defect(t):
    """
    ``max_ij |b_i b_j - b_i a_ij - b_j a_ji|``, zero for symplectic RK methods

    :param t: ButcherTableau
    :return: float
    """
    b = t.b
    m = np.outer(b, b) - b[:, None] * t.A - b[None, :] * t.A.T
    return float(np.max(np.abs(m)))
