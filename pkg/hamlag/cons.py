# -*- coding: utf-8 -*-
"""
basic constants and utility functions
"""

import os
import sys
import logging

import numpy as np

logger = logging.getLogger(__name__)

thismodule = sys.modules[__name__]

eps = np.finfo(float).eps

# Newton on the Lagrange multiplier, "a tolerance of 1e-12" in the experiments
newton_tol = 1e-12
newton_maxit = 50
# fully implicit Gauss oracle
fp_tol = 1e-14
fp_maxit = 200
# SAV-CN
sav_c0 = 1.0

# accepted multipliers satisfy |λ-1| < lambda_window
lambda_window = 0.5
# Newton on λ also stops once its update is below newton_xtol * max(1, |λ|)
newton_xtol = 1e-12
# Newton from 1 is abandoned once it strays further than newton_trust
newton_trust = 5e-2
# finite difference step for g''(1) in the quadratic restart of the multiplier solve
curvature_step = 1e-4
# sign change scan around 1, geometric offsets from scan_start up to lambda_window
scan_start = 1e-12
scan_points = 64
# without a root in the window, min |g| must stay below tangent_tol * energy scale
tangent_tol = 1e-8
# per-mode stage matrices above this condition number are treated as singular
singular_cond = 1e14
# ||N'(z)|| below degenerate_tol * scale means the nonlinearity is absent
degenerate_tol = 1e-14
# |b (N'(z~), k)| below orthogonal_tol * scale triggers NearOrthogonality
orthogonal_tol = 1e-12
# SAV elimination denominator
elimination_tol = 1e-14
# scalar Newton refuses derivatives smaller than this
derivative_floor = 1e-300
# order cells with error below floor_factor * eps * scale are marked "floor"
floor_factor = 1e2
# |λ-1| below this is not resolved by the Newton increment stop
lambda_floor = 1e-11
# convergence ladders never go deeper than this
max_ladder = 6
# mode factorizations kept per model, oldest dropped first
factor_cache_size = 16

# the experiments of the three testbeds, keyed by model id and initial condition id
setups = {
    "kdv": {
        "one-soliton": {
            "bounds": [(-3.0, 5.0)],
            "n": [128],
            "params": {"eta": 1.0, "mu": float(np.sqrt(0.0013020833))},
            "dt": 0.002,
            "T": 1.0,
        },
        "two-soliton": {
            "bounds": [(-40.0, 40.0)],
            "n": [128],
            "params": {"eta": 1.0, "mu": 1.0},
            "dt": 0.002,
            "T": 1.0,
        },
    },
    "nls": {
        "one-soliton": {
            "bounds": [(-64.0, 64.0)],
            "n": [128],
            "params": {"beta": 1.0},
            "dt": 0.02,
            "T": 1.0,
        },
        "two-soliton": {
            "bounds": [(-64.0, 64.0)],
            "n": [128],
            "params": {"beta": 1.0},
            "dt": 0.02,
            "T": 1.0,
        },
    },
    "sg": {
        "ring": {
            "bounds": [(-7.0, 7.0), (-7.0, 7.0)],
            "n": [128, 128],
            "params": {"phi0": 1.0},
            "dt": 0.02,
            "T": 1.0,
        },
        "collision": {
            "bounds": [(-30.0, 10.0), (-21.0, 7.0)],
            "n": [128, 128],
            "params": {"phi0": 1.0},
            "dt": 0.02,
            "T": 1.0,
        },
    },
}


def get_threads():
    """
    the cap on concurrently running study cells and on scipy.fft workers,
    from :func:`set_threads` or ``HAMLAG_THREADS``, default is the number of cores

    :return: int, at least 1
    """
    n = getattr(thismodule, "threads", None)
    if n is None:
        env = os.environ.get("HAMLAG_THREADS", "")
        try:
            n = int(env)
        except ValueError:
            if env:
                logger.warning("unrecognized HAMLAG_THREADS=%s, use default" % env)
            n = os.cpu_count() or 1
    return max(1, n)


def set_threads(n=None):
    """
    cap the parallelism at runtime, None falls back to the environment

    :param n: Optional[int].
    :return: None.
    """
    setattr(thismodule, "threads", n)


def max_norm(a):
    """
    discrete maximum norm over grid points and components
    """
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a)))


def relative_drift(value, reference):
    """
    signed drift of ``value`` against ``reference``, relative when the reference is not ~0

    :param value: float or np.ndarray
    :param reference: float, the t=0 quantity
    :return: same shape as value
    """
    denom = abs(reference) if abs(reference) > eps else 1.0
    return (np.asarray(value, dtype=float) - reference) / denom


def observed_order(coarse, fine, ratio=2.0):
    """
    observed temporal order between two errors on a ladder with the given step ratio
    """
    return float(np.log(coarse / fine) / np.log(ratio))


def log2_slope(dts, values):
    """
    least squares slope of log2(values) against log2(dts)

    :param dts: list of step sizes
    :param values: list of positive quantities measured at those steps
    :return: float
    """
    x = np.log2(np.asarray(dts, dtype=float))
    y = np.log2(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
