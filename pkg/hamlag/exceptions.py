# -*- coding: utf-8 -*-
"""
exceptions in hamlag packages
"""


class HamlagException(Exception):
    pass


class SingularModeBlock(HamlagException):
    """
    Some per-mode stage matrix is numerically singular, the (Δt, model) combination is unstable
    """

    def __init__(self, cond, dt, reason=""):
        self.cond = cond
        self.dt = dt
        self.reason = reason or "mode block condition %.3e exceeds bound at dt=%s" % (
            cond,
            dt,
        )

    def __repr__(self):
        return self.reason

    __str__ = __repr__


class NonConvergence(HamlagException):
    """
    Used when a scalar Newton iteration exhausts its iteration budget
    """

    def __init__(self, x, iterations, residual, reason=""):
        self.x = x
        self.iterations = iterations
        self.residual = residual
        self.reason = reason or "no convergence after %s iterations, residual %.3e" % (
            iterations,
            residual,
        )

    def __repr__(self):
        return self.reason

    __str__ = __repr__


class MultiplierNonConvergence(NonConvergence):
    """
    Newton fails on the Lagrange multiplier equation
    """

    pass


class DerivativeUnderflow(NonConvergence):
    """
    Newton derivative vanished, no update can be formed
    """

    pass


class MultiplierOutOfRange(HamlagException):
    """
    No acceptable root near 1, signals Δt too large or a degenerate state
    """

    def __init__(self, lam, window, residual=None):
        self.lam = lam
        self.window = window
        self.residual = residual

    def __str__(self):
        if self.residual is not None:
            return "no root in |λ-1| < %s, best multiplier %.6g leaves residual %.3e" % (
                self.window,
                self.lam,
                self.residual,
            )
        return "multiplier %.6g outside the window |λ-1| < %s" % (self.lam, self.window)

    __repr__ = __str__


class SAVSqrtDomain(HamlagException):
    """
    F(z) + c0 is not positive, the auxiliary variable sqrt is undefined
    """

    def __init__(self, value):
        self.value = value

    def __str__(self):
        return "F(z)+c0 = %.6g is not positive, increase c0" % self.value

    __repr__ = __str__


class EliminationSingular(HamlagException):
    """
    Used when the scalar elimination of the SAV-CN system divides by ~0
    """

    pass


class FixedPointNonConvergence(HamlagException):
    """
    Used when the fully implicit Gauss stages do not settle within the sweep budget
    """

    def __init__(self, sweeps, increment):
        self.sweeps = sweeps
        self.increment = increment

    def __str__(self):
        return "fixed point not converged after %s sweeps, last increment %.3e" % (
            self.sweeps,
            self.increment,
        )

    __repr__ = __str__


class ConfigInvalid(HamlagException):
    """
    Used for experiment configurations failed to validate
    """

    pass


class StepFailure(HamlagException):
    """
    Wraps a scheme error raised inside a trajectory, the partial report is kept
    """

    def __init__(self, scheme, step, cause, report=None):
        self.scheme = scheme
        self.step = step
        self.cause = cause
        self.report = report

    def __str__(self):
        return "%s failed at step %s: %s: %s" % (
            self.scheme,
            self.step,
            type(self.cause).__name__,
            self.cause,
        )

    __repr__ = __str__


class DegenerateNonlinearity(UserWarning):
    """
    N'(z) vanishes, the multiplier is set to 1 and the step reduces to its linear part
    """

    pass


class NearOrthogonality(UserWarning):
    """
    The multiplier equation loses its unique local root, (N'(z), k) is close to 0
    """

    pass
