"""Exception hierarchy for the :mod:`equicorr` package.

Two failure families matter to callers (and to the command-line tool,
which maps them onto distinct exit codes):

* :class:`InvalidInputError` -- the caller asked for something outside the
  domain of the procedure (a correlation of 1.2, a negative prior variance,
  an unattainable false-positive target, ...).
* :class:`ConvergenceError` -- the inputs were legal but an iterative
  numerical routine (quadrature refinement, root bracketing, likelihood
  maximisation) failed to reach its advertised accuracy.
"""

from __future__ import annotations


class EquicorrError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(EquicorrError, ValueError):
    """An argument lies outside the mathematical domain of the routine."""


class ConvergenceError(EquicorrError, RuntimeError):
    """An iterative numerical procedure failed to meet its tolerance."""


class BoundaryFitWarning(UserWarning):
    """A fitted quantity landed on the boundary of its parameter space.

    Emitted (never raised) when an optimisation returns a boundary value
    that callers may want to treat specially -- e.g. a marginal-likelihood
    variance fit of exactly zero on data with no discernible signal.
    """


class DomainWarning(UserWarning):
    """Inputs are legal but outside the regime a formula was derived for.

    Emitted when an asymptotic expression is evaluated at a size where its
    defining expansion has not kicked in (e.g. ``log log n <= 0``); the
    value is still computed and returned.
    """
