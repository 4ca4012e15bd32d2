"""Exception hierarchy.

Every error raised by the library derives from :class:`LabError`.  The three
intermediate classes map onto the CLI exit codes: input problems (3),
numerical guards (4) and failed certifications (2).
"""


class LabError(Exception):
    """Base class for all library errors."""


class InputError(LabError, ValueError):
    """Malformed or inconsistent input (exit code 3)."""


class NumericalGuard(LabError, ArithmeticError):
    """A numerical safeguard tripped (exit code 4)."""


class CertificationFailure(LabError):
    """A structural condition was checked and found violated (exit code 2)."""


# core_model / fnspace input errors
class DimensionMismatch(InputError):
    pass


class NonIntegrableWeight(InputError):
    pass


class BandExceedsGrid(InputError):
    pass


# conditions
class NotElliptic(CertificationFailure):
    pass


class RealAxisRoot(NumericalGuard):
    pass


class WrongStableCount(NumericalGuard):
    pass


# poisson_kernels
class LeadingCoeffSingular(NumericalGuard):
    pass


class SpectralGapTooSmall(NumericalGuard):
    pass


class LopatinskiiSingular(NumericalGuard):
    pass


# solvers / fnspace numerics
class ResolventSingular(NumericalGuard):
    pass


class IllConditioned(NumericalGuard):
    pass


class TraceDivergence(NumericalGuard):
    pass


class HypothesisViolated(InputError):
    """A verification check was asked to run outside its hypotheses."""
