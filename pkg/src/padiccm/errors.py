"""Exception types shared across the package.

Every numeric failure mode raises a named exception; nothing is ever
silently extrapolated past its precision.
"""


class PadicError(Exception):
    pass


class NonUnitInput(PadicError):
    """Argument is divisible by p where a p-adic unit is required."""


class ZeroInput(PadicError):
    """Zero (at the working precision) passed where nonzero is required."""


class NotOneUnit(PadicError):
    """Argument is not congruent to 1 mod p."""


class HDivisibleByP(PadicError):
    """Root degree is divisible by p."""


class PrecisionLoss(PadicError):
    """An operation cannot certify the requested number of digits."""


class FieldError(Exception):
    pass


class NonFundamentalDiscriminant(FieldError):
    pass


class PSplitError(FieldError):
    """p does not split in the imaginary quadratic field (hypothesis fails)."""


class NormOverflow(FieldError):
    pass


class NotCoprime(FieldError):
    pass


class TorsionAmbiguity(FieldError):
    """w_K does not divide p-1, so the unit-root normalization is ambiguous."""


class CharacterError(FieldError):
    """Inconsistent ray-class character data."""


class QExpError(Exception):
    pass


class InsufficientPrecision(QExpError):
    pass


class ParityMismatch(QExpError):
    pass


class SpanDeficient(QExpError):
    """Eisenstein products failed to span the space; carries ranks."""

    def __init__(self, achieved, needed, msg=""):
        self.achieved = achieved
        self.needed = needed
        super().__init__(
            f"space not spanned: rank {achieved} < dimension {needed}. {msg}"
        )


class UnsupportedWeight(QExpError):
    pass


class NotInSpace(QExpError):
    pass


class SeriesError(Exception):
    pass


class BranchMismatch(SeriesError):
    pass


class PoleAtOne(SeriesError):
    pass


class NotCoprimeSupport(SeriesError):
    pass


class CongruenceError(Exception):
    pass


class SeparatorDegenerate(CongruenceError):
    """The chosen auxiliary prime fails to separate the two theta families."""


class NotAZero(CongruenceError):
    """B(k) is a p-adic unit: no trivial zero (r = 0)."""


class ResourceCapExceeded(CongruenceError):
    """Requested computation exceeds the configured Sturm-bound cap."""


class LValueError(Exception):
    pass


class PoleAt(LValueError):
    def __init__(self, s):
        self.s = s
        super().__init__(f"L-function has a pole at s={s}")


class ConvergenceBudgetExceeded(LValueError):
    pass


class LValueDivergence(LValueError):
    pass


class NotPrimitive(LValueError):
    pass


class CMPointPrecision(LValueError):
    pass


class RegulatorError(Exception):
    pass


class OMatrixSingular(RegulatorError):
    """Valuation matrix is singular: numeric Sigma-Leopoldt failure."""


class RankMismatch(RegulatorError):
    pass


class RankNotOne(RegulatorError):
    pass


class ArchimedeanRankDeficient(RegulatorError):
    pass


class SearchBudgetExceeded(RegulatorError):
    pass


class ConfigError(Exception):
    """Bad CLI configuration; exits with code 2."""
