"""Exception hierarchy shared by all modules.

Validation failures exit the CLI with code 1, convergence failures with
code 2 (partial results are still attached where they exist).
"""


class FractalHeatError(Exception):
    """Base class for all library errors."""


class ValidationError(FractalHeatError):
    """Domain or input validation failed."""


class RatioConditionViolated(ValidationError):
    """sum(r_j^d) >= 1 or sum(r_j^(d-1)) <= 1 on exact rationals."""


class OverlapDetected(ValidationError):
    """Two word images overlap at the reported depth."""

    def __init__(self, depth, word_a, word_b):
        self.depth = depth
        self.word_a = word_a
        self.word_b = word_b
        super().__init__(
            f"word images overlap at depth {depth}: {word_a} vs {word_b}"
        )


class DepthOverflow(FractalHeatError):
    """Aggregate word count exceeded the configured cap."""


class ConvergenceError(FractalHeatError):
    """A numerical routine could not reach its certified tolerance."""

    def __init__(self, message, value=None, bound=None):
        self.value = value
        self.bound = bound
        if value is not None:
            message = f"{message} (achieved value={value!r}, bound={bound!r})"
        super().__init__(message)


class ToleranceUnreachable(ConvergenceError):
    pass


class EvalNotConverged(ConvergenceError):
    pass


class QuadratureNotConverged(ConvergenceError):
    pass


class RegimeMismatch(FractalHeatError):
    """alpha does not fall in the regime required by the requested law."""


class WrongClassification(FractalHeatError):
    """Arithmetic/non-arithmetic limit requested for the other class."""


class CertificateViolated(FractalHeatError):
    """A source function exceeded its declared exponential-decay envelope."""
