"""Exception hierarchy shared across the package."""


class LatnasError(Exception):
    """Base class for all package-specific errors."""


class ShapeUnderflow(LatnasError):
    """Spatial resolution reached zero while propagating shapes."""


class InvalidArch(LatnasError):
    """Architecture uses a choice outside its skeleton's allowed sets."""


class TokenOutOfRange(LatnasError):
    """Token sequence is malformed or a token exceeds its slot arity."""


class ProfileMiss(LatnasError):
    """Device profile has no coefficients for a (conv variant, kernel) pair."""

    def __init__(self, op_kind: str, kernel: int):
        self.op_kind = op_kind
        self.kernel = kernel
        super().__init__(f"profile has no coefficients for ({op_kind}, k{kernel})")


class NonPositiveLatency(LatnasError):
    """Latency measurements must be strictly positive."""


class ExternalEvaluatorFailure(LatnasError):
    """External evaluator process failed (nonzero exit, crash)."""


class EvaluatorTimeout(ExternalEvaluatorFailure):
    """External evaluator did not answer within the configured timeout."""


class ProtocolViolation(LatnasError):
    """External evaluator reply was malformed or answered the wrong arch."""


class SpaceTooLarge(LatnasError):
    """Search-space cardinality exceeds the enumeration guard."""
