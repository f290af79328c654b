"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class BDMapError(Exception):
    """Base class. ``kind`` is the machine-readable error name."""

    kind = "Error"
    numerical = True

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class ValidationError(BDMapError, ValueError):
    kind = "ValidationError"
    numerical = False


class ParseError(ValidationError):
    kind = "ParseError"


class PreconditionError(ValidationError):
    kind = "PreconditionError"


class UnsupportedCase(ValidationError):
    kind = "UnsupportedCase"


class DomainViolation(ValidationError):
    kind = "DomainViolation"


class GridMismatch(ValidationError):
    kind = "GridMismatch"


class NonFinite(BDMapError, ArithmeticError):
    kind = "NonFinite"


class ToleranceNotMet(BDMapError, ArithmeticError):
    kind = "ToleranceNotMet"


class AtEigenvalue(BDMapError, ArithmeticError):
    kind = "AtEigenvalue"


class SingularTransfer(BDMapError, ArithmeticError):
    kind = "SingularTransfer"


class SingularLambda(BDMapError, ArithmeticError):
    kind = "SingularLambda"


class SingularDeterminant(BDMapError, ArithmeticError):
    kind = "SingularDeterminant"


class BracketingFailure(BDMapError, ArithmeticError):
    kind = "BracketingFailure"


class TailTooLarge(BDMapError, ArithmeticError):
    kind = "TailTooLarge"


class PhaseTrackingLost(BDMapError, ArithmeticError):
    kind = "PhaseTrackingLost"


class NotBelowSpectrum(BDMapError, ArithmeticError):
    kind = "NotBelowSpectrum"


class NotPositiveType(BDMapError, ArithmeticError):
    kind = "NotPositiveType"


class NotPD(NotPositiveType):
    kind = "NotPD"


class QuadratureNotConverged(BDMapError, ArithmeticError):
    kind = "QuadratureNotConverged"
