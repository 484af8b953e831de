"""Exception hierarchy.

Every error carries the module/operation that raised it so the CLI can report
``module.operation: message`` without inspecting tracebacks.
"""


class SatBoundError(Exception):
    module = "satbound"

    def __init__(self, message: str, operation: str = ""):
        super().__init__(message)
        self.operation = operation

    def where(self) -> str:
        return f"{self.module}.{self.operation}" if self.operation else self.module


# distributions
class DistributionError(SatBoundError):
    module = "distributions"


class InvalidDensity(DistributionError, ValueError):
    pass


class TruncationTooSmall(DistributionError, ValueError):
    pass


class HeavyMassTooLarge(DistributionError, ValueError):
    pass


# schemes
class SchemeError(SatBoundError):
    module = "schemes"


class NoOrientation(SchemeError, ValueError):
    pass


class NotFree(SchemeError, ValueError):
    pass


# kernel
class KernelError(SatBoundError):
    module = "kernel"


class NotLight(KernelError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0])


class KernelOverflow(KernelError, OverflowError):
    pass


# solver
class SolverError(SatBoundError):
    module = "solver"


class NoConvergence(SolverError, RuntimeError):
    def __init__(self, message: str, operation: str = "", residual: float = float("nan")):
        super().__init__(message, operation)
        self.residual = residual


class SingularJacobian(SolverError, RuntimeError):
    pass


class BracketInvalid(SolverError, ValueError):
    pass


class LPInfeasible(SolverError, RuntimeError):
    pass


class TruncationTooCoarse(SolverError, ValueError):
    pass


class CertificationFailure(SolverError, RuntimeError):
    pass


# verifier
class VerifierError(SatBoundError):
    module = "verifier"


class ParseError(VerifierError, ValueError):
    def __init__(self, message: str, line: int = 0, operation: str = "parse_dimacs"):
        super().__init__(f"line {line}: {message}" if line else message, operation)
        self.line = line


class WrongWidth(ParseError):
    pass


class TooLarge(VerifierError, ValueError):
    pass


class NotASolution(VerifierError, ValueError):
    pass


class ExclusionViolation(VerifierError, RuntimeError):
    pass


class SlotMismatch(VerifierError, ValueError):
    pass
