"""Exception hierarchy shared by all erevsim modules."""


class ErevError(Exception):
    """Base class for every error raised by erevsim."""


class ValidationError(ErevError, ValueError):
    """Input violates a documented invariant."""


class CycleParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CycleFormatError(ValidationError):
    pass


class LookupRangeError(ErevError, ValueError):
    """Map query outside the tabulated grid."""

    def __init__(self, message, axis=None):
        self.axis = axis
        super().__init__(message)


class InfeasibleOperatingPoint(ErevError):
    pass


class CapabilityError(ErevError):
    pass


class BatteryPowerLimitError(ErevError):
    pass


class ConsistencyError(ErevError):
    pass


class InfeasibleModeError(ErevError):
    pass


class SizingInfeasible(ErevError):
    def __init__(self, message, deficit):
        self.deficit = deficit
        super().__init__(f"{message} (deficit {deficit:.1f} N*m)")


class InfeasibleHorizon(ErevError):
    def __init__(self, message, stage):
        self.stage = stage
        super().__init__(f"{message} (stage {stage})")


class SocConstraintViolation(ErevError):
    pass


class SimulationAbort(ErevError):
    def __init__(self, message, step):
        self.step = step
        super().__init__(f"step {step}: {message}")


class ConfigError(ValidationError):
    pass
