"""Exception hierarchy shared across the package."""


class UPSCError(Exception):
    """Base class for all package errors."""


class NumericGuard(UPSCError):
    """A numerical guard tripped (pole hit or singular matrix)."""

    def __init__(self, msg, omega=None, **info):
        super().__init__(msg)
        self.omega = omega
        self.info = info


class PoleProximity(NumericGuard):
    def __init__(self, msg, s=None, omega=None):
        super().__init__(msg, omega=omega, s=s)
        self.s = s


class SingularD(NumericGuard):
    def __init__(self, msg, omega=None, det=None):
        super().__init__(msg, omega=omega, det=det)
        self.det = det


class DivisionByZeroFunction(UPSCError, ZeroDivisionError):
    pass


class InvalidBandwidth(UPSCError, ValueError):
    pass


class InvalidSetpoint(UPSCError, ValueError):
    pass


class InvalidParameter(UPSCError, ValueError):
    pass


class UnknownParameter(UPSCError, KeyError):
    pass


class Inconclusive(UPSCError):
    """Nyquist count cannot be trusted (marginal approach or locus collision)."""

    def __init__(self, msg, distance=None, omega=None):
        super().__init__(msg)
        self.distance = distance
        self.omega = omega


class Divergence(UPSCError):
    """Simulation state left the finite/bounded region."""

    def __init__(self, msg, t_last=None):
        super().__init__(msg)
        self.t_last = t_last


class NotSettled(UPSCError):
    """Identified phasor still drifting after the settle window."""

    def __init__(self, msg, omega=None, drift=None):
        super().__init__(msg)
        self.omega = omega
        self.drift = drift


class ConfigError(UPSCError, ValueError):
    """Scenario file could not be parsed or validated."""

    def __init__(self, msg, line=None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line
