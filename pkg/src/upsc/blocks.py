"""
Controller and system blocks of the UPSC scheme, and its operating point.

All quantities are per unit; frequency and time are normalized to the
nominal angular frequency (base 2*pi*60 rad/s).

"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from upsc.errors import InvalidParameter, InvalidSetpoint, UnknownParameter
from upsc.ratfun import RationalFunction, S, lowpass

#: Physical angular frequency base (rad/s) for pu <-> Hz conversion.
OMEGA_BASE = 2 * math.pi * 60.0

_POSITIVE = ("k_m", "T_d", "M", "alpha_P", "alpha_Q", "L", "R_a", "alpha_a",
             "alpha_F", "omega_1", "E_set")
_NONNEGATIVE = ("K_P", "K_PI", "K_Q")


@dataclass(frozen=True)
class ControllerParams:
    """Tunable parameters of one scenario. Defaults are the base case."""

    k_m: float = 20.0
    T_d: float = 15.0
    M: float = 565.0
    K_P: float = 0.1
    K_PI: float = 0.0
    alpha_P: float = 0.5
    K_Q: float = 0.1
    alpha_Q: float = 0.5
    L: float = 0.15
    R_a: float = 0.3
    alpha_a: float = 0.025
    alpha_F: float = 2.0
    omega_1: float = 1.0
    E_set: float = 1.0
    P_ref: float = 0.0
    Q_ref: float = 0.0

    def validate(self) -> ControllerParams:
        """Check the parameter invariants; return self for chaining."""
        for name in _POSITIVE:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                if name == "E_set":
                    raise InvalidSetpoint(f"E_set must be > 0, got {v}")
                raise InvalidParameter(f"{name} must be > 0, got {v}")
        for name in _NONNEGATIVE:
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidParameter(f"{name} must be >= 0, got {v}")
        for name in ("P_ref", "Q_ref"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameter(f"{name} must be finite")
        return self

    def with_(self, **changes) -> ControllerParams:
        """Copy with some fields replaced (names checked)."""
        for k in changes:
            if k not in PARAM_NAMES:
                raise UnknownParameter(k)
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


PARAM_NAMES = tuple(f.name for f in fields(ControllerParams))


@dataclass(frozen=True)
class OperatingPoint:
    """Steady-state converter current in the grid dq frame."""

    i_d0: float
    i_q0: float

    @property
    def i0(self) -> complex:
        return complex(self.i_d0, self.i_q0)


def operating_point(p: ControllerParams) -> OperatingPoint:
    """Current phasor (P_ref - jQ_ref)/E_set implied by the references."""
    if not p.E_set > 0:
        raise InvalidSetpoint(f"E_set must be > 0, got {p.E_set}")
    return OperatingPoint(p.P_ref / p.E_set, -p.Q_ref / p.E_set)


@dataclass(frozen=True)
class BlockSet:
    """
    Scalar blocks of the scheme.

    Attributes
    ----------
    H_aP, H_aQ, H_aF : RationalFunction
        Power filters of the PV/QV loops and the PCC voltage feedforward filter.
    K_p : RationalFunction
        Power synchronization gain (s T_d + 1)/(s M + k_m).
    F_P, F_Q : RationalFunction
        PV and QV voltage controllers.
    G_c, Y_i : RationalFunction
        Inner current loop: R_a/(sL + R_a) and (H_aF - 1)/(sL + R_a).
    Y_c : RationalFunction
        AVC gain (s + alpha_a)/(s (sL + R_a)).
    Y_cp, Y_ip : RationalFunction
        G_c Y_c and Y_i - G_c Y_c.
    Ft_P, Ft_Q : RationalFunction
        Filtered droop controllers F_P H_aP and F_Q H_aQ.

    """

    H_aP: RationalFunction
    H_aQ: RationalFunction
    H_aF: RationalFunction
    K_p: RationalFunction
    F_P: RationalFunction
    F_Q: RationalFunction
    G_c: RationalFunction
    Y_i: RationalFunction
    Y_c: RationalFunction
    Y_cp: RationalFunction
    Y_ip: RationalFunction
    Ft_P: RationalFunction
    Ft_Q: RationalFunction


def build_blocks(p: ControllerParams, F_P: RationalFunction | None = None,
                 F_Q: RationalFunction | None = None) -> BlockSet:
    """
    Construct all blocks from a parameter set.

    By default F_Q = K_Q and F_P = K_P + K_PI/s. Either may be overridden by an
    arbitrary rational function to study other droop structures.

    """
    p.validate()
    H_aP = lowpass(p.alpha_P)
    H_aQ = lowpass(p.alpha_Q)
    H_aF = lowpass(p.alpha_F)
    K_p = RationalFunction.from_coeffs([1.0, p.T_d], [p.k_m, p.M])
    if F_P is None:
        F_P = RationalFunction.from_coeffs([p.K_PI, p.K_P], [0.0, 1.0]) if p.K_PI \
            else RationalFunction.constant(p.K_P)
    if F_Q is None:
        F_Q = RationalFunction.constant(p.K_Q)
    plant = p.L * S + p.R_a
    G_c = RationalFunction.constant(p.R_a) / plant
    Y_i = (H_aF - 1.0) / plant
    Y_c = RationalFunction.from_coeffs([p.alpha_a, 1.0], [0.0, p.R_a, p.L])
    Y_cp = G_c * Y_c
    Y_ip = Y_i - Y_cp
    return BlockSet(H_aP=H_aP, H_aQ=H_aQ, H_aF=H_aF, K_p=K_p, F_P=F_P, F_Q=F_Q,
                    G_c=G_c, Y_i=Y_i, Y_c=Y_c, Y_cp=Y_cp, Y_ip=Y_ip,
                    Ft_P=F_P * H_aP, Ft_Q=F_Q * H_aQ)
