"""
Passive grid impedances seen from the PCC, in dq-frame matrix form.

A scalar impedance z built from R, L, C elements in the stationary frame is
shifted into the grid dq frame by s -> s + j w1. The resulting complex-
coefficient function maps to the real 2x2 form

    [[Z_dd, -Z_qd],
     [Z_qd,  Z_dd]],   Z_dd = (z(s) + z~(s))/2,  Z_qd = (z(s) - z~(s))/(2j)

with z~(s) = conj(z(conj(s))). For a series inductor this gives the familiar
[[sL, -w1 L], [w1 L, sL]].

"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from upsc.errors import InvalidParameter

KINDS = ("stiff-inductive", "series-RL", "series-RLC", "parallel-RC-behind-RL")


@dataclass(frozen=True)
class GridImpedance:
    """
    Grid impedance between the PCC and a stiff source.

    Parameters
    ----------
    kind : str
        ``stiff-inductive`` (L_g only), ``series-RL``, ``series-RLC`` or
        ``parallel-RC-behind-RL``. The last one is the RL path to the source
        in parallel with a shunt capacitor C_g (damping resistor R_c in series)
        at the PCC.
    R_g, L_g, C_g, R_c : float
        Element values in pu. C_g = 0 means no capacitor.
    omega_1 : float
        Grid frequency in pu.

    """

    kind: str = "series-RL"
    R_g: float = 0.0
    L_g: float = 0.0
    C_g: float = 0.0
    R_c: float = 0.0
    omega_1: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown grid kind {self.kind!r}; expected one of {KINDS}")
        vals = (self.R_g, self.L_g, self.C_g, self.R_c)
        if any(not (math.isfinite(v) and v >= 0) for v in vals):
            raise InvalidParameter("grid element values must be finite and >= 0")
        if not any(vals[:3]):
            raise InvalidParameter("grid impedance needs at least one nonzero element")
        if self.kind == "stiff-inductive" and (self.R_g or self.C_g):
            raise InvalidParameter("stiff-inductive grid takes L_g only")
        if self.kind in ("series-RLC", "parallel-RC-behind-RL") and not self.C_g > 0:
            raise InvalidParameter(f"{self.kind} grid needs C_g > 0")

    @property
    def series_rl(self) -> bool:
        """True if the impedance is a plain series R-L (no capacitor)."""
        return self.kind in ("stiff-inductive", "series-RL")

    def z(self, s):
        """Scalar complex-frame impedance at (already shifted) s."""
        path = self.R_g + s * self.L_g
        if self.kind == "series-RLC":
            return path + 1.0 / (s * self.C_g)
        if self.kind == "parallel-RC-behind-RL":
            shunt = self.R_c + 1.0 / (s * self.C_g)
            return path * shunt / (path + shunt)
        return path + 0j * s

    def matrix(self, omegas) -> np.ndarray:
        """dq-frame matrices at s = jw, shape (N, 2, 2)."""
        w = np.atleast_1d(np.asarray(omegas, dtype=float))
        zp = self.z(1j * (w + self.omega_1))
        zm = np.conj(self.z(1j * (-w + self.omega_1)))
        zdd = 0.5 * (zp + zm)
        zqd = (zp - zm) / 2j
        out = np.empty((len(w), 2, 2), dtype=complex)
        out[:, 0, 0] = zdd
        out[:, 0, 1] = -zqd
        out[:, 1, 0] = zqd
        out[:, 1, 1] = zdd
        return out

    def axis_poles(self) -> tuple:
        """dq-frame frequencies w > 0 where the matrix has a pole on the jw axis."""
        # a series capacitor blocks dc in the stationary frame, which lands on w1
        return (self.omega_1,) if self.kind == "series-RLC" else ()

    def steady_state(self) -> complex:
        """Scalar impedance at the fundamental (w = 0 in dq)."""
        return complex(self.z(1j * self.omega_1))
