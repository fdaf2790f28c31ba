"""
dq-frame MIMO input admittance of the UPSC with QV and PV droop.

The converter is described by D(s) di = -W(s) dE and its admittance is
Y(s) = D(s)^-1 W(s), with the convention di = -Y(s) dE (current positive out
of the converter into the PCC). Everything is evaluated pointwise at s = jw;
negative frequencies are allowed and give the complex conjugate.

"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from upsc.blocks import BlockSet, ControllerParams, OperatingPoint, build_blocks, \
    operating_point
from upsc.errors import PoleProximity, SingularD

#: |det D| below this is reported as a singular D.
DET_GUARD = 1e-10
#: Default lower edge of frequency sweeps (integrator poles sit at w = 0).
OMEGA_MIN = 1e-4


@dataclass(frozen=True)
class FreqResponseMatrix:
    """A 2x2 complex matrix sampled at one frequency (dq real-vector form)."""

    omega: float
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=complex).reshape(2, 2)
        object.__setattr__(self, "m", m)

    @property
    def m11(self) -> complex:
        return complex(self.m[0, 0])

    @property
    def m12(self) -> complex:
        return complex(self.m[0, 1])

    @property
    def m21(self) -> complex:
        return complex(self.m[1, 0])

    @property
    def m22(self) -> complex:
        return complex(self.m[1, 1])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.m)))


@dataclass(frozen=True)
class AdmittanceModel:
    """
    Parameters, blocks and operating point of one converter scenario.

    ``psl_sign`` selects the sign of the power-synchronization coupling.
    The default, +1, follows from linearizing the angle loop
    d(dtheta)/dt = -K_p(s) dP and is the one confirmed by the nonlinear
    simulator; -1 flips that coupling and is kept only for comparison
    (see the README).

    """

    params: ControllerParams
    blocks: BlockSet
    op: OperatingPoint
    psl_sign: int = 1
    _check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self._check:
            expected = operating_point(self.params)
            if expected != self.op:
                raise ValueError(f"operating point {self.op} inconsistent with params "
                                 f"(expected {expected})")
        if self.psl_sign not in (1, -1):
            raise ValueError("psl_sign must be +1 or -1")

    @classmethod
    def from_params(cls, params: ControllerParams | None = None, *, F_P=None,
                    F_Q=None, psl_sign: int = 1, **overrides) -> AdmittanceModel:
        params = (params or ControllerParams()).with_(**overrides)
        return cls(params, build_blocks(params, F_P=F_P, F_Q=F_Q),
                   operating_point(params), psl_sign)

    @classmethod
    def from_blocks(cls, params: ControllerParams, blocks: BlockSet,
                    psl_sign: int = 1) -> AdmittanceModel:
        """Model with hand-edited blocks (e.g. loops disabled for debugging)."""
        return cls(params, blocks, operating_point(params), psl_sign)


def _as_omegas(omega):
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    if np.any(w == 0):
        raise PoleProximity("w = 0 sits on the integrator poles", s=0j, omega=0.0)
    return w


def _blocks_at(model: AdmittanceModel, s):
    b = model.blocks
    try:
        vals = {name: b.__getattribute__(name)(s) for name in
                ("G_c", "Y_cp", "Y_ip", "Ft_P", "Ft_Q", "K_p")}
    except PoleProximity as exc:
        exc.omega = float(np.atleast_1d(s.imag)[0]) if exc.s is None else exc.s.imag
        raise
    vals["kappa"] = vals["K_p"] / s
    return vals


def D_W_arrays(model: AdmittanceModel, omegas):
    """
    Evaluate D(jw) and W(jw) on an array of frequencies.

    Returns
    -------
    D, W : ndarray, shape (N, 2, 2)

    """
    w = _as_omegas(omegas)
    s = 1j * w
    v = _blocks_at(model, s)
    E = model.params.E_set
    id0, iq0 = model.op.i_d0, model.op.i_q0
    sig = model.psl_sign
    Gc, Ycp, Yip, FtP, FtQ, kap = (v["G_c"], v["Y_cp"], v["Y_ip"], v["Ft_P"],
                                   v["Ft_Q"], v["kappa"])
    # A = G_c i0 - Y_i' E_set split into real-vector parts (each a transfer fn)
    A_d = Gc * id0 - Yip * E
    A_q = Gc * iq0

    n = len(w)
    D = np.empty((n, 2, 2), dtype=complex)
    W = np.empty((n, 2, 2), dtype=complex)
    D[:, 0, 0] = 1 + Ycp * FtP * E - sig * A_q * kap * E
    D[:, 0, 1] = -Ycp * FtQ * E
    D[:, 1, 0] = sig * A_d * kap * E
    D[:, 1, 1] = 1
    W[:, 0, 0] = -Yip + Ycp * (FtP * id0 - FtQ * iq0) - sig * A_q * kap * id0
    W[:, 0, 1] = Ycp * (FtP * iq0 + FtQ * id0) - sig * A_q * kap * iq0
    W[:, 1, 0] = sig * A_d * kap * id0
    W[:, 1, 1] = -Yip + sig * A_d * kap * iq0
    return D, W


def inv2(D):
    """Closed-form inverse of a stack of 2x2 matrices, plus determinants."""
    det = D[..., 0, 0] * D[..., 1, 1] - D[..., 0, 1] * D[..., 1, 0]
    inv = np.empty_like(D)
    inv[..., 0, 0] = D[..., 1, 1]
    inv[..., 0, 1] = -D[..., 0, 1]
    inv[..., 1, 0] = -D[..., 1, 0]
    inv[..., 1, 1] = D[..., 0, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        return inv / det[..., None, None], det


def Y_array(model: AdmittanceModel, omegas) -> np.ndarray:
    """Admittance Y(jw) = D^-1 W on an array of frequencies, shape (N, 2, 2)."""
    w = _as_omegas(omegas)
    D, W = D_W_arrays(model, w)
    Dinv, det = inv2(D)
    bad = np.abs(det) < DET_GUARD
    if np.any(bad):
        k = int(np.argmax(bad))
        raise SingularD(f"D(jw) singular at w={w[k]:g} (|det D|={abs(det[k]):.3e})",
                        omega=float(w[k]), det=complex(det[k]))
    return Dinv @ W


def eval_D(model: AdmittanceModel, omega: float) -> FreqResponseMatrix:
    D, _ = D_W_arrays(model, omega)
    return FreqResponseMatrix(float(omega), D[0])


def eval_W(model: AdmittanceModel, omega: float) -> FreqResponseMatrix:
    _, W = D_W_arrays(model, omega)
    return FreqResponseMatrix(float(omega), W[0])


def eval_Y(model: AdmittanceModel, omega: float) -> FreqResponseMatrix:
    return FreqResponseMatrix(float(omega), Y_array(model, omega)[0])
