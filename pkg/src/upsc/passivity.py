"""
Passivity index of the dq-frame admittance and sensitivity sweeps.

The index at w is half the smallest eigenvalue of the Hermitian part
Y(jw) + Y(jw)^H. Positive values mean the converter dissipates energy at
that frequency.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from upsc.admittance import AdmittanceModel, FreqResponseMatrix, Y_array
from upsc.blocks import PARAM_NAMES, ControllerParams
from upsc.errors import InvalidParameter, UnknownParameter


def hermitian_eigvals(H: np.ndarray) -> np.ndarray:
    """
    Eigenvalues of stacked 2x2 Hermitian matrices in closed form, ascending.

    Parameters
    ----------
    H : ndarray, shape (..., 2, 2)

    Returns
    -------
    ndarray, shape (..., 2), real

    """
    a = H[..., 0, 0].real
    d = H[..., 1, 1].real
    b = H[..., 0, 1]
    half_tr = 0.5 * (a + d)
    # sqrt(tr^2 - 4 det)/2 written without cancellation
    rad = np.hypot(0.5 * (a - d), np.abs(b))
    return np.stack([half_tr - rad, half_tr + rad], axis=-1)


def passivity_index_array(Y: np.ndarray) -> np.ndarray:
    """Passivity index of each matrix in a (..., 2, 2) stack."""
    Y = np.asarray(Y, dtype=complex)
    if not np.all(np.isfinite(Y)):
        raise ValueError("admittance has non-finite entries")
    H = Y + np.conj(np.swapaxes(Y, -1, -2))
    return 0.5 * hermitian_eigvals(H)[..., 0]


def passivity_index(Y) -> float:
    """Passivity index of one admittance sample (FreqResponseMatrix or 2x2)."""
    m = Y.m if isinstance(Y, FreqResponseMatrix) else np.asarray(Y)
    return float(passivity_index_array(m))


@dataclass(frozen=True)
class FrequencyGrid:
    """Sweep grid in pu; ``spacing`` is ``log`` or ``linear``."""

    omega_min: float = 1e-3
    omega_max: float = 0.2
    points: int = 400
    spacing: str = "log"

    def __post_init__(self):
        if not 0 < self.omega_min < self.omega_max:
            raise InvalidParameter("frequency grid needs 0 < omega_min < omega_max")
        if self.points < 2:
            raise InvalidParameter("frequency grid needs at least 2 points")
        if self.spacing not in ("log", "linear"):
            raise InvalidParameter(f"unknown spacing {self.spacing!r}")

    def omegas(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.omega_min, self.omega_max, self.points)
        return np.linspace(self.omega_min, self.omega_max, self.points)


@dataclass(frozen=True)
class PassivityCurve:
    omegas: np.ndarray
    nu: np.ndarray
    zero_crossings: tuple = field(default=())

    @property
    def min_nu(self) -> float:
        return float(np.min(self.nu))

    @property
    def argmin_omega(self) -> float:
        return float(self.omegas[int(np.argmin(self.nu))])

    @property
    def first_crossing(self) -> float:
        """Lowest frequency where the index changes sign (nan if none)."""
        return self.zero_crossings[0] if self.zero_crossings else math.nan


def _interp_zero(w, nu, k):
    return float(w[k] - nu[k] * (w[k + 1] - w[k]) / (nu[k + 1] - nu[k]))


def zero_crossings(omegas, nu) -> tuple:
    """Frequencies where nu changes sign, by linear interpolation."""
    out = []
    for k in range(len(nu) - 1):
        if nu[k] == 0:
            out.append(float(omegas[k]))
        elif nu[k] * nu[k + 1] < 0:
            out.append(_interp_zero(omegas, nu, k))
    return tuple(out)


def curve_from_samples(omegas, nu) -> PassivityCurve:
    omegas = np.asarray(omegas, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if len(omegas) != len(nu) or np.any(np.diff(omegas) <= 0):
        raise InvalidParameter("curve needs strictly increasing frequencies, one nu each")
    return PassivityCurve(omegas, nu, zero_crossings(omegas, nu))


def sweep(model: AdmittanceModel, grid: FrequencyGrid | None = None,
          admittance=None) -> PassivityCurve:
    """
    Passivity index of ``model`` over ``grid``.

    ``admittance`` may replace the model's Y (callable omegas -> (N, 2, 2)),
    e.g. an identity admittance for debugging.
    """
    w = (grid or FrequencyGrid()).omegas()
    Y = admittance(w) if admittance is not None else Y_array(model, w)
    return curve_from_samples(w, passivity_index_array(Y))


@dataclass(frozen=True)
class SweepSpec:
    """One-parameter sensitivity study around a base parameter set."""

    parameter: str
    values: tuple
    grid: FrequencyGrid = FrequencyGrid()
    case: tuple = (0.0, 0.0)
    base: ControllerParams = ControllerParams()

    def __post_init__(self):
        if self.parameter not in PARAM_NAMES:
            raise UnknownParameter(self.parameter)
        if len(self.values) == 0:
            raise InvalidParameter("sweep needs at least one value")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


def sensitivity_study(spec: SweepSpec, workers: int | None = None) -> list:
    """
    Passivity curves for each value of the swept parameter.

    Returns a list of ``(value, PassivityCurve)`` in the order of
    ``spec.values``.
    """
    P_ref, Q_ref = spec.case

    def one(value):
        params = spec.base.with_(P_ref=P_ref, Q_ref=Q_ref, **{spec.parameter: value})
        return value, sweep(AdmittanceModel.from_params(params), spec.grid)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(one, spec.values))
    return [one(v) for v in spec.values]
