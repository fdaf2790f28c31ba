"""
Closed-loop stability of the converter against a grid impedance.

The generalized Nyquist criterion is applied to the open-loop matrix
L(jw) = Y(jw) Z_g(jw). The converter admittance is assumed to have no
right-half-plane poles; this assumption is carried in the result.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from upsc.admittance import AdmittanceModel, FreqResponseMatrix, Y_array
from upsc.errors import Inconclusive, InvalidParameter, PoleProximity
from upsc.grid import GridImpedance

#: Loci closer than this to -1 make the count unreliable.
MARGIN_GUARD = 1e-3
#: Two eigen-assignments whose costs differ by less than this are ambiguous.
MATCH_GUARD = 1e-9


def eval_Zg(g: GridImpedance, omega: float) -> FreqResponseMatrix:
    """dq-frame grid impedance matrix at s = jw."""
    if not omega > 0:
        raise InvalidParameter("grid impedance is evaluated at w > 0")
    return FreqResponseMatrix(float(omega), g.matrix(omega)[0])


@dataclass(frozen=True)
class NyquistGrid:
    omega_min: float = 1e-3
    omega_max: float = 5.0
    points: int = 2000

    def omegas(self) -> np.ndarray:
        return np.geomspace(self.omega_min, self.omega_max, self.points)


@dataclass(frozen=True)
class NyquistResult:
    """
    Eigenloci of Y Z_g and the resulting encirclement count.

    ``loci`` has shape (N, 2) over ``omegas`` (positive frequencies, matched for
    continuity); ``encirclements`` counts clockwise encirclements of -1 by the
    loci closed over negative frequencies. ``verdict`` is ``stable`` or
    ``unstable``.
    """

    omegas: np.ndarray
    loci: np.ndarray
    encirclements: int
    verdict: str
    min_distance: float
    assumptions: dict = field(default_factory=lambda: {"open_loop_rhp_poles": 0})

    def closed_loci(self) -> np.ndarray:
        """Loci over -w_max..-w_min, w_min..w_max (negatives by conjugation)."""
        return np.concatenate([np.conj(self.loci[::-1]), self.loci])


def eig2(M: np.ndarray) -> np.ndarray:
    """Eigenvalues of stacked 2x2 complex matrices, shape (..., 2)."""
    tr = M[..., 0, 0] + M[..., 1, 1]
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    disc = np.sqrt(0.25 * tr * tr - det + 0j)
    return np.stack([0.5 * tr + disc, 0.5 * tr - disc], axis=-1)


def match_loci(lam: np.ndarray, omegas=None) -> np.ndarray:
    """
    Order eigenvalue pairs so each column varies continuously.

    Raises
    ------
    Inconclusive
        If both assignments are equally close at some step while the two
        eigenvalues are distinct (a collision).
    """
    out = np.array(lam, dtype=complex, copy=True)
    for k in range(1, len(out)):
        a, b = out[k]
        p0, p1 = out[k - 1]
        keep = abs(a - p0) + abs(b - p1)
        swap = abs(a - p1) + abs(b - p0)
        if abs(a - b) > MATCH_GUARD and abs(keep - swap) < MATCH_GUARD:
            w = None if omegas is None else float(omegas[k])
            raise Inconclusive(f"eigenloci collide at w={w}", omega=w)
        if swap < keep:
            out[k] = (b, a)
    return out


def _nearest_approach(Yf, Zf, w, lam):
    """Smallest |1 + lambda| near the best grid sample, refined between neighbours."""
    dist = np.abs(1.0 + lam).min(axis=1)
    k = int(np.argmin(dist))

    def f(x):
        return float(np.abs(1.0 + eig2(Yf(np.array([x])) @ Zf(np.array([x])))).min())

    lo, hi = w[max(k - 1, 0)], w[min(k + 1, len(w) - 1)]
    best, w_best = float(dist[k]), float(w[k])
    if hi > lo:
        res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10 * hi})
        if res.fun < best:
            best, w_best = float(res.fun), float(res.x)
    return best, w_best


def _winding(z: np.ndarray) -> float:
    """Counterclockwise turns of the closed polygon z around the origin."""
    closed = np.append(z, z[0])
    return float(np.sum(np.angle(closed[1:] / closed[:-1])) / (2 * np.pi))


def _refine(Yf, Zf, w, lam, max_step=np.pi / 4, rounds=30):
    """Insert midpoints until no locus or det(I + L) turns by more than max_step per sample."""
    for _ in range(rounds):
        one = 1.0 + lam
        z = np.column_stack([one, one.prod(axis=1)])
        jump = np.abs(np.angle(z[1:] / z[:-1])).max(axis=1) > max_step
        if not np.any(jump):
            break
        k = np.flatnonzero(jump)
        mid = np.sqrt(w[k] * w[k + 1])
        w_all = np.concatenate([w, mid])
        order = np.argsort(w_all)
        w = w_all[order]
        new = eig2(Yf(mid) @ Zf(mid))
        lam = match_loci(np.concatenate([lam, new])[order], w)
    return w, lam


def _as_callable(obj, kind):
    if callable(obj) and not isinstance(obj, (AdmittanceModel, GridImpedance)):
        return obj
    if isinstance(obj, AdmittanceModel):
        return lambda w: Y_array(obj, w)
    if isinstance(obj, GridImpedance):
        return obj.matrix
    raise TypeError(f"cannot evaluate {kind} from {type(obj).__name__}")


def nyquist(model, g, grid: NyquistGrid | None = None, guard: float = MARGIN_GUARD,
            open_loop_rhp_poles: int = 0) -> NyquistResult:
    """
    Generalized Nyquist test of det(I + Y Z_g).

    ``model`` is an AdmittanceModel or a callable omegas -> (N, 2, 2); ``g`` a
    GridImpedance or such a callable. The closed loop is stable iff the
    clockwise encirclement count plus ``open_loop_rhp_poles`` is zero.

    Raises
    ------
    Inconclusive
        If a locus passes within ``guard`` of -1 or the loci collide.
    PoleProximity
        If the grid impedance has a pole on the frequency range (series C).
    """
    grid = grid or NyquistGrid()
    w = grid.omegas()
    if isinstance(g, GridImpedance):
        for wp in g.axis_poles():
            if w[0] <= wp <= w[-1]:
                raise PoleProximity(f"grid impedance has a pole on the contour at w={wp:g}; "
                                    "indentation is not supported", s=1j * wp, omega=wp)
    Yf = _as_callable(model, "admittance")
    Zf = _as_callable(g, "grid impedance")
    Y = Yf(w)
    Z = Zf(w)
    lam = match_loci(eig2(Y @ Z), w)
    dmin, w_near = _nearest_approach(Yf, Zf, w, lam)
    if dmin < guard:
        raise Inconclusive(f"locus passes {dmin:.3g} from -1 at w={w_near:g}",
                           distance=dmin, omega=w_near)
    meta = {"open_loop_rhp_poles": int(open_loop_rhp_poles)}
    wr, lam_r = _refine(Yf, Zf, w, lam)
    closed = np.concatenate([np.conj(lam_r[::-1]), lam_r])
    turns = sum(_winding(1.0 + closed[:, j]) for j in range(2))
    # cross-check against the determinant, which needs no locus matching
    det_turns = _winding(np.prod(1.0 + closed, axis=1))
    if abs(turns - det_turns) > 1e-6:
        raise Inconclusive("eigenloci winding disagrees with det winding")
    n_cw = -int(round(turns))
    verdict = "stable" if n_cw + open_loop_rhp_poles == 0 else "unstable"
    return NyquistResult(w, lam, n_cw, verdict, dmin, meta)
