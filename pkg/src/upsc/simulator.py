"""
Nonlinear time-domain model of the UPSC scheme in the grid dq frame.

The model keeps the exact frame rotation between converter and grid frames
and integrates the complete controller with classical fixed-step RK4. It is
used as an independent check of the analytical admittance, by sinusoidal
injection on the PCC voltage, and to run closed-loop scenarios against a
stiff source behind a series R-L impedance.

Time is in pu (physical time times 2*pi*60).
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from upsc import _kernel as K
from upsc.admittance import FreqResponseMatrix
from upsc.blocks import PARAM_NAMES, ControllerParams, operating_point
from upsc.errors import Divergence, InvalidParameter, NotSettled
from upsc.grid import GridImpedance

log = logging.getLogger(__name__)

DT_DEFAULT = 5e-3
CSV_HEADER = ("t", "i_d", "i_q", "P", "Q", "E_d", "E_q", "E_ref", "dtheta")


@dataclass(frozen=True)
class SimState:
    """Full state of the nonlinear model."""

    i: complex = 0j
    theta_rel: float = 0.0
    x_psl: float = 0.0
    x_avc1: complex = 0j
    x_avc2: complex = 0j
    x_ff: complex = 0j
    x_qf: float = 0.0
    x_pf: float = 0.0
    x_pi: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.i.real, self.i.imag, self.theta_rel, self.x_psl,
                         self.x_avc1.real, self.x_avc1.imag, self.x_avc2.real,
                         self.x_avc2.imag, self.x_ff.real, self.x_ff.imag, self.x_qf,
                         self.x_pf, self.x_pi])

    @classmethod
    def from_array(cls, x) -> SimState:
        x = [float(v) for v in x]
        return cls(complex(x[0], x[1]), x[2], x[3], complex(x[4], x[5]),
                   complex(x[6], x[7]), complex(x[8], x[9]), x[10], x[11], x[12])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_array())))


@dataclass(frozen=True)
class Perturbation:
    """Sinusoidal injection amplitude*cos(omega (t - t_start)) on one PCC axis."""

    axis: str = "d"
    amplitude: float = 0.0
    omega: float = 0.0
    t_start: float = 0.0

    def __post_init__(self):
        if self.axis not in ("d", "q"):
            raise InvalidParameter(f"perturbation axis must be 'd' or 'q', got {self.axis!r}")


@dataclass(frozen=True)
class SimConfig:
    """
    Settings of one simulation run.

    ``mode`` is ``forced`` (PCC voltage imposed, E = E_set + injection) or
    ``grid`` (stiff source behind ``grid``; the injection then rides on the
    source voltage). Events are ``(time, parameter, value)`` tuples applied as
    instantaneous changes of ControllerParams fields.
    """

    dt: float = DT_DEFAULT
    t_end: float = 100.0
    mode: str = "forced"
    grid: GridImpedance | None = None
    perturbation: Perturbation | None = None
    events: tuple = ()
    decimation: int = 1
    v_g: complex | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameter("dt must be > 0")
        if not self.t_end >= 0:
            raise InvalidParameter("t_end must be >= 0")
        if self.mode not in ("forced", "grid"):
            raise InvalidParameter(f"unknown simulation mode {self.mode!r}")
        if self.mode == "grid":
            if self.grid is None:
                raise InvalidParameter("grid mode needs a grid impedance")
            if not self.grid.series_rl:
                raise InvalidParameter("time-domain grid closure supports series R-L only")
        if self.decimation < 1:
            raise InvalidParameter("decimation must be >= 1")
        ev = tuple((float(t), str(n), float(v)) for t, n, v in self.events)
        for _, name, _ in ev:
            if name not in PARAM_NAMES:
                raise InvalidParameter(f"event names unknown parameter {name!r}")
        if list(ev) != sorted(ev, key=lambda e: e[0]):
            raise InvalidParameter("events must be sorted by time")
        object.__setattr__(self, "events", ev)


@dataclass
class TimeSeries:
    """Uniformly sampled simulation output."""

    t: np.ndarray
    i: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    E: np.ndarray
    E_ref: np.ndarray
    dtheta: np.ndarray
    final_state: SimState | None = field(default=None, repr=False)

    @classmethod
    def from_records(cls, rec: np.ndarray, final_state=None) -> TimeSeries:
        return cls(t=rec[:, 0], i=rec[:, 1] + 1j * rec[:, 2], P=rec[:, 3], Q=rec[:, 4],
                   E=rec[:, 5] + 1j * rec[:, 6], E_ref=rec[:, 7], dtheta=rec[:, 8],
                   final_state=final_state)

    def rows(self):
        for k in range(len(self.t)):
            yield (self.t[k], self.i[k].real, self.i[k].imag, self.P[k], self.Q[k],
                   self.E[k].real, self.E[k].imag, self.E_ref[k], self.dtheta[k])

    def to_csv(self, fh=None) -> str | None:
        """Write ``t,i_d,i_q,P,Q,E_d,E_q,E_ref,dtheta`` rows."""
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.rows():
            w.writerow([repr(float(v)) for v in row])
        return fh.getvalue() if own else None


def params_array(p: ControllerParams) -> np.ndarray:
    return np.array([getattr(p, n) for n in PARAM_NAMES], dtype=float)


def source_voltage(p: ControllerParams, grid: GridImpedance) -> complex:
    """
    Stiff source voltage that makes the forced-PCC equilibrium an equilibrium
    of the grid-closed system too (PCC voltage E_set on the d axis).
    """
    i0 = operating_point(p).i0
    return p.E_set - grid.steady_state() * i0


def _grid_array(cfg: SimConfig, p: ControllerParams) -> np.ndarray:
    if cfg.mode == "forced":
        return np.zeros(5)
    vg = cfg.v_g if cfg.v_g is not None else source_voltage(p, cfg.grid)
    return np.array([1.0, cfg.grid.R_g, cfg.grid.L_g, vg.real, vg.imag])


def _pert_array(pert: Perturbation | None, dE: complex = 0j) -> np.ndarray:
    if pert is None or pert.amplitude == 0:
        return np.array([0.0, 0.0, 0.0, 0.0, dE.real, dE.imag])
    return np.array([1.0 if pert.axis == "d" else 2.0, pert.amplitude, pert.omega,
                     pert.t_start, dE.real, dE.imag])


def equilibrium(p: ControllerParams) -> SimState:
    """Analytic equilibrium for PCC voltage E_set and constant references."""
    i0 = operating_point(p).i0
    return SimState(i=i0, x_ff=complex(p.E_set), x_qf=p.Q_ref, x_pf=p.P_ref)


def derivative(state: SimState, p: ControllerParams, config: SimConfig | None = None,
               t: float = 0.0) -> np.ndarray:
    """State derivative vector at (state, t)."""
    config = config or SimConfig()
    return K.rhs(t, state.to_array(), params_array(p), _grid_array(config, p),
                 _pert_array(config.perturbation))


def step(state: SimState, p: ControllerParams, config: SimConfig | None = None,
         t: float = 0.0) -> SimState:
    """One RK4 step of size config.dt from time t."""
    config = config or SimConfig()
    out = np.empty(K.N_STATE)
    K.rk4_step(t, state.to_array(), config.dt, params_array(p), _grid_array(config, p),
               _pert_array(config.perturbation), out)
    if not np.all(np.abs(out) <= K.DIVERGENCE):
        raise Divergence(f"state diverged at t={t + config.dt:g}", t_last=t)
    return SimState.from_array(out)


def _run(x, p, cfg, t0, nsteps, decim, pert_arr, k0=0):
    """Advance x by nsteps; records fall on global steps that are multiples of decim."""
    phase = k0 % decim if decim else 0
    if decim:
        first = (-phase) % decim
        nrec = 0 if first > nsteps else (nsteps - first) // decim + 1
    else:
        nrec = 0
    rec = np.empty((nrec, 1 + K.N_OUT))
    done = K.integrate(x, t0, cfg.dt, nsteps, params_array(p), _grid_array(cfg, p),
                       pert_arr, decim, phase, rec)
    if done < nsteps:
        t_bad = t0 + done * cfg.dt
        raise Divergence(f"simulation diverged after t={t_bad:.6g} pu", t_last=t_bad)
    return rec


def simulate(p: ControllerParams, config: SimConfig,
             state0: SimState | None = None) -> TimeSeries:
    """
    Run the nonlinear model from ``state0`` (default: equilibrium) to t_end.

    Parameter events are applied at the first step boundary at or after their
    time. Output is sampled every ``config.decimation`` steps.
    """
    p.validate()
    x = (state0 or equilibrium(p)).to_array()
    pert = _pert_array(config.perturbation)
    n_total = int(round(config.t_end / config.dt))
    if n_total == 0:
        return TimeSeries.from_records(np.empty((0, 1 + K.N_OUT)), SimState.from_array(x))
    decim = config.decimation
    # segment boundaries at event steps; samples stay on the global decimated grid
    bounds = []
    for t_ev, name, val in config.events:
        k = int(math.ceil(t_ev / config.dt - 1e-9))
        k = min(max(k, 0), n_total)
        bounds.append((k, name, val))
    pieces = []
    k0 = 0
    cur = p
    # the grid-closure source voltage stays at its initial value across events
    cfg = config
    if config.mode == "grid" and config.v_g is None:
        cfg = SimConfig(**{f.name: getattr(config, f.name) for f in fields(config)}
                        | {"v_g": source_voltage(p, config.grid)})
    for k_ev, name, val in bounds + [(n_total, None, None)]:
        if k_ev > k0:
            rec = _run(x, cur, cfg, k0 * cfg.dt, k_ev - k0, decim, pert, k0)
            # a sample on the boundary was already written by the previous segment
            dup = pieces and k0 % decim == 0
            pieces.append(rec[1:] if dup else rec)
            k0 = k_ev
        if name is not None:
            log.info("t=%g: %s -> %g", k_ev * cfg.dt, name, val)
            cur = cur.with_(**{name: val}).validate()
    rec = np.concatenate(pieces) if pieces else np.empty((0, 1 + K.N_OUT))
    return TimeSeries.from_records(rec, SimState.from_array(x))


def run_scenario(p: ControllerParams, config: SimConfig,
                 state0: SimState | None = None) -> TimeSeries:
    """Closed-loop run against the configured grid impedance with events."""
    if config.mode != "grid":
        raise InvalidParameter("run_scenario needs a grid-closure configuration")
    return simulate(p, config, state0)


# -- small-signal identification ------------------------------------------------

@dataclass(frozen=True)
class IdentifiedResponse:
    """Empirical admittance at one frequency (di = -Y_hat dE)."""

    omega: float
    Y_hat: FreqResponseMatrix
    drift: float = 0.0


def slowest_decay(p: ControllerParams) -> float:
    """
    Smallest decay rate among the nontrivial modes of the forced-PCC model.

    Exactly-zero eigenvalues (a decoupled integrator, e.g. the PV integral
    state when K_PI = 0) are ignored. Returns 0 or less if a mode is not
    decaying.
    """
    A, _ = linearize(p)
    ev = np.linalg.eigvals(A)
    ev = ev[np.abs(ev) > 1e-9]
    return float(-ev.real.max())


def settle_time(p: ControllerParams, omega: float) -> float:
    """
    Discarded transient before phasor extraction: the longest of 20 injection
    periods, 10 time constants of the slowest control bandwidth and 8 time
    constants of the slowest decaying mode.
    """
    slow = min(p.alpha_a, p.alpha_P, p.alpha_Q, p.k_m / p.M)
    t = max(20 * 2 * math.pi / omega, 10.0 / slow)
    decay = slowest_decay(p)
    if decay > 0:
        t = max(t, 8.0 / decay)
    return t


def _injection_phasor(p, omega, axis, amplitude, dt, n_meas, settle):
    period = 2 * math.pi / omega
    n_per = max(int(round(period / dt)), 16)
    h = period / n_per
    n_settle = int(math.ceil(settle / period)) * n_per
    cfg = SimConfig(dt=h)
    pert = _pert_array(Perturbation(axis, amplitude, omega, 0.0))
    x = equilibrium(p).to_array()
    _run(x, p, cfg, 0.0, n_settle, 0, pert)
    acc = np.zeros((n_meas, 2), dtype=complex)
    done = K.project(x, n_settle * h, h, n_meas * n_per, params_array(p),
                     _grid_array(cfg, p), pert, omega, n_meas, acc)
    if done < n_meas * n_per:
        raise Divergence(f"identification run diverged (w={omega:g}, axis {axis})")
    phasors = acc * (2.0 / n_per)
    return phasors


def identify_admittance(p: ControllerParams, omegas, amplitude: float = 0.01,
                        dt: float = DT_DEFAULT, periods: int = 4,
                        settle: float | None = None,
                        tolerance: float = 0.01, workers: int | None = None) -> list:
    """
    Identify Y(jw) by sinusoidal PCC-voltage injection on the d and q axes.

    Each run starts at the analytic equilibrium, discards the settle window
    and extracts the current phasors by single-bin DFT over ``periods`` whole
    periods. The step is adjusted so that one period is an integer number of
    steps. The (w, axis) runs are independent and use ``workers`` threads
    (default: one per CPU, at most one per run).

    Raises
    ------
    NotSettled
        If the phasor of the last two periods differs by more than
        ``tolerance`` (relative).

    """
    if not 0 < amplitude <= 0.01:
        raise InvalidParameter("injection amplitude must be in (0, 0.01] pu")
    p.validate()
    omegas = [float(w) for w in omegas]
    jobs = [(w, axis) for w in omegas for axis in ("d", "q")]

    def run(job):
        w, axis = job
        t_set = settle if settle is not None else settle_time(p, w)
        return _injection_phasor(p, w, axis, amplitude, dt, periods, t_set)

    # each run owns its state vector; the compiled kernel releases the GIL
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            phasors = list(ex.map(run, jobs))
    else:
        phasors = [run(j) for j in jobs]

    out = []
    for k, w in enumerate(omegas):
        cols = []
        drift = 0.0
        for ph in phasors[2 * k:2 * k + 2]:
            last, prev = ph[-1], ph[-2]
            d = np.max(np.abs(last - prev)) / max(np.max(np.abs(last)), 1e-12)
            drift = max(drift, float(d))
            cols.append(-ph.mean(axis=0) / amplitude)
        if drift > tolerance:
            raise NotSettled(f"phasor still drifting at w={w:g} ({drift:.2%})", omega=w,
                             drift=drift)
        Y = np.column_stack(cols)
        out.append(IdentifiedResponse(w, FreqResponseMatrix(w, Y), drift))
    return out


# -- numerical linearization ----------------------------------------------------

def linearize(p: ControllerParams, config: SimConfig | None = None,
              state0: SimState | None = None, h: float = 1e-6):
    """
    Central-difference Jacobians of the model at an equilibrium.

    Returns (A, B) with B the sensitivity to the injection (d and q columns);
    in forced mode the injection is the PCC voltage, in grid mode the source
    voltage.
    """
    config = config or SimConfig()
    x0 = (state0 or equilibrium(p)).to_array()
    pa = params_array(p)
    ga = _grid_array(config, p)
    n = len(x0)
    A = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        A[:, j] = (K.rhs(0.0, x0 + e, pa, ga, _pert_array(None))
                   - K.rhs(0.0, x0 - e, pa, ga, _pert_array(None))) / (2 * h)
    B = np.empty((n, 2))
    for j, dE in enumerate((h, 1j * h)):
        B[:, j] = (K.rhs(0.0, x0, pa, ga, _pert_array(None, dE))
                   - K.rhs(0.0, x0, pa, ga, _pert_array(None, -dE))) / (2 * h)
    return A, B


def linearized_admittance(p: ControllerParams, omegas) -> np.ndarray:
    """Y(jw) of the Jacobian-linearized forced-PCC model, shape (N, 2, 2)."""
    A, B = linearize(p)
    C = np.zeros((2, A.shape[0]))
    C[0, K.I_D] = C[1, K.I_Q] = 1.0
    I = np.eye(A.shape[0])
    return np.array([-C @ np.linalg.solve(1j * w * I - A, B) for w in np.atleast_1d(omegas)])


# -- time-series analysis -------------------------------------------------------

def dominant_frequency(t: np.ndarray, x: np.ndarray, t0: float | None = None,
                       t1: float | None = None, pad: int = 16) -> float:
    """
    Angular frequency (pu) of the largest spectral peak of x over [t0, t1].

    The mean and linear trend are removed and a Hann window applied; the peak of
    the zero-padded spectrum is refined by parabolic interpolation.
    """
    sel = np.ones_like(t, dtype=bool)
    if t0 is not None:
        sel &= t >= t0
    if t1 is not None:
        sel &= t <= t1
    tt, xx = t[sel], np.asarray(x)[sel]
    if len(tt) < 8:
        raise ValueError("window too short for a spectral estimate")
    xx = xx - np.polyval(np.polyfit(tt - tt[0], xx, 1), tt - tt[0])
    xx = xx * np.hanning(len(xx))
    h = tt[1] - tt[0]
    n = pad * len(xx)
    spec = np.abs(np.fft.rfft(xx, n))
    freqs = 2 * np.pi * np.fft.rfftfreq(n, h)
    k = int(np.argmax(spec[1:])) + 1
    if 0 < k < len(spec) - 1:
        a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
        shift = 0.5 * (a - c) / (a - 2 * b + c)
        return float(freqs[k] + shift * (freqs[1] - freqs[0]))
    return float(freqs[k])


def envelope(t: np.ndarray, x: np.ndarray, window: float) -> tuple:
    """Peak-to-peak amplitude of x over consecutive windows of length ``window``."""
    edges = np.arange(t[0], t[-1] + 1e-12, window)
    mids, amps = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (t >= a) & (t < b)
        if np.any(sel):
            mids.append(0.5 * (a + b))
            amps.append(float(np.ptp(np.asarray(x)[sel])))
    return np.array(mids), np.array(amps)
