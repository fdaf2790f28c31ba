"""
Acceptance criteria, one test per criterion.

Each check prints a single ``criterion N: PASS|FAIL`` line; the lines are
also collected into the pytest terminal summary. Run directly with
``python tests/test_acceptance.py`` for the lines alone.
"""
import math
import time

import numpy as np

from upsc.admittance import AdmittanceModel, D_W_arrays, Y_array, inv2
from upsc.blocks import ControllerParams
from upsc.grid import GridImpedance
from upsc.passivity import FrequencyGrid, hermitian_eigvals, passivity_index_array, sweep
from upsc.ratfun import RationalFunction
from upsc.simulator import SimConfig, SimState, dominant_frequency, envelope, \
    identify_admittance, simulate
from upsc.stability import NyquistGrid, nyquist

RESULTS = {}

CASES = ((0.0, 0.0), (1.0, 0.5))
ID_OMEGAS = (0.02, 0.05, 0.1, 0.15, 0.2)
SWEEP = FrequencyGrid(1e-3, 0.2, 400)
WIDE = FrequencyGrid(1e-3, 5.0, 2000)
TWENTY = np.geomspace(1e-3, 5.0, 20)
ZERO = RationalFunction.constant(0.0)

SIDE_CHANGES = {"alpha_a": 0.075, "T_d": 30.0, "M": 280.0, "R_a": 0.2}
CASE_STUDY_GAINS = {"K_P": 0.05, "K_Q": 0.05, "alpha_a": 0.075}
# surrogate closure for the case study: loaded converter on a short RL line
CASE_STUDY_OP = (1.0, 0.5)
CASE_STUDY_GRID = GridImpedance("series-RL", R_g=0.03, L_g=0.01)
# passive converter settings paired with passive grids
PASSIVE_SCENARIOS = (
    (dict(K_PI=0.3, P_ref=1.0, Q_ref=0.5), GridImpedance("series-RL", R_g=0.01, L_g=0.05)),
    (dict(K_PI=0.3, K_Q=0.05, P_ref=1.0, Q_ref=0.5),
     GridImpedance("parallel-RC-behind-RL", R_g=0.02, L_g=0.3, C_g=2.0, R_c=0.01)),
    (dict(K_PI=0.3, K_Q=0.2, P_ref=1.0, Q_ref=0.5),
     GridImpedance("parallel-RC-behind-RL", R_g=0.01, L_g=0.1, C_g=0.5, R_c=0.05)),
    (dict(K_PI=0.3, P_ref=1.0, Q_ref=0.0), GridImpedance("stiff-inductive", L_g=0.2)),
    (dict(K_PI=0.3, K_Q=0.2, P_ref=1.0, Q_ref=0.0),
     GridImpedance("series-RL", R_g=0.05, L_g=0.5)),
)


def _report(n, title, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS[n] = line
    print(line)
    assert ok, line


def _model(**kw):
    return AdmittanceModel.from_params(ControllerParams(**kw))


def _curve(grid=SWEEP, **kw):
    return sweep(_model(**kw), grid)


def _strictly_increasing(v):
    return all(b > a for a, b in zip(v, v[1:]))


def _fmt(v):
    return "[" + ", ".join(f"{x:.6g}" for x in v) + "]"


# -- checks -------------------------------------------------------------------------

def check_1():
    t0 = time.perf_counter()
    worst = 0.0
    for P, Q in CASES:
        p = ControllerParams(P_ref=P, Q_ref=Q)
        ident = identify_admittance(p, ID_OMEGAS)
        Y = Y_array(AdmittanceModel.from_params(p), ID_OMEGAS)
        for r, Ya in zip(ident, Y):
            mask = np.abs(Ya) > 0.01
            worst = max(worst, float(np.max(np.abs(r.Y_hat.m - Ya)[mask] / np.abs(Ya)[mask])))
    dt = time.perf_counter() - t0
    ok = worst <= 0.05 and dt < 120
    return ok, f"max entrywise rel. error {worst:.3%} (limit 5%), {dt:.1f} s (limit 120 s)"


def check_2():
    errs = []
    for P, Q in CASES:
        p = ControllerParams(P_ref=P, Q_ref=Q)
        m = AdmittanceModel.from_params(p)
        Yip = m.blocks.Y_ip(1j * TWENTY)[:, None, None] * np.eye(2)
        D, W = D_W_arrays(m, TWENTY)
        errs.append(("D22", float(np.max(np.abs(D[:, 1, 1] - 1)))))
        if P == Q == 0:
            errs.append(("W", float(np.max(np.abs(W + Yip)))))
        off = AdmittanceModel.from_blocks(
            p, m.blocks.__class__(**{**m.blocks.__dict__, "K_p": ZERO, "F_P": ZERO,
                                     "F_Q": ZERO, "Ft_P": ZERO, "Ft_Q": ZERO}))
        errs.append(("Y off", float(np.max(np.abs(Y_array(off, TWENTY) + Yip)))))
    worst = max(e for _, e in errs)
    return worst <= 1e-12, "max deviation " + ", ".join(f"{k} {e:.1e}" for k, e in errs)


def check_3():
    ok, parts = True, []
    for P, Q in CASES:
        curves = [_curve(K_Q=k, P_ref=P, Q_ref=Q) for k in (0.05, 0.1, 0.2)]
        low = [c.nu[0] for c in curves]
        zc = [c.first_crossing for c in curves]
        good = _strictly_increasing(low) and zc[2] > zc[0]
        ok &= good
        parts.append(f"({P:g},{Q:g}) nu(1e-3)={_fmt(low)} crossing={_fmt(zc)}")
    return ok, "; ".join(parts)


def check_4():
    ok, parts = True, []
    for P, Q in CASES:
        curves = [_curve(K_P=k, P_ref=P, Q_ref=Q) for k in (0.05, 0.1, 0.2)]
        low = [c.nu[0] for c in curves]
        zc = [c.first_crossing for c in curves]
        good_low = _strictly_increasing(low)
        good_zc = all(b <= a for a, b in zip(zc, zc[1:]))
        ok &= good_low and good_zc
        parts.append(f"({P:g},{Q:g}) nu(1e-3)={_fmt(low)} "
                     f"[{'ok' if good_low else 'not increasing'}] crossing={_fmt(zc)} "
                     f"[{'ok' if good_zc else 'increasing'}]")
    return ok, "; ".join(parts)


def check_5():
    ok, parts = True, []
    for P, Q in CASES:
        mins = [_curve(K_PI=k, P_ref=P, Q_ref=Q).min_nu for k in (0.0, 0.1, 0.3)]
        good = all(b < a for a, b in zip(mins, mins[1:]))
        ok &= good
        parts.append(f"({P:g},{Q:g}) min nu={_fmt(mins)} [{'ok' if good else 'not decreasing'}]")
    return ok, "; ".join(parts)


def check_6():
    ok, parts = True, []
    for P, Q in CASES:
        base = _curve(P_ref=P, Q_ref=Q).min_nu
        items = []
        for name, val in SIDE_CHANGES.items():
            m = _curve(P_ref=P, Q_ref=Q, **{name: val}).min_nu
            good = m < base
            ok &= good
            items.append(f"{name} {m:.4g}{'' if good else '(not lower)'}")
        parts.append(f"({P:g},{Q:g}) base {base:.4g} vs " + ", ".join(items))
    return ok, "; ".join(parts)


def check_7():
    ok, parts = True, []
    for kw, g in PASSIVE_SCENARIOS:
        nu = _curve(WIDE, **kw).nu
        z_nu = passivity_index_array(g.matrix(WIDE.omegas()))
        pre = nu.min() > 0 and z_nu.min() >= -1e-12
        res = nyquist(_model(**kw), g, NyquistGrid(1e-3, 5.0, 2000))
        good = pre and res.verdict == "stable"
        ok &= good
        parts.append(f"{g.kind} min nu={nu.min():.3g} -> {res.verdict}"
                     + ("" if pre else " (precondition violated)"))
    return ok, "; ".join(parts)


def case_study_run():
    P, Q = CASE_STUDY_OP
    p = ControllerParams(P_ref=P, Q_ref=Q)
    back = {k: getattr(p, k) for k in CASE_STUDY_GAINS}
    events = ([(20.0, "P_ref", P + 0.05)]
              + [(400.0, k, v) for k, v in CASE_STUDY_GAINS.items()]
              + [(1400.0, k, v) for k, v in back.items()])
    cfg = SimConfig(dt=5e-3, t_end=2600.0, mode="grid", grid=CASE_STUDY_GRID,
                    events=tuple(events), decimation=20)
    return simulate(p, cfg)


def check_8():
    P, Q = CASE_STUDY_OP
    base = _curve(P_ref=P, Q_ref=Q)
    mod = _curve(P_ref=P, Q_ref=Q, **CASE_STUDY_GAINS)
    degrades = mod.min_nu < base.min_nu
    ts = case_study_run()
    f = dominant_frequency(ts.t, ts.P, 500.0, 1400.0)
    ratio = f / mod.argmin_omega
    near = abs(ratio - 1) <= 0.2
    period = 2 * math.pi / f
    mids, amps = envelope(ts.t, ts.P, 2 * period)
    during = amps[(mids > 520) & (mids < 1400 - period)]
    after = amps[mids > 1400 + period]
    oscillates = during.min() > 1e-3 and during[-1] > during[0]
    restores = after[0] < 0.5 * during[-1] and after[-1] < 0.05 * during[-1] and \
        np.all(np.diff(after) <= 1e-9)
    ok = degrades and near and oscillates and restores
    return ok, (f"op ({P:g},{Q:g}) min nu {base.min_nu:.4g} -> {mod.min_nu:.4g}"
                f"{'' if degrades else ' (not degraded)'}; dominant {f:.4f} vs argmin "
                f"{mod.argmin_omega:.4f} (ratio {ratio:.3f}); envelope {during[0]:.2e} -> "
                f"{during[-1]:.2e} while modified, {after[-1]:.1e} after revert")


def _rk4_ratio():
    p = ControllerParams(P_ref=1.0, Q_ref=0.5)

    def final(dt):
        cfg = SimConfig(dt=dt, t_end=1.0, decimation=int(round(1.0 / dt)))
        return simulate(p, cfg, SimState()).final_state.to_array()

    ref = final(0.1 / 64)
    return np.max(np.abs(final(0.05) - ref)) / np.max(np.abs(final(0.025) - ref))


def evaluated_models():
    """Every (params, omegas) pair whose D is evaluated by criteria 1 to 8."""
    out = []
    for P, Q in CASES:
        op = dict(P_ref=P, Q_ref=Q)
        out += [(op, ID_OMEGAS), (op, TWENTY)]
        for name, vals in (("K_Q", (0.05, 0.1, 0.2)), ("K_P", (0.05, 0.1, 0.2)),
                           ("K_PI", (0.0, 0.1, 0.3))):
            out += [({**op, name: v}, SWEEP.omegas()) for v in vals]
        out += [({**op, k: v}, SWEEP.omegas()) for k, v in SIDE_CHANGES.items()]
    for kw, _ in PASSIVE_SCENARIOS:
        out += [(kw, WIDE.omegas())]
    P, Q = CASE_STUDY_OP
    out += [(dict(P_ref=P, Q_ref=Q, **CASE_STUDY_GAINS), SWEEP.omegas())]
    return out


def check_9():
    ratio = _rk4_ratio()
    rng = np.random.default_rng(7)
    A = rng.normal(size=(100, 2, 2)) + 1j * rng.normal(size=(100, 2, 2))
    H = A + np.conj(np.swapaxes(A, -1, -2))
    eig_err = float(np.max(np.abs(hermitian_eigvals(H) - np.linalg.eigvalsh(H))))
    dd_err, n = 0.0, 0
    for kw, w in evaluated_models():
        D, _ = D_W_arrays(_model(**kw), w)
        Dinv, _ = inv2(D)
        dd_err = max(dd_err, float(np.max(np.abs(D @ Dinv - np.eye(2)))))
        n += len(w)
    ok = 12 <= ratio <= 20 and eig_err <= 1e-10 and dd_err <= 1e-12
    return ok, (f"RK4 ratio {ratio:.2f} (12..20); Hermitian eig error {eig_err:.1e}; "
                f"max |D D^-1 - I| {dd_err:.1e} over {n} frequencies")


TITLES = {
    1: "oracle equivalence", 2: "trivial degeneracies", 3: "K_Q trend", 4: "K_P trend",
    5: "K_PI trend", 6: "single-parameter changes lower min nu",
    7: "passivity implies Nyquist stability", 8: "case-study surrogate",
    9: "numerical hygiene",
}
CHECKS = {1: check_1, 2: check_2, 3: check_3, 4: check_4, 5: check_5, 6: check_6,
          7: check_7, 8: check_8, 9: check_9}


def _run(n):
    ok, detail = CHECKS[n]()
    _report(n, TITLES[n], ok, detail)


def test_criterion_1_oracle_equivalence():
    _run(1)


def test_criterion_2_degeneracies():
    _run(2)


def test_criterion_3_kq_trend():
    _run(3)


def test_criterion_4_kp_trend():
    _run(4)


def test_criterion_5_kpi_trend():
    _run(5)


def test_criterion_6_single_changes():
    _run(6)


def test_criterion_7_passivity_nyquist():
    _run(7)


def test_criterion_8_case_study():
    _run(8)


def test_criterion_9_numerical_hygiene():
    _run(9)


if __name__ == "__main__":
    for n in CHECKS:
        try:
            _run(n)
        except AssertionError:
            pass
