"""
Command-line interface.

Commands: ``admittance``, ``passivity``, ``nyquist``, ``simulate`` and
``identify``. Each reads ``--scenario FILE`` and writes CSV to ``--out`` or
stdout; summaries and verdicts go to stderr.

Exit codes: 0 ok, 2 configuration error, 3 numeric guard (pole or singular
D), 4 inconclusive Nyquist count, 5 simulation diverged, 6 identification not
settled.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from contextlib import contextmanager

import numpy as np

from upsc.admittance import AdmittanceModel, Y_array
from upsc.errors import ConfigError, Divergence, Inconclusive, NotSettled, NumericGuard, \
    UPSCError
from upsc.passivity import FrequencyGrid, sweep
from upsc.scenario import BASE_HZ, Scenario, load_scenario, parse_frequency_list
from upsc.simulator import Perturbation, SimConfig, dominant_frequency, \
    identify_admittance, simulate
from upsc.stability import nyquist

log = logging.getLogger("upsc")

EXIT_CONFIG, EXIT_GUARD, EXIT_INCONCLUSIVE, EXIT_DIVERGED, EXIT_NOT_SETTLED = 2, 3, 4, 5, 6
Y_COLUMNS = ("Ydd_re", "Ydd_im", "Ydq_re", "Ydq_im", "Yqd_re", "Yqd_im", "Yqq_re", "Yqq_im")


def fmt(x) -> str:
    return repr(float(x))


def y_fields(Y: np.ndarray) -> list:
    return [fmt(v) for z in (Y[0, 0], Y[0, 1], Y[1, 0], Y[1, 1]) for v in (z.real, z.imag)]


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _model(sc: Scenario, args) -> AdmittanceModel:
    return AdmittanceModel.from_params(sc.params, psl_sign=args.psl_sign)


def _debug_admittance(kind, gain):
    if kind == "identity":
        return lambda w: np.broadcast_to(np.eye(2, dtype=complex), (len(w), 2, 2)).copy()
    if kind == "zero":
        return lambda w: np.zeros((len(w), 2, 2), dtype=complex)
    if kind == "cubic":
        return lambda w: (gain / (1j * np.asarray(w) + 1) ** 3)[:, None, None] * np.eye(2)
    return None


def cmd_admittance(sc: Scenario, args) -> int:
    omegas = []
    for item in args.omega or []:
        omegas.extend(parse_frequency_list(item))
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(("omega",) + Y_COLUMNS)
        if omegas:
            Y = Y_array(_model(sc, args), omegas)
            for om, y in zip(omegas, Y):
                w.writerow([fmt(om)] + y_fields(y))
    return 0


def _summary(curve, label=""):
    zc = ";".join(fmt(z) for z in curve.zero_crossings)
    print(f"{label}min_nu={fmt(curve.min_nu)} argmin_omega={fmt(curve.argmin_omega)} "
          f"zero_crossings={zc}", file=sys.stderr)


def cmd_passivity(sc: Scenario, args) -> int:
    debug = _debug_admittance(args.debug_admittance, args.debug_gain)
    if sc.sweep is None:
        curves = [(None, sweep(_model(sc, args), FrequencyGrid(), admittance=debug))]
    else:
        grid = sc.sweep.grid()
        curves = []
        for v in sc.sweep.values:
            params = sc.params.with_(**{sc.sweep.parameter: v})
            model = AdmittanceModel.from_params(params, psl_sign=args.psl_sign)
            curves.append((v, sweep(model, grid, admittance=debug)))
    with _output(args.out) as fh:
        w = _writer(fh)
        if sc.sweep is None:
            w.writerow(("omega", "nu"))
        else:
            w.writerow((sc.sweep.parameter, "omega", "nu"))
        for v, c in curves:
            for om, nu in zip(c.omegas, c.nu):
                w.writerow(([fmt(v)] if v is not None else []) + [fmt(om), fmt(nu)])
    for v, c in curves:
        _summary(c, "" if v is None else f"{sc.sweep.parameter}={fmt(v)} ")
    return 0


def cmd_nyquist(sc: Scenario, args) -> int:
    if sc.grid is None:
        raise ConfigError("nyquist needs a [grid] section")
    g = sc.grid.impedance(sc.params.omega_1)
    debug = _debug_admittance(args.debug_admittance, args.debug_gain)
    res = nyquist(debug or _model(sc, args), g, sc.grid.nyquist_grid(),
                  open_loop_rhp_poles=args.open_loop_rhp_poles)
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(("omega", "lam1_re", "lam1_im", "lam2_re", "lam2_im"))
        for om, (a, b) in zip(res.omegas, res.loci):
            w.writerow([fmt(om), fmt(a.real), fmt(a.imag), fmt(b.real), fmt(b.imag)])
    print(f"verdict={res.verdict} encirclements={res.encirclements} "
          f"min_distance={fmt(res.min_distance)} "
          f"open_loop_rhp_poles={res.assumptions['open_loop_rhp_poles']}", file=sys.stderr)
    return 0


def _sim_config(sc: Scenario) -> SimConfig:
    if sc.sim is None:
        raise ConfigError("this command needs a [sim] section")
    s = sc.sim
    grid = None
    if s.mode == "grid":
        if sc.grid is None:
            raise ConfigError("[sim] mode = grid needs a [grid] section")
        grid = sc.grid.impedance(sc.params.omega_1)
    pert = None
    if s.pert_amplitude:
        pert = Perturbation(s.pert_axis, s.pert_amplitude, s.pert_omega, s.pert_start)
    try:
        return SimConfig(dt=s.dt, t_end=s.t_end, mode=s.mode, grid=grid, perturbation=pert,
                         events=s.events, decimation=s.decimation)
    except UPSCError as exc:
        raise ConfigError(f"invalid [sim]: {exc}") from exc


def cmd_simulate(sc: Scenario, args) -> int:
    cfg = _sim_config(sc)
    ts = simulate(sc.params, cfg)
    with _output(args.out) as fh:
        ts.to_csv(fh)
    s = sc.sim
    if s.spectrum_start >= 0 and len(ts.t) > 8:
        t1 = s.spectrum_end if s.spectrum_end > 0 else None
        f = dominant_frequency(ts.t, ts.P, s.spectrum_start, t1)
        print(f"dominant_omega={fmt(f)} pu ({fmt(f * BASE_HZ)} Hz)", file=sys.stderr)
    return 0


def cmd_identify(sc: Scenario, args) -> int:
    if sc.sim is None:
        raise ConfigError("identify needs a [sim] section")
    s = sc.sim
    res = identify_admittance(sc.params, s.omegas, amplitude=s.amplitude, dt=s.dt,
                              periods=s.periods)
    model = _model(sc, args)
    with _output(args.out) as fh:
        w = _writer(fh)
        w.writerow(("omega",) + tuple("hat_" + c for c in Y_COLUMNS) + Y_COLUMNS
                   + ("max_rel_err",))
        for r in res:
            Ya = Y_array(model, r.omega)[0]
            Yh = r.Y_hat.m
            mask = np.abs(Ya) > 0.01
            err = float(np.max(np.abs(Yh - Ya)[mask] / np.abs(Ya)[mask])) if mask.any() \
                else 0.0
            w.writerow([fmt(r.omega)] + y_fields(Yh) + y_fields(Ya) + [fmt(err)])
    return 0


COMMANDS = {"admittance": cmd_admittance, "passivity": cmd_passivity,
            "nyquist": cmd_nyquist, "simulate": cmd_simulate, "identify": cmd_identify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="upsc", description="Input admittance, passivity and stability analysis of a "
        "power-synchronized grid-forming converter.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario file")
        p.add_argument("--out", help="output CSV (default stdout)")
        p.add_argument("--dump-config", action="store_true",
                       help="print the normalized scenario and exit")
        p.add_argument("--psl-sign", type=int, choices=(1, -1), default=1,
                       help="sign of the angle-loop coupling; -1 is for comparison only")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "admittance":
            p.add_argument("--omega", action="append",
                           help="frequency list in pu ('hz' suffix allowed); repeatable")
        if name in ("passivity", "nyquist"):
            p.add_argument("--debug-admittance", choices=("identity", "zero", "cubic"),
                           help="replace Y by a synthetic admittance")
            p.add_argument("--debug-gain", type=float, default=1.0,
                           help="gain k of the cubic debug admittance k/(s+1)^3")
        if name == "nyquist":
            p.add_argument("--open-loop-rhp-poles", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        sc = load_scenario(args.scenario)
        if args.dump_config:
            sys.stdout.write(sc.dump())
            return 0
        return COMMANDS[args.command](sc, args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericGuard as exc:
        print(f"error: numeric guard at omega={exc.omega}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except Inconclusive as exc:
        print(f"error: inconclusive: {exc} (nearest approach {exc.distance})",
              file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except Divergence as exc:
        print(f"error: diverged; last finite time {exc.t_last}", file=sys.stderr)
        return EXIT_DIVERGED
    except NotSettled as exc:
        print(f"error: not settled: {exc}", file=sys.stderr)
        return EXIT_NOT_SETTLED


if __name__ == "__main__":
    sys.exit(main())
