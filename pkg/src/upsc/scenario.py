"""
Scenario files: plain ``key = value`` sections.

Sections and keys::

    [params]   any ControllerParams field (missing ones take base-case values)
    [sweep]    parameter, values, omega_min, omega_max, points, spacing
    [grid]     kind, R_g, L_g, C_g, R_c, omega_min, omega_max, points
    [sim]      dt, t_end, mode, decimation, pert_axis, pert_amplitude,
               pert_omega, pert_start, events, omegas, amplitude, periods,
               spectrum_start, spectrum_end

Frequencies (omega_*, pert_omega, omegas) are in pu unless suffixed with
``hz`` (converted with the 60 Hz base). Events are ``time:name=value`` items
separated by ``;``.
"""
from __future__ import annotations

import configparser
import logging
import re
from dataclasses import dataclass, fields

from upsc.blocks import PARAM_NAMES, ControllerParams
from upsc.errors import ConfigError, UPSCError
from upsc.grid import GridImpedance
from upsc.passivity import FrequencyGrid
from upsc.stability import NyquistGrid

log = logging.getLogger(__name__)

BASE_HZ = 60.0


def parse_frequency(text: str) -> float:
    """Parse a pu frequency, or Hz with an ``hz`` suffix."""
    t = text.strip().lower()
    if t.endswith("hz"):
        return float(t[:-2]) / BASE_HZ
    return float(t)


def parse_frequency_list(text: str) -> tuple:
    return tuple(parse_frequency(x) for x in re.split(r"[,\s]+", text.strip()) if x)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class SweepSection:
    parameter: str
    values: tuple
    omega_min: float = 1e-3
    omega_max: float = 0.2
    points: int = 400
    spacing: str = "log"

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.omega_min, self.omega_max, self.points, self.spacing)


@dataclass(frozen=True)
class GridSection:
    kind: str = "series-RL"
    R_g: float = 0.0
    L_g: float = 0.0
    C_g: float = 0.0
    R_c: float = 0.0
    omega_min: float = 1e-3
    omega_max: float = 5.0
    points: int = 2000

    def impedance(self, omega_1: float = 1.0) -> GridImpedance:
        return GridImpedance(self.kind, self.R_g, self.L_g, self.C_g, self.R_c, omega_1)

    def nyquist_grid(self) -> NyquistGrid:
        return NyquistGrid(self.omega_min, self.omega_max, self.points)


@dataclass(frozen=True)
class SimSection:
    dt: float = 5e-3
    t_end: float = 100.0
    mode: str = "forced"
    decimation: int = 1
    pert_axis: str = "d"
    pert_amplitude: float = 0.0
    pert_omega: float = 0.0
    pert_start: float = 0.0
    events: tuple = ()
    omegas: tuple = (0.02, 0.05, 0.1, 0.15, 0.2)
    amplitude: float = 0.01
    periods: int = 4
    spectrum_start: float = -1.0
    spectrum_end: float = -1.0


@dataclass(frozen=True)
class Scenario:
    params: ControllerParams = ControllerParams()
    sweep: SweepSection | None = None
    grid: GridSection | None = None
    sim: SimSection | None = None

    def dump(self) -> str:
        """Serialize to the scenario format (re-parses to an equal Scenario)."""
        out = ["[params]"]
        out += [f"{n} = {_fmt(getattr(self.params, n))}" for n in PARAM_NAMES]
        if self.sweep is not None:
            out += ["", "[sweep]"]
            for f in fields(SweepSection):
                v = getattr(self.sweep, f.name)
                if f.name == "values":
                    v = ", ".join(_fmt(x) for x in v)
                out.append(f"{f.name} = {_fmt(v)}")
        if self.grid is not None:
            out += ["", "[grid]"]
            out += [f"{f.name} = {_fmt(getattr(self.grid, f.name))}"
                    for f in fields(GridSection)]
        if self.sim is not None:
            out += ["", "[sim]"]
            for f in fields(SimSection):
                v = getattr(self.sim, f.name)
                if f.name == "events":
                    v = "; ".join(f"{_fmt(t)}:{n}={_fmt(x)}" for t, n, x in v)
                elif f.name == "omegas":
                    v = ", ".join(_fmt(x) for x in v)
                out.append(f"{f.name} = {_fmt(v)}")
        return "\n".join(out) + "\n"


_SECTIONS = {"params": None, "sweep": SweepSection, "grid": GridSection, "sim": SimSection}
_FREQ_KEYS = {"omega_min", "omega_max", "pert_omega"}


def _line_of(text: str, section: str, key: str | None = None):
    cur = None
    for n, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return n
            continue
        if key is not None and cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return n
    return None


def _parse_events(text: str) -> tuple:
    out = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        m = re.match(r"^([^:]+):\s*(\w+)\s*=\s*(\S+)$", item)
        if not m:
            raise ValueError(f"bad event {item!r}, expected time:name=value")
        name = m.group(2)
        if name not in PARAM_NAMES:
            raise ValueError(f"event names unknown parameter {name!r}")
        out.append((float(m.group(1)), name, float(m.group(3))))
    return tuple(sorted(out, key=lambda e: e[0]))


def _convert(cls, key: str, raw: str):
    ftype = {f.name: f.type for f in fields(cls)}[key]
    if key == "events":
        return _parse_events(raw)
    if key in ("omegas",):
        return parse_frequency_list(raw)
    if key == "values":
        return tuple(float(x) for x in re.split(r"[,\s]+", raw.strip()) if x)
    if key in _FREQ_KEYS:
        return parse_frequency(raw)
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw.strip()


def parse_scenario(text: str) -> Scenario:
    """
    Parse scenario text.

    Raises
    ------
    ConfigError
        On syntax errors, unknown sections or keys (with line number) and
        invalid values.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from exc

    parts = {}
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]", _line_of(text, section))
        cls = _SECTIONS[section]
        known = PARAM_NAMES if cls is None else tuple(f.name for f in fields(cls))
        vals = {}
        for key, raw in cp.items(section):
            line = _line_of(text, section, key)
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line)
            try:
                vals[key] = float(raw) if cls is None else _convert(cls, key, raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: {exc}", line) from exc
        parts[section] = vals

    pvals = parts.get("params", {})
    for name in PARAM_NAMES:
        if name not in pvals:
            log.info("params.%s not given, using base-case default %s", name,
                     getattr(ControllerParams(), name))
    try:
        params = ControllerParams(**pvals).validate()
    except UPSCError as exc:
        raise ConfigError(f"invalid [params]: {exc}", _line_of(text, "params")) from exc

    kw = {"params": params}
    try:
        if "sweep" in parts:
            sv = parts["sweep"]
            if "parameter" not in sv or "values" not in sv:
                raise ConfigError("[sweep] needs parameter and values",
                                  _line_of(text, "sweep"))
            if sv["parameter"] not in PARAM_NAMES:
                raise ConfigError(f"unknown sweep parameter {sv['parameter']!r}",
                                  _line_of(text, "sweep", "parameter"))
            kw["sweep"] = SweepSection(**sv)
            kw["sweep"].grid()
        if "grid" in parts:
            kw["grid"] = GridSection(**parts["grid"])
            kw["grid"].impedance(params.omega_1)
        if "sim" in parts:
            kw["sim"] = SimSection(**parts["sim"])
    except ConfigError:
        raise
    except (UPSCError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return Scenario(**kw)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
