"""Config parsing, CSV and plot output, and the ``gflsim`` command line.

Config files are TOML. Every key is optional except ``grid.Vm``, ``grid.f``,
``simulation.dt`` and ``simulation.t_end``. Units: resistances and reactances
in pu (reactances at nominal frequency), time constants and times in s, angles
in rad, gains dimensionless.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .controller import ControllerParams
from .frames import GridSourceParams
from .grid_support import FreqSupportParams, VoltVarParams
from .network import NetworkParams
from .numerics import NewtonSettings, SmoothingParams
from .simulator.core import (COLUMNS, InitResidualTooLarge, SimulationError, Simulator)
from .simulator.scenario import (PhaseJump, PStep, QStep, Scenario, ScenarioError, SimConfig,
                                 SupportToggle)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2


class ParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ValidationError(ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class UnknownKey(ValidationError):
    pass


class UnknownSignal(ValueError):
    pass


REQUIRED = object()


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _any(v):
    return True


def _choice(*opts):
    def check(v):
        return v in opts
    check.desc = "one of " + ", ".join(repr(o) for o in opts)
    return check


_positive.desc, _nonneg.desc, _any.desc = "> 0", ">= 0", "any real"


def _unit_interval(v):
    return 0 < v <= 1


_unit_interval.desc = "in (0, 1]"


def _at_least_one(v):
    return v >= 1


_at_least_one.desc = ">= 1"

# section -> key -> (kind, default, check)
SCHEMA = {
    "grid": {
        "Vm": ("float", REQUIRED, _positive),
        "f": ("float", REQUIRED, _positive),
        "theta_dist": ("float", 0.0, _any),
        "t_dist": ("float", 0.0, _nonneg),
        "freq_offset": ("float", 0.0, _any),
    },
    "filter": {
        "R": ("phases", 0.01, _nonneg),
        "X": ("phases", 0.1, _nonneg),
    },
    "network": {
        "R": ("phases", 0.0, _nonneg),
        "X": ("phases", 0.0, _nonneg),
    },
    "pll": {
        "kp": ("float", 0.25, _nonneg),
        "ki": ("float", 10.0, _nonneg),
        "Tf": ("float", 1e-3, _positive),
    },
    "power_control": {
        "kp": ("float", 0.1, _nonneg),
        "ki": ("float", 10.0, _nonneg),
        "Tf": ("float", 5e-3, _positive),
        "p_ref": ("float", 0.5, _any),
        "q_ref": ("float", 0.0, _any),
    },
    "current_control": {
        "kp": ("float", 0.3, _nonneg),
        "ki": ("float", 20.0, _nonneg),
        "Tf": ("float", 5e-4, _positive),
    },
    "frequency_support": {
        "enabled": ("bool", False, _any),
        "kf": ("float", 20.0, _nonneg),
        "fdb": ("float", 0.0006, _nonneg),
    },
    "volt_var": {
        "enabled": ("bool", False, _any),
        "kv": ("float", 10.0, _nonneg),
        "vdb": ("float", 0.01, _nonneg),
        "vtarget": ("float", 1.0, _positive),
        "qmax": ("float", 0.3, _nonneg),
    },
    "simulation": {
        "dt": ("float", REQUIRED, _positive),
        "t_end": ("float", REQUIRED, _positive),
        "topology": ("str", "rl", _choice("rl", "resistive")),
        "frame": ("str", "dq", _choice("dq", "abc")),
        "companion_form": ("str", "norton", _choice("norton", "thevenin")),
        "epsilon": ("float", 1e-5, _positive),
        "newton_tol": ("float", 1e-10, _positive),
        "max_iter": ("int", 20, _at_least_one),
        "damping": ("float", 1.0, _unit_interval),
        "init": ("str", "table1", _choice("table1", "steady_state")),
        "table1_literal": ("bool", False, _any),
        "init_residual_bound": ("float", 0.1, _positive),
    },
}

EVENT_TYPES = {
    "phase_jump": {"delta_theta": ("float", REQUIRED, _any)},
    "p_step": {"delta_p": ("float", REQUIRED, _any)},
    "q_step": {"delta_q": ("float", REQUIRED, _any)},
    "support_toggle": {"target": ("str", "both", _choice("frequency", "volt_var", "both")),
                       "enabled": ("bool", True, _any)},
}


def _coerce(kind, value, key):
    def bad():
        return ValidationError(f"{key}: expected {kind}, got {value!r}", key)

    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad()
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(f"{key}: must be finite, got {value!r}", key)
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad()
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise bad()
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise bad()
        return value
    if kind == "phases":
        if isinstance(value, list):
            if len(value) != 3:
                raise ValidationError(f"{key}: expected a number or 3 per-phase values", key)
            return [_coerce("float", v, key) for v in value]
        return _coerce("float", value, key)
    raise AssertionError(kind)


def _check(check, value, key):
    vals = value if isinstance(value, list) else [value]
    for v in vals:
        if not check(v):
            raise ValidationError(f"{key}: expected {check.desc}, got {value!r}", key)


def _resolve_group(spec, given: dict, prefix: str) -> dict:
    for key in given:
        if key not in spec:
            raise UnknownKey(f"unknown key {prefix}.{key}; valid keys: {', '.join(spec)}",
                             f"{prefix}.{key}")
    out = {}
    for key, (kind, default, check) in spec.items():
        path = f"{prefix}.{key}"
        if key in given:
            value = _coerce(kind, given[key], path)
        elif default is REQUIRED:
            raise ValidationError(f"missing required key {path}", path)
        else:
            value = default
        _check(check, value, path)
        out[key] = value
    return out


def load_document(text) -> dict:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"config is not valid UTF-8: {exc}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise ParseError(f"syntax error at line {line}: {exc}", line) from exc


def resolve_document(doc: dict) -> dict:
    """Check keys, types and ranges and fill in every default."""
    for section in doc:
        if section not in SCHEMA and section != "events":
            raise UnknownKey(f"unknown section [{section}]; valid sections: "
                             f"{', '.join(list(SCHEMA) + ['events'])}", section)
    out = {}
    for section, spec in SCHEMA.items():
        given = doc.get(section, {})
        if not isinstance(given, dict):
            raise ValidationError(f"{section}: expected a table", section)
        out[section] = _resolve_group(spec, given, section)
    events = doc.get("events", [])
    if not isinstance(events, list):
        raise ValidationError("events: expected an array of tables ([[events]])", "events")
    out["events"] = []
    prev = -math.inf
    for k, ev in enumerate(events):
        prefix = f"events[{k}]"
        if not isinstance(ev, dict):
            raise ValidationError(f"{prefix}: expected a table", prefix)
        etype = ev.get("type")
        if etype not in EVENT_TYPES:
            raise ValidationError(f"{prefix}.type: expected one of {', '.join(EVENT_TYPES)}, "
                                  f"got {etype!r}", f"{prefix}.type")
        spec = {"type": ("str", REQUIRED, _any), "time": ("float", REQUIRED, _nonneg),
                **EVENT_TYPES[etype]}
        res = _resolve_group(spec, ev, prefix)
        if not res["time"] > prev:
            raise ValidationError(f"{prefix}.time: event times must be strictly increasing "
                                  f"({res['time']} after {prev})", f"{prefix}.time")
        if res["time"] > out["simulation"]["t_end"]:
            raise ValidationError(f"{prefix}.time: must lie within [0, simulation.t_end]",
                                  f"{prefix}.time")
        prev = res["time"]
        out["events"].append(res)
    return out


def _event(res: dict):
    t = res["time"]
    kind = res["type"]
    if kind == "phase_jump":
        return PhaseJump(t, res["delta_theta"])
    if kind == "p_step":
        return PStep(t, res["delta_p"])
    if kind == "q_step":
        return QStep(t, res["delta_q"])
    return SupportToggle(t, res["target"], res["enabled"])


_SCENARIO_KEYS = {
    "filter": "filter.R", "network": "network.R", "events": "events",
    "simulation.dt": "simulation.dt",
}


def build(resolved: dict) -> tuple[Scenario, SimConfig]:
    """Turn a resolved document into a validated (Scenario, SimConfig)."""
    g, fl, nw = resolved["grid"], resolved["filter"], resolved["network"]
    sim = resolved["simulation"]
    omega = 2.0 * math.pi * g["f"]
    pll, pq, cc = resolved["pll"], resolved["power_control"], resolved["current_control"]
    fs, vv = resolved["frequency_support"], resolved["volt_var"]
    try:
        scenario = Scenario(
            grid=GridSourceParams(g["Vm"], g["f"], g["theta_dist"], g["t_dist"], g["freq_offset"]),
            network=NetworkParams.from_reactance(fl["R"], fl["X"], nw["R"], nw["X"], omega),
            controller=ControllerParams(pll["kp"], pll["ki"], pll["Tf"], pq["kp"], pq["ki"],
                                        pq["Tf"], cc["kp"], cc["ki"], cc["Tf"]),
            freq_support=FreqSupportParams(fs["kf"], fs["fdb"], fs["enabled"]),
            volt_var=VoltVarParams(vv["kv"], vv["vdb"], vv["vtarget"], vv["qmax"], vv["enabled"]),
            p_ref=pq["p_ref"], q_ref=pq["q_ref"],
            events=tuple(_event(e) for e in resolved["events"]))
        config = SimConfig(
            dt=sim["dt"], t_end=sim["t_end"], topology=sim["topology"], frame=sim["frame"],
            companion_form=sim["companion_form"],
            solver=NewtonSettings(tol=sim["newton_tol"], max_iter=sim["max_iter"],
                                  damping=sim["damping"]),
            smoothing=SmoothingParams(sim["epsilon"]), init=sim["init"],
            table1_literal=sim["table1_literal"],
            init_residual_bound=sim["init_residual_bound"])
        Simulator(scenario, config)  # runs the cross checks
    except ScenarioError as exc:
        key = _SCENARIO_KEYS.get(exc.key, exc.key) or "simulation"
        raise ValidationError(f"{key}: {exc}", key) from exc
    return scenario, config


def resolve_config(text) -> dict:
    return resolve_document(load_document(text))


def parse_config(text) -> tuple[Scenario, SimConfig]:
    """Parse and validate a TOML config document."""
    return build(resolve_config(text))


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(type(v))


def serialize(resolved: dict, prefix: str = "") -> str:
    """TOML text for a resolved document; re-parsing it gives the same run."""
    lines = []
    for section in SCHEMA:
        lines.append(f"[{prefix}{section}]")
        lines += [f"{k} = {_toml_value(v)}" for k, v in resolved[section].items()]
        lines.append("")
    for ev in resolved["events"]:
        lines.append(f"[[{prefix}events]]")
        lines += [f"{k} = {_toml_value(v)}" for k, v in ev.items()]
        lines.append("")
    return "\n".join(lines)


# ----------------------------------------------------------------- output
def format_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in records:
        w.writerow(["%.16e" % float(v) for v in rec])
    return buf.getvalue()


def write_csv(records, destination) -> int:
    """Write records as CSV; returns the number of bytes written."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    data = format_csv(records).encode("utf-8")
    if hasattr(destination, "write"):
        if isinstance(destination, io.TextIOBase):
            destination.write(data.decode("utf-8"))
        else:
            destination.write(data)
    else:
        with open(destination, "wb") as fh:
            fh.write(data)
    return len(data)


def read_csv(source) -> tuple[list, list]:
    """Header and float rows of a CSV written by ``write_csv``."""
    with open(source, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def emit_plot(records, signals, destination) -> Path:
    """SVG with one panel per signal against time; byte-identical for equal input."""
    signals = list(signals)
    bad = [s for s in signals if s not in COLUMNS or s == "time_s"]
    if bad or not signals:
        raise UnknownSignal(f"unknown signal(s) {bad}; valid names: {', '.join(COLUMNS[1:])}")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    idx = {c: k for k, c in enumerate(COLUMNS)}
    t = [r[0] for r in records]
    with matplotlib.rc_context({"svg.hashsalt": "gflsim", "svg.fonttype": "path"}):
        fig, axes = plt.subplots(len(signals), 1, sharex=True, squeeze=False,
                                 figsize=(7, 2.2 * len(signals)))
        for ax, name in zip(axes[:, 0], signals):
            ax.plot(t, [r[idx[name]] for r in records], lw=1.0)
            ax.set_ylabel(name)
            ax.grid(True, alpha=0.3)
        axes[-1, 0].set_xlabel("time_s")
        fig.tight_layout()
        fig.savefig(destination, format="svg", metadata={"Date": None})
        plt.close(fig)
    return Path(destination)


def write_manifest(resolved: dict, source_bytes: bytes, csv_path, n_records: int,
                   destination) -> None:
    head = [
        f"tool = {_toml_value('gflsim')}",
        f"version = {_toml_value(__version__)}",
        f"input_sha256 = {_toml_value(hashlib.sha256(source_bytes).hexdigest())}",
        f"csv = {_toml_value(Path(csv_path).name)}",
        f"records = {n_records}",
        "",
    ]
    text = "\n".join(head) + "\n" + serialize(resolved, prefix="resolved.")
    Path(destination).write_bytes(text.encode("utf-8"))


# -------------------------------------------------------------------- CLI
def _err(msg):
    print(f"gflsim: {msg}", file=sys.stderr)


def _load(path):
    data = Path(path).read_bytes()
    resolved = resolve_config(data)
    scenario, config = build(resolved)
    return data, resolved, scenario, config


def _simulate(scenario, config, resolved, source, out_dir: Path, stem: str, plot=None):
    records = Simulator(scenario, config).run()
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    write_csv(records, csv_path)
    write_manifest(resolved, source, csv_path, len(records), out_dir / f"{stem}.manifest.toml")
    if plot:
        emit_plot(records, plot, out_dir / f"{stem}.svg")
    return csv_path


def _cmd_validate(args):
    _, resolved, scenario, config = _load(args.config)
    Simulator(scenario, config).initialize()
    if args.echo:
        sys.stdout.write(serialize(resolved))
    else:
        print(f"{args.config}: ok ({config.n_steps + 1} records, topology={config.topology})")
    return EXIT_OK


def _cmd_run(args):
    source, resolved, scenario, config = _load(args.config)
    plot = [s.strip() for s in args.plot.split(",")] if args.plot else None
    if plot:
        bad = [s for s in plot if s not in COLUMNS[1:]]
        if bad:
            raise UnknownSignal(f"unknown signal(s) {bad}; valid names: {', '.join(COLUMNS[1:])}")
    path = _simulate(scenario, config, resolved, source, Path(args.out), Path(args.config).stem,
                     plot)
    print(path)
    return EXIT_OK


def _sweep_one(job):
    resolved, source, out_dir, stem = job
    scenario, config = build(resolved)
    return str(_simulate(scenario, config, resolved, source, Path(out_dir), stem))


def _cmd_sweep(args):
    source, resolved, _, _ = _load(args.config)
    section, _, key = args.param.partition(".")
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise UnknownKey(f"unknown sweep parameter {args.param}", args.param)
    kind, _, check = SCHEMA[section][key]
    jobs = []
    for raw in args.values.split(","):
        raw = raw.strip()
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw
        value = _coerce(kind, value, args.param)
        _check(check, value, args.param)
        res = {s: dict(v) if isinstance(v, dict) else list(v) for s, v in resolved.items()}
        res[section][key] = value
        build(res)  # validate every point before running any
        stem = f"{Path(args.config).stem}_{section}.{key}={raw}"
        jobs.append((res, source, args.out, stem))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            paths = list(pool.map(_sweep_one, jobs))
    else:
        paths = [_sweep_one(j) for j in jobs]
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gflsim",
                                 description="EMT simulation of a grid-following inverter")
    ap.add_argument("--version", action="version", version=f"gflsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="simulate and write CSV + manifest")
    p.add_argument("config")
    p.add_argument("--out", default=".", help="output directory (default: .)")
    p.add_argument("--plot", help="comma-separated signals to plot to SVG")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("validate", help="parse and check a config without running it")
    p.add_argument("config")
    p.add_argument("--echo", action="store_true", help="print the resolved config")
    p.set_defaults(func=_cmd_validate)
    p = sub.add_parser("sweep", help="one run per value of a single parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="section.key, e.g. frequency_support.kf")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", default=".")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs (default: 1)")
    p.set_defaults(func=_cmd_sweep)
    return ap


def cli_main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        _err(f"ParseError: {exc}")
        return EXIT_INVALID
    except (ValidationError, UnknownSignal) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID
    except InitResidualTooLarge as exc:
        _err(f"InitResidualTooLarge: {exc}")
        return EXIT_INVALID
    except SimulationError as exc:
        _err(f"SolverError: {exc}")
        return EXIT_SOLVER
    except OSError as exc:
        _err(f"IoError: {exc}")
        return EXIT_INVALID


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
