"""``relay-dmt`` command line: analytic curves, Monte Carlo sweeps and comparisons.

Every run is driven by one JSON config; only ``--seed`` and ``--out`` may be
given on the command line. Exit codes: 0 success, 2 usage or config error,
3 unreliable exponent fit (data still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path as FsPath

import jsonschema
import numpy as np

from . import dmt
from .cf import CfScenario
from .channel import RateSpec
from .errors import RelayDmtError
from .jeemas import SelectionPolicy
from .montecarlo import (CfStrategy, FixedPathStrategy, JeemasStrategy, P2pStrategy,
                         snr_grid, sweep_and_fit)
from .topology import Path, RelayTopology

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNRELIABLE = 3

R_STEP = 0.05
CURVE_HEADER = ["r", "d", "kind"]
OUTAGE_HEADER = ["snr_db", "p_hat", "ci_low", "ci_high", "trials", "outage_events"]
SELECTORS = ["mimo", "upper", "chain", "jeemas", "hybrid", "p2p-select", "cf-upper"]

_POS_INT = {"type": "integer", "minimum": 1}
_CF_ANTENNAS = {
    "type": "object",
    "properties": {"source": _POS_INT, "relays": {"type": "array", "items": _POS_INT, "minItems": 1, "maxItems": 4},
                   "destination": _POS_INT},
    "required": ["source", "relays", "destination"],
    "additionalProperties": False,
}

SCENARIO_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["multihop", "cf", "p2p"]},
        "antennas": {"oneOf": [{"type": "array", "items": _POS_INT, "minItems": 2}, _CF_ANTENNAS]},
        "curve": {"type": "string"},
        "strategy": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["jeemas", "fixed-path"]},
                "m": _POS_INT,
                "policy": {"enum": ["fixed", "hybrid"]},
                "candidates": {"enum": ["exhaustive", "independent"]},
                "envelope": {"type": "boolean"},
                "selection": {"type": "boolean"},
                "path": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
            },
            "additionalProperties": False,
        },
        "snr_grid": {
            "type": "object",
            "properties": {"start_db": {"type": "number"}, "stop_db": {"type": "number"},
                           "step_db": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["start_db", "stop_db", "step_db"],
            "additionalProperties": False,
        },
        "rate": {
            "type": "object",
            "properties": {"r": {"type": "number", "minimum": 0}, "fixed_R": {"type": "number", "minimum": 0}},
            "minProperties": 1, "maxProperties": 1,
            "additionalProperties": False,
        },
        "trials": _POS_INT,
        "seed": {"type": "integer", "minimum": 0},
        "fit_window": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "workers": _POS_INT,
    },
    "required": ["kind", "antennas"],
    "additionalProperties": False,
}

COMPARE_SCHEMA = {
    "type": "object",
    "properties": {
        "inputs": {"type": "array", "items": {"type": "string"}},
        "labels": {"type": "array", "items": {"type": "string"}},
        "title": {"type": "string"},
    },
    "required": ["inputs"],
    "additionalProperties": False,
}


class ConfigError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: FsPath, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def read_curve_file(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty file")
    return rows[0], rows[1:]


def load_config(path, schema) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    return cfg


# -- scenario interpretation -------------------------------------------------

def _stage_list(cfg) -> list[int]:
    ant = cfg["antennas"]
    if isinstance(ant, dict):
        raise ConfigError("this command needs 'antennas' as a list of stage sizes")
    return list(ant)


def _cf_scenario(cfg) -> CfScenario:
    ant = cfg["antennas"]
    if isinstance(ant, dict):
        return CfScenario(ant["source"], tuple(ant["relays"]), ant["destination"])
    if len(ant) != 3:
        raise ConfigError("cf antennas must be {source, relays, destination} or [M0, M1, M2]")
    return CfScenario(ant[0], (ant[1],), ant[2])


def _two(cfg, what) -> tuple[int, int]:
    ant = _stage_list(cfg)
    if len(ant) != 2:
        raise ConfigError(f"{what} needs exactly two antenna counts")
    return ant[0], ant[1]


def analytic_curve(cfg) -> dmt.DmtCurve:
    sel = cfg.get("curve")
    if sel not in SELECTORS:
        raise ConfigError(f"curve must be one of {SELECTORS}, got {sel!r}")
    strat = cfg.get("strategy", {})
    if sel == "mimo":
        return dmt.dmt_mimo(*_two(cfg, "mimo"))
    if sel == "p2p-select":
        return dmt.dmt_p2p_selection(*_two(cfg, "p2p-select"))
    if sel == "cf-upper":
        sc = _cf_scenario(cfg)
        return dmt.dmt_cf_upper(sc.m0, sc.m1, sc.m2)
    stages = _stage_list(cfg)
    t = RelayTopology(tuple(stages))
    if sel == "upper":
        return dmt.dmt_upper_bound(t)
    if sel == "chain":
        if len(set(stages)) == 1:
            return dmt.dmt_chain(stages[0], t.hops)
        return dmt.dmt_chain_mixed(stages)
    if sel == "jeemas":
        if "m" not in strat:
            raise ConfigError("jeemas curve needs strategy.m")
        return dmt.dmt_jeemas(t, strat["m"])
    return dmt.dmt_hybrid(t, envelope=strat.get("envelope", False))


def _rate(cfg) -> RateSpec:
    rate = cfg.get("rate")
    if rate is None:
        raise ConfigError("simulate needs 'rate'")
    return RateSpec.scaled(rate["r"]) if "r" in rate else RateSpec.fixed(rate["fixed_R"])


def build_strategy(cfg):
    kind = cfg["kind"]
    strat = cfg.get("strategy", {})
    if kind == "cf":
        return CfStrategy(_cf_scenario(cfg))
    if kind == "p2p":
        nt, nr = _two(cfg, "p2p")
        return P2pStrategy(nt, nr, selection=strat.get("selection", False))
    t = RelayTopology(tuple(_stage_list(cfg)))
    if strat.get("mode", "jeemas") == "fixed-path":
        if "path" in strat:
            path = Path(tuple(tuple(s) for s in strat["path"]))
        else:
            m = strat.get("m", 1)
            t.check_subset_size(m)
            path = Path(tuple(tuple(range(m)) for _ in t.stage_antennas))
        if not path.fits(t):
            raise ConfigError("strategy.path does not fit the topology")
        return FixedPathStrategy(t, path)
    policy = strat.get("policy", "fixed")
    m = strat.get("m")
    if policy == "fixed" and m is None:
        raise ConfigError("fixed policy needs strategy.m")
    return JeemasStrategy(t, SelectionPolicy(strat.get("candidates", "exhaustive"), policy, m))


# -- commands ---------------------------------------------------------------

def cmd_analytic(cfg, out: FsPath) -> int:
    c = analytic_curve(cfg)
    rows = [(r, d, "vertex") for r, d in c.points()]
    n = int(round(c.r_max / R_STEP))
    for i in range(n + 1):
        r = round(i * R_STEP, 10)
        rows.append((r, float(c(r)), "sample"))
    _write_csv(out, CURVE_HEADER, rows)
    return EXIT_OK


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def cmd_simulate(cfg, out: FsPath, seed: int | None) -> int:
    if "trials" not in cfg or "snr_grid" not in cfg:
        raise ConfigError("simulate needs 'trials' and 'snr_grid'")
    g = cfg["snr_grid"]
    try:
        grid = snr_grid(g["start_db"], g["stop_db"], g["step_db"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    window = tuple(cfg["fit_window"]) if "fit_window" in cfg else None
    if window is not None and (window[0] > window[1] or window[0] < grid[0].snr_db - 1e-9
                               or window[1] > grid[-1].snr_db + 1e-9):
        raise ConfigError("fit_window must lie inside the snr grid")
    seed = cfg.get("seed", 0) if seed is None else seed
    strategy = build_strategy(cfg)
    est, fit = sweep_and_fit(strategy, grid, _rate(cfg), cfg["trials"], seed, window,
                             workers=cfg.get("workers", 1))
    rows = [(e.snr.snr_db, e.p_hat, e.ci_low, e.ci_high, e.trials, e.outage_events) for e in est]
    _write_csv(out, OUTAGE_HEADER, rows)
    sidecar = out.with_name(out.stem + ".fit.json")
    payload = {k: _json_safe(v) for k, v in fit.as_dict().items()}
    sidecar.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK if fit.reliable else EXIT_UNRELIABLE


def _gnuplot(data: str, header, labels, title: str) -> str:
    curve = header == CURVE_HEADER
    # merged layout: series, x, y, ...
    xcol, ycol = 2, 3
    lines = [
        "set datafile separator ','",
        f"set title {json.dumps(title)}",
        "set key top right",
    ]
    if curve:
        lines += ["set xlabel 'multiplexing gain r'", "set ylabel 'diversity gain d(r)'"]
        cond = "(strcol(1) eq '{lab}' && strcol(4) eq 'sample')"
    else:
        lines += ["set xlabel 'SNR (dB)'", "set ylabel 'outage probability'", "set logscale y"]
        cond = "(strcol(1) eq '{lab}')"
    plots = []
    for lab in labels:
        c = cond.format(lab=lab.replace("'", ""))
        plots.append(f"{json.dumps(data)} skip 1 using ({c} ? ${xcol} : 1/0):{ycol} "
                     f"with lines title {json.dumps(lab)}")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def cmd_compare(cfg, out: FsPath) -> int:
    inputs = cfg["inputs"]
    if len(inputs) < 2:
        raise ConfigError("compare needs at least two input files")
    labels = cfg.get("labels") or [FsPath(p).stem for p in inputs]
    if len(labels) != len(inputs) or len(set(labels)) != len(labels):
        raise ConfigError("labels must be distinct and one per input")
    tables = [read_curve_file(p) for p in inputs]
    header = tables[0][0]
    if header not in (CURVE_HEADER, OUTAGE_HEADER) or any(h != header for h, _ in tables):
        raise ConfigError("inputs must all be (r, d) curves or all outage tables")
    rows = []
    for lab, (_, body) in zip(labels, tables):
        for row in body:
            if len(row) != len(header):
                raise ConfigError(f"malformed row in series {lab!r}: {row}")
            rows.append([lab] + row)
    _write_csv(out, ["series"] + header, rows)
    script = out.with_suffix(".gp")
    script.write_text(_gnuplot(out.name, header, labels, cfg.get("title", "comparison")),
                      encoding="utf-8")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="relay-dmt", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["analytic", "simulate", "compare"])
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=None)
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    out = FsPath(args.out)
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        if args.command == "compare":
            return cmd_compare(load_config(args.config, COMPARE_SCHEMA), out)
        cfg = load_config(args.config, SCENARIO_SCHEMA)
        if args.command == "analytic":
            return cmd_analytic(cfg, out)
        return cmd_simulate(cfg, out, args.seed)
    except (ConfigError, RelayDmtError, ValueError, OSError) as exc:
        print(f"relay-dmt: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
