"""Command-line front end.

Subcommands: ``reduce``, ``synth``, ``compose``, ``evaluate``, ``plan``.
Exit codes: 0 success (secure / feasible), 2 loopholes found or no
feasible plan, 1 input error. Outputs are staged in temporary files and
renamed into place only after every output of a command has been
produced, so a failing run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .components import load_catalog, read_json, synthesize
from .planner import PlanConstraints, load_countermeasures, search_min_stack, verify_plan
from .scheme import composite_transmittance, load_scheme
from .security import ProbeBudget, SecurityError, SecurityThresholds, evaluate
from .spectrum import (
    WavelengthGrid,
    default_grid,
    fmt,
    read_raw_scan_csv,
    read_table,
    reduce_raw_scan,
    spectrum_to_csv,
)

# the module error types all derive from ValueError
INPUT_ERRORS = (ValueError, OSError)
EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2


class InputError(Exception):
    pass


def _round(obj):
    """Round floats to 6 significant digits for stable JSON output."""
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.generic):
        return _round(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def write_outputs(outputs: dict[Path, str]) -> None:
    """Write all files atomically: stage every file, then rename each."""
    staged = []
    try:
        for path, text in outputs.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


# --- config -------------------------------------------------------------------


def _resolve(args) -> dict:
    """Merge ``--config`` file values with explicit flags (flags win)."""
    cfg: dict = {}
    if getattr(args, "config", None):
        cpath = Path(args.config)
        obj = read_json(cpath)
        if not isinstance(obj, dict):
            raise InputError(f"{cpath}: run config must be a JSON object")
        for key, val in obj.items():
            if key in ("scheme", "components", "budget", "thresholds", "countermeasures", "out", "verify"):
                if isinstance(val, list):
                    cfg[key] = [str(cpath.parent / v) for v in val]
                else:
                    cfg[key] = str(cpath.parent / val)
            elif key in ("grid", "chi_max", "ref_db", "fixed_1550", "strategy", "lambda_op", "op_loss_budget"):
                cfg[key] = val
            else:
                raise InputError(f"{cpath}: unknown run-config key {key!r}")
    for key, val in vars(args).items():
        if val is not None and val is not False and key not in ("func", "config"):
            cfg[key] = val
    return cfg


def _grid(cfg) -> WavelengthGrid:
    return WavelengthGrid.parse(cfg["grid"]) if cfg.get("grid") else default_grid()


def _require(cfg, key, flag):
    if not cfg.get(key):
        raise InputError(f"missing {flag}")
    return cfg[key]


def _load_scheme(cfg, grid):
    catalog = {}
    paths = cfg.get("components") or []
    for path in [paths] if isinstance(paths, str) else paths:
        catalog.update(load_catalog(path, grid))
    ref_db = cfg.get("ref_db")
    return load_scheme(_require(cfg, "scheme", "--scheme"), catalog, grid, ref_db)


def _budget(cfg) -> ProbeBudget:
    obj = {}
    if cfg.get("budget"):
        obj = read_json(cfg["budget"])
        if not isinstance(obj, dict):
            raise InputError(f"{cfg['budget']}: budget must be a JSON object")
    if cfg.get("fixed_1550"):
        obj = {**obj, "photon_energy_mode": "fixed_1550"}
    try:
        return ProbeBudget.from_json(obj)
    except (TypeError, SecurityError) as exc:
        raise InputError(f"{cfg.get('budget', 'budget')}: {exc}") from None


def _thresholds(cfg) -> SecurityThresholds:
    obj = {}
    if cfg.get("thresholds"):
        obj = read_json(cfg["thresholds"])
        if not isinstance(obj, dict):
            raise InputError(f"{cfg['thresholds']}: thresholds must be a JSON object")
    if cfg.get("chi_max") is not None:
        obj = {**obj, "chi_max": cfg["chi_max"]}
    try:
        return SecurityThresholds.from_json(obj)
    except (TypeError, SecurityError) as exc:
        raise InputError(f"{cfg.get('thresholds', 'thresholds')}: {exc}") from None


def _out(cfg) -> Path:
    return Path(cfg.get("out") or ".")


def _parse_param(text: str):
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise InputError(f"--param must be key=value, got {text!r}")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


# --- commands -----------------------------------------------------------------


def cmd_reduce(args) -> int:
    cfg = _resolve(args)
    t_f = None
    raw_path = Path(cfg["raw"])
    if cfg.get("filter"):
        cols = read_table(Path(cfg["filter"]), ("wavelength_nm", "t_f"))
        wl = np.array(read_table(raw_path, ("wavelength_nm",), ("i_ref", "i_mes", "t_f"))["wavelength_nm"])
        if wl[0] < cols["wavelength_nm"][0] or wl[-1] > cols["wavelength_nm"][-1]:
            raise InputError(f"{cfg['filter']}: filter spectrum does not cover the raw scan")
        t_f = np.interp(wl, cols["wavelength_nm"], cols["t_f"])
    elif cfg.get("filter_tf") is not None:
        t_f = float(cfg["filter_tf"])
    raw = read_raw_scan_csv(raw_path, t_f)
    spectrum = reduce_raw_scan(raw)
    name = cfg.get("output") or f"{raw_path.stem}_reduced.csv"
    write_outputs({_out(cfg) / name: spectrum_to_csv(spectrum)})
    if not spectrum.is_passive():
        print(f"warning: reduced spectrum has positive dB values (max {spectrum.values_db.max():.6g} dB)", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _resolve(args)
    grid = _grid(cfg)
    params = dict(_parse_param(p) for p in cfg.get("param") or [])
    cid = cfg.get("id") or cfg["model"]
    comp = synthesize(cfg["model"], params, grid, cid)
    out = _out(cfg)
    manifest = {
        "id": comp.id,
        "kind": comp.kind,
        "legs": {"forward": f"{cid}_forward.csv", "backward": f"{cid}_backward.csv"},
        "provenance": comp.provenance.to_json(),
    }
    note = f"synthetic {comp.provenance.model} {json.dumps(_round(dict(comp.provenance.params)), sort_keys=True)}"
    write_outputs({
        out / f"{cid}.json": dumps(manifest),
        out / f"{cid}_forward.csv": spectrum_to_csv(comp.forward, note + ", forward"),
        out / f"{cid}_backward.csv": spectrum_to_csv(comp.backward, note + ", backward"),
    })
    return EXIT_OK


def cmd_compose(args) -> int:
    cfg = _resolve(args)
    grid = _grid(cfg)
    scheme = _load_scheme(cfg, grid)
    comp = composite_transmittance(scheme, grid)
    write_outputs({_out(cfg) / f"{scheme.name}_composite.csv": spectrum_to_csv(comp, scheme.path.describe())})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _resolve(args)
    grid = _grid(cfg)
    scheme = _load_scheme(cfg, grid)
    budget, thresholds = _budget(cfg), _thresholds(cfg)
    curve = evaluate(composite_transmittance(scheme, grid), budget, thresholds)
    warnings = list(scheme.path.warnings)
    if budget.exceeds_fiber_fuse_cap:
        warnings.append(f"input power {budget.input_power_w:g} W exceeds the ~10 W fibre-fuse cap")
    report = {"scheme": scheme.name, "path": scheme.path.describe(), **curve.report(), "warnings": warnings}
    out = _out(cfg)
    write_outputs({
        out / f"{scheme.name}_report.json": dumps(report),
        out / f"{scheme.name}_curve.csv": curve.to_csv(),
    })
    worst = curve.worst_point()
    print(
        f"{scheme.name}: worst chi {worst['chi']:.3g} at {worst['wavelength_nm']:g} nm "
        f"(T {worst['t_db']:.4g} dB, mu_p {worst['mu_p']:.3g}); "
        f"{len(curve.loopholes)} loophole interval(s)"
    )
    return EXIT_OK if curve.secure else EXIT_FLAGGED


def cmd_plan(args) -> int:
    cfg = _resolve(args)
    grid = _grid(cfg)
    scheme = _load_scheme(cfg, grid)
    budget = _budget(cfg)
    constraints = PlanConstraints(
        chi_max=cfg.get("chi_max", 1e-2),
        lambda_op=cfg.get("lambda_op", 1550.0),
        op_loss_budget_db=cfg.get("op_loss_budget", 6.0),
    )
    entries = load_countermeasures(_require(cfg, "countermeasures", "--countermeasures"), grid)
    out = _out(cfg)
    if cfg.get("verify"):
        obj = read_json(cfg["verify"])
        picks = obj.get("picks") if isinstance(obj, dict) else None
        if not isinstance(picks, dict) or not all(isinstance(v, int) and v >= 0 for v in picks.values()):
            raise InputError(f"{cfg['verify']}: needs a 'picks' object of non-negative integer counts")
        report = verify_plan(picks, scheme, entries, budget, constraints, grid)
        write_outputs({out / f"{scheme.name}_verify.json": dumps({"scheme": scheme.name, **report})})
        print(f"{scheme.name}: plan {'passes' if report['pass'] else 'fails'} "
              f"(worst chi {report['chi']['worst_chi']:.3g} at {report['chi']['worst_wavelength_nm']:g} nm)")
        return EXIT_OK if report["pass"] else EXIT_FLAGGED
    plan = search_min_stack(entries, scheme, budget, constraints, grid, cfg.get("strategy", "auto"))
    report = verify_plan(plan.picks, scheme, entries, budget, constraints, grid)
    payload = {"scheme": scheme.name, "plan": plan.to_json(), "verification": report}
    write_outputs({out / f"{scheme.name}_plan.json": dumps(payload)})
    if plan.feasible:
        print(f"{scheme.name}: {plan.total} pick(s) {dict(sorted(plan.picks.items()))} ({plan.strategy})")
        return EXIT_OK
    print(f"{scheme.name}: no feasible plan; best worst-case chi {plan.achieved_worst_chi:.3g} "
          f"with {dict(sorted(plan.picks.items()))} ({plan.strategy})")
    return EXIT_FLAGGED


# --- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are input errors; exit 2 is reserved for "loopholes found"
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--grid", help="analysis grid lo:hi[:step] in nm (default 1500:2100:1)")
    common.add_argument("--out", help="output directory (default: current directory)")
    common.add_argument("--chi-max", type=float, help="loophole tolerance on chi (default 0.01)")
    common.add_argument("--ref-db", type=float, help="override flat reflection values (dB)")
    common.add_argument("--fixed-1550", action="store_true", help="use the 1550 nm photon energy at every wavelength")

    p = _Parser(prog="thaguard", description="Trojan-horse leakage analysis for QKD optical modules.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reduce", parents=[common], help="convert a raw intensity scan to a transmittance spectrum")
    r.add_argument("raw", help="raw-scan CSV (wavelength_nm,i_ref,i_mes[,t_f])")
    g = r.add_mutually_exclusive_group()
    g.add_argument("--filter", help="filter transmission CSV (wavelength_nm,t_f); replaces the t_f column")
    g.add_argument("--filter-tf", type=float, help="flat linear filter transmission; replaces the t_f column")
    r.add_argument("-o", "--output", help="output file name inside --out")
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic component (manifest + spectra)")
    s.add_argument("model", help="attenuator | isolator | wdm | bend-filter")
    s.add_argument("--id", help="component id (default: model name)")
    s.add_argument("--param", action="append", metavar="KEY=VALUE", help="model parameter; VALUE is parsed as JSON")
    s.set_defaults(func=cmd_synth)

    def scheme_args(sp):
        sp.add_argument("--config", help="run-config JSON (paths relative to it)")
        sp.add_argument("--scheme", help="scheme JSON")
        sp.add_argument("--components", action="append", help="component catalog JSON (repeatable)")

    c = sub.add_parser("compose", parents=[common], help="write the composite transmittance of a scheme")
    scheme_args(c)
    c.set_defaults(func=cmd_compose)

    e = sub.add_parser("evaluate", parents=[common], help="evaluate chi over the band; exit 2 on loopholes")
    scheme_args(e)
    e.add_argument("--budget", help="probe budget JSON")
    e.add_argument("--thresholds", help="security thresholds JSON")
    e.set_defaults(func=cmd_evaluate)

    pl = sub.add_parser("plan", parents=[common], help="search a minimal countermeasure stack; exit 2 if infeasible")
    scheme_args(pl)
    pl.add_argument("--budget", help="probe budget JSON")
    pl.add_argument("--countermeasures", help="countermeasure catalog JSON")
    pl.add_argument("--strategy", choices=("auto", "exhaustive", "greedy"))
    pl.add_argument("--lambda-op", type=float, help="operating wavelength in nm (default 1550)")
    pl.add_argument("--op-loss-budget", type=float, help="allowed forward loss at the operating wavelength (dB, default 6)")
    pl.add_argument("--verify", help="plan JSON with 'picks' to verify instead of searching")
    pl.set_defaults(func=cmd_plan)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
