"""Command-line interface: named experiments and parameter sweeps.

    mwgatesim run --preset fig3 --out results --fast
    mwgatesim run --config my.json
    mwgatesim sweep --config my.json --param schedule.carrier_target_hz \
        --values 30e3:80e3:6

Every invocation writes a CSV of result rows plus a JSON run record with
the resolved schedule, seeds and the configuration hash.  Reruns with the
same configuration and seed reproduce the CSV byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .analysis import calibrate_target, infidelity_stats
from .config import (
    SCHEMA_VERSION,
    ConfigError,
    PlanRow,
    build_preset,
    config_hash,
    load_config,
    merge_configs,
    resolved_echo,
    set_by_path,
)
from .controls import ScheduleError, validate_schedule
from .propagate import run_ensemble

SWEEP_COLUMNS = ("value", "mean_fidelity", "stderr", "log10_infidelity",
                 "n_realizations", "seed")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _run_one(raw: dict):
    """Execute one ensemble for a raw config; returns a FidelityReport."""
    cfg = load_config(raw)
    schedule = cfg.build_schedule()
    if schedule.phase_modulated:
        validate_schedule(schedule)
    target = calibrate_target(cfg.physical, schedule, cfg.integrator)
    result = run_ensemble(
        cfg.physical, schedule,
        n_realizations=cfg.ensemble.realizations,
        master_seed=cfg.ensemble.master_seed,
        n_jobs=cfg.ensemble.jobs,
        target=target,
        **cfg.trajectory_kwargs(),
    )
    return infidelity_stats(result.trajectories), cfg


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _write_record(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_experiment(raw: dict, plan: list[PlanRow] | None, out_dir: Path,
                   name: str) -> tuple[Path, Path]:
    """Run a single config or a preset plan; write CSV + JSON record."""
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    rows = []
    if plan is None:
        report, cfg = _run_one(raw)
        rows.append(("run", 0.0, report.mean_fidelity, report.stderr,
                     report.log10_infidelity, report.n_realizations,
                     cfg.ensemble.master_seed))
    else:
        for item in plan:
            merged = merge_configs(raw, item.overrides)
            report, cfg = _run_one(merged)
            rows.append((item.condition, item.value, report.mean_fidelity,
                         report.stderr, report.log10_infidelity,
                         report.n_realizations, cfg.ensemble.master_seed))

    csv_path = out_dir / f"{name}.csv"
    _write_csv(csv_path, ("condition",) + SWEEP_COLUMNS, rows)

    base_cfg = load_config(raw)
    record = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "experiment": name,
        "config": raw,
        "config_hash": config_hash(raw),
        "resolved": resolved_echo(base_cfg),
        "rows": len(rows),
        "csv": csv_path.name,
        "wall_time_s": time.time() - started,
    }
    record_path = out_dir / f"{name}.json"
    _write_record(record_path, record)
    return csv_path, record_path


def run_sweep(raw: dict, param: str, values, out_dir: Path,
              name: str = "sweep") -> tuple[Path, Path]:
    """One ensemble per value of a dotted config path; CSV in input order."""
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    rows = []
    for v in values:
        modified = set_by_path(raw, param, v)
        report, cfg = _run_one(modified)
        rows.append((v, report.mean_fidelity, report.stderr,
                     report.log10_infidelity, report.n_realizations,
                     cfg.ensemble.master_seed))
    csv_path = out_dir / f"{name}.csv"
    _write_csv(csv_path, SWEEP_COLUMNS, rows)
    record = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "experiment": name,
        "parameter": param,
        "values": list(values),
        "config": raw,
        "config_hash": config_hash(raw),
        "resolved": resolved_echo(load_config(raw)),
        "rows": len(rows),
        "csv": csv_path.name,
        "wall_time_s": time.time() - started,
    }
    record_path = out_dir / f"{name}.json"
    _write_record(record_path, record)
    return csv_path, record_path


def _parse_values(spec: str) -> list[float]:
    """Comma list "1,2,3" or range "lo:hi:count"."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError("range must be lo:hi:count")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ConfigError("range count must be >= 1")
        if n == 1:
            return [lo]
        step = (hi - lo) / (n - 1)
        return [lo + k * step for k in range(n)]
    return [float(v) for v in spec.split(",") if v.strip()]


def _load_raw(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")


def _apply_flags(raw: dict, args) -> dict:
    over = {}
    if args.seed is not None:
        over.setdefault("ensemble", {})["master_seed"] = args.seed
    if args.realizations is not None:
        over.setdefault("ensemble", {})["realizations"] = args.realizations
    if getattr(args, "full", False):
        over.setdefault("ensemble", {})["realizations"] = 100
    if getattr(args, "fast", False):
        over.setdefault("physical", {}).update({"n_cm": 10, "n_br": 3})
    if args.jobs is not None:
        over.setdefault("ensemble", {})["jobs"] = args.jobs
    return merge_configs(raw, over)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mwgatesim",
        description="Two-ion microwave entangling-gate simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run a named preset or a config file")
    runp.add_argument("--config", help="JSON configuration file")
    runp.add_argument("--preset", choices=("fig1a", "fig1b", "fig1c", "fig3"),
                      help="named experiment; --config entries override it")
    runp.add_argument("--out", default="results", help="output directory")
    runp.add_argument("--seed", type=int, help="master seed override")
    runp.add_argument("--realizations", type=int,
                      help="ensemble size override")
    runp.add_argument("--full", action="store_true",
                      help="production ensemble size (100 realizations)")
    runp.add_argument("--fast", action="store_true",
                      help="reduced mode truncations (10, 3); "
                           "documented accuracy loss at high occupations")
    runp.add_argument("--jobs", type=int, help="parallel trajectory workers")

    swp = sub.add_parser("sweep", help="sweep one config entry")
    swp.add_argument("--config", required=True)
    swp.add_argument("--param", required=True,
                     help="dotted path, e.g. schedule.carrier_target_hz")
    swp.add_argument("--values", required=True,
                     help="comma list '1e3,2e3' or range 'lo:hi:count'")
    swp.add_argument("--out", default="results")
    swp.add_argument("--seed", type=int)
    swp.add_argument("--realizations", type=int)
    swp.add_argument("--jobs", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            user_raw = _load_raw(args.config)
            if args.preset:
                base, plan = build_preset(args.preset,
                                          user_raw.pop("preset_options", None))
                raw = merge_configs(base, user_raw)
                name = args.preset
            else:
                if not args.config:
                    raise ConfigError("run needs --config and/or --preset")
                raw, plan, name = user_raw, None, "run"
            raw = _apply_flags(raw, args)
            raw.pop("preset_options", None)
            load_config(raw)  # validate before any work
            csv_path, rec_path = run_experiment(raw, plan, Path(args.out), name)
        else:
            raw = _apply_flags(_load_raw(args.config), args)
            raw.pop("preset_options", None)
            values = _parse_values(args.values)
            csv_path, rec_path = run_sweep(raw, args.param, values,
                                           Path(args.out))
        print(csv_path)
        print(rec_path)
        return 0
    except (ConfigError, ScheduleError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report runtime context
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
