"""Command-line front end.

    dataext synth  --config c.json --out DIR     dataset CSV + spec echo
    dataext sweep  --config c.json --out DIR     risk-surface CSVs + plan echo
    dataext detect --config c.json --out DIR     findings.json
    dataext delta  --config c.json --out DIR     delta.json
    dataext split  --config c.json --out DIR     split_model.json + before_after.csv
    dataext report --config c.json --out DIR     SVG plots

Flags override the matching config keys. Exit codes: 0 ok, 2 config error,
3 data error, 4 compute error; failures print a JSON object on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .core import Allocation, SeedSpec, subsample
from .dataio import CsvSchema, TfidfSpec, emit_plot, load_csv, load_text_csv, train_eval_split, write_csv
from .errors import ConfigError, DataError, DataExternalityError
from .externality import DEFAULT_Z, delta, detect
from .intervention import DEFAULT_MAX_ROUTES, build_split, evaluate_intervention
from .learners import TrainConfig
from .sweep import DEFAULT_EVAL_SIZE, DEFAULT_TRIALS, RiskSurface, SweepPlan, grid_axis, run_sweep
from .synthetic import PRESETS, AffineGroupSpec, gen_affine

THREADS_ENV = "DATAEXT_THREADS"
COMMON_KEYS = {"seed", "out", "threads"}
SOURCE_KEYS = {"source", "train", "metric", "eval_size", "eval_groups"}
COMMAND_KEYS = {
    "synth": {"preset", "spec", "allocation"},
    "sweep": SOURCE_KEYS | {"grid", "trials"},
    "detect": {"surface", "z_threshold"},
    "delta": {"surface", "reference", "eval_groups", "z_threshold"},
    "split": SOURCE_KEYS | {"surface", "reference", "z_threshold", "max_routes"},
    "report": {"surface", "axis", "title"},
}


class _Ctx:
    def __init__(self, cfg: dict, base: Path, out: Path, seed: int, threads: int):
        self.cfg, self.base, self.out, self.seed, self.threads = cfg, base, out, seed, threads

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def require(self, key):
        if key not in self.cfg:
            raise ConfigError(f"missing required config key {key!r}")
        return self.cfg[key]


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _alloc(value, what="allocation") -> Allocation:
    if not isinstance(value, dict):
        raise ConfigError(f"{what} must be an object mapping group to count")
    try:
        return Allocation(value)
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


# --------------------------------------------------------------------------
# config pieces


def _spec_from(cfg: dict) -> AffineGroupSpec:
    if ("preset" in cfg) == ("spec" in cfg):
        raise ConfigError("give exactly one of 'preset' or 'spec'")
    if "preset" in cfg:
        try:
            return PRESETS[cfg["preset"]]()
        except KeyError:
            raise ConfigError(f"unknown preset {cfg['preset']!r}; choose from {sorted(PRESETS)}") from None
    return AffineGroupSpec.from_dict(cfg["spec"])


def _train_config(ctx) -> TrainConfig:
    raw = ctx.cfg.get("train", {})
    if not isinstance(raw, dict):
        raise ConfigError("'train' must be an object")
    return TrainConfig.from_dict(raw)


def _grid(value) -> list[Allocation]:
    if isinstance(value, list):
        return [_alloc(a, "grid entry") for a in value]
    if isinstance(value, dict):
        unknown = set(value) - {"fixed", "varying", "values"}
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        try:
            return grid_axis(value.get("fixed", {}), value["varying"], value["values"])
        except KeyError as exc:
            raise ConfigError(f"grid needs key {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc
    raise ConfigError("'grid' must be a list of allocations or an axis object")


SOURCE_SUBKEYS = {"preset", "spec", "csv", "schema", "tfidf", "eval_fraction"}


def _source(ctx):
    """(synthetic spec or training pool, evaluation set or None)."""
    src = ctx.require("source")
    if not isinstance(src, dict):
        raise ConfigError("'source' must be an object")
    unknown = set(src) - SOURCE_SUBKEYS
    if unknown:
        raise ConfigError(f"unknown source keys: {sorted(unknown)}")
    if "csv" not in src:
        return _spec_from(src), None
    try:
        schema = CsvSchema(**src.get("schema", {}))
    except TypeError as exc:
        raise ConfigError(f"schema: {exc}") from exc
    path = ctx.path(src["csv"])
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    if schema.text is not None:
        tf = dict(src.get("tfidf", {}))
        if "stopwords" in tf and tf["stopwords"] is not None:
            tf["stopwords"] = frozenset(tf["stopwords"])
        try:
            tfidf = TfidfSpec(**tf)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"tfidf: {exc}") from exc
        data, _ = load_text_csv(path, schema, tfidf)
    else:
        data = load_csv(path, schema)
    frac = float(src.get("eval_fraction", 0.2))
    try:
        pool, evalset = train_eval_split(data, frac, SeedSpec(ctx.seed, "eval-split"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return pool, evalset


def _load_surface(ctx) -> RiskSurface:
    path = ctx.path(ctx.require("surface"))
    if not path.exists():
        raise DataError(f"surface file not found: {path}")
    plan_path = path.parent / "plan.json"
    plan = json.loads(plan_path.read_text()) if plan_path.exists() else {}
    return RiskSurface.from_detail_csv(path, plan.get("metric", "mse"), plan)


# --------------------------------------------------------------------------
# commands


def cmd_synth(ctx):
    spec = _spec_from({k: ctx.cfg[k] for k in ("preset", "spec") if k in ctx.cfg})
    alloc = _alloc(ctx.require("allocation"))
    data = gen_affine(spec, alloc, SeedSpec(ctx.seed, "synth"))
    write_csv(data, ctx.out / "dataset.csv")
    _dump_json({"spec": spec.to_dict(), "allocation": alloc.counts, "seed": ctx.seed}, ctx.out / "spec.json")


def _plan(ctx, grid) -> SweepPlan:
    source, evalset = _source(ctx)
    try:
        eval_groups = ctx.cfg.get("eval_groups")
        return SweepPlan(
            source=source,
            grid=tuple(grid),
            train_config=_train_config(ctx),
            evalset=evalset,
            eval_groups=tuple(eval_groups) if eval_groups else None,
            trials=int(ctx.cfg.get("trials", DEFAULT_TRIALS)),
            metric=ctx.cfg.get("metric", "mse"),
            seed=ctx.seed,
            eval_size=int(ctx.cfg.get("eval_size", DEFAULT_EVAL_SIZE)),
            check_leakage=False,
        )
    except ValueError as exc:
        if isinstance(exc, DataExternalityError):
            raise
        raise ConfigError(str(exc)) from exc


def cmd_sweep(ctx):
    plan = _plan(ctx, _grid(ctx.require("grid")))
    surface = run_sweep(plan, threads=ctx.threads)
    surface.to_detail_csv(ctx.out / "surface_detail.csv")
    surface.to_summary_csv(ctx.out / "surface_summary.csv")
    _dump_json(surface.plan, ctx.out / "plan.json")


def cmd_detect(ctx):
    surface = _load_surface(ctx)
    findings = detect(surface, float(ctx.cfg.get("z_threshold", DEFAULT_Z)))
    _dump_json({"findings": [f.to_dict() for f in findings]}, ctx.out / "findings.json")


def _delta_reports(ctx, surface):
    reference = _alloc(ctx.require("reference"), "reference")
    groups = ctx.cfg.get("eval_groups") or list(surface.eval_groups)
    z = float(ctx.cfg.get("z_threshold", DEFAULT_Z))
    return reference, [delta(surface, g, reference, z) for g in groups]


def cmd_delta(ctx):
    surface = _load_surface(ctx)
    _, reports = _delta_reports(ctx, surface)
    _dump_json({"deltas": [r.to_dict() for r in reports]}, ctx.out / "delta.json")


def cmd_split(ctx):
    surface = _load_surface(ctx)
    reference, reports = _delta_reports(ctx, surface)
    plan = _plan(ctx, [reference])
    stream = SeedSpec(ctx.seed, "split-pool")
    if plan.synthetic:
        pool = gen_affine(plan.source, reference, stream)
    else:
        pool = subsample(plan.source, reference, stream)
    evalset = plan.resolved_evalset()
    split = build_split(
        pool,
        surface,
        reports,
        plan.train_config,
        SeedSpec(ctx.seed, "split"),
        int(ctx.cfg.get("max_routes", DEFAULT_MAX_ROUTES)),
    )
    doc = split.to_dict()
    doc["deltas"] = [r.to_dict() for r in reports]
    _dump_json(doc, ctx.out / "split_model.json")
    table = evaluate_intervention(split, split.fallback, evalset, plan.metric, plan.resolved_eval_groups(evalset))
    with open(ctx.out / "before_after.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eval_group", "risk_before", "risk_after", "improvement", "routed"])
        for g, (before, after) in table.items():
            w.writerow([g, repr(before), repr(after), repr(before - after), str(g in split.routes).lower()])


def cmd_report(ctx):
    surface = _load_surface(ctx)
    axes = ctx.require("axis")
    for axis in [axes] if isinstance(axes, str) else axes:
        emit_plot(surface, axis, ctx.out / f"plot_{axis}.svg", ctx.cfg.get("title"))


COMMANDS = {
    "synth": cmd_synth,
    "sweep": cmd_sweep,
    "detect": cmd_detect,
    "delta": cmd_delta,
    "split": cmd_split,
    "report": cmd_report,
}


def _parser():
    p = argparse.ArgumentParser(prog="dataext", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides config 'out')")
    p.add_argument("--seed", type=int, help="master seed (overrides config 'seed')")
    p.add_argument("--threads", type=int, help=f"worker threads (default: config, then ${THREADS_ENV}, then 1)")
    return p


def _context(args) -> _Ctx:
    cfg_path = Path(args.config)
    try:
        cfg = json.loads(cfg_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {cfg_path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - COMMAND_KEYS[args.command] - COMMON_KEYS
    if unknown:
        raise ConfigError(f"unknown keys for {args.command!r}: {sorted(unknown)}")
    base = cfg_path.resolve().parent
    out = args.out or cfg.get("out")
    if not out:
        raise ConfigError("no output directory: pass --out or set 'out'")
    out = Path(out) if args.out else (base / out if not Path(out).is_absolute() else Path(out))
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be a non-negative 64-bit integer")
    threads = args.threads or cfg.get("threads") or int(os.environ.get(THREADS_ENV, "1") or 1)
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    out.mkdir(parents=True, exist_ok=True)
    return _Ctx(cfg, base, out, seed, threads)


def _fail(exc, code) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        ctx = _context(args)
        COMMANDS[args.command](ctx)
    except DataExternalityError as exc:
        return _fail(exc, exc.exit_code)
    except (OSError, UnicodeDecodeError) as exc:
        return _fail(exc, DataError.exit_code)
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail(exc, 4)
    except (ValueError, TypeError, KeyError) as exc:
        return _fail(exc, ConfigError.exit_code)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
