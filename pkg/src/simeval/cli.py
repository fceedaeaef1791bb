"""Command-line entry point: ``simeval {stats,calibrate,evaluate,report}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

import argparse
import json
import logging
import os
from pathlib import Path
import sys

from . import __version__, seeding
from .analysis import emit_report, read_errors, run_experiment
from .calibrate import best_divergences, calibrate_combined, calibrate_single, BestDivergences
from .config import ConfigError, ExperimentConfig, load_config
from .ingest import DataFormatError, load_dataset
from .stats import STAT_NAMES, CharacteristicStats, characteristic_stats

_log = logging.getLogger("simeval")


class UsageError(Exception):
    pass


def _config(args):
    if args.config is None:
        cfg = ExperimentConfig().validate()
    else:
        if not Path(args.config).exists():
            raise UsageError(f"config file not found: {args.config}")
        cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    return cfg


def _write_json(path, doc):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_stats(args):
    if not Path(args.dataset).exists():
        raise UsageError(f"dataset not found: {args.dataset}")
    kw = {}
    if args.format == "delimited":
        kw = {
            "delimiter": args.delimiter,
            "user_col": int(args.user_col) if args.user_col.isdigit() else args.user_col,
            "item_col": int(args.item_col) if args.item_col.isdigit() else args.item_col,
            "header": not args.no_header,
        }
    data = load_dataset(args.dataset, args.format, **kw)
    seed = 0 if args.seed is None else args.seed
    stats = characteristic_stats(
        data,
        num_pairs=args.num_pairs,
        min_ratings=args.min_ratings,
        bins=args.bins,
        rng=seeding.make_rng(seed, 0, seeding.STATS),
    )
    out = Path(args.output) if args.output else Path(args.out_dir or ".") / f"{Path(args.dataset).stem}-stats.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "dataset": data.provenance,
        "users": data.users,
        "items": data.items,
        "pairs": data.pairs,
        "seed": seed,
        "num_pairs": args.num_pairs,
        "min_ratings": args.min_ratings,
        "bins": args.bins,
    }
    stats.save(out, meta)
    print(f"{data.users} users, {data.items} items, {data.pairs} pairs -> {out}")


def cmd_calibrate(args):
    cfg = _config(args)
    cal = cfg.calibration
    target_path = args.target or cal.target
    if not target_path:
        raise UsageError("no calibration target given (--target or calibration.target)")
    if not Path(target_path).exists():
        raise UsageError(f"target stats file not found: {target_path}")
    try:
        target = CharacteristicStats.load(target_path)
    except (ValueError, KeyError) as e:
        raise UsageError(f"invalid target stats file {target_path}: {e}") from e
    out = Path(cfg.out_dir) / "calibration"
    out.mkdir(parents=True, exist_ok=True)
    common = {
        "target": target,
        "sim_users": cal.sim_users,
        "replications": cal.replications,
        "budget": cal.budget,
        "init_points": cal.init_points,
        "stats_options": cal.stats_options(),
        "max_items": cal.max_items,
    }
    meta = {"config_hash": cfg.config_hash(), "seed": cfg.seed, "target": str(target_path)}
    stage1_path = out / "stage1.json"
    if args.resume and stage1_path.exists():
        with open(stage1_path) as f:
            doc = json.load(f)
        bests = BestDivergences(doc["best_divergences"])
        _log.info("reusing stage-one bests from %s", stage1_path)
    else:
        stage1 = {}
        for mi, model in enumerate(cal.models):
            pref_model = model.split("-")[0]
            stage1[model] = {}
            for si, stat in enumerate(STAT_NAMES):
                _log.info("stage 1: %s / %s", model, stat)
                stage1[model][stat] = calibrate_single(
                    model,
                    stat,
                    space=cal.space(pref_model),
                    fixed=cal.fixed(pref_model),
                    seed=int(seeding.derive_seed(cfg.seed, seeding.CALIBRATE, mi, si).generate_state(1)[0]),
                    **common,
                )
        bests = best_divergences(stage1)
        _write_json(
            stage1_path,
            {
                **meta,
                "best_divergences": bests.values,
                "results": {m: {s: r.to_dict() for s, r in per.items()} for m, per in stage1.items()},
            },
        )
    final = {}
    for mi, model in enumerate(cal.models):
        pref_model = model.split("-")[0]
        _log.info("stage 2: %s", model)
        res = calibrate_combined(
            model,
            bests,
            space=cal.space(pref_model),
            fixed=cal.fixed(pref_model),
            seed=int(seeding.derive_seed(cfg.seed, seeding.CALIBRATE, mi, len(STAT_NAMES)).generate_state(1)[0]),
            **common,
        )
        _write_json(out / f"stage2_{model}.json", {**meta, "best_divergences": bests.values, **res.to_dict()})
        best_kl = next(t["kl"] for t in res.trace if t["loss"] == res.best_loss)
        final[model] = {"params": {**cal.fixed(pref_model), **res.best_params}, "loss": res.best_loss, "kl": best_kl}
        print(f"{model}: average relative loss {res.best_loss:.2f}%")
    _write_json(out / "summary.json", {**meta, "best_divergences": bests.values, "models": final})


def cmd_evaluate(args):
    cfg = _config(args)
    cfg.validate_experiment()
    per_user = [] if cfg.per_user else None
    records, skipped = run_experiment(cfg, per_user=per_user)
    if not records:
        raise RuntimeError("every replication was degenerate; nothing to report")
    manifest = {
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "master_seed": cfg.seed,
        "replications_requested": cfg.replications,
        "replications_effective": cfg.replications - len(skipped),
        "skipped_runs": skipped,
        "k": cfg.k,
        "split_fraction": cfg.split_fraction,
        "notes": {
            "inversions": "winner decided per run on user-mean metric values; ties are non-wins",
            "truncation": f"all metrics truncated at k={cfg.k}",
            "truth_ground_truth": "relevant items minus the user's training items",
            "version": __version__,
        },
    }
    out = emit_report(records, cfg.out_dir, cfg.name, manifest, per_user)
    print(f"{len(records)} records from {cfg.replications - len(skipped)} replications -> {out}")


def cmd_report(args):
    src = Path(args.source)
    errors = src / "errors.csv" if src.is_dir() else src
    if not errors.exists():
        raise UsageError(f"errors file not found: {errors}")
    records = read_errors(errors)
    manifest_path = errors.parent / "manifest.json"
    manifest = {}
    if manifest_path.exists():
        with open(manifest_path) as f:
            manifest = json.load(f)
    out_dir = Path(args.out_dir) if args.out_dir else errors.parent
    condition = manifest.pop("condition", "experiment")
    for key in ("schema_version", "records"):
        manifest.pop(key, None)
    emit_report(records, out_dir, condition, manifest)
    print(f"report for {len(records)} records -> {out_dir}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (TOML)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--workers", type=int, help="worker processes (default: available CPUs)")
    common.add_argument("--out-dir", help="output directory (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="simeval", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("stats", parents=[common], help="compute characteristic statistics of a dataset")
    s.add_argument("dataset")
    s.add_argument("--format", choices=["movielens", "delimited"], default="movielens")
    s.add_argument("--delimiter", default=",")
    s.add_argument("--user-col", default="0")
    s.add_argument("--item-col", default="1")
    s.add_argument("--no-header", action="store_true")
    s.add_argument("--num-pairs", type=int, default=1_000_000)
    s.add_argument("--min-ratings", type=int, default=5)
    s.add_argument("--bins", type=int, default=100)
    s.add_argument("-o", "--output", help="output JSON path")
    s.set_defaults(func=cmd_stats)

    c = sub.add_parser("calibrate", parents=[common], help="two-stage parameter calibration")
    c.add_argument("--target", help="target stats JSON (overrides config)")
    c.add_argument("--resume", action="store_true", help="reuse persisted stage-one bests")
    c.set_defaults(func=cmd_calibrate)

    e = sub.add_parser("evaluate", parents=[common], help="run replicated evaluation experiments")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", parents=[common], help="rebuild summaries from errors.csv")
    r.add_argument("source", help="errors.csv or a directory containing it")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"simeval: error: {e}", file=sys.stderr)
        return 2
    except (DataFormatError, OSError, RuntimeError, ValueError) as e:
        print(f"simeval: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
