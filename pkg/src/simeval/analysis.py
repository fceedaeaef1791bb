"""Replicated evaluation experiments, metric errors, rank inversions, and reports."""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import astuple, dataclass, fields
import json
import logging
import os
from pathlib import Path

import numpy as np

from . import evalexp, seeding
from .evalexp import METRICS, OBSERVED, RECOMMENDERS, TRUTH
from .models import generate_preferences, observe

_log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass(frozen=True)
class ErrorRecord:
    run_id: int
    preference_model: str
    observation_model: str
    recommender: str
    metric: str
    M_obs: float
    M_truth: float
    error: float


ERROR_COLUMNS = [f.name for f in fields(ErrorRecord)]


def metric_error(m_obs, m_truth):
    return m_obs - m_truth


@dataclass
class ReplicationResult:
    """Per-user metrics for one replication and observation model.

    ``metrics[recommender][kind][metric]`` is an array over ``users``.
    """

    run_id: int
    observation_model: str
    users: np.ndarray
    metrics: dict

    def aggregate(self, recommender, kind, metric):
        return float(np.mean(self.metrics[recommender][kind][metric]))


def run_replication(config, run_id):
    """Simulate and evaluate one replication for every configured observation model.

    Returns one :class:`ReplicationResult` per observation model, or an empty
    list when the replication is degenerate. Every observation model sees the
    same preference data and the same derived seeds.
    """
    seed = config.seed
    params = {**config.preference, **config.observation}
    pref = generate_preferences(
        config.preference_model, params, config.num_users, seeding.make_rng(seed, run_id, seeding.PREFERENCE)
    )
    if pref.num_users == 0:
        _log.warning("replication %d: no users with preferences; skipped", run_id)
        return []
    results = []
    for obs_model in config.observation_models:
        obs = observe(obs_model, pref, params, seeding.make_rng(seed, run_id, seeding.OBSERVATION))
        data = evalexp.split(obs, config.split_fraction, seeding.make_rng(seed, run_id, seeding.SPLIT))
        users = data.evaluated_users()
        if not users:
            _log.warning("replication %d (%s): no evaluable users; skipped", run_id, obs_model)
            return []
        rec_rng = seeding.make_rng(seed, run_id, seeding.RECOMMEND)
        lists = {
            "Oracle": evalexp.recommend_oracle(pref, data, config.k, rec_rng),
            "Popular": evalexp.recommend_popular(data, config.k),
            "Random": evalexp.recommend_random(data, pref.item_universe, config.k, rec_rng),
        }
        truths = {kind: evalexp.truth_sets(pref, data, kind) for kind in (OBSERVED, TRUTH)}
        metrics = {
            name: {kind: evalexp.evaluate_lists(lst, truths[kind], users, config.k) for kind in truths}
            for name, lst in lists.items()
        }
        results.append(ReplicationResult(run_id, obs_model, np.asarray(users), metrics))
    return results


def records_for(config, result: ReplicationResult):
    out = []
    for rec in RECOMMENDERS:
        for metric in METRICS:
            m_obs = result.aggregate(rec, OBSERVED, metric)
            m_truth = result.aggregate(rec, TRUTH, metric)
            out.append(
                ErrorRecord(
                    result.run_id,
                    config.preference_model,
                    result.observation_model,
                    rec,
                    metric,
                    m_obs,
                    m_truth,
                    metric_error(m_obs, m_truth),
                )
            )
    return out


def _replicate(args):
    config, run_id = args
    return run_replication(config, run_id)


def iter_replications(config, replications=None, workers=None):
    """Yield ``(run_id, [ReplicationResult, ...])`` in run order."""
    n = config.replications if replications is None else replications
    workers = workers if workers is not None else (config.workers or os.cpu_count() or 1)
    jobs = [(config, r) for r in range(n)]
    if workers <= 1:
        for job in jobs:
            yield job[1], _replicate(job)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from zip(range(n), pool.map(_replicate, jobs))


def run_experiment(config, replications=None, workers=None, per_user=None):
    """Run replicated experiments; returns ``(records, skipped_run_ids)``.

    Records are ordered by run, observation model, recommender, metric.
    ``per_user`` (a list) collects per-user metric rows if given.
    """
    records, skipped = [], []
    for run_id, results in iter_replications(config, replications, workers):
        if not results:
            skipped.append(run_id)
            continue
        for res in results:
            records.extend(records_for(config, res))
            if per_user is not None:
                per_user.extend(_per_user_rows(res))
    return records, skipped


def _per_user_rows(res):
    for rec in RECOMMENDERS:
        for metric in METRICS:
            for kind in (OBSERVED, TRUTH):
                for u, v in zip(res.users.tolist(), res.metrics[rec][kind][metric].tolist()):
                    yield (res.run_id, res.observation_model, u, rec, metric, kind, v)


def inversion_rate(records, ground_truth=OBSERVED, winner="Oracle", loser="Popular"):
    """Percent of runs, per (preference, observation, metric), where ``winner`` strictly beats ``loser``.

    Runs are compared on user-mean metric values measured against the
    observed (``M_obs``) or true (``M_truth``) ground truth.
    """
    attr = "M_obs" if ground_truth == OBSERVED else "M_truth"
    by_run = {}
    for r in records:
        key = (r.preference_model, r.observation_model, r.metric)
        by_run.setdefault(key, {}).setdefault(r.run_id, {})[r.recommender] = getattr(r, attr)
    summary = {}
    for key, runs in by_run.items():
        wins = ties = 0
        for run_id, vals in runs.items():
            if winner not in vals or loser not in vals:
                raise ValueError(f"run {run_id} lacks {winner} or {loser} records")
            if vals[winner] > vals[loser]:
                wins += 1
            elif vals[winner] == vals[loser]:
                ties += 1
        if ties:
            _log.info("%s: %d tied runs on %s counted as non-wins", key, ties, ground_truth)
        summary[key] = {"runs": len(runs), "wins": wins, "ties": ties, "percent": 100.0 * wins / len(runs)}
    return summary


def summarize_errors(records):
    groups = {}
    for r in records:
        groups.setdefault((r.preference_model, r.observation_model, r.recommender, r.metric), []).append(r.error)
    rows = []
    for key in sorted(groups):
        e = np.asarray(groups[key])
        q = np.quantile(e, [0.0, 0.25, 0.5, 0.75, 1.0])
        sd = float(np.std(e, ddof=1)) if len(e) > 1 else 0.0
        rows.append((*key, len(e), float(np.mean(e)), sd, *map(float, q)))
    return rows


SUMMARY_COLUMNS = [
    "preference_model",
    "observation_model",
    "recommender",
    "metric",
    "n",
    "mean",
    "sd",
    "min",
    "q1",
    "median",
    "q3",
    "max",
]
INVERSION_COLUMNS = ["condition", "preference_model", "observation_model", "ground_truth", "runs", *METRICS]


def _check_writable(out_dir):
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out_dir}: {e}") from e
    if not os.access(out_dir, os.W_OK | os.X_OK):
        raise OSError(f"output directory {out_dir} is not writable")
    return out_dir


def write_errors(records, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ERROR_COLUMNS)
        for r in records:
            w.writerow(astuple(r))


def read_errors(path):
    types = [int, str, str, str, str, float, float, float]
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd)
        if header != ERROR_COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        return [ErrorRecord(*(t(v) for t, v in zip(types, row))) for row in rd]


def inversion_rows(records, condition):
    rows = []
    for kind in (OBSERVED, TRUTH):
        summary = inversion_rate(records, kind)
        conds = sorted({(p, o) for p, o, _ in summary})
        for p, o in conds:
            runs = summary[(p, o, METRICS[0])]["runs"]
            pct = [summary[(p, o, m)]["percent"] for m in METRICS]
            rows.append((condition, p, o, kind, runs, *(f"{x:.0f}" for x in pct)))
    return rows


def emit_report(records, out_dir, condition="experiment", manifest=None, per_user=None):
    """Write errors.csv, error_summary.csv, inversions.csv and manifest.json."""
    if not records:
        raise ValueError("no error records to report")
    out_dir = _check_writable(out_dir)
    summary_rows = summarize_errors(records)
    inv_rows = inversion_rows(records, condition)
    write_errors(records, out_dir / "errors.csv")
    with open(out_dir / "error_summary.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(summary_rows)
    with open(out_dir / "inversions.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(INVERSION_COLUMNS)
        w.writerows(inv_rows)
    if per_user is not None:
        with open(out_dir / "per_user.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["run_id", "observation_model", "user", "recommender", "metric", "ground_truth_kind", "value"])
            w.writerows(per_user)
    doc = {"schema_version": MANIFEST_VERSION, "condition": condition, "records": len(records)}
    doc.update(manifest or {})
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    return out_dir
