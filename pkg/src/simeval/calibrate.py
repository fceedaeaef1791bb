"""Fit simulator parameters to a reference dataset's characteristic statistics.

Stage one minimizes the K-L divergence of each statistic on its own and keeps
the best value reached per statistic. Stage two minimizes the mean relative
loss against those bests.
"""

from dataclasses import dataclass, field
import logging
import math
import warnings

import numpy as np
from scipy.optimize import minimize as _scipy_minimize
from scipy.stats import norm, qmc
from sklearn.exceptions import ConvergenceWarning
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import ConstantKernel, Matern, WhiteKernel

from . import seeding
from .models import generate_preferences, observe, split_model
from .prefgen import DegenerateSimulation
from .seeding import as_rng
from .stats import STAT_NAMES, InsufficientData, characteristic_stats, stats_divergences

_log = logging.getLogger(__name__)

#: K-L (nats) reported for simulations that produce no usable data.
PENALTY_KL = 50.0


@dataclass(frozen=True)
class Dim:
    name: str
    low: float
    high: float
    kind: str = "continuous"


@dataclass(frozen=True)
class ParamSpace:
    dims: tuple

    def __post_init__(self):
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        for d in self.dims:
            if not (math.isfinite(d.low) and math.isfinite(d.high)):
                raise ValueError(f"bounds for {d.name} must be finite")
            if not d.low < d.high:
                raise ValueError(f"lower bound must be below upper bound for {d.name}")
            if d.kind not in ("continuous", "integer"):
                raise ValueError(f"unknown kind {d.kind!r} for {d.name}")

    @classmethod
    def from_bounds(cls, bounds, integer=()):
        return cls(
            tuple(
                Dim(name, float(lo), float(hi), "integer" if name in integer else "continuous")
                for name, (lo, hi) in bounds.items()
            )
        )

    @property
    def names(self):
        return [d.name for d in self.dims]

    def decode(self, u):
        """Map a point in the unit cube to named parameter values."""
        out = {}
        for d, x in zip(self.dims, np.clip(u, 0.0, 1.0)):
            v = d.low + float(x) * (d.high - d.low)
            out[d.name] = int(round(v)) if d.kind == "integer" else v
        return out


@dataclass(frozen=True)
class CalibrationResult:
    best_params: dict
    best_loss: float
    trace: list = field(repr=False)

    def to_dict(self):
        return {"best_params": self.best_params, "best_loss": self.best_loss, "trace": self.trace}


@dataclass(frozen=True)
class BestDivergences:
    values: dict

    def __post_init__(self):
        missing = set(STAT_NAMES) - set(self.values)
        if missing:
            raise ValueError(f"missing best divergences for {sorted(missing)}")
        for k in STAT_NAMES:
            if not self.values[k] > 0:
                raise ValueError(f"best divergence for {k} must be positive, got {self.values[k]}")

    def __getitem__(self, k):
        return self.values[k]


def relative_loss(kl, best_kl):
    """Percent by which ``kl`` exceeds the best achievable ``best_kl``."""
    if not best_kl > 0:
        raise ValueError(f"best K-L must be positive, got {best_kl}")
    return (kl - best_kl) / best_kl * 100.0


def average_relative_loss(kls, bests):
    return float(np.mean([relative_loss(kls[k], bests[k]) for k in STAT_NAMES]))


def evaluate_config(
    params,
    model,
    target,
    sim_users,
    replications=1,
    seed=0,
    stats_options=None,
    max_items=None,
):
    """Mean per-statistic K-L between ``target`` and simulated observations.

    Each replication draws preferences and observations from streams derived
    from ``seed``. Degenerate simulations score :data:`PENALTY_KL`.
    """
    if replications < 1:
        raise ValueError("replications must be at least 1")
    pref_model, obs_model = split_model(model)
    stats_options = stats_options or {}
    totals = dict.fromkeys(STAT_NAMES, 0.0)
    for r in range(replications):
        try:
            pref = generate_preferences(
                pref_model, params, sim_users, seeding.make_rng(seed, r, seeding.PREFERENCE), max_items
            )
            if pref.num_users == 0:
                raise DegenerateSimulation("all simulated users are empty")
            obs = observe(obs_model, pref, params, seeding.make_rng(seed, r, seeding.OBSERVATION))
            sim = characteristic_stats(obs, rng=seeding.make_rng(seed, r, seeding.STATS), **stats_options)
        except (DegenerateSimulation, InsufficientData, OverflowError) as e:
            _log.info("degenerate simulation for %s %s: %s", model, params, e)
            for k in STAT_NAMES:
                totals[k] += PENALTY_KL
            continue
        for k, v in stats_divergences(target, sim).items():
            totals[k] += v
    return {k: v / replications for k, v in totals.items()}


def _ei(mu, sd, best):
    sd = np.maximum(sd, 1e-12)
    z = (best - mu) / sd
    return (best - mu) * norm.cdf(z) + sd * norm.pdf(z)


def _log_transform(y):
    y = np.asarray(y, dtype=np.float64)
    span = y.max() - y.min()
    return np.log(y - y.min() + 1e-3 * span + 1e-12)


def minimize(objective, space: ParamSpace, budget=60, init_points=10, rng=None, method="gp", n_candidates=2000):
    """Sequential model-based minimization of a black-box ``objective``.

    ``init_points`` Latin-hypercube points seed a Gaussian-process surrogate
    (Matern 5/2) whose expected improvement picks each remaining point.
    ``method="random"`` spends the whole budget on uniform random points.
    The objective receives a dict of named parameter values.
    """
    if not budget >= init_points >= 2:
        raise ValueError(f"need budget >= init_points >= 2, got budget={budget}, init_points={init_points}")
    if method not in ("gp", "random"):
        raise ValueError(f"unknown method {method!r}")
    rng = as_rng(rng)
    dim = len(space.dims)
    X, y, trace = [], [], []

    def run(u):
        params = space.decode(u)
        value = objective(params)
        info = None
        if isinstance(value, tuple):
            value, info = value
        value = float(value)
        if not math.isfinite(value):
            _log.warning("non-finite objective at %s; using penalty", params)
            value = PENALTY_KL
        X.append(np.clip(u, 0.0, 1.0))
        y.append(value)
        entry = {"params": params, "loss": value}
        if info is not None:
            entry["kl"] = info
        trace.append(entry)

    if method == "random":
        for u in rng.random((budget, dim)):
            run(u)
    else:
        lhs = qmc.LatinHypercube(d=dim, seed=rng)
        for u in lhs.random(init_points):
            run(u)
        kernel = ConstantKernel(1.0, (1e-3, 1e3)) * Matern(
            length_scale=np.full(dim, 0.3), length_scale_bounds=(1e-3, 1e2), nu=2.5
        ) + WhiteKernel(1e-4, (1e-8, 1e-1))
        while len(y) < budget:
            ys = np.asarray(y)
            if np.ptp(ys) == 0:
                run(rng.random(dim))
                continue
            gp = GaussianProcessRegressor(kernel=kernel, normalize_y=True, n_restarts_optimizer=2, random_state=int(rng.integers(2**31)))
            yt = _log_transform(ys)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                gp.fit(np.asarray(X), yt)
            best = yt.min()
            cand = rng.random((n_candidates, dim))
            mu, sd = gp.predict(cand, return_std=True)
            ei = _ei(mu, sd, best)
            starts = cand[np.argsort(-ei)[:5]]
            top_u, top_ei = starts[0], ei.max()

            def neg_ei(u):
                m, s = gp.predict(u.reshape(1, -1), return_std=True)
                return -_ei(m, s, best)[0]

            for x0 in starts:
                res = _scipy_minimize(neg_ei, x0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * dim)
                if res.success and -res.fun > top_ei:
                    top_u, top_ei = res.x, -res.fun
            run(top_u)

    best_i = int(np.argmin(y))
    return CalibrationResult(dict(trace[best_i]["params"]), float(y[best_i]), trace)


def calibrate_single(model, stat, target, space, fixed, sim_users, replications, budget, init_points, seed, **kw):
    """Stage one: minimize the K-L divergence of one statistic."""

    def objective(p):
        kls = evaluate_config({**fixed, **p}, model, target, sim_users, replications, seed, **kw)
        return kls[stat], kls

    return minimize(objective, space, budget, init_points, rng=seed)


def calibrate_combined(model, bests, target, space, fixed, sim_users, replications, budget, init_points, seed, **kw):
    """Stage two: minimize the average relative loss across the four statistics."""

    def objective(p):
        kls = evaluate_config({**fixed, **p}, model, target, sim_users, replications, seed, **kw)
        return average_relative_loss(kls, bests), kls

    return minimize(objective, space, budget, init_points, rng=seed)


def best_divergences(stage_one):
    """Best K-L per statistic across all stage-one runs on one dataset.

    ``stage_one`` maps model name to ``{stat: CalibrationResult}``; every
    evaluation in every trace counts, since each computes all four values.
    """
    best = dict.fromkeys(STAT_NAMES, math.inf)
    for per_stat in stage_one.values():
        for res in per_stat.values():
            for entry in res.trace:
                for k in STAT_NAMES:
                    best[k] = min(best[k], entry["kl"][k])
    # guard the denominators against an exact zero
    return BestDivergences({k: max(v, 1e-12) for k, v in best.items()})
