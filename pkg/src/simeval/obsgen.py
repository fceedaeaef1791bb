"""Observation samplers: truncated-Pareto profile sizes, Uniform and Popular selection."""

from dataclasses import dataclass
import math

import numpy as np

from .prefgen import PreferenceData, _csr_from_sets
from .seeding import as_rng

TRUNCATION_MODES = ("clamp", "reject")


@dataclass(frozen=True)
class ParetoParams:
    shape: float
    floor: int = 1
    mode: str = "clamp"

    def __post_init__(self):
        if not self.shape > 0:
            raise ValueError(f"Pareto shape must be positive, got {self.shape}")
        if int(self.floor) != self.floor or self.floor < 1:
            raise ValueError(f"Pareto floor must be an integer >= 1, got {self.floor}")
        if self.mode not in TRUNCATION_MODES:
            raise ValueError(f"truncation mode must be one of {TRUNCATION_MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class ObservationData:
    """Observed consumption ``consumed[u]``, a sorted subset of ``parent.relevant[u]``."""

    consumed: tuple
    parent: PreferenceData

    @property
    def num_users(self):
        return len(self.consumed)

    @property
    def item_universe(self):
        return self.parent.item_universe

    def to_csr(self):
        return _csr_from_sets(list(self.consumed), self.parent.item_universe)

    def check(self):
        for obs, rel in zip(self.consumed, self.parent.relevant):
            if not 1 <= len(obs) <= len(rel):
                raise AssertionError("observed profile size out of range")
            if not np.isin(obs, rel, assume_unique=True).all():
                raise AssertionError("observed item not in relevant set")


def _round_half_up(x):
    return math.floor(x + 0.5)


def draw_profile_size(params: ParetoParams, limit: int, rng=None) -> int:
    """Draw a profile size from Pareto(shape, scale=1) rounded into ``[floor, limit]``."""
    if limit < 1:
        raise ValueError("limit must be at least 1")
    if params.floor > limit:
        raise ValueError(f"Pareto floor {params.floor} exceeds limit {limit}")
    rng = as_rng(rng)
    while True:
        # numpy's pareto is the Lomax form; shift by the unit scale
        x = 1.0 + rng.pareto(params.shape)
        n = max(_round_half_up(x), params.floor) if x < limit + 0.5 else limit + 1
        if n <= limit:
            return n
        if params.mode == "clamp":
            return limit


def draw_profile_sizes(params: ParetoParams, limits, rng=None) -> np.ndarray:
    """Vectorized :func:`draw_profile_size` over an array of per-user limits."""
    rng = as_rng(rng)
    limits = np.asarray(limits, dtype=np.int64)
    if (limits < 1).any():
        raise ValueError("every limit must be at least 1")
    # users smaller than the floor are observed in full
    floors = np.minimum(params.floor, limits)
    cap = limits + 1.0

    def draw(n, idx):
        # cap in float space; heavy tails overflow int64
        x = np.minimum(np.floor(1.5 + rng.pareto(params.shape, size=n)), cap[idx])
        return np.maximum(x, floors[idx]).astype(np.int64)

    out = draw(len(limits), slice(None))
    over = out > limits
    if params.mode == "clamp":
        out[over] = limits[over]
    else:
        while over.any():
            idx = np.flatnonzero(over)
            out[idx] = draw(len(idx), idx)
            over = out > limits
    return out


def weighted_sample_without_replacement(items, weights, n, rng):
    """Successive weighted picks without replacement.

    Each pick chooses among the remaining items with probability proportional
    to weight. Implemented with exponential race keys (smallest ``E / w``
    wins), which yields exactly the law of sequential renormalized draws.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if not weights.sum() > 0:
        raise RuntimeError("zero total weight in popularity sampler")
    keys = rng.standard_exponential(len(items)) / weights
    order = np.argsort(keys, kind="stable")[:n]
    return np.asarray(items)[order]


def sample_uniform(pref: PreferenceData, pareto: ParetoParams, rng=None) -> ObservationData:
    """Observe ``n_u`` relevant items per user, chosen uniformly without replacement."""
    if pref.num_users == 0:
        raise ValueError("cannot observe an empty preference dataset")
    rng = as_rng(rng)
    sizes = draw_profile_sizes(pareto, [len(r) for r in pref.relevant], rng)
    consumed = []
    for rel, n in zip(pref.relevant, sizes):
        if n == len(rel):
            consumed.append(rel)
        else:
            consumed.append(np.sort(rng.choice(rel, size=n, replace=False)))
    return ObservationData(tuple(consumed), pref)


def sample_popular(pref: PreferenceData, pareto: ParetoParams, rng=None) -> ObservationData:
    """Observe ``n_u`` relevant items per user, weighting each by true popularity."""
    if pref.num_users == 0:
        raise ValueError("cannot observe an empty preference dataset")
    rng = as_rng(rng)
    sizes = draw_profile_sizes(pareto, [len(r) for r in pref.relevant], rng)
    pop = pref.item_popularity
    consumed = []
    for rel, n in zip(pref.relevant, sizes):
        if n == len(rel):
            consumed.append(rel)
        else:
            consumed.append(np.sort(weighted_sample_without_replacement(rel, pop[rel], n, rng)))
    return ObservationData(tuple(consumed), pref)


SAMPLERS = {"uniform": sample_uniform, "popular": sample_popular}
