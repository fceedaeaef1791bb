"""Characteristic distributions of interaction data and K-L divergence between them."""

from dataclasses import dataclass
import json

import numpy as np
from scipy import sparse

from .seeding import as_rng

SCHEMA_VERSION = 1
STAT_NAMES = ("item_sim", "item_pop", "user_sim", "user_act")

DEFAULT_NUM_PAIRS = 1_000_000
DEFAULT_MIN_RATINGS = 5
DEFAULT_BINS = 100
# dense Gram matrices are used below this many qualifying entities
_GRAM_LIMIT = 4000


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteDistribution:
    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.support, dtype=np.float64)
        m = np.asarray(self.mass, dtype=np.float64)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "mass", m)
        if s.shape != m.shape or s.ndim != 1:
            raise ValueError("support and mass must be 1-D arrays of equal length")
        if len(s) == 0:
            raise ValueError("empty distribution")
        if (m < 0).any() or abs(m.sum() - 1.0) > 1e-9:
            raise ValueError("masses must be non-negative and sum to 1")
        if (np.diff(s) <= 0).any():
            raise ValueError("support must be strictly increasing")

    def as_dict(self):
        return {"support": self.support.tolist(), "mass": self.mass.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["support"], dtype=np.float64), np.array(d["mass"], dtype=np.float64))

    def __eq__(self, other):
        return (
            isinstance(other, DiscreteDistribution)
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.mass, other.mass)
        )


@dataclass(frozen=True)
class CharacteristicStats:
    item_pop: DiscreteDistribution
    user_act: DiscreteDistribution
    item_sim: DiscreteDistribution
    user_sim: DiscreteDistribution

    def __getitem__(self, name):
        if name not in STAT_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def to_json(self, meta=None):
        doc = {"schema_version": SCHEMA_VERSION}
        for name in STAT_NAMES:
            doc[name] = self[name].as_dict()
        doc["meta"] = meta or {}
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported stats schema version {doc.get('schema_version')!r}")
        return cls(**{n: DiscreteDistribution.from_dict(doc[n]) for n in STAT_NAMES})

    def save(self, path, meta=None):
        with open(path, "w") as f:
            f.write(self.to_json(meta))

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(f.read())


def as_matrix(data) -> sparse.csr_matrix:
    """Binary user-by-item CSR matrix for any supported dataset object."""
    if sparse.issparse(data):
        m = sparse.csr_matrix(data, dtype=np.float64)
    else:
        m = data.to_csr()
    m = m.copy()
    m.data[:] = 1.0
    return m


def _count_distribution(counts):
    counts = np.asarray(counts)
    counts = counts[counts > 0]
    if len(counts) == 0:
        raise InsufficientData("no interactions")
    levels, freq = np.unique(counts, return_counts=True)
    return DiscreteDistribution(levels.astype(np.float64), freq / freq.sum())


def popularity_distribution(data) -> DiscreteDistribution:
    """Fraction of (interacted) items at each popularity level."""
    m = as_matrix(data)
    return _count_distribution(np.diff(m.tocsc().indptr))


def activity_distribution(data) -> DiscreteDistribution:
    """Fraction of users at each profile size."""
    m = as_matrix(data)
    return _count_distribution(np.diff(m.indptr))


def _pair_from_index(idx, n):
    # linear index over the strict upper triangle, row-major
    idx = np.asarray(idx, dtype=np.float64)
    b = 2 * n - 1
    i = np.floor((b - np.sqrt(b * b - 8 * idx)) / 2).astype(np.int64)
    start = i * (2 * n - i - 1) // 2
    # guard floating error at row boundaries
    low = idx < start
    i[low] -= 1
    start = i * (2 * n - i - 1) // 2
    rowlen = n - 1 - i
    high = idx - start >= rowlen
    i[high] += 1
    start = i * (2 * n - i - 1) // 2
    j = (idx - start).astype(np.int64) + i + 1
    return i, j


def pair_cosines(matrix, num_pairs=DEFAULT_NUM_PAIRS, rng=None):
    """Cosine similarity of up to ``num_pairs`` distinct unordered row pairs."""
    rng = as_rng(rng)
    n = matrix.shape[0]
    total = n * (n - 1) // 2
    norms = np.sqrt(np.asarray(matrix.sum(axis=1)).ravel())
    if total <= num_pairs:
        if n <= _GRAM_LIMIT:
            gram = (matrix @ matrix.T).toarray()
            iu, ju = np.triu_indices(n, 1)
            return gram[iu, ju] / (norms[iu] * norms[ju])
        pairs = np.arange(total)
    else:
        pairs = np.sort(rng.choice(total, size=num_pairs, replace=False))
    i, j = _pair_from_index(pairs, n)
    if n <= _GRAM_LIMIT:
        gram = (matrix @ matrix.T).toarray()
        dots = gram[i, j]
    else:
        dots = np.empty(len(i))
        for lo in range(0, len(i), 50_000):
            hi = lo + 50_000
            dots[lo:hi] = np.asarray(matrix[i[lo:hi]].multiply(matrix[j[lo:hi]]).sum(axis=1)).ravel()
    return dots / (norms[i] * norms[j])


def histogram_distribution(values, bins=DEFAULT_BINS) -> DiscreteDistribution:
    """Equal-width histogram on [0, 1], reported at bin centers (empty bins kept)."""
    values = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    centers = (edges[:-1] + edges[1:]) / 2
    return DiscreteDistribution(centers, counts / counts.sum())


def similarity_distribution(
    data,
    axis="item",
    num_pairs=DEFAULT_NUM_PAIRS,
    min_ratings=DEFAULT_MIN_RATINGS,
    bins=DEFAULT_BINS,
    rng=None,
) -> DiscreteDistribution:
    """Histogram of cosine similarity between sampled pairs of users or items.

    Only entities with at least ``min_ratings`` interactions take part.
    """
    m = as_matrix(data)
    if axis == "item":
        m = m.T.tocsr()
    elif axis != "user":
        raise ValueError(f"axis must be 'item' or 'user', got {axis!r}")
    sizes = np.diff(m.indptr)
    keep = np.flatnonzero(sizes >= min_ratings)
    if len(keep) < 2:
        raise InsufficientData(f"fewer than 2 {axis}s with at least {min_ratings} ratings")
    return histogram_distribution(pair_cosines(m[keep], num_pairs, rng), bins)


def characteristic_stats(
    data, num_pairs=DEFAULT_NUM_PAIRS, min_ratings=DEFAULT_MIN_RATINGS, bins=DEFAULT_BINS, rng=None
) -> CharacteristicStats:
    rng = as_rng(rng)
    m = as_matrix(data)
    return CharacteristicStats(
        item_pop=popularity_distribution(m),
        user_act=activity_distribution(m),
        item_sim=similarity_distribution(m, "item", num_pairs, min_ratings, bins, rng),
        user_sim=similarity_distribution(m, "user", num_pairs, min_ratings, bins, rng),
    )


def kl_divergence(p_obs: DiscreteDistribution, q_sim: DiscreteDistribution, epsilon=1e-10) -> float:
    """D(obs || sim) in nats over the union support, with ``epsilon`` smoothing of ``sim``."""
    support = np.union1d(p_obs.support, q_sim.support)
    p = np.zeros(len(support))
    q = np.zeros(len(support))
    p[np.searchsorted(support, p_obs.support)] = p_obs.mass
    q[np.searchsorted(support, q_sim.support)] = q_sim.mass
    q = q + epsilon
    q /= q.sum()
    p /= p.sum()
    nz = p > 0
    return max(float(np.sum(p[nz] * np.log(p[nz] / q[nz]))), 0.0)


def stats_divergences(target: CharacteristicStats, sim: CharacteristicStats, epsilon=1e-10) -> dict:
    return {name: kl_divergence(target[name], sim[name], epsilon) for name in STAT_NAMES}
