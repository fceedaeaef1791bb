"""True-preference generators: three-parameter IBP and symmetric LDA."""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy import sparse
from scipy.special import gammaln

from .seeding import as_rng

_log = logging.getLogger(__name__)

#: Euler-Mascheroni constant, used in the expected IBP item count for sigma=0.
EULER_GAMMA = 0.5772156649015329


class DegenerateSimulation(RuntimeError):
    """A generator produced unusable output (too large, or empty)."""


def _csr_from_sets(sets, n_cols):
    lengths = np.fromiter((len(s) for s in sets), dtype=np.int64, count=len(sets))
    indptr = np.zeros(len(sets) + 1, dtype=np.int64)
    np.cumsum(lengths, out=indptr[1:])
    indices = np.concatenate(sets) if sets else np.zeros(0, dtype=np.int64)
    data = np.ones(len(indices), dtype=np.float64)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(sets), n_cols))


@dataclass(frozen=True)
class PreferenceData:
    """Complete binary preference data.

    ``relevant[u]`` is the sorted array of items user ``u`` likes; every array
    is non-empty. ``item_popularity[i]`` counts the users who like ``i``.
    """

    relevant: tuple
    item_universe: int
    item_popularity: np.ndarray = field(repr=False)

    @classmethod
    def from_sets(cls, sets, item_universe):
        rel = []
        for s in sets:
            arr = np.unique(np.asarray(s, dtype=np.int64))
            if len(arr):
                rel.append(arr)
        if rel and max(int(a[-1]) for a in rel) >= item_universe:
            raise ValueError("item id outside item universe")
        pop = np.zeros(item_universe, dtype=np.int64)
        for arr in rel:
            pop[arr] += 1
        return cls(tuple(rel), int(item_universe), pop)

    @property
    def num_users(self):
        return len(self.relevant)

    @property
    def num_pairs(self):
        return int(sum(len(a) for a in self.relevant))

    def to_csr(self):
        return _csr_from_sets(list(self.relevant), self.item_universe)


@dataclass(frozen=True)
class IbpParams:
    alpha: float
    sigma: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"IBP alpha must be non-negative, got {self.alpha}")
        if not 0 <= self.sigma < 1:
            raise ValueError(f"IBP sigma must be in [0, 1), got {self.sigma}")
        if not self.c > -self.sigma:
            raise ValueError(f"IBP c must exceed -sigma, got c={self.c}, sigma={self.sigma}")


@dataclass
class IbpState:
    """Running state of the buffet: users seen, per-item like counts."""

    n: int = 0
    m: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    next_item_id: int = 0


def ibp_new_item_rate(params: IbpParams, n: int) -> float:
    """Poisson rate of fresh items liked by user ``n + 1`` (``n`` users seen)."""
    a, s, c = params.alpha, params.sigma, params.c
    log_ratio = gammaln(1 + c) + gammaln(n + c + s) - gammaln(n + 1 + c) - gammaln(c + s)
    rate = a * np.exp(log_ratio)
    if not np.isfinite(rate):
        raise OverflowError(f"IBP new-item rate is not finite at n={n}")
    return float(rate)


def expected_ibp_items(params: IbpParams, num_users: int) -> float:
    """Exact expected number of items created for ``num_users`` users."""
    n = np.arange(num_users)
    a, s, c = params.alpha, params.sigma, params.c
    return float(a * np.exp(gammaln(1 + c) + gammaln(n + c + s) - gammaln(n + 1 + c) - gammaln(c + s)).sum())


def generate_ibp(params: IbpParams, num_users: int, rng=None, max_items=None) -> PreferenceData:
    """Run the three-parameter Indian buffet process over ``num_users`` users.

    User ``n + 1`` likes each existing item ``i`` with probability
    ``(m_i - sigma) / (n + c)`` and then a Poisson number of new items.
    Users that end with no items are dropped. ``max_items`` aborts runaway
    parameter settings with :class:`DegenerateSimulation`.
    """
    if num_users < 1:
        raise ValueError("num_users must be at least 1")
    rng = as_rng(rng)
    state = IbpState()
    counts = np.zeros(64, dtype=np.int64)
    sets = []
    for n in range(num_users):
        known = counts[: state.next_item_id]
        if n > 0 and state.next_item_id:
            prob = (known - params.sigma) / (n + params.c)
            old = np.flatnonzero(rng.random(state.next_item_id) < prob)
        else:
            old = np.zeros(0, dtype=np.int64)
        n_new = rng.poisson(ibp_new_item_rate(params, n)) if params.alpha > 0 else 0
        new = np.arange(state.next_item_id, state.next_item_id + n_new, dtype=np.int64)
        state.next_item_id += n_new
        if max_items is not None and state.next_item_id > max_items:
            raise DegenerateSimulation(f"IBP exceeded {max_items} items at user {n + 1}")
        if state.next_item_id > len(counts):
            grown = np.zeros(max(2 * len(counts), state.next_item_id), dtype=np.int64)
            grown[: len(counts)] = counts
            counts = grown
        liked = np.concatenate([old, new])
        counts[liked] += 1
        sets.append(liked)
        state.n = n + 1
    state.m = counts[: state.next_item_id]
    _log.debug("IBP: %d users, %d items", num_users, state.next_item_id)
    return PreferenceData.from_sets(sets, state.next_item_id)


@dataclass(frozen=True)
class LdaParams:
    a: float
    b: float
    K: int
    lam: float
    num_items: int

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"LDA a must be positive, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"LDA b must be positive, got {self.b}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"LDA K must be a positive integer, got {self.K}")
        if not self.lam > 0:
            raise ValueError(f"LDA lambda must be positive, got {self.lam}")
        if int(self.num_items) != self.num_items or self.num_items < 1:
            raise ValueError(f"LDA num_items must be a positive integer, got {self.num_items}")


@dataclass(frozen=True)
class LdaLatentState:
    phi: np.ndarray
    theta: np.ndarray


def _dirichlet(rng, conc, dim, size):
    # Gamma-normalization; rescue rows that underflow to all zeros at tiny conc.
    g = rng.standard_gamma(conc, size=(size, dim))
    tot = g.sum(axis=1, keepdims=True)
    bad = tot[:, 0] <= 0
    if bad.any():
        g[bad] = 0.0
        g[bad, rng.integers(dim, size=int(bad.sum()))] = 1.0
        tot = g.sum(axis=1, keepdims=True)
    return g / tot


def generate_lda(params: LdaParams, num_users: int, rng=None, return_latent=False, return_draws=False):
    """Sample preferences from symmetric LDA and de-duplicate user-item pairs.

    Optionally also returns the latent state and the per-user pre-dedup draw
    counts (for checks on the Poisson profile-length law).
    """
    if num_users < 1:
        raise ValueError("num_users must be at least 1")
    rng = as_rng(rng)
    K, n_items = int(params.K), int(params.num_items)
    phi = _dirichlet(rng, params.b, n_items, K)
    theta = _dirichlet(rng, params.a, K, num_users)
    draws = rng.poisson(params.lam, size=num_users)
    phi_cdf = np.cumsum(phi, axis=1)
    phi_cdf[:, -1] = 1.0
    sets = []
    for u in range(num_users):
        n_u = int(draws[u])
        if n_u == 0:
            continue
        feats = rng.choice(K, size=n_u, p=theta[u])
        feats.sort()
        items = np.empty(n_u, dtype=np.int64)
        uniforms = rng.random(n_u)
        for k in np.unique(feats):
            sel = feats == k
            items[sel] = np.searchsorted(phi_cdf[k], uniforms[sel], side="right")
        sets.append(np.minimum(items, n_items - 1))
    pref = PreferenceData.from_sets(sets, n_items)
    out = [pref]
    if return_latent:
        out.append(LdaLatentState(phi, theta))
    if return_draws:
        out.append(draws)
    return out[0] if len(out) == 1 else tuple(out)
