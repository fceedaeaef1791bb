"""Train/test split, reference recommenders, and top-k ranking metrics."""

from dataclasses import dataclass
import logging
import math

import numpy as np

from .seeding import as_rng

_log = logging.getLogger(__name__)

METRICS = ("P@50", "Recall", "MRR", "nDCG")
RECOMMENDERS = ("Oracle", "Popular", "Random")
OBSERVED = "observed"
TRUTH = "truth"


@dataclass(frozen=True)
class SplitData:
    """Per-user train/test partition; ``test[u]`` is empty for unevaluated users."""

    train: tuple
    test: tuple

    @property
    def num_users(self):
        return len(self.train)

    def evaluated_users(self):
        return [u for u, t in enumerate(self.test) if len(t)]


def split(obs, fraction=0.2, rng=None) -> SplitData:
    """Hold out ``max(1, round(fraction * |I_u|))`` items per user with at least two."""
    if not 0 < fraction < 1:
        raise ValueError(f"split fraction must be in (0, 1), got {fraction}")
    rng = as_rng(rng)
    empty = np.zeros(0, dtype=np.int64)
    train, test = [], []
    for items in obs.consumed:
        n = len(items)
        if n < 2:
            train.append(items)
            test.append(empty)
            continue
        n_test = max(1, math.floor(fraction * n + 0.5))
        perm = rng.permutation(n)
        test.append(np.sort(items[perm[:n_test]]))
        train.append(np.sort(items[perm[n_test:]]))
    return SplitData(tuple(train), tuple(test))


def truth_sets(pref, data: SplitData, kind):
    """Ground-truth set per user: held-out test items, or all unseen relevant items."""
    if kind == OBSERVED:
        return data.test
    if kind == TRUTH:
        return tuple(np.setdiff1d(rel, tr, assume_unique=True) for rel, tr in zip(pref.relevant, data.train))
    raise ValueError(f"unknown ground truth kind {kind!r}")


def _random_excluding(rng, universe, exclude, n):
    """Up to ``n`` distinct uniform items from ``range(universe)`` minus ``exclude``."""
    n_cand = universe - len(exclude)
    n = min(n, n_cand)
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    if n_cand <= 4 * n or universe < 256:
        cand = np.setdiff1d(np.arange(universe), exclude, assume_unique=True)
        return rng.choice(cand, size=n, replace=False)
    # rejection sampling: cheap when exclusions are a small part of the universe
    excluded = set(exclude.tolist())
    chosen = []
    seen = set()
    while len(chosen) < n:
        for i in rng.integers(universe, size=2 * (n - len(chosen))).tolist():
            if i not in excluded and i not in seen:
                seen.add(i)
                chosen.append(i)
                if len(chosen) == n:
                    break
    return np.asarray(chosen, dtype=np.int64)


def recommend_oracle(pref, data: SplitData, k=50, rng=None):
    """Unseen relevant items in random order, padded with random non-relevant items."""
    rng = as_rng(rng)
    lists = []
    for rel, tr in zip(pref.relevant, data.train):
        unseen = np.setdiff1d(rel, tr, assume_unique=True)
        head = rng.permutation(unseen)[:k]
        if len(head) < k:
            pad = _random_excluding(rng, pref.item_universe, rel, k - len(head))
            head = np.concatenate([head, pad])
        lists.append(head)
    return tuple(lists)


def popularity_ranking(data: SplitData):
    """Items seen in training, most popular first, ties by ascending id."""
    items = np.concatenate(data.train) if data.train else np.zeros(0, dtype=np.int64)
    if len(items) == 0:
        raise ValueError("popular recommender needs non-empty training data")
    ids, counts = np.unique(items, return_counts=True)
    return ids[np.lexsort((ids, -counts))]


def recommend_popular(data: SplitData, k=50):
    """Most popular training items per user, excluding the user's own training items."""
    ranking = popularity_ranking(data)
    lists = []
    for tr in data.train:
        if len(tr) == 0:
            lists.append(ranking[:k])
            continue
        # a user's train items can displace at most len(tr) ranks
        head = ranking[: k + len(tr)]
        lists.append(head[~np.isin(head, tr, assume_unique=True)][:k])
    return tuple(lists)


def recommend_random(data: SplitData, item_universe, k=50, rng=None):
    """``k`` distinct random items per user, never from the user's training items."""
    rng = as_rng(rng)
    lists = []
    short = 0
    for tr in data.train:
        lst = _random_excluding(rng, item_universe, tr, k)
        short += len(lst) < k
        lists.append(lst)
    if short:
        _log.warning("random recommender: %d users had fewer than %d candidates", short, k)
    return tuple(lists)


def precision_at_k(rec, truth, k=50):
    if len(truth) == 0:
        return 0.0
    return int(np.isin(rec[:k], truth).sum()) / k


def recall_at_k(rec, truth, k=50):
    if len(truth) == 0:
        return 0.0
    return int(np.isin(rec[:k], truth).sum()) / len(truth)


def mrr(rec, truth):
    hits = np.flatnonzero(np.isin(rec, truth))
    return 1.0 / (hits[0] + 1) if len(hits) else 0.0


def ndcg_at_k(rec, truth, k=50):
    if len(truth) == 0:
        return 0.0
    ranks = np.flatnonzero(np.isin(rec[:k], truth)) + 1
    dcg = float(np.sum(1.0 / np.log2(ranks + 1)))
    idcg = float(np.sum(1.0 / np.log2(np.arange(1, min(len(truth), k) + 1) + 1)))
    return dcg / idcg


def user_metrics(rec, truth, k=50):
    """All four metrics for one user's list, keyed by metric name."""
    hit = np.isin(rec[:k], truth)
    n_hit = int(hit.sum())
    n_truth = len(truth)
    if n_truth == 0:
        return dict.fromkeys(METRICS, 0.0)
    ranks = np.flatnonzero(hit) + 1
    dcg = float(np.sum(1.0 / np.log2(ranks + 1)))
    idcg = float(np.sum(1.0 / np.log2(np.arange(2, min(n_truth, k) + 2))))
    return {
        "P@50": n_hit / k,
        "Recall": n_hit / n_truth,
        "MRR": mrr(rec, truth),
        "nDCG": dcg / idcg,
    }


def evaluate_lists(lists, truths, users, k=50):
    """Per-user metric arrays over ``users``: ``{metric: ndarray}``."""
    out = {m: np.empty(len(users)) for m in METRICS}
    for j, u in enumerate(users):
        for m, v in user_metrics(lists[u], truths[u], k).items():
            out[m][j] = v
    return out
