import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from simeval.ingest import load_movielens
from simeval.prefgen import LdaParams, generate_lda
from simeval.stats import (
    CharacteristicStats,
    DiscreteDistribution,
    InsufficientData,
    activity_distribution,
    characteristic_stats,
    kl_divergence,
    pair_cosines,
    popularity_distribution,
    similarity_distribution,
    _pair_from_index,
)

DATA = __import__("pathlib").Path(__file__).parent / "data"


def matrix(rows, n_items=None):
    n_items = n_items or max(max(r) for r in rows if r) + 1
    m = sparse.lil_matrix((len(rows), n_items))
    for u, r in enumerate(rows):
        for i in r:
            m[u, i] = 1
    return m.tocsr()


def dist_dict(d):
    return dict(zip(d.support.tolist(), d.mass.tolist()))


def test_popularity_counts():
    # item 0 liked by 3 users, item 1 by 3, item 2 by 1
    m = matrix([[0, 1], [0, 1, 2], [0, 1]])
    assert dist_dict(popularity_distribution(m)) == pytest.approx({1.0: 1 / 3, 3.0: 2 / 3})


def test_popularity_degenerate():
    m = matrix([list(range(4))] * 7)
    assert dist_dict(popularity_distribution(m)) == {7.0: 1.0}


def test_activity_counts():
    assert dist_dict(activity_distribution(matrix([[0, 1, 2, 3, 4]] * 3))) == {5.0: 1.0}
    assert dist_dict(activity_distribution(matrix([[0, 1], [0, 1, 2, 3]]))) == {2.0: 0.5, 4.0: 0.5}


def test_empty_data_errors():
    with pytest.raises(InsufficientData):
        popularity_distribution(sparse.csr_matrix((3, 3)))


def test_fixture_support_bounds():
    data = load_movielens(DATA / "ml_sample.dat")
    pop = popularity_distribution(data)
    assert pop.support.max() <= data.users


def test_distribution_validation():
    with pytest.raises(ValueError):
        DiscreteDistribution([1, 2], [0.5, 0.6])
    with pytest.raises(ValueError):
        DiscreteDistribution([2, 1], [0.5, 0.5])
    with pytest.raises(ValueError):
        DiscreteDistribution([1, 2], [1.5, -0.5])


def test_identical_profiles_similarity_one():
    m = matrix([[0, 1, 2, 3, 4], [0, 1, 2, 3, 4]])
    d = similarity_distribution(m, "user", min_ratings=5)
    assert d.mass[-1] == 1.0 and d.support[-1] == pytest.approx(0.995)


def test_disjoint_profiles_similarity_zero():
    m = matrix([[0, 1, 2, 3, 4], [5, 6, 7, 8, 9]])
    d = similarity_distribution(m, "user", min_ratings=5)
    assert d.mass[0] == 1.0


def test_half_overlap_cosine():
    cos = pair_cosines(matrix([[1, 2], [1, 3]]), 10, rng=0)
    assert cos == pytest.approx([1 / (math.sqrt(2) * math.sqrt(2))])


def test_min_ratings_filter_errors():
    with pytest.raises(InsufficientData, match="at least 5"):
        similarity_distribution(matrix([[0, 1], [0, 2]]), "user")


def test_item_axis_uses_columns():
    # items 0 and 1 share all five users
    m = matrix([[0, 1]] * 5)
    d = similarity_distribution(m, "item")
    assert d.mass[-1] == 1.0


def test_pair_index_decoding():
    for n in (2, 3, 7, 50):
        total = n * (n - 1) // 2
        i, j = _pair_from_index(np.arange(total), n)
        iu, ju = np.triu_indices(n, 1)
        assert np.array_equal(i, iu) and np.array_equal(j, ju)


def test_sampled_pairs_match_enumerated():
    rng = np.random.default_rng(0)
    m = sparse.csr_matrix((rng.random((60, 40)) < 0.3).astype(float))
    full = pair_cosines(m, 10**6, rng=1)
    sampled = pair_cosines(m, 500, rng=1)
    assert len(sampled) == 500
    assert set(np.round(sampled, 12)) <= set(np.round(full, 12))


def test_similarity_sampling_seeded():
    pref = generate_lda(LdaParams(0.5, 0.2, 10, 30, 2000), 3000, rng=1)
    a = similarity_distribution(pref, "user", num_pairs=20_000, rng=5)
    b = similarity_distribution(pref, "user", num_pairs=20_000, rng=5)
    c = similarity_distribution(pref, "user", num_pairs=20_000, rng=6)
    assert a == b
    assert kl_divergence(a, c) < 0.01


def test_exact_distributions_bit_identical():
    pref = generate_lda(LdaParams(0.5, 0.2, 10, 30, 500), 300, rng=1)
    assert popularity_distribution(pref) == popularity_distribution(pref)
    assert activity_distribution(pref) == activity_distribution(pref)


def test_kl_known_value():
    p = DiscreteDistribution([0, 1], [0.5, 0.5])
    q = DiscreteDistribution([0, 1], [0.25, 0.75])
    direct = 0.5 * math.log(0.5 / 0.25) + 0.5 * math.log(0.5 / 0.75)
    assert direct == pytest.approx(0.14384, abs=1e-5)
    assert kl_divergence(p, q) == pytest.approx(direct, abs=1e-8)


def test_kl_identity():
    p = DiscreteDistribution([1, 2, 5], [0.2, 0.3, 0.5])
    assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-9)


def test_kl_unmatched_support_grows_as_epsilon_shrinks():
    p = DiscreteDistribution([1, 2], [0.5, 0.5])
    q = DiscreteDistribution([1], [1.0])
    vals = [kl_divergence(p, q, eps) for eps in (1e-2, 1e-4, 1e-6, 1e-10)]
    assert all(np.isfinite(vals))
    assert all(b > a for a, b in zip(vals, vals[1:]))


probs = st.lists(st.floats(0, 1), min_size=1, max_size=8).filter(lambda x: sum(x) > 1e-3)


@settings(max_examples=200, deadline=None)
@given(p=probs, q=probs)
def test_kl_non_negative(p, q):
    P = DiscreteDistribution(np.arange(len(p)), np.asarray(p) / sum(p))
    Q = DiscreteDistribution(np.arange(len(q)) + 0.5, np.asarray(q) / sum(q))
    assert kl_divergence(P, Q) >= 0


def test_stats_json_round_trip(tmp_path):
    pref = generate_lda(LdaParams(0.5, 0.2, 10, 30, 500), 300, rng=1)
    stats = characteristic_stats(pref, rng=0)
    path = tmp_path / "s.json"
    stats.save(path, {"seed": 0})
    back = CharacteristicStats.load(path)
    for name in ("item_pop", "user_act", "item_sim", "user_sim"):
        assert back[name] == stats[name]


def test_stats_json_version_checked():
    with pytest.raises(ValueError, match="schema"):
        CharacteristicStats.from_json('{"schema_version": 99}')
