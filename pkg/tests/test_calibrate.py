import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from simeval.calibrate import (
    PENALTY_KL,
    BestDivergences,
    CalibrationResult,
    Dim,
    ParamSpace,
    average_relative_loss,
    best_divergences,
    calibrate_combined,
    evaluate_config,
    minimize,
    relative_loss,
)
from simeval.models import generate_preferences, observe
from simeval.stats import STAT_NAMES, characteristic_stats

# compact popularity support keeps the smoothed K-L of self-targets small
LDA_PARAMS = {"a": 1.0, "b": 1.0, "K": 10, "lam": 30.0, "num_items": 5000, "pareto_shape": 0.8}


@pytest.fixture(scope="module")
def lda_target():
    pref = generate_preferences("lda", LDA_PARAMS, 2000, np.random.default_rng(99))
    obs = observe("uniform", pref, LDA_PARAMS, np.random.default_rng(98))
    return characteristic_stats(obs, rng=1)


def test_param_space_validation():
    with pytest.raises(ValueError):
        ParamSpace((Dim("x", 1, 0),))
    with pytest.raises(ValueError):
        ParamSpace((Dim("x", 0, math.inf),))
    with pytest.raises(ValueError):
        ParamSpace((Dim("x", 0, 1), Dim("x", 0, 2)))


def test_param_space_decode_rounds_integers():
    space = ParamSpace.from_bounds({"K": (5, 200), "a": (0.0, 2.0)}, integer=("K",))
    p = space.decode([0.5012, 0.25])
    assert p == {"K": 103, "a": 0.5}
    assert isinstance(p["K"], int)


def test_relative_loss_reference_datapoint():
    assert relative_loss(0.170, 0.002) == pytest.approx(8400.0, abs=1e-9)


def test_relative_loss_examples():
    assert relative_loss(0.5, 0.5) == 0.0
    assert relative_loss(0.004, 0.002) == pytest.approx(100.0)
    with pytest.raises(ValueError):
        relative_loss(0.1, 0.0)


@given(k=st.floats(1e-6, 1e3), b=st.floats(1e-6, 1e3), c=st.floats(1e-3, 1e3))
def test_relative_loss_scale_free(k, b, c):
    assert relative_loss(c * k, c * b) == pytest.approx(relative_loss(k, b), rel=1e-9, abs=1e-9)


def test_average_relative_loss():
    bests = BestDivergences(dict.fromkeys(STAT_NAMES, 1.0))
    assert average_relative_loss(dict.fromkeys(STAT_NAMES, 1.0), bests) == 0.0
    kls = dict(zip(STAT_NAMES, [2.0, 3.0, 4.0, 5.0]))
    assert average_relative_loss(kls, bests) == pytest.approx(250.0)


def test_best_divergences_must_be_positive():
    with pytest.raises(ValueError):
        BestDivergences({**dict.fromkeys(STAT_NAMES, 1.0), "item_pop": 0.0})


def test_evaluate_config_self_consistent(lda_target):
    kls = evaluate_config(LDA_PARAMS, "lda-uniform", lda_target, 2000, replications=20, seed=5)
    assert set(kls) == set(STAT_NAMES)
    assert all(v < 0.1 for v in kls.values()), kls


def test_evaluate_config_degenerate_penalty(lda_target):
    params = {"alpha": 1e-9, "sigma": 0.5, "c": 1.0, "pareto_shape": 1.0}
    kls = evaluate_config(params, "ibp-uniform", lda_target, 200, replications=2, seed=1)
    assert kls == dict.fromkeys(STAT_NAMES, PENALTY_KL)


def test_evaluate_config_runaway_penalty(lda_target):
    params = {"alpha": 500, "sigma": 0.95, "c": 1.0, "pareto_shape": 1.0}
    kls = evaluate_config(params, "ibp-popular", lda_target, 500, seed=1, max_items=1000)
    assert kls == dict.fromkeys(STAT_NAMES, PENALTY_KL)


def test_evaluate_config_deterministic(lda_target):
    a = evaluate_config(LDA_PARAMS, "lda-popular", lda_target, 500, replications=2, seed=3)
    b = evaluate_config(LDA_PARAMS, "lda-popular", lda_target, 500, replications=2, seed=3)
    assert a == b


def test_evaluate_config_unknown_model(lda_target):
    with pytest.raises(ValueError, match="valid options"):
        evaluate_config(LDA_PARAMS, "lda-random", lda_target, 10)


SPACE_1D = ParamSpace.from_bounds({"x": (0.0, 1.0)})


def test_minimize_trace_and_best():
    res = minimize(lambda p: (p["x"] - 0.3) ** 2, SPACE_1D, budget=15, init_points=5, rng=0)
    assert isinstance(res, CalibrationResult)
    assert len(res.trace) == 15
    assert res.best_loss == min(t["loss"] for t in res.trace)


def test_minimize_constant_objective():
    res = minimize(lambda p: 3.5, SPACE_1D, budget=8, init_points=3, rng=0)
    assert res.best_loss == 3.5
    assert len(res.trace) == 8


def test_minimize_non_finite_clamped():
    res = minimize(lambda p: math.nan if p["x"] > 0.5 else p["x"], SPACE_1D, budget=10, init_points=4, rng=1)
    assert all(math.isfinite(t["loss"]) for t in res.trace)
    assert max(t["loss"] for t in res.trace) <= PENALTY_KL


def test_minimize_budget_validation():
    with pytest.raises(ValueError):
        minimize(lambda p: 0.0, SPACE_1D, budget=3, init_points=5)
    with pytest.raises(ValueError):
        minimize(lambda p: 0.0, SPACE_1D, budget=0, init_points=0)


def test_minimize_random_method():
    res = minimize(lambda p: abs(p["x"] - 0.5), SPACE_1D, budget=30, init_points=2, rng=0, method="random")
    assert len(res.trace) == 30
    assert res.best_loss < 0.1


def test_minimize_deterministic():
    f = lambda p: (p["x"] - 0.7) ** 2
    a = minimize(f, SPACE_1D, budget=14, init_points=4, rng=7)
    b = minimize(f, SPACE_1D, budget=14, init_points=4, rng=7)
    assert a.trace == b.trace


def test_best_divergences_from_traces():
    def res(kls):
        return CalibrationResult({}, 0.0, [{"params": {}, "loss": 0.0, "kl": k} for k in kls])

    stage_one = {
        "ibp-uniform": {"item_sim": res([dict.fromkeys(STAT_NAMES, 0.5), dict(zip(STAT_NAMES, [0.1, 0.9, 0.9, 0.9]))])},
        "lda-uniform": {"item_pop": res([dict(zip(STAT_NAMES, [0.9, 0.2, 0.3, 0.9]))])},
    }
    bests = best_divergences(stage_one)
    assert bests.values == dict(zip(STAT_NAMES, [0.1, 0.2, 0.3, 0.5]))


def test_combined_stage_runs(lda_target):
    space = ParamSpace.from_bounds({"lam": (10.0, 60.0)})
    bests = BestDivergences(dict.fromkeys(STAT_NAMES, 0.01))
    fixed = {k: v for k, v in LDA_PARAMS.items() if k != "lam"}
    res = calibrate_combined("lda-uniform", bests, lda_target, space, fixed, 500, 1, 6, 3, seed=2)
    assert len(res.trace) == 6
    assert all(set(t["kl"]) == set(STAT_NAMES) for t in res.trace)
