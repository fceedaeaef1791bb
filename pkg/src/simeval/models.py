"""Named model combinations (preference model x observation model)."""

from .obsgen import SAMPLERS, ParetoParams
from .prefgen import IbpParams, LdaParams, generate_ibp, generate_lda

PREFERENCE_MODELS = ("ibp", "lda")
OBSERVATION_MODELS = tuple(SAMPLERS)
MODEL_NAMES = tuple(f"{p}-{o}" for p in PREFERENCE_MODELS for o in OBSERVATION_MODELS)

IBP_KEYS = ("alpha", "sigma", "c")
LDA_KEYS = ("a", "b", "K", "lam", "num_items")
PARETO_KEYS = {"pareto_shape": "shape", "pareto_floor": "floor", "truncation": "mode"}


def split_model(name):
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; valid options: {', '.join(MODEL_NAMES)}")
    return tuple(name.split("-"))


def preference_params(pref_model, params):
    if pref_model == "ibp":
        return IbpParams(**{k: float(params[k]) for k in IBP_KEYS if k in params})
    if pref_model == "lda":
        vals = {k: params[k] for k in LDA_KEYS}
        vals["K"] = int(round(vals["K"]))
        vals["num_items"] = int(vals["num_items"])
        return LdaParams(**vals)
    raise ValueError(f"unknown preference model {pref_model!r}; valid options: {', '.join(PREFERENCE_MODELS)}")


def pareto_params(params):
    return ParetoParams(**{v: params[k] for k, v in PARETO_KEYS.items() if k in params})


def generate_preferences(pref_model, params, num_users, rng, max_items=None):
    pp = preference_params(pref_model, params)
    if pref_model == "ibp":
        return generate_ibp(pp, num_users, rng, max_items=max_items)
    return generate_lda(pp, num_users, rng)


def observe(obs_model, pref, params, rng):
    if obs_model not in SAMPLERS:
        raise ValueError(f"unknown observation model {obs_model!r}; valid options: {', '.join(SAMPLERS)}")
    return SAMPLERS[obs_model](pref, pareto_params(params), rng)
