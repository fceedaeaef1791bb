"""Experiment configuration files (TOML)."""

from dataclasses import asdict, dataclass, field
import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .calibrate import ParamSpace
from .models import MODEL_NAMES, OBSERVATION_MODELS, PREFERENCE_MODELS, pareto_params, preference_params

DEFAULT_BOUNDS = {
    "ibp": {"alpha": (0.5, 500.0), "sigma": (0.0, 0.95), "c": (0.05, 50.0), "pareto_shape": (0.1, 10.0)},
    "lda": {
        "a": (0.01, 10.0),
        "b": (0.001, 10.0),
        "K": (5, 200),
        "lam": (5.0, 500.0),
        "pareto_shape": (0.1, 10.0),
    },
}
INTEGER_PARAMS = ("K",)


class ConfigError(ValueError):
    """Invalid configuration; raised before any output is written."""


@dataclass
class CalibrationSettings:
    target: str = ""
    models: list = field(default_factory=lambda: list(MODEL_NAMES))
    budget: int = 60
    init_points: int = 10
    sim_users: int = 1000
    replications: int = 1
    num_items: int = 1000
    truncation: str = "reject"
    max_items: int = 50_000
    num_pairs: int = 1_000_000
    min_ratings: int = 5
    bins: int = 100
    bounds: dict = field(default_factory=dict)
    # per preference model, parameters held constant instead of searched
    fixed_params: dict = field(default_factory=dict)

    def space(self, pref_model):
        bounds = dict(DEFAULT_BOUNDS[pref_model])
        for k, v in self.bounds.get(pref_model, {}).items():
            if k not in bounds:
                raise ConfigError(f"unknown {pref_model} parameter {k!r} in calibration bounds")
            bounds[k] = tuple(v)
        for k in self.fixed_params.get(pref_model, {}):
            if k not in bounds:
                raise ConfigError(f"unknown {pref_model} parameter {k!r} in calibration fixed_params")
            del bounds[k]
        if not bounds:
            raise ConfigError(f"no free {pref_model} parameters left to calibrate")
        try:
            return ParamSpace.from_bounds(bounds, INTEGER_PARAMS)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def fixed(self, pref_model):
        fixed = {"truncation": self.truncation}
        if pref_model == "lda":
            fixed["num_items"] = self.num_items
        fixed.update(self.fixed_params.get(pref_model, {}))
        return fixed

    def stats_options(self):
        return {"num_pairs": self.num_pairs, "min_ratings": self.min_ratings, "bins": self.bins}


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    replications: int = 100
    workers: int = 0
    preference_model: str = "ibp"
    num_users: int = 1000
    preference: dict = field(default_factory=dict)
    observation_models: list = field(default_factory=lambda: ["uniform"])
    observation: dict = field(default_factory=dict)
    split_fraction: float = 0.2
    k: int = 50
    out_dir: str = "out"
    per_user: bool = False
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)

    def validate(self):
        if self.preference_model not in PREFERENCE_MODELS:
            raise ConfigError(
                f"unknown preference model {self.preference_model!r}; valid options: {', '.join(PREFERENCE_MODELS)}"
            )
        for m in self.observation_models:
            if m not in OBSERVATION_MODELS:
                raise ConfigError(f"unknown observation model {m!r}; valid options: {', '.join(OBSERVATION_MODELS)}")
        if not self.observation_models:
            raise ConfigError("at least one observation model is required")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.num_users < 1:
            raise ConfigError("num_users must be at least 1")
        if not 0 < self.split_fraction < 1:
            raise ConfigError("split_fraction must be in (0, 1)")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        cal = self.calibration
        for m in cal.models:
            if m not in MODEL_NAMES:
                raise ConfigError(f"unknown model {m!r}; valid options: {', '.join(MODEL_NAMES)}")
        if not cal.budget >= cal.init_points >= 2:
            raise ConfigError(f"calibration needs budget >= init_points >= 2 (budget={cal.budget})")
        if cal.sim_users < 1 or cal.replications < 1:
            raise ConfigError("calibration sim_users and replications must be positive")
        if self.preference or self.observation:
            self.validate_experiment()
        for m in cal.models:
            cal.space(m.split("-")[0])
        return self

    def validate_experiment(self):
        """Check the preference and observation parameters an evaluation run needs."""
        try:
            preference_params(self.preference_model, self.preference)
            pareto_params(self.observation)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid model parameters: {e}") from e
        return self

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        d = self.to_dict()
        for volatile in ("workers", "out_dir"):
            d.pop(volatile)
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def from_dict(doc) -> ExperimentConfig:
    doc = dict(doc)
    pref = dict(doc.pop("preference", {}))
    obs = dict(doc.pop("observation", {}))
    ev = dict(doc.pop("evaluation", {}))
    out = dict(doc.pop("output", {}))
    cal = dict(doc.pop("calibration", {}))
    kwargs = {}
    for key in ("name", "seed", "replications", "workers"):
        if key in doc:
            kwargs[key] = doc.pop(key)
    if doc:
        raise ConfigError(f"unknown top-level keys: {sorted(doc)}")
    kwargs["preference_model"] = pref.pop("model", "ibp")
    kwargs["num_users"] = int(pref.pop("num_users", 1000))
    if "lambda" in pref:
        pref["lam"] = pref.pop("lambda")
    kwargs["preference"] = pref
    models = obs.pop("model", "uniform")
    kwargs["observation_models"] = [models] if isinstance(models, str) else list(models)
    kwargs["observation"] = obs
    kwargs["split_fraction"] = float(ev.pop("split_fraction", 0.2))
    kwargs["k"] = int(ev.pop("k", 50))
    if ev:
        raise ConfigError(f"unknown [evaluation] keys: {sorted(ev)}")
    kwargs["out_dir"] = out.pop("out_dir", "out")
    kwargs["per_user"] = bool(out.pop("per_user", False))
    try:
        kwargs["calibration"] = CalibrationSettings(**cal)
    except TypeError as e:
        raise ConfigError(f"invalid [calibration] section: {e}") from e
    return ExperimentConfig(**kwargs).validate()


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as f:
        try:
            doc = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    return from_dict(doc)
