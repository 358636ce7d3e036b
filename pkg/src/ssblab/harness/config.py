"""Experiment configuration: one YAML document per experiment, validated
into a dataclass and serializable back without loss."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import yaml

KINDS = ("db-check", "metastability-scan", "kt-scan", "goldstone-scan",
         "lr-cone", "survival", "mc-survival")

# fields that must be present (non-None) per experiment kind
_REQUIRED = {
    "db-check": ("beta",),
    "metastability-scan": ("beta",),
    "kt-scan": ("M_max",),
    "goldstone-scan": ("M_max",),
    "lr-cone": ("beta", "t", "v_tildes"),
    "survival": ("beta", "delta_a", "t_max"),
    "mc-survival": ("beta", "delta_m", "trials"),
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    d: int = 1
    L_list: list = field(default_factory=lambda: [4, 6, 8])
    beta: float = None          # "inf" accepted in YAML
    J: float = 1.0
    rate_function: str = "glauber"
    seed: int = 1234
    tolerance: float = 1e-10
    # dressed-state scans
    M_max: int = None
    # cone / dynamics
    t: float = None
    v_tildes: list = None
    delta_a: float = None
    t_max: float = None
    # Monte Carlo
    delta_m: float = None
    trials: int = None
    sweep_cap: int = 50_000
    out: str = None

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; "
                              f"expected one of {KINDS}")
        if not self.L_list:
            raise ConfigError("field 'L_list' must be a nonempty list")
        if self.tolerance <= 0:
            raise ConfigError("field 'tolerance' must be positive")
        if self.d < 1:
            raise ConfigError("field 'd' must be >= 1")
        for name in _REQUIRED[self.kind]:
            if getattr(self, name) is None:
                raise ConfigError(
                    f"experiment kind {self.kind!r} requires field {name!r}")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("field 'trials' must be >= 1")
        return self


def _encode_value(v):
    if isinstance(v, float) and v == float("inf"):
        return "inf"
    return v


def serialize(config: ExperimentConfig) -> str:
    data = {k: _encode_value(v) for k, v in asdict(config).items()
            if v is not None}
    return yaml.safe_dump(data, sort_keys=True)


def parse(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a mapping")
    if "kind" not in data:
        raise ConfigError("config requires field 'kind'")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    if isinstance(data.get("beta"), str):
        if data["beta"].lower() in ("inf", "infinity"):
            data["beta"] = float("inf")
        else:
            raise ConfigError(f"field 'beta' must be a number or 'inf', "
                              f"got {data['beta']!r}")
    return ExperimentConfig(**data).validate()


def load(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return parse(fh.read())


def config_hash(config: ExperimentConfig) -> str:
    import hashlib
    return hashlib.sha256(serialize(config).encode()).hexdigest()[:12]
