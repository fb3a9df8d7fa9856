"""Run configuration: dotted ``key = value`` files, overrides, and lineage hashes."""

import dataclasses
import hashlib
import json
from pathlib import Path

from .data.cohort import CohortSpec
from .errors import ValidationError
from .fusion import FusionConfig

_COHORT = {f.name: f.default for f in dataclasses.fields(CohortSpec) if f.name != "seed"}
_FUSION = {f.name: f.default for f in dataclasses.fields(FusionConfig) if f.name != "threshold"}

DEFAULTS = {
    "seed": 0,
    "threshold": 0.5,
    "paths.data": "data",
    "paths.artifacts": "artifacts",
    "paths.reports": "reports",
    **{f"cohort.{k}": v for k, v in _COHORT.items()},
    "holdout.n_homes": 10,
    "holdout.days_per_home": 30,
    "holdout.labelled_fraction": 0.15,
    "holdout.home_prefix": "holdout",
    "selfsup.ae_epochs": 10,
    "selfsup.transform_epochs": 30,
    "selfsup.holdout_fraction": 0.1,
    "selfsup.learning_rate": 1e-3,
    "selfsup.batch_size": 64,
    **{f"fusion.{k}": v for k, v in _FUSION.items()},
    "classifiers.knn_k": 5,
    "classifiers.svm_c": 10.0,
    "classifiers.gp_noise": 1e-3,
    "baselines.rf_trees": 166,
    "baselines.lstm_epochs": 30,
    "eval.k": 10,
    "eval.models": "proposed,supervised-only,random-forest,lstm",
}

# keys feeding each stage; a stage's hash covers its own keys and all upstream ones
STAGE_KEYS = {
    "simulate": ("seed", "cohort.", "holdout."),
    "pretrain": ("selfsup.ae_epochs",),
    "train-selfsup": ("selfsup.",),
    "train-ensemble": ("fusion.", "classifiers.", "threshold"),
    "evaluate": ("eval.", "baselines."),
}
STAGE_ORDER = tuple(STAGE_KEYS)
PRESETS = Path(__file__).parent / "configs"


def _coerce(key, raw):
    default = DEFAULTS[key]
    if not isinstance(raw, str):
        value = raw
    elif isinstance(default, bool):
        if raw.lower() not in ("true", "false"):
            raise ValidationError(f"{key}: expected true/false, got {raw!r}")
        value = raw.lower() == "true"
    elif isinstance(default, int):
        try:
            value = int(raw)
        except ValueError:
            raise ValidationError(f"{key}: expected an integer, got {raw!r}") from None
    elif isinstance(default, float):
        try:
            value = float(raw)
        except ValueError:
            raise ValidationError(f"{key}: expected a number, got {raw!r}") from None
    else:
        value = raw
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if type(value) is not type(default):
        raise ValidationError(f"{key}: expected {type(default).__name__}, got {type(value).__name__}")
    return value


def parse_config_text(text):
    """``key = value`` lines; ``#`` starts a comment; blank lines ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = raw
    return values


@dataclasses.dataclass(frozen=True)
class RunConfig:
    values: dict

    @classmethod
    def build(cls, overrides=None):
        values = dict(DEFAULTS)
        for key, raw in (overrides or {}).items():
            if key not in DEFAULTS:
                raise ValidationError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw)
        config = cls(values)
        config.cohort_spec()  # validates the cohort section early
        return config

    @classmethod
    def load(cls, path=None, overrides=None):
        """Read ``path`` (a file, or the name of a shipped preset such as ``tiny``) plus overrides."""
        merged = {}
        if path is not None:
            preset = PRESETS / f"{path}.cfg"
            if not Path(path).exists() and preset.exists():
                path = preset
            try:
                merged.update(parse_config_text(Path(path).read_text()))
            except OSError as exc:
                raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
        merged.update(overrides or {})
        return cls.build(merged)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self):
        return self.values["seed"]

    def section(self, prefix):
        return {k[len(prefix) + 1:]: v for k, v in self.values.items() if k.startswith(prefix + ".")}

    def cohort_spec(self):
        return CohortSpec(seed=self.seed, **self.section("cohort"))

    def holdout_spec(self):
        """Same generator settings as the training cohort, disjoint home ids and its own seed stream."""
        base = self.section("cohort")
        base.update(self.section("holdout"))
        return CohortSpec(seed=self.seed + 1_000_003, **base)

    def fusion_config(self):
        return FusionConfig(threshold=self.values["threshold"], **self.section("fusion"))

    def classifier_options(self):
        c = self.section("classifiers")
        return {"knn_k": c["knn_k"], "svm_c": c["svm_c"], "gp_noise": c["gp_noise"]}

    def models(self):
        return tuple(m.strip() for m in self.values["eval.models"].split(",") if m.strip())

    def stage_hash(self, stage):
        """SHA-256 prefix over the keys feeding ``stage`` and every earlier stage (paths excluded)."""
        if stage not in STAGE_KEYS:
            raise ValidationError(f"unknown stage {stage!r}")
        prefixes = sum((STAGE_KEYS[s] for s in STAGE_ORDER[:STAGE_ORDER.index(stage) + 1]), ())
        chosen = {k: v for k, v in self.values.items()
                  if any(k == p or (p.endswith(".") and k.startswith(p)) for p in prefixes)}
        blob = json.dumps(chosen, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def dumps(self):
        return "".join(f"{k} = {self.values[k]}\n" for k in sorted(self.values))
