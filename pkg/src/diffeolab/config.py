"""Experiment configuration: JSON in, validated dataclass out."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path
from typing import Union

from .chart import FIELDS
from .errors import ConfigError

DEFAULT_TOLERANCES = {
    "equality": 1e-8,        # sup-distance convention for "same map"
    "marker": 1e-9,
    "support": 1e-8,
    "key_identity": 1e-7,
    "certificate": 1e-7,
    "variation": 1e-4,       # relative stopping rule and subadditivity slack
    "lipschitz": 1e-6,
    "kopell_c1": 0.05,
    "group_axioms": 1e-9,
    "flow": 1e-9,
}

# Levels fixed by the dense-grid oracle run; the distortion and Kopell suites
# check regressions against them.
DEFAULT_REFERENCE = {
    "fbar_distortion_level": 4.048,
    "kopell_tau1_floor": 1.4585,
}


@dataclass
class ExperimentConfig:
    field: str = "sinh-sinh"
    basepoint: float = 0.5
    ell: Union[str, list] = "j_plus_1"
    i_max: int = 6
    grid: int = 10**4
    n_max: int = 64
    random_pairs: int = 50
    random_word_length: int = 8
    seed: int = 20240601
    out: str = "diffeolab-out"
    jobs: int = 1
    tolerances: dict = dc_field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    reference: dict = dc_field(default_factory=lambda: dict(DEFAULT_REFERENCE))

    def validate(self) -> "ExperimentConfig":
        if self.field not in FIELDS:
            raise ConfigError(f"unknown field {self.field!r}; known: {list(FIELDS)}")
        if not 0.0 < float(self.basepoint) < 1.0:
            raise ConfigError("basepoint must lie in (0, 1)")
        if not isinstance(self.i_max, int) or self.i_max < 2 or self.i_max % 2:
            raise ConfigError(f"i_max must be an even integer >= 2, got {self.i_max!r}")
        if isinstance(self.ell, str):
            if self.ell != "j_plus_1":
                raise ConfigError(f"unknown ell spec {self.ell!r}")
        else:
            vals = list(self.ell)
            if any((not isinstance(v, int)) or v < 0 or v == 1 for v in vals):
                raise ConfigError("explicit ell entries must be integers, 0 (off) or >= 2")
            if vals and len(vals) < self.i_max // 2:
                raise ConfigError(f"ell list needs {self.i_max // 2} entries for i_max = {self.i_max}")
        if self.grid < 2:
            raise ConfigError("grid must be >= 2")
        if self.n_max < 8:
            raise ConfigError("n_max must be >= 8")
        for k, v in self.tolerances.items():
            if not float(v) > 0.0:
                raise ConfigError(f"tolerance {k} must be positive")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of everything that affects results (output directory excluded)."""
        body = {k: v for k, v in self.to_dict().items() if k not in ("out", "jobs")}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        obj = dict(obj)
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(obj.pop("tolerances", {}))
        ref = dict(DEFAULT_REFERENCE)
        ref.update(obj.pop("reference", {}))
        return cls(**obj, tolerances=tol, reference=ref).validate()

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(obj)
