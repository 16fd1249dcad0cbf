"""Training configuration with the published hyperparameters as defaults."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields

from .errors import ConfigInvalid

OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class TrainConfig:
    # published values
    tau: float = 1.0
    alpha: float = 0.5
    lambda_hand: float = 5.0
    lambda_face: float = 2.0
    beta: float = 1e-4
    # desk-scale dimensions
    n: int = 32
    m: int = 32
    d: int = 16
    b: int = 2
    f: int = 4
    h: int = 8
    w: int = 8
    c: int = 4
    d_face: int = 16
    # diffusion and optimisation
    T: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02
    steps: int = 300
    lr: float = 0.05
    optimizer: str = "sgd"
    seed: int = 7
    latent_init_scale: float = 0.02
    eval_t: int = 50
    # ablation switches
    use_ris: bool = True
    use_quantize: bool = True
    use_ortho: bool = True
    use_id: bool = True
    # variants of underspecified choices
    mask_combine: str = "product"
    attn_projections: bool = False
    ortho_normalize: bool = False
    weighted_mean: bool = False
    id_two_layer: bool = False

    def __post_init__(self):
        problems = []
        if not self.tau > 0:
            problems.append("tau must be > 0")
        if not 0 <= self.alpha <= 1:
            problems.append("alpha must lie in [0, 1]")
        if self.lambda_hand <= 0 or self.lambda_face <= 0:
            problems.append("amplification factors must be > 0")
        if self.beta < 0:
            problems.append("beta must be >= 0")
        for name in ("n", "m", "d", "b", "f", "h", "w", "c", "d_face", "T"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.n < 2 or self.m < 2:
            problems.append("n and m must be >= 2 for the orthogonality loss")
        if self.steps < 0 or self.lr < 0:
            problems.append("steps and lr must be >= 0")
        if not 0 < self.beta_start <= self.beta_end < 1:
            problems.append("need 0 < beta_start <= beta_end < 1")
        if not 0 <= self.eval_t < self.T:
            problems.append("eval_t must lie in [0, T)")
        if self.optimizer not in OPTIMIZERS:
            problems.append(f"optimizer must be one of {OPTIMIZERS}")
        if self.mask_combine not in ("product", "union"):
            problems.append("mask_combine must be 'product' or 'union'")
        if problems:
            raise ConfigInvalid("; ".join(problems))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def replace(self, **changes) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, raw: dict) -> TrainConfig:
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {', '.join(unknown)}")
        values = {}
        for key, val in raw.items():
            values[key] = _coerce(known[key], val)
        return cls(**values)

    @classmethod
    def from_file(cls, path, **overrides) -> TrainConfig:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except ValueError as exc:
            raise ConfigInvalid(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigInvalid("config file must hold a flat JSON object")
        raw.update(overrides)
        return cls.from_dict(raw)


def _coerce(field, val):
    kind = field.type if isinstance(field.type, str) else field.type.__name__
    try:
        if kind == "bool":
            if isinstance(val, str):
                low = val.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(val)
                return low in ("true", "1", "yes")
            return bool(val)
        if kind == "int":
            if isinstance(val, float) and not val.is_integer():
                raise ValueError(val)
            return int(val)
        if kind == "float":
            return float(val)
        return str(val)
    except (TypeError, ValueError):
        raise ConfigInvalid(f"bad value for {field.name}: {val!r}") from None


FULL_SCALE = dict(d=512, n=512, m=512, f=16)
