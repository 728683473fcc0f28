"""Scenario configuration."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .beamforming import PRECODERS, SCHEDULE_RULES, TIE_BREAKS
from .errors import ConfigError
from .estimation import NOISE_CONVENTIONS
from .geometry import ANGLE_MODELS
from .hardware import PILOT_VARIANTS

METHODS = ("svd-perfect-ps", "svd-impaired", "codebook-baseline", "algorithm1")


@dataclass(frozen=True)
class ScenarioConfig:
    """Every parameter of one simulated experiment.

    ``bits_bs``/``bits_ue`` of ``None`` mean continuous phase shifters;
    ``bits`` sets both at once when loading from a mapping. The SNR is
    ``rho / sigma_z^2`` with ``sigma_z^2 = 1``.
    """

    n_bs: int = 128
    n_ue: int = 4
    n_users: int = 10
    bits_bs: int | None = 3
    bits_ue: int | None = 3
    rician_factor: float = 30.0
    los_only: bool = False
    n_paths: int = 4
    sigma_delta: float = 0.1
    sigma_alpha: float = 0.1
    snr_db: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0)
    trials: int = 1000
    pilot_cycles: int = 1
    pilot_variant: str = "ones-padded"
    method: str = "svd-impaired"
    precoder: str = "zf"
    seed: int = 0
    angle_model: str = "spatial"
    schedule_rule: str = "greedy"
    tie_break: str = "lowest"
    noise_convention: str = "nominal"
    remove_mean: bool = False
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        self.validate()

    def validate(self) -> None:
        problems = []
        for name in ("n_bs", "n_ue", "n_users", "trials", "pilot_cycles"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                problems.append(f"{name} must be a positive integer (got {value!r})")
        for name in ("bits_bs", "bits_ue"):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, int) or value < 1):
                problems.append(f"{name} must be a positive integer or null (got {value!r})")
        if not isinstance(self.n_paths, int) or self.n_paths < 0:
            problems.append(f"n_paths must be a non-negative integer (got {self.n_paths!r})")
        elif self.n_paths == 0 and not self.los_only and math.isfinite(self.rician_factor):
            problems.append("n_paths must be >= 1 unless los_only is set")
        if not self.rician_factor >= 0:
            problems.append(f"rician_factor must be >= 0 (got {self.rician_factor!r})")
        for name in ("sigma_delta", "sigma_alpha"):
            if not getattr(self, name) >= 0:
                problems.append(f"{name} must be >= 0")
        if not self.snr_db:
            problems.append("snr_db must list at least one SNR point")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            problems.append("seed must be an integer in [0, 2**64)")
        for name, allowed in (("method", METHODS), ("precoder", PRECODERS),
                              ("pilot_variant", PILOT_VARIANTS), ("angle_model", ANGLE_MODELS),
                              ("schedule_rule", SCHEDULE_RULES), ("tie_break", TIE_BREAKS),
                              ("noise_convention", NOISE_CONVENTIONS)):
            if getattr(self, name) not in allowed:
                problems.append(f"{name} must be one of {allowed} (got {getattr(self, name)!r})")
        if self.method == "algorithm1" and isinstance(self.pilot_cycles, int) and isinstance(self.n_users, int) \
                and isinstance(self.n_bs, int) and self.pilot_cycles * self.n_users > self.n_bs:
            problems.append(f"pilot_cycles * n_users = {self.pilot_cycles * self.n_users} exceeds n_bs = {self.n_bs}")
        if problems:
            raise ConfigError("invalid scenario: " + "; ".join(problems))

    @property
    def impaired(self) -> bool:
        return self.method != "svd-perfect-ps" and (self.sigma_delta > 0 or self.sigma_alpha > 0)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_db"] = list(self.snr_db)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        if "bits" in data:
            bits = data.pop("bits")
            data.setdefault("bits_bs", bits)
            data.setdefault("bits_ue", bits)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        if isinstance(data.get("snr_db"), (int, float)):
            data["snr_db"] = [data["snr_db"]]
        if data.get("rician_factor") in ("inf", "infinity"):
            data["rician_factor"] = math.inf
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"scenario file {path} must hold a JSON object")
        return cls.from_dict(data)
