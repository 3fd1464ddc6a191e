"""Physical system description: two atom groups on a chiral waveguide.

Spacings are dimensionless phases (wave vector times distance) in radians.
User-facing files quote them in units of pi, see :func:`config_from_dict`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, NoDrive

WEAK_DRIVE_LIMIT = 1e-2


class WeakDriveWarning(UserWarning):
    """Drive strong enough that the single-excitation reduction may be inaccurate."""

_JSON_KEYS = {
    "n_left", "n_right", "xi_left_pi", "xi_right_pi", "xi_d_pi", "directionality",
    "gamma", "omega_rabi", "delta", "beta", "drive_mask", "override_weak_drive",
}


@dataclass(frozen=True)
class SystemConfig:
    n_left: int
    n_right: int = 0
    xi_left: float = math.pi
    xi_right: float = math.pi
    xi_d: float = math.pi
    directionality: float = 0.0
    gamma: float = 1.0
    omega_rabi: float = 1e-3
    delta: float = 0.0
    beta: float = 1.0
    drive_mask: tuple[bool, ...] | None = None
    override_weak_drive: bool = field(default=False, compare=False)

    def __post_init__(self):
        if isinstance(self.n_left, bool) or int(self.n_left) != self.n_left or self.n_left < 1:
            raise ConfigError(f"n_left must be a positive integer, got {self.n_left!r}")
        if isinstance(self.n_right, bool) or int(self.n_right) != self.n_right or self.n_right < 0:
            raise ConfigError(f"n_right must be a non-negative integer, got {self.n_right!r}")
        object.__setattr__(self, "n_left", int(self.n_left))
        object.__setattr__(self, "n_right", int(self.n_right))
        for name in ("xi_left", "xi_right", "xi_d"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)
        if not -1.0 <= self.directionality <= 1.0:
            raise ConfigError(f"directionality must lie in [-1, 1], got {self.directionality!r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be positive, got {self.gamma!r}")
        if not (self.omega_rabi > 0 and math.isfinite(self.omega_rabi)):
            raise ConfigError(f"omega_rabi must be positive, got {self.omega_rabi!r}")
        if not math.isfinite(self.delta):
            raise ConfigError(f"delta must be finite, got {self.delta!r}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta!r}")
        if self.drive_mask is not None:
            mask = tuple(bool(b) for b in self.drive_mask)
            if len(mask) != self.n:
                raise ConfigError(f"drive_mask has length {len(mask)}, expected N = {self.n}")
            object.__setattr__(self, "drive_mask", mask)
        if self.omega_rabi / self.gamma > WEAK_DRIVE_LIMIT and not self.override_weak_drive:
            # the linear model stays exact; only comparisons with the oracle lose validity
            warnings.warn(f"omega_rabi/gamma = {self.omega_rabi / self.gamma:g} exceeds the weak-drive "
                          f"limit {WEAK_DRIVE_LIMIT:g}; set override_weak_drive to silence",
                          WeakDriveWarning, stacklevel=3)

    @property
    def n(self) -> int:
        return self.n_left + self.n_right

    @property
    def gamma_left(self) -> float:
        return self.gamma * (1.0 - self.directionality) / 2.0

    @property
    def gamma_right(self) -> float:
        return self.gamma * (1.0 + self.directionality) / 2.0

    @property
    def gamma_ng(self) -> float:
        """Decay rate into non-guided modes implied by ``beta``."""
        return self.gamma * (1.0 - self.beta) / self.beta

    @property
    def spacings(self) -> tuple[float, float, float]:
        return (self.xi_left, self.xi_d, self.xi_right)

    def mask(self) -> np.ndarray:
        if self.drive_mask is None:
            m = np.zeros(self.n, dtype=bool)
            m[: self.n_left] = True
            return m
        return np.array(self.drive_mask, dtype=bool)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = {
            "n_left": self.n_left,
            "n_right": self.n_right,
            "xi_left_pi": self.xi_left / math.pi,
            "xi_right_pi": self.xi_right / math.pi,
            "xi_d_pi": self.xi_d / math.pi,
            "directionality": self.directionality,
            "gamma": self.gamma,
            "omega_rabi": self.omega_rabi,
            "delta": self.delta,
            "beta": self.beta,
        }
        if self.drive_mask is not None:
            d["drive_mask"] = list(self.drive_mask)
        if self.override_weak_drive:
            d["override_weak_drive"] = True
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class DisorderSpec:
    w_phase: float = 0.0
    delta_bar: float = 0.0
    trials: int = 1000
    master_seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.w_phase) and self.w_phase >= 0):
            raise ConfigError(f"w_phase must be finite and >= 0, got {self.w_phase!r}")
        if not (math.isfinite(self.delta_bar) and self.delta_bar >= 0):
            raise ConfigError(f"delta_bar must be finite and >= 0, got {self.delta_bar!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "w_phase_pi": self.w_phase / math.pi,
            "delta_bar": self.delta_bar,
            "trials": self.trials,
            "master_seed": self.master_seed,
        }


def atom_positions(cfg: SystemConfig) -> np.ndarray:
    """Dimensionless positions: left group from 0, right group after a gap ``xi_d``."""
    left = np.arange(cfg.n_left) * cfg.xi_left
    start = (cfg.n_left - 1) * cfg.xi_left + cfg.xi_d
    right = start + np.arange(cfg.n_right) * cfg.xi_right
    return np.concatenate([left, right])


def drive_vector(cfg: SystemConfig) -> np.ndarray:
    mask = cfg.mask()
    if not mask.any():
        raise NoDrive("drive_mask selects no atom; the steady state is trivially zero")
    return np.where(mask, cfg.omega_rabi, 0.0).astype(complex)


def config_from_dict(data: dict[str, Any], *, override_weak_drive: bool = False) -> SystemConfig:
    """Build a config from the JSON schema (spacings in units of pi)."""
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = sorted(set(data) - _JSON_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    if "n_left" not in data:
        raise ConfigError("missing required key 'n_left'")

    def num(key, default):
        v = data.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"key '{key}': expected a number, got {v!r}")
        return v

    def integer(key, default):
        v = data.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"key '{key}': expected an integer, got {v!r}")
        return v

    mask = data.get("drive_mask")
    if mask is not None and (not isinstance(mask, list) or not all(isinstance(b, bool) for b in mask)):
        raise ConfigError("key 'drive_mask': expected an array of booleans")
    return SystemConfig(
        n_left=integer("n_left", None),
        n_right=integer("n_right", 0),
        xi_left=num("xi_left_pi", 1.0) * math.pi,
        xi_right=num("xi_right_pi", 1.0) * math.pi,
        xi_d=num("xi_d_pi", 1.0) * math.pi,
        directionality=num("directionality", 0.0),
        gamma=num("gamma", 1.0),
        omega_rabi=num("omega_rabi", 1e-3),
        delta=num("delta", 0.0),
        beta=num("beta", 1.0),
        drive_mask=tuple(mask) if mask is not None else None,
        override_weak_drive=bool(data.get("override_weak_drive", False)) or override_weak_drive,
    )


def load_config(path: str | Path, *, override_weak_drive: bool = False) -> SystemConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(data, override_weak_drive=override_weak_drive)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
