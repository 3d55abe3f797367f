"""Run configuration: one JSON file drives every subcommand."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bound import Mode, ThresholdVariant
from .errors import ConfigError
from .profiles import TWO_PI

DEFAULTS = {
    "profile": {"family": "power", "c": 1.0, "alpha": 0.5, "theta_min": TWO_PI},
    "arms": {"offsets": [0.0]},
    "geometry": {
        "theta_max": 2000.0,
        "margin": 0.05,
        "grid_tol": 1e-6,
        "check_assumption": None,
        "area_samples": 40000,
        "classify_theta_max": 1e6,
    },
    "bound": {
        "sigma": [1.5],
        "Lambda": [20.0, 50.0, 100.0],
        "threshold_variant": ThresholdVariant.CONSERVATIVE.value,
        "mode": None,
    },
    "eigensolver": {
        "h": [0.04, 0.02],
        "R_max": 4.0,
        "cutoff_factor": 1.2,
        "extrapolate": True,
    },
    "horn": {
        "kind": "exponential",
        "scale": 1.0,
        "rate": 1.0,
        "length": None,
        "lambda": [500.0, 1000.0],
        "h": None,
    },
}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and key != "profile":
            if not isinstance(val, dict):
                raise ConfigError(f"config key {path + key!r} must be a mapping")
            out[key] = _merge(base[key], val, path + key + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _floats(xs, name):
    if isinstance(xs, (int, float)):
        xs = [xs]
    try:
        return [float(x) for x in xs]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number or list of numbers") from exc


@dataclass
class RunConfig:
    """Validated, fully-defaulted configuration.

    ``data`` is the normalized dictionary; :meth:`to_dict` returns it, so
    ``RunConfig.from_dict(d).to_dict() == normalize(d)``.
    """

    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        data = _merge(DEFAULTS, raw)
        if "profile" in raw:
            prof = dict(raw["profile"])
            prof.setdefault("theta_min", TWO_PI)
            data["profile"] = prof
        cls._normalize(data)
        return cls(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    @staticmethod
    def _normalize(d):
        fam = d["profile"].get("family")
        if fam not in ("power", "archimedean", "tabulated"):
            raise ConfigError(f"unknown profile family {fam!r}")
        offs = _floats(d["arms"]["offsets"], "arms.offsets")
        if not offs or offs[0] != 0.0:
            raise ConfigError("arm offsets must start at 0")
        if any(b <= a for a, b in zip(offs, offs[1:])) or offs[-1] >= TWO_PI:
            raise ConfigError("arm offsets must satisfy 0 = t0 < t1 < ... < t_{m-1} < 2 pi")
        d["arms"]["offsets"] = offs

        b = d["bound"]
        b["sigma"] = _floats(b["sigma"], "bound.sigma")
        b["Lambda"] = _floats(b["Lambda"], "bound.Lambda")
        if any(x <= 0 for x in b["Lambda"]) or any(y <= x for x, y in zip(b["Lambda"], b["Lambda"][1:])):
            raise ConfigError("bound.Lambda must be positive and strictly ascending")
        if any(s < 0.5 for s in b["sigma"]):
            raise ConfigError("bound.sigma values must be >= 1/2")
        try:
            b["threshold_variant"] = ThresholdVariant(b["threshold_variant"]).value
            if b["mode"] is not None:
                b["mode"] = Mode(b["mode"]).value
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

        e = d["eigensolver"]
        e["h"] = _floats(e["h"], "eigensolver.h")
        if any(h <= 0 for h in e["h"]):
            raise ConfigError("eigensolver.h must be positive")
        if float(e["R_max"]) <= 0 or float(e["cutoff_factor"]) < 1:
            raise ConfigError("eigensolver.R_max must be positive and cutoff_factor >= 1")
        e["R_max"], e["cutoff_factor"] = float(e["R_max"]), float(e["cutoff_factor"])

        hcfg = d["horn"]
        hcfg["lambda"] = _floats(hcfg["lambda"], "horn.lambda")

        g = d["geometry"]
        for key in ("theta_max", "margin", "grid_tol", "classify_theta_max"):
            g[key] = float(g[key])
        g["area_samples"] = int(g["area_samples"])
        if not 0 <= g["margin"] < 1:
            raise ConfigError("geometry.margin must lie in [0, 1)")

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def dumps(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2, ensure_ascii=False)

    def __getitem__(self, key):
        return self.data[key]


def normalize(raw: dict) -> dict:
    return RunConfig.from_dict(raw).to_dict()


def finite_or_none(x):
    return None if x is None or not np.isfinite(x) else float(x)
