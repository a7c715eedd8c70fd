"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment. Keys:

=================  ===========================================================
geometry           ``preset`` (desk | full), ``n_t``, ``n_r``, ``f_c``,
                   ``wavelength``, ``d``
dataset            ``L``, ``r``, ``snr_db``, ``P``, ``M_r``, ``n_train``,
                   ``n_test``, ``master_seed``, ``angle_range``,
                   ``scatterer_min``, ``scatterer_max``, ``theta_los``,
                   ``phi_los``
training           ``eta``, ``lr_g``, ``lr_d``, ``batch_size``, ``epochs``,
                   ``seed``, ``non_saturating``, ``max_iterations``
network            ``input_mode`` (ie | raw), ``width``, ``depth``
evaluation         ``omp_oversample``
=================  ===========================================================
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .channel_model import SystemGeometry
from .dataset import DatasetConfig
from .errors import ConfigError
from .gan.arch import NetworkSpec
from .gan.training import TrainConfig

PRESETS = {
    "desk": dict(n_t=64, n_r=32, wavelength=0.006, r=8.0, n_train=2000, n_test=500),
    "full": dict(n_t=256, n_r=128, wavelength=0.006, r=40.0, n_train=4000, n_test=1000),
}

_GEOMETRY = {"n_t": int, "n_r": int, "f_c": float, "wavelength": float, "d": float}
_DATASET = {"L": int, "r": float, "snr_db": float, "P": int, "M_r": int, "n_train": int,
            "n_test": int, "master_seed": int, "angle_range": float,
            "theta_los": float, "phi_los": float}
_SCATTER = {"scatterer_min": float, "scatterer_max": float}
_TRAIN = {"eta": float, "lr_g": float, "lr_d": float, "batch_size": int, "epochs": int,
          "seed": int, "non_saturating": bool, "max_iterations": int}
_NETWORK = {"input_mode": str, "width": int, "depth": int}
_EVAL = {"omp_oversample": int}
KEYS = {"preset": str, **_GEOMETRY, **_DATASET, **_SCATTER, **_TRAIN, **_NETWORK, **_EVAL}


@dataclass
class RunConfig:
    dataset: DatasetConfig
    train: TrainConfig
    input_mode: str = "ie"
    width: int = 64
    depth: int = 5
    omp_oversample: int = 1
    values: dict = field(default_factory=dict)

    def network_spec(self, dataset: DatasetConfig | None = None) -> NetworkSpec:
        ds = dataset or self.dataset
        g = ds.geometry
        in_shape = (ds.M_r, ds.P) if self.input_mode == "raw" else None
        return NetworkSpec.create((g.n_r, g.n_t), input_mode=self.input_mode,
                                  in_shape=in_shape, width=self.width, depth=self.depth)


def _convert(key: str, raw: str):
    kind = KEYS[key]
    text = raw.strip()
    if text.lower() in ("none", "null", ""):
        if key in ("P", "M_r", "theta_los", "max_iterations", "d"):
            return None
        raise ConfigError(f"{key} requires a value")
    try:
        if kind is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_text(text: str) -> dict:
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        values.update(parse_assignments([f"{key}={raw}"], where=f"line {n}: "))
    return values


def parse_assignments(items, where: str = "") -> dict:
    values = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"{where}expected key=value, got {item!r}")
        key, raw = (s.strip() for s in item.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{where}unknown key {key!r}")
        values[key] = _convert(key, raw)
    return values


def load_text(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_text(text)


def build(values: dict) -> RunConfig:
    """Resolve preset defaults and explicit values into concrete configs."""
    preset = values.get("preset", "desk")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    merged = {**PRESETS[preset], **{k: v for k, v in values.items() if k != "preset"}}
    if merged.get("input_mode", "ie") not in ("ie", "raw"):
        raise ConfigError("input_mode must be 'ie' or 'raw'")
    try:
        geometry = SystemGeometry(**{k: merged[k] for k in _GEOMETRY if k in merged})
        ds_kw = {k: merged[k] for k in _DATASET if k in merged}
        lo = merged.get("scatterer_min", 10.0)
        hi = merged.get("scatterer_max", 130.0)
        dataset = DatasetConfig(geometry=geometry, scatterer_range=(lo, hi), **ds_kw)
        train = TrainConfig(**{k: merged[k] for k in _TRAIN if k in merged})
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(dataset=dataset, train=train, values=dict(values),
                     **{k: merged[k] for k in (*_NETWORK, *_EVAL) if k in merged})
