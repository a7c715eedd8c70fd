"""Reproducible (H_IE, H) corpora and their on-disk interchange format.

A dataset directory holds ``manifest.json`` plus flat little-endian float32
files ``H.f32``, ``H_IE.f32``, ``Y.f32`` (layout ``[sample][row][col][re,im]``,
training samples first) and ``W.f32``, ``Q.f32`` (``[row][col][re,im]``).

Every random draw comes from a ``SeedSequence`` keyed by the master seed and
a counter, so samples can be generated in any order or in parallel and the
result is a pure function of :class:`DatasetConfig`. Matrices are rounded to
single precision when generated, which makes save/load bit-exact.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .channel_model import (ChannelInstance, LoSGeometry, NLoSPath, SystemGeometry,
                            field_boundaries, full_channel)
from .errors import DimensionError, IntegrityError, ParameterError
from .measurement import generate_combiner, generate_pilots, left_right_operators, observe

FORMAT_NAME = "xlmimo-dataset"
FORMAT_VERSION = 1

# spawn_key prefixes for the counter-based seeding scheme
_KEY_W, _KEY_Q, _KEY_TRAIN, _KEY_TEST = 0, 1, 2, 3


@dataclass
class DatasetConfig:
    """Everything that determines a dataset.

    ``P`` defaults to ``n_t // 2`` and ``M_r`` to ``n_r // 2``. ``theta_los``
    of ``None`` draws the LoS departure angle uniformly from
    ``(-angle_range, angle_range)`` per sample; a float fixes it.
    """

    geometry: SystemGeometry = field(default_factory=SystemGeometry.desk)
    L: int = 3
    r: float = 8.0
    snr_db: float = 10.0
    P: int | None = None
    M_r: int | None = None
    n_train: int = 2000
    n_test: int = 500
    master_seed: int = 0
    angle_range: float = math.pi / 3
    scatterer_range: tuple[float, float] = (10.0, 130.0)
    theta_los: float | None = None
    phi_los: float = 0.0

    def __post_init__(self):
        if self.P is None:
            self.P = self.geometry.n_t // 2
        if self.M_r is None:
            self.M_r = self.geometry.n_r // 2
        self.scatterer_range = tuple(float(v) for v in self.scatterer_range)
        self.validate()

    def validate(self):
        ard = field_boundaries(self.geometry).ard
        if not 0 < self.r < ard:
            raise ParameterError(f"r={self.r} m is outside the mixed LoS/NLoS region (0, {ard:.4g})")
        lo, hi = self.scatterer_range
        if not 0 < lo < hi < math.inf:
            raise ParameterError(f"invalid scatterer range {self.scatterer_range}")
        if not 0 < self.angle_range < math.pi / 2:
            raise ParameterError("angle_range must lie in (0, pi/2)")
        if self.L < 0:
            raise ParameterError("path count must be non-negative")
        if self.P < 1:
            raise ParameterError("pilot length must be >= 1")
        if not 1 <= self.M_r <= self.geometry.n_r:
            raise ParameterError(f"M_r={self.M_r} must lie in 1..{self.geometry.n_r}")
        if self.n_train < 1 or self.n_test < 0:
            raise ParameterError("need at least one training sample")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["geometry"] = self.geometry.to_dict()
        d["scatterer_range"] = list(self.scatterer_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        d["geometry"] = SystemGeometry(**d["geometry"])
        d["scatterer_range"] = tuple(d["scatterer_range"])
        return cls(**d)


@dataclass
class Sample:
    H: NDArray[np.complex64]
    H_IE: NDArray[np.complex64]
    Y: NDArray[np.complex64]
    sample_seed: int


@dataclass(frozen=True)
class NormalizationScale:
    """Divisors mapping channel tensors (``c``) and raw observations (``c_y``) into [-1, 1]."""

    c: float
    c_y: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and self.c_y > 0):
            raise ParameterError(f"normalization scales must be positive: c={self.c}, c_y={self.c_y}")


@dataclass
class Dataset:
    config: DatasetConfig
    train: list[Sample]
    test: list[Sample]
    W: NDArray[np.complex128]
    Q: NDArray[np.complex128]
    scale: NormalizationScale

    def split(self, name: str) -> list[Sample]:
        if name not in ("train", "test"):
            raise ValueError(f"unknown split {name!r}")
        return self.train if name == "train" else self.test

    def stack(self, name: str, field_name: str) -> NDArray[np.complex64]:
        """Stack one field (``"H"``, ``"H_IE"`` or ``"Y"``) of a split into one array."""
        samples = self.split(name)
        if not samples:
            shape = (0,) + getattr(self.train[0], field_name).shape
            return np.zeros(shape, dtype=np.complex64)
        return np.stack([getattr(s, field_name) for s in samples])


def _seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=key)


def sample_seed_for(master_seed: int, split: str, index: int) -> int:
    key = _KEY_TRAIN if split == "train" else _KEY_TEST
    return int(_seed(master_seed, key, index).generate_state(1, np.uint64)[0])


def draw_channel(config: DatasetConfig, rng: np.random.Generator) -> ChannelInstance:
    """Draw LoS geometry and ``config.L`` NLoS paths, then build the channel."""
    a = config.angle_range
    lo, hi = config.scatterer_range
    theta = rng.uniform(-a, a) if config.theta_los is None else config.theta_los
    los = LoSGeometry(r=config.r, theta=float(theta), phi=config.phi_los)
    paths = []
    for _ in range(config.L):
        theta_t, theta_r = rng.uniform(-a, a, size=2)
        d_t, d_r = rng.uniform(lo, hi, size=2)
        alpha = complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2)
        paths.append(NLoSPath(float(theta_t), float(theta_r), float(d_t), float(d_r), alpha))
    return full_channel(los, paths, config.geometry)


def measurement_matrices(config: DatasetConfig):
    """The dataset-wide ``(W, Q)`` pair, rounded to single precision."""
    W = generate_combiner(config.M_r, config.geometry.n_r, _seed(config.master_seed, _KEY_W))
    Q = generate_pilots(config.P, config.geometry.n_t, _seed(config.master_seed, _KEY_Q))
    return (W.astype(np.complex64).astype(np.complex128),
            Q.astype(np.complex64).astype(np.complex128))


def make_sample(config: DatasetConfig, sample_seed: int, W, Q, operators=None) -> Sample:
    rng = np.random.default_rng(np.random.SeedSequence(sample_seed, spawn_key=(0,)))
    H = draw_channel(config, rng).H.astype(np.complex64)
    obs = observe(H.astype(np.complex128), W, Q, config.snr_db,
                  np.random.SeedSequence(sample_seed, spawn_key=(1,)))
    G_L, G_R, _ = operators if operators is not None else left_right_operators(W, Q)
    H_IE = G_L @ obs.Y @ G_R
    return Sample(H=H, H_IE=H_IE.astype(np.complex64), Y=obs.Y.astype(np.complex64),
                  sample_seed=sample_seed)


def compute_scale(train: list[Sample]) -> NormalizationScale:
    """Global max-abs of real/imag components over the training split."""
    c = max(max(np.abs(s.H.view(np.float32)).max(), np.abs(s.H_IE.view(np.float32)).max())
            for s in train)
    c_y = max(np.abs(s.Y.view(np.float32)).max() for s in train)
    return NormalizationScale(c=float(c), c_y=float(c_y))


def generate_dataset(config: DatasetConfig) -> Dataset:
    config.validate()
    W, Q = measurement_matrices(config)
    ops = left_right_operators(W, Q)
    train = [make_sample(config, sample_seed_for(config.master_seed, "train", i), W, Q, ops)
             for i in range(config.n_train)]
    test = [make_sample(config, sample_seed_for(config.master_seed, "test", i), W, Q, ops)
            for i in range(config.n_test)]
    return Dataset(config=config, train=train, test=test, W=W, Q=Q, scale=compute_scale(train))


# -- tensor plumbing ---------------------------------------------------------

def to_real_tensor(M) -> NDArray:
    """Stack real and imaginary parts along a new trailing axis of size 2."""
    M = np.asarray(M)
    real_dtype = np.float32 if M.dtype == np.complex64 else np.float64
    return np.stack([M.real, M.imag], axis=-1).astype(real_dtype, copy=False)


def from_real_tensor(t) -> NDArray:
    t = np.asarray(t)
    if t.ndim < 1 or t.shape[-1] != 2:
        raise DimensionError(f"expected trailing dimension 2, got shape {t.shape}")
    out_dtype = np.complex64 if t.dtype == np.float32 else np.complex128
    out = np.empty(t.shape[:-1], dtype=out_dtype)
    out.real = t[..., 0]
    out.imag = t[..., 1]
    return out


def _scale_value(scale) -> float:
    c = scale.c if isinstance(scale, NormalizationScale) else float(scale)
    if not c > 0:
        raise ParameterError(f"normalization scale must be positive, got {c}")
    return c


def normalize(t, scale):
    return t / _scale_value(scale)


def denormalize(t, scale):
    return t * _scale_value(scale)


# -- persistence -------------------------------------------------------------

def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _encode(arr) -> bytes:
    return to_real_tensor(np.asarray(arr, dtype=np.complex64)).astype("<f4").tobytes()


def save_dataset(path, dataset: Dataset) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    samples = dataset.train + dataset.test
    blobs = {
        "H.f32": _encode(np.stack([s.H for s in samples])),
        "H_IE.f32": _encode(np.stack([s.H_IE for s in samples])),
        "Y.f32": _encode(np.stack([s.Y for s in samples])),
        "W.f32": _encode(dataset.W),
        "Q.f32": _encode(dataset.Q),
    }
    cfg = dataset.config
    g = cfg.geometry
    n = len(samples)
    shapes = {
        "H.f32": [n, g.n_r, g.n_t, 2],
        "H_IE.f32": [n, g.n_r, g.n_t, 2],
        "Y.f32": [n, cfg.M_r, cfg.P, 2],
        "W.f32": [cfg.M_r, g.n_r, 2],
        "Q.f32": [g.n_t, cfg.P, 2],
    }
    manifest = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "config": cfg.to_dict(),
        "master_seed": cfg.master_seed,
        "n_train": len(dataset.train),
        "n_test": len(dataset.test),
        "scale": {"c": dataset.scale.c, "c_y": dataset.scale.c_y},
        "dtype": "float32-le",
        "layout": "[sample][row][col][re,im]",
        "files": {name: {"shape": shapes[name], "bytes": len(b), "sha256": _sha256(b)}
                  for name, b in blobs.items()},
        "sample_seeds": {"train": [s.sample_seed for s in dataset.train],
                         "test": [s.sample_seed for s in dataset.test]},
    }
    for name, b in blobs.items():
        (path / name).write_bytes(b)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    return path


def read_manifest(path) -> dict:
    mpath = Path(path) / "manifest.json"
    if not mpath.is_file():
        raise FileNotFoundError(f"no dataset manifest at {mpath}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"unreadable manifest {mpath}: {exc}") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise IntegrityError(f"{mpath} is not a dataset manifest")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise IntegrityError(
            f"dataset format version {manifest.get('format_version')} != {FORMAT_VERSION}")
    return manifest


def _read_blob(path: Path, name: str, meta: dict):
    fpath = path / name
    data = fpath.read_bytes()
    if len(data) != meta["bytes"] or len(data) != 4 * math.prod(meta["shape"]):
        raise IntegrityError(f"{fpath} has {len(data)} bytes, expected {meta['bytes']} (truncated?)")
    if _sha256(data) != meta["sha256"]:
        raise IntegrityError(f"checksum mismatch for {fpath}")
    return from_real_tensor(np.frombuffer(data, dtype="<f4").reshape(meta["shape"]).astype(np.float32))


def load_dataset(path) -> Dataset:
    path = Path(path)
    manifest = read_manifest(path)
    files = manifest["files"]
    arrays = {name: _read_blob(path, name, meta) for name, meta in files.items()}
    config = DatasetConfig.from_dict(manifest["config"])
    n_train = manifest["n_train"]
    seeds = manifest["sample_seeds"]["train"] + manifest["sample_seeds"]["test"]
    samples = [Sample(H=arrays["H.f32"][i], H_IE=arrays["H_IE.f32"][i], Y=arrays["Y.f32"][i],
                      sample_seed=int(seeds[i])) for i in range(len(seeds))]
    return Dataset(
        config=config,
        train=samples[:n_train],
        test=samples[n_train:],
        W=arrays["W.f32"].astype(np.complex128),
        Q=arrays["Q.f32"].astype(np.complex128),
        scale=NormalizationScale(**manifest["scale"]),
    )


def regenerate_from_manifest(path) -> Dataset:
    """Rebuild a dataset from the configuration recorded in its manifest."""
    return generate_dataset(DatasetConfig.from_dict(read_manifest(path)["config"]))
