"""Parameter sweeps comparing the GAN estimator with the IE input and OMP.

Each point generates a dataset, trains (or reuses) an estimator and scores
three methods on the full test split. Rows are written to one tab-separated
file per distance group so a report can be re-rendered from disk alone.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import AngularCodebook, far_field_omp
from .channel_model import field_boundaries
from .config import RunConfig
from .dataset import Dataset, generate_dataset
from .errors import ParameterError, TrainingAborted
from .gan.training import TrainState, estimate, train
from .measurement import Observation
from .metrics import per_sample_nmse, to_db

log = logging.getLogger(__name__)

AXES = ("distance_r", "snr_db", "pilot_length", "eta")
METHOD_GAN = {"ie": "ie_pix2pix", "raw": "raw_pix2pix"}
METHOD_IE = "ie_only"
METHOD_OMP = "far_field_omp"


@dataclass(frozen=True)
class ResultRow:
    axis_value: float
    method: str
    nmse_linear: float
    nmse_db: float
    n_test: int
    seed: int
    distance: float = float("nan")  # group key, stored in the rows file name

    @classmethod
    def from_linear(cls, axis_value, method, nmse_linear, n_test, seed,
                    distance=float("nan")) -> "ResultRow":
        if not nmse_linear >= 0:
            raise ParameterError(f"NMSE must be non-negative, got {nmse_linear}")
        return cls(float(axis_value), method, float(nmse_linear), to_db(nmse_linear),
                   int(n_test), int(seed), float(distance))


@dataclass
class SweepSpec:
    """A one-dimensional sweep over ``axis`` at every distance in ``distances``.

    ``seeds`` re-seed both the dataset and the training run. With
    ``retrain=False`` one estimator per (distance, seed) is trained on the
    base configuration and reused at every axis value.
    """

    axis: str
    values: list[float]
    base: RunConfig
    seeds: list[int] = field(default_factory=lambda: [0])
    retrain: bool = True
    distances: list[float] | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ParameterError(f"unknown axis {self.axis!r}; choose from {AXES}")
        if not self.values:
            raise ParameterError("sweep needs at least one value")
        if not self.seeds:
            raise ParameterError("sweep needs at least one seed")
        ard = field_boundaries(self.base.dataset.geometry).ard
        radii = list(self.values) if self.axis == "distance_r" else list(self.distances or [])
        for r in radii:
            if not 0 < r < ard:
                raise ParameterError(f"distance {r} m is not inside (0, ARD={ard:.4g} m)")
        if self.axis == "pilot_length":
            for v in self.values:
                if int(v) != v or v < 1:
                    raise ParameterError(f"pilot length must be a positive integer, got {v}")

    def groups(self) -> list[float]:
        """Distance groups; a distance sweep is a single group at its own values."""
        if self.axis == "distance_r":
            return [self.base.dataset.r]
        return list(self.distances) if self.distances else [self.base.dataset.r]

    def point(self, value: float | None, r: float, seed: int) -> RunConfig:
        """Concrete configuration for one (value, distance, seed) point."""
        ds = dataclasses.replace(self.base.dataset, r=float(r), master_seed=int(seed))
        tr = dataclasses.replace(self.base.train, seed=int(seed))
        if value is not None:
            if self.axis == "distance_r":
                ds = dataclasses.replace(ds, r=float(value))
            elif self.axis == "snr_db":
                ds = dataclasses.replace(ds, snr_db=float(value))
            elif self.axis == "pilot_length":
                ds = dataclasses.replace(ds, P=int(value))
            else:
                tr = dataclasses.replace(tr, eta=float(value))
        return dataclasses.replace(self.base, dataset=ds, train=tr)

    def to_dict(self) -> dict:
        return {"axis": self.axis, "values": list(self.values), "seeds": list(self.seeds),
                "retrain": self.retrain, "distances": self.groups(),
                "base": {"dataset": self.base.dataset.to_dict(),
                         "train": dataclasses.asdict(self.base.train),
                         "input_mode": self.base.input_mode, "width": self.base.width,
                         "depth": self.base.depth, "omp_oversample": self.base.omp_oversample}}


def evaluate(dataset: Dataset, state: TrainState, oversample: int = 1) -> dict[str, np.ndarray]:
    """Per-sample NMSE of the GAN, the IE input and OMP on the test split."""
    H = dataset.stack("test", "H")
    H_ie = dataset.stack("test", "H_IE")
    field_name = "H_IE" if state.spec.input_mode == "ie" else "Y"
    H_gan = estimate(dataset.stack("test", field_name), state)
    cfg = dataset.config
    codebook = AngularCodebook.for_geometry(cfg.geometry, oversample)
    W = dataset.W.astype(np.complex128)
    Q = dataset.Q.astype(np.complex128)
    H_omp = np.stack([
        far_field_omp(Observation(Q=Q, W=W, Y=s.Y.astype(np.complex128), snr_db=cfg.snr_db,
                                  sigma2=float("nan")), codebook, cfg.L)
        for s in dataset.test])
    return {METHOD_GAN[state.spec.input_mode]: per_sample_nmse(H, H_gan),
            METHOD_IE: per_sample_nmse(H, H_ie),
            METHOD_OMP: per_sample_nmse(H, H_omp)}


def _rows(value, scores: dict[str, np.ndarray], seed: int, r: float) -> list[ResultRow]:
    return [ResultRow.from_linear(value, m, float(np.mean(v)), len(v), seed, r)
            for m, v in scores.items()]


def run_sweep(spec: SweepSpec, out_dir=None, checkpoint_dir=None) -> list[ResultRow]:
    """Run every point and return one row per (distance, seed, value, method).

    When ``out_dir`` is given, rows, the sweep description, a summary table
    and a plot are written there. If training aborts, the rows finished so
    far are still written before the exception propagates.
    """
    from .report import render_report, write_rows, write_sweep_manifest

    out = Path(out_dir) if out_dir is not None else None
    results: dict[float, list[ResultRow]] = {r: [] for r in spec.groups()}

    def flush():
        if out is None:
            return
        write_sweep_manifest(out, spec)
        for r, rows in results.items():
            write_rows(out, r, rows)

    try:
        for r in spec.groups():
            for seed in spec.seeds:
                shared = None
                if not spec.retrain:
                    base = spec.point(None, r, seed)
                    shared = train(generate_dataset(base.dataset), base.network_spec(),
                                   base.train, dump_path=_dump(checkpoint_dir, r, seed, "base"))
                for value in spec.values:
                    cfg = spec.point(value, r, seed)
                    log.info("sweep %s=%s r=%s seed=%s", spec.axis, value, r, seed)
                    dataset = generate_dataset(cfg.dataset)
                    state = shared
                    if state is None or state.spec.in_shape != cfg.network_spec().in_shape:
                        state = train(dataset, cfg.network_spec(), cfg.train,
                                      dump_path=_dump(checkpoint_dir, r, seed, value))
                    scores = evaluate(dataset, state, cfg.omp_oversample)
                    results[r].extend(_rows(value, scores, seed, r))
    except TrainingAborted:
        flush()
        raise
    flush()
    if out is not None:
        render_report(out)
    return [row for rows in results.values() for row in rows]


def _dump(checkpoint_dir, r, seed, tag):
    if checkpoint_dir is None:
        return None
    return Path(checkpoint_dir) / f"aborted_r{r:g}_seed{seed}_{tag}"
