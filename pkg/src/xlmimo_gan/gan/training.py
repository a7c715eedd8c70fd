"""Alternating adversarial training, inference and checkpoints.

Each iteration first updates the generator against the adversarial + L1
objective with the discriminator frozen, then draws a fresh minibatch and
updates the discriminator. Minibatch order comes from a seeded numpy
generator and weights from seeded torch generators, so two runs with the
same seed and data produce identical loss histories.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..dataset import Dataset, NormalizationScale
from ..errors import DimensionError, IntegrityError, ParameterError, TrainingAborted
from .arch import NetworkSpec
from .losses import adversarial_generator_term, discriminator_loss, l1_term
from .networks import Discriminator, Generator

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "xlmimo-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    eta: float = 100.0
    lr_g: float = 2e-5
    lr_d: float = 2e-4
    batch_size: int = 1
    epochs: int = 100
    optimizer: str = "rmsprop"
    seed: int = 0
    non_saturating: bool = False
    rmsprop_alpha: float = 0.9
    rmsprop_eps: float = 1e-7
    max_iterations: int | None = None

    def __post_init__(self):
        if self.eta < 0:
            raise ParameterError("eta must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ParameterError("batch_size must be >= 1 and epochs >= 0")
        if self.optimizer != "rmsprop":
            raise ParameterError(f"unsupported optimizer {self.optimizer!r}")


@dataclass
class TrainState:
    spec: NetworkSpec
    config: TrainConfig
    scale: NormalizationScale
    generator: Generator
    discriminator: Discriminator
    iteration: int = 0
    history: dict[str, list[float]] = field(
        default_factory=lambda: {"g_loss": [], "l1": [], "d_loss": []})


def init_state(spec: NetworkSpec, config: TrainConfig, scale: NormalizationScale) -> TrainState:
    gen = Generator(spec, seed=2 * config.seed)
    disc = Discriminator(spec, seed=2 * config.seed + 1)
    return TrainState(spec=spec, config=config, scale=scale, generator=gen, discriminator=disc)


def to_nchw(batch, c: float) -> torch.Tensor:
    """Complex (B, h, w) array -> normalized float32 tensor (B, 2, h, w)."""
    batch = np.asarray(batch)
    t = np.stack([batch.real, batch.imag], axis=1) / c
    return torch.from_numpy(np.ascontiguousarray(t, dtype=np.float32))


def from_nchw(t: torch.Tensor, c: float) -> np.ndarray:
    a = t.detach().cpu().numpy().astype(np.float64) * c
    return a[:, 0] + 1j * a[:, 1]


def conditional_scale(spec: NetworkSpec, scale: NormalizationScale) -> float:
    return scale.c if spec.input_mode == "ie" else scale.c_y


def training_tensors(dataset: Dataset, spec: NetworkSpec, split: str = "train"):
    field_name = "H_IE" if spec.input_mode == "ie" else "Y"
    cond = to_nchw(dataset.stack(split, field_name), conditional_scale(spec, dataset.scale))
    truth = to_nchw(dataset.stack(split, "H"), dataset.scale.c)
    return cond, truth


class Trainer:
    def __init__(self, state: TrainState, cond: torch.Tensor, truth: torch.Tensor):
        if len(cond) == 0 or len(cond) != len(truth):
            raise ParameterError("training needs a non-empty set of (conditional, truth) pairs")
        self.state = state
        self.cond = cond
        self.truth = truth
        cfg = state.config
        kw = dict(alpha=cfg.rmsprop_alpha, eps=cfg.rmsprop_eps)
        self.opt_g = torch.optim.RMSprop(state.generator.parameters(), lr=cfg.lr_g, **kw)
        self.opt_d = torch.optim.RMSprop(state.discriminator.parameters(), lr=cfg.lr_d, **kw)
        self.rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(101,)))

    def generator_step(self, idx) -> tuple[float, float]:
        st = self.state
        G, D = st.generator, st.discriminator
        G.train()
        D.train()
        x, y = self.cond[idx], self.truth[idx]
        D.requires_grad_(False)
        try:
            fake = G(x)
            adv = adversarial_generator_term(D.decision(x, fake), st.config.non_saturating)
            l1 = l1_term(fake, y)
            loss = adv + st.config.eta * l1
            self.opt_g.zero_grad(set_to_none=True)
            loss.backward()
            self.opt_g.step()
        finally:
            D.requires_grad_(True)
        return loss.item(), l1.item()

    def discriminator_step(self, idx) -> float:
        st = self.state
        G, D = st.generator, st.discriminator
        D.train()
        x, y = self.cond[idx], self.truth[idx]
        with torch.no_grad():
            G.train()
            fake = G(x)
        objective = discriminator_loss(D.decision(x, y), D.decision(x, fake))
        self.opt_d.zero_grad(set_to_none=True)
        (-objective).backward()
        self.opt_d.step()
        return objective.item()

    def iterate(self, idx_g, idx_d):
        g_loss, l1 = self.generator_step(idx_g)
        d_loss = self.discriminator_step(idx_d)
        st = self.state
        st.iteration += 1
        st.history["g_loss"].append(g_loss)
        st.history["l1"].append(l1)
        st.history["d_loss"].append(d_loss)
        if not all(math.isfinite(v) for v in (g_loss, l1, d_loss)):
            raise TrainingAborted(
                f"non-finite loss at iteration {st.iteration}: "
                f"g={g_loss}, l1={l1}, d={d_loss}", state=st)

    def run(self, epochs: int | None = None) -> TrainState:
        cfg = self.state.config
        epochs = cfg.epochs if epochs is None else epochs
        n = len(self.cond)
        bs = cfg.batch_size
        steps = math.ceil(n / bs)
        for epoch in range(epochs):
            perm_g = self.rng.permutation(n)
            perm_d = self.rng.permutation(n)
            for b in range(steps):
                if cfg.max_iterations is not None and self.state.iteration >= cfg.max_iterations:
                    return self.state
                sl = slice(b * bs, (b + 1) * bs)
                self.iterate(torch.from_numpy(perm_g[sl]), torch.from_numpy(perm_d[sl]))
            h = self.state.history
            log.info("epoch %d/%d  g=%.4f  l1=%.5f  d=%.4f", epoch + 1, epochs,
                     np.mean(h["g_loss"][-steps:]), np.mean(h["l1"][-steps:]),
                     np.mean(h["d_loss"][-steps:]))
        return self.state


def train(dataset: Dataset, spec: NetworkSpec, config: TrainConfig,
          dump_path=None) -> TrainState:
    """Train a fresh generator/discriminator pair on ``dataset.train``.

    On a non-finite loss the partial state is written to ``dump_path`` (when
    given) and :class:`TrainingAborted` is raised carrying it.
    """
    if not dataset.train:
        raise ParameterError("empty training split")
    state = init_state(spec, config, dataset.scale)
    cond, truth = training_tensors(dataset, spec)
    trainer = Trainer(state, cond, truth)
    try:
        return trainer.run()
    except TrainingAborted as exc:
        if dump_path is not None:
            save_checkpoint(dump_path, exc.state)
            exc.dump_path = Path(dump_path)
        raise


@torch.no_grad()
def generate(state: TrainState, cond: torch.Tensor, chunk: int = 64) -> torch.Tensor:
    """Generator outputs in evaluation mode (per-sample normalization)."""
    G = state.generator
    G.eval()
    outs = [G(cond[i:i + chunk]) for i in range(0, len(cond), chunk)]
    return torch.cat(outs) if outs else cond.new_zeros((0, 2) + state.spec.out_shape)


def estimate(conditional, state: TrainState) -> np.ndarray:
    """Map an initial estimate (or raw observation) to a complex channel estimate.

    Accepts one complex matrix or a stack of them and returns the same
    leading layout with shape ``(n_r, n_t)`` per sample.
    """
    conditional = np.asarray(conditional)
    single = conditional.ndim == 2
    batch = conditional[None] if single else conditional
    if tuple(batch.shape[-2:]) != state.spec.in_shape:
        raise DimensionError(
            f"conditional shape {tuple(batch.shape[-2:])} does not match {state.spec.in_shape}")
    x = to_nchw(batch, conditional_scale(state.spec, state.scale))
    H = from_nchw(generate(state, x), state.scale.c)
    return H[0] if single else H


# -- checkpoints -------------------------------------------------------------

def _param_arrays(state: TrainState):
    for prefix, module in (("generator", state.generator), ("discriminator", state.discriminator)):
        for name, p in module.state_dict().items():
            yield f"{prefix}.{name}", p.detach().cpu().numpy()


def save_checkpoint(path, state: TrainState) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    layout, chunks, offset = [], [], 0
    for name, arr in _param_arrays(state):
        layout.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        offset += arr.size
    blob = b"".join(chunks)
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "format_version": CHECKPOINT_VERSION,
        "spec": state.spec.to_dict(),
        "config": asdict(state.config),
        "scale": {"c": state.scale.c, "c_y": state.scale.c_y},
        "iteration": state.iteration,
        "history": state.history,
        "params": layout,
        "param_count": offset,
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    (path / "params.f32").write_bytes(blob)
    (path / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
    return path


def load_checkpoint(path) -> TrainState:
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.is_file():
        raise FileNotFoundError(f"no checkpoint at {path}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    if manifest.get("format") != CHECKPOINT_FORMAT or \
            manifest.get("format_version") != CHECKPOINT_VERSION:
        raise IntegrityError(f"{mpath} is not a version {CHECKPOINT_VERSION} checkpoint")
    blob = (path / "params.f32").read_bytes()
    if len(blob) != 4 * manifest["param_count"]:
        raise IntegrityError(f"parameter blob in {path} is truncated")
    if hashlib.sha256(blob).hexdigest() != manifest["sha256"]:
        raise IntegrityError(f"checksum mismatch for parameters in {path}")
    flat = np.frombuffer(blob, dtype="<f4")
    spec = NetworkSpec.from_dict(manifest["spec"])
    config = TrainConfig(**manifest["config"])
    state = init_state(spec, config, NormalizationScale(**manifest["scale"]))
    state.iteration = manifest["iteration"]
    state.history = manifest["history"]
    modules = {"generator": state.generator, "discriminator": state.discriminator}
    sds = {k: m.state_dict() for k, m in modules.items()}
    for entry in manifest["params"]:
        prefix, name = entry["name"].split(".", 1)
        n = math.prod(entry["shape"])
        arr = flat[entry["offset"]:entry["offset"] + n].reshape(entry["shape"])
        sds[prefix][name] = torch.from_numpy(arr.astype(np.float32))
    for k, m in modules.items():
        m.load_state_dict(sds[k])
    return state
