"""Torch modules for the generator and patch discriminator."""
from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import DimensionError
from .arch import LayerSpec, NetworkSpec

LRELU_SLOPE = 0.2
NORM_EPS = 1e-5
INIT_STD = 0.02


def _same_pad(size: int, stride: int, kernel: int) -> tuple[int, int]:
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


def _transpose_padding(stride: int, kernel: int) -> tuple[int, int]:
    # (h - 1) s - 2p + k + op == h s
    excess = kernel - stride
    if excess >= 0:
        p = (excess + 1) // 2
        return p, 2 * p - excess
    return 0, -excess


class SpatialBatchNorm(nn.Module):
    """Batch normalization that always uses the statistics of the current input.

    Training normalizes over (batch, height, width); evaluation normalizes each
    sample over (height, width) so inference stays per-sample. The two agree
    for batch size 1. No running statistics are kept.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))

    def forward(self, x):
        if self.training:
            return F.batch_norm(x, None, None, self.weight, self.bias, training=True, eps=NORM_EPS)
        return F.instance_norm(x, weight=self.weight, bias=self.bias, eps=NORM_EPS)


class Block(nn.Module):
    def __init__(self, layer: LayerSpec, in_channels: int):
        super().__init__()
        self.spec = layer
        k = layer.kernel
        if layer.kind == "conv":
            self.conv = nn.Conv2d(in_channels, layer.filters, k, stride=layer.stride)
        else:
            pads = [_transpose_padding(s, kk) for s, kk in zip(layer.stride, k)]
            self.conv = nn.ConvTranspose2d(
                in_channels, layer.filters, k, stride=layer.stride,
                padding=tuple(p for p, _ in pads), output_padding=tuple(op for _, op in pads))
        self.norm = SpatialBatchNorm(layer.filters) if layer.normalized else None

    def forward(self, x):
        if self.spec.kind == "conv":
            top, bottom = _same_pad(x.shape[-2], self.spec.stride[0], self.spec.kernel[0])
            left, right = _same_pad(x.shape[-1], self.spec.stride[1], self.spec.kernel[1])
            x = F.pad(x, (left, right, top, bottom))
        x = self.conv(x)
        if self.norm is not None:
            x = self.norm(x)
        act = self.spec.activation
        if act == "relu":
            return F.relu(x)
        if act == "lrelu":
            return F.leaky_relu(x, LRELU_SLOPE)
        if act == "tanh":
            return torch.tanh(x)
        if act == "sigmoid":
            return torch.sigmoid(x)
        raise ValueError(f"unknown activation {act!r}")


def _init_weights(module: nn.Module, generator: torch.Generator):
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, INIT_STD, generator=generator)
            nn.init.zeros_(m.bias)


class Generator(nn.Module):
    """U-Net: rescale layers, encoder blocks, decoder blocks with skips, tanh output."""

    def __init__(self, spec: NetworkSpec, seed: int = 0):
        super().__init__()
        self.spec = spec
        traces = {t.index: t for t in spec.trace() if t.network == "generator"}
        self.blocks = nn.ModuleList(Block(l, traces[l.index].in_channels) for l in spec.generator)
        g = torch.Generator().manual_seed(seed)
        _init_weights(self, g)

    def forward(self, x):
        if tuple(x.shape[-2:]) != self.spec.in_shape:
            raise DimensionError(f"generator expects {self.spec.in_shape}, got {tuple(x.shape[-2:])}")
        outputs = {}
        for block in self.blocks:
            idx = block.spec.index
            src = self.spec.skips.get(idx)
            if src is not None:
                x = torch.cat([x, outputs[src]], dim=1)
            x = block(x)
            outputs[idx] = x
        return x


def resample_nearest(x, shape: tuple[int, int]):
    """Parameter-free nearest-neighbour resize used for raw-mode conditionals."""
    h, w = x.shape[-2:]
    rows = (torch.arange(shape[0]) * h) // shape[0]
    cols = (torch.arange(shape[1]) * w) // shape[1]
    return x[..., rows, :][..., cols]


class Discriminator(nn.Module):
    """Patch discriminator on the channel-wise concatenation (conditional, candidate)."""

    def __init__(self, spec: NetworkSpec, seed: int = 1):
        super().__init__()
        self.spec = spec
        traces = {t.index: t for t in spec.trace() if t.network == "discriminator"}
        self.blocks = nn.ModuleList(Block(l, traces[l.index].in_channels)
                                    for l in spec.discriminator)
        g = torch.Generator().manual_seed(seed)
        _init_weights(self, g)

    def forward(self, cond, cand):
        """Patch map of sigmoid scores, shape (batch, 1, h_p, w_p)."""
        if tuple(cand.shape[-2:]) != self.spec.out_shape:
            raise DimensionError(
                f"candidate has shape {tuple(cand.shape[-2:])}, expected {self.spec.out_shape}")
        if tuple(cond.shape[-2:]) != tuple(cand.shape[-2:]):
            if self.spec.input_mode != "raw":
                raise DimensionError("conditional and candidate must share spatial shape")
            cond = resample_nearest(cond, self.spec.out_shape)
        x = torch.cat([cond, cand], dim=1)
        for block in self.blocks:
            x = block(x)
        return x

    def decision(self, cond, cand):
        """Per-sample mean over the patch map."""
        return self(cond, cand).mean(dim=(1, 2, 3))
