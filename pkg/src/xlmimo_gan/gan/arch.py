"""Layer-by-layer description of the U-Net generator and patch discriminator.

Layer numbering follows the canonical table: layer 1 is the input, layers
2-3 rescale the conditional input to the channel size, then ``depth``
stride-2 encoder blocks, ``depth - 1`` stride-2 decoder blocks and a tanh
output layer. The discriminator continues the numbering with three stride-2
blocks, one (2, 1) block and a sigmoid patch layer. For the canonical
256 x 128 channel and ``depth=5`` this is layers 2-13 and 14-18.

Strides are ``(vertical, horizontal)``. Feature maps follow the ceiling
recurrences ``ceil(h * s_v)`` for transposed convolutions and
``ceil(h / s_v)`` for convolutions (likewise for widths).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Literal

from ..errors import ArchitectureError, UnsupportedRatioError

Kind = Literal["conv", "convT"]
MAX_STRIDE = 16


@dataclass(frozen=True)
class LayerSpec:
    index: int
    kind: Kind
    filters: int
    stride: tuple[int, int]
    activation: str
    normalized: bool
    kernel: tuple[int, int] = (3, 3)


@dataclass(frozen=True)
class LayerTrace:
    """Shape bookkeeping for one layer: output size, actual and tabulated input channels."""

    index: int
    network: str
    kind: Kind
    in_shape: tuple[int, int]
    out_shape: tuple[int, int]
    in_channels: int
    out_channels: int
    nominal_in_channels: int
    kernel: int
    skip_from: int | None = None


def feature_map_shape(in_shape: tuple[int, int], layer: LayerSpec) -> tuple[int, int]:
    h, w = in_shape
    s_v, s_h = layer.stride
    if layer.kind == "convT":
        return math.ceil(h * s_v), math.ceil(w * s_h)
    return math.ceil(h / s_v), math.ceil(w / s_h)


def _rescale_axis(n_in: int, n_out: int) -> tuple[int, int]:
    best = None
    for up in range(1, MAX_STRIDE + 1):
        for down in range(1, MAX_STRIDE + 1):
            if math.ceil(n_in * up / down) == n_out:
                cand = (up * down, up, down)
                if best is None or cand < best:
                    best = cand
    if best is None:
        ratio = Fraction(n_out, n_in)
        raise UnsupportedRatioError(
            f"cannot map {n_in} -> {n_out} (ratio {ratio}) with integer strides <= {MAX_STRIDE}")
    return best[1], best[2]


def rescale_strides(in_shape: tuple[int, int], out_shape: tuple[int, int]):
    """Strides for layers 2 (transposed conv) and 3 (conv) mapping ``in_shape`` onto ``out_shape``.

    Among admissible (up, down) pairs per axis the one with the smallest
    product is taken, so equal shapes give unit strides.
    """
    up_v, down_v = _rescale_axis(in_shape[0], out_shape[0])
    up_h, down_h = _rescale_axis(in_shape[1], out_shape[1])
    return (up_v, up_h), (down_v, down_h)


@dataclass
class NetworkSpec:
    out_shape: tuple[int, int]
    in_shape: tuple[int, int]
    input_mode: Literal["ie", "raw"] = "ie"
    width: int = 64
    depth: int = 5
    generator: list[LayerSpec] = field(default_factory=list)
    discriminator: list[LayerSpec] = field(default_factory=list)
    skips: dict[int, int] = field(default_factory=dict)

    @classmethod
    def create(cls, out_shape, input_mode: str = "ie", in_shape=None, width: int = 64,
               depth: int = 5) -> "NetworkSpec":
        out_shape = tuple(int(v) for v in out_shape)
        if in_shape is None:
            if input_mode == "raw":
                raise ArchitectureError("raw input mode needs the observation shape (M_r, P)")
            in_shape = out_shape
        in_shape = tuple(int(v) for v in in_shape)
        if input_mode not in ("ie", "raw"):
            raise ArchitectureError(f"unknown input mode {input_mode!r}")
        if depth < 2:
            raise ArchitectureError("the U-Net needs at least two encoder blocks")
        up, down = rescale_strides(in_shape, out_shape)

        gen = [
            LayerSpec(2, "convT", 2, up, "relu", False),
            LayerSpec(3, "conv", 2, down, "lrelu", False),
        ]
        idx = 4
        enc_idx = []
        for _ in range(depth):
            gen.append(LayerSpec(idx, "conv", width, (2, 2), "lrelu", True))
            enc_idx.append(idx)
            idx += 1
        dec_idx = []
        for _ in range(depth - 1):
            gen.append(LayerSpec(idx, "convT", width, (2, 2), "relu", True))
            dec_idx.append(idx)
            idx += 1
        gen.append(LayerSpec(idx, "convT", 2, (2, 2), "tanh", False))
        out_idx = idx
        idx += 1
        # decoder inputs concatenate the encoder output of equal resolution
        targets = dec_idx[1:] + [out_idx]
        sources = enc_idx[-2::-1]
        skips = dict(zip(targets, sources))

        disc = []
        for k in range(3):
            disc.append(LayerSpec(idx, "conv", width, (2, 2), "lrelu", k > 0))
            idx += 1
        disc.append(LayerSpec(idx, "conv", width, (2, 1), "lrelu", True))
        disc.append(LayerSpec(idx + 1, "conv", 1, (1, 1), "sigmoid", False))

        spec = cls(out_shape=out_shape, in_shape=in_shape, input_mode=input_mode, width=width,
                   depth=depth, generator=gen, discriminator=disc, skips=skips)
        spec.trace()  # fail at build time on an inconsistent layout
        return spec

    @property
    def cond_channels(self) -> int:
        return 2

    def trace(self) -> list[LayerTrace]:
        """Propagate shapes through both networks, raising ArchitectureError on mismatch."""
        rows: list[LayerTrace] = []
        outputs: dict[int, tuple[tuple[int, int], int]] = {1: (self.in_shape, 2)}
        shape, channels, prev_filters = self.in_shape, 2, 2
        for layer in self.generator:
            in_ch = channels
            src = self.skips.get(layer.index)
            if src is not None:
                src_shape, src_ch = outputs[src]
                if src_shape != shape:
                    raise ArchitectureError(
                        f"skip {src}->{layer.index}: shapes {src_shape} and {shape} differ")
                in_ch += src_ch
            out = feature_map_shape(shape, layer)
            if min(out) < 1:
                raise ArchitectureError(f"layer {layer.index} collapses the feature map")
            rows.append(LayerTrace(layer.index, "generator", layer.kind, shape, out, in_ch,
                                   layer.filters, prev_filters, layer.kernel[0], src))
            outputs[layer.index] = (out, layer.filters)
            shape, channels, prev_filters = out, layer.filters, layer.filters
        if shape != self.out_shape:
            raise ArchitectureError(
                f"generator maps {self.in_shape} to {shape}, expected {self.out_shape}")

        shape, channels = self.out_shape, 2 * self.cond_channels
        # the first discriminator row is tabulated with the hidden width as input count
        prev_filters = self.width
        for layer in self.discriminator:
            out = feature_map_shape(shape, layer)
            rows.append(LayerTrace(layer.index, "discriminator", layer.kind, shape, out, channels,
                                   layer.filters, prev_filters, layer.kernel[0]))
            shape, channels, prev_filters = out, layer.filters, layer.filters
        return rows

    def patch_shape(self) -> tuple[int, int]:
        return self.trace()[-1].out_shape

    def parameter_count(self, network: str | None = None) -> int:
        """Weights, biases and normalization scale/shift of one or both networks."""
        layers = {l.index: l for l in self.generator + self.discriminator}
        total = 0
        for row in self.trace():
            if network is not None and row.network != network:
                continue
            spec = layers[row.index]
            total += row.kernel ** 2 * row.in_channels * row.out_channels + row.out_channels
            if spec.normalized:
                total += 2 * row.out_channels
        return total

    def to_dict(self) -> dict:
        return {
            "out_shape": list(self.out_shape),
            "in_shape": list(self.in_shape),
            "input_mode": self.input_mode,
            "width": self.width,
            "depth": self.depth,
            "generator": [asdict(l) for l in self.generator],
            "discriminator": [asdict(l) for l in self.discriminator],
            "skips": {str(k): v for k, v in self.skips.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        def layer(x):
            return LayerSpec(**{**x, "stride": tuple(x["stride"]), "kernel": tuple(x["kernel"])})

        return cls(out_shape=tuple(d["out_shape"]), in_shape=tuple(d["in_shape"]),
                   input_mode=d["input_mode"], width=d["width"], depth=d["depth"],
                   generator=[layer(x) for x in d["generator"]],
                   discriminator=[layer(x) for x in d["discriminator"]],
                   skips={int(k): v for k, v in d["skips"].items()})
