"""Multiply-accumulate accounting for the initial estimate plus both networks.

Each layer costs ``F_h * F_w * K^2 * N_out * N_in``. Rows carry both the
actual input channel count (doubled at skip concatenations, four at the
discriminator input) and the tabulated nominal count.
"""
from __future__ import annotations

from dataclasses import dataclass

from .channel_model import SystemGeometry
from .gan.arch import NetworkSpec


@dataclass(frozen=True)
class LayerCost:
    index: int
    network: str
    F_h: int
    F_w: int
    K: int
    N_s: int
    N_in: int
    N_in_nominal: int

    @property
    def macs(self) -> int:
        return self.F_h * self.F_w * self.K ** 2 * self.N_s * self.N_in

    @property
    def macs_nominal(self) -> int:
        return self.F_h * self.F_w * self.K ** 2 * self.N_s * self.N_in_nominal


@dataclass(frozen=True)
class ComplexityReport:
    ie_term: int
    layers: tuple[LayerCost, ...]

    @property
    def network_total(self) -> int:
        return sum(l.macs for l in self.layers)

    @property
    def network_total_nominal(self) -> int:
        return sum(l.macs_nominal for l in self.layers)

    @property
    def total(self) -> int:
        return self.ie_term + self.network_total

    @property
    def total_nominal(self) -> int:
        return self.ie_term + self.network_total_nominal

    def layer(self, index: int) -> LayerCost:
        for l in self.layers:
            if l.index == index:
                return l
        raise KeyError(index)

    def format_table(self) -> str:
        head = "s\tnetwork\tF_h\tF_w\tK\tN_s\tN_in\tN_in_nominal\tmacs\tmacs_nominal"
        lines = [head]
        for l in self.layers:
            lines.append(f"{l.index}\t{l.network}\t{l.F_h}\t{l.F_w}\t{l.K}\t{l.N_s}\t{l.N_in}\t"
                         f"{l.N_in_nominal}\t{l.macs}\t{l.macs_nominal}")
        lines.append(f"ie\t-\t\t\t\t\t\t\t{self.ie_term}\t{self.ie_term}")
        lines.append(f"total\t-\t\t\t\t\t\t\t{self.total}\t{self.total_nominal}")
        return "\n".join(lines) + "\n"


def complexity_report(spec: NetworkSpec, geometry: SystemGeometry) -> ComplexityReport:
    n_t, n_r = geometry.n_t, geometry.n_r
    layers = tuple(
        LayerCost(t.index, t.network, t.out_shape[0], t.out_shape[1], t.kernel,
                  t.out_channels, t.in_channels, t.nominal_in_channels)
        for t in spec.trace()
    )
    return ComplexityReport(ie_term=n_t * n_r * (n_t + n_r), layers=layers)
