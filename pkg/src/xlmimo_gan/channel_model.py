"""Mixed LoS/NLoS near-field channel for two facing uniform linear arrays.

The LoS component is modelled per antenna pair from free-space geometry,
the NLoS component as a sum of spherical-wavefront steering-vector outer
products. All distances are in metres and angles in radians.

Phases are reduced modulo one wavelength in extended precision
(``np.longdouble``) before the complex exponential is taken: path lengths
are ~10^4 wavelengths, so a float64 phase would carry only ~12 good digits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import GeometryError, ParameterError

SPEED_OF_LIGHT = 2.998e8
# LoS antenna-pair distances below this many wavelengths are rejected.
MIN_PAIR_DISTANCE_WAVELENGTHS = 10.0

Side = Literal["tx", "rx"]


@dataclass(frozen=True)
class SystemGeometry:
    """Antenna counts, carrier and element spacing of both arrays.

    ``wavelength`` defaults to ``SPEED_OF_LIGHT / f_c`` and ``d`` to half a
    wavelength. An explicit wavelength must agree with ``f_c`` to 0.1%.
    """

    n_t: int = 64
    n_r: int = 32
    f_c: float = 50e9
    wavelength: float | None = None
    d: float | None = None

    def __post_init__(self):
        if int(self.n_t) != self.n_t or int(self.n_r) != self.n_r:
            raise ParameterError("antenna counts must be integers")
        if self.n_t < 2 or self.n_r < 2:
            raise ParameterError(f"need n_t, n_r >= 2, got {self.n_t}, {self.n_r}")
        if not self.f_c > 0:
            raise ParameterError("carrier frequency must be positive")
        lam_nominal = SPEED_OF_LIGHT / self.f_c
        if self.wavelength is None:
            object.__setattr__(self, "wavelength", lam_nominal)
        elif not self.wavelength > 0:
            raise ParameterError("wavelength must be positive")
        elif abs(self.wavelength - lam_nominal) > 1e-3 * lam_nominal:
            raise ParameterError(
                f"wavelength {self.wavelength} inconsistent with f_c={self.f_c} "
                f"(expected {lam_nominal:.6g} within 0.1%)"
            )
        if self.d is None:
            object.__setattr__(self, "d", self.wavelength / 2)
        elif not self.d > 0:
            raise ParameterError("antenna spacing must be positive")
        object.__setattr__(self, "n_t", int(self.n_t))
        object.__setattr__(self, "n_r", int(self.n_r))

    @classmethod
    def full(cls) -> "SystemGeometry":
        """256 x 128 arrays at 50 GHz with the rounded 6 mm wavelength."""
        return cls(n_t=256, n_r=128, f_c=50e9, wavelength=0.006)

    @classmethod
    def desk(cls) -> "SystemGeometry":
        """64 x 32 arrays at 50 GHz; ARD is about 12.3 m."""
        return cls(n_t=64, n_r=32, f_c=50e9, wavelength=0.006)

    def n_for(self, side: Side) -> int:
        if side == "tx":
            return self.n_t
        if side == "rx":
            return self.n_r
        raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")

    def to_dict(self) -> dict:
        return {"n_t": self.n_t, "n_r": self.n_r, "f_c": self.f_c,
                "wavelength": self.wavelength, "d": self.d}


@dataclass(frozen=True)
class NLoSPath:
    theta_t: float
    theta_r: float
    d_t: float
    d_r: float
    alpha: complex

    def __post_init__(self):
        if not (self.d_t > 0 and self.d_r > 0):
            raise GeometryError(f"scatterer distances must be positive: {self.d_t}, {self.d_r}")
        half_pi = np.pi / 2
        if not (-half_pi < self.theta_t < half_pi and -half_pi < self.theta_r < half_pi):
            raise GeometryError("path angles must lie in (-pi/2, pi/2)")


@dataclass(frozen=True)
class LoSGeometry:
    """First-antenna distance ``r``, LoS departure angle and array rotation."""

    r: float
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise GeometryError(f"LoS distance must be positive, got {self.r}")


@dataclass(frozen=True)
class FieldBoundaries:
    ard: float
    rd: float

    def region(self, r: float) -> str:
        """Classify a transmitter-receiver distance.

        Returns ``"mixed"`` below the ARD, ``"nlos_near"`` between ARD and RD
        and ``"far"`` beyond the RD.
        """
        if r < self.ard:
            return "mixed"
        if r < self.rd:
            return "nlos_near"
        return "far"


@dataclass
class ChannelInstance:
    H: NDArray[np.complex128]
    los: LoSGeometry
    paths: list[NLoSPath] = field(default_factory=list)
    geometry: SystemGeometry = field(default_factory=SystemGeometry)

    def recompute(self) -> NDArray[np.complex128]:
        """Rebuild the channel matrix from the stored generating parameters."""
        return los_channel(self.los, self.geometry) + nlos_channel(self.paths, self.geometry)


def element_offsets(n: int) -> NDArray[np.float64]:
    """Centred element offsets (2k - n - 1)/2 for k = 1..n, in units of spacing."""
    k = np.arange(1, n + 1, dtype=np.float64)
    return (2 * k - n - 1) / 2


def _wrapped_cycles(length, wavelength) -> NDArray[np.float64]:
    """Fractional part of ``length / wavelength`` computed in extended precision."""
    cycles = np.asarray(length, dtype=np.longdouble) / np.longdouble(wavelength)
    return np.asarray(cycles - np.floor(cycles), dtype=np.float64)


def scatterer_distance(d_center: float, theta: float, element_index: int, n: int,
                       d_spacing: float) -> float:
    """Distance from array element ``element_index`` (1-based) to a scatterer.

    The scatterer sits ``d_center`` from the array centre at angle ``theta``.
    """
    if not d_center > 0:
        raise GeometryError(f"scatterer distance must be positive, got {d_center}")
    if not 1 <= element_index <= n:
        raise IndexError(f"element index {element_index} outside 1..{n}")
    delta = (2 * element_index - n - 1) / 2
    return float(np.sqrt(d_center**2 + d_spacing**2 * delta**2
                         - 2 * d_spacing * d_center * delta * np.sin(theta)))


def _excess_path(d_center, theta, n: int, d_spacing: float) -> NDArray[np.longdouble]:
    # d(k) - d_center without cancellation: (d(k)^2 - d_c^2) / (d(k) + d_c).
    dc = np.longdouble(d_center)
    ds = np.longdouble(d_spacing)
    delta = element_offsets(n).astype(np.longdouble)
    num = ds * ds * delta * delta - 2 * ds * dc * delta * np.longdouble(np.sin(theta))
    dk = np.sqrt(dc * dc + num)
    return num / (dk + dc)


def steering_vector(theta: float, d_center: float, geometry: SystemGeometry,
                    side: Side = "tx", n: int | None = None) -> NDArray[np.complex128]:
    """Near-field array response for a scatterer at (``theta``, ``d_center``).

    Entry k is ``exp(+j 2 pi (d(k) - d_center) / lambda) / sqrt(n)``, i.e. the
    vector after the conjugate transpose, as it enters the NLoS outer product.
    """
    if not d_center > 0:
        raise GeometryError(f"scatterer distance must be positive, got {d_center}")
    if n is None:
        n = geometry.n_for(side)
    frac = _wrapped_cycles(_excess_path(d_center, theta, n, geometry.d), geometry.wavelength)
    return np.exp(2j * np.pi * frac) / np.sqrt(n)


def los_pairwise_distance(los: LoSGeometry, u: int, v: int, geometry: SystemGeometry) -> float:
    """Distance between transmit antenna ``u`` and receive antenna ``v`` (1-based).

    Antenna 1 of each array is the reference, so the (1, 1) pair is exactly
    ``los.r`` apart.
    """
    if not 1 <= u <= geometry.n_t:
        raise IndexError(f"tx index {u} outside 1..{geometry.n_t}")
    if not 1 <= v <= geometry.n_r:
        raise IndexError(f"rx index {v} outside 1..{geometry.n_r}")
    d1 = (u - 1) * geometry.d
    d2 = (v - 1) * geometry.d
    dist = float(np.hypot(los.r * np.cos(los.theta) - d2 * np.sin(los.phi),
                          los.r * np.sin(los.theta) + d2 * np.cos(los.phi) - d1))
    _check_pair_distance(dist, geometry)
    return dist


def los_pairwise_distance_expanded(los: LoSGeometry, u: int, v: int,
                                   geometry: SystemGeometry) -> float:
    """Same distance via the expanded form r^2 + d1^2 + d2^2 + 2(...)."""
    r, th, ph = los.r, los.theta, los.phi
    d1 = (u - 1) * geometry.d
    d2 = (v - 1) * geometry.d
    big_delta = r**2 + d1**2 + d2**2
    return float(np.sqrt(big_delta + 2 * (r * d2 * np.sin(th - ph) - r * d1 * np.sin(th)
                                          - d1 * d2 * np.cos(ph))))


def _check_pair_distance(dist, geometry: SystemGeometry):
    limit = MIN_PAIR_DISTANCE_WAVELENGTHS * geometry.wavelength
    if not np.all(np.asarray(dist) >= limit):
        raise GeometryError(
            f"antenna pair closer than {MIN_PAIR_DISTANCE_WAVELENGTHS:g} wavelengths "
            f"({float(np.min(dist)):.4g} m < {limit:.4g} m); arrays overlap"
        )


def los_distances(los: LoSGeometry, geometry: SystemGeometry) -> NDArray[np.longdouble]:
    """All (n_r, n_t) antenna-pair distances in extended precision."""
    ld = np.longdouble
    d = ld(geometry.d)
    d1 = np.arange(geometry.n_t, dtype=ld)[None, :] * d
    d2 = np.arange(geometry.n_r, dtype=ld)[:, None] * d
    r = ld(los.r)
    x = r * ld(np.cos(los.theta)) - d2 * ld(np.sin(los.phi))
    y = r * ld(np.sin(los.theta)) + d2 * ld(np.cos(los.phi)) - d1
    dist = np.sqrt(x * x + y * y)
    _check_pair_distance(dist, geometry)
    return dist


def los_channel(los: LoSGeometry, geometry: SystemGeometry) -> NDArray[np.complex128]:
    """Free-space LoS matrix, entry (v, u) = exp(-j 2 pi r_vu / lambda) / r_vu."""
    dist = los_distances(los, geometry)
    frac = _wrapped_cycles(dist, geometry.wavelength)
    return np.exp(-2j * np.pi * frac) / dist.astype(np.float64)


def nlos_channel(paths: Sequence[NLoSPath], geometry: SystemGeometry) -> NDArray[np.complex128]:
    H = np.zeros((geometry.n_r, geometry.n_t), dtype=np.complex128)
    for p in paths:
        b_r = steering_vector(p.theta_r, p.d_r, geometry, "rx")
        b_t = steering_vector(p.theta_t, p.d_t, geometry, "tx")
        H += p.alpha * np.outer(b_r, b_t.conj())
    return H


def full_channel(los: LoSGeometry, paths: Sequence[NLoSPath],
                 geometry: SystemGeometry) -> ChannelInstance:
    H = los_channel(los, geometry) + nlos_channel(paths, geometry)
    return ChannelInstance(H=H, los=los, paths=list(paths), geometry=geometry)


def field_boundaries(geometry: SystemGeometry) -> FieldBoundaries:
    """Advanced Rayleigh distance 4 D_t D_r / lambda and Rayleigh distance 2 (D_t + D_r)^2 / lambda."""
    lam = geometry.wavelength
    D_t = lam * geometry.n_t / 2
    D_r = lam * geometry.n_r / 2
    return FieldBoundaries(ard=4 * D_t * D_r / lam, rd=2 * (D_t + D_r) ** 2 / lam)
