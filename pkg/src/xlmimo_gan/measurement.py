"""Pilot/combiner generation, noisy observations and the initial estimate.

The received block is ``Y = W H Q + N``. The initial estimate undoes the
combiner and pilot matrices with right/left pseudo-inverses,
``H_IE = W^H (W W^H)^-1  Y  Q^H (Q Q^H)^-1``. With fewer pilot slots than
transmit antennas ``Q Q^H`` is singular; a Tikhonov term
``eps = 1e-6 * trace(Q Q^H) / n_t`` is then added to the Gram matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, ParameterError, SingularityError

GRAM_COND_LIMIT = 1e12
TIKHONOV_REL = 1e-6


@dataclass
class Observation:
    Q: NDArray[np.complex128]
    W: NDArray[np.complex128]
    Y: NDArray[np.complex128]
    snr_db: float
    sigma2: float


@dataclass
class InitialEstimate:
    H_IE: NDArray[np.complex128]
    regularized: bool = False


def _random_signs(shape, magnitude, seed) -> NDArray[np.complex128]:
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=shape) * 2 - 1
    return (signs * magnitude).astype(np.complex128)


def generate_pilots(P: int, n_t: int, seed=None) -> NDArray[np.complex128]:
    """``n_t x P`` pilot matrix with i.i.d. equiprobable entries +-1/sqrt(P)."""
    if P < 1:
        raise ParameterError(f"pilot length must be >= 1, got {P}")
    return _random_signs((n_t, P), 1 / np.sqrt(P), seed)


def generate_combiner(M_r: int, n_r: int, seed=None) -> NDArray[np.complex128]:
    """``M_r x n_r`` combiner with i.i.d. equiprobable entries +-1/sqrt(n_r)."""
    if M_r < 1:
        raise ParameterError(f"combiner needs at least one row, got {M_r}")
    if M_r > n_r:
        raise ParameterError(f"M_r={M_r} exceeds n_r={n_r}; W W^H would be rank deficient")
    return _random_signs((M_r, n_r), 1 / np.sqrt(n_r), seed)


def observe(H, W, Q, snr_db: float, seed=None) -> Observation:
    """Simulate ``Y = W H Q + N`` at the given per-element SNR.

    The noise variance is set from the empirical power of this sample's
    noiseless block, ``sigma2 = mean|W H Q|^2 / 10^(snr_db/10)``. Passing
    ``snr_db=np.inf`` gives a noiseless observation.
    """
    H = np.asarray(H)
    W = np.asarray(W)
    Q = np.asarray(Q)
    if H.ndim != 2 or W.ndim != 2 or Q.ndim != 2:
        raise DimensionError("H, W and Q must be matrices")
    if W.shape[1] != H.shape[0] or H.shape[1] != Q.shape[0]:
        raise DimensionError(f"cannot form W{W.shape} @ H{H.shape} @ Q{Q.shape}")
    S = W @ H @ Q
    if np.isposinf(snr_db):
        return Observation(Q=Q, W=W, Y=S, snr_db=float(snr_db), sigma2=0.0)
    sigma2 = float(np.mean(np.abs(S) ** 2) / 10 ** (snr_db / 10))
    rng = np.random.default_rng(seed)
    N = np.sqrt(sigma2 / 2) * (rng.standard_normal(S.shape) + 1j * rng.standard_normal(S.shape))
    return Observation(Q=Q, W=W, Y=S + N, snr_db=float(snr_db), sigma2=sigma2)


def _right_inverse(A, regularize: bool, what: str):
    """``A^H (A A^H + eps I)^-1`` evaluated through the SVD of ``A``.

    ``eps`` is zero when the Gram matrix ``A A^H`` is invertible as written
    (condition number at most ``GRAM_COND_LIMIT``) and the Tikhonov value
    otherwise. Working from the SVD avoids squaring the condition number.
    """
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    m = A.shape[0]
    eig = s**2
    smallest = eig.min() if len(eig) == m else 0.0
    cond = np.inf if smallest == 0 else eig.max() / smallest
    if cond <= GRAM_COND_LIMIT:
        eps, reg = 0.0, False
    elif not regularize:
        raise SingularityError(f"{what} Gram matrix has condition number {cond:.3g}")
    else:
        eps, reg = TIKHONOV_REL * eig.sum() / m, True
    return (Vh.conj().T * (s / (eig + eps))) @ U.conj().T, reg


def left_right_operators(W, Q, regularize: bool = True):
    """Return ``(G_L, G_R, regularized)`` for a fixed measurement setup."""
    G_L, reg_w = _right_inverse(np.asarray(W), regularize, "combiner")
    G_R, reg_q = _right_inverse(np.asarray(Q), regularize, "pilot")
    return G_L, G_R, reg_w or reg_q


def initial_estimate(obs: Observation, regularize: bool = True) -> InitialEstimate:
    G_L, G_R, reg = left_right_operators(obs.W, obs.Q, regularize)
    return InitialEstimate(H_IE=G_L @ obs.Y @ G_R, regularized=reg)
