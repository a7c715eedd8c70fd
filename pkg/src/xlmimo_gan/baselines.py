"""Far-field angular-codebook OMP, the classical comparison estimator.

With ``H = A_r H_a A_t^H`` the observation becomes ``Y = (W A_r) H_a (A_t^H Q)``,
so each angular atom (i, j) is the rank-one block ``outer((W A_r)[:, i], (A_t^H Q)[j, :])``.
Correlations with the residual are computed in that factored form instead
of materializing the ``(M_r P) x (n_r n_t)`` sensing matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .channel_model import SystemGeometry, element_offsets
from .errors import DimensionError, ParameterError
from .measurement import Observation


@dataclass
class AngularCodebook:
    A_t: NDArray[np.complex128]
    A_r: NDArray[np.complex128]

    @classmethod
    def for_geometry(cls, geometry: SystemGeometry, oversample: int = 1) -> "AngularCodebook":
        return cls(A_t=dft_codebook(geometry.n_t, oversample),
                   A_r=dft_codebook(geometry.n_r, oversample))


@dataclass
class OmpInfo:
    support: list[tuple[int, int]] = field(default_factory=list)
    gains: NDArray[np.complex128] | None = None
    residual_norms: list[float] = field(default_factory=list)


def dft_codebook(n: int, oversample: int = 1) -> NDArray[np.complex128]:
    """Planar-wave dictionary on the grid ``sin(theta_k) = -1 + (2k - 1)/G``, ``G = n * oversample``.

    Critically sampled (``oversample=1``) the ``n x n`` matrix is unitary.
    """
    if n < 2:
        raise ParameterError("codebook needs n >= 2")
    if oversample < 1:
        raise ParameterError("oversample must be >= 1")
    G = n * oversample
    k = np.arange(1, G + 1)
    sin_grid = -1 + (2 * k - 1) / G
    return np.exp(1j * np.pi * np.outer(element_offsets(n), sin_grid)) / np.sqrt(n)


def far_field_omp(obs: Observation, codebook: AngularCodebook, L: int,
                  return_info: bool = False):
    """Greedy selection of ``L`` angular atoms with a least-squares refit per step.

    Returns the channel estimate ``A_r H_a A_t^H``, plus an :class:`OmpInfo`
    when ``return_info`` is set.
    """
    W, Q, Y = np.asarray(obs.W), np.asarray(obs.Q), np.asarray(obs.Y)
    A_t, A_r = codebook.A_t, codebook.A_r
    if W.shape[1] != A_r.shape[0] or Q.shape[0] != A_t.shape[0]:
        raise DimensionError("codebook does not match the measurement matrices")
    M, P = Y.shape
    if L < 1:
        raise ParameterError("sparsity L must be >= 1")
    if L > M * P:
        raise ParameterError(f"L={L} exceeds the {M * P} available measurements")

    psi_r = W @ A_r                      # (M_r, G_r)
    psi_t = A_t.conj().T @ Q             # (G_t, P)
    norms = np.outer(np.linalg.norm(psi_r, axis=0), np.linalg.norm(psi_t, axis=1))
    norms[norms == 0] = np.inf
    y = Y.ravel()

    info = OmpInfo(residual_norms=[float(np.linalg.norm(y))])
    chosen = np.zeros(norms.shape, dtype=bool)
    atoms = []
    R = Y
    gains = np.zeros(0, dtype=np.complex128)
    for _ in range(L):
        score = np.abs(psi_r.conj().T @ R @ psi_t.conj().T) / norms
        score[chosen] = -1.0
        i, j = np.unravel_index(int(np.argmax(score)), score.shape)
        chosen[i, j] = True
        info.support.append((int(i), int(j)))
        atoms.append(np.outer(psi_r[:, i], psi_t[j, :]).ravel())
        Phi = np.stack(atoms, axis=1)
        gains = np.linalg.lstsq(Phi, y, rcond=None)[0]
        R = (y - Phi @ gains).reshape(M, P)
        info.residual_norms.append(float(np.linalg.norm(R)))
    info.gains = gains

    H_a = np.zeros(norms.shape, dtype=np.complex128)
    for (i, j), g in zip(info.support, gains):
        H_a[i, j] += g
    H_hat = A_r @ H_a @ A_t.conj().T
    return (H_hat, info) if return_info else H_hat
