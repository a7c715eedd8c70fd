from __future__ import annotations

import numpy as np

from .errors import DimensionError, UndefinedMetricError


def nmse(H, H_hat) -> float:
    """``||H - H_hat||_F^2 / ||H||_F^2`` for a single channel."""
    H = np.asarray(H, dtype=np.complex128)
    H_hat = np.asarray(H_hat, dtype=np.complex128)
    if H.shape != H_hat.shape:
        raise DimensionError(f"shape mismatch {H.shape} vs {H_hat.shape}")
    ref = np.sum(np.abs(H) ** 2)
    if ref == 0:
        raise UndefinedMetricError("NMSE is undefined for an all-zero reference channel")
    return float(np.sum(np.abs(H - H_hat) ** 2) / ref)


def per_sample_nmse(H_stack, H_hat_stack) -> np.ndarray:
    return np.array([nmse(h, g) for h, g in zip(H_stack, H_hat_stack)])


def dataset_nmse(H_stack, H_hat_stack) -> float:
    """Mean of per-sample NMSE ratios."""
    if len(H_stack) != len(H_hat_stack) or len(H_stack) == 0:
        raise DimensionError("need equally many (non-zero) truth and estimate samples")
    return float(np.mean(per_sample_nmse(H_stack, H_hat_stack)))


def to_db(x) -> float:
    return float(10 * np.log10(x))
