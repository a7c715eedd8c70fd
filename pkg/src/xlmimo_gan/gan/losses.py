"""Adversarial and L1 objectives.

Discriminator decisions enter as per-sample means of the patch map and are
clamped to ``[EPS, 1 - EPS]`` before any logarithm.
"""
from __future__ import annotations

import torch

EPS = 1e-7


def _as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def _clamp(d):
    return torch.clamp(_as_tensor(d), EPS, 1 - EPS)


def l1_term(fake, truth):
    """Mean absolute component difference."""
    return torch.mean(torch.abs(_as_tensor(truth) - _as_tensor(fake)))


def adversarial_generator_term(d_out_on_fake, non_saturating: bool = False):
    d = _clamp(d_out_on_fake)
    if non_saturating:
        return torch.mean(-torch.log(d))
    return torch.mean(torch.log1p(-d))


def generator_loss(d_out_on_fake, fake, truth, eta: float, non_saturating: bool = False):
    """``log(1 - D(G(x), x)) + eta * mean|truth - fake|``, to be minimized."""
    return adversarial_generator_term(d_out_on_fake, non_saturating) + eta * l1_term(fake, truth)


def discriminator_loss(d_out_on_real, d_out_on_fake):
    """``log D(truth, x) + log(1 - D(G(x), x))``, to be maximized."""
    return torch.mean(torch.log(_clamp(d_out_on_real)) + torch.log1p(-_clamp(d_out_on_fake)))
