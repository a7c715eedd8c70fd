from __future__ import annotations

import numpy as np
import pytest

from xlmimo_gan.channel_model import LoSGeometry, SystemGeometry, full_channel
from xlmimo_gan.errors import DimensionError, ParameterError, SingularityError
from xlmimo_gan.measurement import (
    Observation, generate_combiner, generate_pilots, initial_estimate, left_right_operators,
    observe,
)


def random_channel(rng, n_r, n_t):
    return (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / np.sqrt(2)


def test_pilot_entries_and_gram_diagonal():
    for P in (1, 7, 16, 64):
        Q = generate_pilots(P, 64, seed=P)
        assert Q.shape == (64, P)
        assert set(np.unique(Q.real * np.sqrt(P)).round(12)) <= {-1.0, 1.0}
        assert not np.any(Q.imag)
        np.testing.assert_allclose(np.diag(Q @ Q.conj().T).real, 1.0, atol=1e-12)


def test_combiner_entries_and_gram_diagonal():
    W = generate_combiner(16, 32, seed=3)
    assert W.shape == (16, 32)
    np.testing.assert_allclose(np.abs(W), 1 / np.sqrt(32), rtol=1e-15)
    np.testing.assert_allclose(np.diag(W @ W.conj().T).real, 1.0, atol=1e-12)


def test_generators_deterministic():
    assert np.array_equal(generate_pilots(16, 64, seed=9), generate_pilots(16, 64, seed=9))
    assert np.array_equal(generate_combiner(8, 32, seed=9), generate_combiner(8, 32, seed=9))
    assert not np.array_equal(generate_pilots(16, 64, seed=9), generate_pilots(16, 64, seed=10))


def test_generator_errors():
    with pytest.raises(ParameterError):
        generate_pilots(0, 8)
    with pytest.raises(ParameterError):
        generate_combiner(9, 8)
    with pytest.raises(ParameterError):
        generate_combiner(0, 8)


def test_square_combiner_well_conditioned():
    for seed in range(100):
        assert np.linalg.cond(generate_combiner(32, 32, seed=seed)) < 1e12


def test_observe_noiseless_and_identity():
    rng = np.random.default_rng(0)
    H = random_channel(rng, 6, 5)
    obs = observe(H, np.eye(6), np.eye(5), np.inf)
    assert np.array_equal(obs.Y, H)
    assert obs.sigma2 == 0.0


def test_observe_noise_variance_monte_carlo():
    rng = np.random.default_rng(1)
    n = 320  # 102400 noise draws
    H = random_channel(rng, n, n)
    obs = observe(H, np.eye(n), np.eye(n), 10.0, seed=5)
    noise = obs.Y - H
    assert obs.sigma2 == pytest.approx(np.mean(np.abs(H) ** 2) / 10, rel=1e-12)
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(obs.sigma2, rel=0.02)
    # circular symmetry: real and imaginary halves share the power
    assert np.var(noise.real) == pytest.approx(obs.sigma2 / 2, rel=0.02)


def test_observe_shape_mismatch():
    with pytest.raises(DimensionError):
        observe(np.zeros((4, 4)), np.zeros((2, 5)), np.zeros((4, 2)), 10.0)


def test_exact_recovery_square_noiseless():
    rng = np.random.default_rng(2)
    for i in range(100):
        H = random_channel(rng, 32, 64)
        W = generate_combiner(32, 32, seed=i)
        Q = generate_pilots(64, 64, seed=1000 + i)
        est = initial_estimate(observe(H, W, Q, np.inf))
        assert not est.regularized
        assert np.linalg.norm(est.H_IE - H) / np.linalg.norm(H) < 1e-10


def test_projection_property_full_pilots():
    rng = np.random.default_rng(3)
    H = random_channel(rng, 32, 64)
    W = generate_combiner(12, 32, seed=1)
    Q = generate_pilots(64, 64, seed=2)
    G_L, G_R, reg = left_right_operators(W, Q)
    assert not reg
    P_W = G_L @ W
    P_Q = Q @ G_R
    for Pm in (P_W, P_Q):
        assert np.max(np.abs(Pm @ Pm - Pm)) < 1e-10
        assert np.max(np.abs(Pm - Pm.conj().T)) < 1e-10
    H_IE = initial_estimate(observe(H, W, Q, np.inf)).H_IE
    assert np.max(np.abs(H_IE - P_W @ H @ P_Q)) < 1e-10
    assert np.max(np.abs(H_IE - P_W @ H)) < 1e-10


def test_projection_property_regularized_pilots():
    # Q Q^H is singular, so Q G_R is a projector only up to the Tikhonov bias.
    W = generate_combiner(16, 32, seed=1)
    Q = generate_pilots(16, 64, seed=2)
    G_L, G_R, reg = left_right_operators(W, Q)
    assert reg
    P_Q = Q @ G_R
    assert np.max(np.abs(P_Q @ P_Q - P_Q)) < 1e-5
    # the regularized inverse has gain ~1e6, which scales rounding accordingly
    assert np.max(np.abs(P_Q - P_Q.conj().T)) < 1e-8
    # rank-P projector: trace equals the pilot count
    assert np.trace(P_Q).real == pytest.approx(16, abs=1e-4)


def test_singular_without_regularization():
    W = generate_combiner(16, 32, seed=1)
    Q = generate_pilots(16, 64, seed=2)
    obs = observe(np.ones((32, 64)), W, Q, np.inf)
    with pytest.raises(SingularityError):
        initial_estimate(obs, regularize=False)


def test_output_shape_low_overhead():
    g = SystemGeometry.full()
    H = full_channel(LoSGeometry(40.0), [], g).H
    W = generate_combiner(g.n_r // 4, g.n_r, seed=0)
    Q = generate_pilots(g.n_t // 8, g.n_t, seed=1)
    assert initial_estimate(observe(H, W, Q, 10.0, seed=2)).H_IE.shape == (g.n_r, g.n_t)


def test_linearity():
    rng = np.random.default_rng(4)
    W = generate_combiner(8, 16, seed=1)
    Q = generate_pilots(8, 32, seed=2)
    Y1 = random_channel(rng, 8, 8)
    Y2 = random_channel(rng, 8, 8)
    est = lambda Y: initial_estimate(Observation(Q=Q, W=W, Y=Y, snr_db=0.0, sigma2=0.0)).H_IE
    np.testing.assert_allclose(est(Y1 + Y2), est(Y1) + est(Y2), atol=1e-12)


def test_noise_part_zero_mean():
    rng = np.random.default_rng(5)
    n_r, n_t, M_r, P = 8, 8, 4, 4
    H = random_channel(rng, n_r, n_t)
    W = generate_combiner(M_r, n_r, seed=1)
    Q = generate_pilots(P, n_t, seed=2)
    G_L, G_R, _ = left_right_operators(W, Q)
    clean = G_L @ (W @ H @ Q) @ G_R
    draws = 10_000
    acc = np.zeros((n_r, n_t), dtype=complex)
    sigma2 = None
    for s in range(draws):
        obs = observe(H, W, Q, 5.0, seed=s)
        sigma2 = obs.sigma2
        acc += initial_estimate(obs).H_IE - clean
    mean = acc / draws
    # per-entry standard deviation of G_L N G_R
    std = np.sqrt(sigma2 * np.outer(np.sum(np.abs(G_L) ** 2, axis=1),
                                    np.sum(np.abs(G_R) ** 2, axis=0)))
    assert np.all(np.abs(mean) < 3 * std / np.sqrt(draws))
