from itertools import product

import mpmath
import numpy as np
import pytest

from mimobp import (CapacityError, ChannelInstance, draw_channel,
                    llr_from_marginals, lmmse, map_marginals, ml_hard, qpsk)
from conftest import random_channel, received


def enumeration_oracle(channel, constellation, y):
    """Independent enumeration with reversed index order and direct products."""
    m, size = channel.n_tx, constellation.size
    post = np.zeros((m, size))
    for idx in product(range(size), repeat=m):
        idx = tuple(reversed(idx))
        x = constellation.points[list(idx)]
        r = y - channel.H @ x
        w = np.exp(-np.vdot(r, r).real / channel.sigma2)
        w *= np.prod(constellation.prior[list(idx)])
        for j, s in enumerate(idx):
            post[j, s] += w
    return post / post.sum(axis=1, keepdims=True)


class TestMapMarginals:
    def test_zero_channel_returns_prior(self, qpsk_const):
        ch = ChannelInstance(H=np.zeros((3, 2)), sigma2=1.0)
        post = map_marginals(ch, qpsk_const, np.array([0.3, -1j, 0.2 + 0.1j]))
        assert np.allclose(post, 0.25)

    def test_noiseless_concentration(self, qpsk_const):
        ch = random_channel(3, 3, 1e-8, 31)
        g = np.random.default_rng(4)
        idx = g.integers(0, 4, 3)
        y = ch.H @ qpsk_const.points[idx]
        post = map_marginals(ch, qpsk_const, y)
        assert np.all(post[np.arange(3), idx] >= 1 - 1e-6)

    def test_matches_reversed_enumeration_oracle(self, qpsk_const):
        ch = random_channel(2, 2, 0.4, 17)
        _, _, y = received(ch, qpsk_const, 18)
        post = map_marginals(ch, qpsk_const, y)
        ref = enumeration_oracle(ch, qpsk_const, y)
        assert np.max(np.abs(post - ref)) < 1e-12

    def test_rows_normalised(self, qpsk_const):
        ch = random_channel(4, 5, 0.2, 8)
        _, _, y = received(ch, qpsk_const, 9)
        post = map_marginals(ch, qpsk_const, y)
        assert np.allclose(post.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(post >= 0)

    def test_capacity_cap(self, qam16_const):
        ch = random_channel(7, 7, 0.1, 3)
        with pytest.raises(CapacityError):
            map_marginals(ch, qam16_const, np.zeros(7))

    def test_non_uniform_prior_respected(self):
        from mimobp.channel import Constellation
        base = qpsk()
        skew = Constellation("QPSK", base.points, 2, base.bit_labels,
                             np.array([0.55, 0.15, 0.15, 0.15]))
        ch = random_channel(2, 2, 0.8, 19)
        _, _, y = received(ch, skew, 20)
        post = map_marginals(ch, skew, y)
        ref = enumeration_oracle(ch, skew, y)
        assert np.max(np.abs(post - ref)) < 1e-12
        zero = ChannelInstance(H=np.zeros((2, 2)), sigma2=1.0)
        assert np.allclose(map_marginals(zero, skew, np.zeros(2)), skew.prior)

    def test_per_observation_likelihood_product(self, qpsk_const):
        # the joint likelihood factorises over receive dimensions
        ch = random_channel(3, 4, 0.3, 44)
        g = np.random.default_rng(45)
        x = qpsk_const.points[g.integers(0, 4, 3)]
        y = ch.H @ x + 0.1 * (g.standard_normal(4) + 1j * g.standard_normal(4))
        joint = np.exp(-np.sum(np.abs(y - ch.H @ x) ** 2) / ch.sigma2) / (np.pi * ch.sigma2) ** 4
        per = np.prod([np.exp(-abs(y[k] - ch.H[k] @ x) ** 2 / ch.sigma2) / (np.pi * ch.sigma2)
                       for k in range(4)])
        assert joint == pytest.approx(per, rel=1e-10)


class TestLlr:
    def test_uniform_posterior_gives_zero(self, qpsk_const):
        post = np.full((3, 4), 0.25)
        assert np.allclose(llr_from_marginals(post, qpsk_const), 0.0)

    def test_one_hot_clamps(self, qpsk_const):
        post = np.zeros((1, 4))
        post[0, 2] = 1.0
        llr = llr_from_marginals(post, qpsk_const)
        signs = 1 - 2 * qpsk_const.bit_labels[2].astype(int)
        assert np.allclose(llr, 40.0 * signs)

    def test_matches_high_precision_log_ratio(self, qpsk_const):
        g = np.random.default_rng(10)
        post = g.dirichlet(np.ones(4), size=3)
        llr = llr_from_marginals(post, qpsk_const)
        mpmath.mp.dps = 60
        for j in range(3):
            for k in range(2):
                p0 = mpmath.mpf(0)
                p1 = mpmath.mpf(0)
                for s in range(4):
                    if qpsk_const.bit_labels[s, k] == 0:
                        p0 += mpmath.mpf(float(post[j, s]))
                    else:
                        p1 += mpmath.mpf(float(post[j, s]))
                ref = float(mpmath.log(p0 / p1))
                assert llr[j, k] == pytest.approx(ref, rel=1e-12, abs=1e-12)


class TestLmmse:
    def test_identity_channel(self):
        ch = ChannelInstance(H=np.eye(2), sigma2=1.0)
        y = np.array([1.0 + 1j, -2.0])
        res = lmmse(ch, y)
        assert np.allclose(res.estimates, y / 2)
        assert np.allclose(res.mmse, 0.5)

    def test_noise_dominated_limit(self):
        ch = ChannelInstance(H=draw_channel(3, 3, 2), sigma2=1e9)
        y = np.array([1.0, 1j, -1.0])
        res = lmmse(ch, y)
        assert np.max(np.abs(res.estimates)) < 1e-6
        assert np.allclose(res.mmse, 1.0, atol=1e-6)

    def test_mmse_strictly_inside_unit_interval(self):
        for seed in range(5):
            ch = random_channel(4, 4, 0.1, seed)
            res = lmmse(ch, np.zeros(4))
            assert np.all(res.mmse > 0) and np.all(res.mmse < 1)

    def test_filter_is_locally_optimal(self):
        # closed-form MSE of a linear filter row w: 1 - 2 Re(w^H h_j) + w^H K w
        ch = random_channel(4, 4, 0.3, 100)
        K = ch.H @ ch.H.conj().T + ch.sigma2 * np.eye(4)
        base_rows = np.linalg.solve(K, ch.H)  # column j = c_j

        def mse(w, j):
            return (1 - 2 * np.real(np.vdot(w, ch.H[:, j])) + np.real(np.vdot(w, K @ w)))

        g = np.random.default_rng(101)
        for j in range(4):
            w0 = base_rows[:, j]
            best = mse(w0, j)
            for _ in range(100):
                d = (g.standard_normal(4) + 1j * g.standard_normal(4)) * 0.05
                assert mse(w0 + d, j) >= best - 1e-12


class TestMlHard:
    def test_exact_lattice_point(self, qpsk_const):
        ch = random_channel(4, 4, 0.5, 55)
        g = np.random.default_rng(56)
        idx = g.integers(0, 4, 4)
        y = ch.H @ qpsk_const.points[idx]
        assert np.array_equal(ml_hard(ch, qpsk_const, y), idx)

    def test_zero_channel_tie_break(self, qpsk_const):
        ch = ChannelInstance(H=np.zeros((2, 2)), sigma2=1.0)
        assert np.array_equal(ml_hard(ch, qpsk_const, np.zeros(2)), [0, 0])

    def test_matches_joint_argmax_of_enumeration(self, qpsk_const):
        ch = random_channel(3, 3, 0.6, 57)
        _, _, y = received(ch, qpsk_const, 58)
        hard = ml_hard(ch, qpsk_const, y)
        best, best_idx = np.inf, None
        for idx in product(range(4), repeat=3):
            r = y - ch.H @ qpsk_const.points[list(idx)]
            v = np.vdot(r, r).real
            if v < best:
                best, best_idx = v, idx
        assert np.array_equal(hard, best_idx)
