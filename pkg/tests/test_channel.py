import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from shufflecast.beamforming import mrt
from shufflecast.channel import (BeamformerSet, ChannelSet, DegenerateLinkError, compensate_demap,
                                 effective_link, equivalent_sinr, gain_matrix, gen_channels, receive,
                                 sinr, snr_db_to_sigma2, transmit, weighted_sinr)
from shufflecast.numerics import make_rng
from shufflecast.shuffle import gen_pattern, identity_pattern, map_c


def random_setup(seed, K=3, Nt=4):
    rng = make_rng(seed)
    h = gen_channels(Nt, K, rng).h
    v = (rng.standard_normal((K, Nt)) + 1j * rng.standard_normal((K, Nt))) / np.sqrt(2 * K * Nt)
    return h, v


class TestChannels:

    def test_mean_norm(self):
        h = gen_channels(8, 10 ** 5, make_rng(0)).h
        assert 0.99 <= np.mean(np.sum(np.abs(h) ** 2, axis=1)) <= 1.01

    def test_deterministic(self):
        assert_array_equal(gen_channels(4, 3, make_rng(1)).h, gen_channels(4, 3, make_rng(1)).h)

    def test_single_antenna(self):
        h = gen_channels(1, 10 ** 5, make_rng(2)).h
        assert h.shape == (10 ** 5, 1)
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)
        assert np.var(h.real) == pytest.approx(0.5, abs=0.01)

    def test_invalid(self):
        with pytest.raises(ValueError):
            ChannelSet(np.ones((2, 2)), 0.0)
        with pytest.raises(ValueError):
            ChannelSet(np.array([[np.nan]]), 1.0)

    def test_snr(self):
        assert snr_db_to_sigma2(10.0) == pytest.approx(0.1)
        assert snr_db_to_sigma2(0.0, P_T=2.0) == pytest.approx(2.0)


class TestTransmitReceive:

    def test_single_unit(self):
        v = np.zeros((1, 4), complex)
        v[0, 0] = 1
        x = transmit(np.ones((1, 3)), v)
        assert_array_equal(x, np.tile([1, 0, 0, 0], (3, 1)))

    def test_cancellation(self):
        rng = make_rng(3)
        z1 = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        v1 = rng.standard_normal(4) + 0j
        assert_allclose(transmit(np.stack([z1, -z1]), np.stack([v1, v1])), 0, atol=1e-15)

    def test_direct_sum(self):
        rng = make_rng(4)
        z = rng.standard_normal((3, 6)) + 1j * rng.standard_normal((3, 6))
        v = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        x = transmit(z, v)
        for n in range(6):
            assert_allclose(x[n], sum(v[k] * z[k, n] for k in range(3)), atol=1e-14)

    def test_stream_mismatch(self):
        with pytest.raises(ValueError):
            transmit(np.ones((2, 3)), np.ones((3, 4)))

    def test_noiseless(self):
        h, v = random_setup(5)
        z = np.ones((3, 4)) * (1 + 1j)
        x = transmit(z, v)
        assert_allclose(receive(x, h[0], 1.0, None), x @ h[0].conj())

    def test_noise_variance(self):
        y = receive(np.zeros((10 ** 5, 4)), np.ones(4), 0.3, make_rng(6))
        assert np.var(y.real) == pytest.approx(0.3, rel=0.02)
        assert np.var(y.imag) == pytest.approx(0.3, rel=0.02)

    def test_gain_matrix(self):
        h, v = random_setup(7)
        G = gain_matrix(h, v)
        for k in range(3):
            for m in range(3):
                assert G[k, m] == pytest.approx(np.vdot(h[k], v[m]), abs=1e-15)


class TestCompensateDemap:

    def test_single_user_exact(self):
        h, v = random_setup(8, K=1)
        p = gen_pattern(1, 16)
        f = make_rng(9).standard_normal(16)
        y = receive(transmit(map_c(f, p)[None], v), h[0], 1.0, None)
        alpha = abs(np.vdot(h[0], v[0]))
        assert_allclose(compensate_demap(y, h[0], v[0], p), alpha * f, rtol=1e-13, atol=1e-15)

    def test_zero(self):
        h, v = random_setup(10, K=1)
        assert_array_equal(compensate_demap(np.zeros(4, complex), h[0], v[0], identity_pattern(8)),
                           np.zeros(8))

    def test_degenerate(self):
        with pytest.raises(DegenerateLinkError):
            compensate_demap(np.zeros(2), np.array([1, 0]), np.array([0, 1]), identity_pattern(4))

    def test_two_user_interference(self):
        rng = make_rng(11)
        h, v = random_setup(12, K=2)
        dim, n_img = 512, 200
        resid = []
        for _ in range(n_img):
            f = rng.standard_normal((2, dim))
            keys = rng.integers(0, 2 ** 63, 2)
            pats = [gen_pattern(int(k), dim) for k in keys]
            x = transmit(np.stack([map_c(f[k], pats[k]) for k in range(2)]), v)
            y = receive(x, h[0], 1.0, None)
            resid.append(compensate_demap(y, h[0], v[0], pats[0]) - abs(np.vdot(h[0], v[0])) * f[0])
        assert np.var(np.concatenate(resid)) == pytest.approx(abs(np.vdot(h[0], v[1])) ** 2, rel=0.03)


class TestSinr:

    def test_single_user_link(self):
        h = gen_channels(4, 1, make_rng(13)).h
        v = np.sqrt(2.0) * h / np.linalg.norm(h)
        link = effective_link(h, v, 0.25, 0)
        assert link.alpha == pytest.approx(np.sqrt(2.0) * np.linalg.norm(h), rel=1e-14)
        assert link.tau == pytest.approx(0.5, rel=1e-14)

    def test_zero_forcing_tau(self):
        from shufflecast.beamforming import zf
        h = gen_channels(4, 3, make_rng(14)).h
        v = zf(h).v
        for k in range(3):
            assert effective_link(h, v, 0.1, k).tau == pytest.approx(np.sqrt(0.1), rel=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32), st.floats(0.01, 10))
    def test_link_brute_force(self, seed, sigma2):
        h, v = random_setup(seed)
        for k in range(3):
            link = effective_link(h, v, sigma2, k)
            interf = sum(abs(np.vdot(h[k], v[m])) ** 2 for m in range(3) if m != k)
            assert link.alpha == pytest.approx(abs(np.vdot(h[k], v[k])), rel=1e-12)
            assert link.tau ** 2 == pytest.approx(interf + sigma2, rel=1e-12)
            assert sinr(h, v, sigma2, k) == pytest.approx(link.alpha ** 2 / link.tau ** 2, rel=1e-12)

    def test_equivalent_equals_sinr_at_budget(self):
        h, v = random_setup(15)
        bf = BeamformerSet(v, 1.0).normalized()
        assert_allclose(equivalent_sinr(h, bf.v, 0.2, 1.0), sinr(h, bf.v, 0.2), rtol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32), st.floats(1e-3, 1e3))
    def test_homogeneity(self, seed, t):
        h, v = random_setup(seed)
        assert_allclose(equivalent_sinr(h, t * v, 0.3, 1.0), equivalent_sinr(h, v, 0.3, 1.0), rtol=1e-12)

    def test_scalar_hand_case(self):
        h = np.ones((2, 1), complex)
        v = np.ones((2, 1), complex)
        assert sinr(h, v, 1.0, 0) == pytest.approx(0.5)
        assert equivalent_sinr(h, v, 1.0, 2.0, 0) == pytest.approx(0.5)

    def test_weighted(self):
        h, v = random_setup(16)
        assert_allclose(weighted_sinr(h, v, 0.4, None, np.ones((3, 3))), sinr(h, v, 0.4))
        zero = weighted_sinr(h, v, 0.4, None, np.eye(3))
        assert_allclose(zero, np.abs(np.diag(gain_matrix(h, v))) ** 2 / 0.4)
        W = np.ones((3, 3))
        W[0, 1] = 0.5
        G2 = np.abs(gain_matrix(h, v)) ** 2
        expect = G2[0, 0] / (0.4 + 0.5 * G2[0, 1] + G2[0, 2])
        assert weighted_sinr(h, v, 0.4, 0, W) == pytest.approx(expect, rel=1e-12)

    def test_chain_residual_is_white(self):
        # pooled residual of the full chain behaves like tau * N(0, 1)
        rng = make_rng(17)
        h = gen_channels(8, 8, rng).h
        v = mrt(h).v
        sigma2 = 0.1
        dim, images = 512, 30
        resid, sources = [], []
        link = effective_link(h, v, sigma2, 0)
        for _ in range(images):
            f = rng.standard_normal((8, dim))
            pats = [gen_pattern(int(k), dim) for k in rng.integers(0, 2 ** 63, 8)]
            x = transmit(np.stack([map_c(f[k], pats[k]) for k in range(8)]), v)
            y = receive(x, h[0], sigma2, rng)
            resid.append(compensate_demap(y, h[0], v[0], pats[0]) - link.alpha * f[0])
            sources.append(f[0])
        r, s = np.concatenate(resid), np.concatenate(sources)
        assert abs(r.mean()) < 0.01
        assert r.var() == pytest.approx(link.tau ** 2, rel=0.02)
        assert abs(np.corrcoef(r, s)[0, 1]) < 0.02
