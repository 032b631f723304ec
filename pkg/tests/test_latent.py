import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from shufflecast.latent import (LatentFormatError, LatentSourceConfig, generate_batch,
                                generate_latent, load_latent_file, normalize_power,
                                parse_source_spec, source_covariance, write_latent_file)
from shufflecast.numerics import DegenerateInputError, make_rng, sample_autocov

ALL_SOURCES = ["iid", "ar1:0.9", "ar1:-0.5", "block:8:0.5", "block:4:-0.2", "t:5"]


class TestGenerate:

    def test_iid_variance(self):
        batch = generate_batch(LatentSourceConfig(512), 1000, make_rng(0))
        assert 0.97 <= batch.var() <= 1.03

    def test_ar1_lag1(self):
        batch = generate_batch(parse_source_spec("ar1:0.9"), 200, make_rng(1))
        assert 0.87 <= sample_autocov(batch, 1)[0] <= 0.93

    def test_zero_power(self):
        f = generate_latent(LatentSourceConfig(16, power_scale=0.0), make_rng(2))
        assert_array_equal(f, np.zeros(16))

    @pytest.mark.parametrize("spec", ALL_SOURCES)
    def test_unit_marginal_variance(self, spec):
        cfg = parse_source_spec(spec, dim=256)
        batch = generate_batch(cfg, 400, make_rng(3))
        # heavy tails inflate the variance of the variance estimator
        tol = (12 if spec.startswith("t") else 6) / np.sqrt(batch.size)
        if spec.startswith(("ar1", "block")):
            tol *= 6  # correlated elements reduce the effective sample size
        assert abs(batch.var() - 1) < tol

    @pytest.mark.parametrize("spec", ["block:8:0.5", "block:4:-0.2", "ar1:0.6"])
    def test_covariance_matches_declared(self, spec):
        cfg = parse_source_spec(spec, dim=16)
        batch = generate_batch(cfg, 40000, make_rng(4))
        emp = batch.T @ batch / batch.shape[0]
        assert_allclose(emp, source_covariance(cfg), atol=0.03)

    def test_power_scale(self):
        batch = generate_batch(LatentSourceConfig(64, power_scale=0.25), 2000, make_rng(5))
        assert batch.var() == pytest.approx(0.25, rel=0.03)

    def test_shuffle_preserves_multiset(self):
        f = generate_latent(parse_source_spec("ar1:0.9", dim=64), make_rng(6))
        assert_array_equal(np.sort(f[make_rng(7).permutation(64)]), np.sort(f))

    @pytest.mark.parametrize("kwargs", [dict(dim=5), dict(dim=2), dict(structure="ar1", rho=1.0),
                                        dict(structure="heavy-tail", dof=2.0),
                                        dict(structure="nope"),
                                        dict(structure="block-correlated", block_size=4, rho=-0.5)])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            LatentSourceConfig(**kwargs)

    def test_parse_errors(self):
        for bad in ["ar1", "block:8", "zzz", "t:1"]:
            with pytest.raises(ValueError):
                parse_source_spec(bad)


class TestNormalizePower:

    def test_already_unit(self):
        assert_array_equal(normalize_power([1, 1, 1, 1], 1.0), [1, 1, 1, 1])
        assert_array_equal(normalize_power([2, 0, 0, 0], 1.0), [2, 0, 0, 0])

    def test_random_target(self):
        out = normalize_power(make_rng(8).standard_normal(100), 0.25)
        assert abs(np.mean(out ** 2) - 0.25) < 1e-12

    def test_zero(self):
        with pytest.raises(DegenerateInputError):
            normalize_power(np.zeros(4), 1.0)


class TestSemlat1:

    def test_two_vectors(self, tmp_path):
        path = tmp_path / "a.bin"
        data = np.arange(8, dtype=np.float32).reshape(2, 4)
        write_latent_file(path, data)
        raw = path.read_bytes()
        assert raw[:8] == b"SEMLAT1\x00"
        assert struct.unpack("<II", raw[8:16]) == (2, 4)
        assert_array_equal(load_latent_file(path), data)

    def test_empty(self, tmp_path):
        path = tmp_path / "e.bin"
        path.write_bytes(b"SEMLAT1\x00" + struct.pack("<II", 0, 4))
        assert load_latent_file(path).shape == (0, 4)

    def test_truncated_offset(self, tmp_path):
        path = tmp_path / "t.bin"
        path.write_bytes(b"SEMLAT1\x00" + struct.pack("<II", 1, 4) + np.zeros(3, "<f4").tobytes())
        with pytest.raises(LatentFormatError) as info:
            load_latent_file(path)
        assert info.value.offset == 16 + 12

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.bin"
        path.write_bytes(b"SEMLAT2\x00" + struct.pack("<II", 0, 4))
        with pytest.raises(LatentFormatError) as info:
            load_latent_file(path)
        assert info.value.offset == 0

    def test_dim_mismatch(self, tmp_path):
        path = tmp_path / "d.bin"
        write_latent_file(path, np.zeros((1, 4)))
        with pytest.raises(LatentFormatError) as info:
            load_latent_file(path, expected_dim=8)
        assert info.value.offset == 12

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "x.bin"
        write_latent_file(path, np.zeros((1, 4)))
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(LatentFormatError):
            load_latent_file(path)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 5), st.integers(1, 9), st.integers(0, 2 ** 32))
    def test_roundtrip_byte_identical(self, tmp_path_factory, count, dim, seed):
        d = tmp_path_factory.mktemp("rt")
        data = make_rng(seed).standard_normal((count, dim)).astype(np.float32)
        a, b = d / "a.bin", d / "b.bin"
        write_latent_file(a, data)
        loaded = load_latent_file(a)
        assert loaded.tobytes() == data.tobytes()
        write_latent_file(b, loaded)
        assert a.read_bytes() == b.read_bytes()
