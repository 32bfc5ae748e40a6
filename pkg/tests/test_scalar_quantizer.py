import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from funq import scalar_quantizer as sq
from funq.scalar_quantizer import (distortion_gradient, distortion_of, error_table, optimal_codebook,
                                   read_csv, stationarity_residual, write_csv)


def test_one_point():
    cb = optimal_codebook(1)
    assert list(cb.points) == [0.0]
    assert cb.distortion == 1.0


def test_two_points():
    cb = optimal_codebook(2)
    a = math.sqrt(2 / math.pi)
    assert np.allclose(cb.points, [-a, a], atol=1e-12)
    assert cb.distortion == pytest.approx(1 - 2 / math.pi, abs=1e-12)
    assert np.allclose(cb.probs, [0.5, 0.5], atol=1e-15)


def test_three_points():
    cb = optimal_codebook(3)
    assert np.allclose(cb.points, [-1.2240, 0, 1.2240], atol=1e-4)
    assert cb.distortion == pytest.approx(0.1902, abs=1e-4)


def test_distortion_of_examples():
    d, p = distortion_of([0.0])
    assert d == pytest.approx(1.0, abs=1e-15) and np.allclose(p, [1.0])


def test_distortion_of_far_points_monte_carlo():
    d, _ = distortion_of([-10.0, 10.0])
    z = np.random.default_rng(5).standard_normal(10**7)
    mc = np.mean((np.abs(z) - 10.0) ** 2)
    se = np.std((np.abs(z) - 10.0) ** 2) / math.sqrt(z.size)
    assert abs(d - mc) < 4 * se
    assert d == pytest.approx(101 - 20 * math.sqrt(2 / math.pi), rel=1e-12)


@pytest.mark.parametrize("n", [2, 5, 17, 64, 200])
def test_codebook_invariants(n):
    cb = optimal_codebook(n)
    a = np.asarray(cb.points)
    assert np.allclose(a, -a[::-1], atol=1e-10)
    assert abs(math.fsum(cb.probs) - 1) < 1e-12 and np.all(cb.probs > 0)
    assert np.max(np.abs(stationarity_residual(a))) < 1e-10
    assert cb.distortion == pytest.approx(1 - np.sum(a * a * cb.probs), abs=1e-10)


def test_distortion_strictly_decreasing_and_reproducible():
    prev = math.inf
    for n in range(1, 201):
        cb = optimal_codebook(n)
        assert cb.distortion < prev
        prev = cb.distortion
        assert abs(distortion_of(cb.points)[0] - cb.distortion) <= 1e-12


@pytest.mark.parametrize("n", [3, 8, 40])
def test_local_minimum(n):
    cb = optimal_codebook(n)
    base = cb.distortion
    for i in range(n):
        for h in (-1e-3, 1e-3):
            a = np.array(cb.points)
            a[i] += h
            assert distortion_of(a)[0] > base


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-6
    for _ in range(10):
        a = np.sort(rng.normal(0, 1.5, rng.integers(2, 12)))
        g = distortion_gradient(a)
        for i in range(a.size):
            ap, am = a.copy(), a.copy()
            ap[i] += h
            am[i] -= h
            fd = (distortion_of(ap)[0] - distortion_of(am)[0]) / (2 * h)
            assert g[i] == pytest.approx(fd, abs=1e-6)


def test_error_table():
    e = error_table(200)
    assert e[0] == 1.0
    assert e[1] ** 2 == pytest.approx(1 - 2 / math.pi, abs=1e-12)
    assert 200 ** 2 * e[199] ** 2 == pytest.approx(math.pi * math.sqrt(3) / 2, rel=0.02)


def test_quantize_index_nearest():
    cb = optimal_codebook(7)
    z = np.linspace(-4, 4, 1001)
    idx = cb.quantize_index(z)
    brute = np.argmin(np.abs(z[:, None] - np.asarray(cb.points)[None, :]), axis=1)
    assert np.array_equal(idx, brute)


def test_csv_round_trip(tmp_path):
    books = [optimal_codebook(n) for n in (1, 2, 9)]
    write_csv(tmp_path / "s.csv", books)
    back = read_csv(tmp_path / "s.csv")
    for cb in books:
        assert np.array_equal(back[cb.n].points, cb.points)
        assert back[cb.n].distortion == cb.distortion
    assert (tmp_path / "s.csv").read_bytes().count(b"\r") == 0


def test_disk_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("FUNQ_CACHE_DIR", str(tmp_path))
    cb = sq._solve(12)
    sq._store_on_disk(cb)
    back = sq._load_from_disk(12)
    assert np.array_equal(back.points, cb.points)


def test_large_n_converges():
    cb = optimal_codebook(1000)
    assert np.max(np.abs(stationarity_residual(cb.points))) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 300))
def test_codebook_property(n):
    cb = optimal_codebook(n)
    a = np.asarray(cb.points)
    assert np.all(np.diff(a) > 0)
    assert 0 < cb.distortion <= 1
    assert n * n * cb.distortion <= 2.73
