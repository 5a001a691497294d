import numpy as np

from isingcoex.rng import SLOTS, mix_int, stream_key, sweep_key, uniform, uniform_nb, uniforms


def test_pure_function_of_coordinates():
    k = sweep_key(stream_key(42, 3), 17)
    c = np.arange(1000, dtype=np.int64) * SLOTS
    a = uniforms(k, c)
    b = uniforms(k, c[::-1])[::-1]
    assert np.array_equal(a, b)
    assert uniform(k, 5 * SLOTS) == a[5]


def test_numba_matches_numpy():
    k = sweep_key(stream_key(7, 0), 2**40)
    for counter in (0, 1, 63, 64 * 4913 + 12, 2**40):
        assert uniform_nb(np.uint64(k), counter) == uniform(k, counter)


def test_streams_and_seeds_differ():
    keys = {stream_key(s, t) for s in range(20) for t in range(20)}
    assert len(keys) == 400
    assert sweep_key(stream_key(0, 0), 0) != sweep_key(stream_key(0, 0), 1)


def test_range_and_moments():
    u = uniforms(stream_key(1, 1), np.arange(200_000, dtype=np.int64))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / u.size)
    hist = np.bincount((u * 10).astype(int), minlength=10)
    chi2 = float(((hist - u.size / 10) ** 2 / (u.size / 10)).sum())
    assert chi2 < 30  # 9 degrees of freedom


def test_mix_is_64_bit():
    assert 0 <= mix_int(2**70 + 5) < 2**64
