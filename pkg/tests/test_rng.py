import numpy as np

from netnorm import rng


def test_same_key_same_stream():
    a = rng.stream(5, "x", 1, 2).standard_normal(8)
    b = rng.stream(5, "x", 1, 2).standard_normal(8)
    np.testing.assert_array_equal(a, b)


def test_keys_separate_streams():
    base = rng.stream(5, "x", 1).standard_normal(4)
    for other in (rng.stream(6, "x", 1), rng.stream(5, "y", 1), rng.stream(5, "x", 2)):
        assert not np.array_equal(base, other.standard_normal(4))


def test_large_seed():
    rng.stream(2**64 - 1, "x").random()
