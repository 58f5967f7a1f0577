import numpy as np
import pytest

from gamechain import rng


def test_same_address_same_stream():
    a = rng.generator(5, rng.CHAIN, 3).standard_normal(10)
    b = rng.generator(5, rng.CHAIN, 3).standard_normal(10)
    assert np.array_equal(a, b)


def test_streams_and_indices_are_distinct():
    base = rng.generator(5, rng.CHAIN, 0).standard_normal(4)
    assert not np.array_equal(base, rng.generator(5, rng.BRIDGE, 0).standard_normal(4))
    assert not np.array_equal(base, rng.generator(5, rng.CHAIN, 1).standard_normal(4))
    assert not np.array_equal(base, rng.generator(6, rng.CHAIN, 0).standard_normal(4))


def test_chunked_draws_equal_whole_draw():
    g = rng.generator(1, rng.MC)
    whole = g.standard_normal(1000)
    g = rng.generator(1, rng.MC)
    parts = np.concatenate([g.standard_normal(300), g.standard_normal(700)])
    assert np.array_equal(whole, parts)


def test_full_u64_seed_and_negative_rejected():
    rng.generator(2 ** 64 - 1, rng.CF).random()
    with pytest.raises(ValueError):
        rng.generator(-1, rng.CF)
