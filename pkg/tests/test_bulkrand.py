import numpy as np

from vertab.bulkrand import bulk_indices, bulk_u64, feature_keys
from vertab.oplang.rng import RngState


def test_matches_scalar_stream():
    state = 0x123456789ABCDEF
    scalar = RngState(state)
    expected = [scalar.next_u64() for _ in range(100)]
    assert bulk_u64(state, 100).tolist() == expected


def test_offset_windows_align():
    state = 42
    whole = bulk_u64(state, 50)
    assert np.array_equal(bulk_u64(state, 20, offset=30), whole[30:])


def test_indices_in_range():
    idx = bulk_indices(7, 10_000, 13)
    assert idx.min() >= 0 and idx.max() < 13
    # all 13 values show up over ten thousand draws
    assert len(np.unique(idx)) == 13


def test_feature_keys_shape_and_determinism():
    a = feature_keys(99, 8, 5)
    b = feature_keys(99, 8, 5)
    assert a.shape == (8, 5)
    assert np.array_equal(a, b)
    assert len(np.unique(a)) == 40
