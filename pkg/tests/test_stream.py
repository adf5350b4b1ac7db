import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_extremes._core import _fallback
from noisy_extremes.stream import MASK64, RandomStream, derive_stream_id, trial_stream_ids

u64 = st.integers(min_value=0, max_value=MASK64)


def test_threefry_zero_vector():
    # Random123 known-answer vector for Threefry-2x64-20, all-zero key and counter
    w0, w1 = _fallback.threefry2x64(0, 0, 0, 0)
    assert (int(w0), int(w1)) == (0xC2B6E3A8C2C69865, 0x6F81ED42F350084D)


def test_threefry_frozen_reference_block():
    # cross-checked against an independent Threefry-2x64-20 implementation
    w0, w1 = _fallback.threefry2x64(1, 0, 5, 7)
    assert (int(w0), int(w1)) == (0xCFB3C5BEE2E16C4B, 0xD06A2315E70023BA)


def test_draw_layout_uses_both_words():
    raw = RandomStream(5, 7, counter=2).raw(2)
    w0, w1 = _fallback.threefry2x64(1, 0, 5, 7)
    assert raw.tolist() == [int(w0), int(w1)]


def test_frozen_uniforms():
    u = RandomStream(2024, 1).uniforms(4)
    again = RandomStream(2024, 1).uniforms(4)
    assert np.array_equal(u, again)
    assert np.all((u >= 0) & (u < 1))
    assert u.tolist() == _fallback.uniforms(2024, 1, 0, 4).tolist()


@given(seed=u64, stream=u64, counter=st.integers(0, 2 ** 40), n=st.integers(1, 40),
       split=st.integers(0, 40))
@settings(max_examples=60, deadline=None)
def test_stream_is_pure_function_of_counter(seed, stream, counter, n, split):
    split = min(split, n)
    whole = RandomStream(seed, stream, counter).uniforms(n)
    s = RandomStream(seed, stream, counter)
    parts = np.concatenate([s.uniforms(split), s.uniforms(n - split)])
    assert np.array_equal(whole, parts)
    assert s.counter == counter + n


def test_distinct_streams_differ():
    a = RandomStream(1, 10).uniforms(64)
    b = RandomStream(1, 11).uniforms(64)
    c = RandomStream(2, 10).uniforms(64)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_copy_is_independent_cursor():
    s = RandomStream(3, 4)
    t = s.copy()
    s.uniforms(5)
    assert t.counter == 0 and s.counter == 5


def test_derive_stream_id_stable():
    assert derive_stream_id("evl", 5000, 1.0) == derive_stream_id("evl", 5000, 1.0)
    assert derive_stream_id("evl", 5000, 1.0) != derive_stream_id("evl", 5000, 2.0)
    assert 0 <= derive_stream_id("x") <= MASK64


def test_trial_stream_ids_wrap():
    ids = trial_stream_ids(MASK64, 3)
    assert ids.tolist() == [MASK64, 0, 1]


def test_stream_rejects_bad_values():
    with pytest.raises(ValueError):
        RandomStream(-1, 0)
    with pytest.raises(ValueError):
        RandomStream(0, 1 << 64)


def test_uniform_moments():
    u = RandomStream(99, 5).uniforms(200_000)
    assert abs(u.mean() - 0.5) < 0.003
    assert abs(u.var() - 1 / 12) < 0.002
