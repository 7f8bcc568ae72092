import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diverse_dqn.replay import NotReadyError, ReplayBuffer, Transition


def tr(k: int) -> Transition:
    return Transition(np.array([float(k)]), k % 3, float(k), np.array([k + 1.0]), False)


def test_push_and_size():
    buf = ReplayBuffer(5, 1)
    buf.push(tr(0))
    assert len(buf) == 1


def test_fifo_eviction():
    buf = ReplayBuffer(2, 1)
    for k in range(3):
        buf.push(tr(k))
    assert [t.r for t in buf.items()] == [1.0, 2.0]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(0, 80))
def test_size_bounded(capacity, pushes):
    buf = ReplayBuffer(capacity, 1)
    for k in range(pushes):
        buf.push(tr(k))
        assert len(buf) <= capacity
    assert len(buf) == min(capacity, pushes)
    assert [t.r for t in buf.items()] == [float(k) for k in range(max(0, pushes - capacity), pushes)]


def test_single_item_sample():
    buf = ReplayBuffer(4, 1)
    buf.push(tr(7))
    (t,) = buf.sample(1).transitions()
    assert t.r == 7.0 and t.a == 1


def test_not_ready():
    buf = ReplayBuffer(4, 1)
    buf.push(tr(0))
    with pytest.raises(NotReadyError):
        buf.sample(2)


def test_deterministic_sampling():
    def draws(seed):
        buf = ReplayBuffer(100, 1, seed=seed)
        for k in range(50):
            buf.push(tr(k))
        return np.concatenate([buf.sample(8).r for _ in range(10)])

    np.testing.assert_array_equal(draws(3), draws(3))


def test_uniform_sampling():
    buf = ReplayBuffer(10, 1, seed=1)
    for k in range(10):
        buf.push(tr(k))
    draws = np.concatenate([buf.sample(10).r for _ in range(10_000)])
    counts = np.bincount(draws.astype(int), minlength=10) / draws.size
    np.testing.assert_allclose(counts, 0.1, atol=0.01)


def test_non_finite_reward_rejected():
    buf = ReplayBuffer(3, 1)
    with pytest.raises(ValueError):
        buf.push(Transition(np.zeros(1), 0, float("nan"), np.zeros(1), False))
