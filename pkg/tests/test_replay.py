import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from duelforge.replay import PrioritizedBuffer, SumTree, Transition


def obs(v=0):
    return np.full(128, v, dtype=np.uint8)


def filled(n, capacity=None, alpha=0.6):
    buf = PrioritizedBuffer(capacity or n, alpha=alpha)
    for i in range(n):
        buf.push(obs(i % 256), i % 4, 0.0, obs((i + 1) % 256), False)
    return buf


def test_sum_tree_root_and_find():
    t = SumTree(5)
    t.set(np.arange(5), [1.0, 2.0, 3.0, 0.0, 4.0])
    assert t.total == 10.0
    assert list(t.find(np.array([0.0, 0.99, 1.0, 2.9, 3.0, 5.99, 6.0, 9.99]))) == [0, 0, 1, 1, 2, 2, 4, 4]


def test_sum_tree_duplicate_writes_last_wins():
    t = SumTree(4)
    t.set(np.array([1, 1, 2]), np.array([5.0, 7.0, 1.0]))
    assert t.total == 8.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 12), st.floats(0, 100)), min_size=1, max_size=200))
def test_sum_tree_root_tracks_leaves(ops):
    t = SumTree(13)
    for idx, v in ops:
        t.set(idx, v)
    assert t.total == pytest.approx(t.leaves().sum(), rel=1e-12, abs=1e-12)


def test_transition_validation():
    with pytest.raises(ValueError):
        Transition(b"\0" * 127, 0, 0.0, b"\0" * 128, False)
    with pytest.raises(ValueError):
        Transition(b"\0" * 128, 0, 1.5, b"\0" * 128, False)


def test_push_rejects_unclipped_reward():
    with pytest.raises(ValueError):
        PrioritizedBuffer(4).push(obs(), 0, 2.0, obs(), False)


def test_new_transitions_get_max_priority():
    buf = filled(4)
    buf.update_priorities([0], [3.0])
    s = buf.push(obs(), 0, 0.0, obs(), False)
    assert buf.priorities[s % buf.capacity] == pytest.approx(3.0 + 1e-5)


def test_ring_overwrites_oldest():
    buf = filled(6, capacity=4)
    assert len(buf) == 4
    assert not buf.contains(1) and buf.contains(2) and buf.contains(5)
    assert buf.get(5).obs == obs(5).tobytes()
    with pytest.raises(KeyError):
        buf.get(0)


def test_get_round_trips_transition():
    buf = PrioritizedBuffer(3)
    t = Transition(bytes(range(128)), 2, -1.0, bytes(range(1, 129)), True, player=1)
    assert buf.get(buf.push_transition(t)) == t


def test_priority_from_td_error():
    buf = filled(4)
    buf.update_priorities([0, 1, 2, 3], [0.0, -2.0, 0.5, 1.0])
    assert np.allclose(buf.priorities, [1e-5, 2.00001, 0.50001, 1.00001])
    p = buf.priorities**0.6
    assert np.allclose(buf.probabilities(), p / p.sum())


def test_stale_update_is_skipped():
    buf = filled(4)
    before = buf.priorities.copy()
    filled_more = [buf.push(obs(), 0, 0.0, obs(), False) for _ in range(2)]
    buf.update_priorities([0, filled_more[0]], [9.0, 0.5])
    assert buf.stale_updates == 1
    assert buf.priorities[filled_more[0] % 4] == pytest.approx(0.50001)
    assert buf.priorities[2] == before[2]


def test_sample_requires_enough_items():
    with pytest.raises(ValueError):
        filled(3).sample(4, 0.4, np.random.default_rng(0))


def test_is_weights_formula():
    buf = filled(16)
    rng = np.random.default_rng(0)
    buf.update_priorities(np.arange(16), rng.random(16) * 3)
    idx, batch, w = buf.sample(8, 0.4, np.random.default_rng(1))
    probs = buf.probabilities()[idx % 16]
    ref = (16 * probs) ** -0.4
    assert np.allclose(w, ref / ref.max(), rtol=1e-12)
    assert w.max() == 1.0
    assert set(batch) == {"obs", "actions", "rewards", "next_obs", "terminals", "players"}


def test_beta_one_weights_inverse_probability():
    buf = filled(8)
    buf.update_priorities(np.arange(8), np.arange(8) + 0.5)
    idx, _, w = buf.sample(8, 1.0, np.random.default_rng(3))
    p = buf.probabilities()[idx % 8]
    assert np.allclose(w, p.min() / p)


def test_sampling_is_stratified():
    buf = filled(8)
    # equal priorities: each stratum covers exactly one item
    idx, _, _ = buf.sample(8, 0.4, np.random.default_rng(0))
    assert sorted(idx) == list(range(8))


def test_sampling_follows_priorities_quick():
    buf = filled(16)
    r = np.random.default_rng(5)
    buf.update_priorities(np.arange(16), r.random(16) * 4)
    counts = np.zeros(16)
    rng = np.random.default_rng(6)
    for _ in range(2000):
        counts += np.bincount(buf.sample_slots(16, rng), minlength=16)
    assert np.abs(counts / counts.sum() - buf.probabilities()).max() < 0.01


def test_clear():
    buf = filled(4)
    buf.clear()
    assert len(buf) == 0 and buf.pushed == 0 and buf.tree.total == 0.0 and buf.max_priority == 1.0


def test_feature_store_round_trip_and_clear():
    buf = PrioritizedBuffer(4)
    buf.attach_features(3, 2)
    with pytest.raises(ValueError):
        buf.push(obs(), 0, 0.0, obs(), False)
    for i in range(4):
        buf.push(obs(i), 0, 0.0, obs(i + 1), False, features=[i, i, i], next_features=[i + 1] * 3)
    _, batch, _ = buf.sample(4, 1.0, np.random.default_rng(0))
    assert batch["features"].dtype == np.float32
    assert np.array_equal(batch["features"][:, 0], batch["obs"][:, 0])
    assert np.array_equal(batch["next_features"][:, 0], batch["next_obs"][:, 0])
    buf.clear()
    assert buf.feature_depth == 2 and buf.features.shape == (4, 3)


def test_features_need_an_empty_buffer():
    buf = filled(2)
    with pytest.raises(RuntimeError):
        buf.attach_features(3, 2)
