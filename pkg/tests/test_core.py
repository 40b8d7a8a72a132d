import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scusum import (InvalidArgumentError, SpatialField, TheoryInstance, all_offsets,
                    cusum_transform, cutoff_index, neighbor_size, order_summaries, partition,
                    signal_weights, summarize_block)
from scusum.core import BlockSummary, substream
from scusum.field import Block


def cusum_oracle(seq):
    """O(b^2) from-scratch CUSUM: every partial sum recomputed with fsum."""
    b = len(seq)
    total = math.fsum(seq)
    return [abs(math.fsum(seq[:r]) - r / b * total) for r in range(1, b + 1)]


def test_summarize_block_arithmetic():
    field = SpatialField(np.array([[2.0, 4.0, 6.0]]))
    block = Block(0, np.array([0, 1, 2]))
    draws = {}
    for seed in range(50):
        s = summarize_block(field, block, np.random.default_rng(seed))
        draws[s.gamma] = s.mu_tilde
    assert draws[4.0] == 4.0
    assert draws[2.0] == 5.0
    assert draws[6.0] == 3.0


def test_summarize_block_single_member():
    field = SpatialField(np.array([[5.0]]))
    s = summarize_block(field, Block(0, np.array([0])), np.random.default_rng(0))
    assert s.gamma == s.mu_tilde == 5.0


def test_summary_is_member_and_leave_one_out(noise_field):
    rng = np.random.default_rng(3)
    for block in partition(noise_field, 4, (1, 2)).blocks:
        s = summarize_block(noise_field, block, rng)
        vals = noise_field.flat[block.members]
        assert s.gamma in vals
        if block.n_i >= 2:
            assert s.mu_tilde == pytest.approx((vals.sum() - s.gamma) / (block.n_i - 1), rel=1e-12)


def test_representative_independent_of_pseudo_mean():
    # 10^4 blocks of 25 N(0,1) draws: sample correlation should vanish
    rng = np.random.default_rng(2024)
    field = SpatialField(rng.standard_normal((500, 500)))
    blocks = partition(field, 5).blocks
    pick = np.random.default_rng(7)
    g, mt = zip(*((s.gamma, s.mu_tilde) for s in (summarize_block(field, b, pick) for b in blocks)))
    r = np.corrcoef(g, mt)[0, 1]
    assert len(blocks) == 10_000
    assert abs(r) < 4 / math.sqrt(len(blocks))


def test_order_summaries_descending_with_id_ties():
    s = [BlockSummary(0.0, 1.0, 2), BlockSummary(1.0, 3.0, 0), BlockSummary(2.0, 1.0, 1)]
    ordered = order_summaries(s)
    assert [e.block_id for e in ordered.entries] == [0, 1, 2]
    assert ordered.b == 3
    assert list(ordered.gammas) == [1.0, 2.0, 0.0]


@pytest.mark.parametrize("c", [0.0, 3.7, -1e9, 0.1])
def test_cusum_constant_is_zero(c):
    assert np.all(cusum_transform([c] * 7) == 0)


def test_cusum_examples():
    assert np.allclose(cusum_transform([1, 1, 0, 0]), [0.5, 1.0, 0.5, 0.0], rtol=0, atol=1e-15)
    with pytest.raises(InvalidArgumentError):
        cusum_transform([])


def test_cusum_matches_oracle_random(rng):
    x = rng.normal(size=50)
    got = cusum_transform(x)
    assert np.allclose(got, cusum_oracle(list(x)), rtol=1e-12, atol=1e-12 * np.abs(x).sum())
    assert got[-1] == 0.0 and np.all(got >= 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=120), st.floats(-1e3, 1e3))
def test_cusum_shift_invariance(seq, shift):
    a = cusum_transform(seq)
    b = cusum_transform(np.asarray(seq) + shift)
    scale = (np.abs(seq).sum() + abs(shift) * len(seq)) or 1.0
    assert np.allclose(a, b, rtol=0, atol=1e-11 * scale)


def test_cutoff_index():
    assert cutoff_index([0.5, 1.0, 0.5, 0.0]) == 2
    assert cutoff_index([0.0, 0.0, 0.0]) == 1
    assert cutoff_index([1.0, 2.0, 2.0, 0.0]) == 2


def test_cutoff_step_sequence_delta_two():
    inst = TheoryInstance.step(b=400, theta=0.25, delta=2.0)
    hits = sum(90 <= cutoff_index(cusum_transform(inst.sample(substream(99, s)))) <= 110
               for s in range(200))
    assert hits >= 190


def test_theory_instance_ramp():
    inst = TheoryInstance(b=10, l1=2, l2=6, theta=0.4, delta=1.0)
    mu = inst.means()
    assert list(mu[:2]) == [1.0, 1.0]
    assert np.all(np.diff(mu[2:6]) < 0) and np.all((mu[2:6] > 0) & (mu[2:6] < 1))
    assert np.all(mu[6:] == 0)
    with pytest.raises(InvalidArgumentError):
        TheoryInstance(b=5, l1=4, l2=2, theta=0.5, delta=1.0)


def test_signal_weights_single_cell():
    w = signal_weights(SpatialField(np.array([[3.0]])), 1, 1, seed=0)
    assert w.weights[0, 0] == 1.0


def test_signal_weights_quantised_and_bounded(noise_field):
    w = signal_weights(noise_field, 3, m=2, seed=11)
    assert w.runs == 18
    assert np.all((w.weights >= 0) & (w.weights <= 1))
    assert np.array_equal(w.weights * 18, np.round(w.weights * 18))


def test_signal_weights_constant_field_bounded():
    w = signal_weights(SpatialField(np.full((20, 20), 1.5)), 4, m=1, seed=3)
    assert np.all((w.weights >= 0) & (w.weights <= 1))


def test_pure_noise_weights_symmetric_about_centre():
    means = []
    for s in range(10):
        x = np.random.default_rng(s).standard_normal((40, 40))
        means.append(signal_weights(SpatialField(x), 4, m=2, seed=100 + s, workers=1).weights.mean())
    assert abs(np.mean(means) - 0.5) < 0.05


def test_signal_weights_deterministic_across_workers(noise_field):
    a = signal_weights(noise_field, 3, m=4, seed=5, workers=1)
    b = signal_weights(noise_field, 3, m=4, seed=5, workers=3)
    c = signal_weights(noise_field, 3, m=4, seed=6, workers=1)
    assert np.array_equal(a.detections, b.detections)
    assert not np.array_equal(a.detections, c.detections)


def scalar_weights(field, k, m, seed):
    """Reference Algorithm-1 loop built from the per-block operations."""
    det = np.zeros(field.size, dtype=int)
    for rep in range(m):
        for oi, off in enumerate(all_offsets(k)):
            rng = substream(seed, rep, oi)
            blocks = partition(field, k, off).blocks
            summaries = [summarize_block(field, b, rng) for b in blocks]
            ordered = order_summaries(summaries)
            t = cutoff_index(cusum_transform(ordered.gammas))
            for e in ordered.entries[:t]:
                det[blocks[e.block_id].members] += 1
    return det.reshape(field.shape) / (m * k * k)


def test_vectorised_weights_match_scalar_loop(noise_field):
    got = signal_weights(noise_field, 4, m=2, seed=21, workers=1).weights
    assert np.array_equal(got, scalar_weights(noise_field, 4, 2, 21))


def test_signal_region_gets_high_weights():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((60, 60))
    x[10:40, 10:40] += 2.0
    w = signal_weights(SpatialField(x), 5, m=3, seed=1).weights
    assert w[15:35, 15:35].mean() > 0.9
    assert w[45:, 45:].mean() < 0.2


def test_neighbor_size():
    assert neighbor_size(10_000, 1.0) == 10
    assert neighbor_size(10_000, 0.0625) == 5
    assert neighbor_size(1, 0.5) == 1
    assert neighbor_size(1, 1.0) == 1
    assert neighbor_size(10_000, 1e6, max_k=40) == 40
    with pytest.raises(InvalidArgumentError):
        neighbor_size(0, 1.0)
