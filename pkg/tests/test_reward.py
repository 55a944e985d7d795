import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltpo.model import CountingModel, build_toy_lm
from ltpo.reward import (
    confidence_from_top_log_probs,
    evaluate_action,
    evaluate_actions_batch,
    position_confidence,
    sequence_reward,
    top_k_indices,
    top_log_probs_from_row,
)


def sort_oracle(row, k):
    """Full-sort top-k selection: probability descending, id ascending."""
    order = np.lexsort((np.arange(row.size), -row))
    return order[:k]


def make_row(values, size=32):
    row = np.zeros(size)
    row[: len(values)] = values
    return row


class TestTopKSelection:
    def test_matches_sort_oracle_random(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            v = int(rng.integers(4, 64))
            row = rng.dirichlet(np.ones(v))
            k = int(rng.integers(1, v + 1))
            np.testing.assert_array_equal(
                top_k_indices(row, k), sort_oracle(row, k)
            )

    def test_matches_sort_oracle_with_ties(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            # heavy ties: few distinct values
            v = int(rng.integers(6, 40))
            row = rng.choice([0.0, 0.1, 0.2], size=v)
            row = row / max(row.sum(), 1.0)
            k = int(rng.integers(1, v + 1))
            np.testing.assert_array_equal(
                top_k_indices(row, k), sort_oracle(row, k)
            )

    def test_uniform_takes_lowest_ids(self):
        row = np.full(32, 1.0 / 32)
        np.testing.assert_array_equal(top_k_indices(row, 5), np.arange(5))

    def test_k_out_of_range(self):
        row = np.full(8, 1.0 / 8)
        with pytest.raises(ValueError):
            top_k_indices(row, 0)
        with pytest.raises(ValueError):
            top_k_indices(row, 9)


class TestPositionConfidence:
    def test_uniform_is_log_vocab(self):
        row = np.full(32, 1.0 / 32)
        for k in (1, 2, 10, 32):
            assert abs(position_confidence(row, k) - math.log(32)) < 1e-9

    def test_two_point_half_half(self):
        row = make_row([0.5, 0.5])
        assert abs(position_confidence(row, 2) - math.log(2)) < 1e-12

    def test_skewed_row_against_sort_oracle(self):
        row = make_row([0.9, 0.05, 0.05])
        idx = sort_oracle(row, 2)
        expected = -np.log(row[idx]).mean()
        assert position_confidence(row, 2) == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(-(math.log(0.9) + math.log(0.05)) / 2)

    def test_floor_applied_to_zero_probs(self):
        row = make_row([1.0])
        # ranks 2..k have probability zero; each contributes -log(1e-12)
        got = position_confidence(row, 2)
        assert got == pytest.approx(-math.log(1e-12) / 2)

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            row = rng.dirichlet(np.ones(16))
            assert position_confidence(row, int(rng.integers(1, 17))) >= 0.0

    def test_invariant_to_mass_moves_outside_top_k(self):
        row = np.array([0.4, 0.3, 0.1, 0.08, 0.06, 0.04, 0.015, 0.005])
        perturbed = row.copy()
        perturbed[4], perturbed[5] = 0.05, 0.05  # same total, still below top-3
        assert np.isclose(perturbed.sum(), 1.0)
        assert position_confidence(row, 3) == position_confidence(perturbed, 3)

    @given(
        p=st.floats(min_value=0.02, max_value=0.98),
        q=st.floats(min_value=0.01, max_value=0.99),
    )
    @settings(max_examples=200, deadline=None)
    def test_k1_strictly_decreasing_in_top_prob(self, p, q):
        # two rows differing in their maximum probability
        lo, hi = sorted([p, q])
        if hi - lo < 1e-9:
            return
        row_lo = make_row([lo] + [(1 - lo) / 31] * 31, size=32)
        row_hi = make_row([hi] + [(1 - hi) / 31] * 31, size=32)
        if row_lo.argmax() != 0 or row_hi.argmax() != 0:
            return
        assert position_confidence(row_hi, 1) < position_confidence(row_lo, 1)


class TestSequenceReward:
    def test_single_row_mean(self):
        row = np.full(32, 1.0 / 32)
        report = sequence_reward([row], 4)
        assert report.mean_reward == report.per_position[0]

    def test_uniform_rows(self):
        rows = np.full((3, 32), 1.0 / 32)
        report = sequence_reward(rows, 10)
        assert report.mean_reward == pytest.approx(math.log(32), abs=1e-9)
        assert report.per_position.shape == (3,)

    def test_mixed_rows_recompute(self):
        rows = np.stack([make_row([0.5, 0.5]), make_row([0.9, 0.05, 0.05])])
        report = sequence_reward(rows, 2)
        expected = np.mean([
            position_confidence(rows[0], 2),
            position_confidence(rows[1], 2),
        ])
        assert report.mean_reward == pytest.approx(expected, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            sequence_reward(np.zeros((0, 8)), 2)

    def test_mean_matches_per_position(self):
        rng = np.random.default_rng(9)
        rows = rng.dirichlet(np.ones(16), size=5)
        report = sequence_reward(rows, 3)
        assert abs(report.mean_reward - report.per_position.mean()) < 1e-9


class _FixedRowsModel:
    """Stub returning canned rows for the final K positions, ones elsewhere."""

    def __init__(self, tail_rows):
        self.tail_rows = np.asarray(tail_rows)

    def forward_distributions(self, x):
        n = x.shape[0]
        k, v = self.tail_rows.shape
        rows = np.full((n, v), 1.0 / v)
        rows[-k:] = self.tail_rows
        return rows


class TestEvaluateAction:
    def test_rejects_empty_action(self, toy32):
        prompt = toy32.embed([3, 4])
        with pytest.raises(ValueError):
            evaluate_action(toy32, prompt, np.zeros((0, 16)), 5)

    def test_rejects_width_mismatch(self, toy32):
        prompt = toy32.embed([3, 4])
        with pytest.raises(ValueError):
            evaluate_action(toy32, prompt, np.zeros((2, 8)), 5)

    def test_zero_projection_reward_is_log_vocab(self):
        model = build_toy_lm(seed=3, vocab_size=32, hidden_dim=16, layers=2)
        model.head_w[:] = 0.0
        prompt = model.embed([4, 5, 6])
        rng = np.random.default_rng(0)
        for _ in range(5):
            action = rng.standard_normal((3, 16)) * rng.uniform(0.1, 10)
            report = evaluate_action(model, prompt, action, 10)
            assert report.mean_reward == pytest.approx(math.log(32), abs=1e-9)

    def test_matches_manual_composition(self, toy32):
        prompt = toy32.embed(toy32.tokenize("What is 2+2?"))
        action = toy32.embed([toy32.descriptor.think_token_id] * 2)
        report = evaluate_action(toy32, prompt, action, 5)

        rows = toy32.forward_distributions(np.concatenate([prompt, action]))
        manual = sequence_reward(rows[-2:], 5)
        assert report.mean_reward == manual.mean_reward
        np.testing.assert_array_equal(report.per_position, manual.per_position)

    def test_counts_one_forward_zero_decodes(self, toy32):
        counting = CountingModel(toy32)
        prompt = counting.embed([3, 4, 5])
        evaluate_action(counting, prompt, np.zeros((2, 16)), 5)
        assert counting.forward_passes == 1
        assert counting.decode_calls == 0

    def test_reward_ignores_prompt_length_for_fixed_tail(self):
        tail = np.stack([make_row([0.5, 0.5], 16), make_row([0.9, 0.1], 16)])
        model = _FixedRowsModel(tail)
        short = evaluate_action(model, np.zeros((2, 4)), np.zeros((2, 4)), 2)
        long = evaluate_action(model, np.zeros((9, 4)), np.zeros((2, 4)), 2)
        assert short.mean_reward == long.mean_reward
        np.testing.assert_array_equal(short.per_position, long.per_position)


class TestTruncatedPath:
    def test_top_log_probs_prefix_reproduces_confidence(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            row = rng.dirichlet(np.ones(24))
            _, lp = top_log_probs_from_row(row, 10)
            for k in (1, 3, 10):
                assert confidence_from_top_log_probs(lp, k) == \
                    position_confidence(row, k)

    def test_truncation_too_small_rejected(self):
        with pytest.raises(ValueError, match="top_m"):
            confidence_from_top_log_probs(np.array([-0.1, -0.2]), 3)


class TestBatchRewards:
    def test_matches_single_path(self, toy32):
        rng = np.random.default_rng(8)
        prompt = toy32.embed([3, 4, 5])
        actions = rng.standard_normal((6, 2, 16))
        batch = evaluate_actions_batch(toy32, prompt, actions, 5)
        single = [
            evaluate_action(toy32, prompt, a, 5).mean_reward for a in actions
        ]
        np.testing.assert_allclose(batch, single, rtol=1e-12)
