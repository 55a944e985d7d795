"""Intrinsic confidence reward computed from next-token distributions.

The reward never decodes text: one forward pass over prompt embeddings with
K latent vectors appended yields a distribution per position, and the score
is the mean over the K latent positions of the mean negative log-probability
of each position's top-k tokens.  All logs are natural (nats) and every
probability is clamped to ``PROB_FLOOR`` before the log.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PROB_FLOOR


@dataclass(frozen=True)
class RewardReport:
    """Per-latent-position confidences and their mean."""

    per_position: np.ndarray  # (K,) confidences, nats
    mean_reward: float
    top_k: int


def top_k_indices(row: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k most probable tokens, highest first.

    Ties break toward the lowest token id.  Uses partial selection rather
    than a full vocabulary sort; only the selected block is ordered.
    """
    v = row.shape[-1]
    if not 1 <= k <= v:
        raise ValueError(f"top-k must be in [1, {v}], got {k}")
    block = np.argpartition(-row, k - 1)[:k]
    threshold = row[block].min()
    chosen = np.flatnonzero(row > threshold)
    tied = np.flatnonzero(row == threshold)[: k - chosen.size]
    idx = np.concatenate([chosen, tied])
    order = np.lexsort((idx, -row[idx]))  # prob desc, id asc
    return idx[order]


def position_confidence(row, k: int) -> float:
    """Mean negative log-probability of the top-k tokens of one position."""
    row = np.asarray(row, dtype=np.float64)
    idx = top_k_indices(row, k)
    logs = np.log(np.maximum(row[idx], PROB_FLOOR))
    return float(-logs.mean())


def top_log_probs_from_row(row, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-m (token ids, floored log-probs) of one distribution row.

    Entries are sorted by probability descending with token-id tiebreak; the
    logs are ``log(max(p, PROB_FLOOR))``, i.e. exactly the quantities the
    confidence reward consumes.  Taking the first k <= m log-probs and
    negating their mean reproduces ``position_confidence`` bit for bit,
    which is what makes truncated (wire-transported) distributions exact.
    """
    row = np.asarray(row, dtype=np.float64)
    idx = top_k_indices(row, m)
    return idx, np.log(np.maximum(row[idx], PROB_FLOOR))


def confidence_from_top_log_probs(log_probs, k: int) -> float:
    """Confidence from a descending-sorted, floored log-prob vector."""
    lp = np.asarray(log_probs, dtype=np.float64)
    if lp.size < k:
        raise ValueError(
            f"need at least k={k} log-probs, got {lp.size}; the source "
            "truncation top_m must be >= k"
        )
    return float(-lp[:k].mean())


def sequence_reward(rows, k: int) -> RewardReport:
    """Average the per-position confidences of the K latent positions."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.shape[0] == 0:
        raise ValueError("sequence_reward requires at least one distribution row")
    per = np.array([position_confidence(r, k) for r in rows])
    return RewardReport(per, float(per.mean()), k)


def evaluate_action(model, prompt_emb, action, k: int) -> RewardReport:
    """Score one candidate latent matrix with a single forward pass.

    Concatenates the prompt embeddings with the K action rows, runs the
    model once, and computes the reward over the final K positions only.
    No decoding happens here.
    """
    prompt = np.asarray(prompt_emb, dtype=np.float64)
    act = np.asarray(action, dtype=np.float64)
    if act.ndim != 2 or act.shape[0] < 1:
        raise ValueError(f"action must be a (K>=1, d) matrix, got shape {act.shape}")
    if prompt.ndim != 2 or prompt.shape[1] != act.shape[1]:
        raise ValueError(
            f"prompt width {prompt.shape} does not match action width {act.shape}"
        )
    num_latents = act.shape[0]
    x = np.concatenate([prompt, act], axis=0)
    if hasattr(model, "forward_distributions"):
        rows = model.forward_distributions(x)
        return sequence_reward(rows[-num_latents:], k)
    # Remote models ship truncated top-m log-probs instead of full rows.
    _, log_probs = model.forward_top_log_probs(x, k)
    per = np.array(
        [confidence_from_top_log_probs(lp, k) for lp in log_probs[-num_latents:]]
    )
    return RewardReport(per, float(per.mean()), k)


def evaluate_actions_batch(model, prompt_emb, actions, k: int) -> np.ndarray:
    """Rewards for a (B, K, d) stack of actions.

    Fast path for Monte Carlo tooling (gradient checks, smoothing
    estimates); equivalent to mapping ``evaluate_action`` over the batch but
    computed with one vectorized forward when the model supports it (the
    vectorized route does not tick per-call forward counters).
    """
    actions = np.asarray(actions, dtype=np.float64)
    if actions.ndim != 3:
        raise ValueError(f"expected (B, K, d) actions, got shape {actions.shape}")
    batch, num_latents, _ = actions.shape
    prompt = np.asarray(prompt_emb, dtype=np.float64)
    if not hasattr(model, "forward_distributions_batch"):
        return np.array(
            [evaluate_action(model, prompt, a, k).mean_reward for a in actions]
        )
    if not 1 <= k <= model.descriptor.vocab_size:
        raise ValueError(f"top-k must be in [1, {model.descriptor.vocab_size}], got {k}")
    x = np.concatenate(
        [np.broadcast_to(prompt, (batch, *prompt.shape)), actions], axis=1
    )
    probs = model.forward_distributions_batch(x)[:, -num_latents:, :]
    top = np.sort(probs, axis=-1)[..., -k:]
    conf = -np.log(np.maximum(top, PROB_FLOOR)).mean(axis=-1)
    return conf.mean(axis=-1)
