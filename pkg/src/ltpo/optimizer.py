"""Test-time policy-gradient loop over latent thought vectors.

The latent matrix H is the policy's only parameter.  Each step samples one
Gaussian perturbation around H, scores the perturbed action with the
confidence reward (a single forward pass, no decoding), forms the
single-sample REINFORCE estimate ``reward * eps / sigma**2``, and ascends.
The exploration scale follows a per-step geometric schedule
``sigma_t = sigma0 * sigma_decay**t``.  The best-scoring probed action is
snapshotted so the caller can decode from the highest-reward latents seen
rather than the final iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import CountingModel
from .reward import evaluate_action, evaluate_actions_batch


@dataclass(frozen=True)
class LatentThoughts:
    """Current latent matrix H (K rows of width d) plus its step index."""

    matrix: np.ndarray
    step: int = 0


@dataclass(frozen=True)
class PolicyConfig:
    """All test-time hyperparameters of the optimization loop.

    Defaults are the fixed general-purpose configuration: 8 thought tokens,
    20 steps, top-k 10, sigma 5 decayed by 0.9 per step, learning rate 5e-3,
    best-reward selection on.
    """

    num_thoughts: int = 8
    steps: int = 20
    top_k: int = 10
    sigma0: float = 5.0
    sigma_decay: float = 0.9
    learning_rate: float = 5e-3
    track_best: bool = True
    rng_seed: int = 0
    max_grad_norm: float | None = None  # optional safety guard, off by default

    def __post_init__(self):
        if self.num_thoughts < 1:
            raise ValueError(f"num_thoughts must be >= 1, got {self.num_thoughts}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if not 0 < self.sigma_decay <= 1:
            raise ValueError(f"sigma_decay must be in (0, 1], got {self.sigma_decay}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass(frozen=True)
class TraceStep:
    step: int
    sigma: float
    reward: float
    action_norm: float


@dataclass(frozen=True)
class BestSnapshot:
    step: int
    reward: float
    action: np.ndarray  # the probed K x d action that earned the reward


@dataclass
class OptimizationTrace:
    """Per-step records plus counters for one optimization run."""

    steps: list[TraceStep] = field(default_factory=list)
    best: BestSnapshot | None = None
    forward_passes: int = 0
    decode_calls: int = 0


def init_latents(model, num_thoughts: int) -> LatentThoughts:
    """K copies of the latent-placeholder embedding row, step 0."""
    if num_thoughts < 1:
        raise ValueError(f"num_thoughts must be >= 1, got {num_thoughts}")
    think = model.descriptor.think_token_id
    rows = model.embed([think] * num_thoughts)
    return LatentThoughts(rows, step=0)


def sample_action(latents: LatentThoughts, sigma: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw A = H + eps with eps ~ N(0, sigma^2 I), elementwise i.i.d.

    The returned noise is re-derived as A - H after the addition so the
    identity between the three arrays holds exactly in floating point.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    eps = rng.standard_normal(latents.matrix.shape) * sigma
    action = latents.matrix + eps
    return action, action - latents.matrix


def estimate_gradient(reward: float, eps: np.ndarray, sigma: float) -> np.ndarray:
    """Single-sample policy-gradient estimate: reward * eps / sigma^2."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not np.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward}")
    eps = np.asarray(eps, dtype=np.float64)
    if not np.isfinite(eps).all():
        raise ValueError("noise matrix contains non-finite entries")
    return reward * eps / sigma**2


def step(latents: LatentThoughts, grad: np.ndarray, eta: float) -> LatentThoughts:
    """Gradient-ascent update H' = H + eta * grad; advances the step index."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != latents.matrix.shape:
        raise ValueError(
            f"gradient shape {grad.shape} does not match latents {latents.matrix.shape}"
        )
    if eta < 0:
        raise ValueError(f"learning rate must be >= 0, got {eta}")
    return LatentThoughts(latents.matrix + eta * grad, latents.step + 1)


def optimize(model, prompt_emb, config: PolicyConfig,
             rng=None) -> tuple[np.ndarray, OptimizationTrace]:
    """Run the full test-time loop; returns (final latents H*, trace).

    With ``track_best`` the returned H* is the probed action with the
    highest reward seen during the run (the matrix whose reward was actually
    measured); otherwise it is the last iterate H^(T).  The loop performs
    exactly one forward pass per step and never decodes.
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    counting = CountingModel(model)
    latents = init_latents(counting, config.num_thoughts)
    trace = OptimizationTrace()
    for t in range(config.steps):
        sigma_t = config.sigma0 * config.sigma_decay**t
        action, eps = sample_action(latents, sigma_t, rng)
        reward = evaluate_action(counting, prompt_emb, action, config.top_k).mean_reward
        if trace.best is None or reward > trace.best.reward:
            trace.best = BestSnapshot(t, reward, action.copy())
        grad = estimate_gradient(reward, eps, sigma_t)
        if config.max_grad_norm is not None:
            norm = float(np.linalg.norm(grad))
            if norm > config.max_grad_norm:
                grad = grad * (config.max_grad_norm / norm)
        latents = step(latents, grad, config.learning_rate)
        trace.steps.append(
            TraceStep(t, sigma_t, reward, float(np.linalg.norm(action)))
        )
    trace.forward_passes = counting.forward_passes
    trace.decode_calls = counting.decode_calls
    if config.track_best and trace.best is not None:
        return trace.best.action.copy(), trace
    return latents.matrix, trace


@dataclass(frozen=True)
class GradCheckReport:
    """Agreement between the sampled gradient and a finite-difference one."""

    mc_gradient: np.ndarray
    fd_gradient: np.ndarray
    cosine_similarity: float
    relative_error: float
    num_samples: int
    fd_samples: int
    fd_step: float


def _default_reward_fn(model, prompt_emb, k):
    def reward_fn(actions):
        return evaluate_actions_batch(model, prompt_emb, actions, k)
    return reward_fn


def gradcheck(model, prompt_emb, latents, sigma: float, k: int,
              num_samples: int, fd_step: float, fd_samples: int | None = None,
              rng=None, reward_fn=None, chunk: int = 8192) -> GradCheckReport:
    """Empirically validate the policy-gradient estimator.

    Averages ``num_samples`` single-sample estimates of the gradient of the
    smoothed objective J(H) = E[R(H + eps)] and compares them with a central
    finite-difference gradient of J, where each J evaluation is a
    ``fd_samples``-sample Monte Carlo mean.  The +/- evaluations of one
    coordinate share their perturbations so the difference is dominated by
    the shift, not by sampling noise.  ``reward_fn`` can replace the model
    reward entirely (it receives a (B, K, d) action stack), which lets tests
    inject analytically tractable objectives.
    """
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    H = latents.matrix if isinstance(latents, LatentThoughts) else np.asarray(latents)
    if rng is None:
        rng = np.random.default_rng(0)
    if fd_samples is None:
        fd_samples = max(1, num_samples // 5)
    if reward_fn is None:
        reward_fn = _default_reward_fn(model, prompt_emb, k)

    mc = np.zeros_like(H)
    done = 0
    while done < num_samples:
        b = min(chunk, num_samples - done)
        eps = rng.standard_normal((b, *H.shape)) * sigma
        rewards = reward_fn(H[None] + eps)
        mc += np.tensordot(rewards, eps, axes=(0, 0)) / sigma**2
        done += b
    mc /= num_samples

    fd = np.zeros(H.size)
    for i in range(H.size):
        shift = np.zeros_like(H)
        shift.flat[i] = fd_step
        coord_rng = rng.spawn(1)[0]
        remaining = fd_samples
        acc = 0.0
        while remaining > 0:
            b = min(chunk, remaining)
            eps = coord_rng.standard_normal((b, *H.shape)) * sigma
            plus = reward_fn(H[None] + shift[None] + eps)
            minus = reward_fn(H[None] - shift[None] + eps)
            acc += (plus - minus).sum()
            remaining -= b
        fd[i] = acc / fd_samples / (2.0 * fd_step)
    fd = fd.reshape(H.shape)

    denom = np.linalg.norm(mc) * np.linalg.norm(fd)
    cosine = float((mc * fd).sum() / denom) if denom > 0 else 0.0
    fd_norm = np.linalg.norm(fd)
    rel = float(np.linalg.norm(mc - fd) / fd_norm) if fd_norm > 0 else np.inf
    return GradCheckReport(mc, fd, cosine, rel, num_samples, fd_samples, fd_step)
