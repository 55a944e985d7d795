"""Validating the single-sample gradient estimator numerically.

Two checks.  First, with an injected quadratic reward the Gaussian-smoothed
objective has a closed-form gradient, so the Monte Carlo mean of the
estimator can be compared against truth directly.  Second, on the real toy
model the estimator mean is compared with central finite differences of the
smoothed objective (sample counts here are scaled down from the acceptance
settings to keep the demo quick; run `ltpo gradcheck` for the full version).
"""

import numpy as np

from ltpo import build_toy_lm, gradcheck, init_latents

# --- closed-form check on an injected quadratic reward ---------------------
anchor = np.array([[0.3, -0.7]])
h = np.array([[1.2, 0.4]])


def quadratic_reward(actions):
    return 1.0 - ((actions - anchor[None]) ** 2).sum(axis=(1, 2))


report = gradcheck(None, None, h, sigma=0.5, k=1,
                   num_samples=40_000, fd_step=1e-2, fd_samples=8_000,
                   reward_fn=quadratic_reward,
                   rng=np.random.default_rng(0))
truth = -2.0 * (h - anchor)
print("quadratic reward:")
print(f"  closed-form gradient  {truth.ravel()}")
print(f"  estimator mean        {report.mc_gradient.ravel().round(4)}")
print(f"  cosine {report.cosine_similarity:.4f}, "
      f"relative error {report.relative_error:.4f}")

# --- the real thing: smoothed confidence reward on the toy model -----------
model = build_toy_lm(seed=42, vocab_size=32, hidden_dim=16, layers=2)
prompt = model.embed(model.tokenize("What is 2+2?"))
latents = init_latents(model, 2)
report = gradcheck(model, prompt, latents, sigma=0.5, k=5,
                   num_samples=10_000, fd_step=1e-2, fd_samples=2_000,
                   rng=np.random.default_rng(1))
print("\ntoy model confidence reward:")
print(f"  |estimator mean| {np.linalg.norm(report.mc_gradient):.4f}, "
      f"|finite differences| {np.linalg.norm(report.fd_gradient):.4f}")
print(f"  cosine {report.cosine_similarity:.4f}")
