"""The test-time loop: sample, score, ascend; keep the best action.

Each step perturbs the latent matrix with Gaussian noise, scores the
perturbed action with one forward pass, and takes a REINFORCE ascent step.
The exploration scale shrinks geometrically.  Note two things in the
output: the loop never decodes, and the highest-reward probe is usually
not the final iterate, which is why the best action is snapshotted.
"""

import numpy as np

from ltpo import PolicyConfig, build_toy_lm, evaluate_action, optimize

model = build_toy_lm(seed=42, vocab_size=32, hidden_dim=16, layers=2)
prompt = model.embed(model.tokenize("What is 12*9?"))

config = PolicyConfig(num_thoughts=8, steps=20, top_k=10,
                      sigma0=5.0, sigma_decay=0.9, learning_rate=5e-3,
                      rng_seed=0)
h_star, trace = optimize(model, prompt, config)

print(f"{'step':>4} {'sigma':>8} {'reward':>9} {'|action|':>9}")
for s in trace.steps:
    marker = "  <- best" if s.step == trace.best.step else ""
    print(f"{s.step:>4} {s.sigma:>8.4f} {s.reward:>9.4f} "
          f"{s.action_norm:>9.3f}{marker}")

print(f"\nbest reward {trace.best.reward:.4f} at step {trace.best.step}; "
      f"final-step reward {trace.steps[-1].reward:.4f}")
print(f"forward passes: {trace.forward_passes} (= steps), "
      f"decode calls: {trace.decode_calls} (text generation fully bypassed)")

# the returned matrix is the probed action itself: re-scoring reproduces
# the recorded best reward
again = evaluate_action(model, prompt, h_star, config.top_k).mean_reward
print(f"re-evaluated returned latents: {again:.6f} "
      f"(recorded {trace.best.reward:.6f})")

# with track_best off you get the last iterate instead
h_last, _ = optimize(model, prompt,
                     PolicyConfig(rng_seed=0, track_best=False))
print(f"\nwithout best-reward selection the result differs: "
      f"|H_best - H_last| = {np.linalg.norm(h_star - h_last):.3f}")
