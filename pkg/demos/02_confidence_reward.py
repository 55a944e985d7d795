"""Anatomy of the intrinsic confidence reward.

Per latent position the score is the mean negative log-probability of the
top-k tokens; the sequence reward averages over the K latent positions.
Contrast a diffuse distribution (reward = log |V|) with increasingly
concentrated ones, then score a real action against the toy model without
decoding anything.
"""

import numpy as np

from ltpo import build_toy_lm, evaluate_action, init_latents
from ltpo.model import CountingModel
from ltpo.reward import position_confidence

V = 32
uniform = np.full(V, 1.0 / V)
print(f"uniform over {V}: confidence(k=10) = {position_confidence(uniform, 10):.4f}"
      f"  (log {V} = {np.log(V):.4f})")

for mass in (0.5, 0.9, 0.999):
    row = np.full(V, (1.0 - mass) / (V - 1))
    row[7] = mass
    print(f"top-1 mass {mass}: "
          f"k=1 -> {position_confidence(row, 1):8.4f}   "
          f"k=10 -> {position_confidence(row, 10):8.4f}")
# k=1 falls as the distribution sharpens (pure argmax surprisal); k>1 rises
# because the remaining top-k members get rarer.  Maximizing the k>1 form
# drives probability mass onto few tokens.

model = build_toy_lm(seed=42, vocab_size=V, hidden_dim=16, layers=2)
prompt = model.embed(model.tokenize("What is 2+2?"))
latents = init_latents(model, 4)

counting = CountingModel(model)
report = evaluate_action(counting, prompt, latents.matrix, k=10)
print(f"\naction reward over {len(report.per_position)} latent positions: "
      f"{report.mean_reward:.4f}")
print(f"per-position confidences: {np.round(report.per_position, 4)}")
print(f"forward passes used: {counting.forward_passes}, "
      f"decode calls used: {counting.decode_calls}")
