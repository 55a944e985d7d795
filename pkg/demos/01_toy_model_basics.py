"""Build a toy model, inspect its outputs, round-trip a checkpoint.

The toy transformer is a frozen random-weight causal model over a small
character vocabulary.  Everything downstream (rewards, optimization,
evaluation) runs against the same small protocol shown here: embed,
forward_distributions, greedy_decode.
"""

import tempfile
from pathlib import Path

import numpy as np

from ltpo import build_toy_lm, load_checkpoint, save_checkpoint

model = build_toy_lm(seed=42, vocab_size=32, hidden_dim=16, layers=2)
desc = model.descriptor
print(f"model: |V|={desc.vocab_size} d={desc.hidden_dim} "
      f"think_id={desc.think_token_id} eos_id={desc.eos_token_id}")
print(f"charset: {model.charset!r}")
print(f"parameter checksum: {model.parameter_checksum()[:16]}...")

# tokenize -> embed -> per-position next-token distributions
ids = model.tokenize("12+34")
emb = model.embed(ids)
probs = model.forward_distributions(emb)
print(f"\ntokens {ids.tolist()} -> embeddings {emb.shape} -> probs {probs.shape}")
print(f"row sums: {probs.sum(axis=1)}")
print(f"most likely next char per position: "
      f"{[model.detokenize([t]) or '<special>' for t in probs.argmax(axis=1)]}")

# greedy decoding appends argmax embeddings until eos or the cap
result = model.greedy_decode(emb, max_tokens=12)
print(f"\ngreedy continuation: {result.text!r} (stop: {result.stop_reason})")

# checkpoints: little-endian float32 with a self-describing header
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "toy.ltpo"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    same = np.array_equal(
        loaded.forward_distributions(loaded.embed(ids)).argmax(axis=1),
        probs.argmax(axis=1),
    )
    print(f"\ncheckpoint: {path.stat().st_size} bytes on disk, "
          f"argmax-identical after reload: {same}")
