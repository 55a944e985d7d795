"""Running the evaluation harness on the shipped arithmetic fixture.

The demo checkpoint (data/arith_demo.ltpo) has a readout fitted to answer
single-digit sums as "$\\boxed{n}$" under the latent-placeholder prompt, so
the harness produces nonzero accuracy and meaningful per-phase accounting.
Three modes run over the same 20 problems:

  cot      plain step-by-step instruction, no latent tokens
  cot-unk  latent-token template, placeholders left at their initial values
  ltpo     same template, placeholders optimized before the single decode

The memorizing readout is deliberately brittle: optimizing the latents for
confidence destroys its correctness, the small-scale version of the
confidence-vs-correctness divergence explored in demo 06.
"""

from pathlib import Path

from ltpo import PolicyConfig, load_dataset, run_dataset
from ltpo.model import load_checkpoint

root = Path(__file__).resolve().parent.parent
model = load_checkpoint(root / "data" / "arith_demo.ltpo")
dataset = load_dataset(root / "data" / "arith20.jsonl")
print(f"model |V|={model.descriptor.vocab_size} d={model.descriptor.hidden_dim}; "
      f"{len(dataset)} problems\n")

config = PolicyConfig(rng_seed=0)
header = f"{'mode':8} {'acc %':>7} {'opt s':>8} {'decode s':>9} {'tokens':>7}"
print(header)
for mode in ("cot", "cot-unk", "ltpo"):
    summary, records = run_dataset(model, dataset, config, mode,
                                   max_decode_tokens=32)
    print(f"{mode:8} {summary.accuracy:>7.2f} "
          f"{summary.mean_optimize_seconds:>8.4f} "
          f"{summary.mean_decode_seconds:>9.4f} "
          f"{summary.mean_generated_tokens:>7.1f}")

print("\nsample outputs (cot-unk):")
_, records = run_dataset(model, dataset[:3], config, "cot-unk",
                         max_decode_tokens=32)
for rec in records:
    print(f"  {rec.problem_id}: {rec.generated_text!r} -> "
          f"parsed {rec.parsed_answer!r}, correct={rec.correct}")

print("\nper-problem counters in ltpo mode (first 3):")
_, records = run_dataset(model, dataset[:3], config, "ltpo",
                         max_decode_tokens=32)
for rec in records:
    print(f"  {rec.problem_id}: optimize forwards={rec.trace.forward_passes}, "
          f"loop decodes={rec.trace.decode_calls}, "
          f"total decodes={rec.decode_calls}, "
          f"best reward={rec.trace.best.reward:.3f}")
