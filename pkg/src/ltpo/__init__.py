"""Test-time latent-thought optimization for frozen language models."""

from .model import (
    CountingModel,
    DecodeResult,
    ModelDescriptor,
    ToyTransformer,
    build_toy_lm,
    load_checkpoint,
    save_checkpoint,
)
from .optimizer import (
    GradCheckReport,
    LatentThoughts,
    OptimizationTrace,
    PolicyConfig,
    estimate_gradient,
    gradcheck,
    init_latents,
    optimize,
    sample_action,
    step,
)
from .pipeline import (
    PredictionRecord,
    Problem,
    RunSummary,
    load_dataset,
    parse_boxed_answer,
    render_prompt,
    run_dataset,
    run_problem,
)
from .reward import (
    RewardReport,
    evaluate_action,
    position_confidence,
    sequence_reward,
)

__all__ = [
    "CountingModel",
    "DecodeResult",
    "GradCheckReport",
    "LatentThoughts",
    "ModelDescriptor",
    "OptimizationTrace",
    "PolicyConfig",
    "PredictionRecord",
    "Problem",
    "RewardReport",
    "RunSummary",
    "ToyTransformer",
    "build_toy_lm",
    "estimate_gradient",
    "evaluate_action",
    "gradcheck",
    "init_latents",
    "load_checkpoint",
    "load_dataset",
    "optimize",
    "parse_boxed_answer",
    "position_confidence",
    "render_prompt",
    "run_dataset",
    "run_problem",
    "sample_action",
    "save_checkpoint",
    "sequence_reward",
    "step",
]
