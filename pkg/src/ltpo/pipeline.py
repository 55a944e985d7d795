"""End-to-end harness: datasets, prompt templates, decoding, scoring, timing.

Three evaluation modes share one record format:

* ``ltpo``     render the latent-token template, optimize the latent
               vectors, then greedy-decode once from prompt + best latents
* ``cot-unk``  same template and latent placeholders, but decode directly
               from the unoptimized initial latents
* ``cot``      a plain step-by-step instruction with no latent tokens

Datasets are UTF-8 JSON Lines with fields ``id``, ``question``, ``answer``.
Records and traces serialize to JSON Lines as documented in the README.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import CountingModel
from .optimizer import OptimizationTrace, PolicyConfig, init_latents, optimize

MODES = ("ltpo", "cot", "cot-unk")

PROMPT_HEADER = (
    "Solve the following math problem efficiently and clearly:\n"
    "- For simple problems (2 steps or fewer):\n"
    "Provide a concise solution with minimal description.\n"
    "- For complex problems (3 steps or more):\n"
    "Use this step-by-step format:\n"
    "## Step 1: [Brief calculations]\n"
    "## Step 2: [Brief calculations]\n"
    "...\n"
    "IMPORTANT: Regardless of the approach, you MUST always put your final "
    "answer within $\\boxed{{}}$.\n"
    "\n"
    "PROBLEM: {question}\n"
    "\n"
)

LATENT_ANNOUNCEMENT = (
    "There are {count} special tokens that contain compressed latent "
    "reasoning information that might be useful for your reasoning.\n"
    "If these tokens are useful for your case, you can use them as "
    "reference. If these tokens are not useful for your case, you can "
    "ignore them and focus back to solving the problem.\n"
    "Here are the {count} special tokens: "
)

COT_INSTRUCTION = (
    "Please reason step by step, and put your final answer within \\boxed{}."
)


@dataclass(frozen=True)
class Problem:
    id: str
    question: str
    gold_answer: str


@dataclass(frozen=True)
class RenderedPrompt:
    token_ids: np.ndarray
    text: str
    num_placeholders: int  # latent placeholder ids at the tail (0 for cot)


@dataclass(frozen=True)
class Timings:
    optimize_seconds: float
    decode_seconds: float
    total_seconds: float


@dataclass
class PredictionRecord:
    """Everything measured while answering one problem in one mode."""

    problem_id: str
    mode: str
    generated_text: str
    parsed_answer: str | None
    correct: bool
    timings: Timings
    generated_token_count: int
    stop_reason: str
    decode_calls: int
    forward_passes: int
    repeat: int = 0
    error: str | None = None
    trace: OptimizationTrace | None = None  # ltpo mode only


@dataclass
class RunSummary:
    """Aggregates over one run (possibly several repeats of the dataset)."""

    accuracy: float                 # percent, two decimals
    per_repeat_accuracy: list[float]
    problems: int
    records: int
    correct: int
    failures: int
    mean_optimize_seconds: float
    mean_decode_seconds: float
    mean_total_seconds: float
    mean_generated_tokens: float


# ---------------------------------------------------------------------------
# dataset loading
# ---------------------------------------------------------------------------

def load_dataset(path) -> list[Problem]:
    """Parse a JSONL problem file, preserving order and rejecting bad rows."""
    problems: list[Problem] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from None
            if not isinstance(obj, dict):
                raise ValueError(
                    f"{path}:{lineno}: expected an object, got {type(obj).__name__}"
                )
            for key in ("id", "question", "answer"):
                if key not in obj:
                    raise ValueError(f"{path}:{lineno}: missing field {key!r}")
            pid = str(obj["id"])
            if pid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate problem id {pid!r}")
            seen.add(pid)
            answer = str(obj["answer"])
            if not answer:
                raise ValueError(f"{path}:{lineno}: empty answer")
            problems.append(Problem(pid, str(obj["question"]), answer))
    return problems


# ---------------------------------------------------------------------------
# prompt rendering
# ---------------------------------------------------------------------------

def render_prompt(model, problem: Problem, num_thoughts: int,
                  mode: str) -> RenderedPrompt:
    """Tokenize the mode's template; latent modes end in K placeholder ids."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
    if mode == "cot":
        text = f"{problem.question}\n{COT_INSTRUCTION}"
        return RenderedPrompt(model.tokenize(text), text, 0)
    if num_thoughts < 1:
        raise ValueError(f"latent modes require num_thoughts >= 1, got {num_thoughts}")
    text = PROMPT_HEADER.format(question=problem.question)
    text += LATENT_ANNOUNCEMENT.format(count=num_thoughts)
    ids = model.tokenize(text)
    think = np.full(num_thoughts, model.descriptor.think_token_id, dtype=ids.dtype)
    return RenderedPrompt(np.concatenate([ids, think]), text, num_thoughts)


# ---------------------------------------------------------------------------
# answer parsing and scoring
# ---------------------------------------------------------------------------

_BOX_MARK = "\\boxed{"


def parse_boxed_answer(text: str) -> str | None:
    """Contents of the last outermost balanced ``\\boxed{...}`` group.

    Nested groups stay inside their enclosing group's content; an occurrence
    whose braces never balance is skipped.  Returns None when no balanced
    group exists.
    """
    result = None
    pos = 0
    n = len(text)
    while True:
        start = text.find(_BOX_MARK, pos)
        if start == -1:
            break
        depth = 1
        p = start + len(_BOX_MARK)
        while p < n and depth > 0:
            if text[p] == "{":
                depth += 1
            elif text[p] == "}":
                depth -= 1
            p += 1
        if depth == 0:
            result = text[start + len(_BOX_MARK):p - 1].strip()
            pos = p  # resume after the whole group: outermost wins
        else:
            pos = start + len(_BOX_MARK)
    return result


def canonicalize_answer(answer: str) -> str:
    """Whitespace, wrapping dollar signs and trailing periods removed."""
    s = answer.strip().strip("$").strip()
    return s.rstrip(".").strip()


def answers_match(parsed: str, gold: str) -> bool:
    """Canonical string equality, numeric when both sides are integers."""
    a, b = canonicalize_answer(parsed), canonicalize_answer(gold)
    try:
        return int(a) == int(b)
    except ValueError:
        return a == b


# ---------------------------------------------------------------------------
# per-problem execution
# ---------------------------------------------------------------------------

def run_problem(model, problem: Problem, config: PolicyConfig, mode: str,
                max_decode_tokens: int | None = None, rng=None,
                repeat: int = 0) -> PredictionRecord:
    """Answer one problem in one mode, measuring each phase separately."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
    counting = CountingModel(model)
    max_dec = (model.descriptor.max_decode_tokens
               if max_decode_tokens is None else max_decode_tokens)
    started = time.perf_counter()

    rendered = render_prompt(counting, problem, config.num_thoughts, mode)
    trace = None
    optimize_seconds = 0.0
    if mode == "cot":
        prefix = counting.embed(rendered.token_ids)
    else:
        prompt_ids = rendered.token_ids[: -rendered.num_placeholders]
        prompt_emb = counting.embed(prompt_ids)
        if mode == "ltpo":
            t0 = time.perf_counter()
            latents, trace = optimize(counting, prompt_emb, config, rng=rng)
            optimize_seconds = time.perf_counter() - t0
        else:  # cot-unk: the placeholders stay at their initial embeddings
            latents = init_latents(counting, config.num_thoughts).matrix
        prefix = np.concatenate([prompt_emb, latents], axis=0)

    t0 = time.perf_counter()
    decoded = counting.greedy_decode(prefix, max_dec)
    decode_seconds = time.perf_counter() - t0

    parsed = parse_boxed_answer(decoded.text)
    correct = parsed is not None and answers_match(parsed, problem.gold_answer)
    total = time.perf_counter() - started
    return PredictionRecord(
        problem_id=problem.id,
        mode=mode,
        generated_text=decoded.text,
        parsed_answer=parsed,
        correct=correct,
        timings=Timings(optimize_seconds, decode_seconds, total),
        generated_token_count=int(decoded.token_ids.size),
        stop_reason=decoded.stop_reason,
        decode_calls=counting.decode_calls,
        forward_passes=counting.forward_passes,
        repeat=repeat,
        trace=trace,
    )


def _error_record(problem: Problem, mode: str, repeat: int,
                  exc: Exception) -> PredictionRecord:
    return PredictionRecord(
        problem_id=problem.id,
        mode=mode,
        generated_text="",
        parsed_answer=None,
        correct=False,
        timings=Timings(0.0, 0.0, 0.0),
        generated_token_count=0,
        stop_reason="error",
        decode_calls=0,
        forward_passes=0,
        repeat=repeat,
        error=f"{type(exc).__name__}: {exc}",
    )


def derive_rng(seed: int, repeat: int, index: int) -> np.random.Generator:
    """Per-problem generator; the derivation rule is part of the contract."""
    return np.random.default_rng((seed, repeat, index))


def run_dataset(model, dataset: list[Problem], config: PolicyConfig, mode: str,
                parallelism: int = 1, repeat: int = 1,
                max_decode_tokens: int | None = None,
                on_record=None) -> tuple[RunSummary, list[PredictionRecord]]:
    """Evaluate a dataset; deterministic for a fixed seed at any parallelism.

    Each (repeat, problem) pair derives its own generator from
    ``(config.rng_seed, repeat, index)``, so worker scheduling cannot change
    any result.  Individual failures become error records and the run
    continues.  ``on_record`` is called once per record, in dataset order.
    """
    if not dataset:
        raise ValueError("run_dataset requires a nonempty dataset")
    if repeat < 1:
        raise ValueError(f"repeat must be >= 1, got {repeat}")
    jobs = [(r, i, p) for r in range(repeat) for i, p in enumerate(dataset)]

    def work(job):
        r, i, problem = job
        rng = derive_rng(config.rng_seed, r, i)
        try:
            return run_problem(model, problem, config, mode,
                               max_decode_tokens=max_decode_tokens,
                               rng=rng, repeat=r)
        except Exception as exc:  # noqa: BLE001 - recorded, run continues
            return _error_record(problem, mode, r, exc)

    if parallelism <= 1:
        records = []
        for job in jobs:
            rec = work(job)
            records.append(rec)
            if on_record is not None:
                on_record(rec)
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            records = []
            for rec in pool.map(work, jobs):
                records.append(rec)
                if on_record is not None:
                    on_record(rec)
    return summarize(records, repeat, len(dataset)), records


def summarize(records: list[PredictionRecord], repeat: int,
              problems: int) -> RunSummary:
    """Aggregate records into the reported summary (accuracy in percent)."""
    per_repeat = []
    for r in range(repeat):
        group = [rec for rec in records if rec.repeat == r]
        correct = sum(rec.correct for rec in group)
        per_repeat.append(round(100.0 * correct / len(group), 2))
    total_correct = sum(rec.correct for rec in records)
    return RunSummary(
        accuracy=round(float(np.mean(per_repeat)), 2),
        per_repeat_accuracy=per_repeat,
        problems=problems,
        records=len(records),
        correct=total_correct,
        failures=sum(rec.error is not None for rec in records),
        mean_optimize_seconds=float(
            np.mean([rec.timings.optimize_seconds for rec in records])
        ),
        mean_decode_seconds=float(
            np.mean([rec.timings.decode_seconds for rec in records])
        ),
        mean_total_seconds=float(
            np.mean([rec.timings.total_seconds for rec in records])
        ),
        mean_generated_tokens=float(
            np.mean([rec.generated_token_count for rec in records])
        ),
    )


# ---------------------------------------------------------------------------
# serialization (JSON Lines)
# ---------------------------------------------------------------------------

def record_to_dict(record: PredictionRecord) -> dict:
    """Flat JSON-able view of a record; traces are streamed separately."""
    return {
        "problem_id": record.problem_id,
        "mode": record.mode,
        "repeat": record.repeat,
        "generated_text": record.generated_text,
        "parsed_answer": record.parsed_answer,
        "correct": record.correct,
        "optimize_seconds": record.timings.optimize_seconds,
        "decode_seconds": record.timings.decode_seconds,
        "total_seconds": record.timings.total_seconds,
        "generated_token_count": record.generated_token_count,
        "stop_reason": record.stop_reason,
        "decode_calls": record.decode_calls,
        "forward_passes": record.forward_passes,
        "error": record.error,
    }


def trace_to_dicts(problem_id: str, repeat: int,
                   trace: OptimizationTrace) -> list[dict]:
    """One dict per optimization step plus a footer with best and counters."""
    lines = [
        {
            "type": "step",
            "problem_id": problem_id,
            "repeat": repeat,
            "step": s.step,
            "sigma": s.sigma,
            "reward": s.reward,
            "action_norm": s.action_norm,
        }
        for s in trace.steps
    ]
    footer = {
        "type": "footer",
        "problem_id": problem_id,
        "repeat": repeat,
        "best_step": trace.best.step if trace.best else None,
        "best_reward": trace.best.reward if trace.best else None,
        "forward_passes": trace.forward_passes,
        "decode_calls": trace.decode_calls,
    }
    return lines + [footer]
