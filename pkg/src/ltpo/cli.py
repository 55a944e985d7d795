"""Command-line interface: run, gradcheck, landscape, trace-dump.

Model selection (``--model``) accepts three forms:

* ``toy:seed=42,vocab=32,dim=16,layers=2`` builds the seeded toy model
  (optional keys: ``heads``, ``max_decode``)
* a filesystem path to a serialized toy checkpoint
* an ``http(s)://`` endpoint served by the model-server adapter package

Hyperparameter config files are JSON whose keys mirror the tuning-table
column names: ``"# thought tokens"``, ``"# steps"``, ``"top-k"``,
``"sigma"``, ``"sigma decay"``, ``"lr"``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import landscape as ls
from .model import build_toy_lm, load_checkpoint
from .optimizer import PolicyConfig, gradcheck, init_latents, optimize
from .pipeline import (
    load_dataset,
    record_to_dict,
    render_prompt,
    run_dataset,
    trace_to_dicts,
)

DEFAULT_MODEL = "toy:seed=42,vocab=32,dim=16,layers=2"

CONFIG_KEYS = {
    "# thought tokens": "num_thoughts",
    "# steps": "steps",
    "top-k": "top_k",
    "sigma": "sigma0",
    "sigma decay": "sigma_decay",
    "lr": "learning_rate",
}


def resolve_model(spec: str):
    if spec.startswith("toy:"):
        kv = {}
        for part in spec[4:].split(","):
            key, _, value = part.partition("=")
            kv[key.strip()] = value.strip()
        try:
            return build_toy_lm(
                seed=int(kv.get("seed", 0)),
                vocab_size=int(kv.get("vocab", 32)),
                hidden_dim=int(kv.get("dim", 16)),
                layers=int(kv.get("layers", 2)),
                num_heads=int(kv.get("heads", 1)),
                max_decode_tokens=int(kv.get("max_decode", 4096)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SystemExit(f"bad toy model spec {spec!r}: {exc}")
    if spec.startswith(("http://", "https://")):
        try:
            from ltpo_server.client import RemoteModel
        except ImportError:
            raise SystemExit(
                "remote endpoints need the ltpo-server package installed "
                "(pip install ./server)"
            )
        return RemoteModel(spec)
    if os.path.exists(spec):
        return load_checkpoint(spec)
    raise SystemExit(f"--model {spec!r}: no such checkpoint and not a toy:/http: spec")


def build_config(args) -> PolicyConfig:
    fields = {}
    if getattr(args, "config", None) and getattr(args, "default_config", False):
        raise SystemExit("--config and --default-config are mutually exclusive")
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        unknown = set(raw) - set(CONFIG_KEYS)
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        fields = {CONFIG_KEYS[k]: v for k, v in raw.items()}
    if getattr(args, "seed", None) is not None:
        fields["rng_seed"] = args.seed
    if getattr(args, "no_track_best", False):
        fields["track_best"] = False
    return PolicyConfig(**fields)


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    model = resolve_model(args.model)
    dataset = load_dataset(args.dataset)
    config = build_config(args)

    out_dir = args.out
    records_fh = traces_fh = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        records_fh = open(os.path.join(out_dir, "records.jsonl"), "w",
                          encoding="utf-8")
        if args.mode == "ltpo":
            traces_fh = open(os.path.join(out_dir, "traces.jsonl"), "w",
                             encoding="utf-8")

    def emit(record):
        line = json.dumps(record_to_dict(record))
        if records_fh:
            records_fh.write(line + "\n")
        else:
            print(line)
        if record.trace is not None and traces_fh:
            for d in trace_to_dicts(record.problem_id, record.repeat, record.trace):
                traces_fh.write(json.dumps(d) + "\n")

    try:
        summary, _ = run_dataset(
            model, dataset, config, args.mode,
            parallelism=args.parallelism, repeat=args.repeat,
            max_decode_tokens=args.max_decode_tokens, on_record=emit,
        )
    finally:
        for fh in (records_fh, traces_fh):
            if fh:
                fh.close()

    summary_dict = {
        "accuracy": summary.accuracy,
        "per_repeat_accuracy": summary.per_repeat_accuracy,
        "problems": summary.problems,
        "records": summary.records,
        "correct": summary.correct,
        "failures": summary.failures,
        "mean_optimize_seconds": summary.mean_optimize_seconds,
        "mean_decode_seconds": summary.mean_decode_seconds,
        "mean_total_seconds": summary.mean_total_seconds,
        "mean_generated_tokens": summary.mean_generated_tokens,
    }
    if out_dir:
        with open(os.path.join(out_dir, "summary.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(summary_dict, fh, indent=2)
    print(json.dumps({"type": "summary", **summary_dict}))
    return 0


def cmd_gradcheck(args) -> int:
    model = resolve_model(args.model)
    prompt_emb = model.embed(model.tokenize(args.prompt))
    latents = init_latents(model, args.num_thoughts)
    report = gradcheck(
        model, prompt_emb, latents,
        sigma=args.sigma, k=args.top_k,
        num_samples=args.samples, fd_step=args.fd_step,
        fd_samples=args.fd_samples,
        rng=np.random.default_rng(args.seed),
    )
    print(json.dumps({
        "cosine_similarity": report.cosine_similarity,
        "relative_error": report.relative_error,
        "mc_gradient_norm": float(np.linalg.norm(report.mc_gradient)),
        "fd_gradient_norm": float(np.linalg.norm(report.fd_gradient)),
        "num_samples": report.num_samples,
        "fd_samples": report.fd_samples,
        "fd_step": report.fd_step,
    }))
    return 0


def cmd_trace_dump(args) -> int:
    model = resolve_model(args.model)
    dataset = load_dataset(args.dataset)
    if args.problem_id is not None:
        matches = [p for p in dataset if p.id == args.problem_id]
        if not matches:
            raise SystemExit(f"no problem with id {args.problem_id!r}")
        problem, index = matches[0], dataset.index(matches[0])
    else:
        if not 0 <= args.index < len(dataset):
            raise SystemExit(f"--index {args.index} out of range")
        problem, index = dataset[args.index], args.index
    config = build_config(args)
    rendered = render_prompt(model, problem, config.num_thoughts, "ltpo")
    prompt_emb = model.embed(rendered.token_ids[:-config.num_thoughts])
    rng = np.random.default_rng((config.rng_seed, 0, index))
    _, trace = optimize(model, prompt_emb, config, rng=rng)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for d in trace_to_dicts(problem.id, 0, trace):
            out.write(json.dumps(d) + "\n")
    finally:
        if args.out:
            out.close()
    return 0


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_landscape_trap(args) -> int:
    report = ls.trap_demo(
        trials=args.trials, seed=args.seed, sigma=args.sigma,
        step_size=args.step_size, max_steps=args.max_steps,
        grad_tol=args.grad_tol, keep_trajectories=bool(args.out),
    )
    if args.out:
        rows = []
        for t, traj in enumerate(report.trajectories):
            for s, (pt, cf, cr) in enumerate(
                zip(traj.points, traj.conf_values, traj.corr_values)
            ):
                rows.append([t, s, *pt.tolist(), cf, cr])
        _write_csv(args.out, ["trial", "step", "x0", "x1", "conf", "corr"], rows)
    print(json.dumps({
        "trials": report.trials,
        "trapped": report.trapped,
        "monotone": report.monotone,
        "trap_point": report.trap_point.tolist(),
        "trap_corr": report.trap_corr,
        "good_corr": report.good_corr,
        "max_terminal_grad_norm": float(report.terminal_grad_norms.max()),
        "min_control_corr": float(report.control_corr_values.min()),
    }))
    return 0


def cmd_landscape_align(args) -> int:
    trials = ls.alignment_trials(
        num_trials=args.trials, seed=args.seed, eta=args.eta,
        sigma=args.sigma, dimension=args.dim,
    )
    informative = [t for t in trials if t.informative]
    agreeing = sum(t.agrees for t in informative)
    if args.out:
        _write_csv(
            args.out,
            ["dot", "delta_corr", "agrees", "dead_band", "informative"],
            [[t.dot, t.delta_corr, int(t.agrees), t.dead_band,
              int(t.informative)] for t in trials],
        )
    print(json.dumps({
        "trials": len(trials),
        "informative": len(informative),
        "agreeing": agreeing,
        "agreement_rate": agreeing / len(informative) if informative else None,
    }))
    return 0


def _parse_floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_landscape_flow(args) -> int:
    bumps = []
    for part in args.bumps.split(";"):
        cx_cy_h_w = _parse_floats(part)
        dim = len(cx_cy_h_w) - 2
        bumps.append(ls.GaussianBump(
            center=np.array(cx_cy_h_w[:dim]),
            height=cx_cy_h_w[dim],
            width=cx_cy_h_w[dim + 1],
        ))
    kind, _, rest = args.corr.partition(":")
    values = _parse_floats(rest)
    dim = bumps[0].center.size
    if kind == "ball":
        corr = ls.BallRegion(
            centers=np.array([values[:dim]]), radii=np.array([values[dim]])
        )
    elif kind == "half":
        corr = ls.HalfSpaceRegion(normal=np.array(values[:dim]), offset=values[dim])
    else:
        raise SystemExit(f"--corr must start with ball: or half:, got {args.corr!r}")
    scape = ls.Landscape(dimension=dim, bumps=tuple(bumps), corr_region=corr)
    traj = ls.flow_integrate(
        scape, np.array(_parse_floats(args.start)), step_size=args.step_size,
        max_steps=args.max_steps, grad_tol=args.grad_tol, sigma=args.sigma,
    )
    rows = [
        [s, *pt.tolist(), cf, cr]
        for s, (pt, cf, cr) in enumerate(
            zip(traj.points, traj.conf_values, traj.corr_values)
        )
    ]
    header = ["step"] + [f"x{i}" for i in range(dim)] + ["conf", "corr"]
    if args.out:
        _write_csv(args.out, header, rows)
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(header)
        writer.writerows(rows)
    print(json.dumps({
        "steps": len(traj.points) - 1,
        "terminal": traj.points[-1].tolist(),
        "terminal_grad_norm": traj.terminal_grad_norm,
        "converged": traj.converged,
        "diverged": traj.diverged,
    }), file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _add_model(parser):
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="toy:<spec>, checkpoint path, or http endpoint")


def _add_config(parser):
    parser.add_argument("--config", help="JSON hyperparameter file")
    parser.add_argument("--default-config", action="store_true",
                        help="use the fixed default hyperparameter set")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
    parser.add_argument("--no-track-best", action="store_true",
                        help="decode from the final iterate instead of the "
                             "best-reward latents")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltpo",
        description="Test-time latent-thought optimization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evaluate a dataset in one mode")
    _add_model(p)
    _add_config(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", choices=["ltpo", "cot", "cot-unk"], default="ltpo")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--max-decode-tokens", type=int, default=None)
    p.add_argument("--out", help="output directory for records/traces/summary")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gradcheck", help="validate the gradient estimator")
    _add_model(p)
    p.add_argument("--prompt", default="What is 2+2?")
    p.add_argument("--num-thoughts", type=int, default=2)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=50_000)
    p.add_argument("--fd-samples", type=int, default=10_000)
    p.add_argument("--fd-step", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("trace-dump", help="print the optimization trace of "
                                          "one problem")
    _add_model(p)
    _add_config(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--problem-id", default=None)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_trace_dump)

    p = sub.add_parser("landscape", help="confidence/correctness simulator")
    lsub = p.add_subparsers(dest="subcommand", required=True)

    q = lsub.add_parser("trap", help="confidently-wrong attractor demo")
    q.add_argument("--trials", type=int, default=50)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--sigma", type=float, default=0.5)
    q.add_argument("--step-size", type=float, default=0.05)
    q.add_argument("--max-steps", type=int, default=20_000)
    q.add_argument("--grad-tol", type=float, default=1e-6)
    q.add_argument("--out", help="CSV path for full trajectories")
    q.set_defaults(func=cmd_landscape_trap)

    q = lsub.add_parser("align", help="gradient-alignment trials")
    q.add_argument("--trials", type=int, default=1000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--eta", type=float, default=1e-4)
    q.add_argument("--sigma", type=float, default=0.5)
    q.add_argument("--dim", type=int, default=2)
    q.add_argument("--out", help="CSV path for per-trial rows")
    q.set_defaults(func=cmd_landscape_align)

    q = lsub.add_parser("flow", help="integrate one ascent trajectory")
    q.add_argument("--bumps", required=True,
                   help="semicolon-separated cx,..,h,w groups")
    q.add_argument("--corr", required=True,
                   help="ball:cx,..,r or half:nx,..,offset")
    q.add_argument("--start", required=True, help="comma-separated start point")
    q.add_argument("--sigma", type=float, default=0.5)
    q.add_argument("--step-size", type=float, default=0.05)
    q.add_argument("--max-steps", type=int, default=10_000)
    q.add_argument("--grad-tol", type=float, default=1e-8)
    q.add_argument("--out", help="CSV path for the trajectory")
    q.set_defaults(func=cmd_landscape_flow)

    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
