"""HTTP service exposing a frozen checkpoint to the optimization engine.

Endpoints (all responses carry a ``version`` field):

    GET  /descriptor  model metadata: vocab_size, hidden_dim,
                      think_token_id, eos_token_id, max_decode_tokens,
                      charset
    POST /embed       {"token_ids": [...]} -> {"embeddings": <matrix>}
    POST /forward     {"embeddings": <matrix>, "top_m": m} ->
                      {"positions": [[[token_id, log_prob], ...], ...]}
                      per-position top-m entries sorted by log-prob
                      descending with token-id tiebreak; the log-probs are
                      floored exactly like the local reward path, so a
                      client consuming the first k <= m entries reproduces
                      the in-process confidence bit for bit
    POST /decode      {"embeddings": <matrix>, "max_tokens": n} ->
                      {"token_ids": [...], "text": ..., "stop_reason": ...}

``<matrix>`` is the base64 little-endian float32 payload of wire.py.
Validation failures return HTTP 400 with a message; the loaded checkpoint
is immutable, so requests are handled independently and deterministically.

Checkpoint selection: ``--checkpoint`` / ``LTPO_SERVER_CHECKPOINT`` accepts
a ``toy:`` spec or a checkpoint file path; bind address via ``--bind`` /
``LTPO_SERVER_BIND`` (host:port).
"""

from __future__ import annotations

import argparse
import os

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from ltpo.model import build_toy_lm, load_checkpoint
from ltpo.reward import top_log_probs_from_row

from .wire import WIRE_VERSION, decode_matrix, encode_matrix

DEFAULT_BIND = "127.0.0.1:8800"


def resolve_checkpoint(ref: str):
    if ref.startswith("toy:"):
        kv = dict(part.partition("=")[::2] for part in ref[4:].split(","))
        return build_toy_lm(
            seed=int(kv.get("seed", 0)),
            vocab_size=int(kv.get("vocab", 32)),
            hidden_dim=int(kv.get("dim", 16)),
            layers=int(kv.get("layers", 2)),
            num_heads=int(kv.get("heads", 1)),
            max_decode_tokens=int(kv.get("max_decode", 4096)),
        )
    return load_checkpoint(ref)


def create_app(model) -> FastAPI:
    app = FastAPI(title="ltpo-server")
    desc = model.descriptor

    def descriptor_dict():
        return {
            "vocab_size": desc.vocab_size,
            "hidden_dim": desc.hidden_dim,
            "think_token_id": desc.think_token_id,
            "eos_token_id": desc.eos_token_id,
            "max_decode_tokens": desc.max_decode_tokens,
            "charset": model.charset,
        }

    def embeddings_from(body: dict) -> np.ndarray:
        if "embeddings" not in body:
            raise HTTPException(400, "missing field: embeddings")
        try:
            matrix = decode_matrix(body["embeddings"])
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        if matrix.shape[1] != desc.hidden_dim:
            raise HTTPException(
                400,
                f"embedding width {matrix.shape[1]} does not match "
                f"hidden_dim {desc.hidden_dim}",
            )
        return matrix.astype(np.float64)

    @app.exception_handler(HTTPException)
    async def protocol_error(_, exc: HTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": str(exc.detail), "version": WIRE_VERSION},
        )

    @app.get("/descriptor")
    def get_descriptor():
        return {**descriptor_dict(), "version": WIRE_VERSION}

    @app.post("/embed")
    def post_embed(body: dict):
        ids = body.get("token_ids")
        if not isinstance(ids, list) or not ids:
            raise HTTPException(400, "token_ids must be a nonempty list")
        try:
            rows = model.embed(ids)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return {"embeddings": encode_matrix(rows), "version": WIRE_VERSION}

    @app.post("/forward")
    def post_forward(body: dict):
        matrix = embeddings_from(body)
        top_m = body.get("top_m")
        if not isinstance(top_m, int) or not 1 <= top_m <= desc.vocab_size:
            raise HTTPException(
                400, f"top_m must be an integer in [1, {desc.vocab_size}]"
            )
        try:
            probs = model.forward_distributions(matrix)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        positions = []
        for row in probs:
            ids, log_probs = top_log_probs_from_row(row, top_m)
            positions.append(
                [[int(i), float(lp)] for i, lp in zip(ids, log_probs)]
            )
        return {
            "positions": positions,
            "descriptor": descriptor_dict(),
            "version": WIRE_VERSION,
        }

    @app.post("/decode")
    def post_decode(body: dict):
        matrix = embeddings_from(body)
        max_tokens = body.get("max_tokens", desc.max_decode_tokens)
        if not isinstance(max_tokens, int) or max_tokens < 1:
            raise HTTPException(400, "max_tokens must be a positive integer")
        try:
            result = model.greedy_decode(matrix, max_tokens)
        except ValueError as exc:
            raise HTTPException(400, str(exc))
        return {
            "token_ids": result.token_ids.tolist(),
            "text": result.text,
            "stop_reason": result.stop_reason,
            "version": WIRE_VERSION,
        }

    return app


def serve(checkpoint_ref: str, bind_address: str = DEFAULT_BIND):
    """Load the checkpoint and run the service (blocking)."""
    import uvicorn

    model = resolve_checkpoint(checkpoint_ref)
    host, _, port = bind_address.partition(":")
    uvicorn.run(create_app(model), host=host, port=int(port or 8800),
                log_level="warning")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ltpo-server")
    parser.add_argument(
        "--checkpoint",
        default=os.environ.get("LTPO_SERVER_CHECKPOINT"),
        help="toy:<spec> or checkpoint path (env: LTPO_SERVER_CHECKPOINT)",
    )
    parser.add_argument(
        "--bind",
        default=os.environ.get("LTPO_SERVER_BIND", DEFAULT_BIND),
        help=f"host:port (env: LTPO_SERVER_BIND, default {DEFAULT_BIND})",
    )
    args = parser.parse_args(argv)
    if not args.checkpoint:
        parser.error("--checkpoint (or LTPO_SERVER_CHECKPOINT) is required")
    serve(args.checkpoint, args.bind)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
