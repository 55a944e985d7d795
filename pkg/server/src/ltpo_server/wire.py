"""Binary matrix payloads: base64-encoded little-endian float32 plus dims.

The decoded byte length must equal 4 * rows * cols; round-tripping a
float32 matrix through encode/decode is bitwise lossless.
"""

from __future__ import annotations

import base64

import numpy as np

WIRE_VERSION = 1


def encode_matrix(matrix) -> dict:
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    data = np.ascontiguousarray(m, dtype="<f4").tobytes()
    return {
        "data": base64.b64encode(data).decode("ascii"),
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
    }


def decode_matrix(payload: dict) -> np.ndarray:
    try:
        rows, cols = int(payload["rows"]), int(payload["cols"])
        raw = base64.b64decode(payload["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix payload: {exc}") from None
    if len(raw) != 4 * rows * cols:
        raise ValueError(
            f"matrix payload is {len(raw)} bytes, expected {4 * rows * cols} "
            f"for dims ({rows}, {cols})"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(rows, cols)
