"""Engine-side client: a remote checkpoint behind the model protocol.

``RemoteModel`` satisfies the duck-typed model interface the optimization
engine consumes (descriptor, embed, greedy_decode, tokenize/detokenize),
but deliberately does NOT provide ``forward_distributions``: full
vocabulary rows never cross the wire.  Instead it offers
``forward_top_log_probs``, the truncated top-m form the reward path falls
back to; the confidence reward needs only the k most probable tokens, so
any truncation with top_m >= k is exact.

Failure modes are distinguished by exception type: ``TransportError``
(network problems, retriable), ``ProtocolError`` (the server rejected or
mangled a request), and ``ConfigurationError`` (a request that can never
succeed, e.g. asking for more log-probs than the configured truncation).
"""

from __future__ import annotations

import numpy as np

try:
    import httpx
except ImportError as exc:  # pragma: no cover
    raise ImportError("the remote model client requires httpx") from exc

from ltpo.model import DecodeResult, ModelDescriptor, NUM_RESERVED, UNK_ID

from .wire import decode_matrix, encode_matrix


class RemoteModelError(Exception):
    """Base class for remote-model failures."""


class TransportError(RemoteModelError):
    """The service could not be reached; safe to retry."""


class ProtocolError(RemoteModelError):
    """The service answered with an error or a malformed payload."""


class ConfigurationError(RemoteModelError):
    """Client-side configuration can never satisfy the request."""


class RemoteModel:
    """Model-protocol adapter over the HTTP wire endpoints.

    ``top_m`` optionally pins the truncation width requested from the
    server; reward evaluations needing k > top_m raise ConfigurationError
    instead of silently computing on too short a prefix.
    """

    def __init__(self, endpoint: str, top_m: int | None = None, client=None):
        self._client = client or httpx.Client(base_url=endpoint, timeout=30.0)
        self.top_m = top_m
        info = self._get("/descriptor")
        self.charset = info["charset"]
        self.descriptor = ModelDescriptor(
            vocab_size=info["vocab_size"],
            hidden_dim=info["hidden_dim"],
            think_token_id=info["think_token_id"],
            eos_token_id=info["eos_token_id"],
            max_decode_tokens=info["max_decode_tokens"],
        )
        self._char_to_id = {
            c: i + NUM_RESERVED for i, c in enumerate(self.charset)
        }

    # -- transport ----------------------------------------------------------

    def _request(self, method: str, path: str, json_body=None) -> dict:
        try:
            response = self._client.request(method, path, json=json_body)
        except httpx.TransportError as exc:
            raise TransportError(f"{method} {path}: {exc}") from exc
        if response.status_code != 200:
            try:
                message = response.json().get("error", response.text)
            except ValueError:
                message = response.text
            raise ProtocolError(f"{method} {path}: [{response.status_code}] {message}")
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolError(f"{method} {path}: non-JSON response") from exc

    def _get(self, path: str) -> dict:
        return self._request("GET", path)

    def _post(self, path: str, body: dict) -> dict:
        return self._request("POST", path, body)

    # -- model protocol -----------------------------------------------------

    def tokenize(self, text: str) -> np.ndarray:
        return np.array(
            [self._char_to_id.get(c, UNK_ID) for c in text], dtype=np.int64
        )

    def detokenize(self, token_ids) -> str:
        return "".join(
            self.charset[int(t) - NUM_RESERVED]
            for t in np.asarray(token_ids, dtype=np.int64)
            if t >= NUM_RESERVED
        )

    def embed(self, token_ids) -> np.ndarray:
        ids = [int(t) for t in np.asarray(token_ids, dtype=np.int64)]
        reply = self._post("/embed", {"token_ids": ids})
        try:
            return decode_matrix(reply["embeddings"]).astype(np.float64)
        except (KeyError, ValueError) as exc:
            raise ProtocolError(f"bad /embed payload: {exc}") from None

    def forward_top_log_probs(self, embeddings, m: int):
        """Per-position (ids, floored log-probs), truncated to the top m."""
        if self.top_m is not None and m > self.top_m:
            raise ConfigurationError(
                f"requested top-{m} log-probs but the client truncation "
                f"is top_m={self.top_m}"
            )
        request_m = self.top_m if self.top_m is not None else m
        reply = self._post("/forward", {
            "embeddings": encode_matrix(np.asarray(embeddings)),
            "top_m": int(request_m),
        })
        try:
            positions = reply["positions"]
            ids = np.array([[int(i) for i, _ in pos] for pos in positions])
            log_probs = np.array([[float(lp) for _, lp in pos] for pos in positions])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad /forward payload: {exc}") from None
        if log_probs.shape[0] != np.asarray(embeddings).shape[0]:
            raise ProtocolError(
                f"/forward returned {log_probs.shape[0]} positions for "
                f"{np.asarray(embeddings).shape[0]} inputs"
            )
        return ids, log_probs

    def greedy_decode(self, prefix_embeddings, max_tokens: int) -> DecodeResult:
        reply = self._post("/decode", {
            "embeddings": encode_matrix(np.asarray(prefix_embeddings)),
            "max_tokens": int(max_tokens),
        })
        try:
            return DecodeResult(
                token_ids=np.array(reply["token_ids"], dtype=np.int64),
                text=reply["text"],
                stop_reason=reply["stop_reason"],
            )
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"bad /decode payload: {exc}") from None
