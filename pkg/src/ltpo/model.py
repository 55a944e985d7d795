"""Frozen language-model contract and a deterministic toy transformer.

The engine talks to any object that provides the small model protocol used
throughout this package:

    descriptor            -> ModelDescriptor
    embed(token_ids)      -> (N, d) float array, one row per token
    forward_distributions(embeddings) -> (N, |V|) row-stochastic array
    greedy_decode(prefix_embeddings, max_tokens) -> DecodeResult
    tokenize(text) / detokenize(token_ids)

``ToyTransformer`` is a self-contained implementation of that protocol: a
seeded, random-weight, causal transformer small enough that every algorithmic
property of the optimization stack can be tested on a laptop without any
external checkpoint.  Models are immutable once built; all methods are pure
and safe for concurrent readers.

Checkpoint file format (little-endian throughout):

    offset  size  field
    0       4     magic bytes b"LTPO"
    4       1     format version (currently 1)
    5       4     vocab_size        uint32
    9       4     hidden_dim        uint32
    13      4     num_layers        uint32
    17      4     num_heads         uint32
    21      4     max_decode_tokens uint32
    25      4     charset byte length uint32
    29      c     charset, utf-8
    29+c    rest  flat float32 tensor data in order: wte (V*d), then per
                  layer wq, wk, wv, wo (d*d each), w1 (d*4d), w2 (4d*d),
                  then head_w (d*V), head_b (V); all row-major

Token ids 0, 1 and 2 are reserved for end-of-sequence, the latent-thought
placeholder and unknown characters; the remaining ids map one-to-one onto the
model's character set.
"""

from __future__ import annotations

import hashlib
import string
import struct
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"LTPO"
CHECKPOINT_VERSION = 1

EOS_ID = 0
THINK_ID = 1
UNK_ID = 2
NUM_RESERVED = 3

# Probabilities are clamped to this floor before any log is taken, so the
# confidence reward stays finite even when mass concentrates on few tokens.
PROB_FLOOR = 1e-12

_LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelDescriptor:
    """Shape and special-token metadata of a loaded model."""

    vocab_size: int
    hidden_dim: int
    think_token_id: int
    eos_token_id: int
    max_decode_tokens: int = 4096

    def __post_init__(self):
        if self.vocab_size < 1:
            raise ValueError(f"vocab_size must be positive, got {self.vocab_size}")
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be positive, got {self.hidden_dim}")
        if not 0 <= self.think_token_id < self.vocab_size:
            raise ValueError("think_token_id outside vocabulary")
        if self.max_decode_tokens < 1:
            raise ValueError("max_decode_tokens must be >= 1")


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of one greedy decode: generated ids, text, and stop cause."""

    token_ids: np.ndarray
    text: str
    stop_reason: str  # "eos" | "max_tokens"


def stable_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction along the last axis."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _layer_norm(x: np.ndarray) -> np.ndarray:
    m = x.mean(axis=-1, keepdims=True)
    v = x.var(axis=-1, keepdims=True)
    return (x - m) / np.sqrt(v + _LN_EPS)


def _sinusoid_positions(n: int, d: int) -> np.ndarray:
    """Classic sin/cos position encoding; unbounded in sequence length."""
    pos = np.arange(n, dtype=np.float64)[:, None]
    idx = np.arange(d // 2, dtype=np.float64)[None, :]
    angles = pos / (10000.0 ** (2.0 * idx / d))
    pe = np.zeros((n, d), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def default_charset(vocab_size: int) -> str:
    """Characters assigned to the non-reserved ids of a toy vocabulary."""
    return string.printable[: vocab_size - NUM_RESERVED]


class ToyTransformer:
    """Frozen random-weight causal transformer over a character vocabulary.

    Pre-LN blocks (non-affine layer norm before attention and before the
    ReLU MLP), residual connections, no layer norm before the untied output
    head: the logits keep a direct linear dependence on each position's
    input row, which keeps reward gradients with respect to injected latent
    vectors well conditioned.  Position information is added inside the
    forward pass, so ``embed`` is a pure per-token table lookup and
    optimized latent vectors can be fed back in as ordinary rows.
    """

    def __init__(self, wte, layers, head_w, head_b, charset, num_heads,
                 max_decode_tokens=4096):
        self.wte = wte
        self.layers = layers
        self.head_w = head_w
        self.head_b = head_b
        self.charset = charset
        self.num_heads = num_heads
        vocab_size, hidden_dim = wte.shape
        self.descriptor = ModelDescriptor(
            vocab_size=vocab_size,
            hidden_dim=hidden_dim,
            think_token_id=THINK_ID,
            eos_token_id=EOS_ID,
            max_decode_tokens=max_decode_tokens,
        )
        self._char_to_id = {
            c: i + NUM_RESERVED for i, c in enumerate(charset)
        }

    # -- tokenization ------------------------------------------------------

    def tokenize(self, text: str) -> np.ndarray:
        """Map text to token ids; characters outside the charset become UNK."""
        return np.array(
            [self._char_to_id.get(c, UNK_ID) for c in text], dtype=np.int64
        )

    def detokenize(self, token_ids) -> str:
        """Map ids back to text; reserved ids contribute nothing."""
        chars = []
        for t in np.asarray(token_ids, dtype=np.int64):
            if t >= NUM_RESERVED:
                chars.append(self.charset[int(t) - NUM_RESERVED])
        return "".join(chars)

    # -- model protocol ----------------------------------------------------

    def embed(self, token_ids) -> np.ndarray:
        """Per-token embedding lookup (no position information)."""
        ids = np.asarray(token_ids, dtype=np.int64)
        if ids.ndim != 1:
            raise ValueError(f"token ids must be one-dimensional, got shape {ids.shape}")
        if ids.size == 0:
            raise ValueError("cannot embed an empty token sequence")
        bad = np.flatnonzero((ids < 0) | (ids >= self.descriptor.vocab_size))
        if bad.size:
            p = int(bad[0])
            raise ValueError(
                f"token id {int(ids[p])} at position {p} outside vocabulary "
                f"of size {self.descriptor.vocab_size}"
            )
        return self.wte[ids].copy()

    def forward_distributions(self, embeddings) -> np.ndarray:
        """Next-token distributions for every position of one sequence.

        Returns an (N, |V|) array whose rows are the softmax outputs; the
        softmax subtracts the per-row maximum before exponentiation.
        """
        x = self._check_input(embeddings, batch=False)
        return self._forward_probs(x)

    def forward_distributions_batch(self, embeddings) -> np.ndarray:
        """Vectorized forward over a (B, N, d) stack of sequences.

        Equivalent to calling ``forward_distributions`` on each sequence;
        exists so Monte Carlo heavy callers (gradient checks, smoothing
        oracles) stay fast.
        """
        x = self._check_input(embeddings, batch=True)
        return self._forward_probs(x)

    def greedy_decode(self, prefix_embeddings, max_tokens: int) -> DecodeResult:
        """Argmax decoding from an embedding prefix.

        At each step the argmax token of the final position's distribution is
        selected (ties break toward the lowest token id), its embedding row is
        appended, and decoding continues until the end-of-sequence token or
        ``max_tokens`` generated tokens.
        """
        if max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
        x = self._check_input(prefix_embeddings, batch=False).copy()
        ids: list[int] = []
        stop_reason = "max_tokens"
        for _ in range(max_tokens):
            probs = self._forward_probs(x)
            nxt = int(np.argmax(probs[-1]))  # first occurrence == lowest id
            if nxt == self.descriptor.eos_token_id:
                stop_reason = "eos"
                break
            ids.append(nxt)
            x = np.vstack([x, self.wte[nxt]])
        token_ids = np.array(ids, dtype=np.int64)
        return DecodeResult(token_ids, self.detokenize(token_ids), stop_reason)

    # -- internals ---------------------------------------------------------

    def _check_input(self, embeddings, batch: bool) -> np.ndarray:
        x = np.asarray(embeddings, dtype=np.float64)
        want = 3 if batch else 2
        if x.ndim != want:
            raise ValueError(
                f"expected a {want}-dimensional embedding array, got shape {x.shape}"
            )
        if x.shape[-1] != self.descriptor.hidden_dim:
            raise ValueError(
                f"embedding width {x.shape[-1]} does not match hidden_dim "
                f"{self.descriptor.hidden_dim}"
            )
        if x.shape[-2] < 1:
            raise ValueError("forward pass requires at least one position")
        if not np.isfinite(x).all():
            raise ValueError("embedding input contains non-finite entries")
        return x

    def _forward_probs(self, x: np.ndarray) -> np.ndarray:
        n, d = x.shape[-2], x.shape[-1]
        nh = self.num_heads
        dh = d // nh
        h = x + _sinusoid_positions(n, d)
        causal = np.triu(np.full((n, n), -np.inf), k=1)
        for ly in self.layers:
            a = _layer_norm(h)
            q = a @ ly["wq"]
            k = a @ ly["wk"]
            v = a @ ly["wv"]
            if nh > 1:
                # split heads: (..., N, d) -> (..., nh, N, dh)
                q = np.swapaxes(q.reshape(*q.shape[:-1], nh, dh), -3, -2)
                k = np.swapaxes(k.reshape(*k.shape[:-1], nh, dh), -3, -2)
                v = np.swapaxes(v.reshape(*v.shape[:-1], nh, dh), -3, -2)
            scores = q @ np.swapaxes(k, -1, -2) / np.sqrt(dh) + causal
            attn = stable_softmax(scores) @ v
            if nh > 1:
                attn = np.swapaxes(attn, -3, -2).reshape(*h.shape)
            h = h + attn @ ly["wo"]
            h = h + np.maximum(_layer_norm(h) @ ly["w1"], 0.0) @ ly["w2"]
        logits = h @ self.head_w + self.head_b
        return stable_softmax(logits)

    def parameter_checksum(self) -> str:
        """SHA-256 over all parameter bytes, for determinism checks."""
        digest = hashlib.sha256()
        for arr in self._param_arrays():
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()

    def _param_arrays(self):
        yield self.wte
        for ly in self.layers:
            for name in ("wq", "wk", "wv", "wo", "w1", "w2"):
                yield ly[name]
        yield self.head_w
        yield self.head_b


def build_toy_lm(seed: int, vocab_size: int, hidden_dim: int, layers: int,
                 num_heads: int = 1, charset: str | None = None,
                 max_decode_tokens: int = 4096) -> ToyTransformer:
    """Build a frozen toy transformer with a documented seeded initializer.

    All weights come from one ``numpy.random.default_rng(seed)`` stream in a
    fixed order: the embedding table first (standard normal entries), then
    for each layer wq, wk, wv, wo, w1, w2 (standard normal scaled by
    1/sqrt(fan_in)), then the untied output head (standard normal scaled by
    2/sqrt(hidden_dim), zero bias).  The head scaling gives the random model
    moderately sharp next-token distributions instead of near-uniform ones.
    Identical seeds give bit-identical parameters.
    """
    if vocab_size < 8:
        raise ValueError(f"vocab_size must be >= 8, got {vocab_size}")
    if hidden_dim < 4:
        raise ValueError(f"hidden_dim must be >= 4, got {hidden_dim}")
    if layers < 1:
        raise ValueError(f"layers must be >= 1, got {layers}")
    nh = num_heads
    if nh < 1 or hidden_dim % nh != 0:
        raise ValueError(f"num_heads {nh} must divide hidden_dim {hidden_dim}")
    if charset is None:
        charset = default_charset(vocab_size)
    if len(charset) != vocab_size - NUM_RESERVED:
        raise ValueError(
            f"charset must contain exactly vocab_size - {NUM_RESERVED} "
            f"characters, got {len(charset)} for vocab_size {vocab_size}"
        )
    if len(set(charset)) != len(charset):
        raise ValueError("charset contains duplicate characters")

    rng = np.random.default_rng(seed)
    d = hidden_dim
    wte = rng.standard_normal((vocab_size, d))
    blocks = []
    for _ in range(layers):
        blocks.append({
            "wq": rng.standard_normal((d, d)) / np.sqrt(d),
            "wk": rng.standard_normal((d, d)) / np.sqrt(d),
            "wv": rng.standard_normal((d, d)) / np.sqrt(d),
            "wo": rng.standard_normal((d, d)) / np.sqrt(d),
            "w1": rng.standard_normal((d, 4 * d)) / np.sqrt(d),
            "w2": rng.standard_normal((4 * d, d)) / np.sqrt(4 * d),
        })
    head_w = rng.standard_normal((d, vocab_size)) * (2.0 / np.sqrt(d))
    head_b = np.zeros(vocab_size)
    return ToyTransformer(wte, blocks, head_w, head_b, charset, nh,
                          max_decode_tokens)


def save_checkpoint(model: ToyTransformer, path) -> None:
    """Serialize a toy model in the flat little-endian float32 format."""
    desc = model.descriptor
    charset_bytes = model.charset.encode("utf-8")
    header = CHECKPOINT_MAGIC + struct.pack(
        "<BIIIIII",
        CHECKPOINT_VERSION,
        desc.vocab_size,
        desc.hidden_dim,
        len(model.layers),
        model.num_heads,
        desc.max_decode_tokens,
        len(charset_bytes),
    )
    flat = np.concatenate(
        [np.ascontiguousarray(a, dtype=np.float64).ravel()
         for a in model._param_arrays()]
    ).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(charset_bytes)
        fh.write(flat.tobytes())


def load_checkpoint(path) -> ToyTransformer:
    """Load a toy model from the LTPO checkpoint format."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a toy checkpoint (bad magic bytes)")
    version, vocab, d, nlayers, nh, max_dec, charset_len = struct.unpack(
        "<BIIIIII", raw[4:29]
    )
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    charset = raw[29:29 + charset_len].decode("utf-8")
    flat = np.frombuffer(raw[29 + charset_len:], dtype="<f4").astype(np.float64)

    shapes = [(vocab, d)]
    for _ in range(nlayers):
        shapes += [(d, d)] * 4 + [(d, 4 * d), (4 * d, d)]
    shapes += [(d, vocab), (vocab,)]
    need = sum(int(np.prod(s)) for s in shapes)
    if flat.size != need:
        raise ValueError(
            f"{path}: tensor payload has {flat.size} floats, expected {need}"
        )
    arrays = []
    off = 0
    for s in shapes:
        n = int(np.prod(s))
        arrays.append(flat[off:off + n].reshape(s).copy())
        off += n
    wte = arrays[0]
    blocks = []
    for i in range(nlayers):
        names = ("wq", "wk", "wv", "wo", "w1", "w2")
        blocks.append(dict(zip(names, arrays[1 + 6 * i:7 + 6 * i])))
    head_w, head_b = arrays[-2], arrays[-1]
    return ToyTransformer(wte, blocks, head_w, head_b, charset, nh, max_dec)


class CountingModel:
    """Per-run instrumentation wrapper around any model.

    Counts forward passes and decode calls while delegating everything else
    to the wrapped model.  The wrapper mirrors exactly the forward surface
    the wrapped model provides (full distributions, truncated top-m
    log-probabilities, or both), so capability checks behave the same as on
    the bare model.  One wrapper instance belongs to one unit of work; it is
    not meant to be shared across threads.
    """

    def __init__(self, inner):
        self.inner = inner
        self.forward_passes = 0
        self.decode_calls = 0
        if hasattr(inner, "forward_distributions"):
            self.forward_distributions = self._counted(inner.forward_distributions)
        if hasattr(inner, "forward_top_log_probs"):
            self.forward_top_log_probs = self._counted(inner.forward_top_log_probs)

    def _counted(self, fn):
        def wrapped(*args, **kwargs):
            self.forward_passes += 1
            return fn(*args, **kwargs)
        return wrapped

    @property
    def descriptor(self) -> ModelDescriptor:
        return self.inner.descriptor

    def embed(self, token_ids):
        return self.inner.embed(token_ids)

    def greedy_decode(self, prefix_embeddings, max_tokens):
        self.decode_calls += 1
        return self.inner.greedy_decode(prefix_embeddings, max_tokens)

    def __getattr__(self, name):
        if name == "inner":
            raise AttributeError(name)
        return getattr(self.inner, name)
