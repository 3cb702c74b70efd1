"""Feature stabilization via paired concept embeddings and attention.

A bank of N frame-agnostic embedding pairs (positive/negative) is mixed
convexly per pair, alpha_i = sigmoid(logit_i):

    token_i = neg_i + alpha_i * (pos_i - neg_i)

The mixed tokens are projected and appended to each frame's flattened
spatial tokens before single-head self-attention; only the spatial rows
of the attention output are kept and reshaped back, so the feature map
keeps its extents while every query has seen the stable anchors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import BinaryIO, Literal

import numpy as np
from scipy.special import expit

from . import rng
from .tensor import ShapeError, Tensor5, read_tensor, write_tensor

DEFAULT_EMBED_DIM = 384
DEFAULT_PRIMITIVE_PAIRS = 8

ConceptMode = Literal["sum_single_token", "per_pair_tokens"]
DEFAULT_CONCEPT_MODE: ConceptMode = "per_pair_tokens"


@dataclass(frozen=True)
class PrimitiveBank:
    """N paired embeddings with per-pair mixing logits."""

    pos: np.ndarray   # (N, C)
    neg: np.ndarray   # (N, C)
    logits: np.ndarray  # (N,)

    def __post_init__(self) -> None:
        pos = np.asarray(self.pos, dtype=np.float64)
        neg = np.asarray(self.neg, dtype=np.float64)
        logits = np.asarray(self.logits, dtype=np.float64)
        if pos.ndim != 2 or pos.shape != neg.shape or logits.shape != (pos.shape[0],):
            raise ShapeError("pos/neg must be (N, C) with logits of length N")
        for name, a in (("pos", pos), ("neg", neg), ("logits", logits)):
            if not np.isfinite(a).all():
                raise ValueError(f"non-finite values in {name}")
        object.__setattr__(self, "pos", pos)
        object.__setattr__(self, "neg", neg)
        object.__setattr__(self, "logits", logits)

    @property
    def n_pairs(self) -> int:
        return self.pos.shape[0]

    @property
    def dim(self) -> int:
        return self.pos.shape[1]


@dataclass(frozen=True)
class AttentionSpec:
    """Square projections for single-head attention over C-dim tokens."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_inject: np.ndarray
    d_k: int
    concept_mode: ConceptMode = DEFAULT_CONCEPT_MODE

    def __post_init__(self) -> None:
        mats = {}
        c = None
        for name in ("w_q", "w_k", "w_v", "w_inject"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ShapeError(f"{name} must be square, got {m.shape}")
            c = m.shape[0] if c is None else c
            if m.shape[0] != c:
                raise ShapeError("projection matrices disagree on dimension")
            mats[name] = m
        if self.d_k != c:
            raise ShapeError(f"d_k must equal the token dimension {c}")
        for name, m in mats.items():
            object.__setattr__(self, name, m)

    @property
    def dim(self) -> int:
        return self.w_q.shape[0]


def gaussian_bank(n_pairs: int, dim: int, seed: int) -> PrimitiveBank:
    """Standard-normal initialization of all pairs and logits."""
    pos = rng.standard_normal(rng.stream_key(seed, "primitives.pos"),
                              n_pairs * dim).reshape(n_pairs, dim)
    neg = rng.standard_normal(rng.stream_key(seed, "primitives.neg"),
                              n_pairs * dim).reshape(n_pairs, dim)
    logits = rng.standard_normal(rng.stream_key(seed, "primitives.logits"), n_pairs)
    return PrimitiveBank(pos=pos, neg=neg, logits=logits)


def random_attention_spec(dim: int, seed: int,
                          concept_mode: ConceptMode = DEFAULT_CONCEPT_MODE) -> AttentionSpec:
    def mat(label: str) -> np.ndarray:
        flat = rng.standard_normal(rng.stream_key(seed, label), dim * dim)
        return flat.reshape(dim, dim) / np.sqrt(dim)
    return AttentionSpec(w_q=mat("attn.w_q"), w_k=mat("attn.w_k"),
                         w_v=mat("attn.w_v"), w_inject=mat("attn.w_inject"),
                         d_k=dim, concept_mode=concept_mode)


def mix_primitives(bank: PrimitiveBank, mode: ConceptMode) -> np.ndarray:
    """Convex per-pair mixing; returns (M, C) concept tokens.

    per_pair_tokens keeps one token per pair (M = N); sum_single_token
    collapses them into their sum (M = 1).
    """
    alpha = expit(bank.logits)[:, None]
    tokens = bank.neg + alpha * (bank.pos - bank.neg)
    if mode == "per_pair_tokens":
        return tokens
    if mode == "sum_single_token":
        return tokens.sum(axis=0, keepdims=True)
    raise ValueError(f"unknown concept mode {mode!r}")


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def attend_rows(x_rows: np.ndarray, spec: AttentionSpec) -> np.ndarray:
    """Single-head scaled dot-product attention over token rows."""
    q = x_rows @ spec.w_q
    k = x_rows @ spec.w_k
    v = x_rows @ spec.w_v
    a = _softmax_rows(q @ k.T / np.sqrt(spec.d_k))
    return a @ v


def augmented_attention(f_s: Tensor5, concepts: np.ndarray,
                        spec: AttentionSpec) -> Tensor5:
    """Per-frame self-attention with injected concept rows.

    Each (n, t) frame is flattened to H*W row-major tokens, the projected
    concepts are appended, attention runs over all rows, and only the
    spatial rows are written back.
    """
    n, c, t, h, w = f_s.shape
    if c != spec.dim:
        raise ShapeError(f"feature channels {c} do not match projections {spec.dim}")
    concepts = np.asarray(concepts, dtype=np.float64).reshape(-1, c) \
        if concepts is not None and np.size(concepts) else np.zeros((0, c))
    if concepts.shape[1] != c:
        raise ShapeError("concept tokens disagree with the feature dimension")
    injected = concepts @ spec.w_inject
    out = np.empty_like(f_s.data)
    frames = np.moveaxis(f_s.data, 1, -1)  # (N, T, H, W, C)
    for ni in range(n):
        for ti in range(t):
            tokens = frames[ni, ti].reshape(h * w, c)
            x = np.concatenate([tokens, injected], axis=0)
            y = attend_rows(x, spec)
            out[ni, :, ti] = y[:h * w].reshape(h, w, c).transpose(2, 0, 1)
    return Tensor5(out)


def attention_oracle(x_rows: np.ndarray, spec: AttentionSpec) -> np.ndarray:
    """Naive loop evaluation of the same attention; for cross-checking."""
    x = np.asarray(x_rows, dtype=np.float64)
    rows, c = x.shape
    q = np.zeros((rows, c))
    k = np.zeros((rows, c))
    v = np.zeros((rows, c))
    for i in range(rows):
        for j in range(c):
            for l in range(c):
                q[i, j] += x[i, l] * spec.w_q[l, j]
                k[i, j] += x[i, l] * spec.w_k[l, j]
                v[i, j] += x[i, l] * spec.w_v[l, j]
    out = np.zeros((rows, c))
    scale = 1.0 / np.sqrt(spec.d_k)
    for i in range(rows):
        logits = [sum(q[i, l] * k[j, l] for l in range(c)) * scale for j in range(rows)]
        total = sum(np.exp(s) for s in logits)
        weights = [np.exp(s) / total for s in logits]
        for j in range(rows):
            for l in range(c):
                out[i, l] += weights[j] * v[j, l]
    return out


def save_bank(dst: str | BinaryIO, bank: PrimitiveBank,
              mode: ConceptMode = DEFAULT_CONCEPT_MODE) -> None:
    """One JSON header line, then pos/neg/logits in the tensor dump format."""
    header = json.dumps({"n_pairs": bank.n_pairs, "dim": bank.dim,
                         "mode": mode}) + "\n"
    if isinstance(dst, (str, bytes)):
        with open(dst, "wb") as fh:
            save_bank(fh, bank, mode)
        return
    dst.write(header.encode("utf-8"))
    write_tensor(dst, Tensor5(bank.pos.reshape(1, 1, 1, *bank.pos.shape)))
    write_tensor(dst, Tensor5(bank.neg.reshape(1, 1, 1, *bank.neg.shape)))
    write_tensor(dst, Tensor5(bank.logits.reshape(1, 1, 1, 1, -1)))


def load_bank(src: str | BinaryIO) -> tuple[PrimitiveBank, ConceptMode]:
    if isinstance(src, (str, bytes)):
        with open(src, "rb") as fh:
            return load_bank(fh)
    line = bytearray()
    while True:
        ch = src.read(1)
        if not ch or ch == b"\n":
            break
        line.extend(ch)
    meta = json.loads(line.decode("utf-8"))
    pos = read_tensor(src).data.reshape(meta["n_pairs"], meta["dim"])
    neg = read_tensor(src).data.reshape(meta["n_pairs"], meta["dim"])
    logits = read_tensor(src).data.reshape(meta["n_pairs"])
    return PrimitiveBank(pos=pos, neg=neg, logits=logits), meta["mode"]
