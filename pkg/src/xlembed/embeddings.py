"""Embedding tables and the two composition functions with exact gradients.

The model parameters are nothing but one word-vector table per language.
Spans compose either by plain addition or by summing tanh over the vector
sums of adjacent word bigrams, which makes the result order sensitive.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus import SpanSet
from .errors import CompositionError, DataError


class CompositionKind(Enum):
    ADD = "add"
    BI = "bi"

    @classmethod
    def coerce(cls, kind) -> "CompositionKind":
        if isinstance(kind, cls):
            return kind
        try:
            return cls(str(kind).lower())
        except ValueError:
            raise DataError(f"unknown composition kind {kind!r} (expected add or bi)")


@dataclass
class ComposedVector:
    values: np.ndarray
    source_len: int


class EmbeddingTable:
    """Dense vocab-size by dim matrix of word vectors for one language.

    Reads may be shared freely; writes go through the trainer's update path
    only (single writer per row).
    """

    def __init__(self, matrix: np.ndarray, language_tag: str = ""):
        self.matrix = np.ascontiguousarray(matrix)
        self.language_tag = language_tag

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return int(self.matrix.shape[0])

    def rows(self, ids) -> np.ndarray:
        return self.matrix[np.asarray(ids)]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.matrix.copy(), self.language_tag)


def init_table(
    vocab_size: int,
    dim: int,
    sigma: float = 0.1,
    seed=0,
    language_tag: str = "",
    dtype=np.float64,
) -> EmbeddingTable:
    """Gaussian-initialized table, entries iid Normal(0, sigma^2).

    Deterministic for a fixed seed: the same seed always yields the
    bit-identical table.
    """
    if vocab_size < 1 or dim < 1:
        raise DataError(f"need vocab_size >= 1 and dim >= 1, got {vocab_size}x{dim}")
    if sigma <= 0:
        raise DataError(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    matrix = rng.normal(0.0, sigma, size=(vocab_size, dim))
    return EmbeddingTable(matrix.astype(dtype, copy=False), language_tag)


class TablePair:
    """The full parameter set: one embedding table per language."""

    def __init__(self, table_l1: EmbeddingTable, table_l2: EmbeddingTable):
        if table_l1.language_tag == table_l2.language_tag:
            raise DataError("the two tables must carry different language tags")
        if table_l1.dim != table_l2.dim:
            raise DataError("the two tables must share the embedding dimension")
        self.l1 = table_l1
        self.l2 = table_l2
        self._by_tag = {table_l1.language_tag: table_l1, table_l2.language_tag: table_l2}

    @property
    def dim(self) -> int:
        return self.l1.dim

    @property
    def tags(self) -> tuple[str, str]:
        return (self.l1.language_tag, self.l2.language_tag)

    @property
    def total_rows(self) -> int:
        return len(self.l1) + len(self.l2)

    def by_tag(self, tag: str) -> EmbeddingTable:
        try:
            return self._by_tag[tag]
        except KeyError:
            raise DataError(f"no embedding table for language {tag!r}")

    def sq_norm(self) -> float:
        return float((self.l1.matrix ** 2).sum() + (self.l2.matrix ** 2).sum())

    def copy(self) -> "TablePair":
        return TablePair(self.l1.copy(), self.l2.copy())


# ---------------------------------------------------------------------------
# composition, one span at a time


def compose_add(word_vectors) -> ComposedVector:
    """Componentwise sum of the word vectors; order does not matter."""
    v = np.asarray(word_vectors)
    if v.ndim != 2 or v.shape[0] < 1:
        raise CompositionError("compose_add needs at least one word vector")
    return ComposedVector(v.sum(axis=0), v.shape[0])


def compose_bi(word_vectors) -> ComposedVector:
    """Sum of tanh over vector sums of adjacent word bigrams (order matters)."""
    v = np.asarray(word_vectors)
    if v.ndim != 2 or v.shape[0] < 2:
        raise CompositionError("compose_bi needs at least two word vectors")
    return ComposedVector(np.tanh(v[:-1] + v[1:]).sum(axis=0), v.shape[0])


def compose(kind, word_vectors) -> ComposedVector:
    kind = CompositionKind.coerce(kind)
    if kind is CompositionKind.ADD:
        return compose_add(word_vectors)
    return compose_bi(word_vectors)


def compose_backward(kind, word_vectors, upstream_grad: np.ndarray) -> np.ndarray:
    """Per-word gradients of the composed vector against an upstream gradient.

    Add reproduces the upstream gradient for every word; Bi routes
    (1 - tanh^2) factors of each bigram to both of its words.
    """
    kind = CompositionKind.coerce(kind)
    v = np.asarray(word_vectors)
    g = np.asarray(upstream_grad)
    if v.ndim != 2 or g.shape != (v.shape[1],):
        raise CompositionError("word_vectors must be (l, d) and upstream_grad (d,)")
    if kind is CompositionKind.ADD:
        if v.shape[0] < 1:
            raise CompositionError("compose_add needs at least one word vector")
        return np.broadcast_to(g, v.shape).copy()
    if v.shape[0] < 2:
        raise CompositionError("compose_bi needs at least two word vectors")
    d = (1.0 - np.tanh(v[:-1] + v[1:]) ** 2) * g
    out = np.zeros_like(v)
    out[:-1] += d
    out[1:] += d
    return out


def sentence_vector(table: EmbeddingTable, word_ids, kind) -> np.ndarray:
    """Compose one encoded sentence.

    Unlike the strict compose_* entry points, a single-word sentence under Bi
    yields the zero vector (a sentence with no bigrams) so that real corpora
    containing one-token sentences do not abort mid-run.
    """
    kind = CompositionKind.coerce(kind)
    rows = table.rows(word_ids)
    if rows.shape[0] == 0:
        raise CompositionError("cannot compose an empty sentence")
    if kind is CompositionKind.ADD:
        return rows.sum(axis=0)
    if rows.shape[0] < 2:
        return np.zeros(table.dim, dtype=table.matrix.dtype)
    return np.tanh(rows[:-1] + rows[1:]).sum(axis=0)


def compose_document(document, table: EmbeddingTable, kind) -> ComposedVector:
    """Two-level composition: words into sentences, then sentences into the
    document with the same function. ``source_len`` is the total token count."""
    kind = CompositionKind.coerce(kind)
    sentences = [s.word_ids if hasattr(s, "word_ids") else np.asarray(s) for s in document]
    if not sentences:
        raise CompositionError("cannot compose an empty document")
    if kind is CompositionKind.BI and len(sentences) < 2:
        raise CompositionError("Bi document composition needs at least two sentences")
    sent_vecs = np.stack([sentence_vector(table, ids, kind) for ids in sentences])
    total_tokens = int(sum(ids.size for ids in sentences))
    if kind is CompositionKind.ADD:
        return ComposedVector(sent_vecs.sum(axis=0), total_tokens)
    return ComposedVector(np.tanh(sent_vecs[:-1] + sent_vecs[1:]).sum(axis=0), total_tokens)


# ---------------------------------------------------------------------------
# batched composition over flat span sets


def segment_sums(values: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Row sums of consecutive variable-length segments; empty segments sum
    to zero."""
    ends = np.cumsum(lengths)
    csum = np.empty((values.shape[0] + 1, values.shape[1]), dtype=values.dtype)
    csum[0] = 0.0
    np.cumsum(values, axis=0, out=csum[1:])
    return csum[ends] - csum[ends - lengths]


class SpanComposition:
    """Composed vectors for a batch of spans plus the backward context needed
    to push a per-span upstream gradient down to per-position rows."""

    def __init__(self, kind, matrix: np.ndarray, span: SpanSet):
        self.kind = CompositionKind.coerce(kind)
        self.span = span
        rows = matrix[span.ids]
        if self.kind is CompositionKind.ADD:
            self.values = segment_sums(rows, span.lengths)
        else:
            n = span.ids.size
            # a bigram is valid only when both positions fall in the same span
            seg_of_pos = np.repeat(np.arange(span.n), span.lengths)
            valid = seg_of_pos[:-1] == seg_of_pos[1:] if n > 1 else np.zeros(0, dtype=bool)
            self._pair_left = np.flatnonzero(valid)
            self._tanh = np.tanh(rows[self._pair_left] + rows[self._pair_left + 1])
            self._pairs_per = np.maximum(span.lengths - 1, 0)
            self._n_pos = n
            self.values = segment_sums(self._tanh, self._pairs_per)

    def position_grads(self, upstream: np.ndarray) -> np.ndarray:
        """Gradient for every flat position given one (n_spans, d) upstream."""
        if self.kind is CompositionKind.ADD:
            return np.repeat(upstream, self.span.lengths, axis=0)
        d = (1.0 - self._tanh ** 2) * np.repeat(upstream, self._pairs_per, axis=0)
        out = np.zeros((self._n_pos, upstream.shape[1]), dtype=upstream.dtype)
        out[self._pair_left] += d
        out[self._pair_left + 1] += d
        return out


# ---------------------------------------------------------------------------
# text export format: header "<vocab_size> <dim>", then "token f1 ... fd"
# per line in id order, one file per language


def save_embeddings_text(path, tokens, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix)
    if len(tokens) != matrix.shape[0]:
        raise DataError(
            f"token count {len(tokens)} does not match matrix rows {matrix.shape[0]}"
        )
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for token, row in zip(tokens, matrix):
            f.write(token)
            for v in row:
                f.write(f" {float(v)!r}")
            f.write("\n")


def load_embeddings_text(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: malformed header, expected '<vocab_size> <dim>'")
        n, dim = int(header[0]), int(header[1])
        tokens = []
        matrix = np.empty((n, dim), dtype=np.float64)
        for i in range(n):
            parts = f.readline().split()
            if len(parts) != dim + 1:
                raise DataError(f"{path}: row {i} has {len(parts) - 1} values, expected {dim}")
            tokens.append(parts[0])
            matrix[i] = [float(x) for x in parts[1:]]
    return tokens, matrix
