"""Crosslingual document classification and nearest-neighbor inspection.

The classification protocol composes every document into a single vector
with the same two-level composition used during training, trains an
averaged perceptron on documents of one language for 10 iterations, and
tests it on documents of the other language.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Sentence, Vocabulary, encode
from .embeddings import EmbeddingTable, TablePair, compose_document
from .errors import DataError, OovError

# ASCII unit separator: delimits sentences within a document line
US = "\x1f"

NORM_MODES = ("none", "by_token_count", "unit_l2")


@dataclass
class LabeledDocument:
    doc_id: str
    label: str
    sentences: list  # encoded id arrays (or Sentence objects)
    language_tag: str = ""


def represent_document(doc: LabeledDocument, table: EmbeddingTable, kind, norm_mode: str = "none") -> np.ndarray:
    """Two-level composition of a document, with optional normalization.

    ``by_token_count`` divides by the document's token count (the mean word
    vector under Add); ``unit_l2`` rescales to unit norm (zero stays zero).
    """
    if norm_mode not in NORM_MODES:
        raise DataError(f"unknown norm mode {norm_mode!r}, expected one of {NORM_MODES}")
    composed = compose_document(doc.sentences, table, kind)
    vec = np.asarray(composed.values, dtype=np.float64)
    if norm_mode == "by_token_count":
        return vec / composed.source_len
    if norm_mode == "unit_l2":
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec
    return vec


# ---------------------------------------------------------------------------
# averaged perceptron


class PerceptronModel:
    """Multiclass perceptron with lazily accumulated weight averages.

    Prediction is argmax of class scores; ties resolve to the lowest class
    index. There is no bias term, so predictions are invariant to positive
    rescaling of the inputs.
    """

    def __init__(self, classes, dim: int):
        self.classes = list(classes)
        if len(self.classes) < 2:
            raise DataError("perceptron needs at least two classes")
        c = len(self.classes)
        self.w = np.zeros((c, dim), dtype=np.float64)
        self._acc = np.zeros((c, dim), dtype=np.float64)
        self._last = np.zeros(c, dtype=np.int64)
        self._t = 0

    def _flush(self, c: int) -> None:
        # bring class c's running sum up to date through example t-1
        self._acc[c] += (self._t - 1 - self._last[c]) * self.w[c]
        self._last[c] = self._t - 1

    def observe(self, x: np.ndarray, true_class: int) -> int:
        self._t += 1
        predicted = int(np.argmax(self.w @ x))
        if predicted != true_class:
            self._flush(true_class)
            self._flush(predicted)
            self.w[true_class] += x
            self.w[predicted] -= x
        return predicted

    def averaged_weights(self) -> np.ndarray:
        if self._t == 0:
            return self.w.copy()
        avg = self._acc + (self._t - self._last)[:, None] * self.w
        return avg / self._t

    def predict_index(self, x, use_average: bool = True) -> int:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.w.shape[1],):
            raise DataError(f"input dim {x.shape} does not match model dim {self.w.shape[1]}")
        weights = self.averaged_weights() if use_average else self.w
        return int(np.argmax(weights @ x))

    def predict_indices(self, xs, use_average: bool = True) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        weights = self.averaged_weights() if use_average else self.w
        return np.argmax(xs @ weights.T, axis=1)


def perceptron_train(train_docs, vectors, epochs: int = 10, seed: int = 0) -> PerceptronModel:
    """Train on composed document vectors; labels come from the documents.

    Document order is shuffled once per epoch by the seeded generator.
    """
    docs = list(train_docs)
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(docs) != vectors.shape[0]:
        raise DataError("document and vector counts differ")
    classes = sorted({d.label for d in docs})
    if len(classes) < 2:
        raise DataError("training data contains fewer than two classes")
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[d.label] for d in docs], dtype=np.int64)
    model = PerceptronModel(classes, vectors.shape[1])
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for i in rng.permutation(len(docs)):
            model.observe(vectors[i], int(y[i]))
    return model


def perceptron_predict(model: PerceptronModel, vector, use_average: bool = True) -> str:
    return model.classes[model.predict_index(vector, use_average)]


# ---------------------------------------------------------------------------
# crosslingual evaluation


@dataclass
class EvalReport:
    direction: str
    accuracy: float
    confusion: np.ndarray  # rows: true class, cols: predicted
    classes: list
    train_size: int
    config: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"crosslingual document classification {self.direction}",
            f"train size {self.train_size}, test size {int(self.confusion.sum())}",
            f"accuracy {self.accuracy:.4f}",
            "",
            "key=value block:",
            f"direction={self.direction}",
            f"accuracy={self.accuracy!r}",
            f"train_size={self.train_size}",
            f"test_size={int(self.confusion.sum())}",
            f"classes={','.join(self.classes)}",
        ]
        for key, value in sorted(self.config.items()):
            lines.append(f"config.{key}={value}")
        for i, label in enumerate(self.classes):
            row = ",".join(str(int(v)) for v in self.confusion[i])
            lines.append(f"confusion[{label}]={row}")
        return "\n".join(lines) + "\n"


def crosslingual_eval(
    train_docs,
    test_docs,
    tables: TablePair,
    kind="add",
    norm_mode: str = "none",
    epochs: int = 10,
    seed: int = 0,
    train_size: int | None = None,
) -> EvalReport:
    """Compose all documents (each with its own language's table), train the
    perceptron on the first set, and report accuracy on the second."""
    train_docs = list(train_docs)
    test_docs = list(test_docs)
    if not train_docs or not test_docs:
        raise DataError("both document sets must be non-empty")
    train_labels = {d.label for d in train_docs}
    test_labels = {d.label for d in test_docs}
    if train_labels != test_labels:
        raise DataError(
            f"label sets differ: train {sorted(train_labels)} vs test {sorted(test_labels)}"
        )
    if train_size is not None and train_size < len(train_docs):
        rng = np.random.default_rng((seed, 1))
        keep = rng.choice(len(train_docs), size=train_size, replace=False)
        train_docs = [train_docs[i] for i in sorted(keep)]

    def compose_all(docs):
        return np.stack(
            [
                represent_document(d, tables.by_tag(d.language_tag), kind, norm_mode)
                for d in docs
            ]
        )

    x_train = compose_all(train_docs)
    x_test = compose_all(test_docs)
    model = perceptron_train(train_docs, x_train, epochs=epochs, seed=seed)
    index = {c: i for i, c in enumerate(model.classes)}
    y_true = np.array([index[d.label] for d in test_docs])
    y_pred = model.predict_indices(x_test)
    c = len(model.classes)
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    accuracy = float(np.trace(confusion) / confusion.sum())
    direction = f"{train_docs[0].language_tag}->{test_docs[0].language_tag}"
    return EvalReport(
        direction=direction,
        accuracy=accuracy,
        confusion=confusion,
        classes=model.classes,
        train_size=len(train_docs),
        config={"kind": str(kind), "norm_mode": norm_mode, "epochs": epochs, "seed": seed},
    )


# ---------------------------------------------------------------------------
# nearest neighbors


def nearest_neighbors(
    query_token: str,
    src_vocab: Vocabulary,
    src_table: EmbeddingTable,
    dst_vocab: Vocabulary,
    dst_table: EmbeddingTable,
    k: int = 5,
    metric: str = "cosine",
) -> list[tuple[str, float]]:
    """Exhaustive scan of the destination table, descending similarity.

    The destination may equal the source for monolingual queries. The UNK
    row is never reported. For the euclidean metric the score is the negated
    distance so that scores are monotone non-increasing for both metrics.
    Ties order lexicographically by token.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if metric not in ("cosine", "euclidean"):
        raise DataError(f"unknown metric {metric!r}, expected cosine or euclidean")
    if query_token not in src_vocab or src_vocab.id_for(query_token) == src_vocab.unk_id:
        raise OovError(
            f"query {query_token!r} is not in the {src_vocab.language_tag or 'source'} "
            "vocabulary (tokens below the UNK threshold share the <unk> vector and "
            "cannot be queried individually)"
        )
    q = src_table.matrix[src_vocab.id_for(query_token)].astype(np.float64)
    m = dst_table.matrix.astype(np.float64, copy=False)
    if q.shape[0] != m.shape[1]:
        raise DataError("source and destination tables have different dims")
    if metric == "cosine":
        norms = np.linalg.norm(m, axis=1)
        qn = float(np.linalg.norm(q))
        denom = norms * qn
        with np.errstate(invalid="ignore", divide="ignore"):
            scores = np.where(denom > 0, (m @ q) / denom, 0.0)
    else:
        scores = -np.linalg.norm(m - q, axis=1)
    candidates = [
        (dst_vocab.token_for(i), float(scores[i])) for i in range(1, len(dst_vocab))
    ]
    candidates.sort(key=lambda ts: (-ts[1], ts[0]))
    return candidates[:k]


# ---------------------------------------------------------------------------
# labeled-document files: one document per line,
# label<TAB>doc_id<TAB>sentence1<US>sentence2<US>...


def read_labeled_documents(path, language_tag: str = "") -> list[LabeledDocument]:
    """Parse documents with raw token sentences (not yet encoded)."""
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(
                    f"{path}:{lineno}: expected 'label<TAB>doc_id<TAB>sentences'"
                )
            label, doc_id, body = parts
            sentences = [s for s in body.split(US) if s.split()]
            if not sentences:
                raise DataError(f"{path}:{lineno}: document has no sentences")
            docs.append(LabeledDocument(doc_id, label, sentences, language_tag))
    return docs


def write_labeled_documents(path, docs) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc in docs:
            body = US.join(
                s if isinstance(s, str) else " ".join(map(str, s)) for s in doc.sentences
            )
            f.write(f"{doc.label}\t{doc.doc_id}\t{body}\n")


def encode_documents(docs, vocab: Vocabulary, lowercase: bool = False) -> list[LabeledDocument]:
    """Encode raw-token documents against a vocabulary (OOV tokens to UNK)."""
    out = []
    for doc in docs:
        sentences = [encode(s, vocab, lowercase).word_ids for s in doc.sentences]
        out.append(LabeledDocument(doc.doc_id, doc.label, sentences, vocab.language_tag))
    return out
