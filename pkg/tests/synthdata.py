"""Synthetic two-language world used by the training and evaluation tests.

Language 2 is a deterministic token renaming of language 1 (a seeded
permutation of the vocabulary). Sentences mix words from one of two
disjoint 20-token topic lexicons with shared filler tokens drawn from a
Zipf-like distribution, so the corpus carries both alignment signal for
the bilingual objective and topical structure for the inclusion objective
and the document classification task.
"""

from dataclasses import dataclass

import numpy as np

VOCAB_SIZE = 200
TOPIC_SIZE = 20
N_PAIRS = 2000
N_MONO = 5000
N_DOCS = 500

_TOPICS = ("economy", "sport")


def _letters(i: int) -> str:
    # letters only, so tokens pass the lowercase-ratio filter untouched
    return chr(ord("a") + i // 26) + chr(ord("a") + i % 26)


def l1_token(i: int) -> str:
    return "w" + _letters(i)


def l2_token(i: int) -> str:
    return "v" + _letters(i)


@dataclass
class SynthWorld:
    rename: dict  # l1 token -> l2 token
    pairs: list  # (l1 line, l2 line)
    mono_l1: list
    mono_l2: list
    train_docs_l1: list  # (label, doc_id, [sentence lines])
    test_docs_l2: list


def _make_generator(rng):
    topic_ids = {
        "economy": np.arange(0, TOPIC_SIZE),
        "sport": np.arange(TOPIC_SIZE, 2 * TOPIC_SIZE),
    }
    filler_ids = np.arange(2 * TOPIC_SIZE, VOCAB_SIZE)
    # Zipf-like filler frequencies make "most frequent tokens" meaningful
    weights = 1.0 / np.arange(1, filler_ids.size + 1)
    weights /= weights.sum()

    def sentence(topic: str) -> list:
        length = int(rng.integers(3, 9))
        ids = []
        for _ in range(length):
            if rng.random() < 0.5:
                pool = topic_ids[topic]
                ids.append(int(pool[rng.integers(0, pool.size)]))
            else:
                ids.append(int(filler_ids[rng.choice(filler_ids.size, p=weights)]))
        return ids

    return sentence


def make_world(seed: int = 2025) -> SynthWorld:
    rng = np.random.default_rng(seed)
    perm = rng.permutation(VOCAB_SIZE)
    rename = {l1_token(i): l2_token(int(perm[i])) for i in range(VOCAB_SIZE)}
    sentence = _make_generator(rng)

    def l1_line(ids) -> str:
        return " ".join(l1_token(i) for i in ids)

    def l2_line_from_l1(line: str) -> str:
        return " ".join(rename[t] for t in line.split())

    def pick_topic() -> str:
        return _TOPICS[int(rng.integers(0, 2))]

    pairs = []
    for _ in range(N_PAIRS):
        line = l1_line(sentence(pick_topic()))
        pairs.append((line, l2_line_from_l1(line)))

    mono_l1 = [l1_line(sentence(pick_topic())) for _ in range(N_MONO)]
    mono_l2 = [l2_line_from_l1(l1_line(sentence(pick_topic()))) for _ in range(N_MONO)]

    def doc(topic: str, in_l2: bool):
        n_sents = int(rng.integers(2, 6))
        lines = []
        for _ in range(n_sents):
            line = l1_line(sentence(topic))
            lines.append(l2_line_from_l1(line) if in_l2 else line)
        return lines

    train_docs_l1 = []
    test_docs_l2 = []
    for i in range(N_DOCS):
        topic = _TOPICS[i % 2]
        train_docs_l1.append((topic, f"train{i:04d}", doc(topic, in_l2=False)))
        test_docs_l2.append((topic, f"test{i:04d}", doc(topic, in_l2=True)))
    return SynthWorld(rename, pairs, mono_l1, mono_l2, train_docs_l1, test_docs_l2)
