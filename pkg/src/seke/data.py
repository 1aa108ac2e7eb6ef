"""Dataset records, JSONL ingestion, and the two synthetic corpus
generators used for end-to-end checks.

"marker" documents hide 1-3 token keyphrases of kw-prefixed vocabulary
inside filler text; "vocabsplit" documents draw every token from one of two
disjoint vocabularies and record the class per token in the annotation
stream, with class-A tokens doubling as single-word gold keyphrases.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .nn import RngStream


@dataclass
class Document:
    id: str
    text: str
    keywords: list[str] = field(default_factory=list)


def load_jsonl(path) -> list[Document]:
    """One document per line: {"id", "text", "keywords"}; keywords optional
    for prediction-only input. Duplicate ids and malformed lines are errors."""
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            for key in ("id", "text"):
                if key not in obj:
                    raise DataError(f"{path}:{lineno}: missing field {key!r}")
            doc_id = str(obj["id"])
            if doc_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
            seen.add(doc_id)
            keywords = obj.get("keywords", [])
            if not isinstance(keywords, list):
                raise DataError(f"{path}:{lineno}: keywords must be a list")
            docs.append(Document(doc_id, str(obj["text"]), [str(k) for k in keywords]))
    return docs


def save_jsonl(docs: list[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(
                json.dumps(
                    {"id": doc.id, "text": doc.text, "keywords": doc.keywords},
                    sort_keys=True,
                )
                + "\n"
            )


@dataclass
class TokenAnnotations:
    id: str
    tokens: list[str]
    pos: list[str]
    ne: list[str]


def save_annotations(annotations: list[TokenAnnotations], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(
                json.dumps(
                    {"id": ann.id, "tokens": ann.tokens, "pos": ann.pos, "ne": ann.ne},
                    sort_keys=True,
                )
                + "\n"
            )


# ------------------------------------------------------------- synthetic data

_SYLLABLES = [
    "ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lo", "mu",
    "na", "pe", "ri", "so", "tu", "va", "we", "xi", "yo", "zu",
]


def _word(rng, n_syllables: int) -> str:
    return "".join(_SYLLABLES[rng.integers(len(_SYLLABLES))] for _ in range(n_syllables))


def _vocabulary(rng, size: int, prefix: str = "") -> list[str]:
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        w = prefix + _word(rng, 2 + int(rng.integers(2)))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def gen_synthetic(
    n_docs: int, seed: int, rule: str
) -> tuple[list[Document], list[TokenAnnotations]]:
    """Deterministic synthetic corpus plus its token annotation stream."""
    if n_docs < 1:
        raise DataError(f"n_docs must be >= 1, got {n_docs}")
    if rule not in ("marker", "vocabsplit"):
        raise DataError(f"unknown synthetic rule {rule!r}")
    rng = RngStream(seed).stream(f"synthetic.{rule}")
    if rule == "marker":
        return _gen_marker(n_docs, rng)
    return _gen_vocabsplit(n_docs, rng)


def _gen_marker(n_docs: int, rng) -> tuple[list[Document], list[TokenAnnotations]]:
    fillers = _vocabulary(rng, 150)
    keyword_vocab = _vocabulary(rng, 40, prefix="kw")
    docs, annotations = [], []
    for d in range(n_docs):
        length = int(rng.integers(30, 81))
        n_spans = int(rng.integers(1, 5))
        spans = [
            [keyword_vocab[rng.integers(len(keyword_vocab))]
             for _ in range(int(rng.integers(1, 4)))]
            for _ in range(n_spans)
        ]
        span_tokens = sum(len(s) for s in spans)
        n_fillers = max(length - span_tokens, n_spans + 1)
        # distribute fillers into n_spans+1 gaps, inner gaps nonempty so
        # distinct spans never merge into one kw run
        cuts = sorted(
            rng.choice(np.arange(1, n_fillers), size=n_spans, replace=False).tolist()
        )
        gaps = []
        prev = 0
        for c in cuts + [n_fillers]:
            gaps.append(c - prev)
            prev = c
        tokens: list[str] = []
        for i, span in enumerate(spans):
            tokens += [fillers[rng.integers(len(fillers))] for _ in range(gaps[i])]
            tokens += span
        tokens += [fillers[rng.integers(len(fillers))] for _ in range(gaps[-1])]
        gold = sorted({" ".join(s) for s in spans})
        doc_id = f"marker-{d:04d}"
        docs.append(Document(doc_id, " ".join(tokens), gold))
        annotations.append(
            TokenAnnotations(
                doc_id,
                tokens,
                ["KW" if t.startswith("kw") else "W" for t in tokens],
                ["O"] * len(tokens),
            )
        )
    return docs, annotations


def _gen_vocabsplit(n_docs: int, rng) -> tuple[list[Document], list[TokenAnnotations]]:
    vocab_a = _vocabulary(rng, 120)
    vocab_b = [w for w in _vocabulary(rng, 180) if w not in set(vocab_a)][:120]
    docs, annotations = [], []
    for d in range(n_docs):
        length = int(rng.integers(30, 81))
        classes = ["A" if rng.random() < 0.5 else "B" for _ in range(length)]
        if "A" not in classes:
            classes[int(rng.integers(length))] = "A"
        tokens = [
            vocab_a[rng.integers(len(vocab_a))]
            if cls == "A"
            else vocab_b[rng.integers(len(vocab_b))]
            for cls in classes
        ]
        gold = sorted({t for t, c in zip(tokens, classes) if c == "A"})
        doc_id = f"vsplit-{d:04d}"
        docs.append(Document(doc_id, " ".join(tokens), gold))
        annotations.append(TokenAnnotations(doc_id, tokens, classes, ["O"] * len(tokens)))
    return docs, annotations
