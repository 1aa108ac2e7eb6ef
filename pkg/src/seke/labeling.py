"""Word tokenization, gold-phrase-to-BIO projection, BIO decoding, and the
keyphrase post-processing filter (punctuation, stem-deduplication, top-10).

Tokens are maximal runs of letters, digits, dashes, and apostrophes; any
other non-whitespace character becomes a single-character punctuation token.
Labels: O=0 (outside), B=1 (first word of a phrase), I=2 (continuation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .evaluation import match_key

LABEL_O = 0
LABEL_B = 1
LABEL_I = 2
LABEL_NAMES = ("O", "B", "I")

MAX_KEYPHRASES = 10
_JOINERS = "-'"


@dataclass
class Token:
    surface: str
    char_start: int
    char_end: int
    index: int


@dataclass
class RawPhrase:
    text: str
    score: float
    first_token_index: int
    token_surfaces: list[str]


@dataclass
class KeyphrasePrediction:
    phrases: list[RawPhrase] = field(default_factory=list)


@dataclass
class LabeledSequence:
    tokens: list[Token]
    labels: list[int]
    probs: np.ndarray | None = None


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch in _JOINERS


def is_word_token(surface: str) -> bool:
    return bool(surface) and all(_is_word_char(c) for c in surface)


def tokenize(text: str) -> list[Token]:
    """Split text into word tokens and single-character punctuation tokens;
    offsets are byte positions in the UTF-8 encoding."""
    tokens: list[Token] = []
    run_start_byte = -1
    run_chars: list[str] = []
    byte_pos = 0

    def flush():
        nonlocal run_start_byte
        if run_chars:
            surface = "".join(run_chars)
            tokens.append(
                Token(surface, run_start_byte, byte_pos, len(tokens))
            )
            run_chars.clear()
            run_start_byte = -1

    for ch in text:
        width = len(ch.encode("utf-8"))
        if _is_word_char(ch):
            if not run_chars:
                run_start_byte = byte_pos
            run_chars.append(ch)
        else:
            flush()
            if not ch.isspace():
                tokens.append(Token(ch, byte_pos, byte_pos + width, len(tokens)))
        byte_pos += width
    flush()
    return tokens


def annotate_bio(tokens: list[Token], gold: list[str]) -> list[int]:
    """Project gold phrases onto BIO labels by case-insensitive exact token
    match; overlaps resolve by earliest start, then longest span."""
    surfaces = [t.surface.lower() for t in tokens]
    spans: list[tuple[int, int]] = []
    for phrase in gold:
        needle = [t.surface.lower() for t in tokenize(phrase)]
        if not needle:
            continue
        n = len(needle)
        for start in range(0, len(surfaces) - n + 1):
            if surfaces[start : start + n] == needle:
                spans.append((start, n))
    spans.sort(key=lambda s: (s[0], -s[1]))
    labels = [LABEL_O] * len(tokens)
    taken_until = -1
    for start, n in spans:
        if start <= taken_until:
            continue
        labels[start] = LABEL_B
        for i in range(start + 1, start + n):
            labels[i] = LABEL_I
        taken_until = start + n - 1
    return labels


def decode_keyphrases(seq: LabeledSequence) -> list[RawPhrase]:
    """Extract maximal B I* runs; an I with no live phrase opens one. Score
    is the mean probability assigned to each token's predicted label."""
    phrases: list[RawPhrase] = []
    current: list[int] = []

    def tok_score(i: int) -> float:
        if seq.probs is None:
            return 1.0
        return float(seq.probs[i, seq.labels[i]])

    def close():
        if current:
            surfaces = [seq.tokens[i].surface for i in current]
            score = sum(tok_score(i) for i in current) / len(current)
            phrases.append(
                RawPhrase(" ".join(surfaces), score, current[0], surfaces)
            )
            current.clear()

    for i, label in enumerate(seq.labels):
        if label == LABEL_B:
            close()
            current.append(i)
        elif label == LABEL_I:
            current.append(i)
        else:
            close()
    close()
    return phrases


def _has_disallowed_punct(phrase: RawPhrase) -> bool:
    return any(
        not (_is_word_char(c) or c.isspace()) for c in phrase.text
    )


def postprocess(raw: list[RawPhrase]) -> KeyphrasePrediction:
    """Drop phrases with punctuation beyond dashes and apostrophes, keep the
    best-scoring occurrence per stemmed form, rank, and cap at ten."""
    survivors = [p for p in raw if not _has_disallowed_punct(p)]
    survivors.sort(key=lambda p: (-p.score, p.first_token_index))
    seen: set[str] = set()
    ranked: list[RawPhrase] = []
    for p in survivors:
        key = match_key(p.text)
        if key in seen:
            continue
        seen.add(key)
        ranked.append(p)
        if len(ranked) == MAX_KEYPHRASES:
            break
    return KeyphrasePrediction(ranked)
