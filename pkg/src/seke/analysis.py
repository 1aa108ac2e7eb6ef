"""Expert-specialization analysis: record the top-weighted expert per token
at inference, annotate tokens with categorical attributes, and measure the
association per category with bias-corrected Cramér's V.

Built-in categories come from the token stream itself (word identity,
punctuation flag, stop list membership) plus the model's predicted labels;
part-of-speech and named-entity categories are ingested from an external
annotation file rather than computed here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .data import Document
from .errors import DataError, DegenerateTableError, UnsupportedModelError
from .labeling import is_word_token
from .model import KeywordExtractor

CATEGORY_ORDER = ("Words", "Punct", "Stop", "POS", "Labels", "binNE", "NE")
ANNOTATION_CATEGORIES = ("POS", "binNE", "NE")


def load_stopwords() -> frozenset[str]:
    text = resources.files("seke").joinpath("data/stopwords_en.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


@dataclass
class ExpertTrace:
    doc_id: str
    tokens: list[str]
    experts: list[int]
    labels: list[str]
    weights: list[list[float]]


def trace_experts(
    model: KeywordExtractor, docs: list[Document], batch_size: int = 16
) -> list[ExpertTrace]:
    """Deterministic routing trace: argmax-weight expert (ties to the lower
    id) and predicted label for every non-padding token."""
    if not model.cfg.moe_enabled:
        raise UnsupportedModelError("model has no expert-mixture head to trace")
    traces: list[ExpertTrace] = []
    for b0 in range(0, len(docs), batch_size):
        chunk = docs[b0 : b0 + batch_size]
        nonempty = [d for d in chunk if d.text.strip()]
        if not nonempty:
            continue
        for doc_id, tokens, experts, labels, weights in model.trace_batch(nonempty):
            traces.append(ExpertTrace(doc_id, tokens, experts, labels, weights))
    return traces


def dump_traces(traces: list[ExpertTrace], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(
                json.dumps(
                    {
                        "id": t.doc_id,
                        "tokens": t.tokens,
                        "experts": t.experts,
                        "labels": t.labels,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


# ------------------------------------------------------------------ categories


def builtin_categories(
    tokens: list[str], stopwords: frozenset[str] | None = None
) -> dict[str, list[str]]:
    """Token-level values for the Words / Punct / Stop categories."""
    if stopwords is None:
        stopwords = load_stopwords()
    lowered = [t.lower() for t in tokens]
    return {
        "Words": lowered,
        "Punct": ["false" if is_word_token(t) else "true" for t in tokens],
        "Stop": ["true" if t in stopwords else "false" for t in lowered],
    }


def ingest_annotations(path) -> dict[str, dict[str, list[str]]]:
    """Read {"id", "tokens", "pos", "ne"} JSONL; values are kept verbatim."""
    out: dict[str, dict[str, list[str]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            for key in ("id", "tokens", "pos", "ne"):
                if key not in obj:
                    raise DataError(f"{path}:{lineno}: missing field {key!r}")
            n = len(obj["tokens"])
            for key in ("pos", "ne"):
                if len(obj[key]) != n:
                    raise DataError(
                        f"{path}:{lineno}: document {obj['id']!r} has {n} tokens "
                        f"but {len(obj[key])} {key} values"
                    )
            out[str(obj["id"])] = {
                "tokens": [str(t) for t in obj["tokens"]],
                "pos": [str(v) for v in obj["pos"]],
                "ne": [str(v) for v in obj["ne"]],
            }
    return out


def annotation_categories(
    trace: ExpertTrace, annotations: dict[str, dict[str, list[str]]]
) -> dict[str, list[str]]:
    """POS / binNE / NE values aligned to a trace; misalignment is an error
    naming the document and position."""
    ann = annotations.get(trace.doc_id)
    if ann is None:
        raise DataError(f"no annotations for document {trace.doc_id!r}")
    if len(ann["tokens"]) < len(trace.tokens):
        raise DataError(
            f"annotation mismatch in document {trace.doc_id!r}: model saw "
            f"{len(trace.tokens)} tokens, annotations have {len(ann['tokens'])}"
        )
    for i, (a, b) in enumerate(zip(ann["tokens"], trace.tokens)):
        if a.lower() != b.lower():
            raise DataError(
                f"annotation mismatch in document {trace.doc_id!r} at token {i}: "
                f"{a!r} vs {b!r}"
            )
    n = len(trace.tokens)
    ne = ann["ne"][:n]
    return {
        "POS": ann["pos"][:n],
        "binNE": ["false" if v == "O" else "true" for v in ne],
        "NE": ne,
    }


# ------------------------------------------------------------------ statistic


@dataclass
class ContingencyTable:
    counts: np.ndarray
    row_labels: list
    col_labels: list

    @property
    def n(self) -> int:
        return int(self.counts.sum())


def build_contingency(
    trace_values: list[int], category_values: list[str]
) -> ContingencyTable:
    """Count matrix of expert id against category value over the
    concatenated token stream; all-zero margins are dropped."""
    if len(trace_values) != len(category_values):
        raise DataError(
            f"length mismatch: {len(trace_values)} trace values vs "
            f"{len(category_values)} category values"
        )
    if not trace_values:
        raise DataError("empty inputs for contingency table")
    rows = sorted(set(trace_values))
    cols = sorted(set(category_values))
    r_index = {v: i for i, v in enumerate(rows)}
    c_index = {v: i for i, v in enumerate(cols)}
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for e, v in zip(trace_values, category_values):
        counts[r_index[e], c_index[v]] += 1
    return ContingencyTable(counts, rows, cols)


def chi2_statistic(counts: np.ndarray) -> float:
    n = counts.sum()
    expected = np.outer(counts.sum(axis=1), counts.sum(axis=0)) / n
    return float(((counts - expected) ** 2 / expected).sum())


def cramers_v(t: ContingencyTable) -> float:
    """Uncorrected Cramér's V, for reference against the corrected form."""
    counts = _pruned(t)
    r, c = counts.shape
    n = counts.sum()
    phi2 = chi2_statistic(counts) / n
    return float(np.sqrt(phi2 / min(r - 1, c - 1)))


def cramers_v_corrected(t: ContingencyTable) -> float:
    """Bias-corrected Cramér's V:

    phi2~ = max(0, chi2/n - (r-1)(c-1)/(n-1)), with r and c shrunk to
    r - (r-1)^2/(n-1) and c - (c-1)^2/(n-1); V~ = sqrt(phi2~ / min(r~-1, c~-1)),
    clamped into [0, 1].
    """
    counts = _pruned(t)
    r, c = counts.shape
    n = counts.sum()
    if n < 2:
        raise DegenerateTableError(f"need n >= 2 observations, got {n}")
    phi2 = chi2_statistic(counts) / n
    phi2_tilde = max(0.0, phi2 - (r - 1) * (c - 1) / (n - 1))
    r_tilde = r - (r - 1) ** 2 / (n - 1)
    c_tilde = c - (c - 1) ** 2 / (n - 1)
    denom = min(r_tilde - 1, c_tilde - 1)
    if denom <= 0 or phi2_tilde == 0.0:
        return 0.0
    return float(min(1.0, np.sqrt(phi2_tilde / denom)))


def _pruned(t: ContingencyTable) -> np.ndarray:
    counts = np.asarray(t.counts)
    counts = counts[counts.sum(axis=1) > 0][:, counts.sum(axis=0) > 0]
    if counts.shape[0] < 2 or counts.shape[1] < 2:
        raise DegenerateTableError(
            f"table is {counts.shape[0]}x{counts.shape[1]} after pruning; "
            "association undefined"
        )
    return counts


# ------------------------------------------------------------------ report


@dataclass
class SpecializationReport:
    values: dict[str, float | None]
    n_tokens: int
    notices: list[str]

    def to_dict(self) -> dict:
        return {
            "n_tokens": self.n_tokens,
            "cramers_v": {
                k: (None if v is None else v) for k, v in self.values.items()
            },
            "notices": self.notices,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        lines = [f"{'category':<10}  {'V':>7}"]
        for cat in CATEGORY_ORDER:
            if cat not in self.values:
                continue
            v = self.values[cat]
            lines.append(f"{cat:<10}  {'n/a' if v is None else f'{v:7.3f}':>7}")
        return "\n".join(lines)


def specialization_report(
    model: KeywordExtractor,
    docs: list[Document],
    annotations: dict[str, dict[str, list[str]]] | None = None,
    stopwords: frozenset[str] | None = None,
) -> SpecializationReport:
    """One corrected V per category over the concatenation of all documents;
    degenerate categories report n/a, annotation-backed ones are omitted with
    a notice when no annotation file is supplied."""
    traces = trace_experts(model, docs)
    if stopwords is None:
        stopwords = load_stopwords()
    experts: list[int] = []
    per_category: dict[str, list[str]] = {
        c: [] for c in CATEGORY_ORDER if annotations is not None or c not in ANNOTATION_CATEGORIES
    }
    for trace in traces:
        experts.extend(trace.experts)
        built = builtin_categories(trace.tokens, stopwords)
        built["Labels"] = trace.labels
        if annotations is not None:
            built.update(annotation_categories(trace, annotations))
        for cat in per_category:
            per_category[cat].extend(built[cat])

    values: dict[str, float | None] = {}
    notices: list[str] = []
    for cat in CATEGORY_ORDER:
        if cat not in per_category:
            notices.append(f"{cat}: omitted (no annotation file supplied)")
            continue
        try:
            table = build_contingency(experts, per_category[cat])
            values[cat] = cramers_v_corrected(table)
        except DegenerateTableError:
            values[cat] = None
    return SpecializationReport(values, len(experts), notices)
