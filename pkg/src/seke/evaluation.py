"""Keyphrase evaluation: lowercase both sides, Porter-stem every word, then
exact set matching at top-k, macro-averaged over documents.

Precision uses the number of predictions actually taken from the top-k (not
k itself), and documents with an empty gold set are excluded upstream of the
macro average.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .porter import porter_stem


def match_key(phrase: str) -> str:
    """Canonical comparison form: NFC, lowercase, stem each word."""
    text = unicodedata.normalize("NFC", phrase).lower()
    return " ".join(porter_stem(w) for w in text.split())


def _texts(pred) -> list[str]:
    phrases = getattr(pred, "phrases", pred)
    return [getattr(p, "text", p) for p in phrases]


def f1_at_k(pred, gold: list[str], k: int) -> tuple[float, float, float]:
    """Precision / recall / F1 of the top-k ranked predictions against the
    gold set, both sides reduced to match keys."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    texts = _texts(pred)
    taken = texts[: min(k, len(texts))]
    pred_keys = {match_key(t) for t in taken}
    gold_keys = {match_key(g) for g in gold}
    matched = len(pred_keys & gold_keys)
    precision = matched / len(taken) if taken else 0.0
    recall = matched / len(gold_keys) if gold_keys else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


@dataclass
class EvalReport:
    ks: list[int]
    macro: dict[int, dict[str, float]]
    per_doc: dict[str, dict[int, dict[str, float]]] = field(default_factory=dict)
    n_documents: int = 0

    def to_dict(self) -> dict:
        return {
            "n_documents": self.n_documents,
            "metrics": {
                str(k): {m: self.macro[k][m] for m in ("precision", "recall", "f1")}
                for k in self.ks
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        lines = [f"{'k':>4}  {'precision':>9}  {'recall':>9}  {'f1':>9}"]
        for k in self.ks:
            row = self.macro[k]
            lines.append(
                f"{k:>4}  {row['precision']:>9.4f}  {row['recall']:>9.4f}  "
                f"{row['f1']:>9.4f}"
            )
        return "\n".join(lines)


def evaluate_corpus(
    preds_by_id: dict[str, object],
    golds_by_id: dict[str, list[str]],
    ks: list[int],
) -> EvalReport:
    """Macro-average per-document metrics over documents with nonempty gold;
    a document missing from the predictions scores zero."""
    scored_ids = [d for d, gold in golds_by_id.items() if gold]
    unknown = set(preds_by_id) - set(golds_by_id)
    if unknown:
        raise DataError(f"predictions for unknown document ids: {sorted(unknown)[:5]}")
    report = EvalReport(ks=list(ks), macro={}, n_documents=len(scored_ids))
    totals = {k: np.zeros(3) for k in ks}
    for doc_id in scored_ids:
        pred = preds_by_id.get(doc_id, [])
        report.per_doc[doc_id] = {}
        for k in ks:
            p, r, f1 = f1_at_k(pred, golds_by_id[doc_id], k)
            totals[k] += (p, r, f1)
            report.per_doc[doc_id][k] = {"precision": p, "recall": r, "f1": f1}
    n = max(len(scored_ids), 1)
    for k in ks:
        p, r, f1 = totals[k] / n
        report.macro[k] = {"precision": p, "recall": r, "f1": f1}
    return report


def aggregate_runs(reports: list[EvalReport]) -> dict[int, dict[str, tuple[float, float]]]:
    """Mean and sample standard deviation (ddof=1; zero for a single run)
    of each macro metric across runs."""
    if not reports:
        raise DataError("aggregate_runs needs at least one report")
    ks = reports[0].ks
    out: dict[int, dict[str, tuple[float, float]]] = {}
    for k in ks:
        out[k] = {}
        for metric in ("precision", "recall", "f1"):
            values = np.asarray([r.macro[k][metric] for r in reports])
            std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
            out[k][metric] = (float(values.mean()), std)
    return out
