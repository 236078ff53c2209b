"""Product-level extraction metrics and multi-label category metrics."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import normalize_value

MATCHED, WRONG, EMPTY = "matched", "wrong", "empty-extraction"


def judge(extracted: Iterable[str], gold: Iterable[str]) -> str:
    """A product counts as matched when it hits at least one gold value and adds nothing else."""
    ext = {normalize_value(v) for v in extracted}
    ref = {normalize_value(v) for v in gold}
    if not ext:
        return EMPTY
    if ext & ref and ext <= ref:
        return MATCHED
    return WRONG


@dataclass
class ProductEvalOutcome:
    extracted: list[str]
    gold: list[str]
    category_id: str
    verdict: str = ""

    def __post_init__(self):
        self.extracted = [normalize_value(v) for v in self.extracted]
        self.gold = [normalize_value(v) for v in self.gold]
        self.verdict = judge(self.extracted, self.gold)


@dataclass
class PRF:
    precision: float
    recall: float
    f1: float


def prf(matched: int, extracted: int, gold: int) -> PRF:
    p = matched / extracted if extracted else 0.0
    r = matched / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PRF(p, r, f)


@dataclass
class MetricsReport:
    vocab: int
    coverage: float
    micro: PRF
    macro: PRF
    per_category: dict[str, dict] = field(default_factory=dict)
    products: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        lines = [
            f"products  {self.products}",
            f"Vocab     {self.vocab}",
            f"Cov       {100 * self.coverage:.1f}",
            f"{'':10}{'F1':>7}{'Prec':>7}{'Rec':>7}",
        ]
        for label, s in (("micro", self.micro), ("macro", self.macro)):
            lines.append(f"{label:10}{100 * s.f1:7.1f}{100 * s.precision:7.1f}{100 * s.recall:7.1f}")
        return "\n".join(lines)


def extraction_metrics(outcomes: Sequence[ProductEvalOutcome]) -> MetricsReport:
    """Vocab, coverage and micro/macro precision, recall and F1.

    Precision and recall only look at products that carry gold values.
    Precision divides matched products by those with at least one
    extraction; recall divides by all gold-bearing products. Macro scores
    average per-category scores over categories with a gold-bearing product.
    """
    if not outcomes:
        raise ValueError("no outcomes to evaluate")
    vocab = {v for o in outcomes for v in o.extracted}
    covered = sum(1 for o in outcomes if o.extracted)
    counts = defaultdict(lambda: [0, 0, 0])  # matched, extracted, gold
    for o in outcomes:
        if not o.gold:
            continue
        c = counts[o.category_id]
        c[0] += o.verdict == MATCHED
        c[1] += bool(o.extracted)
        c[2] += 1
    total = np.sum(list(counts.values()), axis=0) if counts else np.zeros(3, dtype=int)
    micro = prf(*[int(x) for x in total])
    per_cat = {}
    for cat in sorted(counts):
        s = prf(*counts[cat])
        per_cat[cat] = {"matched": counts[cat][0], "extracted": counts[cat][1], "gold": counts[cat][2],
                        **asdict(s)}
    if per_cat:
        macro = PRF(*(float(np.mean([v[k] for v in per_cat.values()])) for k in ("precision", "recall", "f1")))
    else:
        macro = PRF(0.0, 0.0, 0.0)
    return MetricsReport(len(vocab), covered / len(outcomes), micro, macro, per_cat, len(outcomes))


def average_precision(scores, labels) -> float:
    """Area under the step-wise precision-recall curve.

    Each distinct score is one threshold; tied scores enter together.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    positives = labels.sum()
    if positives == 0:
        return 0.0
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / positives
    prev = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev) * precision))


@dataclass
class ClassificationReport:
    aupr: float
    precision: float
    recall: float
    f1: float


def classification_metrics(probs, targets, threshold: float = 0.5) -> ClassificationReport:
    """Micro metrics over all (product, node) pairs; ``p >= threshold`` predicts positive.

    ``targets`` is a (products, nodes) label matrix or a list of objects with a
    ``labels`` attribute.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if not isinstance(targets, np.ndarray):
        targets = np.stack([getattr(t, "labels", t) for t in targets])
    labels = targets.astype(np.float64)
    pred = probs >= threshold
    tp = float(np.sum(pred * labels))
    s = prf(tp, float(pred.sum()), float(labels.sum()))
    return ClassificationReport(average_precision(probs, labels), s.precision, s.recall, s.f1)


def write_report(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
