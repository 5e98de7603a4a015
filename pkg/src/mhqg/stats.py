"""Dataset analytics: per-kind counts and wh-type distribution."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .graph_engine import CandidateQA, GraphKind
from .nlp_rules import WhType, classify_wh


@dataclass(frozen=True)
class DatasetStats:
    total: int
    by_kind: dict[GraphKind, int]
    by_wh: dict[WhType, float]
    mean_question_tokens: float

    def to_obj(self) -> dict:
        return {
            "total": self.total,
            "by_kind": {k.value: v for k, v in sorted(self.by_kind.items())},
            "by_wh": {k.value: v for k, v in sorted(self.by_wh.items())},
            "mean_question_tokens": self.mean_question_tokens,
        }


def compute_stats(dataset: list[CandidateQA]) -> DatasetStats:
    kind_counts = Counter(c.kind for c in dataset)
    wh_counts = Counter(classify_wh(c.question) for c in dataset)
    total = len(dataset)
    tokens = sum(len(c.question.split()) for c in dataset)
    return DatasetStats(
        total=total,
        by_kind=dict(kind_counts),
        by_wh={wh: count / total for wh, count in wh_counts.items()} if total else {},
        mean_question_tokens=tokens / total if total else 0.0,
    )


def compare_distributions(a: DatasetStats, b: DatasetStats) -> dict[WhType, float]:
    """Absolute per-type difference of the two wh distributions."""
    keys = set(a.by_wh) | set(b.by_wh)
    return {k: abs(a.by_wh.get(k, 0.0) - b.by_wh.get(k, 0.0)) for k in keys}


def histogram(stats: DatasetStats, width: int = 40) -> str:
    """Aligned plain-text bar chart of the wh distribution."""
    lines = []
    for wh in WhType:
        frac = stats.by_wh.get(wh, 0.0)
        bar = "#" * round(frac * width)
        lines.append(f"{wh.value:<6} {bar:<{width}} {frac:6.1%}")
    return "\n".join(lines)
