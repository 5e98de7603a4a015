"""Perplexity scoring, deduplication, and top-N selection.

The filter is ``select_top_n . dedup . score_all``: dedup runs before
selection so one template cannot flood the final set, and the selection
tie-break is total so golden files stay stable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from statistics import median

from .errors import UnscoredCandidate
from .graph_engine import CandidateQA
from .nlp_rules import normalize_surface

MAX_REPORTED_DROPS = 20


@dataclass(frozen=True)
class FiltrationReport:
    input_count: int
    deduped_count: int
    output_count: int
    score_min: float | None
    score_median: float | None
    score_max: float | None
    dropped_examples: tuple[tuple[str, float], ...]

    def to_obj(self) -> dict:
        return {
            "input_count": self.input_count,
            "deduped_count": self.deduped_count,
            "output_count": self.output_count,
            "score_min": self.score_min,
            "score_median": self.score_median,
            "score_max": self.score_max,
            "dropped_examples": [list(d) for d in self.dropped_examples],
        }


def score_all(cands: list[CandidateQA], backend) -> list[CandidateQA]:
    """Attach a perplexity to every candidate, preserving order."""
    return [replace(c, perplexity=backend.perplexity(c.question)) for c in cands]


def dedup(cands: list[CandidateQA]) -> list[CandidateQA]:
    """Keep the first candidate per (normalized question, normalized answer)."""
    seen: set[tuple[str, str]] = set()
    out = []
    for c in cands:
        key = (normalize_surface(c.question), normalize_surface(c.answer))
        if key in seen:
            continue
        seen.add(key)
        out.append(c)
    return out


def _sort_key(c: CandidateQA):
    return (c.perplexity, normalize_surface(c.question), ",".join(c.sources))


def select_top_n(cands: list[CandidateQA], n: int) -> tuple[list[CandidateQA], FiltrationReport]:
    """Lowest-perplexity ``n`` candidates with a deterministic tie-break."""
    if n < 0:
        raise ValueError("n must be >= 0")
    for c in cands:
        if c.perplexity is None:
            raise UnscoredCandidate(f"candidate lacks a score: {c.question!r}")
    ranked = sorted(cands, key=_sort_key)
    selected = ranked[:n]
    excluded = ranked[n:]
    scores = [c.perplexity for c in cands]
    report = FiltrationReport(
        input_count=len(cands),
        deduped_count=len(cands),
        output_count=len(selected),
        score_min=min(scores) if scores else None,
        score_median=median(scores) if scores else None,
        score_max=max(scores) if scores else None,
        dropped_examples=tuple(
            (c.question, c.perplexity) for c in excluded[:MAX_REPORTED_DROPS]
        ),
    )
    return selected, report


def run_filter(
    cands: list[CandidateQA], backend, top_n: int
) -> tuple[list[CandidateQA], FiltrationReport]:
    """The full filtration pipeline over raw candidates."""
    scored = score_all(cands, backend)
    unique = dedup(scored)
    selected, report = select_top_n(unique, top_n)
    return selected, replace(report, input_count=len(cands), deduped_count=len(unique))
