"""Multi-hop question-answer synthesis from heterogeneous corpora.

Pipelines are assembled from typed operators executed over reasoning
graphs; generation and scoring steps are delegated to a pluggable
backend (deterministic stub or remote model host).
"""

from .backends import BackendDescriptor, BackendKind, make_backend
from .corpus import (
    LinkedTableContext,
    Passage,
    PassagePair,
    Table,
    load_table_corpus,
    load_text_pair_corpus,
)
from .filtration import run_filter
from .graph_engine import (
    CandidateQA,
    GraphKind,
    ReasoningGraph,
    builtin,
    execute,
    generate_dataset,
    validate,
)
from .stats import compute_stats

__version__ = "0.1.0"

__all__ = [
    "BackendDescriptor",
    "BackendKind",
    "CandidateQA",
    "GraphKind",
    "LinkedTableContext",
    "Passage",
    "PassagePair",
    "ReasoningGraph",
    "Table",
    "builtin",
    "compute_stats",
    "execute",
    "generate_dataset",
    "load_table_corpus",
    "load_text_pair_corpus",
    "make_backend",
    "run_filter",
    "validate",
]
