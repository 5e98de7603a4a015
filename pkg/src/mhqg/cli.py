"""Command-line surface: ingest -> generate -> filter -> stats -> export.

Dataset files are JSONL with one candidate per line and ``\\n`` endings;
record ids are content hashes, so identical runs produce byte-identical
files on every platform.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import qdmr
from .backends import BackendDescriptor, BackendKind, make_backend
from .corpus import load_table_corpus, load_text_pair_corpus
from .errors import (
    BackendUnavailable,
    DanglingLink,
    DuplicatePair,
    InsufficientStructure,
    MalformedInput,
)
from .filtration import run_filter
from .graph_engine import (
    CandidateQA,
    GraphKind,
    ProvenanceStep,
    builtin,
    generate_dataset,
)
from .stats import compute_stats, histogram

EXIT_CONFIG = 2
EXIT_CORPUS = 3
EXIT_BACKEND = 4

_CORPUS_ERRORS = (MalformedInput, DanglingLink, DuplicatePair, OSError)

ENV_BACKEND_URL = "MHQG_BACKEND_URL"


@dataclass(frozen=True)
class RunConfig:
    """Validated options of one generation run."""

    corpus_path: str | None
    pairs_path: str | None
    kinds: tuple[GraphKind, ...]
    backend: BackendDescriptor
    out_path: str
    top_n: int = 0
    max_fanout: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.top_n < 0:
            raise ValueError("top_n must be >= 0")
        if self.max_fanout < 1:
            raise ValueError("max_fanout must be >= 1")
        if not self.kinds:
            raise ValueError("at least one graph kind is required")
        if not self.corpus_path and not self.pairs_path:
            raise ValueError("a corpus or a pairs file is required")


def candidate_id(c: CandidateQA) -> str:
    payload = "|".join([c.kind.value, c.question, c.answer, ",".join(c.sources)])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def candidate_to_record(c: CandidateQA) -> dict:
    return {
        "id": candidate_id(c),
        "question": c.question,
        "answer": c.answer,
        "kind": c.kind.value,
        "sources": list(c.sources),
        "perplexity": c.perplexity,
        "provenance": [
            {"node": s.node, "inputs": list(s.inputs), "out": s.output} for s in c.provenance
        ],
    }


def record_to_candidate(record: dict) -> CandidateQA:
    return CandidateQA(
        question=record["question"],
        answer=record["answer"],
        kind=GraphKind(record["kind"]),
        sources=tuple(record["sources"]),
        provenance=tuple(
            ProvenanceStep(node=s["node"], inputs=tuple(s["inputs"]), output=s["out"])
            for s in record.get("provenance", [])
        ),
        perplexity=record.get("perplexity"),
    )


def write_jsonl(path: Path, candidates: list[CandidateQA]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in candidates:
            fh.write(json.dumps(candidate_to_record(c), ensure_ascii=False) + "\n")


def read_jsonl(path: Path) -> list[CandidateQA]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_to_candidate(json.loads(line)))
    return out


def _backend_from_options(backend: str, backend_url: str | None, seed: int):
    if backend == "stub":
        return make_backend(BackendDescriptor(kind=BackendKind.STUB, seed=seed))
    url = backend_url or os.environ.get(ENV_BACKEND_URL)
    if not url:
        raise click.UsageError(
            f"remote backend needs --backend-url or ${ENV_BACKEND_URL}"
        )
    return make_backend(BackendDescriptor(kind=BackendKind.REMOTE, endpoint=url, seed=seed))


def _load_corpora(corpus: str | None, pairs: str | None):
    tables = load_table_corpus(corpus) if corpus else []
    passage_pairs = load_text_pair_corpus(pairs) if pairs else []
    return tables, passage_pairs


backend_options = [
    click.option("--backend", type=click.Choice(["stub", "remote"]), default="stub",
                 show_default=True, help="Generation backend."),
    click.option("--backend-url", default=None, help=f"Model host URL (or ${ENV_BACKEND_URL})."),
    click.option("--seed", type=int, default=0, show_default=True,
                 help="Stub determinism seed."),
]


def add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn
    return wrap


@click.group()
def main():
    """Synthesize multi-hop question-answer training pairs."""


@main.command("ingest-check")
@click.option("--corpus", type=click.Path(), default=None, help="Table-corpus JSON file.")
@click.option("--pairs", type=click.Path(), default=None, help="Passage-pair JSON file.")
def cmd_ingest_check(corpus, pairs):
    """Validate corpus files and report what they contain."""
    if not corpus and not pairs:
        raise click.UsageError("provide --corpus and/or --pairs")
    try:
        tables, passage_pairs = _load_corpora(corpus, pairs)
    except _CORPUS_ERRORS as exc:
        click.echo(f"corpus error: {exc}", err=True)
        sys.exit(EXIT_CORPUS)
    click.echo(f"table contexts: {len(tables)}")
    click.echo(f"passage pairs:  {len(passage_pairs)}")


@main.command("generate")
@click.option("--corpus", type=click.Path(), default=None, help="Table-corpus JSON file.")
@click.option("--pairs", type=click.Path(), default=None, help="Passage-pair JSON file.")
@click.option("--graph", "graphs", multiple=True,
              type=click.Choice([k.value for k in GraphKind]),
              help="Reasoning graph to run (repeatable).")
@click.option("--max-fanout", type=int, default=8, show_default=True,
              help="Branch cap per context and graph.")
@click.option("--out", type=click.Path(), required=True, help="Output JSONL path.")
@add_options(backend_options)
def cmd_generate(corpus, pairs, graphs, max_fanout, out, backend, backend_url, seed):
    """Execute reasoning graphs over the corpus and emit candidates."""
    engine = _backend_from_options(backend, backend_url, seed)
    try:
        config = RunConfig(
            corpus_path=corpus,
            pairs_path=pairs,
            kinds=tuple(GraphKind(g) for g in graphs),
            backend=getattr(engine, "descriptor",
                            BackendDescriptor(kind=BackendKind.STUB, seed=seed)),
            out_path=out,
            max_fanout=max_fanout,
            seed=seed,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    try:
        tables, passage_pairs = _load_corpora(config.corpus_path, config.pairs_path)
    except _CORPUS_ERRORS as exc:
        click.echo(f"corpus error: {exc}", err=True)
        sys.exit(EXIT_CORPUS)
    try:
        candidates = generate_dataset(list(config.kinds), tables, passage_pairs, engine,
                                      max_fanout=config.max_fanout)
    except BackendUnavailable as exc:
        click.echo(f"backend outage: {exc}", err=True)
        sys.exit(EXIT_BACKEND)
    write_jsonl(Path(config.out_path), candidates)
    click.echo(f"wrote {len(candidates)} candidates to {config.out_path}")


@main.command("filter")
@click.option("--in", "input_path", type=click.Path(), required=True, help="Input JSONL.")
@click.option("--out", type=click.Path(), required=True, help="Filtered JSONL path.")
@click.option("--top-n", type=int, required=True, help="How many candidates to keep.")
@add_options(backend_options)
def cmd_filter(input_path, out, top_n, backend, backend_url, seed):
    """Score, deduplicate, and keep the lowest-perplexity candidates."""
    if top_n < 0:
        raise click.UsageError("--top-n must be >= 0")
    try:
        candidates = read_jsonl(Path(input_path))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_CORPUS)
    engine = _backend_from_options(backend, backend_url, seed)
    try:
        selected, report = run_filter(candidates, engine, top_n)
    except BackendUnavailable as exc:
        click.echo(f"backend outage: {exc}", err=True)
        sys.exit(EXIT_BACKEND)
    try:
        write_jsonl(Path(out), selected)
        report_path = Path(out).with_suffix(Path(out).suffix + ".report.json")
        report_path.write_text(json.dumps(report.to_obj(), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        click.echo(f"output error: {exc}", err=True)
        sys.exit(EXIT_CORPUS)
    click.echo(f"kept {report.output_count} of {report.input_count}; report at {report_path}")


@main.command("stats")
@click.option("--in", "input_path", type=click.Path(), required=True, help="Dataset JSONL.")
@click.option("--out", type=click.Path(), default=None, help="Where to write stats JSON.")
def cmd_stats(input_path, out):
    """Summarize a dataset: counts per graph kind and wh-type distribution."""
    try:
        candidates = read_jsonl(Path(input_path))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(EXIT_CORPUS)
    result = compute_stats(candidates)
    payload = json.dumps(result.to_obj(), indent=2) + "\n"
    if out:
        try:
            Path(out).write_text(payload, encoding="utf-8")
        except OSError as exc:
            click.echo(f"output error: {exc}", err=True)
            sys.exit(EXIT_CORPUS)
    else:
        click.echo(payload, nl=False)
    click.echo(histogram(result))


@main.command("qdmr-baseline")
@click.option("--corpus", type=click.Path(), required=True, help="Table-corpus JSON file.")
@click.option("--out", type=click.Path(), required=True, help="Output JSONL path.")
@add_options(backend_options)
def cmd_qdmr_baseline(corpus, out, backend, backend_url, seed):
    """Generate step-decomposition programs and realize them into questions."""
    try:
        tables = load_table_corpus(corpus)
    except _CORPUS_ERRORS as exc:
        click.echo(f"corpus error: {exc}", err=True)
        sys.exit(EXIT_CORPUS)
    engine = None
    if backend == "remote":
        engine = _backend_from_options(backend, backend_url, seed)
    rows = []
    for ctx in tables:
        for kind in (GraphKind.TABLE_TO_TEXT, GraphKind.TEXT_TO_TABLE):
            try:
                programs = qdmr.make_qdmr(ctx, kind, seed=seed)
            except InsufficientStructure:
                continue
            for program in programs:
                try:
                    question = qdmr.realize(program, engine)
                except BackendUnavailable as exc:
                    click.echo(f"backend outage: {exc}", err=True)
                    sys.exit(EXIT_BACKEND)
                rows.append(
                    {"steps": list(program.steps), "question": question, "kind": kind.value}
                )
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    except OSError as exc:
        click.echo(f"output error: {exc}", err=True)
        sys.exit(EXIT_CORPUS)
    click.echo(f"wrote {len(rows)} baseline questions to {out}")


@main.command("export-graphs")
@click.option("--dir", "directory", type=click.Path(), required=True,
              help="Directory receiving one JSON file per builtin graph.")
def cmd_export_graphs(directory):
    """Serialize the six builtin reasoning graphs for inspection."""
    target = Path(directory)
    try:
        target.mkdir(parents=True, exist_ok=True)
        for kind in GraphKind:
            path = target / f"{kind.value}.json"
            path.write_text(
                json.dumps(builtin(kind).to_obj(), indent=2) + "\n", encoding="utf-8"
            )
    except OSError as exc:
        click.echo(f"output error: {exc}", err=True)
        sys.exit(EXIT_CORPUS)
    click.echo(f"exported {len(GraphKind)} graphs to {directory}")


if __name__ == "__main__":
    main()
