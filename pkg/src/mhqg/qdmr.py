"""Decomposition-based question baseline.

Questions are first written as an ordered list of ``Return ...`` steps
(a decomposition program) instantiated from table structure, then
realized into natural language either by composition rules (offline) or
by a remote translation endpoint. The rule realizer copies headers
literally, which is exactly the weakness this baseline is meant to
exhibit next to the fused pipeline.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from .corpus import LinkedTableContext
from .errors import InsufficientStructure
from .graph_engine import GraphKind
from .nlp_rules import Lexicon, default_lexicon, extract_entities, EntityType

_REF = re.compile(r"#(\d+)")

_ATTRIBUTE_TRIGGERS = (
    ({"born", "birth", "birthdate"}, "birthdate"),
    ({"lives", "lived", "hometown"}, "hometown"),
)


@dataclass(frozen=True)
class QdmrProgram:
    steps: tuple[str, ...]
    kind: GraphKind

    def __post_init__(self):
        if self.kind not in (GraphKind.TABLE_TO_TEXT, GraphKind.TEXT_TO_TABLE):
            raise ValueError("programs cover the two bridge-over-table shapes only")
        for i, step in enumerate(self.steps, start=1):
            if not step.startswith("Return"):
                raise ValueError(f"step {i} must start with 'Return'")
            for ref in _REF.findall(step):
                if i == 1:
                    raise ValueError("step 1 may not reference other steps")
                if not 1 <= int(ref) < i:
                    raise ValueError(f"step {i} references #{ref}, which is not backward")


def _attributes_in(text: str, lexicon: Lexicon) -> list[str]:
    found: list[str] = []
    tokens = {t.strip(".,;:!?").lower() for t in text.split()}
    for triggers, attribute in _ATTRIBUTE_TRIGGERS:
        if tokens & triggers and attribute not in found:
            found.append(attribute)
    for m in extract_entities(text, lexicon=lexicon):
        if m.etype is EntityType.NATIONALITY and "nationality" not in found:
            found.append("nationality")
    return found


def _date_predicate(text: str, lexicon: Lexicon) -> str | None:
    """``born <date>`` phrase for the entity described by the passage."""
    for m in extract_entities(text, lexicon=lexicon):
        if m.etype is not EntityType.DATETIME:
            continue
        before = text[: m.span[0]].split()
        window = {t.strip(".,;:!?").lower() for t in before[-8:]}
        if window & {"born", "birth"}:
            return f"born {m.surface.replace(',', '')}"
    return None


def make_qdmr(ctx: LinkedTableContext, kind: GraphKind, seed: int = 0) -> list[QdmrProgram]:
    """Instantiate the four-step template for every linked cell of the table.

    Slot choices that are genuinely free (second column, text attribute)
    are drawn with a seeded RNG so reruns reproduce the same programs.
    """
    table = ctx.table
    if len(table.headers) < 2 or not table.rows:
        raise InsufficientStructure("need at least two columns and one row")
    rng = random.Random(seed)
    lexicon = default_lexicon()
    programs: list[QdmrProgram] = []
    for r, row in enumerate(table.rows):
        for c, cell in enumerate(row):
            if not cell.linked_passage_ids or not cell.raw:
                continue
            column_a = table.headers[c]
            other_cols = [
                i for i in range(len(table.headers)) if i != c and row[i].raw
            ]
            if not other_cols:
                continue
            col_b_idx = rng.choice(other_cols)
            column_b = table.headers[col_b_idx]
            row_value = row[col_b_idx].raw
            passage = ctx.passages[cell.linked_passage_ids[0]]
            if kind is GraphKind.TABLE_TO_TEXT:
                attributes = _attributes_in(passage.text, lexicon)
                if not attributes:
                    continue
                attribute = rng.choice(attributes)
                steps = (
                    f"Return {column_a}",
                    f"Return #1 in {column_b} {row_value}",
                    f"Return #2 in {table.title}",
                    f"Return what is the {attribute} of #3",
                )
            else:
                predicate = _date_predicate(passage.text, lexicon)
                if predicate is None:
                    continue
                steps = (
                    f"Return {column_a}",
                    f"Return #1 in {table.title}",
                    f"Return #2 that {predicate}",
                    f"Return what is the {column_b} of #3",
                )
            programs.append(QdmrProgram(steps=steps, kind=kind))
    if not programs:
        raise InsufficientStructure("no linked cell yields a complete program")
    return programs


def realize(p: QdmrProgram, backend=None) -> str:
    """Compose the program into a question.

    With a backend the joined steps go to its translation endpoint;
    otherwise composition rules build the question right-to-left from
    the final step's frame.
    """
    if not p.steps:
        raise ValueError("program must have steps")
    if backend is not None and hasattr(backend, "qdmr_to_question"):
        return backend.qdmr_to_question(list(p.steps))
    return _realize_rules(p)


def _realize_rules(p: QdmrProgram) -> str:
    head = re.fullmatch(r"Return (.+)", p.steps[0])
    frame = re.fullmatch(r"Return what is the (.+) of #\d+", p.steps[3])
    if not head or not frame:
        raise ValueError("program does not match the known templates")
    column_a = head.group(1)
    if p.kind is GraphKind.TABLE_TO_TEXT:
        restrictor = re.fullmatch(r"Return #1 in (\S+) (.+)", p.steps[1])
        scope = re.fullmatch(r"Return #2 in (.+)", p.steps[2])
        if not restrictor or not scope:
            raise ValueError("program does not match the known templates")
        column_b, value = restrictor.group(1), restrictor.group(2)
        return (
            f"What is the {frame.group(1)} of the {column_a} "
            f"that {column_b} is {value} in {scope.group(1)}?"
        )
    scope = re.fullmatch(r"Return #1 in (.+)", p.steps[1])
    predicate = re.fullmatch(r"Return #2 that (.+)", p.steps[2])
    if not scope or not predicate:
        raise ValueError("program does not match the known templates")
    return (
        f"What is the {frame.group(1)} of the {column_a} "
        f"in {scope.group(1)} that {predicate.group(1)}?"
    )
