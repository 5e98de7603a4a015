"""The eight pipeline operators as pure functions over typed values.

Selection operators (find_bridge, find_com_ent) are fully rule-based.
Generation operators (qg_with_ans, qg_with_ent, describe_ent) call the
backend and enforce their postconditions locally, so a misbehaving model
host cannot leak malformed text downstream. Fusion operators
(bridge_blend, comp_blend) assemble the final multi-hop questions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .corpus import LinkedTableContext, Passage, Table, split_sentences
from .errors import RejectedGeneration, UndecidableAnswer
from .nlp_rules import (
    EntityMention,
    EntityType,
    Lexicon,
    default_lexicon,
    extract_entities,
    normalize_surface,
    parse_date,
    question_to_predicate,
)

_MASK = "[MASK]"
MAX_FILL_TOKENS = 2
DEFAULT_ENTITY_RETRIES = 3


# --------------------------------------------------------------------------
# types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TableLocus:
    row: int
    col: int


@dataclass(frozen=True)
class TextLocus:
    passage_id: str
    start: int
    end: int


@dataclass(frozen=True)
class BridgeEntity:
    """An entity surfacing in both input contexts."""

    mention: EntityMention
    locus_a: TableLocus | TextLocus
    locus_b: TextLocus
    surface_a: str
    surface_b: str

    def __post_init__(self):
        if normalize_surface(self.surface_a) != normalize_surface(self.surface_b):
            raise ValueError("bridge loci must agree after normalization")


@dataclass(frozen=True)
class SingleHopQ:
    question: str
    answer: str
    source: str
    anchored_entity: EntityMention | None = None

    def __post_init__(self):
        if not self.question.endswith("?"):
            raise ValueError("question must end with '?'")
        if self.anchored_entity is not None:
            if self.anchored_entity.surface.lower() not in self.question.lower():
                raise ValueError("anchored entity must appear in the question")


class ComparativeProperty(str, Enum):
    BIRTHDATE = "BIRTHDATE"
    LOCATION = "LOCATION"
    NATIONALITY = "NATIONALITY"
    LIVE_PLACE = "LIVE_PLACE"


_PROPERTY_ETYPES = {
    ComparativeProperty.BIRTHDATE: EntityType.DATETIME,
    ComparativeProperty.NATIONALITY: EntityType.NATIONALITY,
    ComparativeProperty.LOCATION: EntityType.LOCATION,
    ComparativeProperty.LIVE_PLACE: EntityType.LOCATION,
}


@dataclass(frozen=True)
class ComparativeEntity:
    mention: EntityMention
    prop: ComparativeProperty

    def __post_init__(self):
        if _PROPERTY_ETYPES[self.prop] is not self.mention.etype:
            raise ValueError(f"{self.prop.value} is inconsistent with {self.mention.etype.value}")


@dataclass(frozen=True)
class ComparisonQA:
    """One instantiated comparison template with its derived gold answer."""

    question: str
    answer: str
    template_index: int
    prop: ComparativeProperty


# --------------------------------------------------------------------------
# selection
# --------------------------------------------------------------------------


def _eligible(normalized: str, lexicon: Lexicon) -> bool:
    if not normalized:
        return False
    if normalized.isdigit() and len(normalized) < 4:
        return False
    return normalized not in lexicon.stopwords


def find_bridge(
    ctx_a: LinkedTableContext | Passage,
    ctx_b: Passage,
    lexicon: Lexicon | None = None,
) -> list[BridgeEntity]:
    """Entities present in both contexts, in locus order of the first."""
    lexicon = lexicon or default_lexicon()
    mentions_b = extract_entities(ctx_b.text, source=ctx_b.id, lexicon=lexicon)
    by_norm_b: dict[str, EntityMention] = {}
    for m in mentions_b:
        by_norm_b.setdefault(m.normalized, m)

    bridges: list[BridgeEntity] = []
    if isinstance(ctx_a, LinkedTableContext):
        for r, row in enumerate(ctx_a.table.rows):
            for c, cell in enumerate(row):
                norm = normalize_surface(cell.raw)
                if not _eligible(norm, lexicon):
                    continue
                hit = by_norm_b.get(norm)
                if hit is None:
                    continue
                bridges.append(
                    BridgeEntity(
                        mention=hit,
                        locus_a=TableLocus(row=r, col=c),
                        locus_b=TextLocus(ctx_b.id, *hit.span),
                        surface_a=cell.raw,
                        surface_b=hit.surface,
                    )
                )
        return bridges

    mentions_a = extract_entities(ctx_a.text, source=ctx_a.id, lexicon=lexicon)
    seen: set[str] = set()
    for m in mentions_a:
        if m.normalized in seen or not _eligible(m.normalized, lexicon):
            continue
        hit = by_norm_b.get(m.normalized)
        if hit is None:
            continue
        seen.add(m.normalized)
        bridges.append(
            BridgeEntity(
                mention=m,
                locus_a=TextLocus(ctx_a.id, *m.span),
                locus_b=TextLocus(ctx_b.id, *hit.span),
                surface_a=m.surface,
                surface_b=hit.surface,
            )
        )
    return bridges


_BIRTH_TRIGGERS = {"born", "birth", "birthdate"}
_LIVE_TRIGGERS = {"lives", "lived", "hometown"}
_TRIGGER_WINDOW = 8  # tokens


def _near_trigger(text: str, span: tuple[int, int], triggers: set[str]) -> bool:
    before = text[: span[0]].split()[-_TRIGGER_WINDOW:]
    after = text[span[1]:].split()[:_TRIGGER_WINDOW]
    window = {t.strip(".,;:!?()[]\"'").lower() for t in before + after}
    return bool(window & triggers)


def find_com_ent(d: Passage, lexicon: Lexicon | None = None) -> list[ComparativeEntity]:
    """Comparative property values mentioned in the passage."""
    out: list[ComparativeEntity] = []
    for m in extract_entities(d.text, source=d.id, lexicon=lexicon or default_lexicon()):
        if m.etype is EntityType.DATETIME:
            if _near_trigger(d.text, m.span, _BIRTH_TRIGGERS):
                out.append(ComparativeEntity(mention=m, prop=ComparativeProperty.BIRTHDATE))
        elif m.etype is EntityType.NATIONALITY:
            out.append(ComparativeEntity(mention=m, prop=ComparativeProperty.NATIONALITY))
        elif m.etype is EntityType.LOCATION:
            prop = (
                ComparativeProperty.LIVE_PLACE
                if _near_trigger(d.text, m.span, _LIVE_TRIGGERS)
                else ComparativeProperty.LOCATION
            )
            out.append(ComparativeEntity(mention=m, prop=prop))
    return out


# --------------------------------------------------------------------------
# generation
# --------------------------------------------------------------------------


def qg_with_ans(d: Passage, answer: EntityMention, backend) -> SingleHopQ:
    start, end = answer.span
    if d.text[start:end] != answer.surface:
        raise ValueError("answer span must lie in the passage text")
    question = backend.gen_question_with_answer(d.text, answer.surface)
    if not question or not question.endswith("?"):
        raise RejectedGeneration(f"backend question malformed: {question!r}")
    if answer.surface.lower() in question.lower():
        raise RejectedGeneration("backend question leaks the answer")
    return SingleHopQ(question=question, answer=answer.surface, source=d.id)


def qg_with_ent(
    d: Passage, e: EntityMention, backend, retries: int = DEFAULT_ENTITY_RETRIES
) -> SingleHopQ:
    if e.surface not in d.text:
        raise ValueError("entity must occur in the passage")
    for _ in range(max(1, retries)):
        question, answer = backend.gen_question_with_entity(d.text, e.surface)
        if question.endswith("?") and e.surface.lower() in question.lower():
            return SingleHopQ(question=question, answer=answer, source=d.id, anchored_entity=e)
    raise RejectedGeneration(f"entity {e.surface!r} absent from question after {retries} tries")


def describe_ent(t: Table, e: BridgeEntity, backend) -> str:
    from .corpus import flatten_table_row

    if not isinstance(e.locus_a, TableLocus):
        raise ValueError("describe_ent needs a bridge anchored in the table")
    row_text = flatten_table_row(t, e.locus_a.row)
    sentence = backend.describe_entity(row_text, e.surface_a)
    if e.surface_a not in sentence:
        raise RejectedGeneration("description does not mention the entity")
    if len(split_sentences(sentence)) > 1:
        raise RejectedGeneration("description must be a single sentence")
    return sentence


def ques_to_sent(q: SingleHopQ) -> str:
    predicate = question_to_predicate(q.question, q.answer)
    if "?" in predicate:
        raise RejectedGeneration("declarative form still contains '?'")
    return predicate


# --------------------------------------------------------------------------
# fusion
# --------------------------------------------------------------------------


def build_masked(question: str, s: str, entity_surface: str) -> str:
    """Replace the first occurrence of the entity with ``the [MASK] that s``."""
    idx = question.find(entity_surface)
    if idx < 0:
        raise ValueError("question must contain the bridge entity")
    s_prime = s
    if s_prime.startswith(entity_surface):
        s_prime = s_prime[len(entity_surface):].lstrip()
    return question[:idx] + f"the {_MASK} that {s_prime}" + question[idx + len(entity_surface):]


def bridge_blend(q: SingleHopQ, s: str, e: BridgeEntity, backend) -> str:
    """Fuse a single-hop question and a description through the bridge."""
    surface = e.surface_b if e.surface_b in q.question else e.surface_a
    if surface not in q.question:
        raise ValueError("question must contain the bridge entity")
    masked = build_masked(q.question, s, surface)
    fill = backend.fill_mask(masked, e.mention.etype)
    if not fill or len(fill.split()) > MAX_FILL_TOKENS:
        raise RejectedGeneration(f"unusable mask fill: {fill!r}")
    blended = masked.replace(_MASK, fill, 1)
    if not blended.endswith("?"):
        raise RejectedGeneration("blended question must end with '?'")
    return blended


def _load_templates() -> list[tuple[ComparativeProperty, str, str]]:
    text = resources.files("mhqg.data").joinpath("comparison_templates.tsv").read_text("utf-8")
    rows = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        prop, template, rule = line.split("\t")
        rows.append((ComparativeProperty(prop), template, rule))
    return rows


_TEMPLATES: list[tuple[ComparativeProperty, str, str]] | None = None


def comparison_templates() -> list[tuple[ComparativeProperty, str, str]]:
    global _TEMPLATES
    if _TEMPLATES is None:
        _TEMPLATES = _load_templates()
    return _TEMPLATES


def _derive_answer(rule: str, e1: str, e2: str, a1: str, a2: str) -> str:
    same = normalize_surface(a1) == normalize_surface(a2)
    if rule == "SAME_YES_NO":
        return "Yes" if same else "No"
    if rule == "BOTH_IN_A1":
        return "Yes" if same else "No"
    if rule == "E1":
        if same:
            raise UndecidableAnswer("both entities share the value; selection is ambiguous")
        return e1
    if rule == "E2":
        if same:
            raise UndecidableAnswer("both entities share the value; selection is ambiguous")
        return e2
    if rule == "EARLIER_DATE":
        d1, d2 = parse_date(a1), parse_date(a2)
        if d1 is None or d2 is None:
            raise UndecidableAnswer(f"unparseable date: {a1!r} / {a2!r}")
        if d1.sort_key() == d2.sort_key():
            raise UndecidableAnswer("dates tie")
        return e1 if d1.sort_key() < d2.sort_key() else e2
    raise ValueError(f"unknown answer rule {rule!r}")


def comp_blend(
    q1: SingleHopQ,
    q2: SingleHopQ,
    prop: ComparativeProperty,
    e1: str,
    e2: str,
    a1: str,
    a2: str,
) -> list[ComparisonQA]:
    """Instantiate every template for the property that has a decidable answer.

    The incoming questions fix the compared property and answers; their
    surface text is not reused. Templates whose answer cannot be derived
    are dropped rather than guessed.
    """
    del q1, q2
    out: list[ComparisonQA] = []
    for index, (tpl_prop, template, rule) in enumerate(comparison_templates(), start=1):
        if tpl_prop is not prop:
            continue
        try:
            answer = _derive_answer(rule, e1, e2, a1, a2)
        except UndecidableAnswer:
            continue
        question = template.format(e1=e1, e2=e2, a1=a1, a2=a2)
        out.append(ComparisonQA(question=question, answer=answer, template_index=index, prop=prop))
    if not out:
        raise UndecidableAnswer(f"no decidable template for {prop.value}")
    return out
