"""Typed reasoning graphs: representation, validation, and execution.

A reasoning graph is a DAG of operator nodes. Ports are typed by value
kind; a port is either fed by exactly one edge or bound to an input
symbol (``$table``, ``$text_a``, ...). Selection operators emit sets;
an edge from a set output into a scalar ENTITY port is a fan-out edge,
and execution branches once per element, capped by ``max_fanout``.

Graphs are plain data and serialize to JSON, so alternate wirings load
without code changes. The six builtin graphs cover single-hop table and
text questions, the three bridge-type multi-hop shapes, and the
comparison shape.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from enum import Enum

from .corpus import LinkedTableContext, Passage, PassagePair, flatten_table_row
from .errors import (
    InvalidGraph,
    ModalityMismatch,
    RejectedGeneration,
    UndecidableAnswer,
    UnsupportedQuestionForm,
)
from .nlp_rules import EntityMention, EntityType, default_lexicon, normalize_surface
from . import operators as ops
from .operators import (
    BridgeEntity,
    ComparativeEntity,
    ComparativeProperty,
    SingleHopQ,
    TableLocus,
    TextLocus,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_FANOUT = 8


class GraphKind(str, Enum):
    TABLE_ONLY = "table_only"
    TEXT_ONLY = "text_only"
    TABLE_TO_TEXT = "table_to_text"
    TEXT_TO_TABLE = "text_to_table"
    TEXT_TO_TEXT = "text_to_text"
    COMPARISON = "comparison"


class ValueKind(str, Enum):
    TABLE = "TABLE"
    TEXT = "TEXT"
    ENTITY = "ENTITY"
    ENTITY_SET = "ENTITY_SET"
    QUESTION = "QUESTION"
    SENTENCE = "SENTENCE"
    QA_PAIR = "QA_PAIR"


# input symbols and the kind of value they inject
_SYMBOL_KINDS = {
    "$table": ValueKind.TABLE,
    "$linked_passage": ValueKind.TEXT,
    "$text_iter": ValueKind.TEXT,
    "$text_a": ValueKind.TEXT,
    "$text_b": ValueKind.TEXT,
    "$bridge_row_text": ValueKind.TEXT,
    "$selected_row_text": ValueKind.TEXT,
}


@dataclass(frozen=True)
class OpSpec:
    ports: tuple[tuple[str, ValueKind], ...]
    output: ValueKind


OP_REGISTRY: dict[str, OpSpec] = {
    "find_bridge": OpSpec(
        ports=(("context", ValueKind.TABLE), ("text", ValueKind.TEXT)),
        output=ValueKind.ENTITY_SET,
    ),
    "find_bridge_text": OpSpec(
        ports=(("a", ValueKind.TEXT), ("b", ValueKind.TEXT)),
        output=ValueKind.ENTITY_SET,
    ),
    "find_com_ent": OpSpec(ports=(("text", ValueKind.TEXT),), output=ValueKind.ENTITY_SET),
    "match_props": OpSpec(
        ports=(("a", ValueKind.ENTITY_SET), ("b", ValueKind.ENTITY_SET)),
        output=ValueKind.ENTITY_SET,
    ),
    "select_answer_cell": OpSpec(ports=(("table", ValueKind.TABLE),), output=ValueKind.ENTITY_SET),
    "select_answer_span": OpSpec(ports=(("text", ValueKind.TEXT),), output=ValueKind.ENTITY_SET),
    "qg_with_ans": OpSpec(
        ports=(("text", ValueKind.TEXT), ("answer", ValueKind.ENTITY)),
        output=ValueKind.QUESTION,
    ),
    "qg_with_ent": OpSpec(
        ports=(("text", ValueKind.TEXT), ("entity", ValueKind.ENTITY)),
        output=ValueKind.QUESTION,
    ),
    "describe_ent": OpSpec(
        ports=(("table", ValueKind.TABLE), ("entity", ValueKind.ENTITY)),
        output=ValueKind.SENTENCE,
    ),
    "ques_to_sent": OpSpec(ports=(("question", ValueKind.QUESTION),), output=ValueKind.SENTENCE),
    "bridge_blend": OpSpec(
        ports=(
            ("question", ValueKind.QUESTION),
            ("sentence", ValueKind.SENTENCE),
            ("entity", ValueKind.ENTITY),
        ),
        output=ValueKind.QA_PAIR,
    ),
    "comp_blend": OpSpec(
        ports=(
            ("q1", ValueKind.QUESTION),
            ("q2", ValueKind.QUESTION),
            ("match", ValueKind.ENTITY),
        ),
        output=ValueKind.QA_PAIR,
    ),
}


@dataclass(frozen=True)
class OperatorNode:
    id: str
    op: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Edge:
    producer: str
    consumer: str
    port: int


@dataclass(frozen=True)
class ReasoningGraph:
    name: GraphKind
    nodes: tuple[OperatorNode, ...]
    edges: tuple[Edge, ...]

    def node(self, node_id: str) -> OperatorNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def to_obj(self) -> dict:
        return {
            "name": self.name.value,
            "nodes": [{"id": n.id, "op": n.op, "params": dict(n.params)} for n in self.nodes],
            "edges": [{"from": e.producer, "to": e.consumer, "port": e.port} for e in self.edges],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "ReasoningGraph":
        return cls(
            name=GraphKind(obj["name"]),
            nodes=tuple(
                OperatorNode(id=n["id"], op=n["op"], params=dict(n.get("params", {})))
                for n in obj["nodes"]
            ),
            edges=tuple(
                Edge(producer=e["from"], consumer=e["to"], port=e["port"]) for e in obj["edges"]
            ),
        )


@dataclass(frozen=True)
class ProvenanceStep:
    node: str
    inputs: tuple[str, ...]
    output: str


@dataclass(frozen=True)
class CandidateQA:
    question: str
    answer: str
    kind: GraphKind
    sources: tuple[str, ...]
    provenance: tuple[ProvenanceStep, ...]
    perplexity: float | None = None

    def __post_init__(self):
        if not self.question or not self.question.endswith("?"):
            raise ValueError("candidate question must be non-empty and end with '?'")
        if "[MASK]" in self.question:
            raise ValueError("candidate question still contains a mask token")
        if not self.answer:
            raise ValueError("candidate answer must be non-empty")


def digest(value) -> str:
    """Short stable digest of any runtime value, for provenance records."""
    return hashlib.sha256(_canonical(value).encode("utf-8")).hexdigest()[:12]


def _canonical(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, Passage):
        return f"passage:{value.id}:{value.text}"
    if isinstance(value, LinkedTableContext):
        return f"table:{value.table.id}"
    if isinstance(value, EntityMention):
        return f"mention:{value.surface}:{value.span}:{value.source}"
    if isinstance(value, BridgeEntity):
        return f"bridge:{value.surface_a}:{value.locus_a}:{value.locus_b}"
    if isinstance(value, SingleHopQ):
        return f"q:{value.question}|a:{value.answer}|src:{value.source}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_canonical(v) for v in value) + "]"
    return repr(value)


# --------------------------------------------------------------------------
# builtin graphs
# --------------------------------------------------------------------------


def builtin(kind: GraphKind) -> ReasoningGraph:
    """The fixed wiring for each of the six question shapes."""
    if kind is GraphKind.TABLE_TO_TEXT:
        return ReasoningGraph(
            name=kind,
            nodes=(
                OperatorNode("bridges", "find_bridge",
                             {"context": "$table", "text": "$linked_passage"}),
                OperatorNode("text_q", "qg_with_ent", {"text": "$linked_passage"}),
                OperatorNode("table_sent", "describe_ent", {"table": "$table"}),
                OperatorNode("blend", "bridge_blend", {}),
            ),
            edges=(
                Edge("bridges", "text_q", 1),
                Edge("bridges", "table_sent", 1),
                Edge("text_q", "blend", 0),
                Edge("table_sent", "blend", 1),
                Edge("bridges", "blend", 2),
            ),
        )
    if kind is GraphKind.TEXT_TO_TABLE:
        return ReasoningGraph(
            name=kind,
            nodes=(
                OperatorNode("bridges", "find_bridge",
                             {"context": "$table", "text": "$linked_passage"}),
                OperatorNode("table_q", "qg_with_ent", {"text": "$bridge_row_text"}),
                OperatorNode("text_q", "qg_with_ans", {"text": "$linked_passage"}),
                OperatorNode("decl", "ques_to_sent", {}),
                OperatorNode("blend", "bridge_blend", {"answer_in_bridge_row": True}),
            ),
            edges=(
                Edge("bridges", "table_q", 1),
                Edge("bridges", "text_q", 1),
                Edge("text_q", "decl", 0),
                Edge("table_q", "blend", 0),
                Edge("decl", "blend", 1),
                Edge("bridges", "blend", 2),
            ),
        )
    if kind is GraphKind.TEXT_TO_TEXT:
        return ReasoningGraph(
            name=kind,
            nodes=(
                OperatorNode("bridges", "find_bridge_text", {"a": "$text_a", "b": "$text_b"}),
                OperatorNode("anchor_q", "qg_with_ent", {"text": "$text_a"}),
                OperatorNode("support_q", "qg_with_ans", {"text": "$text_b"}),
                OperatorNode("decl", "ques_to_sent", {}),
                OperatorNode("blend", "bridge_blend", {}),
            ),
            edges=(
                Edge("bridges", "anchor_q", 1),
                Edge("bridges", "support_q", 1),
                Edge("support_q", "decl", 0),
                Edge("anchor_q", "blend", 0),
                Edge("decl", "blend", 1),
                Edge("bridges", "blend", 2),
            ),
        )
    if kind is GraphKind.COMPARISON:
        return ReasoningGraph(
            name=kind,
            nodes=(
                OperatorNode("props_a", "find_com_ent", {"text": "$text_a"}),
                OperatorNode("props_b", "find_com_ent", {"text": "$text_b"}),
                OperatorNode("match", "match_props", {}),
                OperatorNode("q1", "qg_with_ans", {"text": "$text_a", "member": "first"}),
                OperatorNode("q2", "qg_with_ans", {"text": "$text_b", "member": "second"}),
                OperatorNode("blend", "comp_blend", {}),
            ),
            edges=(
                Edge("props_a", "match", 0),
                Edge("props_b", "match", 1),
                Edge("match", "q1", 1),
                Edge("match", "q2", 1),
                Edge("q1", "blend", 0),
                Edge("q2", "blend", 1),
                Edge("match", "blend", 2),
            ),
        )
    if kind is GraphKind.TABLE_ONLY:
        return ReasoningGraph(
            name=kind,
            nodes=(
                OperatorNode("cells", "select_answer_cell", {"table": "$table"}),
                OperatorNode("q", "qg_with_ans", {"text": "$selected_row_text"}),
            ),
            edges=(Edge("cells", "q", 1),),
        )
    if kind is GraphKind.TEXT_ONLY:
        return ReasoningGraph(
            name=kind,
            nodes=(
                OperatorNode("spans", "select_answer_span", {"text": "$text_iter"}),
                OperatorNode("q", "qg_with_ans", {"text": "$text_iter"}),
            ),
            edges=(Edge("spans", "q", 1),),
        )
    raise ValueError(f"unknown graph kind {kind}")


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def validate(g: ReasoningGraph) -> list[str]:
    """Every violation in the graph; an empty list means valid."""
    violations: list[str] = []
    ids = [n.id for n in g.nodes]
    if len(set(ids)) != len(ids):
        violations.append("duplicate node ids")
    known = set(ids)

    for n in g.nodes:
        if n.op not in OP_REGISTRY:
            violations.append(f"unknown operator {n.op!r} at node {n.id}")

    for e in g.edges:
        if e.producer not in known:
            violations.append(f"edge from unknown node {e.producer!r}")
        if e.consumer not in known:
            violations.append(f"edge to unknown node {e.consumer!r}")

    fed: dict[tuple[str, int], int] = {}
    for e in g.edges:
        fed[(e.consumer, e.port)] = fed.get((e.consumer, e.port), 0) + 1

    for n in g.nodes:
        spec = OP_REGISTRY.get(n.op)
        if spec is None:
            continue
        for i, (pname, pkind) in enumerate(spec.ports):
            bound = n.params.get(pname)
            n_edges = fed.get((n.id, i), 0)
            if isinstance(bound, str) and bound.startswith("$"):
                if bound not in _SYMBOL_KINDS:
                    violations.append(f"unknown input symbol {bound!r} at {n.id}.{pname}")
                elif _SYMBOL_KINDS[bound] is not pkind:
                    violations.append(
                        f"symbol {bound} is {_SYMBOL_KINDS[bound].value}, "
                        f"port {n.id}.{pname} expects {pkind.value}"
                    )
                if n_edges:
                    violations.append(f"port {n.id}.{pname} is bound and edge-fed")
            else:
                if n_edges == 0:
                    violations.append(f"dangling port: {n.id}.{pname} receives no edge")
                elif n_edges > 1:
                    violations.append(f"port {n.id}.{pname} receives {n_edges} edges")

    for e in g.edges:
        if e.producer not in known or e.consumer not in known:
            continue
        prod_spec = OP_REGISTRY.get(g.node(e.producer).op)
        cons_spec = OP_REGISTRY.get(g.node(e.consumer).op)
        if prod_spec is None or cons_spec is None:
            continue
        if not 0 <= e.port < len(cons_spec.ports):
            violations.append(f"edge {e.producer}->{e.consumer} targets missing port {e.port}")
            continue
        pkind = cons_spec.ports[e.port][1]
        okind = prod_spec.output
        if okind is pkind:
            continue
        if okind is ValueKind.ENTITY_SET and pkind is ValueKind.ENTITY:
            continue  # fan-out edge
        violations.append(
            f"kind mismatch: {e.producer} emits {okind.value}, "
            f"{e.consumer} port {e.port} expects {pkind.value}"
        )

    cycle = _find_cycle(g)
    if cycle:
        violations.append("cycle: " + ",".join(cycle))
    return violations


def _topo_order(g: ReasoningGraph) -> list[str]:
    indeg = {n.id: 0 for n in g.nodes}
    for e in g.edges:
        if e.consumer in indeg and e.producer in indeg:
            indeg[e.consumer] += 1
    ready = sorted([nid for nid, d in indeg.items() if d == 0])
    order = []
    while ready:
        nid = ready.pop(0)
        order.append(nid)
        for e in g.edges:
            if e.producer == nid and e.consumer in indeg:
                indeg[e.consumer] -= 1
                if indeg[e.consumer] == 0:
                    ready.append(e.consumer)
        ready.sort()
    return order


def _find_cycle(g: ReasoningGraph) -> list[str]:
    """Nodes of one cycle, if any, discovered by depth-first search."""
    known = {n.id for n in g.nodes}
    children: dict[str, list[str]] = {nid: [] for nid in known}
    for e in g.edges:
        if e.producer in known and e.consumer in known:
            children[e.producer].append(e.consumer)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {nid: WHITE for nid in known}
    path: list[str] = []

    def visit(nid: str) -> list[str] | None:
        color[nid] = GRAY
        path.append(nid)
        for child in children[nid]:
            if color[child] == GRAY:
                return path[path.index(child):]
            if color[child] == WHITE:
                found = visit(child)
                if found:
                    return found
        path.pop()
        color[nid] = BLACK
        return None

    for nid in sorted(known):
        if color[nid] == WHITE:
            cycle = visit(nid)
            if cycle:
                return sorted(cycle)
    return []


# --------------------------------------------------------------------------
# execution
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PropertyMatch:
    prop: ComparativeProperty
    first: ComparativeEntity
    second: ComparativeEntity


@dataclass(frozen=True)
class CellChoice:
    row: int
    col: int
    surface: str


@dataclass
class ExecutionStats:
    branches: int = 0
    dropped: int = 0
    emitted: int = 0


_DROPPABLE = (RejectedGeneration, UnsupportedQuestionForm, UndecidableAnswer)


class _Frame:
    """One assignment of input symbols for a single graph run."""

    def __init__(self, ctx, passage: Passage | None):
        self.ctx = ctx
        self.passage = passage

    def resolve(self, symbol: str, branch: dict):
        if symbol == "$table":
            return self.ctx
        if symbol in ("$linked_passage", "$text_iter") and self.passage is not None:
            return self.passage
        if symbol == "$text_a":
            return self.ctx.first
        if symbol == "$text_b":
            return self.ctx.second
        if symbol == "$bridge_row_text":
            bridge = _selected_of_type(branch, BridgeEntity)
            if bridge is None or not isinstance(bridge.locus_a, TableLocus):
                raise RejectedGeneration("no table-anchored bridge selected for row text")
            return _row_passage(self.ctx, bridge.locus_a.row)
        if symbol == "$selected_row_text":
            choice = _selected_of_type(branch, CellChoice)
            if choice is None:
                raise RejectedGeneration("no cell selected for row text")
            return _row_passage(self.ctx, choice.row)
        raise ModalityMismatch(f"symbol {symbol} unavailable for this input")

    def source_ids(self, symbols: set[str]) -> tuple[str, ...]:
        out: list[str] = []
        if isinstance(self.ctx, LinkedTableContext):
            out.append(self.ctx.table.id)
            if self.passage is not None and (
                "$linked_passage" in symbols or "$text_iter" in symbols
            ):
                out.append(self.passage.id)
        elif isinstance(self.ctx, PassagePair):
            if "$text_a" in symbols or "$text_b" in symbols:
                out += [self.ctx.first.id, self.ctx.second.id]
            elif self.passage is not None:
                out.append(self.passage.id)
        return tuple(dict.fromkeys(out))


def _row_passage(ctx: LinkedTableContext, row: int) -> Passage:
    text = flatten_table_row(ctx.table, row)
    return Passage.build(id=f"{ctx.table.id}#row{row}", title=ctx.table.title, text=text)


def _selected_of_type(branch: dict, cls):
    for value in branch.values():
        if isinstance(value, cls):
            return value
    return None


def _symbols_used(g: ReasoningGraph) -> set[str]:
    used = set()
    for n in g.nodes:
        for v in n.params.values():
            if isinstance(v, str) and v.startswith("$"):
                used.add(v)
    return used


def _frames(g: ReasoningGraph, input_ctx) -> list[_Frame]:
    symbols = _symbols_used(g)
    table_symbols = {"$table", "$linked_passage", "$bridge_row_text", "$selected_row_text"}
    pair_symbols = {"$text_a", "$text_b"}
    if symbols & table_symbols:
        if not isinstance(input_ctx, LinkedTableContext):
            raise ModalityMismatch(f"graph {g.name.value} needs a linked table context")
        if "$linked_passage" in symbols or "$text_iter" in symbols:
            order = input_ctx.linked_passage_order()
            return [_Frame(input_ctx, input_ctx.passages[pid]) for pid in order]
        return [_Frame(input_ctx, None)]
    if symbols & pair_symbols:
        if not isinstance(input_ctx, PassagePair):
            raise ModalityMismatch(f"graph {g.name.value} needs a passage pair")
        return [_Frame(input_ctx, None)]
    # text-iteration only: works for both modalities
    if isinstance(input_ctx, LinkedTableContext):
        order = input_ctx.linked_passage_order()
        return [_Frame(input_ctx, input_ctx.passages[pid]) for pid in order]
    if isinstance(input_ctx, PassagePair):
        return [_Frame(input_ctx, input_ctx.first), _Frame(input_ctx, input_ctx.second)]
    raise ModalityMismatch(f"unsupported input type {type(input_ctx).__name__}")


def _entity_mention_for(value, passage: Passage, params: dict) -> EntityMention:
    """Unwrap an ENTITY port value into a mention located in ``passage``."""
    if isinstance(value, PropertyMatch):
        member = params.get("member", "first")
        value = value.first if member == "first" else value.second
    if isinstance(value, ComparativeEntity):
        return value.mention
    if isinstance(value, BridgeEntity):
        for locus, surface in ((value.locus_b, value.surface_b), (value.locus_a, value.surface_a)):
            if isinstance(locus, TextLocus) and locus.passage_id == passage.id:
                return EntityMention(
                    surface=surface,
                    normalized=normalize_surface(surface),
                    etype=value.mention.etype,
                    span=(locus.start, locus.end),
                    source=passage.id,
                )
        # table-side surface inside a flattened-row pseudo passage
        idx = passage.text.find(value.surface_a)
        if idx < 0:
            raise RejectedGeneration(f"bridge {value.surface_a!r} absent from {passage.id}")
        return EntityMention(
            surface=value.surface_a,
            normalized=normalize_surface(value.surface_a),
            etype=value.mention.etype,
            span=(idx, idx + len(value.surface_a)),
            source=passage.id,
        )
    if isinstance(value, CellChoice):
        idx = passage.text.find(value.surface)
        if idx < 0:
            raise RejectedGeneration(f"cell {value.surface!r} absent from {passage.id}")
        return EntityMention(
            surface=value.surface,
            normalized=normalize_surface(value.surface),
            etype=EntityType.OTHER,
            span=(idx, idx + len(value.surface)),
            source=passage.id,
        )
    if isinstance(value, EntityMention):
        return value
    raise RejectedGeneration(f"cannot use {type(value).__name__} as an entity")


_PROPERTY_ORDER = (
    ComparativeProperty.BIRTHDATE,
    ComparativeProperty.LOCATION,
    ComparativeProperty.NATIONALITY,
    ComparativeProperty.LIVE_PLACE,
)


def _eval_node(node: OperatorNode, g: ReasoningGraph, inputs: dict[str, object],
               frame: _Frame, branch: dict, backend):
    spec = OP_REGISTRY[node.op]

    def port_value(i: int):
        pname = spec.ports[i][0]
        bound = node.params.get(pname)
        if isinstance(bound, str) and bound.startswith("$"):
            return frame.resolve(bound, branch)
        return inputs[pname]

    if node.op == "find_bridge":
        return ops.find_bridge(port_value(0), port_value(1))
    if node.op == "find_bridge_text":
        return ops.find_bridge(port_value(0), port_value(1))
    if node.op == "find_com_ent":
        return ops.find_com_ent(port_value(0))
    if node.op == "match_props":
        a, b = port_value(0), port_value(1)
        matches = []
        for prop in _PROPERTY_ORDER:
            first = next((c for c in a if c.prop is prop), None)
            second = next((c for c in b if c.prop is prop), None)
            if first and second:
                matches.append(PropertyMatch(prop=prop, first=first, second=second))
        return matches
    if node.op == "select_answer_cell":
        ctx: LinkedTableContext = port_value(0)
        choices = []
        for r, row in enumerate(ctx.table.rows):
            for c, cell in enumerate(row):
                if cell.raw:
                    choices.append(CellChoice(row=r, col=c, surface=cell.raw))
                    break
        return choices
    if node.op == "select_answer_span":
        passage: Passage = port_value(0)
        lexicon = default_lexicon()
        seen: set[str] = set()
        out = []
        for m in ops.extract_entities(passage.text, source=passage.id):
            if m.normalized in seen or not ops._eligible(m.normalized, lexicon):
                continue
            seen.add(m.normalized)
            out.append(m)
        return out
    if node.op == "qg_with_ans":
        passage: Passage = port_value(0)
        answer = _entity_mention_for(port_value(1), passage, node.params)
        return ops.qg_with_ans(passage, answer, backend)
    if node.op == "qg_with_ent":
        passage = port_value(0)
        entity = _entity_mention_for(port_value(1), passage, node.params)
        return ops.qg_with_ent(passage, entity, backend)
    if node.op == "describe_ent":
        ctx = port_value(0)
        bridge = port_value(1)
        if not isinstance(bridge, BridgeEntity):
            raise RejectedGeneration("describe_ent needs a bridge entity")
        sentence = ops.describe_ent(ctx.table, bridge, backend)
        # fusion expects a predicate-shaped phrase, not a closed sentence
        return sentence.rstrip(". ")
    if node.op == "ques_to_sent":
        return ops.ques_to_sent(port_value(0))
    if node.op == "bridge_blend":
        q: SingleHopQ = port_value(0)
        sentence: str = port_value(1)
        bridge = port_value(2)
        if node.params.get("answer_in_bridge_row"):
            _require_row_cell_answer(frame.ctx, bridge, q.answer)
        blended = ops.bridge_blend(q, sentence, bridge, backend)
        return _PartialQA(question=blended, answer=q.answer)
    if node.op == "comp_blend":
        q1: SingleHopQ = port_value(0)
        q2: SingleHopQ = port_value(1)
        match = port_value(2)
        if not isinstance(match, PropertyMatch):
            raise RejectedGeneration("comp_blend needs a property match")
        pair: PassagePair = frame.ctx
        results = ops.comp_blend(
            q1, q2, match.prop,
            pair.first.title, pair.second.title,
            q1.answer, q2.answer,
        )
        return [_PartialQA(question=r.question, answer=r.answer) for r in results]
    raise ValueError(f"unknown operator {node.op!r}")


@dataclass(frozen=True)
class _PartialQA:
    question: str
    answer: str


def _require_row_cell_answer(ctx, bridge: BridgeEntity, answer: str) -> None:
    if not isinstance(ctx, LinkedTableContext) or not isinstance(bridge.locus_a, TableLocus):
        raise RejectedGeneration("row-cell answers need a table-anchored bridge")
    row = ctx.table.rows[bridge.locus_a.row]
    if answer not in {cell.raw for cell in row if cell.raw}:
        raise RejectedGeneration(f"answer {answer!r} is not a cell of the bridge row")


def execute(
    g: ReasoningGraph,
    input_ctx: LinkedTableContext | PassagePair,
    backend,
    max_fanout: int = DEFAULT_MAX_FANOUT,
    stats: ExecutionStats | None = None,
) -> list[CandidateQA]:
    """Run one validated graph over one input, fanning out over selections.

    Branches that fail a generation or fusion contract are dropped and
    counted; backend outages abort the whole call.
    """
    violations = validate(g)
    if violations:
        raise InvalidGraph(violations)
    stats = stats if stats is not None else ExecutionStats()
    order = _topo_order(g)
    symbols = _symbols_used(g)
    # consumers of each producer, to detect fan-out edges
    fanout_producers = set()
    for e in g.edges:
        prod_kind = OP_REGISTRY[g.node(e.producer).op].output
        port_kind = OP_REGISTRY[g.node(e.consumer).op].ports[e.port][1]
        if prod_kind is ValueKind.ENTITY_SET and port_kind is ValueKind.ENTITY:
            fanout_producers.add(e.producer)
    terminal_ids = [n.id for n in g.nodes if not any(e.producer == n.id for e in g.edges)]

    candidates: list[CandidateQA] = []
    for frame in _frames(g, input_ctx):
        if len(candidates) >= max_fanout:
            break
        # branch state: node_id -> value (selected element for fan-out nodes)
        branches: list[tuple[dict, list[ProvenanceStep]]] = [({}, [])]
        for node_id in order:
            node = g.node(node_id)
            spec = OP_REGISTRY[node.op]
            next_branches: list[tuple[dict, list[ProvenanceStep]]] = []
            for values, trail in branches:
                inputs: dict[str, object] = {}
                for e in g.edges:
                    if e.consumer == node_id:
                        inputs[spec.ports[e.port][0]] = values[e.producer]
                try:
                    result = _eval_node(node, g, inputs, frame, values, backend)
                except _DROPPABLE as exc:
                    stats.dropped += 1
                    logger.debug("branch dropped at %s: %s", node_id, exc)
                    continue
                step_inputs = tuple(digest(v) for v in inputs.values())
                if node_id in fanout_producers:
                    for element in list(result)[:max_fanout]:
                        sub = dict(values)
                        sub[node_id] = element
                        sub_trail = trail + [
                            ProvenanceStep(node=node_id, inputs=step_inputs,
                                           output=digest(element))
                        ]
                        next_branches.append((sub, sub_trail))
                else:
                    values = dict(values)
                    values[node_id] = result
                    next_branches.append(
                        (values, trail + [ProvenanceStep(node=node_id, inputs=step_inputs,
                                                         output=digest(result))])
                    )
            branches = next_branches
        for values, trail in branches:
            stats.branches += 1
            if len(candidates) >= max_fanout:
                break
            emitted = _emit(values, trail, g, terminal_ids, frame, symbols, stats)
            for qa in emitted:
                if len(candidates) >= max_fanout:
                    break
                candidates.append(qa)
    stats.emitted += len(candidates)
    return candidates


def _emit(values, trail, g, terminal_ids, frame, symbols, stats) -> list[CandidateQA]:
    out = []
    for tid in terminal_ids:
        if tid not in values:
            continue
        value = values[tid]
        partials: list[_PartialQA] = []
        if isinstance(value, _PartialQA):
            partials = [value]
        elif isinstance(value, list) and value and isinstance(value[0], _PartialQA):
            partials = value
        elif isinstance(value, SingleHopQ):
            partials = [_PartialQA(question=value.question, answer=value.answer)]
        for p in partials:
            try:
                out.append(
                    CandidateQA(
                        question=p.question,
                        answer=p.answer,
                        kind=g.name,
                        sources=frame.source_ids(symbols),
                        provenance=tuple(trail),
                    )
                )
            except ValueError as exc:
                stats.dropped += 1
                logger.debug("candidate rejected: %s", exc)
    return out


def generate_dataset(
    kinds: list[GraphKind],
    table_contexts: list[LinkedTableContext],
    passage_pairs: list[PassagePair],
    backend,
    max_fanout: int = DEFAULT_MAX_FANOUT,
    stats: ExecutionStats | None = None,
) -> list[CandidateQA]:
    """Concatenate graph runs over the whole corpus in stable order.

    Order is corpus position, then requested kind, then branch. Items a
    graph cannot consume are skipped; per-item failures are logged and do
    not abort the run.
    """
    if not kinds:
        raise ValueError("at least one graph kind is required")
    out: list[CandidateQA] = []
    corpus: list = list(table_contexts) + list(passage_pairs)
    for item in corpus:
        for kind in kinds:
            g = builtin(kind)
            try:
                out.extend(execute(g, item, backend, max_fanout=max_fanout, stats=stats))
            except ModalityMismatch:
                continue
            except _DROPPABLE as exc:
                logger.warning("item skipped for %s: %s", kind.value, exc)
    return out
