import random

import pytest

from mhqg.backends import StubBackend
from mhqg.corpus import Cell, LinkedTableContext, Passage, Table
from mhqg.errors import RejectedGeneration, UndecidableAnswer, UnsupportedQuestionForm
from mhqg.nlp_rules import (
    EntityType,
    default_lexicon,
    extract_entities,
    mention,
    normalize_surface,
)
from mhqg.operators import (
    BridgeEntity,
    ComparativeProperty,
    SingleHopQ,
    TableLocus,
    TextLocus,
    bridge_blend,
    build_masked,
    comp_blend,
    comparison_templates,
    describe_ent,
    find_bridge,
    find_com_ent,
    qg_with_ans,
    qg_with_ent,
    ques_to_sent,
)

FIRSTS = ["Alpha", "Bravo", "Carol", "Delta", "Edgar", "Fiona", "Grant", "Helen"]
LASTS = ["Stone", "Rivers", "Woods", "Marsh", "Fields", "Brook", "Vale", "Cliff"]
NAME_POOL = [f"{a} {b}" for a in FIRSTS for b in LASTS]


def _passage_of(names, pid="p"):
    text = ". ".join(f"{n} waved" for n in names) + "."
    return Passage.build(pid, "Names", text)


def _eligible_normals(passage):
    lexicon = default_lexicon()
    out = set()
    for m in extract_entities(passage.text):
        norm = m.normalized
        if norm and not (norm.isdigit() and len(norm) < 4) and norm not in lexicon.stopwords:
            out.add(norm)
    return out


# -- find_bridge ----------------------------------------------------------------


def test_find_bridge_table_text_example(table_contexts):
    ctx = table_contexts[0]
    passage = ctx.passages["p_button"]
    bridges = find_bridge(ctx, passage)
    assert [b.surface_a for b in bridges] == ["Jenson Button"]
    assert bridges[0].locus_a == TableLocus(row=0, col=1)


def test_find_bridge_disjoint_texts():
    a = _passage_of(["Alpha Stone"], "a")
    b = _passage_of(["Bravo Rivers"], "b")
    assert find_bridge(a, b) == []


def test_find_bridge_self_pair_yields_all_entities():
    p = _passage_of(["Alpha Stone", "Bravo Rivers", "Carol Woods"], "p")
    bridges = find_bridge(p, p)
    assert {b.mention.normalized for b in bridges} == _eligible_normals(p)


def test_find_bridge_symmetry_on_texts():
    rng = random.Random(3)
    for _ in range(20):
        a = _passage_of(rng.sample(NAME_POOL, rng.randint(1, 8)), "a")
        b = _passage_of(rng.sample(NAME_POOL, rng.randint(1, 8)), "b")
        ab = {x.mention.normalized for x in find_bridge(a, b)}
        ba = {x.mention.normalized for x in find_bridge(b, a)}
        assert ab == ba


def test_find_bridge_excludes_short_numbers_and_stopwords():
    table = Table(
        id="t", title="T", section_title="", headers=("A", "B", "C"),
        rows=((Cell("4"), Cell("the"), Cell("Alpha Stone")),),
    )
    passage = Passage.build("p", "P", "Alpha Stone scored 4 in the match.")
    ctx = LinkedTableContext(table=table, passages={"p": passage})
    assert [b.surface_a for b in find_bridge(ctx, passage)] == ["Alpha Stone"]


def test_find_bridge_oracle_small_corpora():
    rng = random.Random(7)
    for _ in range(50):
        a = _passage_of(rng.sample(NAME_POOL, rng.randint(1, 10)), "a")
        b = _passage_of(rng.sample(NAME_POOL, rng.randint(1, 10)), "b")
        got = {x.mention.normalized for x in find_bridge(a, b)}
        oracle = _eligible_normals(a) & _eligible_normals(b)
        assert got == oracle


# -- find_com_ent -----------------------------------------------------------------


def test_find_com_ent_nationality():
    d = Passage.build("d", "Arthur Lubin", "Arthur Lubin was an American film director.")
    assert [(c.mention.surface, c.prop) for c in find_com_ent(d)] == [
        ("American", ComparativeProperty.NATIONALITY)
    ]


def test_find_com_ent_birthdate_trigger():
    d = Passage.build("d", "Terry Southern", "Terry Southern (born 1 May 1924) wrote satire.")
    props = [(c.mention.surface, c.prop) for c in find_com_ent(d)]
    assert ("1 May 1924", ComparativeProperty.BIRTHDATE) in props


def test_find_com_ent_date_without_trigger_dropped():
    d = Passage.build("d", "Event", "The festival of 1966 drew crowds.")
    assert all(c.prop is not ComparativeProperty.BIRTHDATE for c in find_com_ent(d))


def test_find_com_ent_live_place():
    d = Passage.build("d", "Bio", "She lives in Arkansas now.")
    assert [(c.mention.surface, c.prop) for c in find_com_ent(d)] == [
        ("Arkansas", ComparativeProperty.LIVE_PLACE)
    ]


def test_find_com_ent_empty():
    assert find_com_ent(Passage.build("d", "Blank", "nothing typed here.")) == []


# -- generation wrappers ------------------------------------------------------------


def _mention_in(passage, surface, etype=EntityType.PERSON):
    return mention(surface, etype, passage.text.find(surface), source=passage.id)


def test_qg_with_ans_contract(stub):
    d = Passage.build("d", "Bio", "Craig Wrobleski is a Canadian cinematographer best known for Fargo.")
    q = qg_with_ans(d, _mention_in(d, "Craig Wrobleski"), stub)
    assert q.question.endswith("?")
    assert "Craig Wrobleski".lower() not in q.question.lower()
    assert q.answer == "Craig Wrobleski"


def test_qg_with_ans_span_outside():
    d = Passage.build("d", "Bio", "Short text.")
    bad = mention("Craig Wrobleski", EntityType.PERSON, 0, source="d")
    with pytest.raises(ValueError):
        qg_with_ans(d, bad, None)


class _NoQuestionMark:
    def gen_question_with_answer(self, context, answer):
        return "no terminal mark"


def test_qg_with_ans_rejects_missing_mark():
    d = Passage.build("d", "Bio", "Alpha Stone waved.")
    with pytest.raises(RejectedGeneration):
        qg_with_ans(d, _mention_in(d, "Alpha Stone"), _NoQuestionMark())


class _LeakyBackend:
    def gen_question_with_answer(self, context, answer):
        return f"Who is {answer}?"


def test_qg_with_ans_rejects_answer_leak():
    d = Passage.build("d", "Bio", "Alpha Stone waved.")
    with pytest.raises(RejectedGeneration):
        qg_with_ans(d, _mention_in(d, "Alpha Stone"), _LeakyBackend())


def test_qg_with_ent_contains_entity(stub):
    d = Passage.build("d", "Bio", "Jenson Button joined Gals and Pals in 1963.")
    q = qg_with_ent(d, _mention_in(d, "Jenson Button"), stub)
    assert "Jenson Button" in q.question
    assert q.answer == "1963"
    assert q.anchored_entity is not None


class _EntityFreeBackend:
    calls = 0

    def gen_question_with_entity(self, context, entity):
        type(self).calls += 1
        return "Who waved?", "somebody"


def test_qg_with_ent_retries_then_rejects():
    d = Passage.build("d", "Bio", "Alpha Stone waved.")
    _EntityFreeBackend.calls = 0
    with pytest.raises(RejectedGeneration):
        qg_with_ent(d, _mention_in(d, "Alpha Stone"), _EntityFreeBackend(), retries=3)
    assert _EntityFreeBackend.calls == 3


def _bridge_for(ctx, passage):
    return find_bridge(ctx, passage)[0]


def test_describe_ent_contract(table_contexts, stub):
    ctx = table_contexts[0]
    bridge = _bridge_for(ctx, ctx.passages["p_button"])
    sentence = describe_ent(ctx.table, bridge, stub)
    assert sentence == "Jenson Button Pos is 4 in 2004 United States Grand Prix."


def test_describe_ent_needs_table_locus(table_contexts, stub):
    ctx = table_contexts[0]
    bridge = _bridge_for(ctx, ctx.passages["p_button"])
    text_only = BridgeEntity(
        mention=bridge.mention,
        locus_a=TextLocus("p_button", *bridge.mention.span),
        locus_b=bridge.locus_b,
        surface_a=bridge.surface_b,
        surface_b=bridge.surface_b,
    )
    with pytest.raises(ValueError):
        describe_ent(ctx.table, text_only, stub)


class _EntityFreeDescriber:
    def describe_entity(self, row, entity):
        return "A sentence without the subject."


def test_describe_ent_rejects_missing_entity(table_contexts):
    ctx = table_contexts[0]
    bridge = _bridge_for(ctx, ctx.passages["p_button"])
    with pytest.raises(RejectedGeneration):
        describe_ent(ctx.table, bridge, _EntityFreeDescriber())


def test_ques_to_sent_examples():
    q = SingleHopQ("What bridge crosses Youngs Bay?", "Old Youngs Bay Bridge", "p")
    assert ques_to_sent(q) == "crosses Youngs Bay"
    with pytest.raises(UnsupportedQuestionForm):
        ques_to_sent(SingleHopQ("Is it raining?", "yes", "p"))


# -- bridge_blend --------------------------------------------------------------------


def _gals_bridge():
    m = mention("Jenson Button", EntityType.PERSON, 0, source="p")
    return BridgeEntity(
        mention=m,
        locus_a=TableLocus(0, 1),
        locus_b=TextLocus("p", 0, len("Jenson Button")),
        surface_a="Jenson Button",
        surface_b="Jenson Button",
    )


def test_bridge_blend_table5_style(stub):
    q = SingleHopQ("When did Jenson Button join Gals and Pals?", "1963", "p")
    s = "won the Eurovision Song Contest in 1966"
    out = bridge_blend(q, s, _gals_bridge(), stub)
    assert out == (
        "When did the person that won the Eurovision Song Contest in 1966 "
        "join Gals and Pals?"
    )
    assert s in out and "[MASK]" not in out


def test_bridge_blend_strips_leading_entity_from_description(stub):
    q = SingleHopQ("When did Jenson Button join Gals and Pals?", "1963", "p")
    s = "Jenson Button Pos is 4 in 2004 United States Grand Prix"
    out = bridge_blend(q, s, _gals_bridge(), stub)
    assert out.startswith("When did the person that Pos is 4")


def test_bridge_blend_entity_absent():
    q = SingleHopQ("When did somebody join?", "1963", "p")
    with pytest.raises(ValueError):
        bridge_blend(q, "a predicate", _gals_bridge(), StubBackend())


class _WordyFill:
    def fill_mask(self, text, hint):
        return "three whole words"


def test_bridge_blend_rejects_long_fill():
    q = SingleHopQ("When did Jenson Button join Gals and Pals?", "1963", "p")
    with pytest.raises(RejectedGeneration):
        bridge_blend(q, "won in 1966", _gals_bridge(), _WordyFill())


def test_build_masked_replaces_first_occurrence_only():
    masked = build_masked("Did Alpha Stone respect Alpha Stone?", "waved first", "Alpha Stone")
    assert masked == "Did the [MASK] that waved first respect Alpha Stone?"


# -- comp_blend -----------------------------------------------------------------------


def _single_hop(q, a):
    return SingleHopQ(q, a, "src")


def test_comp_blend_nationality_exact():
    outs = comp_blend(
        _single_hop("What is the nationality of Beth Ditto?", "American"),
        _single_hop("What is the nationality of Mary Beth Patterson?", "American"),
        ComparativeProperty.NATIONALITY,
        "Beth Ditto", "Mary Beth Patterson", "American", "American",
    )
    questions = {o.question: o.answer for o in outs}
    assert questions["Are Beth Ditto and Mary Beth Patterson of the same nationality?"] == "Yes"
    # selection templates are undecidable when both answers agree
    assert all("Which person" not in q for q in questions)


def test_comp_blend_birthdate_order():
    outs = comp_blend(
        _single_hop("When was Terry Southern born?", "1 May 1924"),
        _single_hop("When was Neal Town Stephenson born?", "31 October 1959"),
        ComparativeProperty.BIRTHDATE,
        "Terry Southern", "Neal Town Stephenson", "1 May 1924", "31 October 1959",
    )
    assert len(outs) == 1
    assert outs[0].question == "Who was born first, Terry Southern or Neal Town Stephenson?"
    assert outs[0].answer == "Terry Southern"


def test_comp_blend_birthdate_tie_undecidable():
    with pytest.raises(UndecidableAnswer):
        comp_blend(
            _single_hop("When was A born?", "1950"),
            _single_hop("When was B born?", "1950"),
            ComparativeProperty.BIRTHDATE,
            "A Person", "B Person", "1950", "1950",
        )


def test_comp_blend_location_selection():
    outs = comp_blend(
        _single_hop("Where is A?", "Paris"),
        _single_hop("Where is B?", "London"),
        ComparativeProperty.LOCATION,
        "Alpha Hall", "Bravo Hall", "Paris", "London",
    )
    by_question = {o.question: o.answer for o in outs}
    assert by_question["Which one is located in Paris, Alpha Hall or Bravo Hall?"] == "Alpha Hall"
    assert by_question["Which one is located in London, Alpha Hall or Bravo Hall?"] == "Bravo Hall"
    assert by_question["Are Alpha Hall and Bravo Hall located in the same place?"] == "No"
    assert by_question["Are both Alpha Hall and Bravo Hall located in Paris?"] == "No"


def test_comp_blend_permutation_coherent():
    args = ("Alpha Hall", "Bravo Hall", "Paris", "London")
    fwd = comp_blend(
        _single_hop("Where is A?", "Paris"), _single_hop("Where is B?", "London"),
        ComparativeProperty.LOCATION, *args,
    )
    rev = comp_blend(
        _single_hop("Where is B?", "London"), _single_hop("Where is A?", "Paris"),
        ComparativeProperty.LOCATION, "Bravo Hall", "Alpha Hall", "London", "Paris",
    )
    swap = {"Alpha Hall": "Bravo Hall", "Bravo Hall": "Alpha Hall"}
    fwd_yesno = sorted(o.answer for o in fwd if o.answer in ("Yes", "No"))
    rev_yesno = sorted(o.answer for o in rev if o.answer in ("Yes", "No"))
    assert fwd_yesno == rev_yesno
    fwd_entities = sorted(swap[o.answer] for o in fwd if o.answer in swap)
    rev_entities = sorted(o.answer for o in rev if o.answer in swap)
    assert fwd_entities == rev_entities


def test_template_file_carries_eleven_templates():
    templates = comparison_templates()
    assert len(templates) == 11
    by_prop = {}
    for prop, _, _ in templates:
        by_prop[prop] = by_prop.get(prop, 0) + 1
    assert by_prop[ComparativeProperty.BIRTHDATE] == 1
    assert by_prop[ComparativeProperty.LOCATION] == 4
    assert by_prop[ComparativeProperty.NATIONALITY] == 3
    assert by_prop[ComparativeProperty.LIVE_PLACE] == 3
