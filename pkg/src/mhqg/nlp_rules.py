"""Deterministic linguistic utilities.

Entity extraction and typing run on layered regexes plus editable
gazetteers, so the whole pipeline stays reproducible offline. A learned
tagger can replace :func:`extract_entities` behind the same signature.
"""

from __future__ import annotations

import os
import re
import string
import unicodedata
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import UnsupportedQuestionForm

# --------------------------------------------------------------------------
# gazetteers
# --------------------------------------------------------------------------

GAZETTEER_DIR_ENV = "MHQG_GAZETTEER_DIR"


def _read_gazetteer(name: str, directory: str | Path | None) -> frozenset[str]:
    if directory is None:
        directory = os.environ.get(GAZETTEER_DIR_ENV)
    if directory is not None:
        text = (Path(directory) / name).read_text(encoding="utf-8")
    else:
        text = resources.files("mhqg.data.gazetteers").joinpath(name).read_text("utf-8")
    entries = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line.casefold())
    return frozenset(entries)


@dataclass(frozen=True)
class Lexicon:
    """Immutable gazetteer bundle; load once, share everywhere."""

    nationalities: frozenset[str]
    locations: frozenset[str]
    stopwords: frozenset[str]

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "Lexicon":
        return cls(
            nationalities=_read_gazetteer("nationalities.txt", directory),
            locations=_read_gazetteer("locations.txt", directory),
            stopwords=_read_gazetteer("stopwords.txt", directory),
        )


@lru_cache(maxsize=1)
def default_lexicon() -> Lexicon:
    return Lexicon.load()


# --------------------------------------------------------------------------
# types
# --------------------------------------------------------------------------


class EntityType(str, Enum):
    PERSON = "PERSON"
    LOCATION = "LOCATION"
    NATIONALITY = "NATIONALITY"
    DATETIME = "DATETIME"
    NUMBER = "NUMBER"
    OTHER = "OTHER"


class WhType(str, Enum):
    WHAT = "WHAT"
    WHEN = "WHEN"
    WHERE = "WHERE"
    WHICH = "WHICH"
    WHO = "WHO"
    HOW = "HOW"
    OTHER = "OTHER"


@dataclass(frozen=True)
class EntityMention:
    surface: str
    normalized: str
    etype: EntityType
    span: tuple[int, int]
    source: str = ""

    def __post_init__(self):
        if self.normalized != normalize_surface(self.surface):
            raise ValueError("normalized field must equal normalize_surface(surface)")


def mention(surface: str, etype: EntityType, start: int, source: str = "") -> EntityMention:
    return EntityMention(
        surface=surface,
        normalized=normalize_surface(surface),
        etype=etype,
        span=(start, start + len(surface)),
        source=source,
    )


# --------------------------------------------------------------------------
# surface normalization
# --------------------------------------------------------------------------

_ARTICLES = {"the", "a", "an"}
_STRIP_CHARS = string.punctuation + string.whitespace + "‘’“”"


def normalize_surface(s: str) -> str:
    """Lowercased NFKC form, outer punctuation and leading articles removed."""
    s = unicodedata.normalize("NFKC", s).lower()
    s = " ".join(s.split())
    s = s.strip(_STRIP_CHARS)
    tokens = s.split()
    while tokens and tokens[0] in _ARTICLES:
        tokens.pop(0)
    return " ".join(tokens).strip(_STRIP_CHARS)


# --------------------------------------------------------------------------
# dates
# --------------------------------------------------------------------------

_MONTHS = {
    name: i + 1
    for i, name in enumerate(
        [
            "january", "february", "march", "april", "may", "june",
            "july", "august", "september", "october", "november", "december",
        ]
    )
}
for _name, _num in list(_MONTHS.items()):
    _MONTHS[_name[:3]] = _num

_MONTH_RE = r"(?:Jan(?:uary)?|Feb(?:ruary)?|Mar(?:ch)?|Apr(?:il)?|May|Jun(?:e)?|Jul(?:y)?|Aug(?:ust)?|Sep(?:tember)?|Oct(?:ober)?|Nov(?:ember)?|Dec(?:ember)?)"
_YEAR_RE = r"[12]\d{3}"

_DATE_DMY = re.compile(rf"(\d{{1,2}}) ({_MONTH_RE}),? ({_YEAR_RE})")
_DATE_MDY = re.compile(rf"({_MONTH_RE}) (\d{{1,2}}), ({_YEAR_RE})")
_DATE_MY = re.compile(rf"({_MONTH_RE}) ({_YEAR_RE})")
_DATE_Y = re.compile(rf"({_YEAR_RE})")


@dataclass(frozen=True, order=False)
class ParsedDate:
    year: int
    month: int | None = None
    day: int | None = None

    def sort_key(self) -> tuple[int, int, int]:
        # partial dates compare by their earliest possible instant
        return (self.year, self.month or 1, self.day or 1)


def parse_date(s: str) -> ParsedDate | None:
    s = " ".join(s.split())
    m = _DATE_DMY.fullmatch(s)
    if m:
        return ParsedDate(int(m.group(3)), _MONTHS[m.group(2).lower()], int(m.group(1)))
    m = _DATE_MDY.fullmatch(s)
    if m:
        return ParsedDate(int(m.group(3)), _MONTHS[m.group(1).lower()], int(m.group(2)))
    m = _DATE_MY.fullmatch(s)
    if m:
        return ParsedDate(int(m.group(2)), _MONTHS[m.group(1).lower()])
    m = _DATE_Y.fullmatch(s)
    if m:
        return ParsedDate(int(m.group(1)))
    return None


# --------------------------------------------------------------------------
# entity extraction
# --------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"\d[\d,]*(?:\.\d+)?")
_TOKEN_RE = re.compile(r"[A-Za-z][A-Za-z'\-]*|\d[\d,]*(?:\.\d+)?")

# Capitalized tokens that never begin a name: articles, pronouns, common
# sentence openers, and wh-words.
_RUN_BLOCKERS = {
    "a", "an", "the", "it", "he", "she", "they", "we", "you", "i",
    "this", "that", "these", "those", "there", "here", "his", "her",
    "its", "their", "our", "my", "in", "on", "at", "of", "and", "or",
    "but", "two", "who", "what", "when", "where", "which", "how",
    "are", "is", "was", "were", "after", "before", "during",
}

# layer priority: smaller wins ties at equal span length
_PRIORITY = {
    EntityType.DATETIME: 0,
    EntityType.NUMBER: 1,
    EntityType.NATIONALITY: 2,
    EntityType.LOCATION: 3,
    EntityType.PERSON: 4,
    EntityType.OTHER: 5,
}


def _date_candidates(text: str):
    for pattern in (_DATE_DMY, _DATE_MDY, _DATE_MY, _DATE_Y):
        for m in pattern.finditer(text):
            yield m.start(), m.end(), EntityType.DATETIME


def _number_candidates(text: str):
    for m in _NUMBER_RE.finditer(text):
        yield m.start(), m.end(), EntityType.NUMBER


def _tokens(text: str) -> list[tuple[int, int, str]]:
    return [(m.start(), m.end(), m.group()) for m in _TOKEN_RE.finditer(text)]


def _gazetteer_candidates(text: str, tokens, lexicon: Lexicon):
    n = len(tokens)
    for i in range(n):
        for length in (4, 3, 2, 1):
            if i + length > n:
                continue
            start, end = tokens[i][0], tokens[i + length - 1][1]
            if not _adjacent(tokens, i, length):
                continue
            phrase = text[start:end].casefold()
            if phrase in lexicon.nationalities:
                yield start, end, EntityType.NATIONALITY
            if phrase in lexicon.locations:
                yield start, end, EntityType.LOCATION


def _adjacent(tokens, i: int, length: int) -> bool:
    # tokens joined by exactly one space form a candidate phrase
    for j in range(i, i + length - 1):
        if tokens[j + 1][0] - tokens[j][1] != 1:
            return False
    return True


def _capitalized_runs(text: str, tokens, lexicon: Lexicon):
    """PERSON for 2-4 caps, LOCATION after an ``in`` cue, OTHER for longer
    capitalized spans."""
    n = len(tokens)
    i = 0
    while i < n:
        start, end, tok = tokens[i]
        if not (tok[0].isupper() and tok[0].isalpha()) or tok.lower() in _RUN_BLOCKERS:
            i += 1
            continue
        j = i
        while (
            j + 1 < n
            and tokens[j + 1][2][0].isupper()
            and tokens[j + 1][2][0].isalpha()
            and tokens[j + 1][2].lower() not in _RUN_BLOCKERS
            and tokens[j + 1][0] - tokens[j][1] == 1
        ):
            j += 1
        run_len = j - i + 1
        run_start, run_end = tokens[i][0], tokens[j][1]
        preceded_by_in = text[:run_start].rstrip().lower().endswith((" in", "(in")) or (
            text[:run_start].strip().lower() == "in"
        )
        if preceded_by_in:
            yield run_start, run_end, EntityType.LOCATION
        elif run_len >= 2:
            phrase = text[run_start:run_end].casefold()
            if phrase in lexicon.nationalities or phrase in lexicon.locations:
                pass  # the gazetteer layer already owns this span
            elif run_len <= 4:
                yield run_start, run_end, EntityType.PERSON
            else:
                yield run_start, run_end, EntityType.OTHER
        i = j + 1


# Replaceable tagger hook: a callable with extract_entities' signature.
# Installing a model-backed tagger swaps extraction everywhere without
# touching call sites; None means the rule layers below.
_TAGGER_HOOK = None


def set_entity_tagger(tagger) -> None:
    """Install (or with ``None`` remove) a replacement mention tagger."""
    global _TAGGER_HOOK
    _TAGGER_HOOK = tagger


def extract_entities(
    text: str, source: str = "", lexicon: Lexicon | None = None
) -> list[EntityMention]:
    """Typed, non-overlapping mentions ordered by span start.

    Longest match wins; at equal length the layer order is DATETIME,
    NUMBER, NATIONALITY, LOCATION, PERSON, OTHER.
    """
    if _TAGGER_HOOK is not None:
        return _TAGGER_HOOK(text, source=source, lexicon=lexicon)
    if not text:
        return []
    lexicon = lexicon or default_lexicon()
    tokens = _tokens(text)
    candidates = list(_date_candidates(text))
    candidates += list(_number_candidates(text))
    candidates += list(_gazetteer_candidates(text, tokens, lexicon))
    candidates += list(_capitalized_runs(text, tokens, lexicon))
    # keep longest spans first, then layer priority, then position
    candidates.sort(key=lambda c: (-(c[1] - c[0]), _PRIORITY[c[2]], c[0]))
    chosen: list[tuple[int, int, EntityType]] = []
    for start, end, etype in candidates:
        if any(s < end and start < e for s, e, _ in chosen):
            continue
        chosen.append((start, end, etype))
    chosen.sort(key=lambda c: c[0])
    out = []
    for start, end, etype in chosen:
        surface = text[start:end]
        out.append(
            EntityMention(
                surface=surface,
                normalized=normalize_surface(surface),
                etype=etype,
                span=(start, end),
                source=source,
            )
        )
    return out


def classify_string(s: str, lexicon: Lexicon | None = None) -> EntityType:
    """Type a bare surface with the same layers extraction uses."""
    lexicon = lexicon or default_lexicon()
    s = s.strip()
    if not s:
        return EntityType.OTHER
    if parse_date(s) is not None:
        return EntityType.DATETIME
    if _NUMBER_RE.fullmatch(s):
        return EntityType.NUMBER
    if s.casefold() in lexicon.nationalities:
        return EntityType.NATIONALITY
    if s.casefold() in lexicon.locations:
        return EntityType.LOCATION
    tokens = s.split()
    if 2 <= len(tokens) <= 4 and all(t[0].isupper() for t in tokens if t):
        return EntityType.PERSON
    return EntityType.OTHER


# --------------------------------------------------------------------------
# wh classification
# --------------------------------------------------------------------------

_WH_WORDS = {
    "what": WhType.WHAT,
    "when": WhType.WHEN,
    "where": WhType.WHERE,
    "which": WhType.WHICH,
    "who": WhType.WHO,
    "how": WhType.HOW,
}

_COPULA_AUX = {"is", "was", "are", "were", "do", "does", "did", "has", "have", "had"}
_PERSON_NOUNS = {"person", "people", "man", "woman", "men", "women"}
_AGENT_SUFFIXES = ("er", "or", "ist")


def _wh_tokens(q: str) -> list[str]:
    return [t.strip(string.punctuation).lower() for t in q.split()]


def _is_person_noun(token: str) -> bool:
    if token in _PERSON_NOUNS:
        return True
    return len(token) > 4 and token.endswith(_AGENT_SUFFIXES)


def classify_wh(q: str) -> WhType:
    """Question type by wh-token, with two documented refinements.

    Base rule: first wh-word within the first three tokens; failing that,
    the first wh-word anywhere (catches trailing forms like ``at what
    grade?``). Refinements: a question-initial ``what`` followed by a
    plain noun asks for a selection and counts as WHICH; ``which``
    followed by a person-denoting noun counts as WHO.
    """
    tokens = _wh_tokens(q)
    hit: tuple[int, WhType] | None = None
    for i, tok in enumerate(tokens[:3]):
        if tok in _WH_WORDS:
            hit = (i, _WH_WORDS[tok])
            break
    if hit is None:
        for i, tok in enumerate(tokens):
            if tok in _WH_WORDS:
                hit = (i, _WH_WORDS[tok])
                break
    if hit is None:
        return WhType.OTHER
    idx, wh = hit
    nxt = tokens[idx + 1] if idx + 1 < len(tokens) else ""
    if wh is WhType.WHAT and idx == 0 and nxt and nxt not in _COPULA_AUX:
        return WhType.WHICH
    if wh is WhType.WHICH:
        following = tokens[idx + 1 : idx + 3]
        if any(_is_person_noun(t) for t in following):
            return WhType.WHO
    return wh


# --------------------------------------------------------------------------
# verb inflection
# --------------------------------------------------------------------------

_IRREGULAR_PAST = {
    "be": "was", "become": "became", "begin": "began", "build": "built",
    "buy": "bought", "come": "came", "find": "found", "get": "got",
    "give": "gave", "go": "went", "have": "had", "hold": "held",
    "leave": "left", "make": "made", "meet": "met", "run": "ran",
    "see": "saw", "sing": "sang", "take": "took", "teach": "taught",
    "win": "won", "write": "wrote",
}
_PAST_TO_BASE = {past: base for base, past in _IRREGULAR_PAST.items()}
# regular verbs whose base form cannot be recovered by suffix-stripping alone
_PAST_TO_BASE.update(
    {
        "completed": "complete", "located": "locate", "released": "release",
        "lived": "live", "named": "name", "created": "create",
        "crossed": "cross", "born": "bear",
    }
)


def to_past(verb: str) -> str:
    v = verb.lower()
    if v in _IRREGULAR_PAST:
        return _IRREGULAR_PAST[v]
    if v.endswith("e"):
        return v + "d"
    if len(v) > 2 and v.endswith("y") and v[-2] not in "aeiou":
        return v[:-1] + "ied"
    return v + "ed"


def to_base(verb: str) -> str:
    v = verb.lower()
    if v in _PAST_TO_BASE:
        return _PAST_TO_BASE[v]
    if v.endswith("ied"):
        return v[:-3] + "y"
    if v.endswith("ed"):
        stem = v[:-2]
        if len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in "aeiou":
            return stem[:-1]
        return stem
    if v.endswith("ies") and len(v) > 4:
        return v[:-3] + "y"
    if v.endswith("es") and len(v) > 3 and v[:-2].endswith(("s", "x", "z", "ch", "sh")):
        return v[:-2]
    if v.endswith("s") and not v.endswith("ss") and len(v) > 3:
        return v[:-1]
    return v


def _looks_like_finite_verb(token: str) -> bool:
    t = token.lower().strip(string.punctuation)
    if t in _COPULA_AUX or t in _PAST_TO_BASE or t in _IRREGULAR_PAST.values():
        return True
    return len(t) > 2 and (t.endswith("ed") or t.endswith("s")) and t[0].islower()


# --------------------------------------------------------------------------
# question -> declarative predicate
# --------------------------------------------------------------------------

_SUBJECT_WH = {"what", "which", "who"}
_COPULAS = {"is", "was", "are", "were"}


def question_to_predicate(q: str, answer_entity: str) -> str:
    """Relative-clause predicate for ``the [MASK] that <predicate>``.

    Three rule families are supported: subject-wh, object-wh with
    do-support, and copular. Anything else raises
    :class:`UnsupportedQuestionForm` so the caller can skip the candidate.
    ``answer_entity`` is accepted for signature stability; the current
    rules do not consult it.
    """
    del answer_entity
    q = q.strip()
    if not q.endswith("?"):
        raise UnsupportedQuestionForm("question must end with '?'")
    body = q[:-1].strip()
    words = body.split()
    if not words:
        raise UnsupportedQuestionForm("empty question")
    wh = words[0].lower().strip(string.punctuation)
    rest = words[1:]
    if wh not in _WH_WORDS:
        raise UnsupportedQuestionForm(f"no rule for leading token {words[0]!r}")
    if not rest:
        raise UnsupportedQuestionForm("bare wh-question")

    # copular: "Who/What is/was X?" -> "is/was X"
    if rest[0].lower() in _COPULAS:
        return " ".join(rest)

    # object-wh with do-support: "What did X V ...?" -> "X V-ed ..."
    if rest[0].lower() in {"did", "does", "do"}:
        subject, remainder = _split_subject(rest[1:])
        if not subject or not remainder:
            raise UnsupportedQuestionForm("cannot locate subject/verb after auxiliary")
        verb = remainder[0]
        inflected = to_past(verb) if rest[0].lower() == "did" else verb
        return " ".join(subject + [inflected] + remainder[1:])

    # subject-wh: "What <NP> <VP>?" -> "<VP>"
    if wh in _SUBJECT_WH:
        for i, token in enumerate(rest):
            if _looks_like_finite_verb(token):
                return " ".join(rest[i:])
    raise UnsupportedQuestionForm(f"no rule matched {q!r}")


def _split_subject(tokens: list[str]) -> tuple[list[str], list[str]]:
    """Split ``X V ...`` where X is a capitalized (or article-led) noun run."""
    subject: list[str] = []
    for i, tok in enumerate(tokens):
        bare = tok.strip(string.punctuation)
        if bare and (bare[0].isupper() or bare.lower() in _ARTICLES or bare[0].isdigit()):
            subject.append(tok)
            continue
        return subject, tokens[i:]
    return subject, []
