"""Inference engines behind the wire verbs.

``heuristic`` engines are deterministic rules useful for offline serving
and conformance testing. ``hf:<model-id>`` engines wrap pretrained
transformer checkpoints: text-to-text generation for the two question
verbs, causal LM generation for table descriptions, masked-LM fill for
the mask verb, and causal-LM loss for perplexity. Model loading happens
at startup; a missing checkpoint fails the boot, not the request.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass


class EngineError(RuntimeError):
    """Engine produced no usable output for a valid request."""


_DATE = re.compile(
    r"\b\d{1,2} (?:January|February|March|April|May|June|July|August|September|"
    r"October|November|December),? \d{4}\b|\b\d{4}\b"
)
_NUMBER = re.compile(r"\b\d[\d,\.]*\b")
_CAP_RUN = re.compile(r"\b[A-Z][\w'-]*(?: [A-Z][\w'-]*){0,3}")
_ROW_FACT = re.compile(r"^(?P<header>[^;]+?) is (?P<value>.+)$")
_SENTENCE_END = re.compile(r"[.!?](?= [A-Z0-9])")

_FILL_BY_HINT = {"PERSON": "person", "LOCATION": "place", "DATETIME": "year"}


def _sentences(text: str) -> list[str]:
    out, start = [], 0
    for m in _SENTENCE_END.finditer(text):
        out.append(text[start: m.end()])
        start = m.end() + 1
    if start < len(text):
        out.append(text[start:])
    return out or [text]


def _sentence_with(text: str, needle: str) -> str:
    for sentence in _sentences(text):
        if needle in sentence:
            return sentence
    return text


def _noun_for(surface: str) -> str:
    if _DATE.fullmatch(surface):
        return "year"
    if _NUMBER.fullmatch(surface):
        return "number"
    if _CAP_RUN.fullmatch(surface) and " " in surface:
        return "person"
    return "thing"


def _parse_row(text: str):
    if " ; " not in text or not text.endswith(" ."):
        return None
    parts = text[:-2].split(" ; ")
    facts = []
    for part in parts[2:]:
        m = _ROW_FACT.match(part)
        if not m:
            return None
        facts.append((m.group("header"), m.group("value")))
    return parts[0], facts


class HeuristicEngine:
    """Deterministic rule engine; output depends only on inputs and seed.

    ``temperature`` is accepted for signature parity with model engines
    and ignored: rules have nothing to sample.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def qg_ans(self, context: str, answer: str, temperature: float | None = None) -> str:
        sentence = _sentence_with(context, answer)
        remainder = " ".join(sentence.replace(answer, " ", 1).split()).strip(" .?!,")
        return f"What {_noun_for(answer)} {remainder}?"

    def qg_ent(self, context: str, entity: str,
               temperature: float | None = None) -> tuple[str, str]:
        sentence = _sentence_with(context, entity)
        answer = self._answer_span(sentence, context, entity)
        if _DATE.fullmatch(answer):
            question = f"When was {entity} recorded?"
        elif _NUMBER.fullmatch(answer):
            question = f"What number is associated with {entity}?"
        else:
            question = f"What is {entity} connected with?"
        return question, answer

    def _answer_span(self, sentence: str, context: str, entity: str) -> str:
        for pattern in (_DATE, _NUMBER, _CAP_RUN):
            for m in pattern.finditer(sentence):
                value = m.group()
                if value != entity and value not in entity and entity not in value:
                    return value
        tokens = context.split()
        return tokens[-1].strip(".?!,") if tokens else context

    def describe(self, row: str, entity: str, temperature: float | None = None) -> str:
        parsed = _parse_row(row)
        if parsed is None:
            return f"{entity} appears in the record."
        title, facts = parsed
        other = [f"{h} is {v}" for h, v in facts if v != entity]
        if other:
            return f"{entity} {' and '.join(other)} in {title}."
        return f"{entity} is in {title}."

    def fill_mask(self, text: str, hint: str) -> str:
        return _FILL_BY_HINT.get(hint, "one")

    def perplexity(self, text: str) -> float:
        digest = hashlib.sha256(f"{self.seed}:{text}".encode("utf-8")).digest()
        frac = (int.from_bytes(digest[:8], "big") % 10**6) / 10**6
        tokens = text.split()
        seen: set[tuple[str, str]] = set()
        repeats = 0
        for pair in zip(tokens, tokens[1:]):
            if pair in seen:
                repeats += 1
            seen.add(pair)
        return 1.0 + frac + 0.05 * repeats

    def qdmr2q(self, steps: list[str]) -> str:
        head = re.fullmatch(r"Return (.+)", steps[0]) if steps else None
        if not head:
            raise EngineError("first step must be 'Return <x>'")
        phrase = f"the {head.group(1)}"
        frame = None
        for step in steps[1:]:
            m = re.fullmatch(r"Return what is the (.+) of #\d+", step)
            if m:
                frame = m.group(1)
                continue
            m = re.fullmatch(r"Return #\d+ that (.+)", step)
            if m:
                phrase += f" that {m.group(1)}"
                continue
            m = re.fullmatch(r"Return #\d+ in (\S+) (\d.*)", step)
            if m:
                phrase += f" that {m.group(1)} is {m.group(2)}"
                continue
            m = re.fullmatch(r"Return #\d+ in (.+)", step)
            if m:
                phrase += f" in {m.group(1)}"
        if frame is None:
            return f"What is {phrase}?"
        return f"What is the {frame} of {phrase}?"


@dataclass
class _HFBundle:
    tokenizer: object
    model: object


class TransformersEngine:
    """Pretrained-checkpoint engine; greedy decoding unless a request opts
    into sampling with a temperature.

    Model weights are read-only after load, but the seeding of the torch
    RNG is process-global, so decodes serialize on a lock.
    """

    def __init__(self, model_id: str, seed: int = 0, max_input_tokens: int = 512):
        import threading

        self.model_id = model_id
        self.seed = seed
        self.max_input_tokens = max_input_tokens
        self._decode_lock = threading.Lock()
        try:
            import torch  # noqa: F401
            import transformers
        except ImportError as exc:  # startup failure, not a request failure
            raise EngineError(f"transformers/torch unavailable: {exc}") from exc
        self._transformers = transformers
        self._bundles: dict[str, _HFBundle] = {}
        self._load()

    def _load(self):
        tf = self._transformers
        try:
            if "t5" in self.model_id.lower():
                tok = tf.AutoTokenizer.from_pretrained(self.model_id)
                model = tf.AutoModelForSeq2SeqLM.from_pretrained(self.model_id)
            elif "bert" in self.model_id.lower():
                tok = tf.AutoTokenizer.from_pretrained(self.model_id)
                model = tf.AutoModelForMaskedLM.from_pretrained(self.model_id)
            else:
                tok = tf.AutoTokenizer.from_pretrained(self.model_id)
                model = tf.AutoModelForCausalLM.from_pretrained(self.model_id)
        except Exception as exc:
            raise EngineError(f"cannot load model {self.model_id!r}: {exc}") from exc
        model.eval()
        self._bundles["main"] = _HFBundle(tokenizer=tok, model=model)

    def _generate(self, prompt: str, temperature: float | None = None) -> str:
        import torch

        bundle = self._bundles["main"]
        inputs = bundle.tokenizer(
            prompt, return_tensors="pt", truncation=True, max_length=self.max_input_tokens
        )
        kwargs = {"max_new_tokens": 64}
        if temperature:
            kwargs.update(do_sample=True, temperature=temperature)
        else:
            kwargs.update(do_sample=False, num_beams=1)
        with self._decode_lock:
            torch.manual_seed(self.seed)
            with torch.no_grad():
                output = bundle.model.generate(**inputs, **kwargs)
        text = bundle.tokenizer.decode(output[0], skip_special_tokens=True)
        return text.strip()

    def qg_ans(self, context: str, answer: str, temperature: float | None = None) -> str:
        text = self._generate(f"answer: {answer}  context: {context}", temperature)
        return text if text.endswith("?") else text + "?"

    def qg_ent(self, context: str, entity: str,
               temperature: float | None = None) -> tuple[str, str]:
        text = self._generate(f"entity: {entity}  context: {context}", temperature)
        question = text if text.endswith("?") else text + "?"
        # answer must be a context span; take the longest generated span found there
        answer = ""
        for token in sorted(text.split(), key=len, reverse=True):
            if token and token in context and token != entity:
                answer = token
                break
        if not answer:
            answer = context.split()[-1].strip(".?!,")
        return question, answer

    def describe(self, row: str, entity: str, temperature: float | None = None) -> str:
        text = self._generate(row, temperature)
        sentence = _sentences(text)[0].strip()
        return sentence if sentence.endswith(".") else sentence + "."

    def fill_mask(self, text: str, hint: str) -> str:
        import torch

        bundle = self._bundles["main"]
        mask_token = bundle.tokenizer.mask_token
        if mask_token is None:
            raise EngineError(f"{self.model_id!r} has no mask token")
        encoded = bundle.tokenizer(
            text.replace("[MASK]", mask_token), return_tensors="pt",
            truncation=True, max_length=self.max_input_tokens,
        )
        with torch.no_grad():
            logits = bundle.model(**encoded).logits
        mask_positions = (encoded["input_ids"][0] == bundle.tokenizer.mask_token_id).nonzero()
        if len(mask_positions) != 1:
            raise EngineError("input must contain exactly one mask token")
        best = logits[0, mask_positions[0].item()].argmax().item()
        return bundle.tokenizer.decode([best]).strip()

    def perplexity(self, text: str) -> float:
        import torch

        bundle = self._bundles["main"]
        encoded = bundle.tokenizer(
            text, return_tensors="pt", truncation=True, max_length=self.max_input_tokens
        )
        with torch.no_grad():
            out = bundle.model(**encoded, labels=encoded["input_ids"])
        return float(math.exp(out.loss.item()))

    def qdmr2q(self, steps: list[str], temperature: float | None = None) -> str:
        text = self._generate("translate decomposition: " + " ; ".join(steps), temperature)
        return text if text.endswith("?") else text + "?"


def build_engine(spec: str, seed: int, max_input_tokens: int):
    if spec == "heuristic":
        return HeuristicEngine(seed=seed)
    if spec.startswith("hf:"):
        return TransformersEngine(spec[3:], seed=seed, max_input_tokens=max_input_tokens)
    raise EngineError(f"unknown engine spec {spec!r}")
