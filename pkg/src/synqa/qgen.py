"""Render syntactic facts into TF / MC / FITB questions.

Question wording comes from a template file with one entry per
(knowledge point, question type) pair and the placeholders {SENTENCE},
{ANCHOR}, {ANSWER}, and {ROLE}.  Multiple-choice items get three
distractors drawn from other constituents of the same sentence,
preferring the answer's syntactic category; true/false items come in
matched true/false pairs sharing a fact.  Generation is deterministic
under the seed.
"""

from __future__ import annotations

import dataclasses
import enum
import random
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .extract import KnowledgePoint, ROLE_NAMES, SyntacticFact, Span, answer_category
from .treebank import Sentence, phrase_text

BLANK = "_" * 12
MC_LETTERS = "ABCD"


class QuestionType(str, enum.Enum):
    TF = "TF"
    MC = "MC"
    FITB = "FITB"


class TemplateError(ValueError):
    pass


class DistractorShortfall(Exception):
    """Fewer admissible distractor spans than requested."""

    def __init__(self, available: int, requested: int):
        super().__init__(f"only {available} admissible distractors, need {requested}")
        self.available = available
        self.requested = requested


@dataclass(frozen=True)
class Question:
    id: str
    sentence_id: str
    sentence_text: str
    kp: KnowledgePoint
    qtype: QuestionType
    prompt: str
    gold: object  # bool for TF, option letter for MC, answer phrase for FITB
    options: Optional[tuple[str, ...]] = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class TemplateSet:
    templates: Mapping[tuple[str, str], str]

    def get(self, kp: KnowledgePoint, qtype: QuestionType) -> str:
        key = (kp.value, qtype.value)
        if key not in self.templates:
            raise TemplateError(f"no template for ({kp.value}, {qtype.value})")
        return self.templates[key]

    def require_all(self) -> None:
        for kp in KnowledgePoint:
            for qtype in QuestionType:
                self.get(kp, qtype)


_SECTION = re.compile(r"^\[([A-Z]+)\.([A-Z]+)\]\s*$")


def parse_templates(text: str) -> TemplateSet:
    """Parse ``[KP.QTYPE]`` sections; the body is the template line(s)."""
    templates: dict[tuple[str, str], str] = {}
    current: Optional[tuple[str, str]] = None
    body: list[str] = []

    def flush() -> None:
        if current is not None:
            value = "\n".join(body).strip()
            if not value:
                raise TemplateError(f"empty template for {current}")
            templates[current] = value

    for line in text.splitlines():
        if line.lstrip().startswith("#"):
            continue
        m = _SECTION.match(line.strip())
        if m:
            flush()
            current = (m.group(1), m.group(2))
            body = []
        elif current is not None:
            body.append(line)
        elif line.strip():
            raise TemplateError(f"content outside any section: {line.strip()!r}")
    flush()
    return TemplateSet(templates)


def load_templates(path: str) -> TemplateSet:
    with open(path, encoding="utf-8") as fh:
        return parse_templates(fh.read())


def render_template(template: str, *, sentence: str, anchor: str, answer: str,
                    role: str) -> str:
    out = template
    for key, value in (("{SENTENCE}", sentence), ("{ANCHOR}", anchor),
                       ("{ANSWER}", answer), ("{ROLE}", role)):
        out = out.replace(key, value)
    return out


# ---------------------------------------------------------------------------
# Distractors

@dataclass(frozen=True)
class DistractorCandidate:
    span: Span
    text: str
    category: str
    same_category: bool


def _normalized(text: str) -> str:
    return " ".join(text.split()).casefold()


def _is_contentful(text: str) -> bool:
    return any(ch.isalnum() for ch in text)


def select_distractors(fact: SyntacticFact, sentence: Sentence, n: int,
                       seed: int) -> list[DistractorCandidate]:
    """Pick ``n`` wrong-answer constituent spans from the fact's sentence.

    Same-category constituents are preferred and padded with other
    categories when they run out.  Spans token-identical to the gold,
    nested within it, or (for coordination facts) naming another conjunct
    are inadmissible.  Deterministic under the seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gold_start, gold_end = fact.answer_span
    gold_norm = _normalized(fact.answer_text)
    banned_spans = {tuple(span) for span in fact.extras.get("conjuncts", [])}

    same: list[DistractorCandidate] = []
    other: list[DistractorCandidate] = []
    seen_texts = {gold_norm}
    for node in sentence.root.descendants():
        start, end = node.span
        if start >= gold_start and end <= gold_end:
            continue
        if (start, end) in banned_spans:
            continue
        text = phrase_text(sentence, node.span)
        norm = _normalized(text)
        if norm in seen_texts or not _is_contentful(text):
            continue
        seen_texts.add(norm)
        category = answer_category(node)
        candidate = DistractorCandidate(
            span=node.span, text=text, category=category,
            same_category=category == fact.answer_category)
        (same if candidate.same_category else other).append(candidate)

    if len(same) + len(other) < n:
        raise DistractorShortfall(len(same) + len(other), n)
    rng = random.Random(f"{seed}|distractors|{fact.sentence_id}|{fact.kp.value}"
                        f"|{fact.anchor_span}|{fact.answer_span}")
    rng.shuffle(same)
    rng.shuffle(other)
    return (same + other)[:n]


# ---------------------------------------------------------------------------
# Question assembly

def _fact_base_id(fact: SyntacticFact) -> str:
    a, b = fact.anchor_span, fact.answer_span
    return f"{fact.sentence_id}:{fact.kp.value}:{a[0]}-{a[1]}:{b[0]}-{b[1]}"


def _capitalize(text: str) -> str:
    return text[0].upper() + text[1:] if text and text[0].islower() else text


def _fact_meta(fact: SyntacticFact, template_id: str) -> dict:
    return {
        "answer_category": fact.answer_category,
        "fact": {
            "sentence_id": fact.sentence_id,
            "kp": fact.kp.value,
            "anchor_span": list(fact.anchor_span),
            "answer_span": list(fact.answer_span),
        },
        "template": template_id,
    }


def _sentence_rendering(sentence: Sentence) -> str:
    return phrase_text(sentence, (0, len(sentence.tokens)))


def _constituent_phrases(sentence: Sentence) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()
    for node in sentence.root.descendants():
        text = phrase_text(sentence, node.span)
        if _is_contentful(text) and text not in seen:
            seen.add(text)
            out.append(text)
    return out


def make_statement(fact: SyntacticFact, sentence: Sentence, templates: TemplateSet,
                   asserted_text: str, truth: bool) -> Question:
    """One side of a true/false pair asserting ``asserted_text`` fills the role."""
    sentence_text = _sentence_rendering(sentence)
    template = templates.get(fact.kp, QuestionType.TF)
    prompt = render_template(
        template, sentence=sentence_text, anchor=fact.anchor_text,
        answer=asserted_text, role=ROLE_NAMES[fact.kp])
    base = _fact_base_id(fact)
    meta = _fact_meta(fact, f"{fact.kp.value}.TF")
    meta["pair_id"] = f"{base}:tf"
    meta["asserted"] = asserted_text
    if fact.kp in (KnowledgePoint.GS, KnowledgePoint.SC,
                   KnowledgePoint.DO, KnowledgePoint.IO):
        meta["mvp_reuse"] = True
    return Question(
        id=f"{base}:tf:{'t' if truth else 'f'}",
        sentence_id=fact.sentence_id,
        sentence_text=sentence_text,
        kp=fact.kp,
        qtype=QuestionType.TF,
        prompt=prompt,
        gold=truth,
        meta=meta,
    )


def make_false_statement(fact: SyntacticFact, distractor: DistractorCandidate,
                         sentence: Sentence, templates: TemplateSet) -> Question:
    question = make_statement(fact, sentence, templates, distractor.text, False)
    meta = dict(question.meta)
    meta["distractor"] = {
        "text": distractor.text,
        "category": distractor.category,
        "same_category": distractor.same_category,
    }
    return dataclasses.replace(question, meta=meta)


def generate_questions(facts: Sequence[SyntacticFact],
                       sentences: Mapping[str, Sentence],
                       templates: TemplateSet,
                       seed: int) -> list[Question]:
    """Render one FITB, one MC (given three distractors), and a TF pair per fact.

    Main-verb-phrase facts get no TF pair of their own: the TF items of
    GS, SC, DO, and IO are tagged for reuse under MVP at reporting time.
    """
    templates.require_all()
    questions: list[Question] = []
    for fact in facts:
        sentence = sentences[fact.sentence_id]
        sentence_text = _sentence_rendering(sentence)
        base = _fact_base_id(fact)
        role = ROLE_NAMES[fact.kp]

        fitb_prompt = render_template(
            templates.get(fact.kp, QuestionType.FITB), sentence=sentence_text,
            anchor=fact.anchor_text, answer=fact.answer_text, role=role)
        fitb_meta = _fact_meta(fact, f"{fact.kp.value}.FITB")
        fitb_meta["constituents"] = _constituent_phrases(sentence)
        questions.append(Question(
            id=f"{base}:fitb",
            sentence_id=fact.sentence_id,
            sentence_text=sentence_text,
            kp=fact.kp,
            qtype=QuestionType.FITB,
            prompt=fitb_prompt,
            gold=fact.answer_text,
            meta=fitb_meta,
        ))

        try:
            distractors = select_distractors(fact, sentence, 3, seed)
        except DistractorShortfall:
            distractors = None
        if distractors is not None:
            rng = random.Random(f"{seed}|mc-order|{base}")
            gold_index = rng.randrange(4)
            option_texts = [d.text for d in distractors]
            option_texts.insert(gold_index, fact.answer_text)
            mc_meta = _fact_meta(fact, f"{fact.kp.value}.MC")
            mc_meta["gold_span"] = list(fact.answer_span)
            mc_meta["distractors"] = [
                {"text": d.text, "category": d.category,
                 "same_category": d.same_category}
                for d in distractors
            ]
            questions.append(Question(
                id=f"{base}:mc",
                sentence_id=fact.sentence_id,
                sentence_text=sentence_text,
                kp=fact.kp,
                qtype=QuestionType.MC,
                prompt=render_template(
                    templates.get(fact.kp, QuestionType.MC), sentence=sentence_text,
                    anchor=fact.anchor_text, answer=fact.answer_text, role=role),
                gold=MC_LETTERS[gold_index],
                options=tuple(_capitalize(t) for t in option_texts),
                meta=mc_meta,
            ))

        if fact.kp is not KnowledgePoint.MVP:
            # The true statement is only emitted when a false twin exists,
            # keeping the true/false label prior balanced.
            try:
                false_pick = select_distractors(fact, sentence, 1, seed + 1)[0]
            except DistractorShortfall:
                false_pick = None
            if false_pick is not None:
                questions.append(make_statement(fact, sentence, templates,
                                                fact.answer_text, True))
                questions.append(make_false_statement(fact, false_pick,
                                                      sentence, templates))
    return questions


# ---------------------------------------------------------------------------
# Serialization

QUESTION_SCHEMA_VERSION = 1


def question_to_json(question: Question) -> dict:
    row = {
        "v": QUESTION_SCHEMA_VERSION,
        "id": question.id,
        "sentence_id": question.sentence_id,
        "sentence": question.sentence_text,
        "kp": question.kp.value,
        "qtype": question.qtype.value,
        "prompt": question.prompt,
        "gold": question.gold,
        "meta": question.meta,
    }
    if question.options is not None:
        row["options"] = list(question.options)
    return row


def question_from_json(row: dict) -> Question:
    options = row.get("options")
    return Question(
        id=row["id"],
        sentence_id=row["sentence_id"],
        sentence_text=row["sentence"],
        kp=KnowledgePoint(row["kp"]),
        qtype=QuestionType(row["qtype"]),
        prompt=row["prompt"],
        gold=row["gold"],
        options=tuple(options) if options is not None else None,
        meta=row.get("meta", {}),
    )
