"""Answer parsing, per-question metrics, and scoreboard aggregation.

Free-text answers are normalized with a Treebank-convention word
tokenizer (contractions and punctuation split off), punctuation-only
tokens are discarded, and comparison is case-insensitive.  Fill-in-the-
blank items are scored with exact accuracy and a strict ordered F1 in
which matched tokens must appear in the same relative order as the
gold phrase (longest common subsequence).  The overall score is

    OA = (TF + MC + (FITB_acc + FITB_F1) / 2) / 3

computed in double precision and rounded only for display.
"""

from __future__ import annotations

import enum
import re
import string
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .extract import KP_ORDER, KnowledgePoint
from .qgen import Question, QuestionType


class IntegrityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Tokenization

_STARTING_QUOTES = [
    (re.compile(r"^\""), r"``"),
    (re.compile(r"(``)"), r" \1 "),
    (re.compile(r"([ (\[{<])(\"|'{2})"), r"\1 `` "),
]

_PUNCTUATION = [
    (re.compile(r"([:,])([^\d])"), r" \1 \2"),
    (re.compile(r"([:,])$"), r" \1 "),
    (re.compile(r"\.\.\."), r" ... "),
    (re.compile(r"[;@#$%&]"), r" \g<0> "),
    (re.compile(r"([^\.])(\.)([\]\)}>\"']*)\s*$"), r"\1 \2\3 "),
    (re.compile(r"[?!]"), r" \g<0> "),
    (re.compile(r"([^'])' "), r"\1 ' "),
]

_PARENS_BRACKETS = (re.compile(r"[\]\[(){}<>]"), r" \g<0> ")

_DOUBLE_DASHES = (re.compile(r"--"), r" -- ")

_ENDING_QUOTES = [
    (re.compile(r'"'), " '' "),
    (re.compile(r"(\S)('')"), r"\1 \2 "),
    (re.compile(r"([^' ])('[sSmMdD]|') "), r"\1 \2 "),
    (re.compile(r"([^' ])('ll|'LL|'re|'RE|'ve|'VE|n't|N'T) "), r"\1 \2 "),
]

_CONTRACTIONS = [
    re.compile(r"(?i)\b(can)(not)\b"),
    re.compile(r"(?i)\b(d)('ye)\b"),
    re.compile(r"(?i)\b(gim)(me)\b"),
    re.compile(r"(?i)\b(gon)(na)\b"),
    re.compile(r"(?i)\b(got)(ta)\b"),
    re.compile(r"(?i)\b(lem)(me)\b"),
    re.compile(r"(?i)\b(more)('n)\b"),
    re.compile(r"(?i)\b(wan)(na)\b"),
]


def treebank_tokenize(text: str) -> list[str]:
    """Split text into words by the usual Treebank conventions."""
    for pattern, repl in _STARTING_QUOTES:
        text = pattern.sub(repl, text)
    for pattern, repl in _PUNCTUATION:
        text = pattern.sub(repl, text)
    text = _PARENS_BRACKETS[0].sub(_PARENS_BRACKETS[1], text)
    text = _DOUBLE_DASHES[0].sub(_DOUBLE_DASHES[1], text)
    text = " " + text + " "
    for pattern, repl in _ENDING_QUOTES:
        text = pattern.sub(repl, text)
    for pattern in _CONTRACTIONS:
        text = pattern.sub(r" \1 \2 ", text)
    return text.split()


_PUNCT_CHARS = set(string.punctuation) | set("—–‘’“”…`")


def normalize_tokens(text: str) -> list[str]:
    """Tokenize, drop punctuation-only tokens, and case-fold."""
    return [tok.casefold() for tok in treebank_tokenize(text)
            if not all(ch in _PUNCT_CHARS for ch in tok)]


# ---------------------------------------------------------------------------
# Per-question metrics

def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            curr.append(prev[j - 1] + 1 if x == y else max(curr[j - 1], prev[j]))
        prev = curr
    return prev[-1]


def fitb_f1(gold: Sequence[str], pred: Sequence[str]) -> float:
    """Strict ordered token F1: matches must follow the gold token order."""
    m = _lcs_length(gold, pred)
    if m == 0:
        return 0.0
    precision = m / len(pred)
    recall = m / len(gold)
    return 2 * precision * recall / (precision + recall)


def fitb_acc(gold: Sequence[str], pred: Sequence[str]) -> int:
    return 1 if list(gold) == list(pred) else 0


class ParseStatus(str, enum.Enum):
    CLEAN = "Clean"
    SALVAGED = "Salvaged"
    UNPARSEABLE = "Unparseable"


@dataclass(frozen=True)
class ParsedAnswer:
    qtype: QuestionType
    value: object  # bool | option letter | free text; None when unparseable
    parse_status: ParseStatus


_TF_TOKEN = re.compile(r"(?i)\b(true|false)\b")
_MC_TOKEN = re.compile(r"\b([A-Da-d])(?=[.):,;!?\s]|$)")


def _clean_prefix(raw: str, start: int) -> bool:
    return not any(ch.isalnum() for ch in raw[:start])


def parse_answer(qtype: QuestionType, raw: str) -> ParsedAnswer:
    """Pull a usable answer out of free-form model output.

    TF: the first standalone true/false token wins.  MC: the first
    standalone letter A-D (optionally followed by ``.`` or ``)``).
    FITB: the response trimmed of an echoed "Answer:" prefix and
    surrounding quotes.  Anything unrecognizable is Unparseable and
    scores zero.
    """
    if qtype is QuestionType.TF:
        m = _TF_TOKEN.search(raw)
        if not m:
            return ParsedAnswer(qtype, None, ParseStatus.UNPARSEABLE)
        status = ParseStatus.CLEAN if _clean_prefix(raw, m.start()) else ParseStatus.SALVAGED
        return ParsedAnswer(qtype, m.group(1).lower() == "true", status)
    if qtype is QuestionType.MC:
        m = _MC_TOKEN.search(raw)
        if not m:
            return ParsedAnswer(qtype, None, ParseStatus.UNPARSEABLE)
        status = ParseStatus.CLEAN if _clean_prefix(raw, m.start()) else ParseStatus.SALVAGED
        return ParsedAnswer(qtype, m.group(1).upper(), status)
    # FITB
    text = raw.strip()
    if text:
        text = text.splitlines()[0].strip()
    trimmed = re.sub(r"(?i)^(the\s+answer\s+is|answer)\s*[:\-]?\s*", "", text)
    while len(trimmed) >= 2 and trimmed[0] + trimmed[-1] in ('""', "''", "“”", "‘’"):
        trimmed = trimmed[1:-1].strip()
    if not trimmed:
        return ParsedAnswer(qtype, None, ParseStatus.UNPARSEABLE)
    status = ParseStatus.CLEAN if trimmed == raw.strip() else ParseStatus.SALVAGED
    return ParsedAnswer(qtype, trimmed, status)


def overall_accuracy(tf: float, mc: float, fitb_accuracy: float, fitb_f1_score: float,
                     ) -> float:
    """The aggregate score: mean of TF, MC, and the mean of the FITB metrics."""
    for name, value in (("tf", tf), ("mc", mc), ("fitb_acc", fitb_accuracy),
                        ("fitb_f1", fitb_f1_score)):
        if not 0.0 <= value <= 100.0:
            raise ValueError(f"{name} out of range: {value}")
    return (tf + mc + (fitb_accuracy + fitb_f1_score) / 2.0) / 3.0


# ---------------------------------------------------------------------------
# Aggregation

@dataclass
class Scoreboard:
    tf_acc: Optional[float] = None
    mc_acc: Optional[float] = None
    fitb_acc: Optional[float] = None
    fitb_f1: Optional[float] = None
    oa: Optional[float] = None
    n: dict = field(default_factory=dict)
    breakdown: dict = field(default_factory=dict)
    per_seed: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        row = {
            "tf_acc": self.tf_acc,
            "mc_acc": self.mc_acc,
            "fitb_acc": self.fitb_acc,
            "fitb_f1": self.fitb_f1,
            "oa": self.oa,
            "n": dict(self.n),
        }
        if self.breakdown:
            row["breakdown"] = {kp: b.to_json() for kp, b in self.breakdown.items()}
        if self.per_seed:
            row["per_seed"] = {str(s): b.to_json() for s, b in self.per_seed.items()}
        return row


class _Cells:
    def __init__(self) -> None:
        self.tf = [0, 0]      # correct, total
        self.mc = [0, 0]
        self.fitb = [0.0, 0.0, 0]  # acc sum, f1 sum, total

    def add_tf(self, correct: bool) -> None:
        self.tf[0] += int(correct)
        self.tf[1] += 1

    def add_mc(self, correct: bool) -> None:
        self.mc[0] += int(correct)
        self.mc[1] += 1

    def add_fitb(self, acc: int, f1: float) -> None:
        self.fitb[0] += acc
        self.fitb[1] += f1
        self.fitb[2] += 1

    def board(self) -> Scoreboard:
        board = Scoreboard()
        if self.tf[1]:
            board.tf_acc = 100.0 * self.tf[0] / self.tf[1]
        if self.mc[1]:
            board.mc_acc = 100.0 * self.mc[0] / self.mc[1]
        if self.fitb[2]:
            board.fitb_acc = 100.0 * self.fitb[0] / self.fitb[2]
            board.fitb_f1 = 100.0 * self.fitb[1] / self.fitb[2]
        if board.tf_acc is not None and board.mc_acc is not None \
                and board.fitb_acc is not None:
            board.oa = overall_accuracy(board.tf_acc, board.mc_acc,
                                        board.fitb_acc, board.fitb_f1)
        board.n = {"TF": self.tf[1], "MC": self.mc[1], "FITB": self.fitb[2]}
        return board


def score_question(question: Question, answer: ParsedAnswer) -> dict:
    """Metric contributions of one answered question."""
    if question.qtype is QuestionType.TF:
        return {"correct": answer.value is not None and answer.value == question.gold}
    if question.qtype is QuestionType.MC:
        return {"correct": answer.value is not None and answer.value == question.gold}
    gold = normalize_tokens(str(question.gold))
    pred = normalize_tokens(str(answer.value)) if answer.value is not None else []
    return {"acc": fitb_acc(gold, pred), "f1": fitb_f1(gold, pred)}


def _single_seed_board(records: Sequence[tuple[Question, ParsedAnswer]]) -> Scoreboard:
    overall = _Cells()
    per_kp: dict[str, _Cells] = {}

    def kp_cells(kp: str) -> _Cells:
        return per_kp.setdefault(kp, _Cells())

    for question, answer in records:
        scores = score_question(question, answer)
        kp = question.kp.value
        if question.qtype is QuestionType.TF:
            overall.add_tf(scores["correct"])
            kp_cells(kp).add_tf(scores["correct"])
            if question.meta.get("mvp_reuse"):
                kp_cells(KnowledgePoint.MVP.value).add_tf(scores["correct"])
        elif question.qtype is QuestionType.MC:
            overall.add_mc(scores["correct"])
            kp_cells(kp).add_mc(scores["correct"])
        else:
            overall.add_fitb(scores["acc"], scores["f1"])
            kp_cells(kp).add_fitb(scores["acc"], scores["f1"])

    board = overall.board()
    board.breakdown = {kp.value: per_kp[kp.value].board()
                       for kp in KP_ORDER if kp.value in per_kp}
    return board


def _mean(values: list[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present or len(present) != len(values):
        return None
    return sum(present) / len(present)


def _mean_boards(boards: list[Scoreboard]) -> Scoreboard:
    out = Scoreboard(
        tf_acc=_mean([b.tf_acc for b in boards]),
        mc_acc=_mean([b.mc_acc for b in boards]),
        fitb_acc=_mean([b.fitb_acc for b in boards]),
        fitb_f1=_mean([b.fitb_f1 for b in boards]),
    )
    if out.tf_acc is not None and out.mc_acc is not None and out.fitb_acc is not None:
        out.oa = overall_accuracy(out.tf_acc, out.mc_acc, out.fitb_acc, out.fitb_f1)
    out.n = {
        key: sum(b.n.get(key, 0) for b in boards)
        for key in ("TF", "MC", "FITB")
    }
    return out


def aggregate(records: Iterable[tuple[Question, ParsedAnswer, int]],
              eval_questions: Optional[Mapping[str, Question]] = None) -> Scoreboard:
    """Per-seed scoreboards, arithmetic-meaned, with per-knowledge-point cells.

    Records are (question, parsed answer, seed) triples; when
    ``eval_questions`` is given, a record whose question id is unknown
    raises :class:`IntegrityError`.
    """
    by_seed: dict[int, list[tuple[Question, ParsedAnswer]]] = {}
    for question, answer, seed in records:
        if eval_questions is not None and question.id not in eval_questions:
            raise IntegrityError(f"record for unknown question {question.id!r}")
        by_seed.setdefault(seed, []).append((question, answer))
    if not by_seed:
        return Scoreboard(n={"TF": 0, "MC": 0, "FITB": 0})

    seed_boards = {
        seed: _single_seed_board(sorted(recs, key=lambda r: r[0].id))
        for seed, recs in sorted(by_seed.items())
    }
    board = _mean_boards(list(seed_boards.values()))
    kps = sorted({kp for b in seed_boards.values() for kp in b.breakdown},
                 key=lambda k: KP_ORDER.index(KnowledgePoint(k)))
    for kp in kps:
        kp_boards = [b.breakdown[kp] for b in seed_boards.values() if kp in b.breakdown]
        board.breakdown[kp] = _mean_boards(kp_boards)
    board.per_seed = seed_boards
    return board


# ---------------------------------------------------------------------------
# Reports

def _fmt(value: Optional[float]) -> str:
    return f"{value:.2f}" if value is not None else "-"


def render_report(board: Scoreboard, title: str = "overall") -> str:
    header = (f"{'':<10} {'TF':>8} {'MC':>8} {'FITB':>8} {'':>8} {'OA':>8}\n"
              f"{'':<10} {'Acc.':>8} {'Acc.':>8} {'Acc.':>8} {'F1':>8} {'':>8}")
    lines = [header]

    def row(name: str, b: Scoreboard) -> str:
        return (f"{name:<10} {_fmt(b.tf_acc):>8} {_fmt(b.mc_acc):>8} "
                f"{_fmt(b.fitb_acc):>8} {_fmt(b.fitb_f1):>8} {_fmt(b.oa):>8}")

    lines.append(row(title, board))
    for kp, sub in board.breakdown.items():
        lines.append(row(kp, sub))
    counts = board.n or {}
    lines.append("")
    lines.append("questions: " + ", ".join(f"{k}={counts.get(k, 0)}"
                                           for k in ("TF", "MC", "FITB")))
    return "\n".join(lines)


def report_csv_rows(board: Scoreboard) -> list[list[str]]:
    rows = [["scope", "tf_acc", "mc_acc", "fitb_acc", "fitb_f1", "oa"]]

    def fmt(b: Scoreboard, scope: str) -> list[str]:
        return [scope, _fmt(b.tf_acc), _fmt(b.mc_acc), _fmt(b.fitb_acc),
                _fmt(b.fitb_f1), _fmt(b.oa)]

    rows.append(fmt(board, "overall"))
    for kp, sub in board.breakdown.items():
        rows.append(fmt(sub, kp))
    return rows
