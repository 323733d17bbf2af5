"""Turn pattern matches into normalized syntactic facts.

Nine knowledge points are extracted: grammatical subject (GS), subject
complement (SC), direct object (DO), indirect object (IO), main verb
phrase (MVP), adjectival modifier (ADJ), adverbial modifier (ADV),
coordination (CO), and prepositional phrase attachment (PPA).  Each fact
records the governing anchor, the gold answer span, the answer's
syntactic category, and knowledge-point-specific extras.  Sentences or
nodes matching no rule contribute nothing; a diagnostics counter keeps
the skip totals auditable.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .treebank import Sentence, TreeNode, phrase_text
from .patterns import MatchBinding, PatternRuleSet, match_rule

Span = tuple[int, int]


class KnowledgePoint(str, enum.Enum):
    GS = "GS"
    SC = "SC"
    DO = "DO"
    IO = "IO"
    MVP = "MVP"
    ADJ = "ADJ"
    ADV = "ADV"
    CO = "CO"
    PPA = "PPA"


KP_ORDER = list(KnowledgePoint)

ROLE_NAMES = {
    KnowledgePoint.GS: "grammatical subject",
    KnowledgePoint.SC: "subject complement",
    KnowledgePoint.DO: "direct object",
    KnowledgePoint.IO: "indirect object",
    KnowledgePoint.MVP: "main verb phrase",
    KnowledgePoint.ADJ: "adjectival modifier",
    KnowledgePoint.ADV: "adverbial modifier",
    KnowledgePoint.CO: "coordination",
    KnowledgePoint.PPA: "prepositional phrase attachment",
}


@dataclass(frozen=True)
class SyntacticFact:
    """One extracted (knowledge point, anchor, answer) tuple.

    ``anchor_text`` and ``answer_text`` are stored explicitly because a
    verb chain is not always a contiguous span ("will quickly join" has
    the chain "will join"); for single-node anchors and answers they
    equal the phrase text of the corresponding span.
    """

    sentence_id: str
    kp: KnowledgePoint
    anchor_span: Span
    anchor_text: str
    answer_span: Span
    answer_text: str
    answer_category: str
    extras: dict = field(default_factory=dict)

    @property
    def key(self) -> tuple:
        return (self.sentence_id, self.kp.value, self.anchor_span, self.answer_span)


@dataclass
class ExtractionDiagnostics:
    matched: Counter = field(default_factory=Counter)
    skipped: Counter = field(default_factory=Counter)

    def match(self, kp: KnowledgePoint) -> None:
        self.matched[kp.value] += 1

    def skip(self, kp: KnowledgePoint, reason: str) -> None:
        self.skipped[f"{kp.value}:{reason}"] += 1


# ---------------------------------------------------------------------------
# Answer categories

_CATEGORY_NAMES = {
    "NP": "noun phrase",
    "VP": "verb phrase",
    "PP": "prepositional phrase",
    "ADJP": "adjective phrase",
    "ADVP": "adverb phrase",
    "S": "clause",
    "SINV": "inverted clause",
    "SQ": "question clause",
    "SBARQ": "question clause",
    "RRC": "reduced relative clause",
    "WHNP": "noun phrase",
    "NN": "noun",
    "NNS": "noun",
    "NNP": "noun",
    "NNPS": "noun",
    "PRP": "pronoun",
    "PRP$": "possessive pronoun",
    "VB": "verb",
    "VBD": "verb",
    "VBG": "verb",
    "VBN": "verb",
    "VBP": "verb",
    "VBZ": "verb",
    "MD": "modal verb",
    "JJ": "adjective",
    "JJR": "adjective",
    "JJS": "adjective",
    "RB": "adverb",
    "RBR": "adverb",
    "RBS": "adverb",
    "CD": "number",
    "DT": "determiner",
    "IN": "preposition",
    "CC": "conjunction",
}

VERB_CHAIN_CATEGORY = "verb phrase"


def answer_category(node: TreeNode) -> str:
    """Human-readable category of a constituent; unmapped labels pass through."""
    cat = node.label.category
    if cat == "SBAR":
        first = next(node.leaves(), None)
        if first is not None:
            word = (first.token or "").lower()
            if word in ("that", "whether", "if"):
                return f"{word}-clause"
            if first.label.category.startswith("W"):
                return "relative clause"
        return "subordinate clause"
    return _CATEGORY_NAMES.get(cat, cat)


# ---------------------------------------------------------------------------
# Extraction

def _chain_spans(chain: Iterable[TreeNode]) -> list[list[int]]:
    return [list(leaf.span) for leaf in chain]


def _chain_text(chain: Iterable[TreeNode]) -> str:
    return " ".join(leaf.token or "" for leaf in chain)


def _chain_hull(chain: list[TreeNode]) -> Span:
    return (chain[0].span[0], chain[-1].span[1])


def _parent_map(root: TreeNode) -> dict[int, TreeNode]:
    parents: dict[int, TreeNode] = {}
    for node in root.descendants():
        for child in node.children:
            parents[id(child)] = node
    return parents


def _mvp_chain_at(rules: PatternRuleSet, node: TreeNode) -> Optional[list[TreeNode]]:
    """Longest verb chain of the subtree rooted exactly at ``node``."""
    best: Optional[list[TreeNode]] = None
    for binding in match_rule(rules, KnowledgePoint.MVP.value, node):
        if binding.node is not node:
            continue
        if best is None or len(binding.chain) > len(best):
            best = list(binding.chain)
    return best


def _governing_chain(rules: PatternRuleSet, node: TreeNode,
                     parents: dict[int, TreeNode]) -> Optional[list[TreeNode]]:
    """Verb chain of the clause containing ``node`` (a VP or S)."""
    if node.label.category == "VP":
        top = node
        while True:
            parent = parents.get(id(top))
            if parent is None or parent.label.category != "VP":
                break
            top = parent
        return _mvp_chain_at(rules, top)
    for child in node.children:
        if child.label.category == "VP":
            return _mvp_chain_at(rules, child)
    return None


_SEPARATORS = {"CC", "CONJP", ",", ";", ":", ".", "``", "''", "-LRB-", "-RRB-"}


def extract_facts(sentence: Sentence, rules: PatternRuleSet,
                  diagnostics: Optional[ExtractionDiagnostics] = None,
                  ) -> list[SyntacticFact]:
    """Extract all knowledge-point facts from one (already stripped) sentence."""
    diag = diagnostics if diagnostics is not None else ExtractionDiagnostics()
    parents = _parent_map(sentence.root)
    facts: list[SyntacticFact] = []

    def node_fact(kp: KnowledgePoint, anchor_span: Span, anchor_text: str,
                  answer: TreeNode, extras: Optional[dict] = None) -> SyntacticFact:
        return SyntacticFact(
            sentence_id=sentence.id,
            kp=kp,
            anchor_span=anchor_span,
            anchor_text=anchor_text,
            answer_span=answer.span,
            answer_text=phrase_text(sentence, answer.span),
            answer_category=answer_category(answer),
            extras=extras or {},
        )

    def chain_anchored(kp: KnowledgePoint, chain: list[TreeNode], answer: TreeNode,
                       extras: Optional[dict] = None) -> SyntacticFact:
        extras = dict(extras or {})
        extras["chain"] = _chain_spans(chain)
        return node_fact(kp, _chain_hull(chain), _chain_text(chain), answer, extras)

    def bindings(kp: KnowledgePoint) -> list[MatchBinding]:
        return match_rule(rules, kp.value, sentence.root)

    # GS: answer is the SBJ-tagged child; the anchor is the verb chain of
    # the sibling VP, so subjects of chains no rule can follow are skipped.
    for b in bindings(KnowledgePoint.GS):
        chain = _mvp_chain_at(rules, b.captures["VP"])
        if chain is None:
            diag.skip(KnowledgePoint.GS, "no-verb-chain")
            continue
        facts.append(chain_anchored(KnowledgePoint.GS, chain, b.captures["GS"]))

    for kp, cap in ((KnowledgePoint.SC, "SC"), (KnowledgePoint.DO, "DO")):
        for b in bindings(kp):
            facts.append(chain_anchored(kp, list(b.chain), b.captures[cap]))

    # IO: the double-object rule yields both the indirect and the direct
    # object of the same chain.
    for b in bindings(KnowledgePoint.IO):
        chain = list(b.chain)
        facts.append(chain_anchored(KnowledgePoint.IO, chain, b.captures["IO"]))
        facts.append(chain_anchored(KnowledgePoint.DO, chain, b.captures["DO"]))

    # MVP: keep the deepest chain per matched node.
    best_chain: dict[int, list[TreeNode]] = {}
    order: list[TreeNode] = []
    for b in bindings(KnowledgePoint.MVP):
        prev = best_chain.get(id(b.node))
        if prev is None:
            order.append(b.node)
            best_chain[id(b.node)] = list(b.chain)
        elif len(b.chain) > len(prev):
            best_chain[id(b.node)] = list(b.chain)
    for node in order:
        chain = best_chain[id(node)]
        facts.append(SyntacticFact(
            sentence_id=sentence.id,
            kp=KnowledgePoint.MVP,
            anchor_span=_chain_hull(chain),
            anchor_text=_chain_text(chain),
            answer_span=_chain_hull(chain),
            answer_text=_chain_text(chain),
            answer_category=VERB_CHAIN_CATEGORY,
            extras={"chain": _chain_spans(chain)},
        ))

    for b in bindings(KnowledgePoint.ADJ):
        head = b.captures["head"]
        facts.append(node_fact(
            KnowledgePoint.ADJ, head.span, phrase_text(sentence, head.span),
            b.captures["ADJ"]))

    for b in bindings(KnowledgePoint.ADV):
        chain = _governing_chain(rules, b.node, parents)
        if chain is None:
            diag.skip(KnowledgePoint.ADV, "no-verb-chain")
            continue
        facts.append(chain_anchored(KnowledgePoint.ADV, chain, b.captures["ADV"]))

    # CO: the rule only finds a conjunction; conjuncthood (two or more
    # like-category siblings) is verified here.  The answer is the last
    # conjunct and the question quotes the first, so the anchor text is
    # the first conjunct while the anchor span stays on the conjunction.
    seen_co: set[int] = set()
    for b in bindings(KnowledgePoint.CO):
        if id(b.node) in seen_co:
            continue
        seen_co.add(id(b.node))
        conjuncts = [c for c in b.node.children if c.label.category not in _SEPARATORS]
        categories = {c.label.category for c in conjuncts}
        if len(conjuncts) < 2 or len(categories) != 1:
            diag.skip(KnowledgePoint.CO, "unlike-conjuncts")
            continue
        cc = next(c for c in b.node.children if c.label.category in ("CC", "CONJP"))
        first, last = conjuncts[0], conjuncts[-1]
        facts.append(SyntacticFact(
            sentence_id=sentence.id,
            kp=KnowledgePoint.CO,
            anchor_span=cc.span,
            anchor_text=phrase_text(sentence, first.span),
            answer_span=last.span,
            answer_text=phrase_text(sentence, last.span),
            answer_category=answer_category(last),
            extras={"conjuncts": [list(c.span) for c in conjuncts],
                    "conjunction": list(cc.span)},
        ))

    # PPA: the anchor is the prepositional phrase, the answer is its
    # attachment site (the head noun phrase, or the clause's verb chain).
    for b in bindings(KnowledgePoint.PPA):
        pp = b.captures["PPA"]
        pp_text = phrase_text(sentence, pp.span)
        if "head" in b.captures:
            head = b.captures["head"]
            facts.append(SyntacticFact(
                sentence_id=sentence.id,
                kp=KnowledgePoint.PPA,
                anchor_span=pp.span,
                anchor_text=pp_text,
                answer_span=head.span,
                answer_text=phrase_text(sentence, head.span),
                answer_category=answer_category(head),
                extras={"site": "noun"},
            ))
        else:
            chain = _governing_chain(rules, b.node, parents)
            if chain is None:
                diag.skip(KnowledgePoint.PPA, "no-verb-chain")
                continue
            facts.append(SyntacticFact(
                sentence_id=sentence.id,
                kp=KnowledgePoint.PPA,
                anchor_span=pp.span,
                anchor_text=pp_text,
                answer_span=_chain_hull(chain),
                answer_text=_chain_text(chain),
                answer_category=VERB_CHAIN_CATEGORY,
                extras={"site": "verb", "chain": _chain_spans(chain)},
            ))

    unique: dict[tuple, SyntacticFact] = {}
    for fact in facts:
        unique.setdefault(fact.key, fact)
    out = sorted(unique.values(),
                 key=lambda f: (KP_ORDER.index(f.kp), f.anchor_span, f.answer_span))
    for fact in out:
        diag.match(fact.kp)
    return out


# ---------------------------------------------------------------------------
# Serialization

FACT_SCHEMA_VERSION = 1


def fact_to_json(fact: SyntacticFact, tree: Optional[str] = None) -> dict:
    row = {
        "v": FACT_SCHEMA_VERSION,
        "sentence_id": fact.sentence_id,
        "kp": fact.kp.value,
        "anchor_span": list(fact.anchor_span),
        "anchor_text": fact.anchor_text,
        "answer_span": list(fact.answer_span),
        "answer_text": fact.answer_text,
        "answer_category": fact.answer_category,
        "extras": fact.extras,
    }
    if tree is not None:
        row["tree"] = tree
    return row


def fact_from_json(row: dict) -> SyntacticFact:
    return SyntacticFact(
        sentence_id=row["sentence_id"],
        kp=KnowledgePoint(row["kp"]),
        anchor_span=tuple(row["anchor_span"]),
        anchor_text=row["anchor_text"],
        answer_span=tuple(row["answer_span"]),
        answer_text=row["answer_text"],
        answer_category=row["answer_category"],
        extras=row.get("extras", {}),
    )


# ---------------------------------------------------------------------------
# Distribution statistics

@dataclass
class DistributionReport:
    """Question (or fact) counts per knowledge point and question type."""

    counts: dict[str, Counter]
    total: int
    countable_total: int

    def ratio(self, kp: str) -> float:
        if self.total == 0:
            return 0.0
        return 100.0 * sum(self.counts[kp].values()) / self.total

    def render(self) -> str:
        cols = ["TF", "MC", "FITB"]
        lines = [f"{'kp':<5} {'#TF':>8} {'#MC':>8} {'#FITB':>8} {'#total':>8} {'ratio%':>7}"]
        for kp in KP_ORDER:
            row = self.counts[kp.value]
            total = sum(row.values())
            lines.append(
                f"{kp.value:<5} "
                + " ".join(f"{row.get(c, 0):>8}" for c in cols)
                + f" {total:>8} {self.ratio(kp.value):>7.2f}"
            )
        lines.append(f"total questions: {self.countable_total}")
        return "\n".join(lines)


def dataset_stats(items: Iterable) -> DistributionReport:
    """Tabulate per-(kp, question type) counts.

    True/false items of GS, SC, DO, and IO double as main-verb-phrase
    items, so they are counted in the MVP row as well but excluded from
    the overall question total (mirroring how the reuse is reported).
    Facts, which have no question type, are tallied under a pseudo-type.
    """
    counts: dict[str, Counter] = {kp.value: Counter() for kp in KP_ORDER}
    total = 0
    countable = 0
    for item in items:
        kp = item.kp.value if isinstance(item.kp, KnowledgePoint) else str(item.kp)
        qtype = getattr(item, "qtype", None)
        if qtype is None:
            counts[kp]["facts"] += 1
            total += 1
            countable += 1
            continue
        qtype = qtype.value if hasattr(qtype, "value") else str(qtype)
        counts[kp][qtype] += 1
        total += 1
        countable += 1
        meta = getattr(item, "meta", None) or {}
        if qtype == "TF" and meta.get("mvp_reuse"):
            counts[KnowledgePoint.MVP.value]["TF"] += 1
            total += 1
    return DistributionReport(counts=counts, total=total, countable_total=countable)
