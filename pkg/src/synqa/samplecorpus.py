"""Seeded generator of small bracketed treebank files.

Produces simple English-like sentences over the usual constituency
conventions (function tags, traces, the occasional extra outer pair of
parentheses) so the pipeline can be exercised and demonstrated without
shipping a licensed corpus.  The construction mix is weighted so that
verb chains dominate and double-object clauses stay rare, matching the
skew real corpora show.
"""

from __future__ import annotations

import random
from typing import Optional

NAMES = ["John", "Mary", "Pierre", "Susan", "Tom", "Alice", "Peter", "Laura"]
NOUNS = ["board", "book", "report", "letter", "meeting", "plan", "garden",
         "shelf", "desk", "committee", "teacher", "writer", "dog", "house"]
ADJECTIVES = ["new", "old", "big", "red", "important", "quiet"]
ADVERBS = ["quickly", "slowly", "carefully", "quietly", "often"]
PREPOSITIONS = ["on", "in", "under", "near", "behind"]
MODALS = ["will", "may", "must", "can", "should"]
WEEKDAYS = ["Monday", "Tuesday", "Friday", "Sunday"]
PRONOUNS = ["me", "him", "her", "us", "them"]

# (base VB, past VBD, third person VBZ, participle VBN)
VERBS = [
    ("read", "read", "reads", "read"),
    ("see", "saw", "sees", "seen"),
    ("write", "wrote", "writes", "written"),
    ("join", "joined", "joins", "joined"),
    ("hide", "hid", "hides", "hidden"),
    ("make", "made", "makes", "made"),
    ("buy", "bought", "buys", "bought"),
    ("find", "found", "finds", "found"),
]
DITRANSITIVE = [
    ("give", "gave", "gives", "given"),
    ("send", "sent", "sends", "sent"),
    ("show", "showed", "shows", "shown"),
    ("offer", "offered", "offers", "offered"),
]
INTRANSITIVE = [
    ("sleep", "slept", "sleeps", "slept"),
    ("arrive", "arrived", "arrives", "arrived"),
    ("wait", "waited", "waits", "waited"),
]


def _leaf(tag: str, token: str) -> str:
    return f"({tag} {token})"


def _node(tag: str, *children: str) -> str:
    return f"({tag} " + " ".join(children) + ")"


class _SentenceBuilder:
    def __init__(self, rng: random.Random):
        self.rng = rng

    def name_np(self, tag: str = "NP") -> str:
        return _node(tag, _leaf("NNP", self.rng.choice(NAMES)))

    def det_np(self, tag: str = "NP", adjective: Optional[bool] = None) -> str:
        noun = self.rng.choice(NOUNS)
        parts = [_leaf("DT", "the")]
        use_adj = self.rng.random() < 0.3 if adjective is None else adjective
        if use_adj:
            parts.append(_leaf("JJ", self.rng.choice(ADJECTIVES)))
        parts.append(_leaf("NN", noun))
        return _node(tag, *parts)

    def subject(self) -> str:
        return (self.name_np("NP-SBJ") if self.rng.random() < 0.6
                else self.det_np("NP-SBJ"))

    def simple_object(self) -> str:
        return self.det_np() if self.rng.random() < 0.7 else self.name_np()

    def adverb(self) -> str:
        return _node("ADVP", _leaf("RB", self.rng.choice(ADVERBS)))

    def pp(self, tag: str = "PP") -> str:
        return _node(tag, _leaf("IN", self.rng.choice(PREPOSITIONS)), self.det_np())

    def pp_temporal(self) -> str:
        return _node("PP-TMP", _leaf("IN", "on"),
                     _node("NP", _leaf("NNP", self.rng.choice(WEEKDAYS))))

    def relative_np(self) -> str:
        """A post-modified noun phrase: relative clause or participle."""
        head = self.det_np()
        r = self.rng.random()
        if r < 0.5:
            verb = self.rng.choice(VERBS)
            inner = _node("S",
                          _node("NP-SBJ", _leaf("-NONE-", "*T*-1")),
                          _node("VP", _leaf("VBD", verb[1]), self.simple_object()))
            modifier = _node("SBAR", _node("WHNP-1", _leaf("WDT", "that")), inner)
        elif r < 0.75:
            verb = self.rng.choice(VERBS)
            inner = _node("S",
                          self.name_np("NP-SBJ"),
                          _node("VP", _leaf("VBD", verb[1]),
                                _node("NP", _leaf("-NONE-", "*T*-1"))))
            modifier = _node("SBAR", _node("WHNP-1", _leaf("WDT", "that")), inner)
        else:
            verb = self.rng.choice(VERBS)
            modifier = _node("VP", _leaf("VBN", verb[3]), self.pp())
        return _node("NP", head, modifier)

    def verb_phrase(self) -> str:
        kind = self.rng.choices(
            ["transitive", "copula", "ditransitive", "relative", "coordination",
             "ppa_verb", "ppa_noun", "adverbial", "intransitive", "clausal"],
            weights=[24, 12, 3, 10, 8, 7, 7, 14, 9, 6],
        )[0]
        verb = self.rng.choice(VERBS)
        modal = self.rng.random() < 0.4

        if kind == "transitive":
            core = _node("VP", _leaf("VB" if modal else "VBD",
                                     verb[0] if modal else verb[1]),
                         self.simple_object())
        elif kind == "copula":
            predicate = (self.det_np("NP-PRD") if self.rng.random() < 0.6 else
                         _node("ADJP-PRD", _leaf("JJ", self.rng.choice(ADJECTIVES))))
            core = _node("VP", _leaf("VBZ", "is"), predicate)
            modal = False
        elif kind == "ditransitive":
            verb = self.rng.choice(DITRANSITIVE)
            core = _node("VP", _leaf("VB" if modal else "VBD",
                                     verb[0] if modal else verb[1]),
                         _node("NP", _leaf("PRP", self.rng.choice(PRONOUNS))),
                         self.det_np())
        elif kind == "relative":
            core = _node("VP", _leaf("VB" if modal else "VBD",
                                     verb[0] if modal else verb[1]),
                         self.relative_np())
        elif kind == "coordination":
            if self.rng.random() < 0.5:
                obj = _node("NP", self.det_np(), _leaf("CC", "and"), self.det_np())
                core = _node("VP", _leaf("VB" if modal else "VBD",
                                         verb[0] if modal else verb[1]), obj)
            else:
                second = self.rng.choice(VERBS)
                core = _node("VP",
                             _node("VP", _leaf("VBD", verb[1]), self.simple_object()),
                             _leaf("CC", "and"),
                             _node("VP", _leaf("VBD", second[1]), self.simple_object()))
                modal = False
        elif kind == "ppa_verb":
            core = _node("VP", _leaf("VB" if modal else "VBD",
                                     verb[0] if modal else verb[1]),
                         self.simple_object(), self.pp())
        elif kind == "ppa_noun":
            obj = _node("NP", self.det_np(adjective=False), self.pp())
            core = _node("VP", _leaf("VB" if modal else "VBD",
                                     verb[0] if modal else verb[1]), obj)
        elif kind == "adverbial":
            extras = [self.adverb() if self.rng.random() < 0.6 else self.pp_temporal()]
            core = _node("VP", _leaf("VB" if modal else "VBD",
                                     verb[0] if modal else verb[1]),
                         self.simple_object(), *extras)
        elif kind == "intransitive":
            verb = self.rng.choice(INTRANSITIVE)
            parts = [_leaf("VB" if modal else "VBD", verb[0] if modal else verb[1])]
            if self.rng.random() < 0.5:
                parts.append(self.adverb())
            core = _node("VP", *parts)
        else:  # clausal complement
            inner_verb = self.rng.choice(VERBS)
            clause = _node("S",
                           _node("NP-SBJ", _leaf("-NONE-", "*")),
                           _node("VP", _leaf("TO", "to"),
                                 _node("VP", _leaf("VB", inner_verb[0]),
                                       self.simple_object())))
            core = _node("VP", _leaf("VBD", "tried"), clause)
            modal = False

        if modal:
            return _node("VP", _leaf("MD", self.rng.choice(MODALS)), core)
        return core

    def sentence(self) -> str:
        if self.rng.random() < 0.03:
            verb = self.rng.choice(VERBS)
            body = _node("S", _node("VP", _leaf("VB", verb[0]), self.simple_object()),
                         _leaf(".", "."))
        else:
            body = _node("S", self.subject(), self.verb_phrase(), _leaf(".", "."))
        return f"( {body} )"


def build_corpus(n_sentences: int, seed: int = 0) -> str:
    """Bracketed text with one wrapped tree per line."""
    rng = random.Random(seed)
    builder = _SentenceBuilder(rng)
    return "\n".join(builder.sentence() for _ in range(n_sentences)) + "\n"
