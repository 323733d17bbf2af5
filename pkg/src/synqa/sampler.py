"""Balanced down-sampling of the question pool.

Questions are grouped by the (question type, knowledge point, answer
category) tuple; from every group up to ``k_eval`` questions go to the
evaluation set and up to ``k_exemplar`` of the remainder to the
disjoint exemplar set.  Strata are visited in sorted key order and all
randomness comes from one seeded generator, so identical inputs and
configuration reproduce identical sets byte for byte.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .qgen import Question

RNG_ALGORITHM = "mt19937"


@dataclass(frozen=True, order=True)
class StratumKey:
    qtype: str
    kp: str
    answer_category: str

    @staticmethod
    def of(question: Question) -> "StratumKey":
        return StratumKey(
            qtype=question.qtype.value,
            kp=question.kp.value,
            answer_category=str(question.meta.get("answer_category", "")),
        )

    def render(self) -> str:
        return f"{self.qtype}|{self.kp}|{self.answer_category}"


@dataclass(frozen=True)
class SampleConfig:
    k_eval: int = 5
    k_exemplar: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_eval < 1:
            raise ValueError("k_eval must be >= 1")
        if self.k_exemplar < 0:
            raise ValueError("k_exemplar must be >= 0")


def stratify(questions: Iterable[Question]) -> dict[StratumKey, list[Question]]:
    """Partition questions by stratum key, preserving within-stratum order."""
    strata: dict[StratumKey, list[Question]] = {}
    for question in questions:
        strata.setdefault(StratumKey.of(question), []).append(question)
    return strata


def sample_balanced(questions: Sequence[Question], cfg: SampleConfig,
                    ) -> tuple[list[Question], list[Question]]:
    """Draw the evaluation and exemplar sets, disjoint by question id."""
    strata = stratify(questions)
    rng = random.Random(cfg.seed)
    eval_set: list[Question] = []
    exemplar_set: list[Question] = []
    for key in sorted(strata):
        pool = strata[key]
        picked = rng.sample(range(len(pool)), min(cfg.k_eval, len(pool)))
        chosen = set(picked)
        eval_set.extend(pool[i] for i in sorted(picked))
        remainder = [q for i, q in enumerate(pool) if i not in chosen]
        picked2 = rng.sample(range(len(remainder)), min(cfg.k_exemplar, len(remainder)))
        exemplar_set.extend(remainder[i] for i in sorted(picked2))
    return eval_set, exemplar_set


def sample_manifest(questions: Sequence[Question], cfg: SampleConfig,
                    eval_set: Sequence[Question], exemplar_set: Sequence[Question],
                    ) -> dict:
    strata = stratify(questions)
    eval_by = stratify(eval_set)
    exemplar_by = stratify(exemplar_set)
    return {
        "rng": RNG_ALGORITHM,
        "seed": cfg.seed,
        "k_eval": cfg.k_eval,
        "k_exemplar": cfg.k_exemplar,
        "pool_total": len(questions),
        "eval_total": len(eval_set),
        "exemplar_total": len(exemplar_set),
        "strata": {
            key.render(): {
                "pool": len(strata[key]),
                "eval": len(eval_by.get(key, [])),
                "exemplar": len(exemplar_by.get(key, [])),
            }
            for key in sorted(strata)
        },
    }
