"""Drive model endpoints over the evaluation set and persist raw responses.

Requests go out JSON-over-HTTP in the chat-completions shape (or a
plain text-completion shape for base models), with bounded concurrency,
token-bucket rate limiting, and exponential-backoff retries on
transport errors and HTTP 429/5xx.  Every (question, seed) pair yields
exactly one run record; failed requests are recorded with an error
marker so scoring keeps a fixed denominator.  Scoring a persisted run
file never touches the network.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence
from urllib.parse import urlparse

import requests

from .jsonio import write_jsonl
from .qgen import Question, QuestionType
from .scoring import Scoreboard, aggregate, parse_answer

log = logging.getLogger(__name__)


class RunConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelEndpoint:
    base_url: str
    model_name: str
    api_key_env: Optional[str] = None
    request_timeout: float = 60.0
    max_retries: int = 3
    backoff_initial: float = 1.0
    backoff_multiplier: float = 2.0
    api_style: str = "chat"  # "chat" or "text"
    requests_per_second: Optional[float] = None
    label: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        parsed = urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise RunConfigError(f"base_url must be absolute: {self.base_url!r}")
        if self.max_retries < 0:
            raise RunConfigError("max_retries must be >= 0")
        if self.api_style not in ("chat", "text"):
            raise RunConfigError(f"unknown api_style {self.api_style!r}")

    @property
    def identity(self) -> str:
        return self.label or f"{self.model_name}@{self.base_url}"

    def api_key(self) -> Optional[str]:
        if self.api_key_env is None:
            return None
        value = os.environ.get(self.api_key_env)
        if not value:
            raise RunConfigError(
                f"credential environment variable {self.api_key_env} is not set")
        return value


@dataclass(frozen=True)
class RunConfig:
    setting: str = "zero_shot"  # "zero_shot" or "few_shot"
    n_exemplars: int = 5
    seeds: tuple[int, ...] = (0, 1, 2)
    temperature: float = 0.0
    max_new_tokens_fitb: int = 256
    max_new_tokens_choice: int = 10
    concurrency_limit: int = 4

    def __post_init__(self) -> None:
        if self.setting not in ("zero_shot", "few_shot"):
            raise RunConfigError(f"unknown setting {self.setting!r}")
        if not self.seeds:
            raise RunConfigError("at least one seed is required")
        if self.concurrency_limit < 1:
            raise RunConfigError("concurrency_limit must be >= 1")

    def max_new_tokens(self, qtype: QuestionType) -> int:
        return (self.max_new_tokens_fitb if qtype is QuestionType.FITB
                else self.max_new_tokens_choice)


@dataclass(frozen=True)
class RunRecord:
    question_id: str
    seed: int
    prompt: str
    raw_response: str
    latency_ms: float
    endpoint: str
    timestamp: str
    retries: int = 0
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "question_id": self.question_id,
            "seed": self.seed,
            "prompt": self.prompt,
            "raw_response": self.raw_response,
            "latency_ms": self.latency_ms,
            "endpoint": self.endpoint,
            "timestamp": self.timestamp,
            "retries": self.retries,
            "error": self.error,
        }

    @staticmethod
    def from_json(row: dict) -> "RunRecord":
        return RunRecord(
            question_id=row["question_id"],
            seed=row["seed"],
            prompt=row.get("prompt", ""),
            raw_response=row.get("raw_response", ""),
            latency_ms=row.get("latency_ms", 0.0),
            endpoint=row.get("endpoint", ""),
            timestamp=row.get("timestamp", ""),
            retries=row.get("retries", 0),
            error=row.get("error"),
        )


# ---------------------------------------------------------------------------
# Prompts

_HEADERS = {
    QuestionType.TF: ("Decide whether the statement about the sentence is true "
                      "or false. Answer with True or False only."),
    QuestionType.MC: ("Answer the multiple-choice question about the sentence. "
                      "Answer with the letter of the correct option."),
    QuestionType.FITB: ("Fill in the blank in the question about the sentence. "
                        "Answer with the exact word or phrase from the sentence."),
}


def _gold_text(question: Question) -> str:
    if question.qtype is QuestionType.TF:
        return "True" if question.gold else "False"
    return str(question.gold)


def _render_block(question: Question, with_answer: bool) -> str:
    lines = [f"Sentence: {question.sentence_text}",
             f"Question: {question.prompt}"]
    if question.qtype is QuestionType.MC and question.options:
        lines.append("Options:")
        for letter, option in zip("ABCD", question.options):
            lines.append(f"{letter}. {option}")
    lines.append(f"Answer: {_gold_text(question)}" if with_answer else "Answer:")
    return "\n".join(lines)


def select_exemplars(exemplar_set: Sequence[Question], question: Question,
                     n: int, seed: int) -> list[Question]:
    """Exemplars sharing the question's knowledge point and type.

    Drawn without replacement, deterministically under (seed, question
    id); when fewer than ``n`` match, all matches are returned.
    """
    if n <= 0:
        return []
    pool = [q for q in exemplar_set
            if q.kp == question.kp and q.qtype == question.qtype
            and q.id != question.id]
    rng = random.Random(f"{seed}:{question.id}")
    if len(pool) <= n:
        return list(pool)
    return rng.sample(pool, n)


def build_prompt(question: Question, exemplars: Sequence[Question],
                 setting: str) -> str:
    """Instruction header, optional solved exemplar blocks, then the target."""
    if setting == "zero_shot" and exemplars:
        raise RunConfigError("zero_shot prompts cannot carry exemplars")
    blocks = [_HEADERS[question.qtype]]
    for exemplar in exemplars:
        blocks.append(_render_block(exemplar, with_answer=True))
    blocks.append(_render_block(question, with_answer=False))
    return "\n\n".join(blocks)


# ---------------------------------------------------------------------------
# HTTP plumbing

class _TokenBucket:
    def __init__(self, rate: float):
        self.rate = rate
        self.capacity = max(rate, 1.0)
        self.tokens = self.capacity
        self.updated = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


def _payload(endpoint: ModelEndpoint, prompt: str, temperature: float,
             max_tokens: int) -> dict:
    if endpoint.api_style == "chat":
        return {
            "model": endpoint.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
    return {
        "model": endpoint.model_name,
        "prompt": prompt,
        "temperature": temperature,
        "max_tokens": max_tokens,
    }


def _extract_text(endpoint: ModelEndpoint, body: dict) -> str:
    choices = body.get("choices") or []
    if not choices:
        return ""
    if endpoint.api_style == "chat":
        return (choices[0].get("message") or {}).get("content") or ""
    return choices[0].get("text") or ""


_RETRYABLE_STATUS = {429}


def _should_retry(status: int) -> bool:
    return status in _RETRYABLE_STATUS or status >= 500


def _request_with_retries(endpoint: ModelEndpoint, payload: dict,
                          headers: dict, bucket: Optional[_TokenBucket],
                          ) -> tuple[str, int, Optional[str]]:
    """Returns (response text, retries used, error marker or None)."""
    attempts = endpoint.max_retries + 1
    delay = endpoint.backoff_initial
    error = None
    for attempt in range(attempts):
        if attempt:
            time.sleep(delay)
            delay *= endpoint.backoff_multiplier
        if bucket is not None:
            bucket.acquire()
        try:
            response = requests.post(endpoint.base_url, json=payload, headers=headers,
                                     timeout=endpoint.request_timeout)
        except requests.RequestException as exc:
            error = f"transport: {exc}"
            continue
        if response.ok:
            try:
                return _extract_text(endpoint, response.json()), attempt, None
            except (ValueError, KeyError) as exc:
                return "", attempt, f"malformed response: {exc}"
        error = f"HTTP {response.status_code}"
        if not _should_retry(response.status_code):
            return "", attempt, error
    return "", attempts - 1, error


# ---------------------------------------------------------------------------
# Evaluation runs

def run_eval(endpoint: ModelEndpoint, cfg: RunConfig,
             eval_set: Sequence[Question],
             exemplar_set: Sequence[Question] = (),
             out_path: Optional[str] = None,
             ) -> tuple[list[RunRecord], dict]:
    """One request per (question, seed); returns sorted records + diagnostics.

    Records are streamed to ``out_path`` as they complete and the file is
    rewritten in sorted order at the end, so a crash still leaves a
    usable partial run file.
    """
    if cfg.setting == "few_shot" and not exemplar_set:
        raise RunConfigError("few_shot requires a nonempty exemplar set")
    headers = {"Content-Type": "application/json"}
    key = endpoint.api_key()
    if key:
        headers["Authorization"] = f"Bearer {key}"
    bucket = (_TokenBucket(endpoint.requests_per_second)
              if endpoint.requests_per_second else None)

    diagnostics = {"requests": 0, "retries": 0, "errors": 0,
                   "exemplar_shortfalls": 0}
    diag_lock = threading.Lock()
    sink_lock = threading.Lock()
    sink = open(out_path, "w", encoding="utf-8") if out_path else None

    def one(question: Question, seed: int) -> RunRecord:
        if cfg.setting == "few_shot":
            exemplars = select_exemplars(exemplar_set, question, cfg.n_exemplars, seed)
            if len(exemplars) < cfg.n_exemplars:
                with diag_lock:
                    diagnostics["exemplar_shortfalls"] += 1
        else:
            exemplars = []
        prompt = build_prompt(question, exemplars, cfg.setting)
        payload = _payload(endpoint, prompt, cfg.temperature,
                           cfg.max_new_tokens(question.qtype))
        started = time.monotonic()
        text, retries, error = _request_with_retries(endpoint, payload, headers, bucket)
        latency = (time.monotonic() - started) * 1000.0
        record = RunRecord(
            question_id=question.id,
            seed=seed,
            prompt=prompt,
            raw_response=text,
            latency_ms=round(latency, 3),
            endpoint=endpoint.identity,
            timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(),
            retries=retries,
            error=error,
        )
        with diag_lock:
            diagnostics["requests"] += 1
            diagnostics["retries"] += retries
            if error:
                diagnostics["errors"] += 1
        if sink is not None:
            with sink_lock:
                sink.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
                sink.flush()
        return record

    tasks = [(question, seed) for seed in cfg.seeds for question in eval_set]
    try:
        with ThreadPoolExecutor(max_workers=cfg.concurrency_limit) as pool:
            records = list(pool.map(lambda qs: one(*qs), tasks))
    finally:
        if sink is not None:
            sink.close()
    records.sort(key=lambda r: (r.seed, r.question_id))
    if out_path:
        write_jsonl(out_path, (r.to_json() for r in records))
    return records, diagnostics


# ---------------------------------------------------------------------------
# Random baseline

def random_baseline(eval_set: Sequence[Question], seed: int) -> list[RunRecord]:
    """Answer TF by coin flip, MC uniformly over A-D, and FITB with a
    uniformly random constituent phrase of the question's sentence."""
    records = []
    timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat()
    for question in eval_set:
        rng = random.Random(f"{seed}:{question.id}")
        if question.qtype is QuestionType.TF:
            answer = rng.choice(["True", "False"])
        elif question.qtype is QuestionType.MC:
            answer = rng.choice("ABCD")
        else:
            phrases = question.meta.get("constituents")
            if phrases:
                answer = rng.choice(phrases)
            else:
                tokens = question.sentence_text.split()
                start = rng.randrange(len(tokens))
                end = rng.randrange(start + 1, len(tokens) + 1)
                answer = " ".join(tokens[start:end])
        records.append(RunRecord(
            question_id=question.id,
            seed=seed,
            prompt="",
            raw_response=answer,
            latency_ms=0.0,
            endpoint="random-baseline",
            timestamp=timestamp,
        ))
    records.sort(key=lambda r: (r.seed, r.question_id))
    return records


# ---------------------------------------------------------------------------
# Scoring bridge and checkpoint series

def score_records(records: Iterable[RunRecord],
                  eval_set: Sequence[Question]) -> Scoreboard:
    """Re-score persisted run records offline (pure, no network)."""
    by_id = {q.id: q for q in eval_set}
    triples = []
    for record in records:
        if record.question_id not in by_id:
            raise ValueError(f"record for unknown question {record.question_id!r}")
        question = by_id[record.question_id]
        answer = parse_answer(question.qtype, record.raw_response)
        triples.append((question, answer, record.seed))
    return aggregate(triples, eval_questions=by_id)


def checkpoint_series(endpoints: Sequence[ModelEndpoint], cfg: RunConfig,
                      eval_set: Sequence[Question],
                      exemplar_set: Sequence[Question] = (),
                      out_dir: Optional[str] = None,
                      run_one: Optional[Callable[..., tuple[list[RunRecord], dict]]] = None,
                      ) -> tuple[list[tuple[ModelEndpoint, Optional[Scoreboard]]], list[list[str]]]:
    """Evaluate an ordered series of endpoints (e.g. training checkpoints).

    A failing endpoint is isolated to its own column.  Returns the
    per-endpoint scoreboards plus a CSV table of per-knowledge-point
    overall scores, one column per endpoint label.
    """
    if not endpoints:
        raise RunConfigError("at least one endpoint is required")
    runner = run_one or run_eval
    results: list[tuple[ModelEndpoint, Optional[Scoreboard]]] = []
    for endpoint in endpoints:
        out_path = None
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            safe = "".join(c if c.isalnum() or c in "-._" else "_"
                           for c in endpoint.identity)
            out_path = os.path.join(out_dir, f"runs-{safe}.jsonl")
        try:
            records, _ = runner(endpoint, cfg, eval_set, exemplar_set, out_path)
            results.append((endpoint, score_records(records, eval_set)))
        except Exception as exc:  # noqa: BLE001 - column isolation is the contract
            log.error("endpoint %s failed: %s", endpoint.identity, exc)
            results.append((endpoint, None))
    table = series_table(results)
    if out_dir:
        with open(os.path.join(out_dir, "series.csv"), "w", encoding="utf-8") as fh:
            for row in table:
                fh.write(",".join(row) + "\n")
    return results, table


def series_table(results: Sequence[tuple[ModelEndpoint, Optional[Scoreboard]]],
                 ) -> list[list[str]]:
    from .extract import KP_ORDER  # late import keeps module load light

    def fmt(value: Optional[float]) -> str:
        return f"{value:.2f}" if value is not None else ""

    header = ["kp"] + [endpoint.identity for endpoint, _ in results]
    rows = [header]
    if any(endpoint.meta.get("tokens") is not None for endpoint, _ in results):
        rows.append(["tokens"] + [str(endpoint.meta.get("tokens", ""))
                                  for endpoint, _ in results])
    rows.append(["OVERALL"] + [fmt(board.oa if board else None)
                               for _, board in results])
    for kp in KP_ORDER:
        row = [kp.value]
        for _, board in results:
            sub = board.breakdown.get(kp.value) if board else None
            row.append(fmt(sub.oa if sub else None))
        rows.append(row)
    return rows
