"""Answer cleaning, soft/strict matching, accuracy reports, and ensembling.

Soft matching is deliberately lenient: after cleaning both strings it
accepts equality, substring containment (with and without spaces), any
shared word, or membership in the same synonym set.  Strict matching is
exact equality after cleaning.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .scene import QuestionRecord


class EvalError(Exception):
    pass


class UnknownQid(EvalError):
    pass


class EmptyTopK(EvalError):
    pass


class EmptyResponse(EvalError):
    pass


_ONES = (
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
    "sixteen", "seventeen", "eighteen", "nineteen",
)
_TENS = ("twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety")


def _number_word(n: int) -> str:
    if n < 20:
        return _ONES[n]
    tens, ones = divmod(n, 10)
    word = _TENS[tens - 2]
    return word if ones == 0 else f"{word} {_ONES[ones]}"


_STRIP_RE = re.compile(r"[^0-9a-z\s]+")
_INT_RE = re.compile(r"\b\d{1,2}\b")


def clean_answer(text: str) -> str:
    """Lowercase, drop punctuation/special characters, collapse whitespace,
    and spell out standalone integers 0-99."""
    text = _STRIP_RE.sub("", text.lower())
    text = _INT_RE.sub(lambda m: _number_word(int(m.group())), text)
    return " ".join(text.split())


class SynonymTable:
    """Groups of interchangeable answers; lookup is on cleaned strings."""

    def __init__(self, sets: Sequence[Sequence[str]]):
        self._sets = [frozenset(clean_answer(term) for term in group) for group in sets]
        self._by_term: dict[str, list[frozenset[str]]] = {}
        for group in self._sets:
            for term in group:
                self._by_term.setdefault(term, []).append(group)

    @classmethod
    def load(cls, path: str | Path) -> "SynonymTable":
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
        return cls(doc["sets"])

    @classmethod
    def default(cls) -> "SynonymTable":
        doc = json.loads(
            resources.files("scenereason")
            .joinpath("assets/synonyms.json")
            .read_text(encoding="utf-8")
        )
        return cls(doc["sets"])

    def is_synonym(self, a: str, b: str) -> bool:
        a, b = clean_answer(a), clean_answer(b)
        return any(b in group for group in self._by_term.get(a, ()))

    @property
    def sets(self) -> list[frozenset[str]]:
        return list(self._sets)


_DEFAULT_TABLE: SynonymTable | None = None


def _table(table: SynonymTable | None) -> SynonymTable:
    global _DEFAULT_TABLE
    if table is not None:
        return table
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = SynonymTable.default()
    return _DEFAULT_TABLE


def is_synonym(a: str, b: str, table: SynonymTable | None = None) -> bool:
    return _table(table).is_synonym(a, b)


def soft_match(pred: str, gt: str, table: SynonymTable | None = None) -> bool:
    answer = clean_answer(pred)
    gt_answer = clean_answer(gt)
    if answer == gt_answer:
        return True
    if answer in gt_answer or gt_answer in answer:
        return True
    squeezed, gt_squeezed = "".join(answer.split()), "".join(gt_answer.split())
    if squeezed in gt_squeezed or gt_squeezed in squeezed:
        return True
    if set(answer.split()) & set(gt_answer.split()):
        return True
    return _table(table).is_synonym(answer, gt_answer)


def strict_match(pred: str, gt: str) -> bool:
    return clean_answer(pred) == clean_answer(gt)


@dataclass(frozen=True)
class TypeBucket:
    total: int
    correct: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


@dataclass(frozen=True)
class EvalReport:
    total: int
    correct: int
    per_type: Mapping[str, TypeBucket] = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "per_type": {
                tag: {
                    "total": bucket.total,
                    "correct": bucket.correct,
                    "accuracy": bucket.accuracy,
                }
                for tag, bucket in sorted(self.per_type.items())
            },
        }


def score(
    predictions: Mapping[str, str],
    gold: Sequence[QuestionRecord],
    protocol: str = "soft",
    table: SynonymTable | None = None,
) -> EvalReport:
    """Score predictions against gold records.

    A prediction is correct when it matches any gold answer for its qid.
    Gold questions without a prediction are skipped, so a subset run can be
    scored against a full gold file; prediction qids absent from gold raise.
    """
    if protocol not in ("soft", "strict"):
        raise EvalError(f"protocol must be soft or strict, got {protocol!r}")
    gold_by_qid = {rec.qid: rec for rec in gold}
    missing = sorted(set(predictions) - set(gold_by_qid))
    if missing:
        raise UnknownQid(f"predictions reference unknown qids: {', '.join(missing)}")

    def matches(pred: str, answers: Sequence[str]) -> bool:
        if protocol == "strict":
            return any(strict_match(pred, a) for a in answers)
        return any(soft_match(pred, a, table) for a in answers)

    total = correct = 0
    per_type: dict[str, list[int]] = {}
    for rec in gold:
        if rec.qid not in predictions:
            continue
        hit = matches(predictions[rec.qid], rec.answers)
        total += 1
        correct += hit
        for tag in rec.question_types:
            bucket = per_type.setdefault(tag, [0, 0])
            bucket[0] += 1
            bucket[1] += hit
    return EvalReport(
        total=total,
        correct=correct,
        per_type={
            tag: TypeBucket(total=t, correct=c) for tag, (t, c) in per_type.items()
        },
    )


# -- prediction and top-k files ------------------------------------------------

def load_predictions(path: str | Path) -> dict[str, str]:
    """Read the {qid, answer, ...} one-record-per-line predictions file."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                out[str(doc["qid"])] = str(doc["answer"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise EvalError(f"{path}:{lineno}: bad prediction record: {exc}") from None
    return out


@dataclass(frozen=True)
class TopKPrediction:
    """Up to five (answer, probability) entries, probabilities non-increasing.

    Probabilities are kept as their source text so prompts echo them
    verbatim (0.10 stays "0.10").
    """

    qid: str
    entries: tuple[tuple[str, str], ...]

    def __post_init__(self):
        if len(self.entries) > 5:
            raise EvalError(f"top-k for {self.qid!r} has more than 5 entries")
        probs = []
        for answer, prob in self.entries:
            try:
                value = float(prob)
            except ValueError:
                raise EvalError(
                    f"top-k for {self.qid!r}: bad probability {prob!r}"
                ) from None
            if not 0.0 <= value <= 1.0:
                raise EvalError(f"top-k for {self.qid!r}: probability {prob} not in [0,1]")
            probs.append(value)
        if any(probs[i] < probs[i + 1] for i in range(len(probs) - 1)):
            raise EvalError(f"top-k for {self.qid!r}: probabilities must be non-increasing")


def load_topk(path: str | Path) -> dict[str, TopKPrediction]:
    out: dict[str, TopKPrediction] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line, parse_float=str, parse_int=str)
                qid = str(doc["qid"])
                entries = tuple((str(a), str(p)) for a, p in doc["entries"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise EvalError(f"{path}:{lineno}: bad top-k record: {exc}") from None
            out[qid] = TopKPrediction(qid=qid, entries=entries)
    return out


# -- ensembling -----------------------------------------------------------------

def default_ensemble_template() -> str:
    return (
        resources.files("scenereason")
        .joinpath("assets/ensemble.txt")
        .read_text(encoding="utf-8")
    )


def build_ensemble_prompt(
    question: str,
    llm_answer: str,
    topk: TopKPrediction,
    template: str | None = None,
) -> str:
    """Fill the ensemble template with the question, the open-ended answer,
    and the top-k candidate lines (exactly one line per entry)."""
    if not topk.entries:
        raise EmptyTopK(f"top-k for {topk.qid!r} has no entries")
    text = template if template is not None else default_ensemble_template()
    text = text.replace("{question}", question).replace("{ans}", llm_answer)
    lines = text.split("\n")
    out = []
    for line in lines:
        slot = re.fullmatch(r"\s*- \{ans(\d)\}: \{prob\1\}", line)
        if not slot:
            out.append(line)
            continue
        idx = int(slot.group(1)) - 1
        if idx < len(topk.entries):
            answer, prob = topk.entries[idx]
            out.append(f" - {answer}: {prob}")
    return "\n".join(out)


_ENSEMBLE_MARKER = "Reasonable answers:"


def parse_ensemble_response(text: str) -> str:
    """Answer after the last "Reasonable answers:" marker, or the whole
    trimmed response when the marker is absent."""
    if not text.strip():
        raise EmptyResponse("ensemble response is empty")
    pos = text.rfind(_ENSEMBLE_MARKER)
    if pos < 0:
        return text.strip()
    return text[pos + len(_ENSEMBLE_MARKER):].strip()
