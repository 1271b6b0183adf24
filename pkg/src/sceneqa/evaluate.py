"""Scoring: answer extraction from free-form output, exact accuracy,
threshold accuracy for numeric answers, and original/contrapositive
consistency.

Extraction is task-aware.  Yes/no tasks take the first standalone
``yes``/``no`` token; multiple choice takes the first standalone option
letter; numeric tasks take the first numeral.  For chain-of-thought output
the *last* occurrence is used instead, because a reasoning chain states
intermediate quantities before the final answer.

Threshold accuracy TA@t counts a numeric prediction as a hit when its
relative error is strictly below t; a ground truth of exactly zero requires
the prediction to be exactly zero.  Missing and unparseable predictions are
counted as misses and reported separately.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import SchemaViolationError
from .rulegen import QaRecord, VARIANT_COT, VARIANT_PLAIN
from .templates import (
    CAT_DISTANCE,
    CAT_NON_NUMERIC,
    CAT_QUANTITY,
    CAT_VOLUME,
    TASK_FV,
    TASK_NI,
    TASK_PM,
)
from .util import read_jsonl

TA_THRESHOLDS = (0.05, 0.10, 0.20)

_YESNO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_LETTER_UPPER_RE = re.compile(r"\b([A-E])[).:,]?(?=\s|$)")
_LETTER_OPTION_RE = re.compile(r"\b([a-e])[).]")
_NUMERAL_RE = re.compile(r"[-+]?(?:\d+\.\d+|\.\d+|\d+)")


def extract_answer(output: str | None, task: str,
                   variant: str = VARIANT_PLAIN) -> str | None:
    """Pull a canonical answer token out of raw model output.

    Returns a lowercase yes/no word, an uppercase option letter, or the
    numeral text — or None when nothing matches.
    """
    if not output:
        return None
    take_last = variant == VARIANT_COT
    if task == TASK_FV:
        matches = _YESNO_RE.findall(output)
        if not matches:
            return None
        return (matches[-1] if take_last else matches[0]).lower()
    if task == TASK_PM:
        # Prefer unambiguous uppercase letters; fall back to lowercase
        # letters written in option form ("b)"), which cannot be articles.
        matches = _LETTER_UPPER_RE.findall(output)
        if not matches:
            matches = _LETTER_OPTION_RE.findall(output)
        if not matches:
            return None
        return (matches[-1] if take_last else matches[0]).upper()
    if task == TASK_NI:
        matches = _NUMERAL_RE.findall(output)
        if not matches:
            return None
        return matches[-1] if take_last else matches[0]
    raise SchemaViolationError(f"unknown task {task!r}")


def parse_numeric(token: str | None) -> float | None:
    if token is None:
        return None
    try:
        return float(token)
    except ValueError:
        return None


def gold_answer(record: QaRecord) -> str | None:
    """Canonical answer token a prediction is compared against.

    Plain records store the token directly; chain-of-thought records store
    the full reference chain, whose final stated answer is the target.
    """
    if record.variant == VARIANT_PLAIN:
        return record.answer
    return extract_answer(record.answer, record.task, record.variant)


def ta_hit(gt: float, pred: float, threshold: float) -> bool:
    """Relative error strictly below ``threshold``; zero truth demands zero."""
    if gt == 0.0:
        return pred == 0.0
    return abs(pred - gt) < threshold * abs(gt)


def threshold_accuracy(gts: Sequence[float], preds: Sequence[float | None],
                       threshold: float) -> float:
    if len(gts) != len(preds):
        raise SchemaViolationError("threshold_accuracy needs aligned sequences")
    if not gts:
        return 0.0
    hits = sum(
        1 for gt, pred in zip(gts, preds)
        if pred is not None and ta_hit(gt, pred, threshold)
    )
    return hits / len(gts)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class StratumScores:
    task: str
    category: str
    variant: str
    n_records: int = 0
    n_missing: int = 0
    n_unparsed: int = 0
    n_correct: int = 0
    ta_hits: dict[float, int] = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_records if self.n_records else 0.0

    def ta_at(self, threshold: float) -> float:
        return self.ta_hits.get(threshold, 0) / self.n_records if self.n_records else 0.0

    def to_dict(self) -> dict:
        row = {
            "task": self.task, "category": self.category, "variant": self.variant,
            "n_records": self.n_records, "n_missing": self.n_missing,
            "n_unparsed": self.n_unparsed,
        }
        if self.task == TASK_NI:
            row["ta"] = {f"{t:g}": self.ta_at(t) for t in sorted(self.ta_hits)}
        else:
            row["n_correct"] = self.n_correct
            row["accuracy"] = self.accuracy
        return row


@dataclass
class EvalReport:
    thresholds: tuple[float, ...]
    strata: dict[str, StratumScores] = field(default_factory=dict)

    def stratum(self, task: str, category: str, variant: str) -> StratumScores:
        key = f"{task}/{category}/{variant}"
        if key not in self.strata:
            self.strata[key] = StratumScores(task, category, variant)
        return self.strata[key]

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "strata": {key: self.strata[key].to_dict() for key in sorted(self.strata)},
        }


def score_records(records: Sequence[QaRecord],
                  predictions: Mapping[str, str],
                  thresholds: Sequence[float] = TA_THRESHOLDS) -> EvalReport:
    """Score raw model outputs against a dataset, stratified by
    task/category/variant.  Missing and unparseable outputs count as misses.
    """
    report = EvalReport(thresholds=tuple(thresholds))
    for record in records:
        scores = report.stratum(record.task, record.category, record.variant)
        scores.n_records += 1
        if record.task == TASK_NI:
            for t in report.thresholds:
                scores.ta_hits.setdefault(t, 0)
        output = predictions.get(record.qa_id)
        if output is None:
            scores.n_missing += 1
            continue
        token = extract_answer(output, record.task, record.variant)
        if token is None:
            scores.n_unparsed += 1
            continue
        if record.task == TASK_NI:
            pred = parse_numeric(token)
            if pred is None:
                scores.n_unparsed += 1
                continue
            gt = record.gt_value
            if gt is None:
                gt = parse_numeric(gold_answer(record))
            if gt is None:
                raise SchemaViolationError(
                    f"{record.qa_id}: numeric record lacks a parseable ground truth"
                )
            for t in report.thresholds:
                if ta_hit(gt, pred, t):
                    scores.ta_hits[t] += 1
        else:
            if token == gold_answer(record):
                scores.n_correct += 1
    return report


# ---------------------------------------------------------------------------
# Original / contrapositive consistency
# ---------------------------------------------------------------------------


@dataclass
class ConsistencyScores:
    category: str
    variant: str
    n_pairs: int = 0
    n_consistent: int = 0
    n_original_correct: int = 0
    n_cp_correct: int = 0

    @property
    def consistency(self) -> float:
        return self.n_consistent / self.n_pairs if self.n_pairs else 0.0

    @property
    def original_accuracy(self) -> float:
        return self.n_original_correct / self.n_pairs if self.n_pairs else 0.0

    @property
    def cp_accuracy(self) -> float:
        return self.n_cp_correct / self.n_pairs if self.n_pairs else 0.0

    @property
    def delta(self) -> float:
        return self.original_accuracy - self.cp_accuracy

    def to_dict(self) -> dict:
        return {
            "category": self.category, "variant": self.variant,
            "n_pairs": self.n_pairs, "consistency": self.consistency,
            "original_accuracy": self.original_accuracy,
            "cp_accuracy": self.cp_accuracy, "delta": self.delta,
        }


@dataclass
class ConsistencyReport:
    strata: dict[str, ConsistencyScores] = field(default_factory=dict)
    orphans: list[str] = field(default_factory=list)

    def stratum(self, category: str, variant: str) -> ConsistencyScores:
        key = f"{category}/{variant}"
        if key not in self.strata:
            self.strata[key] = ConsistencyScores(category, variant)
        return self.strata[key]

    def to_dict(self) -> dict:
        return {
            "strata": {key: self.strata[key].to_dict() for key in sorted(self.strata)},
            "orphans": sorted(self.orphans),
        }


_INVERT = {"yes": "no", "no": "yes"}


def consistency_report(records: Sequence[QaRecord],
                       predictions: Mapping[str, str]) -> ConsistencyReport:
    """Pair yes/no originals with their contrapositives and measure how often
    a responder answers them oppositely (both must parse to count).
    """
    by_id = {r.qa_id: r for r in records}
    report = ConsistencyReport()
    for record in records:
        if record.task != TASK_FV or record.is_contrapositive:
            continue
        if record.cp_link is None:
            continue
        partner = by_id.get(record.cp_link)
        if partner is None:
            report.orphans.append(record.qa_id)
            continue
        scores = report.stratum(record.category, record.variant)
        scores.n_pairs += 1
        p_ori = extract_answer(predictions.get(record.qa_id), TASK_FV, record.variant)
        p_cp = extract_answer(predictions.get(partner.qa_id), TASK_FV, partner.variant)
        if p_ori == gold_answer(record):
            scores.n_original_correct += 1
        if p_cp == gold_answer(partner):
            scores.n_cp_correct += 1
        if p_ori is not None and p_cp is not None and p_cp == _INVERT[p_ori]:
            scores.n_consistent += 1
    return report


# ---------------------------------------------------------------------------
# Text table
# ---------------------------------------------------------------------------

_TABLE_CATEGORIES = (CAT_NON_NUMERIC, CAT_QUANTITY, CAT_DISTANCE, CAT_VOLUME)


def format_report_table(report: EvalReport, variant: str = VARIANT_PLAIN) -> str:
    """Render accuracy / TA percentages as an aligned text table with one
    column per category."""
    headers = ["metric"] + list(_TABLE_CATEGORIES)
    rows: list[list[str]] = []

    def cell(task: str, category: str, value_fn) -> str:
        scores = report.strata.get(f"{task}/{category}/{variant}")
        if scores is None or scores.n_records == 0:
            return "-"
        return f"{100.0 * value_fn(scores):.2f}%"

    rows.append(["fv accuracy"] + [
        cell(TASK_FV, c, lambda s: s.accuracy) for c in _TABLE_CATEGORIES
    ])
    rows.append(["pm accuracy"] + [
        cell(TASK_PM, c, lambda s: s.accuracy) for c in _TABLE_CATEGORIES
    ])
    for threshold in report.thresholds:
        rows.append([f"ni ta@{round(threshold * 100):d}"] + [
            cell(TASK_NI, c, lambda s, t=threshold: s.ta_at(t))
            for c in _TABLE_CATEGORIES
        ])

    widths = [max(len(row[i]) for row in [headers] + rows) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    lines.append("  ".join("-" * widths[i] for i in range(len(headers))))
    for row in rows:
        lines.append("  ".join(
            row[i].ljust(widths[i]) if i == 0 else row[i].rjust(widths[i])
            for i in range(len(row))
        ))
    return "\n".join(lines)


def read_predictions(path) -> dict[str, str]:
    """Load a predictions file: JSON lines with ``qa_id`` and ``output``."""
    predictions: dict[str, str] = {}
    for pos, row in enumerate(read_jsonl(path)):
        if not isinstance(row.get("qa_id"), str) or not isinstance(row.get("output"), str):
            raise SchemaViolationError(
                f"{path}: line {pos + 1}: prediction rows need string "
                f"'qa_id' and 'output'"
            )
        predictions[row["qa_id"]] = row["output"]
    return predictions
