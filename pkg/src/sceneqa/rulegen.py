"""Rule-based QA generation over NGT tables.

Every dataset record is a :class:`QaRecord`.  Fact-verification (FV) items are
emitted in original/contrapositive pairs: the partner asks the logically
inverse question about the same referents, so one of the two always answers
"yes" and the other "no".  Numeric-input (NI) items ask for one number whose
rendered form is the answer string and whose full-precision value is kept in
``gt_value`` for threshold scoring.

Balance is enforced by construction, not by rejection sampling: global
index-based schedules (seeded permutations cycled by each record's absolute
position in its stratum) assign target answers, template groups, and option
letters.  Because the schedule depends only on the index, output is identical
however the work is split across scenes or workers.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientCandidatesError, SceneQaError, SchemaViolationError
from .ngt import NgtTable
from .templates import (
    CAT_DISTANCE,
    CAT_QUANTITY,
    CAT_VOLUME,
    NUMERIC_CATEGORIES,
    PRED_APPROX_EQUAL,
    PRED_GREATER,
    PRED_GREATER_EQUAL,
    PRED_LESS,
    PRED_LESS_EQUAL,
    PRED_NOT_APPROX_EQUAL,
    TASK_FV,
    TASK_NI,
    TASK_PM,
    Template,
    bank_by_id,
    default_bank,
    evaluate_predicate,
    fv_pairs,
    instantiate,
    templates_for,
)
from .util import derive_seed, read_jsonl, render_count, render_decimal, write_jsonl

VARIANT_PLAIN = "plain"
VARIANT_COT = "cot"
PROVENANCE_RULE = "rule"
PROVENANCE_LLM = "llm"

ANSWER_YES = "yes"
ANSWER_NO = "no"

COT_SUFFIX = (
    "Please solve the problem step by step. Show each intermediate thought "
    "process clearly and provide the final answer after completing the "
    "reasoning process."
)


@dataclass(frozen=True)
class QaRecord:
    qa_id: str
    scene_id: str
    task: str
    category: str
    question: str
    answer: str
    gt_value: float | None
    unit: str
    cp_link: str | None
    variant: str
    provenance: str
    template_id: str | None
    referents: tuple[str, ...]

    @property
    def is_contrapositive(self) -> bool:
        return self.qa_id.endswith("-cp") or self.qa_id.endswith("-cp-cot")

    @property
    def is_cot(self) -> bool:
        return self.qa_id.endswith("-cot")

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "scene_id": self.scene_id,
            "task": self.task,
            "category": self.category,
            "question": self.question,
            "answer": self.answer,
            "gt_value": self.gt_value,
            "unit": self.unit,
            "cp_link": self.cp_link,
            "variant": self.variant,
            "provenance": self.provenance,
            "template_id": self.template_id,
            "referents": list(self.referents),
        }


_RECORD_KEYS = (
    "qa_id", "scene_id", "task", "category", "question", "answer", "gt_value",
    "unit", "cp_link", "variant", "provenance", "template_id", "referents",
)


def record_from_dict(row: dict, source: str = "<dict>") -> QaRecord:
    missing = [k for k in _RECORD_KEYS if k not in row]
    if missing:
        raise SchemaViolationError(f"{source}: record missing keys {missing}")
    gt = row["gt_value"]
    if gt is not None:
        gt = float(gt)
    referents = row["referents"]
    if not isinstance(referents, list) or not all(isinstance(r, str) for r in referents):
        raise SchemaViolationError(f"{source}: 'referents' must be a list of strings")
    return QaRecord(
        qa_id=str(row["qa_id"]),
        scene_id=str(row["scene_id"]),
        task=str(row["task"]),
        category=str(row["category"]),
        question=str(row["question"]),
        answer=str(row["answer"]),
        gt_value=gt,
        unit=str(row["unit"]),
        cp_link=None if row["cp_link"] is None else str(row["cp_link"]),
        variant=str(row["variant"]),
        provenance=str(row["provenance"]),
        template_id=None if row["template_id"] is None else str(row["template_id"]),
        referents=tuple(referents),
    )


def write_dataset(records: Iterable[QaRecord], path: str | Path) -> int:
    return write_jsonl((r.to_dict() for r in records), path)


def read_dataset(path: str | Path) -> list[QaRecord]:
    return [record_from_dict(row, source=str(path)) for row in read_jsonl(path)]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RulegenConfig:
    """Counts are total records per stratum across the whole dataset."""

    fv_quantity: int = 0
    fv_distance: int = 0
    fv_volume: int = 0
    ni_quantity: int = 0
    ni_distance: int = 0
    ni_volume: int = 0
    cot_fraction: float = 0.0
    # comparisons closer than this relative margin are too ambiguous to ask
    ambiguity_margin: float = 0.05
    # ratio band for "approximately equal": yes inside 1-band_in, no outside
    # 1-band_out; the zone between is skipped entirely
    approx_band_in: float = 0.10
    approx_band_out: float = 0.30
    # smallest value a numeric answer may round-display; keeps the rendered
    # two-decimal answer inside the tightest scoring threshold
    min_display_value: float = 0.15
    max_draw_attempts: int = 200

    def __post_init__(self):
        for name in ("fv_quantity", "fv_distance", "fv_volume",
                     "ni_quantity", "ni_distance", "ni_volume"):
            value = getattr(self, name)
            if value < 0:
                raise SceneQaError(f"{name} must be non-negative, got {value}")
        for name in ("fv_quantity", "fv_distance", "fv_volume"):
            if getattr(self, name) % 2:
                raise SceneQaError(
                    f"{name} must be even (records come in original/contrapositive pairs)"
                )
        if not 0.0 <= self.cot_fraction <= 1.0:
            raise SceneQaError("cot_fraction must be within [0, 1]")
        if not 0.0 < self.approx_band_in < self.approx_band_out < 1.0:
            raise SceneQaError("need 0 < approx_band_in < approx_band_out < 1")
        if self.ambiguity_margin < 0.0 or self.ambiguity_margin >= 1.0:
            raise SceneQaError("ambiguity_margin must be within [0, 1)")

    def fv_count(self, category: str) -> int:
        return {CAT_QUANTITY: self.fv_quantity, CAT_DISTANCE: self.fv_distance,
                CAT_VOLUME: self.fv_volume}[category]

    def ni_count(self, category: str) -> int:
        return {CAT_QUANTITY: self.ni_quantity, CAT_DISTANCE: self.ni_distance,
                CAT_VOLUME: self.ni_volume}[category]


# ---------------------------------------------------------------------------
# Global schedules: balance by absolute index
# ---------------------------------------------------------------------------

_LETTERS = ("A", "B", "C", "D", "E")


@dataclass(frozen=True)
class Schedules:
    """Seeded permutations consulted by absolute record index.

    ``fv_target`` alternates the original item's answer, ``fv_group`` cycles
    the five inverse template pairs, and ``fv_member`` flips which pair member
    is the original each full cycle — so template usage per stratum stays
    within one of N/10 for any N.
    """

    fv_targets: dict[str, tuple[str, str]]
    fv_groups: dict[str, tuple[int, ...]]
    fv_member_offsets: dict[str, int]
    ni_orders: dict[str, tuple[int, ...]]
    letter_order: tuple[str, ...]
    indicator_order: tuple[bool, bool]

    def fv_target(self, category: str, k: int) -> str:
        return self.fv_targets[category][k % 2]

    def fv_group(self, category: str, k: int) -> int:
        return self.fv_groups[category][k % 5]

    def fv_member(self, category: str, k: int) -> int:
        return (self.fv_member_offsets[category] + k // 5) % 2

    def ni_template_index(self, category: str, k: int) -> int:
        return self.ni_orders[category][k % 10]

    def pm_letter(self, k: int, n_options: int = 5) -> str:
        allowed = _LETTERS[:n_options]
        cycle = tuple(ch for ch in self.letter_order if ch in allowed)
        return cycle[k % n_options]

    def fv_indicator(self, k: int) -> bool:
        return self.indicator_order[k % 2]


def build_schedules(master_seed: int) -> Schedules:
    rng = np.random.default_rng(derive_seed(master_seed, "schedules"))
    fv_targets: dict[str, tuple[str, str]] = {}
    fv_groups: dict[str, tuple[int, ...]] = {}
    fv_member_offsets: dict[str, int] = {}
    ni_orders: dict[str, tuple[int, ...]] = {}
    for category in NUMERIC_CATEGORIES:
        pair = [ANSWER_YES, ANSWER_NO]
        if rng.integers(2):
            pair.reverse()
        fv_targets[category] = tuple(pair)
        fv_groups[category] = tuple(int(i) for i in rng.permutation(5))
        fv_member_offsets[category] = int(rng.integers(2))
        ni_orders[category] = tuple(int(i) for i in rng.permutation(10))
    letter_order = tuple(_LETTERS[int(i)] for i in rng.permutation(5))
    indicators = [True, False]
    if rng.integers(2):
        indicators.reverse()
    return Schedules(fv_targets, fv_groups, fv_member_offsets, ni_orders,
                     letter_order, tuple(indicators))


# ---------------------------------------------------------------------------
# Candidate pools
# ---------------------------------------------------------------------------


class _ValuePool:
    """Deterministic sampler over (key, value) items sorted by value.

    Supports margin-separated strict draws and ratio-banded approximate
    draws; random attempts fall back to a seeded systematic scan before
    giving up, so "no candidates" really means the pool has none.
    """

    def __init__(self, items: Sequence[tuple], margin: float,
                 band_in: float, band_out: float, max_attempts: int):
        self.items = sorted(items, key=lambda kv: (kv[1], kv[0]))
        self.values = [v for _, v in self.items]
        self.margin = margin
        self.band_in = band_in
        self.band_out = band_out
        self.max_attempts = max_attempts

    def __len__(self) -> int:
        return len(self.items)

    def _separated(self, i: int, j: int) -> bool:
        vi, vj = self.values[i], self.values[j]
        return vi != vj and abs(vi - vj) >= self.margin * max(abs(vi), abs(vj))

    def _band_range(self, value: float, band: float) -> tuple[int, int]:
        # values are non-negative quantities; the band is a min/max ratio
        lo = value * (1.0 - band)
        hi = value / (1.0 - band)
        return (bisect.bisect_left(self.values, lo),
                bisect.bisect_right(self.values, hi))

    def draw_strict(self, rng: np.random.Generator):
        """Two distinct items whose values differ by at least the margin,
        returned as (smaller, larger)."""
        n = len(self.items)
        if n >= 2:
            for _ in range(self.max_attempts):
                i, j = rng.integers(n), rng.integers(n)
                if i != j and self._separated(i, j):
                    if self.values[i] > self.values[j]:
                        i, j = j, i
                    return self.items[i], self.items[j]
            for i in rng.permutation(n):
                # smallest partner clearly above item i
                k = bisect.bisect_left(self.values, self.values[i] / (1.0 - self.margin)
                                       if self.margin < 1.0 else float("inf"))
                while k < n and not self._separated(i, k):
                    k += 1
                if k < n:
                    return self.items[i], self.items[k]
        return None

    def draw_approx(self, rng: np.random.Generator, close: bool):
        n = len(self.items)
        if n < 2:
            return None
        for _ in range(self.max_attempts):
            i = int(rng.integers(n))
            if close:
                lo, hi = self._band_range(self.values[i], self.band_in)
                choices = hi - lo - 1  # item i always sits inside its own band
                if choices <= 0:
                    continue
                pick = int(rng.integers(choices))
                j = lo + pick
                if j >= i:
                    j += 1
            else:
                olo, ohi = self._band_range(self.values[i], self.band_out)
                outside = olo + (n - ohi)
                if outside <= 0:
                    continue
                pick = int(rng.integers(outside))
                j = pick if pick < olo else ohi + (pick - olo)
            if j != i:
                return self.items[i], self.items[j]
        # systematic fallback
        for i in rng.permutation(n):
            i = int(i)
            if close:
                lo, hi = self._band_range(self.values[i], self.band_in)
                for j in range(lo, hi):
                    if j != i:
                        return self.items[i], self.items[j]
            else:
                olo, ohi = self._band_range(self.values[i], self.band_out)
                if olo > 0:
                    return self.items[i], self.items[0]
                if ohi < n:
                    return self.items[i], self.items[n - 1]
        return None


def _quantity_items(table: NgtTable) -> list[tuple[str, float]]:
    return [(label, float(count)) for label, count in sorted(table.label_counts().items())]


def _volume_items(table: NgtTable) -> list[tuple[str, float]]:
    return [
        (label, inst.volume)
        for label, inst in sorted(table.unique_label_instances().items())
    ]


def _distance_items(table: NgtTable) -> list[tuple[tuple[str, str], float]]:
    unique = table.unique_label_instances()
    labels = sorted(unique)
    items = []
    for i, la in enumerate(labels):
        for lb in labels[i + 1:]:
            ia, ib = unique[la].instance_id, unique[lb].instance_id
            if table.has_pair(ia, ib):
                items.append(((la, lb), table.distance(ia, ib)))
    return items


def referent_values(category: str, referents: Sequence[str], table: NgtTable) -> list[float]:
    """Ground-truth values named by a record's referents, for audits and CoT."""
    if category == CAT_QUANTITY:
        counts = table.label_counts()
        return [float(counts[label]) for label in referents]
    unique = table.unique_label_instances()
    if category == CAT_VOLUME:
        return [unique[label].volume for label in referents]
    if category == CAT_DISTANCE:
        ids = [unique[label].instance_id for label in referents]
        if len(ids) == 2:
            return [table.distance(ids[0], ids[1])]
        return [table.distance(ids[0], ids[1]), table.distance(ids[2], ids[3])]
    raise SceneQaError(f"no referent values for category {category!r}")


# ---------------------------------------------------------------------------
# FV generation
# ---------------------------------------------------------------------------


def _orient_strict(predicate: str, target: str, low_item, high_item):
    """Order a margin-separated (low, high) draw so the predicate evaluates
    to the target answer."""
    want_low_first = predicate in (PRED_LESS, PRED_LESS_EQUAL)
    if target == ANSWER_NO:
        want_low_first = not want_low_first
    return (low_item, high_item) if want_low_first else (high_item, low_item)


def _fv_bindings(category: str, first, second) -> tuple[str, ...]:
    if category == CAT_DISTANCE:
        return (*first[0], *second[0])
    return (first[0], second[0])


def gen_fv_numeric(
    table: NgtTable,
    cfg: RulegenConfig,
    rng: np.random.Generator,
    *,
    category: str,
    count: int | None = None,
    start_index: int = 0,
    schedules: Schedules | None = None,
    bank: Sequence[Template] | None = None,
) -> list[QaRecord]:
    """Generate FV original/contrapositive pairs for one scene and category.

    ``count`` is the number of records (two per pair); ``start_index`` is the
    absolute pair index of this scene's first pair within the global stratum,
    which drives the balance schedules.  Raises
    :class:`InsufficientCandidatesError` when the scene cannot supply enough
    referent tuples.
    """
    if category not in NUMERIC_CATEGORIES:
        raise SceneQaError(f"FV generation needs a numeric category, got {category!r}")
    bank = bank if bank is not None else default_bank()
    schedules = schedules if schedules is not None else build_schedules(0)
    total = cfg.fv_count(category) if count is None else count
    if total % 2:
        raise SceneQaError("FV record count must be even")
    n_pairs = total // 2
    if n_pairs == 0:
        return []

    items = {
        CAT_QUANTITY: _quantity_items,
        CAT_DISTANCE: _distance_items,
        CAT_VOLUME: _volume_items,
    }[category](table)
    pool = _ValuePool(items, cfg.ambiguity_margin, cfg.approx_band_in,
                      cfg.approx_band_out, cfg.max_draw_attempts)
    pairs = fv_pairs(bank, category)

    records: list[QaRecord] = []
    produced = 0
    for offset in range(n_pairs):
        k = start_index + offset
        target = schedules.fv_target(category, k)
        group = pairs[schedules.fv_group(category, k)]
        member = schedules.fv_member(category, k)
        t_orig, t_cp = group[member], group[1 - member]

        if t_orig.predicate in (PRED_APPROX_EQUAL, PRED_NOT_APPROX_EQUAL):
            close = (t_orig.predicate == PRED_APPROX_EQUAL) == (target == ANSWER_YES)
            draw = pool.draw_approx(rng, close)
            if draw is None:
                break
            first, second = draw
        else:
            draw = pool.draw_strict(rng)
            if draw is None:
                break
            first, second = _orient_strict(t_orig.predicate, target, *draw)

        bindings = _fv_bindings(category, first, second)
        base_id = f"{table.scene_id}-fv-{category}-{k:05d}"
        cp_id = f"{base_id}-cp"
        flip = ANSWER_NO if target == ANSWER_YES else ANSWER_YES
        records.append(QaRecord(
            qa_id=base_id, scene_id=table.scene_id, task=TASK_FV,
            category=category, question=instantiate(t_orig, bindings),
            answer=target, gt_value=None, unit="", cp_link=cp_id,
            variant=VARIANT_PLAIN, provenance=PROVENANCE_RULE,
            template_id=t_orig.template_id, referents=bindings,
        ))
        records.append(QaRecord(
            qa_id=cp_id, scene_id=table.scene_id, task=TASK_FV,
            category=category, question=instantiate(t_cp, bindings),
            answer=flip, gt_value=None, unit="", cp_link=base_id,
            variant=VARIANT_PLAIN, provenance=PROVENANCE_RULE,
            template_id=t_cp.template_id, referents=bindings,
        ))
        produced += 1

    if produced < n_pairs:
        raise InsufficientCandidatesError(
            f"scene {table.scene_id}: fv/{category} produced {produced} of "
            f"{n_pairs} pairs",
            shortfalls={f"fv/{category}": (2 * n_pairs, 2 * produced)},
        )
    return records


# ---------------------------------------------------------------------------
# NI generation
# ---------------------------------------------------------------------------


def gen_ni(
    table: NgtTable,
    cfg: RulegenConfig,
    rng: np.random.Generator,
    *,
    category: str,
    count: int | None = None,
    start_index: int = 0,
    schedules: Schedules | None = None,
    bank: Sequence[Template] | None = None,
) -> list[QaRecord]:
    """Generate NI records for one scene and category.

    Distance and volume referents must display at or above
    ``cfg.min_display_value`` so the two-decimal rendered answer stays within
    the tightest scoring threshold of the true value.
    """
    if category not in NUMERIC_CATEGORIES:
        raise SceneQaError(f"NI generation needs a numeric category, got {category!r}")
    bank = bank if bank is not None else default_bank()
    schedules = schedules if schedules is not None else build_schedules(0)
    total = cfg.ni_count(category) if count is None else count
    if total == 0:
        return []

    if category == CAT_QUANTITY:
        items = _quantity_items(table)
    elif category == CAT_DISTANCE:
        items = [
            (key, value) for key, value in _distance_items(table)
            if value >= cfg.min_display_value
        ]
    else:
        items = [
            (key, value) for key, value in _volume_items(table)
            if value >= cfg.min_display_value
        ]
    if not items:
        raise InsufficientCandidatesError(
            f"scene {table.scene_id}: ni/{category} has no eligible referents",
            shortfalls={f"ni/{category}": (total, 0)},
        )
    ordered = templates_for(bank, TASK_NI, category)

    records: list[QaRecord] = []
    for offset in range(total):
        k = start_index + offset
        template = ordered[schedules.ni_template_index(category, k)]
        key, value = items[int(rng.integers(len(items)))]
        referents = key if isinstance(key, tuple) else (key,)
        if category == CAT_QUANTITY:
            answer = render_count(value)
        else:
            answer = render_decimal(value)
        records.append(QaRecord(
            qa_id=f"{table.scene_id}-ni-{category}-{k:05d}",
            scene_id=table.scene_id, task=TASK_NI, category=category,
            question=instantiate(template, referents), answer=answer,
            gt_value=float(value), unit=template.unit, cp_link=None,
            variant=VARIANT_PLAIN, provenance=PROVENANCE_RULE,
            template_id=template.template_id, referents=referents,
        ))
    return records


# ---------------------------------------------------------------------------
# Chain-of-thought variants
# ---------------------------------------------------------------------------

_REL_LESS = "less than"
_REL_GREATER = "greater than"
_REL_EQUAL = "equal to"
_REL_APPROX = "approximately equal to"
_REL_NOT_APPROX = "not approximately equal to"


def _relation_phrase(predicate: str, v1: float, v2: float, band_in: float) -> str:
    if predicate in (PRED_APPROX_EQUAL, PRED_NOT_APPROX_EQUAL):
        close = evaluate_predicate(PRED_APPROX_EQUAL, v1, v2, band_in)
        return _REL_APPROX if close else _REL_NOT_APPROX
    if v1 < v2:
        return _REL_LESS
    if v1 > v2:
        return _REL_GREATER
    return _REL_EQUAL


def _fv_chain(record: QaRecord, template: Template, values: list[float],
              band_in: float) -> str:
    rel = _relation_phrase(template.predicate, values[0], values[1], band_in)
    r = record.referents
    if record.category == CAT_QUANTITY:
        return (
            f"Given the count of {r[0]} as {render_count(values[0])} and the "
            f"count of {r[1]} as {render_count(values[1])}, the count of "
            f"{r[0]} is {rel} the count of {r[1]}. Therefore, the answer is "
            f"{record.answer}."
        )
    if record.category == CAT_VOLUME:
        return (
            f"Given the volume of the bounding box of {r[0]} as "
            f"{render_decimal(values[0])} cubic meters and the volume of the "
            f"bounding box of {r[1]} as {render_decimal(values[1])} cubic "
            f"meters, the volume of the bounding box of {r[0]} is {rel} the "
            f"volume of the bounding box of {r[1]}. Therefore, the answer is "
            f"{record.answer}."
        )
    return (
        f"The distance between {r[0]} and {r[1]} is approximately "
        f"{render_decimal(values[0])} meters. The distance between {r[2]} and "
        f"{r[3]} is approximately {render_decimal(values[1])} meters. Since "
        f"the distance between {r[0]} and {r[1]} is {rel} the distance "
        f"between {r[2]} and {r[3]}, the answer is {record.answer}."
    )


def _ni_chain(record: QaRecord, table: NgtTable) -> str:
    r = record.referents
    if record.category == CAT_QUANTITY:
        return (
            f"Counting each {r[0]} in the room gives {record.answer} in "
            f"total. Therefore, the answer is {record.answer}."
        )
    if record.category == CAT_DISTANCE:
        return (
            f"The closest points of the convex hulls of the {r[0]} and the "
            f"{r[1]} are approximately {record.answer} meters apart. "
            f"Therefore, the answer is {record.answer}."
        )
    inst = table.unique_label_instances()[r[0]]
    dx, dy, dz = (render_decimal(d) for d in inst.dims)
    return (
        f"Given the bounding box dimensions of the {r[0]} along the X, Y, and "
        f"Z axes as {dx} m, {dy} m, and {dz} m respectively, the volume of "
        f"the bounding box is calculated as (length x width x height), "
        f"yielding approximately {record.answer} cubic meters. Therefore, "
        f"the answer is {record.answer}."
    )


def gen_cot_variant(
    record: QaRecord,
    table: NgtTable,
    cfg: RulegenConfig | None = None,
    bank: Sequence[Template] | None = None,
) -> QaRecord:
    """Derive the chain-of-thought twin of a rule-generated record.

    The question keeps the template body but swaps the answer-format suffix
    for a step-by-step instruction; the answer becomes a short reasoning
    chain that restates the ground-truth values and ends with the original
    answer.  The chain's final token is the answer, which is what variant-
    aware extraction reads back.
    """
    if record.provenance != PROVENANCE_RULE or record.template_id is None:
        raise SceneQaError("chain-of-thought variants need a rule-generated record")
    if record.variant != VARIANT_PLAIN:
        raise SceneQaError(f"record {record.qa_id} already has variant {record.variant}")
    cfg = cfg if cfg is not None else RulegenConfig()
    bank = bank if bank is not None else default_bank()
    template = bank_by_id(bank)[record.template_id]
    body = instantiate(
        Template(template.template_id, template.task, template.category,
                 template.text, "", template.arity, template.unit,
                 template.predicate, template.cp_template_id),
        record.referents,
    ).strip()
    question = f"{body} {COT_SUFFIX}"
    if record.task == TASK_FV:
        values = referent_values(record.category, record.referents, table)
        answer = _fv_chain(record, template, values, cfg.approx_band_in)
    else:
        answer = _ni_chain(record, table)
    return QaRecord(
        qa_id=f"{record.qa_id}-cot",
        scene_id=record.scene_id, task=record.task, category=record.category,
        question=question, answer=answer, gt_value=record.gt_value,
        unit=record.unit,
        cp_link=None if record.cp_link is None else f"{record.cp_link}-cot",
        variant=VARIANT_COT, provenance=record.provenance,
        template_id=record.template_id, referents=record.referents,
    )


# ---------------------------------------------------------------------------
# Dataset-level driver
# ---------------------------------------------------------------------------


def _split_quota(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def _twin_selector(total: int, fraction: float):
    """Choose which absolute indices get a chain-of-thought twin.

    The answer alternation cycles mod 2 and the template schedules cycle mod 5
    or mod 10, so balancing the twinned subset needs its indices spread evenly
    across residue classes mod 10.  Each class gets floor/ceil(T/10) twins,
    placed evenly within the class.  (Class quotas never exceed class sizes:
    quota_r = ceil((T - r) / 10) <= ceil((total - r) / 10) = size_r.)
    """
    twins = int(round(fraction * total))
    base, extra = divmod(twins, 10)
    quotas = [base + (1 if r < extra else 0) for r in range(10)]
    sizes = [(total - r + 9) // 10 if total > r else 0 for r in range(10)]

    def selected(k: int) -> bool:
        r, m = k % 10, k // 10
        q, size = quotas[r], sizes[r]
        if size == 0 or q == 0:
            return False
        return (m + 1) * q // size > m * q // size

    return selected


def generate_rule_dataset(
    tables: Sequence[NgtTable],
    cfg: RulegenConfig,
    master_seed: int,
    bank: Sequence[Template] | None = None,
) -> list[QaRecord]:
    """Generate the full rule-based dataset across scenes.

    Scenes are processed in sorted scene-id order with per-scene derived RNG
    streams; quotas are split evenly with the remainder on the earliest
    scenes.  Chain-of-thought twins are added for the leading
    ``cot_fraction`` share of each scene's stream.  All per-scene shortfalls
    are gathered into one :class:`InsufficientCandidatesError`.
    """
    bank = bank if bank is not None else default_bank()
    schedules = build_schedules(master_seed)
    ordered = sorted(tables, key=lambda t: t.scene_id)
    if not ordered:
        raise SceneQaError("no NGT tables supplied")
    n = len(ordered)

    fv_quota = {cat: _split_quota(cfg.fv_count(cat) // 2, n) for cat in NUMERIC_CATEGORIES}
    ni_quota = {cat: _split_quota(cfg.ni_count(cat), n) for cat in NUMERIC_CATEGORIES}
    fv_twin = {cat: _twin_selector(cfg.fv_count(cat) // 2, cfg.cot_fraction)
               for cat in NUMERIC_CATEGORIES}
    ni_twin = {cat: _twin_selector(cfg.ni_count(cat), cfg.cot_fraction)
               for cat in NUMERIC_CATEGORIES}

    records: list[QaRecord] = []
    shortfalls: dict[str, list[int]] = {}
    details: list[str] = []

    for si, table in enumerate(ordered):
        rng = np.random.default_rng(derive_seed(master_seed, f"rulegen:{table.scene_id}"))
        plain: list[QaRecord] = []
        cot: list[QaRecord] = []
        for cat in NUMERIC_CATEGORIES:
            pairs_here = fv_quota[cat][si]
            start = sum(fv_quota[cat][:si])
            try:
                chunk = gen_fv_numeric(
                    table, cfg, rng, category=cat, count=2 * pairs_here,
                    start_index=start, schedules=schedules, bank=bank,
                )
            except InsufficientCandidatesError as exc:
                for stratum, (req, got) in exc.shortfalls.items():
                    agg = shortfalls.setdefault(stratum, [0, 0])
                    agg[0] += req
                    agg[1] += got
                details.append(str(exc))
                continue
            plain.extend(chunk)
            for offset in range(pairs_here):
                if fv_twin[cat](start + offset):
                    for rec in chunk[2 * offset: 2 * offset + 2]:
                        cot.append(gen_cot_variant(rec, table, cfg, bank))
        for cat in NUMERIC_CATEGORIES:
            count_here = ni_quota[cat][si]
            start = sum(ni_quota[cat][:si])
            try:
                chunk = gen_ni(
                    table, cfg, rng, category=cat, count=count_here,
                    start_index=start, schedules=schedules, bank=bank,
                )
            except InsufficientCandidatesError as exc:
                for stratum, (req, got) in exc.shortfalls.items():
                    agg = shortfalls.setdefault(stratum, [0, 0])
                    agg[0] += req
                    agg[1] += got
                details.append(str(exc))
                continue
            plain.extend(chunk)
            for offset in range(count_here):
                if ni_twin[cat](start + offset):
                    cot.append(gen_cot_variant(chunk[offset], table, cfg, bank))
        records.extend(plain)
        records.extend(cot)

    if shortfalls:
        summary = "; ".join(
            f"{stratum}: {got}/{req}" for stratum, (req, got) in sorted(shortfalls.items())
        )
        raise InsufficientCandidatesError(
            f"generation shortfall ({summary}): " + " | ".join(details[:5]),
            shortfalls={k: (req, got) for k, (req, got) in shortfalls.items()},
        )
    return records


# ---------------------------------------------------------------------------
# Balance accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StratumBalance:
    total: int
    answers: dict[str, int]
    original_answers: dict[str, int]
    cp_answers: dict[str, int]
    template_usage: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "answers": dict(sorted(self.answers.items())),
            "original_answers": dict(sorted(self.original_answers.items())),
            "cp_answers": dict(sorted(self.cp_answers.items())),
            "template_usage": dict(sorted(self.template_usage.items())),
        }


@dataclass(frozen=True)
class BalanceReport:
    strata: dict[str, StratumBalance]

    def to_dict(self) -> dict:
        return {key: self.strata[key].to_dict() for key in sorted(self.strata)}


def stratum_key(record: QaRecord) -> str:
    return f"{record.task}/{record.category}/{record.variant}"


def build_balance_report(records: Iterable[QaRecord]) -> BalanceReport:
    buckets: dict[str, list[QaRecord]] = {}
    for rec in records:
        buckets.setdefault(stratum_key(rec), []).append(rec)
    strata = {}
    for key, recs in buckets.items():
        answers: dict[str, int] = {}
        originals: dict[str, int] = {}
        cps: dict[str, int] = {}
        usage: dict[str, int] = {}
        for rec in recs:
            label = rec.answer if rec.task != TASK_NI else "numeric"
            if rec.task == TASK_FV and rec.variant == VARIANT_COT:
                # chain answers end with the yes/no verdict
                label = ANSWER_YES if rec.answer.rstrip(".").endswith(ANSWER_YES) else ANSWER_NO
            answers[label] = answers.get(label, 0) + 1
            if rec.task == TASK_FV:
                side = cps if rec.is_contrapositive else originals
                side[label] = side.get(label, 0) + 1
            if rec.template_id is not None:
                usage[rec.template_id] = usage.get(rec.template_id, 0) + 1
        strata[key] = StratumBalance(len(recs), answers, originals, cps, usage)
    return BalanceReport(strata)


def balance_violations(report: BalanceReport) -> list[str]:
    """Tolerance check: FV yes/no within 1 (overall and per stream), PM
    letters within 1 of N/5, template usage within 1 of N/10."""
    problems = []
    for key, s in sorted(report.strata.items()):
        task = key.split("/")[0]
        if task == TASK_FV:
            for name, counter in (("all", s.answers), ("originals", s.original_answers),
                                  ("contrapositives", s.cp_answers)):
                yes = counter.get(ANSWER_YES, 0)
                no = counter.get(ANSWER_NO, 0)
                stray = {k: v for k, v in counter.items() if k not in (ANSWER_YES, ANSWER_NO)}
                if stray:
                    problems.append(f"{key}: non-yes/no FV answers {stray}")
                if abs(yes - no) > 1:
                    problems.append(f"{key}: {name} yes/no imbalance {yes} vs {no}")
        if task == TASK_PM and s.total:
            expected = s.total / 5.0
            for letter, got in sorted(s.answers.items()):
                if abs(got - expected) > 1.0:
                    problems.append(
                        f"{key}: letter {letter} used {got} times, expected "
                        f"{expected:.1f} +/- 1"
                    )
        if s.template_usage:
            expected = sum(s.template_usage.values()) / 10.0
            for template_id, got in sorted(s.template_usage.items()):
                if abs(got - expected) > 1.0:
                    problems.append(
                        f"{key}: template {template_id} used {got} times, "
                        f"expected {expected:.1f} +/- 1"
                    )
    return problems


def assemble_dataset(
    streams: Iterable[Iterable[QaRecord]],
    enforce_balance: bool = True,
) -> tuple[list[QaRecord], BalanceReport]:
    """Concatenate record streams, check id uniqueness and balance tolerances."""
    records: list[QaRecord] = []
    seen: set[str] = set()
    for stream in streams:
        for rec in stream:
            if rec.qa_id in seen:
                raise SchemaViolationError(f"duplicate qa_id {rec.qa_id!r}")
            seen.add(rec.qa_id)
            records.append(rec)
    report = build_balance_report(records)
    if enforce_balance:
        problems = balance_violations(report)
        if problems:
            raise SceneQaError(
                "balance tolerances breached: " + "; ".join(problems[:8])
            )
    return records, report
