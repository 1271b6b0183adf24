"""Rule-based QA generation: configs, schedules, balance, determinism."""

from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sceneqa.errors import (
    InsufficientCandidatesError,
    SceneQaError,
    SchemaViolationError,
)
from sceneqa.evaluate import gold_answer
from sceneqa.rulegen import (
    ANSWER_NO,
    ANSWER_YES,
    COT_SUFFIX,
    PROVENANCE_RULE,
    VARIANT_COT,
    VARIANT_PLAIN,
    QaRecord,
    RulegenConfig,
    _twin_selector,
    assemble_dataset,
    balance_violations,
    build_balance_report,
    build_schedules,
    gen_cot_variant,
    generate_rule_dataset,
    read_dataset,
    record_from_dict,
    referent_values,
    stratum_key,
    write_dataset,
)
from sceneqa.templates import (
    CAT_DISTANCE,
    CAT_QUANTITY,
    CAT_VOLUME,
    NUMERIC_CATEGORIES,
    PRED_APPROX_EQUAL,
    PRED_NOT_APPROX_EQUAL,
    TASK_FV,
    TASK_NI,
    bank_by_id,
    default_bank,
    evaluate_predicate,
)
from sceneqa.util import render_count, render_decimal

from conftest import MASTER_SEED


class TestRulegenConfig:
    def test_defaults_are_valid(self):
        cfg = RulegenConfig()
        assert cfg.cot_fraction == 0.0
        assert cfg.fv_count(CAT_QUANTITY) == 0
        assert cfg.ni_count(CAT_VOLUME) == 0

    def test_negative_count_rejected(self):
        with pytest.raises(SceneQaError, match="ni_distance"):
            RulegenConfig(ni_distance=-2)

    def test_odd_fv_count_rejected(self):
        # FV records come in original/contrapositive pairs
        with pytest.raises(SceneQaError, match="fv_volume must be even"):
            RulegenConfig(fv_volume=7)

    @pytest.mark.parametrize("fraction", [-0.1, 1.01, 5.0])
    def test_cot_fraction_range(self, fraction):
        with pytest.raises(SceneQaError, match="cot_fraction"):
            RulegenConfig(cot_fraction=fraction)

    @pytest.mark.parametrize(
        "band_in,band_out",
        [(0.3, 0.1), (0.2, 0.2), (0.0, 0.3), (0.1, 1.0)],
    )
    def test_approx_bands_must_nest(self, band_in, band_out):
        with pytest.raises(SceneQaError, match="approx_band"):
            RulegenConfig(approx_band_in=band_in, approx_band_out=band_out)

    @pytest.mark.parametrize("margin", [-0.01, 1.0])
    def test_ambiguity_margin_range(self, margin):
        with pytest.raises(SceneQaError, match="ambiguity_margin"):
            RulegenConfig(ambiguity_margin=margin)

    def test_count_lookup(self):
        cfg = RulegenConfig(fv_quantity=4, fv_distance=6, fv_volume=8,
                            ni_quantity=1, ni_distance=2, ni_volume=3)
        assert [cfg.fv_count(c) for c in NUMERIC_CATEGORIES] == [4, 6, 8]
        assert [cfg.ni_count(c) for c in NUMERIC_CATEGORIES] == [1, 2, 3]


class TestSchedules:
    def test_same_seed_same_schedules(self):
        a = build_schedules(MASTER_SEED)
        b = build_schedules(MASTER_SEED)
        assert a == b

    def test_fv_target_alternates_exactly(self):
        sched = build_schedules(MASTER_SEED)
        for cat in NUMERIC_CATEGORIES:
            seq = [sched.fv_target(cat, k) for k in range(10)]
            assert set(seq) == {ANSWER_YES, ANSWER_NO}
            assert seq.count(ANSWER_YES) == 5
            assert seq == seq[:2] * 5

    def test_fv_group_cycles_a_permutation(self):
        sched = build_schedules(MASTER_SEED)
        for cat in NUMERIC_CATEGORIES:
            cycle = [sched.fv_group(cat, k) for k in range(5)]
            assert sorted(cycle) == [0, 1, 2, 3, 4]
            assert [sched.fv_group(cat, k + 5) for k in range(5)] == cycle

    def test_fv_member_flips_every_full_cycle(self):
        sched = build_schedules(MASTER_SEED)
        for cat in NUMERIC_CATEGORIES:
            members = [sched.fv_member(cat, k) for k in range(20)]
            assert members[:5] != members[5:10]
            assert members[:10] == members[10:20]
            assert set(members) == {0, 1}

    def test_ni_template_order_is_a_permutation(self):
        sched = build_schedules(MASTER_SEED)
        for cat in NUMERIC_CATEGORIES:
            cycle = [sched.ni_template_index(cat, k) for k in range(10)]
            assert sorted(cycle) == list(range(10))

    def test_pm_letter_balance_and_subsets(self):
        sched = build_schedules(MASTER_SEED)
        seq = [sched.pm_letter(k) for k in range(25)]
        assert all(seq.count(ch) == 5 for ch in "ABCDE")
        reduced = [sched.pm_letter(k, n_options=3) for k in range(9)]
        assert set(reduced) == {"A", "B", "C"}
        assert all(reduced.count(ch) == 3 for ch in "ABC")

    def test_fv_indicator_alternates(self):
        sched = build_schedules(MASTER_SEED)
        seq = [sched.fv_indicator(k) for k in range(6)]
        assert set(seq[:2]) == {True, False}
        assert seq == seq[:2] * 3


class TestTwinSelector:
    @given(total=st.integers(0, 240),
           fraction=st.floats(0.0, 1.0, allow_nan=False))
    @settings(max_examples=80, deadline=None)
    def test_quota_and_spread(self, total, fraction):
        selected = _twin_selector(total, fraction)
        picks = [k for k in range(total) if selected(k)]
        assert len(picks) == int(round(fraction * total))
        per_class = [sum(1 for k in picks if k % 10 == r) for r in range(10)]
        assert max(per_class) - min(per_class) <= 1 if picks else True

    def test_extremes(self):
        all_on = _twin_selector(40, 1.0)
        assert all(all_on(k) for k in range(40))
        all_off = _twin_selector(40, 0.0)
        assert not any(all_off(k) for k in range(40))

    def test_half_takes_alternate_indices_per_class(self):
        selected = _twin_selector(40, 0.5)
        picks = [k for k in range(40) if selected(k)]
        assert len(picks) == 20
        for r in range(10):
            assert sum(1 for k in picks if k % 10 == r) == 2


_BASE_ID = re.compile(
    r"^[a-z0-9]+-(fv|ni)-(quantity|distance|volume)-\d{5}(-cp)?(-cot)?$"
)


class TestGeneratedDataset:
    """Structural checks on the session-wide generated dataset fixture."""

    def test_expected_record_counts(self, dataset, dataset_cfg):
        records, _ = dataset
        by_stratum: dict[str, int] = {}
        for rec in records:
            key = stratum_key(rec)
            by_stratum[key] = by_stratum.get(key, 0) + 1
        frac = dataset_cfg.cot_fraction
        for cat in NUMERIC_CATEGORIES:
            fv = dataset_cfg.fv_count(cat)
            ni = dataset_cfg.ni_count(cat)
            assert by_stratum[f"fv/{cat}/plain"] == fv
            # twin selection runs over original/cp pairs, then mirrors
            assert by_stratum[f"fv/{cat}/cot"] == 2 * int(round(frac * fv // 2))
            assert by_stratum[f"ni/{cat}/plain"] == ni
            assert by_stratum[f"ni/{cat}/cot"] == int(round(frac * ni))

    def test_no_balance_violations(self, dataset):
        _, report = dataset
        assert balance_violations(report) == []

    def test_qa_id_convention(self, dataset):
        records, _ = dataset
        for rec in records:
            assert _BASE_ID.match(rec.qa_id), rec.qa_id
            assert rec.qa_id.startswith(f"{rec.scene_id}-{rec.task}-{rec.category}-")
            assert rec.is_cot == (rec.variant == VARIANT_COT)
            assert rec.provenance == PROVENANCE_RULE

    def test_fv_contrapositive_involution(self, dataset):
        records, _ = dataset
        by_id = {rec.qa_id: rec for rec in records}
        flip = {ANSWER_YES: ANSWER_NO, ANSWER_NO: ANSWER_YES}
        for rec in records:
            if rec.task != TASK_FV:
                assert rec.cp_link is None
                continue
            partner = by_id[rec.cp_link]
            assert partner.cp_link == rec.qa_id
            assert partner.qa_id != rec.qa_id
            assert rec.is_contrapositive != partner.is_contrapositive
            assert gold_answer(partner) == flip[gold_answer(rec)]
            assert partner.scene_id == rec.scene_id
            assert partner.category == rec.category
            assert partner.variant == rec.variant
            assert partner.referents == rec.referents

    def test_cp_pairs_use_inverse_templates(self, dataset):
        records, _ = dataset
        by_id = {rec.qa_id: rec for rec in records}
        templates = bank_by_id(default_bank())
        for rec in records:
            if rec.task != TASK_FV or rec.is_contrapositive:
                continue
            partner = by_id[rec.cp_link]
            assert templates[rec.template_id].cp_template_id == partner.template_id
            assert templates[partner.template_id].cp_template_id == rec.template_id

    def test_cot_twins_share_everything_but_presentation(self, dataset):
        records, _ = dataset
        by_id = {rec.qa_id: rec for rec in records}
        twins = 0
        for rec in records:
            if not rec.is_cot:
                continue
            twins += 1
            plain = by_id[rec.qa_id[: -len("-cot")]]
            assert plain.variant == VARIANT_PLAIN
            assert rec.question.endswith(COT_SUFFIX)
            assert rec.answer.endswith(f"the answer is {plain.answer}.")
            assert gold_answer(rec) == plain.answer
            assert rec.template_id == plain.template_id
            assert rec.referents == plain.referents
            assert rec.gt_value == plain.gt_value
        assert twins > 0

    def test_fv_answers_match_recomputed_truth(self, dataset, tables):
        records, _ = dataset
        templates = bank_by_id(default_bank())
        cfg = RulegenConfig()
        for rec in records:
            if rec.task != TASK_FV:
                continue
            tpl = templates[rec.template_id]
            values = referent_values(rec.category, rec.referents, tables[rec.scene_id])
            truth = evaluate_predicate(tpl.predicate, values[0], values[1],
                                       cfg.approx_band_in)
            assert gold_answer(rec) == (ANSWER_YES if truth else ANSWER_NO)

    def test_ni_answers_render_ground_truth(self, dataset, tables):
        records, _ = dataset
        for rec in records:
            if rec.task != TASK_NI:
                continue
            (value,) = referent_values(rec.category, rec.referents,
                                       tables[rec.scene_id])
            assert rec.gt_value == pytest.approx(value, abs=1e-12)
            if rec.category == CAT_QUANTITY:
                assert gold_answer(rec) == render_count(rec.gt_value)
            else:
                assert gold_answer(rec) == render_decimal(rec.gt_value)

    def test_strict_pairs_respect_ambiguity_margin(self, dataset, tables, dataset_cfg):
        records, _ = dataset
        templates = bank_by_id(default_bank())
        approx = {PRED_APPROX_EQUAL, PRED_NOT_APPROX_EQUAL}
        checked_strict = checked_approx = 0
        for rec in records:
            if rec.task != TASK_FV or rec.variant != VARIANT_PLAIN:
                continue
            v1, v2 = referent_values(rec.category, rec.referents,
                                     tables[rec.scene_id])
            ratio = min(v1, v2) / max(v1, v2)
            if templates[rec.template_id].predicate in approx:
                checked_approx += 1
                inside = ratio >= (1.0 - dataset_cfg.approx_band_in) - 1e-12
                outside = ratio < (1.0 - dataset_cfg.approx_band_out) + 1e-12
                assert inside or outside, (rec.qa_id, ratio)
            else:
                checked_strict += 1
                assert v1 != v2
                assert abs(v1 - v2) >= dataset_cfg.ambiguity_margin * max(v1, v2) - 1e-12
        assert checked_strict > 0 and checked_approx > 0

    def test_ni_display_floor_respected(self, dataset, dataset_cfg):
        records, _ = dataset
        for rec in records:
            if rec.task == TASK_NI:
                assert rec.gt_value >= dataset_cfg.min_display_value


class TestAwkwardConfigs:
    @pytest.mark.parametrize(
        "fv,ni,frac",
        [(62, 31, 0.37), (14, 7, 0.9), (20, 13, 1.0), (6, 3, 0.0)],
    )
    def test_balance_holds_for_uneven_targets(self, tables, fv, ni, frac):
        cfg = RulegenConfig(fv_quantity=fv, fv_distance=fv, fv_volume=fv,
                            ni_quantity=ni, ni_distance=ni, ni_volume=ni,
                            cot_fraction=frac)
        records = generate_rule_dataset(list(tables.values()), cfg, MASTER_SEED)
        report = build_balance_report(records)
        assert balance_violations(report) == []
        expected = 3 * (fv + 2 * int(round(frac * (fv // 2)))
                        + ni + int(round(frac * ni)))
        assert len(records) == expected


class TestDeterminism:
    def test_rerun_is_identical(self, tables, dataset_cfg):
        first = generate_rule_dataset(list(tables.values()), dataset_cfg, MASTER_SEED)
        second = generate_rule_dataset(list(tables.values()), dataset_cfg, MASTER_SEED)
        assert [r.to_dict() for r in first] == [r.to_dict() for r in second]

    def test_table_order_does_not_matter(self, tables, dataset_cfg):
        ordered = list(tables.values())
        forward = generate_rule_dataset(ordered, dataset_cfg, MASTER_SEED)
        backward = generate_rule_dataset(list(reversed(ordered)), dataset_cfg,
                                         MASTER_SEED)
        assert [r.to_dict() for r in forward] == [r.to_dict() for r in backward]

    def test_seed_changes_the_dataset(self, tables, dataset_cfg):
        base = generate_rule_dataset(list(tables.values()), dataset_cfg, MASTER_SEED)
        other = generate_rule_dataset(list(tables.values()), dataset_cfg, MASTER_SEED + 1)
        assert [r.to_dict() for r in base] != [r.to_dict() for r in other]

    def test_empty_table_list_rejected(self, dataset_cfg):
        with pytest.raises(SceneQaError, match="no NGT tables"):
            generate_rule_dataset([], dataset_cfg, MASTER_SEED)


class TestShortfall:
    def test_infeasible_display_floor_reports_shortfall(self, tables):
        cfg = RulegenConfig(ni_distance=6, min_display_value=1000.0)
        with pytest.raises(InsufficientCandidatesError) as exc_info:
            generate_rule_dataset(list(tables.values()), cfg, MASTER_SEED)
        shortfalls = exc_info.value.shortfalls
        assert shortfalls, "expected per-stratum shortfall detail"
        for stratum, (requested, achieved) in shortfalls.items():
            assert "distance" in stratum
            assert achieved < requested

    def test_feasible_large_quantity_target_succeeds(self, tables):
        # pools draw with replacement, so sheer count never exhausts them
        cfg = RulegenConfig(ni_quantity=200)
        records = generate_rule_dataset(list(tables.values()), cfg, MASTER_SEED)
        assert len(records) == 200


class TestCotVariantFunction:
    def test_requires_plain_rule_record(self, dataset, tables):
        records, _ = dataset
        cot = next(r for r in records if r.is_cot)
        with pytest.raises(SceneQaError, match="already has variant"):
            gen_cot_variant(cot, tables[cot.scene_id])

    def test_twin_of_twin_ids_never_appear(self, dataset):
        records, _ = dataset
        ids = {r.qa_id for r in records}
        assert not any(i.endswith("-cot-cot") for i in ids)


class TestSerialization:
    def test_to_dict_key_order(self, dataset):
        records, _ = dataset
        expected = ["qa_id", "scene_id", "task", "category", "question",
                    "answer", "gt_value", "unit", "cp_link", "variant",
                    "provenance", "template_id", "referents"]
        assert list(records[0].to_dict()) == expected

    def test_round_trip_through_dicts(self, dataset):
        records, _ = dataset
        for rec in records[:40]:
            assert record_from_dict(rec.to_dict()) == rec

    def test_round_trip_through_file(self, dataset, tmp_path):
        records, _ = dataset
        path = tmp_path / "dataset.jsonl"
        n = write_dataset(records, path)
        assert n == len(records)
        assert read_dataset(path) == list(records)

    def test_missing_key_names_source(self):
        row = {"qa_id": "x"}
        with pytest.raises(SchemaViolationError, match="somewhere.*missing keys"):
            record_from_dict(row, source="somewhere")

    def test_referents_must_be_string_list(self, dataset):
        row = dataset[0][0].to_dict()
        row["referents"] = "chair"
        with pytest.raises(SchemaViolationError, match="referents"):
            record_from_dict(row)


class TestAssembleDataset:
    def test_duplicate_ids_rejected(self, dataset):
        records, _ = dataset
        with pytest.raises(SchemaViolationError, match="duplicate qa_id"):
            assemble_dataset([records, records[:1]])

    def test_unbalanced_stream_rejected(self, dataset):
        records, _ = dataset
        fv_yes = [r for r in records
                  if r.task == TASK_FV and r.variant == VARIANT_PLAIN
                  and r.answer == ANSWER_YES]
        with pytest.raises(SceneQaError, match="balance tolerances breached"):
            assemble_dataset([fv_yes[:4]])

    def test_enforcement_can_be_disabled(self, dataset):
        records, _ = dataset
        fv_yes = [r for r in records
                  if r.task == TASK_FV and r.answer == ANSWER_YES]
        got, report = assemble_dataset([fv_yes[:4]], enforce_balance=False)
        assert len(got) == 4
        assert balance_violations(report)


class TestReferentValues:
    def test_quantity_counts(self, tables):
        table = tables[sorted(tables)[0]]
        counts = table.label_counts()
        label = next(iter(sorted(counts)))
        assert referent_values(CAT_QUANTITY, [label, label], table) == [
            float(counts[label]), float(counts[label])
        ]

    def test_distance_two_and_four_referents(self, tables):
        table = tables[sorted(tables)[0]]
        unique = table.unique_label_instances()
        labels = sorted(unique)[:4]
        two = referent_values(CAT_DISTANCE, labels[:2], table)
        four = referent_values(CAT_DISTANCE, labels, table)
        assert len(two) == 1 and len(four) == 2
        assert four[0] == two[0]

    def test_volume_unique_instances(self, tables):
        table = tables[sorted(tables)[0]]
        unique = table.unique_label_instances()
        label = sorted(unique)[0]
        (value,) = referent_values(CAT_VOLUME, [label], table)
        assert value == unique[label].volume

    def test_unknown_category_rejected(self, tables):
        with pytest.raises(SceneQaError, match="no referent values"):
            referent_values("weight", ["chair"], tables[sorted(tables)[0]])
