"""End-to-end pipeline: flat-file configuration plus the stage drivers the
command line exposes (synthesize scenes, extract ground truth, generate the
dataset, score predictions, self-check).

Every artifact is reproducible byte for byte from the seed: nothing written
here embeds timestamps, hostnames, or worker-dependent ordering.  The
``jobs`` knob only parallelizes geometry work whose results are reassembled
in a fixed order, so changing it cannot change any output file.
"""

from __future__ import annotations

import dataclasses
import glob as globlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .audit import SelfCheckResult, selfcheck
from .errors import (
    ConfigError,
    InsufficientCandidatesError,
    SceneQaError,
)
from .evaluate import (
    ConsistencyReport,
    EvalReport,
    consistency_report,
    format_report_table,
    read_predictions,
    score_records,
)
from .ngt import NgtTable, extract_ngt, read_ngt, write_ngt
from .rewrite import (
    EchoStubClient,
    HttpServiceClient,
    PROMPT_VERSION,
    load_saqs,
    run_rewrite_track,
)
from .rulegen import (
    RulegenConfig,
    assemble_dataset,
    generate_rule_dataset,
    read_dataset,
    write_dataset,
)
from .scene import (
    DEFAULT_EXCLUDED_LABELS,
    generate_synthetic_scene,
    load_scene,
    random_indoor_spec,
    truth_to_dict,
    write_scene,
)
from .templates import TEMPLATE_BANK_VERSION
from .util import derive_seed, write_json, write_jsonl

FORMAT_VERSION = "1.0.0"

# Keys that say how or where a run executes rather than what it produces
# (worker counts and filesystem locations).  They are excluded from the
# manifest echo so semantically identical runs stay byte-identical even when
# launched with different directories or parallelism.
_EXECUTION_ONLY_KEYS = ("jobs", "out_dir", "scenes", "ngt_dir", "synth_dir", "saq_file")


@dataclass
class PipelineConfig:
    seed: int = 0
    out_dir: str = "out"
    scenes: str = ""
    ngt_dir: str = ""
    excluded_labels: tuple[str, ...] = tuple(sorted(DEFAULT_EXCLUDED_LABELS))
    solver_tol: float = 1e-9
    jobs: int = 1

    fv_quantity: int = 0
    fv_distance: int = 0
    fv_volume: int = 0
    ni_quantity: int = 0
    ni_distance: int = 0
    ni_volume: int = 0
    cot_fraction: float = 0.0
    ambiguity_margin: float = 0.05
    approx_band_in: float = 0.10
    approx_band_out: float = 0.30
    min_display_value: float = 0.15

    rewrite_pm: int = 0
    rewrite_fv: int = 0
    n_options: int = 5
    saq_file: str = ""
    stub_llm: bool = False
    service_endpoint: str = ""
    service_model: str = ""
    service_timeout: float = 30.0
    service_retries: int = 2
    service_temperature: float | None = None
    service_max_tokens: int | None = None

    synth_scenes: int = 3
    synth_boxes: int = 41
    synth_points_per_box: int = 24
    synth_dir: str = ""

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        for name in ("fv_quantity", "fv_distance", "fv_volume", "ni_quantity",
                     "ni_distance", "ni_volume", "rewrite_pm", "rewrite_fv",
                     "synth_scenes", "synth_boxes", "synth_points_per_box"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 2 <= self.n_options <= 5:
            raise ConfigError("n_options must be between 2 and 5")
        if self.solver_tol <= 0:
            raise ConfigError("solver_tol must be positive")
        self.excluded_labels = tuple(
            str(label).strip().lower() for label in self.excluded_labels
        )

    @property
    def scene_glob(self) -> str:
        return self.scenes or str(Path(self.out_dir) / "scenes" / "*.scene.json")

    @property
    def ngt_path(self) -> Path:
        return Path(self.ngt_dir) if self.ngt_dir else Path(self.out_dir) / "ngt"

    @property
    def synth_path(self) -> Path:
        return Path(self.synth_dir) if self.synth_dir else Path(self.out_dir) / "scenes"

    def rulegen_config(self) -> RulegenConfig:
        try:
            return RulegenConfig(
                fv_quantity=self.fv_quantity, fv_distance=self.fv_distance,
                fv_volume=self.fv_volume, ni_quantity=self.ni_quantity,
                ni_distance=self.ni_distance, ni_volume=self.ni_volume,
                cot_fraction=self.cot_fraction,
                ambiguity_margin=self.ambiguity_margin,
                approx_band_in=self.approx_band_in,
                approx_band_out=self.approx_band_out,
                min_display_value=self.min_display_value,
            )
        except SceneQaError as exc:
            raise ConfigError(str(exc)) from exc

    def echo(self) -> dict:
        row = {}
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name in _EXECUTION_ONLY_KEYS:
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            row[f.name] = value
        return row


_CONFIG_FIELDS = {f.name for f in fields(PipelineConfig)}


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(data) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {unknown}")
    kwargs = dict(data)
    if "excluded_labels" in kwargs:
        value = kwargs["excluded_labels"]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError("excluded_labels must be a list of strings")
        kwargs["excluded_labels"] = tuple(value)
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> PipelineConfig:
    from .util import read_json

    if not Path(path).is_file():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        data = read_json(path)
    except SceneQaError as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def run_synth(cfg: PipelineConfig) -> list[Path]:
    """Write ``synth_scenes`` synthetic scenes (plus their analytic ground
    truth) under the scenes directory."""
    out = cfg.synth_path
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(cfg.synth_scenes):
        scene_id = f"synth{i:04d}"
        rng = np.random.default_rng(derive_seed(cfg.seed, f"synth:{scene_id}"))
        spec = random_indoor_spec(scene_id, rng, n_boxes=cfg.synth_boxes,
                                  points_per_box=cfg.synth_points_per_box)
        scene, truth = generate_synthetic_scene(
            spec, seed=derive_seed(cfg.seed, f"noise:{scene_id}")
        )
        scene_path = out / f"{scene_id}.scene.json"
        write_scene(scene, scene_path)
        write_json(truth_to_dict(truth), out / f"{scene_id}.truth.json")
        paths.append(scene_path)
    return paths


def run_extract(cfg: PipelineConfig) -> list[Path]:
    """Extract a ground-truth table for every scene matched by the glob."""
    scene_paths = sorted(globlib.glob(cfg.scene_glob))
    if not scene_paths:
        raise FileNotFoundError(f"no scene files match {cfg.scene_glob!r}")
    out = cfg.ngt_path
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for path in scene_paths:
        scene = load_scene(path)
        table = extract_ngt(scene, excluded_labels=frozenset(cfg.excluded_labels),
                            tol=cfg.solver_tol, jobs=cfg.jobs)
        target = out / f"{scene.scene_id}.ngt.json"
        write_ngt(table, target)
        written.append(target)
    return written


def _load_tables(ngt_dir: Path) -> list[NgtTable]:
    paths = sorted(ngt_dir.glob("*.ngt.json"))
    if not paths:
        raise FileNotFoundError(f"no ground-truth tables found in {ngt_dir}")
    return [read_ngt(path) for path in paths]


def _rewrite_client(cfg: PipelineConfig):
    if cfg.stub_llm:
        return EchoStubClient()
    if not cfg.service_endpoint or not cfg.service_model:
        raise ConfigError(
            "rewriting needs service_endpoint and service_model, or stub_llm "
            "for offline runs"
        )
    return HttpServiceClient(
        cfg.service_endpoint, cfg.service_model, timeout=cfg.service_timeout,
        retries=cfg.service_retries, temperature=cfg.service_temperature,
        max_tokens=cfg.service_max_tokens,
    )


@dataclass
class GenerateResult:
    n_records: int
    dataset_path: Path
    manifest_path: Path
    balance_path: Path
    run_log_path: Path
    task_counts: dict = field(default_factory=dict)


def run_generate(cfg: PipelineConfig) -> GenerateResult:
    """Produce dataset.jsonl plus its balance report, run log, and manifest."""
    tables = _load_tables(cfg.ngt_path)
    rule_records = generate_rule_dataset(tables, cfg.rulegen_config(), cfg.seed)
    streams = [rule_records]
    log_rows: list[dict] = []
    if cfg.rewrite_pm or cfg.rewrite_fv:
        if not cfg.saq_file:
            raise ConfigError("rewriting needs saq_file")
        saqs = load_saqs(cfg.saq_file)
        track = run_rewrite_track(saqs, cfg.rewrite_pm, cfg.rewrite_fv,
                                  _rewrite_client(cfg), cfg.seed,
                                  n_options=cfg.n_options)
        log_rows = track.log_rows
        if track.failed_jobs:
            requested = cfg.rewrite_pm + cfg.rewrite_fv
            raise InsufficientCandidatesError(
                f"{len(track.failed_jobs)} rewrite jobs exhausted their attempts "
                f"(first: {track.failed_jobs[0]})",
                shortfalls={"rewrite": (requested, requested - len(track.failed_jobs))},
            )
        streams.append(track.records)
    records, balance = assemble_dataset(streams)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path = out / "dataset.jsonl"
    write_dataset(records, dataset_path)
    balance_path = out / "balance_report.json"
    write_json(balance.to_dict(), balance_path)
    run_log_path = out / "run_log.jsonl"
    write_jsonl(log_rows, run_log_path)

    task_counts: dict[str, int] = {}
    for record in records:
        task_counts[record.task] = task_counts.get(record.task, 0) + 1
    manifest = {
        "format_version": FORMAT_VERSION,
        "package_version": __version__,
        "template_bank_version": TEMPLATE_BANK_VERSION,
        "prompt_version": PROMPT_VERSION,
        "seed": cfg.seed,
        "config": cfg.echo(),
        "scenes": [table.scene_id for table in tables],
        "n_records": len(records),
        "task_counts": {k: task_counts[k] for k in sorted(task_counts)},
        "artifacts": ["dataset.jsonl", "balance_report.json", "run_log.jsonl"],
    }
    manifest_path = out / "manifest.json"
    write_json(manifest, manifest_path)
    return GenerateResult(
        n_records=len(records), dataset_path=dataset_path,
        manifest_path=manifest_path, balance_path=balance_path,
        run_log_path=run_log_path, task_counts=task_counts,
    )


def run_score(dataset_path: str | Path, predictions_path: str | Path,
              out_path: str | Path | None = None,
              ) -> tuple[EvalReport, ConsistencyReport, str]:
    """Score a predictions file against a dataset; returns the reports and an
    aligned text table, optionally writing the combined JSON report."""
    records = read_dataset(dataset_path)
    predictions = read_predictions(predictions_path)
    report = score_records(records, predictions)
    consistency = consistency_report(records, predictions)
    variants = sorted({r.variant for r in records})
    tables = [
        f"[variant: {variant}]\n{format_report_table(report, variant=variant)}"
        for variant in variants
    ]
    table_text = "\n\n".join(tables)
    if out_path is not None:
        write_json(
            {"scores": report.to_dict(), "consistency": consistency.to_dict()},
            out_path,
        )
    return report, consistency, table_text


def run_selfcheck(dataset_path: str | Path,
                  ngt_dir: str | Path | None = None) -> SelfCheckResult:
    """Audit a dataset; with a table directory the stored answers are also
    re-derived from ground truth."""
    records = read_dataset(dataset_path)
    tables = None
    if ngt_dir is not None:
        tables = {table.scene_id: table for table in _load_tables(Path(ngt_dir))}
        needed = {
            r.scene_id for r in records
            if r.provenance == "rule" and r.template_id is not None
        }
        missing = sorted(needed - set(tables))
        if missing:
            raise FileNotFoundError(
                f"no ground-truth table for scenes: {missing[:5]}"
            )
    return selfcheck(records, tables=tables)


def apply_overrides(cfg: PipelineConfig, **overrides) -> PipelineConfig:
    """Return a copy of ``cfg`` with non-None overrides applied."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    if not changes:
        return cfg
    try:
        return dataclasses.replace(cfg, **changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
