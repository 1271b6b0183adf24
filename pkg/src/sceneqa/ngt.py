"""Numeric ground truth (NGT) extraction.

For every retained instance of a scene this computes centroid, axis-aligned
bounding box, box dims and box volume; for every unordered pair of retained
instances, the convex-hull distance.  Non-informative labels (by default
"item" and "object") are dropped before anything is measured.

Pairs whose distance solve fails to certify are recorded in ``skipped_pairs``
with a reason instead of aborting the scene; question generation never uses
them.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from . import geometry
from .errors import EmptyAfterFilterError, NotConvergedError, SchemaViolationError
from .scene import DEFAULT_EXCLUDED_LABELS, Scene
from .util import read_json, write_json


@dataclass(frozen=True)
class InstanceNgt:
    instance_id: str
    label: str
    centroid: tuple[float, float, float]
    aabb_min: tuple[float, float, float]
    aabb_max: tuple[float, float, float]
    dims: tuple[float, float, float]
    volume: float


def pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class NgtTable:
    """All numeric ground truth for one scene."""

    scene_id: str
    instances: tuple[InstanceNgt, ...]
    pairs: dict[tuple[str, str], float] = field(default_factory=dict)
    skipped_pairs: tuple[tuple[str, str, str], ...] = ()

    def label_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for inst in self.instances:
            counts[inst.label] = counts.get(inst.label, 0) + 1
        return counts

    def unique_label_instances(self) -> dict[str, InstanceNgt]:
        """Instances whose label appears exactly once (unambiguous referents)."""
        counts = self.label_counts()
        return {
            inst.label: inst for inst in self.instances if counts[inst.label] == 1
        }

    def by_id(self) -> dict[str, InstanceNgt]:
        return {inst.instance_id: inst for inst in self.instances}

    def distance(self, a: str, b: str) -> float:
        return self.pairs[pair_key(a, b)]

    def has_pair(self, a: str, b: str) -> bool:
        return pair_key(a, b) in self.pairs


def _measure_instance(inst) -> InstanceNgt:
    box = geometry.aabb(inst.points)
    return InstanceNgt(
        instance_id=inst.instance_id,
        label=inst.label,
        centroid=geometry.centroid(inst.points),
        aabb_min=box.min_corner,
        aabb_max=box.max_corner,
        dims=box.extents,
        volume=geometry.aabb_volume(box),
    )


def _pair_distance(task):
    coords_a, coords_b, tol = task
    try:
        return geometry.hull_distance(coords_a, coords_b, tol=tol).distance, ""
    except NotConvergedError as exc:
        return float("nan"), f"not_converged: {exc}"


def extract_ngt(
    scene: Scene,
    excluded_labels: Iterable[str] = DEFAULT_EXCLUDED_LABELS,
    tol: float = geometry.DEFAULT_TOL,
    jobs: int = 1,
) -> NgtTable:
    """Measure one scene into an :class:`NgtTable`.

    Instances are processed in sorted-id order and pair results are assembled
    by index, so the output is identical for any ``jobs`` value.
    Raises :class:`EmptyAfterFilterError` if label filtering removes every
    instance.
    """
    excluded = {str(lbl).strip().lower() for lbl in excluded_labels}
    retained = sorted(
        (inst for inst in scene.instances if inst.label not in excluded),
        key=lambda inst: inst.instance_id,
    )
    if not retained:
        raise EmptyAfterFilterError(
            f"scene {scene.scene_id!r}: no instances left after excluding labels "
            f"{sorted(excluded)}"
        )

    measured = tuple(_measure_instance(inst) for inst in retained)

    index_pairs = list(itertools.combinations(range(len(retained)), 2))
    tasks = [
        (retained[i].points.coords, retained[j].points.coords, tol)
        for i, j in index_pairs
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_pair_distance, tasks, chunksize=64))
    else:
        outcomes = [_pair_distance(task) for task in tasks]

    pairs: dict[tuple[str, str], float] = {}
    skipped: list[tuple[str, str, str]] = []
    for (i, j), (dist, reason) in zip(index_pairs, outcomes):
        key = pair_key(retained[i].instance_id, retained[j].instance_id)
        if reason:
            skipped.append((key[0], key[1], reason))
        else:
            pairs[key] = dist

    return NgtTable(scene.scene_id, measured, pairs, tuple(skipped))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def ngt_to_dict(table: NgtTable) -> dict:
    return {
        "scene_id": table.scene_id,
        "instances": [
            {
                "instance_id": inst.instance_id,
                "label": inst.label,
                "centroid": list(inst.centroid),
                "aabb_min": list(inst.aabb_min),
                "aabb_max": list(inst.aabb_max),
                "dims": list(inst.dims),
                "volume": inst.volume,
            }
            for inst in table.instances
        ],
        "pairs": [
            {"a": a, "b": b, "distance": d}
            for (a, b), d in sorted(table.pairs.items())
        ],
        "skipped_pairs": [
            {"a": a, "b": b, "reason": reason}
            for a, b, reason in table.skipped_pairs
        ],
    }


def _require(data: Mapping, key: str, source: str):
    if key not in data:
        raise SchemaViolationError(f"{source}: missing required key {key!r}")
    return data[key]


def ngt_from_dict(data, source: str = "<dict>") -> NgtTable:
    if not isinstance(data, dict):
        raise SchemaViolationError(f"{source}: NGT document must be an object")
    scene_id = _require(data, "scene_id", source)
    raw_instances = _require(data, "instances", source)
    raw_pairs = _require(data, "pairs", source)
    raw_skipped = _require(data, "skipped_pairs", source)
    if not isinstance(scene_id, str) or not scene_id:
        raise SchemaViolationError(f"{source}: 'scene_id' must be a non-empty string")
    if not isinstance(raw_instances, list) or not raw_instances:
        raise SchemaViolationError(f"{source}: 'instances' must be a non-empty list")
    if not isinstance(raw_pairs, list) or not isinstance(raw_skipped, list):
        raise SchemaViolationError(f"{source}: 'pairs'/'skipped_pairs' must be lists")

    instances = []
    for pos, row in enumerate(raw_instances):
        try:
            instances.append(
                InstanceNgt(
                    instance_id=str(row["instance_id"]),
                    label=str(row["label"]),
                    centroid=tuple(float(c) for c in row["centroid"]),
                    aabb_min=tuple(float(c) for c in row["aabb_min"]),
                    aabb_max=tuple(float(c) for c in row["aabb_max"]),
                    dims=tuple(float(c) for c in row["dims"]),
                    volume=float(row["volume"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolationError(
                f"{source}: instances[{pos}] malformed: {exc}"
            ) from exc

    ids = [inst.instance_id for inst in instances]
    if len(set(ids)) != len(ids):
        raise SchemaViolationError(f"{source}: duplicate instance ids")

    pairs: dict[tuple[str, str], float] = {}
    for pos, row in enumerate(raw_pairs):
        try:
            key = pair_key(str(row["a"]), str(row["b"]))
            pairs[key] = float(row["distance"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolationError(f"{source}: pairs[{pos}] malformed: {exc}") from exc
    skipped = []
    for pos, row in enumerate(raw_skipped):
        try:
            skipped.append((str(row["a"]), str(row["b"]), str(row["reason"])))
        except (KeyError, TypeError) as exc:
            raise SchemaViolationError(
                f"{source}: skipped_pairs[{pos}] malformed: {exc}"
            ) from exc

    id_set = set(ids)
    expected = {pair_key(a, b) for a, b in itertools.combinations(sorted(id_set), 2)}
    covered = set(pairs) | {pair_key(a, b) for a, b, _ in skipped}
    if covered != expected:
        raise SchemaViolationError(
            f"{source}: pair coverage mismatch: {len(covered)} recorded vs "
            f"{len(expected)} expected unordered pairs"
        )

    return NgtTable(scene_id, tuple(instances), pairs, tuple(skipped))


def write_ngt(table: NgtTable, path: str | Path) -> None:
    write_json(ngt_to_dict(table), path)


def read_ngt(path: str | Path) -> NgtTable:
    return ngt_from_dict(read_json(path), source=str(path))
