"""Scene model: annotated 3D scenes, loaders, and synthetic-scene generation.

A scene is a set of labeled instances, each carrying a point set sampled from
the object's surface or volume.  Scenes arrive three ways:

* native JSON (:func:`load_scene` / :func:`write_scene`), the package's own
  lossless interchange format;
* mesh + segmentation + aggregation triplets as shipped by common RGB-D scan
  datasets (:func:`import_scan_triplet`);
* synthetic generation (:func:`generate_synthetic_scene`), which also returns
  exact analytic ground truth so downstream extraction can be audited without
  any numerical slack.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import geometry
from .errors import (
    InconsistentTripletError,
    InvalidSpecError,
    MalformedFileError,
    SchemaViolationError,
)
from .util import read_json, write_json

DEFAULT_EXCLUDED_LABELS = frozenset({"item", "object"})


class PointSet:
    """An immutable (n, 3) block of finite float64 coordinates, n >= 1."""

    __slots__ = ("_coords",)

    def __init__(self, coords):
        arr = np.asarray(coords, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise SchemaViolationError(
                f"point set must have shape (n, 3), got {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise SchemaViolationError("point set must contain at least one point")
        if not np.all(np.isfinite(arr)):
            raise SchemaViolationError("point set contains non-finite coordinates")
        arr = arr.copy()
        arr.setflags(write=False)
        self._coords = arr

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    def __len__(self) -> int:
        return self._coords.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return np.array_equal(self._coords, other._coords)

    def __hash__(self):  # pragma: no cover - mutability guard only
        return hash((self._coords.shape[0], self._coords.tobytes()))

    def __repr__(self) -> str:
        return f"PointSet(n={len(self)})"


@dataclass(frozen=True)
class Instance:
    """One annotated object.  Labels are normalized to lowercase at creation."""

    instance_id: str
    label: str
    points: PointSet

    def __post_init__(self):
        if not self.instance_id:
            raise SchemaViolationError("instance_id must be non-empty")
        norm = self.label.strip().lower()
        if not norm:
            raise SchemaViolationError(
                f"instance {self.instance_id!r}: label must be non-empty"
            )
        object.__setattr__(self, "label", norm)


@dataclass(frozen=True)
class Scene:
    scene_id: str
    instances: tuple[Instance, ...]

    def __post_init__(self):
        if not self.scene_id:
            raise SchemaViolationError("scene_id must be non-empty")
        object.__setattr__(self, "instances", tuple(self.instances))
        if not self.instances:
            raise SchemaViolationError(f"scene {self.scene_id!r} has no instances")
        ids = [inst.instance_id for inst in self.instances]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise SchemaViolationError(
                f"scene {self.scene_id!r}: duplicate instance ids {dupes}"
            )

    def label_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for inst in self.instances:
            counts[inst.label] = counts.get(inst.label, 0) + 1
        return counts


# ---------------------------------------------------------------------------
# Native JSON interchange
# ---------------------------------------------------------------------------


def scene_to_dict(scene: Scene) -> dict:
    return {
        "scene_id": scene.scene_id,
        "instances": [
            {
                "instance_id": inst.instance_id,
                "label": inst.label,
                "points": inst.points.coords.tolist(),
            }
            for inst in scene.instances
        ],
    }


def scene_from_dict(data, source: str = "<dict>") -> Scene:
    if not isinstance(data, dict):
        raise SchemaViolationError(f"{source}: scene document must be an object")
    scene_id = data.get("scene_id")
    if not isinstance(scene_id, str) or not scene_id:
        raise SchemaViolationError(f"{source}: 'scene_id' must be a non-empty string")
    raw_instances = data.get("instances")
    if not isinstance(raw_instances, list) or not raw_instances:
        raise SchemaViolationError(f"{source}: 'instances' must be a non-empty list")
    instances = []
    for pos, raw in enumerate(raw_instances):
        if not isinstance(raw, dict):
            raise SchemaViolationError(f"{source}: instance #{pos} is not an object")
        iid = raw.get("instance_id")
        label = raw.get("label")
        points = raw.get("points")
        if not isinstance(iid, str) or not iid:
            raise SchemaViolationError(
                f"{source}: instance #{pos}: 'instance_id' must be a non-empty string"
            )
        if not isinstance(label, str):
            raise SchemaViolationError(
                f"{source}: instance {iid!r}: 'label' must be a string"
            )
        if not isinstance(points, list) or not points:
            raise SchemaViolationError(
                f"{source}: instance {iid!r}: 'points' must be a non-empty list"
            )
        for row in points:
            if (
                not isinstance(row, (list, tuple))
                or len(row) != 3
                or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in row)
            ):
                raise SchemaViolationError(
                    f"{source}: instance {iid!r}: every point must be [x, y, z] numbers"
                )
        try:
            instances.append(Instance(iid, label, PointSet(points)))
        except SchemaViolationError as exc:
            raise SchemaViolationError(f"{source}: {exc}") from exc
    try:
        return Scene(scene_id, tuple(instances))
    except SchemaViolationError as exc:
        raise SchemaViolationError(f"{source}: {exc}") from exc


def load_scene(path: str | Path) -> Scene:
    """Load a scene from native JSON.  Round-trips :func:`write_scene` exactly."""
    return scene_from_dict(read_json(path), source=str(path))


def write_scene(scene: Scene, path: str | Path) -> None:
    write_json(scene_to_dict(scene), path)


# ---------------------------------------------------------------------------
# Scan-dataset triplet import (PLY mesh + segmentation + aggregation)
# ---------------------------------------------------------------------------

_PLY_SCALAR_SIZES = {
    "char": 1, "int8": 1, "uchar": 1, "uint8": 1,
    "short": 2, "int16": 2, "ushort": 2, "uint16": 2,
    "int": 4, "int32": 4, "uint": 4, "uint32": 4,
    "float": 4, "float32": 4,
    "double": 8, "float64": 8,
}
_PLY_NUMPY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def read_ply_vertices(path: str | Path) -> np.ndarray:
    """Read the x/y/z vertex coordinates from an ascii or binary-LE PLY file.

    Only the vertex element is consumed; faces and extra vertex properties
    (color, normals, alpha...) are skipped.  The vertex element must be the
    first element in the file, which holds for the scan exports this targets.
    """
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise MalformedFileError(f"{path}: not a PLY file (missing header)")
    header_lines = raw[:end].decode("ascii", errors="replace").splitlines()
    data_start = end + len(b"end_header\n")

    fmt = None
    elements: list[tuple[str, int]] = []
    properties: dict[str, list[tuple[str, str]]] = {}
    current = None
    for line in header_lines[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            current = parts[1]
            elements.append((parts[1], int(parts[2])))
            properties[current] = []
        elif parts[0] == "property" and current is not None:
            if parts[1] == "list":
                properties[current].append(("list", f"{parts[2]}:{parts[3]}:{parts[4]}"))
            else:
                properties[current].append((parts[2], parts[1]))

    if fmt not in ("ascii", "binary_little_endian"):
        raise MalformedFileError(f"{path}: unsupported PLY format {fmt!r}")
    if not elements or elements[0][0] != "vertex":
        raise MalformedFileError(f"{path}: vertex element must come first")
    n_vertices = elements[0][1]
    vertex_props = properties["vertex"]
    prop_names = [name for name, _ in vertex_props]
    if any(name == "list" for name in prop_names):
        raise MalformedFileError(f"{path}: list property inside vertex element")
    for axis in ("x", "y", "z"):
        if axis not in prop_names:
            raise MalformedFileError(f"{path}: vertex element lacks property {axis!r}")

    if fmt == "ascii":
        text = raw[data_start:].decode("ascii", errors="replace").split("\n")
        rows = []
        for line in text:
            if line.strip():
                rows.append(line.split())
            if len(rows) == n_vertices:
                break
        if len(rows) < n_vertices:
            raise MalformedFileError(f"{path}: truncated vertex data")
        cols = [prop_names.index(a) for a in ("x", "y", "z")]
        try:
            out = np.array(
                [[float(r[c]) for c in cols] for r in rows], dtype=np.float64
            )
        except (ValueError, IndexError) as exc:
            raise MalformedFileError(f"{path}: bad vertex row: {exc}") from exc
        return out

    dtype = np.dtype(
        [(name, "<" + _PLY_NUMPY_TYPES[typ]) for name, typ in vertex_props]
    )
    needed = n_vertices * dtype.itemsize
    if len(raw) - data_start < needed:
        raise MalformedFileError(f"{path}: truncated vertex data")
    table = np.frombuffer(raw, dtype=dtype, count=n_vertices, offset=data_start)
    return np.stack(
        [table["x"], table["y"], table["z"]], axis=1
    ).astype(np.float64)


def import_scan_triplet(
    mesh_path: str | Path,
    aggregation_path: str | Path,
    segmentation_path: str | Path,
    scene_id: str | None = None,
) -> Scene:
    """Assemble a :class:`Scene` from a mesh / aggregation / segmentation triplet.

    The segmentation file maps every vertex to an over-segment id; the
    aggregation file groups segment ids into labeled object instances.  Any
    disagreement between the three files (vertex-count mismatch, unknown or
    doubly-claimed segment ids, duplicate object ids, instances left with no
    vertices) raises :class:`InconsistentTripletError`.
    """
    vertices = read_ply_vertices(mesh_path)

    seg_doc = read_json(segmentation_path)
    if not isinstance(seg_doc, dict) or not isinstance(seg_doc.get("segIndices"), list):
        raise SchemaViolationError(
            f"{segmentation_path}: expected an object with a 'segIndices' list"
        )
    seg_indices = np.asarray(seg_doc["segIndices"])
    if seg_indices.shape != (vertices.shape[0],):
        raise InconsistentTripletError(
            f"{segmentation_path}: {seg_indices.shape[0]} segment entries for "
            f"{vertices.shape[0]} mesh vertices"
        )

    agg_doc = read_json(aggregation_path)
    if not isinstance(agg_doc, dict) or not isinstance(agg_doc.get("segGroups"), list):
        raise SchemaViolationError(
            f"{aggregation_path}: expected an object with a 'segGroups' list"
        )

    known_segments: dict[int, np.ndarray] = {}
    uniq, inverse = np.unique(seg_indices, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(uniq) + 1))
    for k, seg_id in enumerate(uniq):
        known_segments[int(seg_id)] = order[bounds[k]:bounds[k + 1]]

    instances = []
    seen_object_ids: set[int] = set()
    claimed: set[int] = set()
    for pos, group in enumerate(agg_doc["segGroups"]):
        if not isinstance(group, dict):
            raise SchemaViolationError(
                f"{aggregation_path}: segGroups[{pos}] is not an object"
            )
        try:
            object_id = int(group["objectId"])
            label = str(group["label"])
            segments = [int(s) for s in group["segments"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolationError(
                f"{aggregation_path}: segGroups[{pos}] missing objectId/label/segments"
            ) from exc
        if object_id in seen_object_ids:
            raise InconsistentTripletError(
                f"{aggregation_path}: duplicate objectId {object_id}"
            )
        seen_object_ids.add(object_id)
        vertex_blocks = []
        for seg in segments:
            if seg not in known_segments:
                raise InconsistentTripletError(
                    f"{aggregation_path}: objectId {object_id} references segment "
                    f"{seg} absent from {segmentation_path}"
                )
            if seg in claimed:
                raise InconsistentTripletError(
                    f"{aggregation_path}: segment {seg} claimed by more than one object"
                )
            claimed.add(seg)
            vertex_blocks.append(known_segments[seg])
        if not vertex_blocks:
            raise InconsistentTripletError(
                f"{aggregation_path}: objectId {object_id} has no segments"
            )
        idx = np.sort(np.concatenate(vertex_blocks))
        instances.append(Instance(str(object_id), label, PointSet(vertices[idx])))

    if scene_id is None:
        scene_id = Path(mesh_path).stem
    return Scene(scene_id, tuple(instances))


# ---------------------------------------------------------------------------
# Synthetic scenes with exact analytic truth
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxSpec:
    """Axis-aligned box: points are its 8 corners plus mirrored interior pairs."""

    label: str
    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    n_points: int = 24
    instance_id: str | None = None


@dataclass(frozen=True)
class SphereSpec:
    """Ball: points are the 6 axis poles plus mirrored interior pairs."""

    label: str
    center: tuple[float, float, float]
    radius: float
    n_points: int = 18
    instance_id: str | None = None


@dataclass(frozen=True)
class SyntheticSpec:
    scene_id: str
    boxes: tuple[BoxSpec, ...] = ()
    spheres: tuple[SphereSpec, ...] = ()


@dataclass(frozen=True)
class InstanceTruth:
    instance_id: str
    label: str
    centroid: tuple[float, float, float]
    aabb_min: tuple[float, float, float]
    aabb_max: tuple[float, float, float]
    dims: tuple[float, float, float]
    volume: float


@dataclass(frozen=True)
class AnalyticTruth:
    """Exact per-instance boxes plus closed-form box-to-box hull gaps."""

    instances: dict[str, InstanceTruth] = field(default_factory=dict)
    box_gaps: dict[tuple[str, str], float] = field(default_factory=dict)


def _validate_spec(spec: SyntheticSpec) -> None:
    if not spec.scene_id:
        raise InvalidSpecError("scene_id must be non-empty")
    if not spec.boxes and not spec.spheres:
        raise InvalidSpecError(f"{spec.scene_id}: spec contains no objects")
    explicit = [
        s.instance_id for s in (*spec.boxes, *spec.spheres) if s.instance_id is not None
    ]
    if len(set(explicit)) != len(explicit):
        raise InvalidSpecError(f"{spec.scene_id}: duplicate explicit instance ids")
    for box in spec.boxes:
        if any(d <= 0 for d in box.dims):
            raise InvalidSpecError(f"{spec.scene_id}: box dims must be positive")
        if box.n_points < 8:
            raise InvalidSpecError(
                f"{spec.scene_id}: a box needs n_points >= 8 for its corners"
            )
        if not box.label.strip():
            raise InvalidSpecError(f"{spec.scene_id}: empty box label")
    for sph in spec.spheres:
        if sph.radius <= 0:
            raise InvalidSpecError(f"{spec.scene_id}: sphere radius must be positive")
        if sph.n_points < 6:
            raise InvalidSpecError(
                f"{spec.scene_id}: a sphere needs n_points >= 6 for its poles"
            )
        if not sph.label.strip():
            raise InvalidSpecError(f"{spec.scene_id}: empty sphere label")


def _mirrored_pairs(rng: np.random.Generator, center: np.ndarray,
                    samples: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Interleave samples with their reflections through ``center``.

    Reflections are clipped back into [lo, hi] so the sampled AABB can never
    exceed the declared one by a final rounding ulp.
    """
    mirrored = np.clip(2.0 * center - samples, lo, hi)
    out = np.empty((2 * samples.shape[0], 3), dtype=np.float64)
    out[0::2] = samples
    out[1::2] = mirrored
    return out


def _box_points(rng: np.random.Generator, box: BoxSpec) -> np.ndarray:
    center = np.asarray(box.center, dtype=np.float64)
    half = np.asarray(box.dims, dtype=np.float64) / 2.0
    lo, hi = center - half, center + half
    corners = np.array(
        list(itertools.product(*zip(lo, hi))), dtype=np.float64
    )
    rest = box.n_points - 8
    pairs = rest // 2
    blocks = [corners]
    if pairs:
        samples = rng.uniform(lo, hi, size=(pairs, 3))
        blocks.append(_mirrored_pairs(rng, center, samples, lo, hi))
    if rest % 2:
        blocks.append(center[None, :])
    return np.concatenate(blocks, axis=0)


def _sphere_points(rng: np.random.Generator, sph: SphereSpec) -> np.ndarray:
    center = np.asarray(sph.center, dtype=np.float64)
    r = float(sph.radius)
    lo, hi = center - r, center + r
    eye = np.eye(3)
    poles = np.concatenate([center + r * eye, center - r * eye], axis=0)
    rest = sph.n_points - 6
    pairs = rest // 2
    blocks = [poles]
    if pairs:
        dirs = rng.normal(size=(pairs, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = r * (1.0 - 1e-12) * np.cbrt(rng.uniform(size=pairs))
        samples = np.clip(center + dirs * radii[:, None], lo, hi)
        blocks.append(_mirrored_pairs(rng, center, samples, lo, hi))
    if rest % 2:
        blocks.append(center[None, :])
    return np.concatenate(blocks, axis=0)


def box_gap(lo1, hi1, lo2, hi2) -> float:
    """Closed-form hull distance between two axis-aligned boxes."""
    lo1, hi1 = np.asarray(lo1, float), np.asarray(hi1, float)
    lo2, hi2 = np.asarray(lo2, float), np.asarray(hi2, float)
    per_axis = np.maximum(0.0, np.maximum(lo1 - hi2, lo2 - hi1))
    return float(np.sqrt(np.sum(per_axis * per_axis)))


def generate_synthetic_scene(
    spec: SyntheticSpec, seed: int
) -> tuple[Scene, AnalyticTruth]:
    """Sample a scene from ``spec`` deterministically.

    Draw order is fixed: boxes in spec order, then spheres in spec order, one
    block of random draws per object.  Construction guarantees, exactly in
    floating point: the sampled AABB of every object equals its declared AABB,
    and (to symmetric-rounding noise ~1e-16) the sample centroid sits on the
    declared center.  ``AnalyticTruth.box_gaps`` holds closed-form hull
    distances for every box-box pair.
    """
    _validate_spec(spec)
    rng = np.random.default_rng(seed)
    instances: list[Instance] = []
    truth_instances: dict[str, InstanceTruth] = {}
    box_ids: list[tuple[str, np.ndarray, np.ndarray]] = []

    auto = 0
    used_ids = {
        s.instance_id for s in (*spec.boxes, *spec.spheres) if s.instance_id is not None
    }

    def next_id(explicit: str | None) -> str:
        nonlocal auto
        if explicit is not None:
            return explicit
        while True:
            candidate = f"o{auto:03d}"
            auto += 1
            if candidate not in used_ids:
                return candidate

    for box in spec.boxes:
        iid = next_id(box.instance_id)
        pts = _box_points(rng, box)
        center = np.asarray(box.center, dtype=np.float64)
        half = np.asarray(box.dims, dtype=np.float64) / 2.0
        lo, hi = center - half, center + half
        bbox = geometry.aabb(pts)
        instances.append(Instance(iid, box.label, PointSet(pts)))
        truth_instances[iid] = InstanceTruth(
            iid, box.label.strip().lower(), tuple(center), tuple(lo), tuple(hi),
            tuple(bbox.extents), geometry.aabb_volume(bbox),
        )
        box_ids.append((iid, lo, hi))

    for sph in spec.spheres:
        iid = next_id(sph.instance_id)
        pts = _sphere_points(rng, sph)
        center = np.asarray(sph.center, dtype=np.float64)
        lo, hi = center - sph.radius, center + sph.radius
        bbox = geometry.aabb(pts)
        instances.append(Instance(iid, sph.label, PointSet(pts)))
        truth_instances[iid] = InstanceTruth(
            iid, sph.label.strip().lower(), tuple(center), tuple(lo), tuple(hi),
            tuple(bbox.extents), geometry.aabb_volume(bbox),
        )

    gaps: dict[tuple[str, str], float] = {}
    for (id_a, lo_a, hi_a), (id_b, lo_b, hi_b) in itertools.combinations(box_ids, 2):
        key = tuple(sorted((id_a, id_b)))
        gaps[key] = box_gap(lo_a, hi_a, lo_b, hi_b)

    return Scene(spec.scene_id, tuple(instances)), AnalyticTruth(truth_instances, gaps)


# ---------------------------------------------------------------------------
# Randomized indoor-style specs (used by the dataset synthesizer)
# ---------------------------------------------------------------------------

_LABEL_BANK = (
    "chair", "table", "sofa", "bed", "lamp", "desk", "cabinet", "stool",
    "shelf", "monitor", "pillow", "curtain", "mirror", "sink", "refrigerator",
    "microwave", "toaster", "guitar", "backpack", "bookshelf", "nightstand",
    "dresser", "armchair", "ottoman", "wardrobe", "bench", "piano", "plant",
    "television", "radiator", "printer", "whiteboard", "trash can",
    "coffee table", "kitchen counter", "tissue box", "door", "window",
)

# (label multiplicity profile) duplicated labels give the quantity questions
# both clearly-different and equal counts to draw from.
_DUP_COUNTS = (2, 2, 3, 5)


def random_indoor_spec(
    scene_id: str,
    rng: np.random.Generator,
    n_boxes: int = 41,
    points_per_box: int = 24,
    include_uninformative: bool = True,
) -> SyntheticSpec:
    """Build a random room-like spec: disjoint boxes on a jittered grid.

    Boxes are placed one per grid cell (cell pitch 2 m, dims <= 1.3 m), so all
    hull gaps are strictly positive and comfortably above display resolution.
    One box may carry the non-informative label "object" to exercise label
    filtering downstream.
    """
    if n_boxes < sum(_DUP_COUNTS) + 2:
        raise InvalidSpecError(
            f"{scene_id}: need at least {sum(_DUP_COUNTS) + 2} boxes"
        )
    labels: list[str] = []
    bank = list(_LABEL_BANK)
    perm = rng.permutation(len(bank))
    bank = [bank[i] for i in perm]
    for k, count in enumerate(_DUP_COUNTS):
        labels.extend([bank[k]] * count)
    n_unique = n_boxes - len(labels) - (1 if include_uninformative else 0)
    if n_unique > len(bank) - len(_DUP_COUNTS):
        raise InvalidSpecError(f"{scene_id}: label bank too small for {n_boxes} boxes")
    labels.extend(bank[len(_DUP_COUNTS):len(_DUP_COUNTS) + n_unique])
    if include_uninformative:
        labels.append("object")

    side = int(np.ceil(np.sqrt(n_boxes)))
    cells = [(i, j) for i in range(side) for j in range(side)]
    order = rng.permutation(len(cells))
    boxes = []
    for k, label in enumerate(labels):
        ci, cj = cells[order[k]]
        dims = rng.uniform(0.4, 1.3, size=3)
        jitter = rng.uniform(-0.2, 0.2, size=2)
        cx = 2.0 * ci + 1.0 + jitter[0]
        cy = 2.0 * cj + 1.0 + jitter[1]
        cz = dims[2] / 2.0
        boxes.append(
            BoxSpec(
                label=label,
                center=(float(cx), float(cy), float(cz)),
                dims=(float(dims[0]), float(dims[1]), float(dims[2])),
                n_points=points_per_box,
            )
        )
    return SyntheticSpec(scene_id=scene_id, boxes=tuple(boxes))


def truth_to_dict(truth: AnalyticTruth) -> dict:
    return {
        "instances": [
            {
                "instance_id": t.instance_id,
                "label": t.label,
                "centroid": list(t.centroid),
                "aabb_min": list(t.aabb_min),
                "aabb_max": list(t.aabb_max),
                "dims": list(t.dims),
                "volume": t.volume,
            }
            for t in truth.instances.values()
        ],
        "box_gaps": [
            {"a": a, "b": b, "distance": d} for (a, b), d in sorted(truth.box_gaps.items())
        ],
    }


def truth_from_dict(data: Mapping) -> AnalyticTruth:
    instances = {
        row["instance_id"]: InstanceTruth(
            row["instance_id"], row["label"], tuple(row["centroid"]),
            tuple(row["aabb_min"]), tuple(row["aabb_max"]),
            tuple(row["dims"]), float(row["volume"]),
        )
        for row in data["instances"]
    }
    gaps = {
        (row["a"], row["b"]): float(row["distance"]) for row in data["box_gaps"]
    }
    return AnalyticTruth(instances, gaps)
