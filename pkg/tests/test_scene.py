"""Scene model, file interchange, scan-triplet import, and synthetic scenes."""

import json
import struct

import numpy as np
import pytest

from sceneqa import geometry
from sceneqa.errors import (
    InconsistentTripletError,
    InvalidSpecError,
    MalformedFileError,
    SchemaViolationError,
)
from sceneqa.scene import (
    BoxSpec,
    DEFAULT_EXCLUDED_LABELS,
    Instance,
    PointSet,
    Scene,
    SphereSpec,
    SyntheticSpec,
    box_gap,
    generate_synthetic_scene,
    import_scan_triplet,
    load_scene,
    random_indoor_spec,
    read_ply_vertices,
    scene_from_dict,
    scene_to_dict,
    truth_from_dict,
    truth_to_dict,
    write_scene,
)


def make_scene():
    tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    far = [[5.0, 5.0, 5.0], [6.0, 5.0, 5.0]]
    return Scene("toy", (
        Instance("a", "Chair", PointSet(tri)),
        Instance("b", "table", PointSet(far)),
        Instance("c", "chair", PointSet([[2.0, 2.0, 2.0]])),
    ))


class TestPointSet:
    def test_rejects_wrong_shape(self):
        with pytest.raises(SchemaViolationError):
            PointSet([[1.0, 2.0]])
        with pytest.raises(SchemaViolationError):
            PointSet(np.zeros((0, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(SchemaViolationError):
            PointSet([[np.nan, 0.0, 0.0]])

    def test_coords_are_read_only_and_copied(self):
        src = np.ones((2, 3))
        ps = PointSet(src)
        src[0, 0] = 99.0
        assert ps.coords[0, 0] == 1.0
        with pytest.raises(ValueError):
            ps.coords[0, 0] = 5.0

    def test_equality_is_by_value(self):
        assert PointSet([[1, 2, 3]]) == PointSet([[1.0, 2.0, 3.0]])
        assert PointSet([[1, 2, 3]]) != PointSet([[1, 2, 4]])


class TestInstanceAndScene:
    def test_labels_normalize_to_lowercase(self):
        inst = Instance("x", "  Coffee Table ", PointSet([[0, 0, 0]]))
        assert inst.label == "coffee table"

    def test_empty_label_rejected(self):
        with pytest.raises(SchemaViolationError):
            Instance("x", "   ", PointSet([[0, 0, 0]]))

    def test_duplicate_instance_ids_rejected(self):
        p = PointSet([[0, 0, 0]])
        with pytest.raises(SchemaViolationError, match="duplicate"):
            Scene("s", (Instance("a", "chair", p), Instance("a", "table", p)))

    def test_label_counts_fold_case(self):
        assert make_scene().label_counts() == {"chair": 2, "table": 1}

    def test_default_excluded_labels(self):
        assert DEFAULT_EXCLUDED_LABELS == {"item", "object"}


class TestSceneInterchange:
    def test_round_trip_preserves_everything(self, tmp_path):
        scene = make_scene()
        path = tmp_path / "toy.scene.json"
        write_scene(scene, path)
        loaded = load_scene(path)
        assert loaded.scene_id == scene.scene_id
        assert [i.instance_id for i in loaded.instances] == ["a", "b", "c"]
        for a, b in zip(loaded.instances, scene.instances):
            assert a.label == b.label and a.points == b.points

    def test_schema_errors_name_the_path(self):
        with pytest.raises(SchemaViolationError, match="instances"):
            scene_from_dict({"scene_id": "s"}, source="f.json")
        with pytest.raises(SchemaViolationError, match="f.json"):
            scene_from_dict({"scene_id": "s", "instances": [{}]}, source="f.json")

    def test_dict_form_is_plain_json(self):
        payload = scene_to_dict(make_scene())
        json.dumps(payload)  # must not raise
        assert payload["scene_id"] == "toy"
        assert len(payload["instances"]) == 3


def write_ascii_ply(path, vertices, extra_cols=False):
    cols = "property float x\nproperty float y\nproperty float z\n"
    if extra_cols:
        cols += "property uchar red\n"
    path.write_bytes((
        "ply\nformat ascii 1.0\ncomment test fixture\n"
        f"element vertex {len(vertices)}\n{cols}"
        "element face 1\nproperty list uchar int vertex_indices\n"
        "end_header\n"
    ).encode() + b"".join(
        (" ".join(f"{v:.6f}" for v in row) + (" 7" if extra_cols else "") + "\n").encode()
        for row in vertices
    ) + b"3 0 1 2\n")


def write_binary_ply(path, vertices):
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {len(vertices)}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
    ).encode()
    body = b"".join(
        struct.pack("<fffBBB", *row, 1, 2, 3) for row in vertices
    )
    path.write_bytes(header + body)


class TestPlyReader:
    VERTS = [(0.0, 0.5, 1.0), (2.0, -1.0, 0.25), (3.5, 3.5, 3.5)]

    def test_ascii_with_extra_columns(self, tmp_path):
        path = tmp_path / "m.ply"
        write_ascii_ply(path, self.VERTS, extra_cols=True)
        out = read_ply_vertices(path)
        np.testing.assert_allclose(out, self.VERTS, atol=1e-6)

    def test_binary_little_endian_with_color(self, tmp_path):
        path = tmp_path / "m.ply"
        write_binary_ply(path, self.VERTS)
        out = read_ply_vertices(path)
        np.testing.assert_allclose(out, self.VERTS, atol=1e-6)

    def test_not_a_ply(self, tmp_path):
        path = tmp_path / "m.ply"
        path.write_bytes(b"OFF\n1 2 3\n")
        with pytest.raises(MalformedFileError, match="PLY"):
            read_ply_vertices(path)

    def test_truncated_binary_payload(self, tmp_path):
        path = tmp_path / "m.ply"
        write_binary_ply(path, self.VERTS)
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(MalformedFileError, match="truncated"):
            read_ply_vertices(path)

    def test_missing_axis_property(self, tmp_path):
        path = tmp_path / "m.ply"
        path.write_bytes(
            b"ply\nformat ascii 1.0\nelement vertex 1\n"
            b"property float x\nproperty float y\nend_header\n0 0\n"
        )
        with pytest.raises(MalformedFileError, match="'z'"):
            read_ply_vertices(path)


class TestScanTripletImport:
    def _write_triplet(self, tmp_path, seg_indices, seg_groups, n_vertices=6):
        vertices = [(float(i), float(i) / 2, 0.0) for i in range(n_vertices)]
        mesh = tmp_path / "scan.ply"
        write_ascii_ply(mesh, vertices)
        seg = tmp_path / "scan.segs.json"
        seg.write_text(json.dumps({"segIndices": seg_indices}))
        agg = tmp_path / "scan.agg.json"
        agg.write_text(json.dumps({"segGroups": seg_groups}))
        return mesh, agg, seg

    def test_assembles_instances_from_segments(self, tmp_path):
        mesh, agg, seg = self._write_triplet(
            tmp_path,
            seg_indices=[10, 10, 11, 12, 12, 12],
            seg_groups=[
                {"objectId": 0, "label": "Chair", "segments": [10, 11]},
                {"objectId": 1, "label": "table", "segments": [12]},
            ],
        )
        scene = import_scan_triplet(mesh, agg, seg)
        assert scene.scene_id == "scan"
        by_id = {i.instance_id: i for i in scene.instances}
        assert by_id["0"].label == "chair"
        assert len(by_id["0"].points) == 3
        assert len(by_id["1"].points) == 3
        np.testing.assert_allclose(by_id["1"].points.coords[:, 0], [3.0, 4.0, 5.0])

    def test_vertex_count_mismatch(self, tmp_path):
        mesh, agg, seg = self._write_triplet(
            tmp_path, seg_indices=[10, 10], seg_groups=[]
        )
        with pytest.raises(InconsistentTripletError, match="segment entries"):
            import_scan_triplet(mesh, agg, seg)

    def test_unknown_segment(self, tmp_path):
        mesh, agg, seg = self._write_triplet(
            tmp_path,
            seg_indices=[10] * 6,
            seg_groups=[{"objectId": 0, "label": "chair", "segments": [99]}],
        )
        with pytest.raises(InconsistentTripletError, match="99"):
            import_scan_triplet(mesh, agg, seg)

    def test_doubly_claimed_segment(self, tmp_path):
        mesh, agg, seg = self._write_triplet(
            tmp_path,
            seg_indices=[10, 10, 10, 11, 11, 11],
            seg_groups=[
                {"objectId": 0, "label": "chair", "segments": [10]},
                {"objectId": 1, "label": "table", "segments": [10, 11]},
            ],
        )
        with pytest.raises(InconsistentTripletError, match="more than one"):
            import_scan_triplet(mesh, agg, seg)

    def test_duplicate_object_id(self, tmp_path):
        mesh, agg, seg = self._write_triplet(
            tmp_path,
            seg_indices=[10, 10, 10, 11, 11, 11],
            seg_groups=[
                {"objectId": 0, "label": "chair", "segments": [10]},
                {"objectId": 0, "label": "table", "segments": [11]},
            ],
        )
        with pytest.raises(InconsistentTripletError, match="duplicate objectId"):
            import_scan_triplet(mesh, agg, seg)


class TestBoxGap:
    def test_separated_along_one_axis(self):
        assert box_gap([0, 0, 0], [1, 1, 1], [3, 0, 0], [4, 1, 1]) == 2.0

    def test_diagonal_separation(self):
        gap = box_gap([0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3])
        assert gap == pytest.approx(np.sqrt(3.0), abs=1e-15)

    def test_touching_and_overlapping_boxes(self):
        assert box_gap([0, 0, 0], [1, 1, 1], [1, 0, 0], [2, 1, 1]) == 0.0
        assert box_gap([0, 0, 0], [2, 2, 2], [1, 1, 1], [3, 3, 3]) == 0.0


class TestSyntheticScenes:
    SPEC = SyntheticSpec(
        scene_id="lab",
        boxes=(
            BoxSpec("bed", center=(1.0, 2.0, 0.415), dims=(1.98, 2.32, 0.83)),
            BoxSpec("Desk", center=(5.0, 5.0, 0.5), dims=(1.0, 2.0, 1.0), n_points=9),
        ),
        spheres=(SphereSpec("lamp", center=(-2.0, 0.0, 1.0), radius=0.3),),
    )

    def test_sampled_aabb_equals_declared_exactly(self):
        scene, truth = generate_synthetic_scene(self.SPEC, seed=11)
        for inst in scene.instances:
            t = truth.instances[inst.instance_id]
            bbox = geometry.aabb(inst.points)
            assert bbox.min_corner == t.aabb_min
            assert bbox.max_corner == t.aabb_max
            assert geometry.aabb_volume(bbox) == t.volume

    def test_centroid_sits_on_declared_center(self):
        scene, truth = generate_synthetic_scene(self.SPEC, seed=11)
        for inst in scene.instances:
            t = truth.instances[inst.instance_id]
            c = geometry.centroid(inst.points)
            np.testing.assert_allclose(c, t.centroid, atol=1e-9)

    def test_box_gaps_match_hull_distance(self):
        scene, truth = generate_synthetic_scene(self.SPEC, seed=11)
        by_id = {i.instance_id: i for i in scene.instances}
        for (ia, ib), expected in truth.box_gaps.items():
            got = geometry.hull_distance(by_id[ia].points, by_id[ib].points)
            assert got.converged
            assert got.distance == pytest.approx(expected, abs=1e-9)

    def test_same_seed_same_scene(self):
        s1, _ = generate_synthetic_scene(self.SPEC, seed=11)
        s2, _ = generate_synthetic_scene(self.SPEC, seed=11)
        for a, b in zip(s1.instances, s2.instances):
            assert a.points == b.points

    def test_bed_volume_matches_hand_computation(self):
        _, truth = generate_synthetic_scene(self.SPEC, seed=11)
        bed = next(t for t in truth.instances.values() if t.label == "bed")
        assert bed.volume == pytest.approx(1.98 * 2.32 * 0.83, rel=1e-12)

    def test_invalid_specs_are_rejected(self):
        with pytest.raises(InvalidSpecError):
            generate_synthetic_scene(SyntheticSpec(scene_id="x"), seed=0)
        with pytest.raises(InvalidSpecError, match="dims"):
            generate_synthetic_scene(SyntheticSpec(
                scene_id="x", boxes=(BoxSpec("a", (0, 0, 0), (1.0, -1.0, 1.0)),)
            ), seed=0)
        with pytest.raises(InvalidSpecError, match="radius"):
            generate_synthetic_scene(SyntheticSpec(
                scene_id="x", spheres=(SphereSpec("a", (0, 0, 0), 0.0),)
            ), seed=0)

    def test_truth_round_trip(self):
        _, truth = generate_synthetic_scene(self.SPEC, seed=11)
        again = truth_from_dict(truth_to_dict(truth))
        assert again == truth


class TestRandomIndoorSpec:
    def test_shape_of_generated_spec(self):
        rng = np.random.default_rng(5)
        spec = random_indoor_spec("s0", rng)
        assert len(spec.boxes) == 41
        labels = [b.label for b in spec.boxes]
        assert "object" in labels  # one uninformative instance to filter out
        informative = [lab for lab in labels if lab not in DEFAULT_EXCLUDED_LABELS]
        assert len(informative) == 40

    def test_boxes_sit_on_the_floor(self):
        rng = np.random.default_rng(5)
        spec = random_indoor_spec("s0", rng)
        for box in spec.boxes:
            assert box.center[2] == pytest.approx(box.dims[2] / 2)

    def test_duplicate_label_structure_supports_count_questions(self):
        rng = np.random.default_rng(5)
        spec = random_indoor_spec("s0", rng)
        counts = {}
        for box in spec.boxes:
            counts[box.label] = counts.get(box.label, 0) + 1
        assert max(counts.values()) >= 2  # some labels repeat by design
