import os
from pathlib import Path

import pytest

import vsens

DATA = Path(os.environ.get("VSENS_TEST_DATA_DIR", Path(__file__).resolve().parents[2] / "tests" / "data"))


def test_parse_minimal_bvh():
    motion = vsens.load_bvh(DATA / "bvh" / "minimal.bvh")
    assert motion.joint_names == ["Hips", "Chest", "Chest_End"]
    assert motion.frame_count == 2
    assert motion.frame_time == pytest.approx(0.033333)
    pose = motion.sample_pose(0.0)
    assert set(pose) == set(motion.joint_names)


def test_bvh_error_carries_line():
    with pytest.raises(vsens.VsensError) as info:
        vsens.load_bvh(DATA / "bvh" / "malformed" / "short_row.bvh")
    assert info.value.code == "ChannelMismatch"
    assert info.value.line == 20


def test_ray_against_quad():
    mesh = vsens.load_obj(DATA / "obj" / "quad.obj")
    assert (mesh.vertex_count, mesh.triangle_count) == (4, 2)
    index = vsens.AccelIndex(mesh)
    distance, _ = index.nearest((0, 0, 0), (0, 0, -1))
    assert distance == pytest.approx(2.0)
    assert index.nearest((0, 0, 0), (0, 0, 1)) is None


def test_prefab_offsets():
    elements = vsens.expand_prefab("pad", 2, 3, 0.05)
    assert len(elements) == 6
    xs = sorted({round(off[0], 12) for _, off in elements})
    assert xs == [-0.05, 0.0, 0.05]


def test_run_matches_golden():
    rec = vsens.run(DATA / "reference" / "config.json")
    assert len(rec.sensor_ids) == 10
    golden = (DATA / "golden" / "reference" / "wall_cam.csv").read_text()
    assert rec.export_csv("wall_cam") == golden


def test_dict_config_and_session():
    config = {
        "clip": "walk.bvh",
        "unit_scale": 0.01,
        "scene": ["room.obj"],
        "sensors": [{"id": "imu", "type": "imu", "attachment": {"kind": "bone", "bone": "Hips"}}],
    }
    sess = vsens.session(config, DATA / "reference")
    tick, time, samples = sess.step()
    assert (tick, time) == (0, 0.0)
    while not sess.finished:
        sess.step()
    series = sess.recording.series("imu")
    assert series["channels"] == ["ax", "ay", "az"]
    assert len(series["times"]) == sess.tick_count - 6
    assert vsens.run(config, DATA / "reference").export_csv("imu") == sess.recording.export_csv("imu")
