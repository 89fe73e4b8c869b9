#!/usr/bin/env python3
"""Regenerates the synthetic motion clips under tests/data/bvh/.

The clips are procedural (no external motion database) so they can be
redistributed with the tests. Output is deterministic.
"""
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent

# name, parent, offset (cm), channels
JOINTS = [
    ("Hips", None, (0, 0, 0), "pos+rot"),
    ("Spine", "Hips", (0, 10, 0), "rot"),
    ("Chest", "Spine", (0, 15, 0), "rot"),
    ("Neck", "Chest", (0, 20, 0), "rot"),
    ("Head", "Neck", (0, 10, 0), "rot"),
    ("Head_End", "Head", (0, 15, 0), "end"),
    ("LeftShoulder", "Chest", (8, 15, 0), "rot"),
    ("LeftArm", "LeftShoulder", (10, 0, 0), "rot"),
    ("LeftForeArm", "LeftArm", (25, 0, 0), "rot"),
    ("LeftHand", "LeftForeArm", (25, 0, 0), "rot"),
    ("LeftHand_End", "LeftHand", (10, 0, 0), "end"),
    ("RightShoulder", "Chest", (-8, 15, 0), "rot"),
    ("RightArm", "RightShoulder", (-10, 0, 0), "rot"),
    ("RightForeArm", "RightArm", (-25, 0, 0), "rot"),
    ("RightHand", "RightForeArm", (-25, 0, 0), "rot"),
    ("RightHand_End", "RightHand", (-10, 0, 0), "end"),
    ("LeftUpLeg", "Hips", (9, 0, 0), "rot"),
    ("LeftLeg", "LeftUpLeg", (0, -42, 0), "rot"),
    ("LeftFoot", "LeftLeg", (0, -40, 0), "rot"),
    ("LeftFoot_End", "LeftFoot", (0, -5, 12), "end"),
    ("RightUpLeg", "Hips", (-9, 0, 0), "rot"),
    ("RightLeg", "RightUpLeg", (0, -42, 0), "rot"),
    ("RightFoot", "RightLeg", (0, -40, 0), "rot"),
    ("RightFoot_End", "RightFoot", (0, -5, 12), "end"),
]


def fmt(v):
    s = f"{v:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def hierarchy():
    out = ["HIERARCHY"]

    def emit(name, depth):
        joint = next(j for j in JOINTS if j[0] == name)
        pad = "\t" * depth
        _, parent, off, kind = joint
        if kind == "end":
            out.append(f"{pad}End Site")
        else:
            out.append(f"{pad}{'ROOT' if parent is None else 'JOINT'} {name}")
        out.append(pad + "{")
        out.append(f"{pad}\tOFFSET {fmt(off[0])} {fmt(off[1])} {fmt(off[2])}")
        if kind == "pos+rot":
            out.append(f"{pad}\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation")
        elif kind == "rot":
            out.append(f"{pad}\tCHANNELS 3 Zrotation Xrotation Yrotation")
        for child in JOINTS:
            if child[1] == name:
                emit(child[0], depth + 1)
        out.append(pad + "}")

    emit("Hips", 0)
    return out


def walk_frame(t):
    """Channel values (cm, degrees) for a 1 Hz gait cycle."""
    w = 2 * math.pi * 1.0
    swing = math.sin(w * t)
    values = {}
    values["Hips"] = [0.0, 92 + 2 * math.cos(2 * w * t), 100 * t, 0.0, 3 * math.sin(2 * w * t), 8 * swing]
    values["Spine"] = [0.0, 2.0, -4 * swing]
    values["Chest"] = [0.0, 1.0, -4 * swing]
    values["Neck"] = [0.0, -3.0, 0.0]
    values["Head"] = [0.0, 2 * math.sin(2 * w * t), 0.0]
    values["LeftShoulder"] = [0.0, 0.0, 0.0]
    values["LeftArm"] = [-75.0, 30 * swing, 0.0]
    values["LeftForeArm"] = [0.0, 0.0, -20 - 15 * (1 + swing)]
    values["LeftHand"] = [0.0, 0.0, 0.0]
    values["RightShoulder"] = [0.0, 0.0, 0.0]
    values["RightArm"] = [75.0, -30 * swing, 0.0]
    values["RightForeArm"] = [0.0, 0.0, 20 + 15 * (1 - swing)]
    values["RightHand"] = [0.0, 0.0, 0.0]
    values["LeftUpLeg"] = [0.0, -25 * swing, 0.0]
    values["LeftLeg"] = [0.0, 30 * max(0.0, math.sin(w * t + 1.0)), 0.0]
    values["LeftFoot"] = [0.0, -10 * swing, 0.0]
    values["RightUpLeg"] = [0.0, 25 * swing, 0.0]
    values["RightLeg"] = [0.0, 30 * max(0.0, -math.sin(w * t + 1.0)), 0.0]
    values["RightFoot"] = [0.0, 10 * swing, 0.0]
    row = []
    for name, _, _, kind in JOINTS:
        if kind != "end":
            row.extend(values[name])
    return row


def write_walk(path, frames, frame_time):
    lines = hierarchy()
    lines.append("MOTION")
    lines.append(f"Frames: {frames}")
    lines.append(f"Frame Time: {frame_time}")
    for k in range(frames):
        lines.append(" ".join(fmt(v) for v in walk_frame(k * frame_time)))
    path.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    write_walk(HERE / "bvh" / "walk.bvh", 61, 0.0333333)
    write_walk(HERE / "reference" / "walk.bvh", 61, 0.0333333)
