"""Repeatability experiment: record a reference figure-eight, then replay it
in each action representation under the reference and shifted setups.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from relact import kinematics as kin
from relact import se3
from relact.actions import (
    ALL_KINDS,
    DEFAULT_CHUNK_SIZE,
    ArmSide,
    Command,
    GripperState,
    Proprioception,
    RepresentationKind,
    decode,
    encode,
)
from relact.errors import InvalidParameter, SchemaVersionMismatch
from relact.kinematics import ARM_MANIPULATORS, RobotConfiguration
from relact.se3 import Pose

REPORT_SCHEMA = "relact-report/1"
REF_LABEL = "RefConfig"
DEFAULT_CENTER = Pose.raw((0.0, 0.0, 200.0), np.eye(3))
DEFAULT_SCALE_MM = 20.0
DEFAULT_NUM_POINTS = 360
DEFAULT_DT = 0.05
DEFAULT_ARM_OFFSET_MM = 35.0
DEFAULT_JAW = 0.5
DEFAULT_SHIFT_RAD = 0.1

_SIDES = (ArmSide.LEFT, ArmSide.RIGHT)


@dataclass(frozen=True, eq=False)
class ReferenceTrajectory:
    """Commands in the endoscope-tip frame, plus what recording produced.

    ``proprioception[t]`` is the state observed just before command ``t`` was
    issued. ``true_path`` has shape (T, 2, 3): world-frame control points of
    the left and right grippers after each command.
    """

    commands: tuple[Command, ...]
    dt: float
    proprioception: tuple[Proprioception, ...] | None = None
    true_path: np.ndarray | None = None
    initial_true: tuple[Pose, Pose] | None = None

    def __post_init__(self):
        if len(self.commands) == 0:
            raise InvalidParameter("reference trajectory is empty")
        if not self.dt > 0:
            raise InvalidParameter(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "commands", tuple(self.commands))

    @property
    def recorded(self) -> bool:
        return self.true_path is not None

    def __len__(self) -> int:
        return len(self.commands)


def lemniscate_points(scale_mm: float, num_points: int) -> np.ndarray:
    """Gerono lemniscate ``(a cos t, a sin t cos t, 0)`` for t in [0, 2pi], endpoint included."""
    theta = np.linspace(0.0, 2.0 * math.pi, num_points)
    a = scale_mm
    return np.column_stack((a * np.cos(theta), a * np.sin(theta) * np.cos(theta), np.zeros_like(theta)))


def generate_lemniscate(
    scale_mm: float = DEFAULT_SCALE_MM,
    num_points: int = DEFAULT_NUM_POINTS,
    center: Pose = DEFAULT_CENTER,
    *,
    arm_offset_mm: float = DEFAULT_ARM_OFFSET_MM,
    jaw: float = DEFAULT_JAW,
    dt: float = DEFAULT_DT,
) -> ReferenceTrajectory:
    """Both grippers trace a figure-eight in the plane of ``center``.

    The left gripper's curve is centred ``arm_offset_mm`` along the centre's
    +y axis, the right one's along -y and mirrored in x. Orientation stays
    that of ``center``.
    """
    if not scale_mm > 0 or not math.isfinite(scale_mm):
        raise InvalidParameter(f"scale_mm must be positive, got {scale_mm}")
    if num_points < 8:
        raise InvalidParameter(f"num_points must be at least 8, got {num_points}")
    if not dt > 0:
        raise InvalidParameter(f"dt must be positive, got {dt}")
    pts = lemniscate_points(scale_mm, num_points)
    left_pts = center.apply(pts + [0.0, arm_offset_mm, 0.0])
    right_pts = center.apply(pts * [-1.0, 1.0, 1.0] + [0.0, -arm_offset_mm, 0.0])
    commands = tuple(
        (GripperState(Pose.raw(lp, center.R), jaw), GripperState(Pose.raw(rp, center.R), jaw))
        for lp, rp in zip(left_pts, right_pts)
    )
    return ReferenceTrajectory(commands, dt)


def _servo_pair(config, command: Command, rng):
    """Servo both arms to a camera-frame command; returns (config, (left, right) true poses)."""
    cam = kin.endoscope_tip_frame(config)
    achieved = []
    for side, target in zip(_SIDES, command):
        res = kin.servo_to(
            config, ARM_MANIPULATORS[side], se3.compose(cam, target.pose), jaw=target.jaw, rng=rng
        )
        config = res.config
        achieved.append(res.achieved_true_pose)
    return config, tuple(achieved)


def record_reference(
    config: RobotConfiguration,
    trajectory: ReferenceTrajectory | Sequence[Command],
    *,
    dt: float | None = None,
    rng: np.random.Generator | None = None,
) -> ReferenceTrajectory:
    """Execute the commands in ``config`` and keep the ground truth.

    The grippers are first servoed onto the first command; after that each
    step records proprioception, then executes its command.
    """
    if isinstance(trajectory, ReferenceTrajectory):
        commands, dt = trajectory.commands, trajectory.dt if dt is None else dt
    else:
        commands, dt = tuple(trajectory), DEFAULT_DT if dt is None else dt
    config, initial = _servo_pair(config, commands[0], rng)
    proprio, path = [], np.empty((len(commands), 2, 3))
    for t, command in enumerate(commands):
        proprio.append(kin.proprioception(config, t * dt))
        config, achieved = _servo_pair(config, command, rng)
        path[t] = [g.p for g in achieved]
    path.flags.writeable = False
    return ReferenceTrajectory(commands, dt, tuple(proprio), path, initial)


@dataclass(frozen=True, eq=False)
class ReplayCell:
    kind: RepresentationKind
    config_label: str
    path: np.ndarray  # (T, 2, 3)
    rmse_mm: float

    @property
    def num_points(self) -> int:
        return int(self.path.shape[0])


def place_in_true_frame(config: RobotConfiguration, poses: tuple[Pose, Pose], jaws=(None, None)):
    """Put the grippers at given true world poses, as a person would by hand.

    The controller is commanded the pose that its own kinematics believe
    will land there; no joint noise is applied.
    """
    for side, target, jaw in zip(_SIDES, poses, jaws):
        name = ARM_MANIPULATORS[side]
        believed = se3.compose(se3.inverse(config.base_error(name)), target)
        config = kin.servo_to(config, name, believed, jaw=jaw).config
    return config


def replay(
    reference: ReferenceTrajectory,
    kind: RepresentationKind,
    config: RobotConfiguration,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    rng: np.random.Generator | None = None,
    config_label: str = "",
) -> ReplayCell:
    """Replay a recorded reference in ``kind`` under ``config``.

    Chunks are encoded against the reference proprioception at their start
    step and decoded against the live proprioception at that moment, then
    executed open loop.
    """
    if not reference.recorded:
        raise InvalidParameter("reference must be recorded before replay")
    if chunk_size < 1:
        raise InvalidParameter(f"chunk_size must be >= 1, got {chunk_size}")
    commands = reference.commands
    first = commands[0]
    config = place_in_true_frame(config, reference.initial_true, (first[0].jaw, first[1].jaw))
    T = len(commands)
    path = np.empty((T, 2, 3))
    for start in range(0, T, chunk_size):
        C = min(chunk_size, T - start)
        chunk = encode(kind, reference.proprioception[start], commands, start, C)
        live = kin.proprioception(config, start * reference.dt)
        for offset, command in enumerate(decode(chunk, live)):
            config, achieved = _servo_pair(config, command, rng)
            path[start + offset] = [g.p for g in achieved]
    path.flags.writeable = False
    err = se3.rmse(path.reshape(-1, 3), reference.true_path.reshape(-1, 3))
    return ReplayCell(kind, config_label, path, err)


# -- experiment -------------------------------------------------------------

def eval_shift(chain: kin.Chain, sign: float, shift_rad: float = DEFAULT_SHIFT_RAD) -> dict:
    """Workspace shift: revolute setup joints turned by alternating +/-shift.

    Alternating signs swing the arm sideways while keeping the setup end's
    heading, so the commanded figure stays inside the active workspace.
    """
    shifts = {}
    for name in (kin.PSM1, kin.PSM2):
        m = chain.manipulator(name)
        delta = np.zeros(len(m.joints))
        alt = sign
        for i, joint in enumerate(m.setup_joints):
            if joint.joint_type is kin.JointType.REVOLUTE:
                delta[i] = alt * shift_rad
                alt = -alt
        shifts[name] = delta
    return shifts


def default_configs(
    chain: kin.Chain, seed: int, *, shift_rad: float = DEFAULT_SHIFT_RAD
) -> dict[str, RobotConfiguration]:
    """Reference setup plus left- and right-shifted evaluation setups.

    Only the PSMs move between setups; the endoscope arm stays put.
    """
    ref = kin.configure(chain, seed)
    configs = {REF_LABEL: ref}
    for i, sign in enumerate((1.0, -1.0), start=1):
        rng = np.random.default_rng([seed, i])
        cfg = ref
        for name, delta in eval_shift(chain, sign, shift_rad).items():
            cfg = kin.perturb_setup_joints(cfg, name, delta, rng)
        configs[f"EvalConfig{i}"] = cfg
    return configs


@dataclass(frozen=True, eq=False)
class ReplayReport:
    reference_path: np.ndarray
    cells: tuple[ReplayCell, ...]
    config_labels: tuple[str, ...]
    kinds: tuple[RepresentationKind, ...]
    seed: int | None = None
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def cell(self, kind: RepresentationKind, label: str) -> ReplayCell:
        for c in self.cells:
            if c.kind is kind and c.config_label == label:
                return c
        raise KeyError((kind, label))

    def rmse(self, kind: RepresentationKind, label: str) -> float:
        return self.cell(kind, label).rmse_mm

    def recomputed_rmse(self, kind: RepresentationKind, label: str) -> float:
        path = self.cell(kind, label).path
        return se3.rmse(path.reshape(-1, 3), self.reference_path.reshape(-1, 3))

    def rows(self) -> list[dict]:
        return [
            {
                "kind": c.kind.value,
                "config_label": c.config_label,
                "rmse_mm": c.rmse_mm,
                "num_points": c.num_points,
                "seed": self.seed,
            }
            for c in self.cells
        ]

    def format_table(self, precision: int = 3) -> str:
        head = ["", *self.config_labels]
        body = [
            [k.label, *(f"{self.rmse(k, lbl):.{precision}f}" for lbl in self.config_labels)]
            for k in self.kinds
        ]
        widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
        lines = ["Trajectory tracking RMSE (mm)"]
        for r in [head, *body]:
            lines.append("  ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(r, widths))))
        return "\n".join(lines)

    def table_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(
            buf, fieldnames=["kind", "config_label", "rmse_mm", "num_points", "seed"], lineterminator="\n"
        )
        writer.writeheader()
        for row in self.rows():
            writer.writerow({**row, "rmse_mm": repr(row["rmse_mm"])})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "seed": self.seed,
            "chunk_size": self.chunk_size,
            "config_labels": list(self.config_labels),
            "kinds": [k.value for k in self.kinds],
            "reference_path": self.reference_path.tolist(),
            "cells": [
                {
                    "kind": c.kind.value,
                    "config_label": c.config_label,
                    "rmse_mm": c.rmse_mm,
                    "path": c.path.tolist(),
                }
                for c in self.cells
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ReplayReport":
        if doc.get("schema") != REPORT_SCHEMA:
            raise SchemaVersionMismatch(f"expected {REPORT_SCHEMA!r}, got {doc.get('schema')!r}")
        cells = tuple(
            ReplayCell(
                RepresentationKind(c["kind"]), c["config_label"], np.asarray(c["path"], dtype=float), c["rmse_mm"]
            )
            for c in doc["cells"]
        )
        return cls(
            reference_path=np.asarray(doc["reference_path"], dtype=float),
            cells=cells,
            config_labels=tuple(doc["config_labels"]),
            kinds=tuple(RepresentationKind(k) for k in doc["kinds"]),
            seed=doc.get("seed"),
            chunk_size=doc.get("chunk_size", DEFAULT_CHUNK_SIZE),
        )


def run_experiment(
    reference: ReferenceTrajectory,
    configs: Mapping[str, RobotConfiguration],
    kinds: Sequence[RepresentationKind] = ALL_KINDS,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    seed: int | None = None,
    max_workers: int = 1,
) -> ReplayReport:
    """Replay every (kind, configuration) pair.

    Each replay draws active-joint noise from its own generator keyed on
    ``(seed, kind, configuration index)``, so the report does not depend on
    execution order. ``seed=None`` replays noise-free.
    """
    if not configs or not kinds:
        raise InvalidParameter("need at least one configuration and one kind")
    kinds = tuple(k for k in ALL_KINDS if k in set(kinds))
    labels = tuple(configs)
    jobs = []
    for kind in kinds:
        for ci, label in enumerate(labels):
            rng = None if seed is None else np.random.default_rng([seed, 1000 + ALL_KINDS.index(kind), ci])
            jobs.append((kind, label, rng))

    def run(job):
        kind, label, rng = job
        return replay(reference, kind, configs[label], chunk_size=chunk_size, rng=rng, config_label=label)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            cells = tuple(pool.map(run, jobs))
    else:
        cells = tuple(run(job) for job in jobs)
    return ReplayReport(reference.true_path, cells, labels, kinds, seed, chunk_size)


def reference_rng(seed: int) -> np.random.Generator:
    """Active-joint noise stream used while recording the reference."""
    return np.random.default_rng([seed, 999])


def reproduce_table(
    chain: kin.Chain,
    seed: int,
    *,
    kinds: Sequence[RepresentationKind] = ALL_KINDS,
    scale_mm: float = DEFAULT_SCALE_MM,
    num_points: int = DEFAULT_NUM_POINTS,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    shift_rad: float = DEFAULT_SHIFT_RAD,
    trajectory: ReferenceTrajectory | None = None,
    max_workers: int = 1,
) -> ReplayReport:
    """Record a reference in the seeded reference setup and replay it everywhere.

    Without ``trajectory`` the default figure-eight is used.
    """
    configs = default_configs(chain, seed, shift_rad=shift_rad)
    traj = generate_lemniscate(scale_mm, num_points) if trajectory is None else trajectory
    reference = record_reference(configs[REF_LABEL], traj, rng=reference_rng(seed))
    return run_experiment(reference, configs, kinds, chunk_size=chunk_size, seed=seed, max_workers=max_workers)
