"""Camera-centric, tool-centric and hybrid-relative action chunks.

All poses live in the endoscope-tip frame. A chunk encoded at time ``t``
subtracts the proprioception ``x_t`` from every command in the chunk; the
reference is frozen at ``t`` rather than rolled forward per step. Jaw angles
are never differenced.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from relact import se3
from relact.errors import HorizonOverrun, InvalidParameter, KindMismatch
from relact.se3 import HybridDelta, Pose

DEFAULT_CHUNK_SIZE = 100
DEFAULT_JAW_LIMITS = (0.0, math.pi / 3)
ACTION_DIM = 20
ARM_DIM = 10


class ArmSide(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class RepresentationKind(enum.Enum):
    CAMERA_CENTRIC = "camera"
    TOOL_CENTRIC = "tool"
    HYBRID_RELATIVE = "hybrid"

    @classmethod
    def parse(cls, name: str) -> "RepresentationKind":
        key = name.strip().lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower(), kind.label.lower()):
                return kind
        raise InvalidParameter(f"unknown representation kind {name!r}")

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    RepresentationKind.CAMERA_CENTRIC: "Camera-centric",
    RepresentationKind.TOOL_CENTRIC: "Tool-centric",
    RepresentationKind.HYBRID_RELATIVE: "Hybrid-relative",
}

ALL_KINDS = tuple(RepresentationKind)


@dataclass(frozen=True)
class GripperState:
    pose: Pose
    jaw: float


@dataclass(frozen=True)
class Proprioception:
    left: GripperState
    right: GripperState
    timestamp: float = 0.0

    def __getitem__(self, side: ArmSide) -> GripperState:
        return self.left if side is ArmSide.LEFT else self.right


# One bimanual command: (left, right) desired gripper states.
Command = tuple[GripperState, GripperState]


@dataclass(frozen=True)
class ArmAction:
    kind: RepresentationKind
    payload: Union[Pose, HybridDelta]
    jaw: float

    def __post_init__(self):
        want = HybridDelta if self.kind is RepresentationKind.HYBRID_RELATIVE else Pose
        if not isinstance(self.payload, want):
            raise KindMismatch(
                f"{self.kind.name} action needs a {want.__name__} payload, "
                f"got {type(self.payload).__name__}"
            )


ActionStep = tuple[ArmAction, ArmAction]


@dataclass(frozen=True)
class ActionChunk:
    kind: RepresentationKind
    steps: tuple[ActionStep, ...]

    def __post_init__(self):
        if len(self.steps) < 1:
            raise InvalidParameter("a chunk needs at least one step")
        for left, right in self.steps:
            if left.kind is not self.kind or right.kind is not self.kind:
                raise KindMismatch("all actions in a chunk must share its kind")

    @property
    def horizon(self) -> int:
        return len(self.steps)


def _window(commands: Sequence[Command], t: int, C: int) -> Sequence[Command]:
    if C < 1 or t < 0:
        raise InvalidParameter(f"need t >= 0 and C >= 1, got t={t}, C={C}")
    if t + C > len(commands):
        raise HorizonOverrun(f"chunk [{t}, {t + C}) overruns {len(commands)} commands")
    return commands[t : t + C]


def encode_camera_centric(commands: Sequence[Command], t: int, C: int = DEFAULT_CHUNK_SIZE) -> ActionChunk:
    kind = RepresentationKind.CAMERA_CENTRIC
    steps = tuple(
        (ArmAction(kind, left.pose, left.jaw), ArmAction(kind, right.pose, right.jaw))
        for left, right in _window(commands, t, C)
    )
    return ActionChunk(kind, steps)


def encode_tool_centric(
    x_t: Proprioception, commands: Sequence[Command], t: int, C: int = DEFAULT_CHUNK_SIZE
) -> ActionChunk:
    kind = RepresentationKind.TOOL_CENTRIC
    gl, gr = x_t.left.pose, x_t.right.pose
    steps = tuple(
        (
            ArmAction(kind, se3.subtract_se3(gl, left.pose), left.jaw),
            ArmAction(kind, se3.subtract_se3(gr, right.pose), right.jaw),
        )
        for left, right in _window(commands, t, C)
    )
    return ActionChunk(kind, steps)


def encode_hybrid(
    x_t: Proprioception, commands: Sequence[Command], t: int, C: int = DEFAULT_CHUNK_SIZE
) -> ActionChunk:
    kind = RepresentationKind.HYBRID_RELATIVE
    gl, gr = x_t.left.pose, x_t.right.pose
    steps = tuple(
        (
            ArmAction(kind, se3.subtract_hybrid(gl, left.pose), left.jaw),
            ArmAction(kind, se3.subtract_hybrid(gr, right.pose), right.jaw),
        )
        for left, right in _window(commands, t, C)
    )
    return ActionChunk(kind, steps)


def encode(
    kind: RepresentationKind,
    x_t: Proprioception,
    commands: Sequence[Command],
    t: int,
    C: int = DEFAULT_CHUNK_SIZE,
) -> ActionChunk:
    if kind is RepresentationKind.CAMERA_CENTRIC:
        return encode_camera_centric(commands, t, C)
    if kind is RepresentationKind.TOOL_CENTRIC:
        return encode_tool_centric(x_t, commands, t, C)
    return encode_hybrid(x_t, commands, t, C)


def _require(chunk: ActionChunk, kind: RepresentationKind) -> None:
    if chunk.kind is not kind:
        raise KindMismatch(f"cannot decode a {chunk.kind.name} chunk as {kind.name}")


def decode_camera_centric(chunk: ActionChunk, x_t: Proprioception | None = None) -> list[Command]:
    _require(chunk, RepresentationKind.CAMERA_CENTRIC)
    return [
        (GripperState(left.payload, left.jaw), GripperState(right.payload, right.jaw))
        for left, right in chunk.steps
    ]


def decode_tool_centric(chunk: ActionChunk, x_t: Proprioception) -> list[Command]:
    _require(chunk, RepresentationKind.TOOL_CENTRIC)
    gl, gr = x_t.left.pose, x_t.right.pose
    return [
        (
            GripperState(se3.compose(gl, left.payload), left.jaw),
            GripperState(se3.compose(gr, right.payload), right.jaw),
        )
        for left, right in chunk.steps
    ]


def decode_hybrid(chunk: ActionChunk, x_t: Proprioception) -> list[Command]:
    _require(chunk, RepresentationKind.HYBRID_RELATIVE)
    gl, gr = x_t.left.pose, x_t.right.pose
    return [
        (
            GripperState(se3.apply_hybrid(gl, left.payload), left.jaw),
            GripperState(se3.apply_hybrid(gr, right.payload), right.jaw),
        )
        for left, right in chunk.steps
    ]


def decode(chunk: ActionChunk, x_t: Proprioception) -> list[Command]:
    if chunk.kind is RepresentationKind.CAMERA_CENTRIC:
        return decode_camera_centric(chunk, x_t)
    if chunk.kind is RepresentationKind.TOOL_CENTRIC:
        return decode_tool_centric(chunk, x_t)
    return decode_hybrid(chunk, x_t)


# -- flat 20-dim layout -----------------------------------------------------
# per arm: translation (3) | rot6d: column 1 then column 2 (6) | jaw (1)
# left arm occupies [0, 10), right arm [10, 20).

def _arm_to_vector(action: ArmAction) -> np.ndarray:
    if isinstance(action.payload, HybridDelta):
        trans, rot = action.payload.dp, action.payload.dR
    else:
        trans, rot = action.payload.p, action.payload.R
    return np.concatenate((trans, se3.rot_to_6d(rot), [action.jaw]))


def _arm_from_vector(v: np.ndarray, kind: RepresentationKind) -> ArmAction:
    R = se3.sixd_to_rot(v[3:9])
    if kind is RepresentationKind.HYBRID_RELATIVE:
        payload = HybridDelta.raw(v[0:3], R)
    else:
        payload = Pose.raw(v[0:3], R)
    return ArmAction(kind, payload, float(v[9]))


def to_action_vector(step: ActionStep) -> np.ndarray:
    left, right = step
    return np.concatenate((_arm_to_vector(left), _arm_to_vector(right)))


def from_action_vector(v, kind: RepresentationKind) -> ActionStep:
    v = np.asarray(v, dtype=float)
    if v.shape != (ACTION_DIM,):
        raise InvalidParameter(f"action vector must have shape ({ACTION_DIM},), got {v.shape}")
    return _arm_from_vector(v[:ARM_DIM], kind), _arm_from_vector(v[ARM_DIM:], kind)


def chunk_to_array(chunk: ActionChunk) -> np.ndarray:
    return np.stack([to_action_vector(step) for step in chunk.steps])


def chunk_from_array(array, kind: RepresentationKind) -> ActionChunk:
    array = np.asarray(array, dtype=float)
    return ActionChunk(kind, tuple(from_action_vector(row, kind) for row in array))
