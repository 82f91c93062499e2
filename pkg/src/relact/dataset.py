"""Demonstration files, record validation, chunk export and normalization.

On-disk formats are line-delimited JSON. A demonstration file starts with a
header line and holds one line per step::

    {"schema": "relact-demo/1", "task_name": ..., "dt": ..., "num_steps": N, "metadata": {...}}
    {"i": 0, "t": 0.0, "x": {"left": {"p": [...], "R": [[...]], "jaw": ...}, "right": ...}, "a": {...}}

``x`` is the proprioception observed at the step and ``a`` the command
issued. Floats are written with ``repr`` precision, so a load of a saved
record reproduces every number bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from relact import se3
from relact.actions import (
    ACTION_DIM,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_JAW_LIMITS,
    Command,
    GripperState,
    Proprioception,
    RepresentationKind,
    chunk_from_array,
    chunk_to_array,
    decode,
    encode,
)
from relact.errors import (
    EmptyInput,
    InvalidParameter,
    MalformedRecord,
    RecordTooShort,
    SchemaVersionMismatch,
)
from relact.se3 import Pose

DEMO_SCHEMA = "relact-demo/1"
CHUNKS_SCHEMA = "relact-chunks/1"
STATS_SCHEMA = "relact-stats/1"
STD_FLOOR = 1e-6
ROTATION_FINDING_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DemoStep:
    proprioception: Proprioception
    command: Command


@dataclass(frozen=True, eq=False)
class DemonstrationRecord:
    """A demonstration as stored on disk.

    Nothing is checked at construction; ``validate`` reports problems so that
    damaged records can still be loaded and inspected.
    """

    task_name: str
    dt: float
    steps: tuple[DemoStep, ...]
    metadata: dict = field(default_factory=dict)
    schema_version: str = DEMO_SCHEMA

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def commands(self) -> tuple[Command, ...]:
        return tuple(s.command for s in self.steps)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([s.proprioception.timestamp for s in self.steps], dtype=float)


def record_from_reference(reference, task_name: str = "lemniscate", metadata: Mapping | None = None) -> DemonstrationRecord:
    """Pair a recorded reference's proprioception with its commands."""
    if reference.proprioception is None:
        raise InvalidParameter("reference must be recorded first")
    steps = tuple(DemoStep(x, a) for x, a in zip(reference.proprioception, reference.commands))
    return DemonstrationRecord(task_name, float(reference.dt), steps, dict(metadata or {}))


def synthetic_demo(
    num_steps: int,
    seed: int,
    *,
    dt: float = 0.05,
    step_mm: float = 0.5,
    step_rad: float = 0.01,
    task_name: str = "synthetic",
) -> DemonstrationRecord:
    """Seeded random-walk demonstration around a nominal bimanual pose.

    Each command is the next step's proprioception, as in smooth
    teleoperation where the arm tracks its setpoint closely.
    """
    if num_steps < 1:
        raise InvalidParameter(f"num_steps must be >= 1, got {num_steps}")
    rng = np.random.default_rng(seed)
    starts = [
        Pose((0.0, 35.0, 200.0), se3.rot_x(math.pi)),
        Pose((0.0, -35.0, 200.0), se3.rot_x(math.pi)),
    ]
    track = []
    poses = starts
    jaws = [0.5, 0.5]
    for _ in range(num_steps + 1):
        track.append((poses, jaws))
        poses = [
            se3.compose(g, Pose(rng.normal(0.0, step_mm, 3), se3.small_rotation(rng.normal(0.0, step_rad, 3))))
            for g in poses
        ]
        lo, hi = DEFAULT_JAW_LIMITS
        jaws = [float(np.clip(j + rng.normal(0.0, 0.01), lo, hi)) for j in jaws]
    steps = []
    for t in range(num_steps):
        (pl, pr), (jl, jr) = track[t]
        (cl, cr), (kl, kr) = track[t + 1]
        x = Proprioception(GripperState(pl, jl), GripperState(pr, jr), t * dt)
        steps.append(DemoStep(x, (GripperState(cl, kl), GripperState(cr, kr))))
    return DemonstrationRecord(task_name, dt, tuple(steps), {"seed": seed})


# -- serialization ----------------------------------------------------------

def _gripper_to_json(g: GripperState) -> dict:
    return {"p": g.pose.p.tolist(), "R": g.pose.R.tolist(), "jaw": float(g.jaw)}


def _gripper_from_json(obj) -> GripperState:
    p = np.asarray(obj["p"], dtype=float)
    R = np.asarray(obj["R"], dtype=float)
    if p.shape != (3,) or R.shape != (3, 3):
        raise ValueError(f"pose has shapes {p.shape} and {R.shape}")
    jaw = obj["jaw"]
    if not isinstance(jaw, (int, float)) or isinstance(jaw, bool):
        raise ValueError(f"jaw must be a number, got {jaw!r}")
    return GripperState(Pose.raw(p, R), float(jaw))


def _proprio_to_json(x: Proprioception) -> dict:
    return {"left": _gripper_to_json(x.left), "right": _gripper_to_json(x.right)}


def _proprio_from_json(obj, timestamp: float) -> Proprioception:
    return Proprioception(_gripper_from_json(obj["left"]), _gripper_from_json(obj["right"]), timestamp)


def _command_to_json(a: Command) -> dict:
    return {"left": _gripper_to_json(a[0]), "right": _gripper_to_json(a[1])}


def _command_from_json(obj) -> Command:
    return _gripper_from_json(obj["left"]), _gripper_from_json(obj["right"])


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=True)


def demo_lines(record: DemonstrationRecord) -> Iterable[str]:
    yield _dumps(
        {
            "schema": record.schema_version,
            "task_name": record.task_name,
            "dt": float(record.dt),
            "num_steps": len(record.steps),
            "metadata": record.metadata,
        }
    )
    for i, step in enumerate(record.steps):
        yield _dumps(
            {
                "i": i,
                "t": float(step.proprioception.timestamp),
                "x": _proprio_to_json(step.proprioception),
                "a": _command_to_json(step.command),
            }
        )


def save_demo(record: DemonstrationRecord, path) -> None:
    if len(record.steps) == 0:
        raise EmptyInput("cannot save a demonstration with no steps")
    Path(path).write_text("\n".join(demo_lines(record)) + "\n")


def _parse_header(line: str, schema: str) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"not valid JSON ({exc.msg})") from exc
    if not isinstance(header, dict):
        raise MalformedRecord("header is not an object")
    if header.get("schema") != schema:
        raise SchemaVersionMismatch(f"expected {schema!r}, got {header.get('schema')!r}")
    return header


def load_demo(path) -> DemonstrationRecord:
    """Read a demonstration file.

    Raises SchemaVersionMismatch for a foreign header and MalformedRecord,
    carrying the step index, for unparsable, truncated, misnumbered or
    time-reversed steps.
    """
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise MalformedRecord("file is empty")
    header = _parse_header(lines[0], DEMO_SCHEMA)
    try:
        task_name = str(header["task_name"])
        dt = float(header["dt"])
        num_steps = int(header["num_steps"])
        metadata = dict(header.get("metadata") or {})
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"missing or bad header field ({exc!r})") from exc
    body = [ln for ln in lines[1:] if ln.strip()]
    steps = []
    prev_t = -math.inf
    for i, line in enumerate(body):
        try:
            obj = json.loads(line)
            if obj["i"] != i:
                raise ValueError(f"step numbered {obj['i']}")
            t = obj["t"]
            if not isinstance(t, (int, float)) or isinstance(t, bool):
                raise ValueError(f"timestamp must be a number, got {t!r}")
            t = float(t)
            x = _proprio_from_json(obj["x"], t)
            a = _command_from_json(obj["a"])
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"not valid JSON ({exc.msg})", step=i) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"bad step ({exc!r})", step=i) from exc
        if not t > prev_t:
            raise MalformedRecord(f"timestamp {t!r} does not increase (previous {prev_t!r})", step=i)
        prev_t = t
        steps.append(DemoStep(x, a))
    if len(steps) != num_steps:
        raise MalformedRecord(f"header announces {num_steps} steps, file has {len(steps)}", step=len(steps))
    return DemonstrationRecord(task_name, dt, tuple(steps), metadata, header["schema"])


# -- validation -------------------------------------------------------------

@dataclass(frozen=True)
class Finding:
    step: int | None
    code: str
    message: str

    def __str__(self) -> str:
        where = "record" if self.step is None else f"step {self.step}"
        return f"{where}: [{self.code}] {self.message}"


def _check_gripper(step: int, label: str, g: GripperState, jaw_limits, out: list[Finding]) -> None:
    p, R = g.pose.p, g.pose.R
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(R)) and math.isfinite(g.jaw)):
        out.append(Finding(step, "non-finite", f"{label} has non-finite values"))
        return
    det = float(np.linalg.det(R))
    if det < 0:
        out.append(Finding(step, "reflection", f"{label} rotation has det {det:.6g}"))
    else:
        err = se3.orthonormality_error(R)
        if err > ROTATION_FINDING_TOL:
            out.append(Finding(step, "rotation", f"{label} rotation off by {err:.3e}"))
    lo, hi = jaw_limits
    if not lo <= g.jaw <= hi:
        out.append(Finding(step, "jaw-limit", f"{label} jaw {g.jaw:.6g} outside [{lo:.6g}, {hi:.6g}]"))


def validate(record: DemonstrationRecord, jaw_limits: tuple[float, float] = DEFAULT_JAW_LIMITS) -> list[Finding]:
    """Everything wrong with a record; an empty list means it is clean."""
    findings: list[Finding] = []
    if record.schema_version != DEMO_SCHEMA:
        findings.append(Finding(None, "schema", f"schema {record.schema_version!r} is not {DEMO_SCHEMA!r}"))
    if not (math.isfinite(record.dt) and record.dt > 0):
        findings.append(Finding(None, "dt", f"dt {record.dt!r} is not a positive number"))
    if not record.steps:
        findings.append(Finding(None, "empty", "record has no steps"))
    prev = None
    for i, step in enumerate(record.steps):
        x, (al, ar) = step.proprioception, step.command
        t = x.timestamp
        if not math.isfinite(t) or t < 0:
            findings.append(Finding(i, "timestamp", f"timestamp {t!r} is negative or non-finite"))
        elif prev is not None and not t > prev:
            findings.append(Finding(i, "timestamp", f"timestamp {t!r} does not increase (previous {prev!r})"))
        prev = t if math.isfinite(t) else prev
        _check_gripper(i, "proprioception left", x.left, jaw_limits, findings)
        _check_gripper(i, "proprioception right", x.right, jaw_limits, findings)
        _check_gripper(i, "command left", al, jaw_limits, findings)
        _check_gripper(i, "command right", ar, jaw_limits, findings)
    return findings


# -- chunk export -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExportedChunk:
    start: int
    input: Proprioception
    target: np.ndarray  # (C, 20)


def export_chunks(
    record: DemonstrationRecord,
    kind: RepresentationKind,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> list[ExportedChunk]:
    """One training chunk per start index ``t`` in ``[0, T - C]``."""
    if chunk_size < 1:
        raise InvalidParameter(f"chunk_size must be >= 1, got {chunk_size}")
    T = len(record.steps)
    if T < chunk_size:
        raise RecordTooShort(f"record has {T} steps, chunk size is {chunk_size}")
    commands = record.commands
    out = []
    for t in range(T - chunk_size + 1):
        x_t = record.steps[t].proprioception
        target = chunk_to_array(encode(kind, x_t, commands, t, chunk_size))
        target.flags.writeable = False
        out.append(ExportedChunk(t, x_t, target))
    return out


def decode_exported(chunk: ExportedChunk, kind: RepresentationKind) -> list[Command]:
    return decode(chunk_from_array(chunk.target, kind), chunk.input)


def max_roundtrip_error(record: DemonstrationRecord, chunks: Sequence[ExportedChunk], kind: RepresentationKind) -> float:
    """Largest entrywise gap between decoded chunks and the source commands."""
    worst = 0.0
    for chunk in chunks:
        for offset, (left, right) in enumerate(decode_exported(chunk, kind)):
            src_l, src_r = record.steps[chunk.start + offset].command
            for got, want in ((left, src_l), (right, src_r)):
                worst = max(
                    worst,
                    float(np.max(np.abs(got.pose.p - want.pose.p))),
                    float(np.max(np.abs(got.pose.R - want.pose.R))),
                    abs(got.jaw - want.jaw),
                )
    return worst


def save_chunks(chunks: Sequence[ExportedChunk], kind: RepresentationKind, path, *, task_name: str = "") -> None:
    chunk_size = int(chunks[0].target.shape[0]) if chunks else 0
    lines = [
        _dumps(
            {
                "schema": CHUNKS_SCHEMA,
                "kind": kind.value,
                "chunk_size": chunk_size,
                "num_chunks": len(chunks),
                "task_name": task_name,
            }
        )
    ]
    for c in chunks:
        lines.append(
            _dumps(
                {
                    "start": c.start,
                    "t": float(c.input.timestamp),
                    "x": _proprio_to_json(c.input),
                    "target": c.target.tolist(),
                }
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_chunks(path) -> tuple[RepresentationKind, list[ExportedChunk]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise MalformedRecord("file is empty")
    header = _parse_header(lines[0], CHUNKS_SCHEMA)
    try:
        kind = RepresentationKind(header["kind"])
        num_chunks = int(header["num_chunks"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"missing or bad header field ({exc!r})") from exc
    chunks = []
    for i, line in enumerate(ln for ln in lines[1:] if ln.strip()):
        try:
            obj = json.loads(line)
            target = np.asarray(obj["target"], dtype=float)
            if target.ndim != 2 or target.shape[1] != ACTION_DIM:
                raise ValueError(f"target has shape {target.shape}")
            x = _proprio_from_json(obj["x"], float(obj["t"]))
            chunks.append(ExportedChunk(int(obj["start"]), x, target))
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"not valid JSON ({exc.msg})", step=i) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"bad chunk ({exc!r})", step=i) from exc
    if len(chunks) != num_chunks:
        raise MalformedRecord(f"header announces {num_chunks} chunks, file has {len(chunks)}", step=len(chunks))
    return kind, chunks


# -- normalization ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NormalizationStats:
    """Per-dimension mean and population std (floored) of action vectors."""

    kind: RepresentationKind
    mean: np.ndarray
    std: np.ndarray
    num_samples: int

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        std = np.array(self.std, dtype=float).reshape(-1)
        if mean.shape != (ACTION_DIM,) or std.shape != (ACTION_DIM,):
            raise InvalidParameter(f"stats need {ACTION_DIM} dims, got {mean.shape} and {std.shape}")
        if np.any(std < STD_FLOOR):
            raise InvalidParameter(f"std below floor {STD_FLOOR}")
        mean.flags.writeable = False
        std.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def normalize(self, v) -> np.ndarray:
        return (np.asarray(v, dtype=float) - self.mean) / self.std

    def denormalize(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {
            "schema": STATS_SCHEMA,
            "kind": self.kind.value,
            "dims": ACTION_DIM,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "num_samples": self.num_samples,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "NormalizationStats":
        if doc.get("schema") != STATS_SCHEMA:
            raise SchemaVersionMismatch(f"expected {STATS_SCHEMA!r}, got {doc.get('schema')!r}")
        return cls(RepresentationKind(doc["kind"]), doc["mean"], doc["std"], int(doc["num_samples"]))


def compute_stats(chunks: Sequence[ExportedChunk], kind: RepresentationKind) -> NormalizationStats:
    if len(chunks) == 0:
        raise EmptyInput("no chunks to compute statistics over")
    data = np.concatenate([c.target for c in chunks], axis=0)
    mean = data.mean(axis=0)
    std = np.maximum(data.std(axis=0), STD_FLOOR)
    return NormalizationStats(kind, mean, std, int(data.shape[0]))


def save_stats(stats: NormalizationStats, path) -> None:
    Path(path).write_text(json.dumps(stats.to_dict(), indent=2) + "\n")


def load_stats(path) -> NormalizationStats:
    return NormalizationStats.from_dict(json.loads(Path(path).read_text()))
