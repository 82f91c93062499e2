"""Rigid-body algebra on SE(3): poses, the two pose subtraction rules, 6D
rotation encoding and path RMSE.

Conventions
-----------
A pose ``g = (p, R)`` maps a point expressed in the child frame to the
parent frame: ``x_parent = R @ x_child + p``. Translations are millimeters,
angles radians. Rotations are stored as full 3x3 matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

from relact.errors import (
    DegenerateInput,
    EmptyPath,
    InvalidRotation,
    LengthMismatch,
)

# Accept-as-is / repair / reject thresholds for rotation matrices.
ORTHO_TOL = 1e-9
REPAIR_TOL = 1e-6
# Gram-Schmidt refuses columns shorter than this.
DEGENERATE_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _det3(R: np.ndarray) -> float:
    a, b, c, d, e, f, g, h, i = R.ravel().tolist()
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def orthonormality_error(R: np.ndarray) -> float:
    """Max absolute deviation of ``R.T @ R`` from identity, and of det from 1."""
    R = np.asarray(R, dtype=float)
    dev = float(np.max(np.abs(R.T.dot(R) - np.eye(3))))
    return max(dev, abs(_det3(R) - 1.0))


def gram_schmidt(c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
    """Build a rotation from two (possibly non-orthonormal) column candidates.

    Raises DegenerateInput when ``c1`` is (near) zero or ``c2`` is (near)
    collinear with it.
    """
    # Scalar arithmetic: far cheaper than numpy calls on 3-vectors.
    x1, y1, z1 = (float(v) for v in c1)
    x2, y2, z2 = (float(v) for v in c2)
    n1 = math.sqrt(x1 * x1 + y1 * y1 + z1 * z1)
    if not n1 > DEGENERATE_TOL:
        raise DegenerateInput(f"first column has norm {n1:.3e}")
    x1, y1, z1 = x1 / n1, y1 / n1, z1 / n1
    k = x1 * x2 + y1 * y2 + z1 * z2
    x2, y2, z2 = x2 - k * x1, y2 - k * y1, z2 - k * z1
    n2 = math.sqrt(x2 * x2 + y2 * y2 + z2 * z2)
    if not n2 > DEGENERATE_TOL:
        raise DegenerateInput(f"second column collinear with first (residual norm {n2:.3e})")
    x2, y2, z2 = x2 / n2, y2 / n2, z2 / n2
    return np.array(
        [
            [x1, x2, y1 * z2 - z1 * y2],
            [y1, y2, z1 * x2 - x1 * z2],
            [z1, z2, x1 * y2 - y1 * x2],
        ]
    )


def as_rotation(R, *, repair: bool = True) -> np.ndarray:
    """Validate ``R`` as a rotation matrix and return a read-only float copy.

    Drift up to ``REPAIR_TOL`` is removed by Gram-Schmidt on the first two
    columns; anything beyond, or any reflection, raises InvalidRotation.
    """
    R = np.array(R, dtype=float).reshape(3, 3)
    if not np.all(np.isfinite(R)):
        raise InvalidRotation("rotation has non-finite entries")
    err = orthonormality_error(R)
    if err <= ORTHO_TOL:
        return _frozen(R)
    if repair and err <= REPAIR_TOL and _det3(R) > 0:
        return _frozen(gram_schmidt(R[:, 0], R[:, 1]))
    raise InvalidRotation(f"matrix is not a rotation (orthonormality error {err:.3e})")


def as_vec3(v) -> np.ndarray:
    v = np.array(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return _frozen(v)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``(p, R)``; immutable.

    The public constructor validates ``R``. Use ``Pose.raw`` for values that
    must be carried through unchecked (e.g. a record being validated).
    """

    p: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", as_vec3(self.p))
        object.__setattr__(self, "R", as_rotation(self.R))

    @classmethod
    def raw(cls, p, R) -> "Pose":
        obj = object.__new__(cls)
        object.__setattr__(obj, "p", _frozen(np.array(p, dtype=float).reshape(3)))
        object.__setattr__(obj, "R", _frozen(np.array(R, dtype=float).reshape(3, 3)))
        return obj

    @classmethod
    def _wrap(cls, p: np.ndarray, R: np.ndarray) -> "Pose":
        # Internal: takes ownership of freshly computed arrays, no checks.
        obj = object.__new__(cls)
        p.setflags(write=False)
        R.setflags(write=False)
        object.__setattr__(obj, "p", p)
        object.__setattr__(obj, "R", R)
        return obj

    @classmethod
    def identity(cls) -> "Pose":
        return cls.raw(np.zeros(3), np.eye(3))

    @classmethod
    def from_translation(cls, x: float = 0.0, y: float = 0.0, z: float = 0.0) -> "Pose":
        return cls.raw((x, y, z), np.eye(3))

    @classmethod
    def from_rotation(cls, R) -> "Pose":
        return cls(np.zeros(3), R)

    @classmethod
    def from_matrix(cls, T) -> "Pose":
        T = np.asarray(T, dtype=float)
        return cls(T[:3, 3], T[:3, :3])

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.p
        return T

    def __matmul__(self, other: "Pose") -> "Pose":
        return compose(self, other)

    def inverse(self) -> "Pose":
        return inverse(self)

    def apply(self, points) -> np.ndarray:
        """Map points (shape (3,) or (N, 3)) from the child to the parent frame."""
        return np.asarray(points, dtype=float) @ self.R.T + self.p

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.p, other.p) and np.array_equal(self.R, other.R))

    __hash__ = None

    def allclose(self, other: "Pose", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.p, other.p, rtol=0.0, atol=atol)
            and np.allclose(self.R, other.R, rtol=0.0, atol=atol)
        )

    def __repr__(self) -> str:
        return f"Pose(p={self.p.tolist()}, R={self.R.tolist()})"


@dataclass(frozen=True, eq=False)
class HybridDelta:
    """Translation delta in the parent frame, rotation delta in the current tool frame."""

    dp: np.ndarray
    dR: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dp", as_vec3(self.dp))
        object.__setattr__(self, "dR", as_rotation(self.dR))

    @classmethod
    def raw(cls, dp, dR) -> "HybridDelta":
        obj = object.__new__(cls)
        object.__setattr__(obj, "dp", _frozen(np.array(dp, dtype=float).reshape(3)))
        object.__setattr__(obj, "dR", _frozen(np.array(dR, dtype=float).reshape(3, 3)))
        return obj

    @classmethod
    def _wrap(cls, dp: np.ndarray, dR: np.ndarray) -> "HybridDelta":
        obj = object.__new__(cls)
        dp.setflags(write=False)
        dR.setflags(write=False)
        object.__setattr__(obj, "dp", dp)
        object.__setattr__(obj, "dR", dR)
        return obj

    @classmethod
    def zero(cls) -> "HybridDelta":
        return cls.raw(np.zeros(3), np.eye(3))

    def __eq__(self, other) -> bool:
        if not isinstance(other, HybridDelta):
            return NotImplemented
        return bool(np.array_equal(self.dp, other.dp) and np.array_equal(self.dR, other.dR))

    __hash__ = None

    def allclose(self, other: "HybridDelta", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.dp, other.dp, rtol=0.0, atol=atol)
            and np.allclose(self.dR, other.dR, rtol=0.0, atol=atol)
        )

    def __repr__(self) -> str:
        return f"HybridDelta(dp={self.dp.tolist()}, dR={self.dR.tolist()})"


IDENTITY = Pose.identity()


def compose(a: Pose, b: Pose) -> Pose:
    # Products of valid rotations stay valid to rounding; skip re-validation.
    return Pose._wrap(a.p + a.R.dot(b.p), a.R.dot(b.R))


def inverse(g: Pose) -> Pose:
    Rt = g.R.T
    return Pose._wrap(-Rt.dot(g.p), Rt.copy())


def subtract_se3(current: Pose, desired: Pose) -> Pose:
    """Motion from ``current`` to ``desired`` seen from the current body frame.

    ``compose(current, subtract_se3(current, desired)) == desired``.
    """
    Rt = current.R.T
    return Pose._wrap(Rt.dot(desired.p - current.p), Rt.dot(desired.R))


def subtract_hybrid(current: Pose, desired: Pose) -> HybridDelta:
    """``(p_desired - p_current, R_current^T R_desired)``.

    The translation part stays in the common parent frame; the rotation part
    is relative to the current body frame.
    """
    return HybridDelta._wrap(desired.p - current.p, current.R.T.dot(desired.R))


def apply_hybrid(current: Pose, delta: HybridDelta) -> Pose:
    return Pose._wrap(current.p + delta.dp, current.R.dot(delta.dR))


def rot_to_6d(R) -> np.ndarray:
    """First two columns of ``R``, column 1 then column 2."""
    R = np.asarray(R, dtype=float)
    return np.concatenate((R[:, 0], R[:, 1]))


def sixd_to_rot(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(6)
    return gram_schmidt(v[:3], v[3:])


def rmse(path_a, path_b) -> float:
    """Root-mean-square Euclidean distance between corresponding points (mm)."""
    a = np.asarray(path_a, dtype=float)
    b = np.asarray(path_b, dtype=float)
    if len(a) != len(b):
        raise LengthMismatch(f"paths have lengths {len(a)} and {len(b)}")
    if len(a) == 0:
        raise EmptyPath("cannot compute RMSE of empty paths")
    a = a.reshape(len(a), 3)
    b = b.reshape(len(b), 3)
    d2 = np.sum((a - b) ** 2, axis=1)
    return float(np.sqrt(np.mean(d2)))


# -- constructors used throughout tests and the simulator -------------------

def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_axis(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    k = np.asarray(axis, dtype=float)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rpy_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Fixed-axis roll/pitch/yaw, i.e. ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    return _ScipyRotation.random(random_state=rng).as_matrix()


def random_pose(rng: np.random.Generator, scale_mm: float = 100.0) -> Pose:
    return Pose(rng.uniform(-scale_mm, scale_mm, size=3), random_rotation(rng))


def small_rotation(rotvec) -> np.ndarray:
    return _ScipyRotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix()


def as_points(poses: Sequence[Pose]) -> np.ndarray:
    return np.array([g.p for g in poses], dtype=float).reshape(-1, 3)
