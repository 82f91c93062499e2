"""dVRK-like kinematics: an endoscope arm (ECM) and two tool arms (PSM1,
PSM2) on a shared cart.

Every arm is a chain of passive setup joints read only by potentiometers,
followed by active joints. The simulator keeps two copies of each joint
vector, the true one and the measured one. Because the setup segment comes
before the active one, the two forward kinematics differ by a rigid
world-frame transform per arm::

    FK_true = base_error @ FK_measured,   base_error = S_true @ S_measured^-1

where ``S`` is the pose at the end of the setup segment. The controller
servoes on measured kinematics, so the robot lands on ``base_error @ command``.

The active segment must be resolvable in closed form: three prismatic joints
with orthonormal axes followed by three revolute joints about distinct
coordinate axes, with identity link offsets everywhere but the last joint.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from relact import se3
from relact.actions import ArmSide, GripperState, Proprioception
from relact.errors import (
    ActiveJointPerturbation,
    ChainFormatError,
    DimensionMismatch,
    InvalidParameter,
    Unreachable,
)
from relact.se3 import Pose

CHAIN_SCHEMA = "relact-chain/1"
DEFAULT_MAX_FK_ERROR_MM = 50.0
DEFAULT_REVOLUTE_SIGMA = 0.01
DEFAULT_PRISMATIC_SIGMA = 2.0
SERVO_TOL_MM = 1e-6
SERVO_TOL_RAD = 1e-8
_MAX_REDRAWS = 1000

ECM = "ECM"
PSM1 = "PSM1"
PSM2 = "PSM2"
# dVRK convention: PSM1 is the right hand, PSM2 the left.
ARM_MANIPULATORS = MappingProxyType({ArmSide.LEFT: PSM2, ArmSide.RIGHT: PSM1})


class JointType(enum.Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"


class Actuation(enum.Enum):
    PASSIVE_SETUP = "passive_setup"
    ACTIVE = "active"


class Use(enum.Enum):
    TRUE = "true"
    MEASURED = "measured"


@dataclass(frozen=True, eq=False)
class JointDescriptor:
    joint_type: JointType
    axis: np.ndarray
    link_offset: Pose = field(default_factory=Pose.identity)
    actuation: Actuation = Actuation.ACTIVE
    potentiometer_sigma: float | None = None
    limits: tuple[float, float] | None = None

    def __post_init__(self):
        axis = np.array(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ChainFormatError(f"joint axis {axis.tolist()} is not unit length")
        axis.flags.writeable = False
        object.__setattr__(self, "axis", axis)
        sigma = self.potentiometer_sigma
        if sigma is None:
            if self.actuation is Actuation.ACTIVE:
                sigma = 0.0
            elif self.joint_type is JointType.REVOLUTE:
                sigma = DEFAULT_REVOLUTE_SIGMA
            else:
                sigma = DEFAULT_PRISMATIC_SIGMA
        if not sigma >= 0.0:
            raise ChainFormatError(f"potentiometer sigma must be >= 0, got {sigma}")
        object.__setattr__(self, "potentiometer_sigma", float(sigma))
        if self.limits is not None:
            lo, hi = (float(v) for v in self.limits)
            if not lo <= hi:
                raise ChainFormatError(f"joint limits {self.limits} are inverted")
            object.__setattr__(self, "limits", (lo, hi))

    @property
    def is_setup(self) -> bool:
        return self.actuation is Actuation.PASSIVE_SETUP

    def motion(self, q: float) -> Pose:
        """Joint motion followed by the fixed link offset."""
        if self.joint_type is JointType.REVOLUTE:
            R = se3.rot_axis(self.axis, q)
            off = self.link_offset
            return Pose.raw(R @ off.p, R @ off.R)
        off = self.link_offset
        return Pose.raw(off.p + q * self.axis, off.R)


@dataclass(frozen=True)
class _ActiveSolver:
    prismatic_axes: np.ndarray  # columns are the three prismatic axes
    rot_axes: tuple[int, int, int]
    rot_signs: tuple[float, float, float]
    last_offset: Pose


def _coord_rot(axis: int, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    if axis == 0:
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == 1:
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _build_solver(active: Sequence[JointDescriptor]) -> _ActiveSolver | None:
    if len(active) != 6:
        return None
    pris, revs = active[:3], active[3:]
    if any(j.joint_type is not JointType.PRISMATIC for j in pris):
        return None
    if any(j.joint_type is not JointType.REVOLUTE for j in revs):
        return None
    if any(not j.link_offset.allclose(se3.IDENTITY, 0.0) for j in active[:-1]):
        return None
    P = np.column_stack([j.axis for j in pris])
    if np.max(np.abs(P.T @ P - np.eye(3))) > 1e-9:
        return None
    axes, signs = [], []
    for j in revs:
        idx = int(np.argmax(np.abs(j.axis)))
        if abs(abs(j.axis[idx]) - 1.0) > 1e-12:
            return None
        axes.append(idx)
        signs.append(float(np.sign(j.axis[idx])))
    if len(set(axes)) != 3:
        return None
    return _ActiveSolver(P, tuple(axes), tuple(signs), active[-1].link_offset)


@dataclass(frozen=True, eq=False)
class Manipulator:
    name: str
    joints: tuple[JointDescriptor, ...]
    tool_offset: Pose = field(default_factory=Pose.identity)
    base: Pose = field(default_factory=Pose.identity)
    nominal_setup: tuple[float, ...] | None = None
    nominal_active: tuple[float, ...] | None = None

    def __post_init__(self):
        joints = tuple(self.joints)
        object.__setattr__(self, "joints", joints)
        kinds = [j.is_setup for j in joints]
        n_setup = sum(kinds)
        if n_setup == 0 or n_setup == len(joints):
            raise ChainFormatError(f"{self.name}: needs at least one setup and one active joint")
        if kinds != [True] * n_setup + [False] * (len(joints) - n_setup):
            raise ChainFormatError(f"{self.name}: setup joints must precede active joints")
        object.__setattr__(self, "n_setup", n_setup)
        ns = tuple(float(v) for v in (self.nominal_setup or [0.0] * n_setup))
        na = tuple(float(v) for v in (self.nominal_active or [0.0] * (len(joints) - n_setup)))
        if len(ns) != n_setup or len(na) != len(joints) - n_setup:
            raise ChainFormatError(f"{self.name}: nominal joint values do not match joint counts")
        object.__setattr__(self, "nominal_setup", ns)
        object.__setattr__(self, "nominal_active", na)
        sigmas = np.array([j.potentiometer_sigma for j in self.active_joints])
        object.__setattr__(self, "_active_sigmas", sigmas if np.any(sigmas > 0) else None)
        solver = _build_solver(self.active_joints)
        object.__setattr__(self, "_solver", solver)
        if solver is not None:
            # Everything after the wrist rotations, as one fixed transform.
            tail = se3.compose(solver.last_offset, self.tool_offset)
            object.__setattr__(self, "_tail", tail)
            object.__setattr__(self, "_tail_inv", se3.inverse(tail))

    @property
    def setup_joints(self) -> tuple[JointDescriptor, ...]:
        return self.joints[: self.n_setup]

    @property
    def active_joints(self) -> tuple[JointDescriptor, ...]:
        return self.joints[self.n_setup :]

    @property
    def resolvable(self) -> bool:
        return self._solver is not None


@dataclass(frozen=True, eq=False)
class Chain:
    manipulators: tuple[Manipulator, ...]
    max_fk_error_mm: float = DEFAULT_MAX_FK_ERROR_MM
    jaw_limits: tuple[float, float] = (0.0, math.pi / 3)

    def __post_init__(self):
        names = [m.name for m in self.manipulators]
        if len(set(names)) != len(names):
            raise ChainFormatError(f"duplicate manipulator names in {names}")
        for required in (ECM, PSM1, PSM2):
            if required not in names:
                raise ChainFormatError(f"chain is missing manipulator {required}")
        if not self.max_fk_error_mm > 0:
            raise ChainFormatError("max_fk_error_mm must be positive")

    def manipulator(self, name: str) -> Manipulator:
        for m in self.manipulators:
            if m.name == name:
                return m
        raise InvalidParameter(f"no manipulator named {name!r}")

    def with_sigmas(self, *, setup: float | None = None, active: float | None = None) -> "Chain":
        """Copy with every setup and/or active potentiometer sigma overridden."""

        def joint(j: JointDescriptor) -> JointDescriptor:
            target = setup if j.is_setup else active
            return j if target is None else replace(j, potentiometer_sigma=target)

        manips = tuple(replace(m, joints=tuple(joint(j) for j in m.joints)) for m in self.manipulators)
        return replace(self, manipulators=manips)

    def without_active_noise(self) -> "Chain":
        return self.with_sigmas(active=0.0)

    def without_noise(self) -> "Chain":
        return self.with_sigmas(setup=0.0, active=0.0)


# -- forward kinematics -----------------------------------------------------

def _segment(joints: Sequence[JointDescriptor], values: Sequence[float], start: Pose) -> Pose:
    g = start
    for joint, q in zip(joints, values):
        g = se3.compose(g, joint.motion(float(q)))
    return g


def forward_kinematics(m: Manipulator, joint_values) -> Pose:
    """World-frame tool pose: base, each joint motion and link offset in order, then the tool offset."""
    q = np.asarray(joint_values, dtype=float).reshape(-1)
    if q.shape[0] != len(m.joints):
        raise DimensionMismatch(f"{m.name} has {len(m.joints)} joints, got {q.shape[0]} values")
    return se3.compose(_segment(m.joints, q, m.base), m.tool_offset)


def setup_pose(m: Manipulator, setup_values) -> Pose:
    q = np.asarray(setup_values, dtype=float).reshape(-1)
    if q.shape[0] != m.n_setup:
        raise DimensionMismatch(f"{m.name} has {m.n_setup} setup joints, got {q.shape[0]} values")
    return _segment(m.setup_joints, q, m.base)


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ArmState:
    true_setup: np.ndarray
    measured_setup: np.ndarray
    true_active: np.ndarray
    measured_active: np.ndarray
    jaw: float = 0.0

    def __post_init__(self):
        for name in ("true_setup", "measured_setup", "true_active", "measured_active"):
            a = np.array(getattr(self, name), dtype=float).reshape(-1)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        object.__setattr__(self, "jaw", float(self.jaw))

    def joint_values(self, use: Use) -> np.ndarray:
        if use is Use.TRUE:
            return np.concatenate((self.true_setup, self.true_active))
        return np.concatenate((self.measured_setup, self.measured_active))

    def same_as(self, other: "ArmState") -> bool:
        return (
            np.array_equal(self.true_setup, other.true_setup)
            and np.array_equal(self.measured_setup, other.measured_setup)
            and np.array_equal(self.true_active, other.true_active)
            and np.array_equal(self.measured_active, other.measured_active)
            and self.jaw == other.jaw
        )


class RobotConfiguration:
    """Immutable joint state of the whole cart plus derived base errors."""

    __slots__ = ("chain", "arms", "rng_seed", "_setup", "_base_error", "_poses")

    def __init__(self, chain: Chain, arms: Mapping[str, ArmState], rng_seed: int | None = None):
        arms = dict(arms)
        setup, errors = {}, {}
        for m in chain.manipulators:
            if m.name not in arms:
                raise InvalidParameter(f"configuration is missing state for {m.name}")
            _check_lengths(m, arms[m.name])
            setup[m.name], errors[m.name] = _derive_setup(chain, m, arms[m.name])
        self._init(chain, arms, rng_seed, setup, errors, {})

    def _init(self, chain, arms, rng_seed, setup, errors, poses):
        object.__setattr__(self, "chain", chain)
        object.__setattr__(self, "arms", MappingProxyType(arms))
        object.__setattr__(self, "rng_seed", rng_seed)
        object.__setattr__(self, "_setup", setup)
        object.__setattr__(self, "_base_error", errors)
        object.__setattr__(self, "_poses", poses)

    def __setattr__(self, name, value):
        raise AttributeError("RobotConfiguration is immutable")

    @classmethod
    def nominal(cls, chain: Chain, rng_seed: int | None = None) -> "RobotConfiguration":
        """Every arm at its nominal joint values, measurements exact."""
        arms = {
            m.name: ArmState(m.nominal_setup, m.nominal_setup, m.nominal_active, m.nominal_active)
            for m in chain.manipulators
        }
        return cls(chain, arms, rng_seed)

    def arm(self, name: str) -> ArmState:
        return self.arms[name]

    def base_error(self, name: str) -> Pose:
        return self._base_error[name]

    def setup_pose(self, name: str, use: Use) -> Pose:
        return self._setup[name][use]

    def with_arm(self, name: str, **changes) -> "RobotConfiguration":
        old = self.arms[name]
        state = replace(old, **changes)
        m = self.chain.manipulator(name)
        _check_lengths(m, state)
        setup, errors = dict(self._setup), dict(self._base_error)
        if not (
            np.array_equal(state.true_setup, old.true_setup)
            and np.array_equal(state.measured_setup, old.measured_setup)
        ):
            setup[name], errors[name] = _derive_setup(self.chain, m, state)
        arms = dict(self.arms)
        arms[name] = state
        poses = {key: g for key, g in self._poses.items() if key[0] != name}
        new = object.__new__(RobotConfiguration)
        new._init(self.chain, arms, self.rng_seed, setup, errors, poses)
        return new

    def _with_active(self, name: str, true_active, measured_active, jaw: float) -> "RobotConfiguration":
        # Servo fast path: setup joints untouched, so setup poses carry over.
        old = self.arms[name]
        state = object.__new__(ArmState)
        true_active.setflags(write=False)
        measured_active.setflags(write=False)
        for field_name, value in (
            ("true_setup", old.true_setup),
            ("measured_setup", old.measured_setup),
            ("true_active", true_active),
            ("measured_active", measured_active),
            ("jaw", float(jaw)),
        ):
            object.__setattr__(state, field_name, value)
        arms = dict(self.arms)
        arms[name] = state
        poses = {key: g for key, g in self._poses.items() if key[0] != name}
        new = object.__new__(RobotConfiguration)
        new._init(self.chain, arms, self.rng_seed, self._setup, self._base_error, poses)
        return new

    def same_as(self, other: "RobotConfiguration") -> bool:
        """Bitwise equality of every joint value."""
        return (
            self.chain is other.chain
            and self.rng_seed == other.rng_seed
            and self.arms.keys() == other.arms.keys()
            and all(self.arms[k].same_as(other.arms[k]) for k in self.arms)
        )


def _check_lengths(m: Manipulator, st: ArmState) -> None:
    if st.true_setup.shape[0] != m.n_setup or st.measured_setup.shape[0] != m.n_setup:
        raise DimensionMismatch(f"{m.name}: setup state has the wrong length")
    n_active = len(m.joints) - m.n_setup
    if st.true_active.shape[0] != n_active or st.measured_active.shape[0] != n_active:
        raise DimensionMismatch(f"{m.name}: active state has the wrong length")


def _derive_setup(chain: Chain, m: Manipulator, st: ArmState):
    s_true = setup_pose(m, st.true_setup)
    s_meas = setup_pose(m, st.measured_setup)
    E = se3.compose(s_true, se3.inverse(s_meas))
    if float(np.linalg.norm(E.p)) > chain.max_fk_error_mm:
        raise InvalidParameter(
            f"{m.name}: base error {np.linalg.norm(E.p):.3f} mm exceeds "
            f"max_fk_error {chain.max_fk_error_mm} mm"
        )
    return {Use.TRUE: s_true, Use.MEASURED: s_meas}, E


def _active_local(m: Manipulator, q: np.ndarray) -> Pose:
    """Setup end to tool, for the closed-form active segment."""
    sol = m._solver
    a, b, c = sol.rot_axes
    sa, sb, sc = sol.rot_signs
    R = _coord_rot(a, sa * q[3]).dot(_coord_rot(b, sb * q[4])).dot(_coord_rot(c, sc * q[5]))
    tail = m._tail
    return Pose._wrap(sol.prismatic_axes.dot(q[:3]) + R.dot(tail.p), R.dot(tail.R))


def manipulator_pose(config: RobotConfiguration, name: str, use: Use = Use.MEASURED) -> Pose:
    key = (name, use)
    cached = config._poses.get(key)
    if cached is not None:
        return cached
    m = config.chain.manipulator(name)
    st = config.arm(name)
    active = st.true_active if use is Use.TRUE else st.measured_active
    if m.resolvable:
        g = se3.compose(config.setup_pose(name, use), _active_local(m, active))
    else:
        g = _segment(m.active_joints, active, config.setup_pose(name, use))
        g = se3.compose(g, m.tool_offset)
    config._poses[key] = g
    return g


def _draw_measurement(joints: Sequence[JointDescriptor], true_values: np.ndarray, rng) -> np.ndarray:
    sigmas = np.array([j.potentiometer_sigma for j in joints])
    if rng is None or not np.any(sigmas > 0):
        return true_values.copy()
    return true_values + sigmas * rng.standard_normal(len(joints))


def perturb_setup_joints(
    config: RobotConfiguration,
    manipulator: str,
    delta_joints,
    rng: np.random.Generator | None = None,
) -> RobotConfiguration:
    """Move the setup joints of one arm and re-read their potentiometers.

    ``delta_joints`` has one entry per joint of the arm; entries for active
    joints must be zero. The new measured values are the new true values plus
    fresh Gaussian reading noise. Draws whose base error would exceed the
    chain's ``max_fk_error_mm`` are rejected and redrawn.
    """
    m = config.chain.manipulator(manipulator)
    delta = np.asarray(delta_joints, dtype=float).reshape(-1)
    if delta.shape[0] != len(m.joints):
        raise DimensionMismatch(f"{m.name} has {len(m.joints)} joints, got {delta.shape[0]} deltas")
    if np.any(delta[m.n_setup :] != 0.0):
        bad = [i for i in range(m.n_setup, len(m.joints)) if delta[i] != 0.0]
        raise ActiveJointPerturbation(f"{m.name}: joints {bad} are active and cannot be perturbed")
    st = config.arm(manipulator)
    new_true = st.true_setup + delta[: m.n_setup]
    limit = config.chain.max_fk_error_mm
    for _ in range(_MAX_REDRAWS):
        measured = _draw_measurement(m.setup_joints, new_true, rng)
        E = se3.compose(setup_pose(m, new_true), se3.inverse(setup_pose(m, measured)))
        if float(np.linalg.norm(E.p)) <= limit:
            return config.with_arm(manipulator, true_setup=new_true, measured_setup=measured)
    raise InvalidParameter(
        f"{m.name}: could not draw a setup measurement within {limit} mm after {_MAX_REDRAWS} tries"
    )


def configure(chain: Chain, seed: int, shifts: Mapping[str, Sequence[float]] | None = None) -> RobotConfiguration:
    """Nominal pose, then every arm's setup joints read once with noise.

    ``shifts`` optionally moves setup joints (per arm, setup-joint-length
    vectors) before the reading. The same seed always gives the same state.
    """
    rng = np.random.default_rng(seed)
    config = RobotConfiguration.nominal(chain, rng_seed=seed)
    for m in chain.manipulators:
        delta = np.zeros(len(m.joints))
        if shifts and m.name in shifts:
            delta[: m.n_setup] = np.asarray(shifts[m.name], dtype=float)
        config = perturb_setup_joints(config, m.name, delta, rng)
    return config


# -- servo ------------------------------------------------------------------

def _tait_bryan(R: np.ndarray, i: int, j: int, k: int) -> tuple[float, float, float]:
    """Angles (a, b, c) with R = R_i(a) R_j(b) R_k(c) for distinct coordinate axes."""
    s = 1.0 if (i, j, k) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)) else -1.0
    cb = math.hypot(R[i, i], R[i, j])
    b = math.atan2(s * R[i, k], cb)
    if cb > 1e-12:
        a = math.atan2(-s * R[j, k], R[k, k])
        c = math.atan2(-s * R[i, j], R[i, i])
    else:
        c = 0.0
        a = math.atan2(s * R[k, j], R[j, j])
    return a, b, c


def _solve_active(m: Manipulator, local: Pose) -> np.ndarray:
    """Active joint values that realise ``local`` (setup end to tool)."""
    sol = m._solver
    target = se3.compose(local, m._tail_inv)
    q_pris = sol.prismatic_axes.T.dot(target.p)
    angles = _tait_bryan(target.R, *sol.rot_axes)
    q_rot = [sgn * ang for sgn, ang in zip(sol.rot_signs, angles)]
    return np.concatenate((q_pris, q_rot))


@dataclass(frozen=True)
class ServoResult:
    achieved_true_pose: Pose
    measured_pose: Pose
    converged: bool
    config: RobotConfiguration


def servo_to(
    config: RobotConfiguration,
    manipulator: str,
    commanded_world_pose: Pose,
    *,
    jaw: float | None = None,
    rng: np.random.Generator | None = None,
) -> ServoResult:
    """Drive one arm until its measured kinematics match the command.

    Active joints are solved in closed form against the measured setup pose.
    With ``rng`` given, each active joint's true value deviates from its
    measured value by Gaussian noise of the joint's sigma.
    """
    m = config.chain.manipulator(manipulator)
    if not m.resolvable:
        raise ChainFormatError(f"{m.name}: active segment cannot be solved in closed form")
    s_meas = config.setup_pose(manipulator, Use.MEASURED)
    q = _solve_active(m, se3.subtract_se3(s_meas, commanded_world_pose))
    for joint, value in zip(m.active_joints, q):
        if joint.limits is not None and not joint.limits[0] <= value <= joint.limits[1]:
            raise Unreachable(
                f"{m.name}: command needs joint value {value:.3f} outside limits {joint.limits}"
            )
    sigmas = m._active_sigmas
    if rng is None or sigmas is None:
        q_true = q.copy()
    else:
        q_true = q + sigmas * rng.standard_normal(len(q))
    new = config._with_active(
        manipulator, q_true, q, config.arm(manipulator).jaw if jaw is None else jaw
    )
    measured = manipulator_pose(new, manipulator, Use.MEASURED)
    achieved = manipulator_pose(new, manipulator, Use.TRUE)
    pos_err = float(np.linalg.norm(measured.p - commanded_world_pose.p))
    # Entrywise rotation-matrix gap bounds the residual angle to first order.
    ang_err = float(np.max(np.abs(measured.R - commanded_world_pose.R)))
    converged = pos_err <= SERVO_TOL_MM and ang_err <= SERVO_TOL_RAD
    return ServoResult(achieved, measured, converged, new)


# -- endoscope frame and proprioception ------------------------------------

def endoscope_tip_frame(config: RobotConfiguration, use: Use = Use.MEASURED) -> Pose:
    return manipulator_pose(config, ECM, use)


def camera_to_world(config: RobotConfiguration, pose: Pose, use: Use = Use.MEASURED) -> Pose:
    return se3.compose(endoscope_tip_frame(config, use), pose)


def proprioception(config: RobotConfiguration, timestamp: float = 0.0) -> Proprioception:
    """Each gripper's believed pose relative to the believed endoscope tip."""
    cam_inv = se3.inverse(endoscope_tip_frame(config, Use.MEASURED))

    def state(side: ArmSide) -> GripperState:
        name = ARM_MANIPULATORS[side]
        pose = se3.compose(cam_inv, manipulator_pose(config, name, Use.MEASURED))
        return GripperState(pose, config.arm(name).jaw)

    return Proprioception(state(ArmSide.LEFT), state(ArmSide.RIGHT), float(timestamp))


def true_relative_pose(config: RobotConfiguration, side: ArmSide) -> Pose:
    cam_inv = se3.inverse(endoscope_tip_frame(config, Use.TRUE))
    return se3.compose(cam_inv, manipulator_pose(config, ARM_MANIPULATORS[side], Use.TRUE))


def active_noise_rms_mm(chain: Chain, name: str = PSM1) -> float:
    """First-order RMS tool displacement from active-joint reading noise.

    Prismatic sigmas count directly; revolute sigmas act through the tool
    offset's lever arm.
    """
    m = chain.manipulator(name)
    reach = float(np.linalg.norm(m.tool_offset.p))
    total = 0.0
    for j in m.active_joints:
        lever = 1.0 if j.joint_type is JointType.PRISMATIC else reach
        total += (j.potentiometer_sigma * lever) ** 2
    return math.sqrt(total)


def active_noise_floor_mm(chain: Chain) -> float:
    """Tracking-error floor attributable to active joints: three times the
    larger per-arm RMS displacement."""
    return 3.0 * max(active_noise_rms_mm(chain, name) for name in (PSM1, PSM2))


# -- chain files ------------------------------------------------------------

def _pose_from_json(obj) -> Pose:
    if obj is None:
        return Pose.identity()
    xyz = obj.get("xyz", [0.0, 0.0, 0.0])
    if "R" in obj:
        R = np.asarray(obj["R"], dtype=float).reshape(3, 3)
    else:
        roll, pitch, yaw = obj.get("rpy", [0.0, 0.0, 0.0])
        R = se3.rpy_to_matrix(roll, pitch, yaw)
    return Pose(xyz, R)


def _pose_to_json(g: Pose) -> dict:
    return {"xyz": g.p.tolist(), "R": g.R.tolist()}


def chain_from_dict(doc: Mapping) -> Chain:
    if doc.get("schema") != CHAIN_SCHEMA:
        raise ChainFormatError(f"expected schema {CHAIN_SCHEMA!r}, got {doc.get('schema')!r}")
    try:
        manips = []
        for md in doc["manipulators"]:
            joints = tuple(
                JointDescriptor(
                    joint_type=JointType(jd["type"]),
                    axis=jd["axis"],
                    link_offset=_pose_from_json(jd.get("offset")),
                    actuation=Actuation(jd["actuation"]),
                    potentiometer_sigma=jd.get("sigma"),
                    limits=tuple(jd["limits"]) if jd.get("limits") is not None else None,
                )
                for jd in md["joints"]
            )
            manips.append(
                Manipulator(
                    name=md["name"],
                    joints=joints,
                    tool_offset=_pose_from_json(md.get("tool_offset")),
                    base=_pose_from_json(md.get("base")),
                    nominal_setup=md.get("nominal_setup"),
                    nominal_active=md.get("nominal_active"),
                )
            )
        return Chain(
            manipulators=tuple(manips),
            max_fk_error_mm=float(doc.get("max_fk_error_mm", DEFAULT_MAX_FK_ERROR_MM)),
            jaw_limits=tuple(doc.get("jaw_limits", (0.0, math.pi / 3))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ChainFormatError):
            raise
        raise ChainFormatError(f"malformed chain description: {exc!r}") from exc


def chain_to_dict(chain: Chain) -> dict:
    return {
        "schema": CHAIN_SCHEMA,
        "max_fk_error_mm": chain.max_fk_error_mm,
        "jaw_limits": list(chain.jaw_limits),
        "manipulators": [
            {
                "name": m.name,
                "base": _pose_to_json(m.base),
                "tool_offset": _pose_to_json(m.tool_offset),
                "nominal_setup": list(m.nominal_setup),
                "nominal_active": list(m.nominal_active),
                "joints": [
                    {
                        "type": j.joint_type.value,
                        "axis": j.axis.tolist(),
                        "offset": _pose_to_json(j.link_offset),
                        "actuation": j.actuation.value,
                        "sigma": j.potentiometer_sigma,
                        "limits": list(j.limits) if j.limits is not None else None,
                    }
                    for j in m.joints
                ],
            }
            for m in chain.manipulators
        ],
    }


def load_chain(path) -> Chain:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ChainFormatError(f"{path}: not valid JSON ({exc})") from exc
    return chain_from_dict(doc)


def save_chain(chain: Chain, path) -> None:
    Path(path).write_text(json.dumps(chain_to_dict(chain), indent=2) + "\n")


def default_chain() -> Chain:
    text = resources.files("relact").joinpath("data/default_chain.json").read_text()
    return chain_from_dict(json.loads(text))
