"""Camera-centric versus relative action representations on a simulated
surgical robot with inaccurate setup-joint kinematics."""

from relact.actions import ALL_KINDS, ActionChunk, ArmSide, GripperState, Proprioception, RepresentationKind
from relact.errors import RelactError
from relact.se3 import HybridDelta, Pose

__version__ = "0.1.0"

__all__ = [
    "ALL_KINDS",
    "ActionChunk",
    "ArmSide",
    "GripperState",
    "HybridDelta",
    "Pose",
    "Proprioception",
    "RelactError",
    "RepresentationKind",
]
