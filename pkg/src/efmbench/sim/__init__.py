from .contact import Wrench, compute_contact_wrench
from .scene import (
    Body,
    RobotState,
    SceneError,
    SceneState,
    SimParams,
    reset,
    validate_description,
)
from .world import CartesianTarget, grasp, hold_targets, release, step

__all__ = [
    "Body",
    "CartesianTarget",
    "RobotState",
    "SceneError",
    "SceneState",
    "SimParams",
    "Wrench",
    "compute_contact_wrench",
    "grasp",
    "hold_targets",
    "release",
    "reset",
    "step",
    "validate_description",
]
