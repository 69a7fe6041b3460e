from .demo import demonstrate
from .plans import PLANS, role_assignment
from .viewplan import PlannerParams, ViewMode, plan_active_view, view_flags

__all__ = [
    "PLANS",
    "PlannerParams",
    "ViewMode",
    "demonstrate",
    "plan_active_view",
    "role_assignment",
    "view_flags",
]
