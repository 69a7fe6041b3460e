from .cards import TASK_IDS, TaskError, TaskSpec, all_specs, load_card, load_spec
from .instance import TaskInstance, instantiate_task
from .success import SuccessReport, check_success, insertion_state, task_predicate

__all__ = [
    "TASK_IDS",
    "TaskError",
    "TaskInstance",
    "TaskSpec",
    "SuccessReport",
    "all_specs",
    "check_success",
    "insertion_state",
    "instantiate_task",
    "load_card",
    "load_spec",
    "task_predicate",
]
