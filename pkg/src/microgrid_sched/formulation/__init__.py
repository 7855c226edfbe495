from .build import FormulationError, build_model
from .lpformat import write_lp, read_lp_solution
from .model import BINARY, CONTINUOUS, MilpModel, ModelError, ModelStats, VariableIndex, model_stats

__all__ = [
    "BINARY",
    "CONTINUOUS",
    "FormulationError",
    "MilpModel",
    "ModelError",
    "ModelStats",
    "VariableIndex",
    "build_model",
    "model_stats",
    "read_lp_solution",
    "write_lp",
]
