"""Python front end for the cfassign C++ core."""

from ._core import (
    Dataset,
    Error,
    Model,
    ModelConfig,
    Scenario,
    TrainConfig,
    __version__,
    binarize,
    connection_violation,
    discreteness_penalty,
    exhaustive,
    generate_dataset,
    gsd,
    is_feasible,
    large_scenario,
    load_dataset,
    load_model,
    parameter_count,
    random_assignment,
    scenario_preset,
    small_scenario,
    sum_rate,
    train,
)

__all__ = [
    "Dataset",
    "Error",
    "Model",
    "ModelConfig",
    "Scenario",
    "TrainConfig",
    "__version__",
    "binarize",
    "connection_violation",
    "discreteness_penalty",
    "exhaustive",
    "generate_dataset",
    "gsd",
    "is_feasible",
    "large_scenario",
    "load_dataset",
    "load_model",
    "parameter_count",
    "random_assignment",
    "scenario_preset",
    "small_scenario",
    "sum_rate",
    "train",
]
