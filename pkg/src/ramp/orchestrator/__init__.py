from .config import (
    ExperimentConfig,
    artifact_dir,
    data_root,
    load_config,
)
from .pipeline import (
    PipelineError,
    evaluate,
    iterate,
    stage1,
    stage2,
    stage3,
    stage4,
)
from .theory import run_theory_checks

__all__ = [
    "ExperimentConfig",
    "PipelineError",
    "artifact_dir",
    "data_root",
    "evaluate",
    "iterate",
    "load_config",
    "run_theory_checks",
    "stage1",
    "stage2",
    "stage3",
    "stage4",
]
