"""Desk-scale MT-Opt: simulator, data collection, Q-training, and evaluation.

Thin re-export of the pybind11 extension; see `help(mtopt._mtopt)` for the
full surface.
"""

from ._mtopt import (  # noqa: F401
    Action,
    CemConfig,
    CollectionReport,
    EvalOptions,
    EvalReport,
    EvalSummary,
    GripperCmd,
    ImpersonationKind,
    ImpersonationStrategy,
    ObsMode,
    Observation,
    Optimizer,
    OutcomeSummary,
    PipelineConfig,
    PolicySource,
    QArch,
    QFunction,
    SceneSpec,
    ScriptedConfig,
    SimConfig,
    SuccessDetector,
    TabletopEnv,
    TaskDataStats,
    TaskEvalStats,
    TaskMixture,
    TaskRegistry,
    TrainingResult,
    collect,
    dataset_stats,
    evaluate,
    feature_dim,
    finetune,
    policy_act,
    run_training,
    task_predicate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
