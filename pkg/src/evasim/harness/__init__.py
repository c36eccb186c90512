"""Experiment design, trial loop, aggregation and output files."""

from .design import CONDITIONS, ConditionSpec, ExperimentPlan, build_plan, latin_square
from .experiment import EmptyPlanError, ExperimentReport, run_experiment
from .report import emit_outputs
from .trial import TrialDivergence, run_trial

__all__ = [
    "CONDITIONS",
    "ConditionSpec",
    "EmptyPlanError",
    "ExperimentPlan",
    "ExperimentReport",
    "TrialDivergence",
    "build_plan",
    "emit_outputs",
    "latin_square",
    "run_experiment",
    "run_trial",
]
