"""Agentic causal DAG discovery: propose candidate graphs, verify them statistically, refine."""

from .config import Hyperparameters
from .dag import Dag, build_dag, d_separated, descendants
from .data import IngestConfig, PanelDataset, TemporalTag, load_csv, sample_balanced_subset, tag_column
from .evaluator import Diagnostics, build_failure_memo, evaluate_dag
from .identification import backdoor_valid, minimal_adjustment_set, positivity_check
from .orchestrator import RunConfig, RunTranscript, run

__all__ = [
    "Dag",
    "Diagnostics",
    "Hyperparameters",
    "IngestConfig",
    "PanelDataset",
    "RunConfig",
    "RunTranscript",
    "TemporalTag",
    "backdoor_valid",
    "build_dag",
    "build_failure_memo",
    "d_separated",
    "descendants",
    "evaluate_dag",
    "load_csv",
    "minimal_adjustment_set",
    "positivity_check",
    "run",
    "sample_balanced_subset",
    "tag_column",
]
