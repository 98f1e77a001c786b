"""Training loops, the evaluation protocol and diagnostic metrics."""

from .artifacts import SCHEMA, read_jsonl, write_artifacts
from .config import RunConfig, check_eval_env
from .evaluation import ValidationSet, evaluate, rollout_greedy
from .metrics import HittingTime, empirical_entropy, hitting_time, marginal_state_entropy, visitation_heatmap, welch_z
from .seeding import run_streams
from .training import EpochRecord, Lifetime, RunArtifacts, SeedRun, run_training, train_seed

__all__ = [
    "EpochRecord",
    "HittingTime",
    "Lifetime",
    "RunArtifacts",
    "RunConfig",
    "SCHEMA",
    "SeedRun",
    "ValidationSet",
    "check_eval_env",
    "empirical_entropy",
    "evaluate",
    "hitting_time",
    "marginal_state_entropy",
    "read_jsonl",
    "rollout_greedy",
    "run_streams",
    "run_training",
    "train_seed",
    "visitation_heatmap",
    "welch_z",
    "write_artifacts",
]
