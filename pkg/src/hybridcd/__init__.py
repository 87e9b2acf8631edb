"""Causal structure discovery for mixed continuous and binary data.

Continuous variables follow linear mechanisms with non-Gaussian noise, binary
variables follow logistic conditionals; structures are recovered by scoring
every candidate DAG (or every orientation of a known skeleton) with a
penalized likelihood, with a constraint-based skeleton baseline and a
replicated benchmark harness alongside.
"""

__version__ = "0.1.0"

from .baseline import CITestResult, g2_test, mean_discretize, pc_skeleton
from .bench import (
    BenchResults,
    ExperimentConfig,
    emit_results,
    load_config,
    run_experiment,
    run_replicate,
)
from .dataset import ColumnSchema, Dataset, load_csv, load_schema, save_csv, save_schema
from .errors import (
    CapabilityError,
    DataValidationError,
    HybridCdError,
    InsufficientDataError,
    StructureError,
    UsageError,
)
from .graph import Dag, Skeleton, count_dags, enumerate_dags, enumerate_orientations, skeleton_of
from .scoring import FittedLocal, LocalScoreCache, ScoredDag, bic_score, fit_binary, fit_continuous
from .search import SearchReport, exhaustive_search, oracle_search
from .synth import GenerativeModel, NoiseSpec, derive_rng, random_dag, random_model, sample

__all__ = [
    "__version__",
    "BenchResults",
    "CITestResult",
    "CapabilityError",
    "ColumnSchema",
    "Dag",
    "DataValidationError",
    "Dataset",
    "ExperimentConfig",
    "FittedLocal",
    "GenerativeModel",
    "HybridCdError",
    "InsufficientDataError",
    "LocalScoreCache",
    "NoiseSpec",
    "ScoredDag",
    "SearchReport",
    "Skeleton",
    "StructureError",
    "UsageError",
    "bic_score",
    "count_dags",
    "derive_rng",
    "emit_results",
    "enumerate_dags",
    "enumerate_orientations",
    "exhaustive_search",
    "fit_binary",
    "fit_continuous",
    "g2_test",
    "load_config",
    "load_csv",
    "load_schema",
    "mean_discretize",
    "oracle_search",
    "pc_skeleton",
    "random_dag",
    "random_model",
    "run_experiment",
    "run_replicate",
    "sample",
    "save_csv",
    "save_schema",
    "skeleton_of",
]
