"""strataml: layered evolutionary search for machine-learning pipelines.

Candidate pipelines are evaluated on progressively larger stratified data
subsets; only promising ones graduate to full-data evaluation. Selection is
multi-objective (accuracy up, pipeline length down).
"""

from .data import Dataset, SubsetView, kfold_plan, load_csv, stratified_sample, write_csv
from .engine import (
    RunConfig,
    layer_active,
    layer_sample_sizes,
    layer_timeout,
    layered_ea,
    random_search_baseline,
    shutdown_check,
    single_layer_baseline,
    summarize,
    transfer_step,
)
from .evaluate import EvalOutcome, EvalResult, EvaluationCache, evaluate
from .harness import correlation_experiment, rank_over_time, time_to_equivalence
from .metrics import accuracy, auroc, spearman_rho
from .operators import DEFAULT_REGISTRY
from .pipeline import (
    Individual,
    OperatorRegistry,
    PipelineTree,
    PrimitiveNode,
    canonical_form,
    parse_pipeline,
    pipeline_length,
    validate_tree,
)
from .rng import RngStream
from .selection import crowding_distance, dominates, non_dominated_sort, selection, top
from .trace import RunTrace
from .variation import VariationRates, crossover, mutate, new_population, random_tree, var_or

__version__ = "0.1.0"
