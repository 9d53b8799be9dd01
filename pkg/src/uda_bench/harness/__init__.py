"""Training loop, schedules, random search and the record store."""

from uda_bench.harness.schedule import EarlyStopper, onecycle_lr, paired_batches
from uda_bench.harness.search import (
    RerunSummary,
    SearchResult,
    Selection,
    plan_trials,
    random_search,
    rerun_best,
    sample_hyperparams,
    sample_value,
    select_best,
    summarize_runs,
)
from uda_bench.harness.store import (
    RECORDS_FILE,
    REVERSE_FILE,
    SOURCE_ONLY_FILE,
    append_record,
    load_records,
    load_source_only,
    save_source_only,
)
from uda_bench.harness.trainer import (
    Trainer,
    TrialOutcome,
    run_trial,
    source_only_reference,
    train_source_only,
)

__all__ = [
    "RECORDS_FILE",
    "REVERSE_FILE",
    "SOURCE_ONLY_FILE",
    "EarlyStopper",
    "RerunSummary",
    "SearchResult",
    "Selection",
    "Trainer",
    "TrialOutcome",
    "append_record",
    "load_records",
    "load_source_only",
    "onecycle_lr",
    "paired_batches",
    "plan_trials",
    "random_search",
    "rerun_best",
    "sample_hyperparams",
    "sample_value",
    "save_source_only",
    "select_best",
    "source_only_reference",
    "summarize_runs",
    "train_source_only",
]
