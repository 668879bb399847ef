"""
Datasets, metrics, benchmark runner and scaling harness.
"""
from .benchmark import (
    BenchmarkReport,
    MemoryBank,
    QuestionResult,
    build_memories,
    compare_modes,
    comparison_table,
    cost_report,
    fixed_k_sweep,
    run_benchmark,
)
from .dataset import ConversationDataset, convert_locomo, load_dataset, save_dataset
from .metrics import category_rank, evidence_metrics, fixed_k_truncate, macro_average, token_f1
from .scaling import scaling_harness

__all__ = [
    "BenchmarkReport",
    "ConversationDataset",
    "MemoryBank",
    "QuestionResult",
    "build_memories",
    "category_rank",
    "compare_modes",
    "comparison_table",
    "convert_locomo",
    "cost_report",
    "evidence_metrics",
    "fixed_k_sweep",
    "fixed_k_truncate",
    "load_dataset",
    "macro_average",
    "run_benchmark",
    "save_dataset",
    "scaling_harness",
    "token_f1",
]
