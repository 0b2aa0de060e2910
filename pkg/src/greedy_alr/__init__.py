"""Greedy-sampling active learning for regression, with a benchmark harness."""

__version__ = "0.1.0"

from .dataset import (  # noqa: E402
    ColumnSpec,
    Dataset,
    PoolSpec,
    RawTable,
    budget_k,
    drowsiness_index,
    encode_and_normalize,
    load_csv,
    load_dataset,
    split_pool,
    synthetic_linear,
)
from .model import RidgeModel, predict, ridge_fit  # noqa: E402
from .samplers import PoolState, StrategyConfig, STRATEGIES, select_next  # noqa: E402
from .harness import RunRecord, aggregate, auc, cc, rmse, run_once  # noqa: E402
from .stats import dunn_pairwise, fdr_adjust, significance_table  # noqa: E402
