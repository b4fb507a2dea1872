"""Process monitoring with an autoencoder-PCA network and kernel baselines.

The package fits monitoring models on fault-free operating data and
scores new samples with two statistics: T2 inside the retained
subspace and the squared residual outside it, fused into a single
combined index with a probabilistic weighting. The trainable network
replaces the kernel method's per-sample pass over the stored training
set with a fixed-cost forward pass.
"""

from .dataio import (Dataset, FaultSpec, SynthConfig, TeLayout, TestSet, load_csv,
                     load_dataset_dir, load_te, save_csv, save_dataset, synthesize)
from .errors import (DegenerateColumn, DegenerateSample, FormatError, InsufficientRank,
                     InvalidConfig, InvalidShape, NumericalFailure, ParseError,
                     SingularMatrix, ToolkitError)
from .evaluation import (EvalSummary, TimingReport, TrialResult, benchmark_online,
                         detection_delay, far, fdr, run_trials, timing_csv)
from .methods import DETERMINISTIC, METHODS, MethodSpec, fit_method, online_scorer
from .monitor import (KdeConfig, StatSeries, Thresholds, bic, bic_series,
                      calibrate_thresholds, detect, hotelling_t2, kde_threshold, spe)
from .network import (DaeModel, DaePcaModel, NetworkConfig, TrainReport,
                      cayley_projection, forward, loss_total, score_batch,
                      score_online, statistics, train, train_dae)
from .store import load_model, save_model
from .subspace import (KernelConfig, KpcaModel, PcaModel, fit_kpca, fit_pca,
                       kernel_eval, kernel_matrix, kpca_project, kpca_scores,
                       kpca_statistics)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "ToolkitError", "InvalidShape", "NumericalFailure", "SingularMatrix",
    "DegenerateColumn", "DegenerateSample", "InvalidConfig", "InsufficientRank",
    "FormatError", "ParseError",
    # subspace models
    "KernelConfig", "PcaModel", "KpcaModel", "fit_pca", "fit_kpca",
    "kernel_eval", "kernel_matrix", "kpca_project", "kpca_scores", "kpca_statistics",
    # network
    "NetworkConfig", "DaePcaModel", "DaeModel", "TrainReport", "cayley_projection",
    "forward", "loss_total", "train", "train_dae", "score_online", "score_batch",
    "statistics",
    # monitoring
    "Thresholds", "KdeConfig", "StatSeries", "hotelling_t2", "spe", "kde_threshold",
    "calibrate_thresholds", "bic", "bic_series", "detect",
    # data
    "Dataset", "TestSet", "FaultSpec", "SynthConfig", "TeLayout", "synthesize",
    "load_te", "save_csv", "load_csv", "save_dataset", "load_dataset_dir",
    # methods and evaluation
    "METHODS", "DETERMINISTIC", "MethodSpec", "fit_method", "online_scorer",
    "fdr", "far", "detection_delay", "TrialResult", "EvalSummary", "run_trials",
    "TimingReport", "benchmark_online", "timing_csv",
    # persistence
    "save_model", "load_model",
]
