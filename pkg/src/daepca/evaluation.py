"""Detection metrics, trial running, and online timing.

Rates follow the usual convention: the detection rate counts alarms at
or after the fault onset, the false-alarm rate counts alarms before it,
both as percentages. Each method is scored in three spaces: the
retained subspace (T2 alarms), the residual space (SPE alarms), and the
fused space (combined-index alarms).
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import monitor
from .dataio import Dataset, TestSet
from .errors import InvalidConfig, InvalidShape, NumericalFailure
from .methods import DETERMINISTIC, MethodSpec, fit_method, online_scorer

__all__ = [
    "fdr",
    "far",
    "detection_delay",
    "TrialResult",
    "EvalSummary",
    "run_trials",
    "TimingReport",
    "benchmark_online",
    "timing_csv",
]


def _check_alarms(alarms, onset: int) -> np.ndarray:
    arr = np.asarray(alarms)
    if arr.ndim != 1:
        raise InvalidShape(f"alarms must be 1-D, got shape {arr.shape}")
    if arr.dtype != np.bool_:
        raise InvalidShape(f"alarms must be boolean, got dtype {arr.dtype}")
    if not (0 < onset < arr.shape[0]):
        raise InvalidConfig(
            f"onset must split the series, got {onset} of {arr.shape[0]}")
    return arr


def fdr(alarms, onset: int) -> float:
    """Percent of post-onset samples (index >= onset) that alarmed."""
    arr = _check_alarms(alarms, onset)
    post = arr[onset:]
    return 100.0 * np.count_nonzero(post) / post.shape[0]


def far(alarms, onset: int) -> float:
    """Percent of pre-onset samples that alarmed."""
    arr = _check_alarms(alarms, onset)
    pre = arr[:onset]
    return 100.0 * np.count_nonzero(pre) / pre.shape[0]


def detection_delay(alarms, onset: int, run_length: int = 3) -> int | None:
    """Samples from onset to the first sustained alarm, or None.

    Sustained means ``run_length`` consecutive alarms starting at or
    after the onset and fitting inside the series; shorter trailing
    runs do not count.
    """
    arr = _check_alarms(alarms, onset)
    if run_length < 1:
        raise InvalidConfig(f"run_length must be >= 1, got {run_length}")
    n = arr.shape[0]
    for i in range(onset, n - run_length + 1):
        if arr[i:i + run_length].all():
            return i - onset
    return None


@dataclass(frozen=True)
class TrialResult:
    """Metrics for one (seed, fault) pair across the three spaces."""

    fault_id: int
    label: str
    seed: int
    fdr_ps: float
    fdr_rs: float
    fdr_fs: float
    far_ps: float
    far_rs: float
    far_fs: float
    delay: int | None


@dataclass
class EvalSummary:
    """All trial results for one method, with aggregation helpers."""

    method: str
    n_trials: int
    seeds: tuple[int, ...]
    trials: dict[int, list[TrialResult]]
    labels: dict[int, str]
    exclusions: tuple[str, ...]

    def aggregate(self, fault_id: int, metric: str) -> tuple[float, float]:
        """(mean, population std) of a TrialResult field over trials."""
        rows = self.trials[fault_id]
        values = np.array([getattr(r, metric) for r in rows], dtype=np.float64)
        return float(values.mean()), float(values.std())

    def delays(self, fault_id: int) -> tuple[float | None, int]:
        """(mean delay over detected trials or None, detected count)."""
        hits = [r.delay for r in self.trials[fault_id] if r.delay is not None]
        if not hits:
            return None, 0
        return float(np.mean(hits)), len(hits)

    def _rates_csv(self, path, prefix: str) -> None:
        with open(path, "w") as fh:
            fh.write("fault,label,ps_mean,ps_std,rs_mean,rs_std,fs_mean,fs_std\n")
            for fault_id in sorted(self.trials):
                cells = [str(fault_id), self.labels[fault_id]]
                for space in ("ps", "rs", "fs"):
                    mean, std = self.aggregate(fault_id, f"{prefix}_{space}")
                    cells += [f"{mean:.17g}", f"{std:.17g}"]
                fh.write(",".join(cells) + "\n")

    def fdr_csv(self, path) -> None:
        """Detection rates, one row per fault: PS/RS/FS mean and std."""
        self._rates_csv(path, "fdr")

    def far_csv(self, path) -> None:
        """False-alarm rates in the same layout as `fdr_csv`."""
        self._rates_csv(path, "far")

    def delay_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("fault,label,mean_delay,detected,trials\n")
            for fault_id in sorted(self.trials):
                mean, hits = self.delays(fault_id)
                cell = "" if mean is None else f"{mean:.17g}"
                fh.write(f"{fault_id},{self.labels[fault_id]},{cell},"
                         f"{hits},{len(self.trials[fault_id])}\n")


def _spaces(model, test: TestSet, run_length: int) -> TrialResult:
    t2, spe = model.statistics(test.data)
    th = model.thresholds
    if th is None:
        raise InvalidConfig("model has no calibrated thresholds")
    series = monitor.detect(t2, spe, th)
    alarm_ps = t2 > th.j_t2
    alarm_rs = spe > th.j_spe
    return TrialResult(
        fault_id=test.fault_id,
        label=test.label,
        seed=-1,
        fdr_ps=fdr(alarm_ps, test.onset),
        fdr_rs=fdr(alarm_rs, test.onset),
        fdr_fs=fdr(series.alarm, test.onset),
        far_ps=far(alarm_ps, test.onset),
        far_rs=far(alarm_rs, test.onset),
        far_fs=far(series.alarm, test.onset),
        delay=detection_delay(series.alarm, test.onset, run_length),
    )


def _one_trial(args) -> tuple[int, list[TrialResult] | str]:
    spec, dataset, seed, run_length = args
    try:
        model = fit_method(spec, dataset.train, dataset.val, seed)
        results = [replace(_spaces(model, ts, run_length), seed=seed)
                   for ts in dataset.tests]
        return seed, results
    except NumericalFailure as exc:
        return seed, f"seed {seed}: {exc}"


def run_trials(dataset: Dataset, spec: MethodSpec, n_trials: int,
               base_seed: int = 0, run_length: int = 3,
               workers: int = 1) -> EvalSummary:
    """Fit and score ``n_trials`` times over seeds base_seed + i.

    Deterministic methods (pca, kpca) are fitted exactly once; their
    summary holds a single trial per fault, so aggregated stds are 0.
    A trial that raises NumericalFailure is excluded from aggregation
    with a warning and noted in the summary.

    Args:
        workers: Process count for parallel trials (1 = in-process).
    """
    if n_trials < 1:
        raise InvalidConfig(f"n_trials must be >= 1, got {n_trials}")
    if not dataset.tests:
        raise InvalidConfig("dataset has no test sets to evaluate")
    deterministic = spec.name in DETERMINISTIC
    seeds = (base_seed,) if deterministic else tuple(base_seed + i for i in range(n_trials))
    jobs = [(spec, dataset, s, run_length) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one_trial, jobs))
    else:
        outcomes = [_one_trial(j) for j in jobs]
    trials: dict[int, list[TrialResult]] = {ts.fault_id: [] for ts in dataset.tests}
    labels = {ts.fault_id: ts.label for ts in dataset.tests}
    exclusions: list[str] = []
    for seed, outcome in outcomes:
        if isinstance(outcome, str):
            warnings.warn(f"trial excluded: {outcome}", stacklevel=2)
            exclusions.append(outcome)
            continue
        for result in outcome:
            trials[result.fault_id].append(result)
    if any(not rows for rows in trials.values()):
        raise NumericalFailure(
            f"all {len(seeds)} trials failed: {'; '.join(exclusions)}")
    return EvalSummary(
        method=spec.name,
        n_trials=n_trials,
        seeds=seeds,
        trials=trials,
        labels=labels,
        exclusions=tuple(exclusions),
    )


@dataclass(frozen=True)
class TimingReport:
    """Median wall time for scoring one test matrix."""

    method: str
    seconds: float
    n_samples: int
    n_train: int | None
    repeats: int


def benchmark_online(entries, test_matrix, repeats: int = 5) -> list[TimingReport]:
    """Median wall time of each fitted model's online scoring path.

    Each entry is (name, fitted model). The scored path is the
    per-sample feature extraction the method would run in operation:
    kernel evaluation against all stored training rows plus projection
    for kernel PCA, the frozen network forward pass for the
    autoencoder methods. Every model is warmed up once before timing,
    and the training size is reported where the model stores one (it
    is the kernel method's cost driver).
    """
    if repeats < 1:
        raise InvalidConfig(f"repeats must be >= 1, got {repeats}")
    x = np.ascontiguousarray(np.atleast_2d(test_matrix), dtype=np.float64)
    reports = []
    for name, model in entries:
        fn = online_scorer(model)
        fn(x)  # warmup: jit loading, allocator, caches
        times = []
        for _ in range(repeats):
            start = time.perf_counter()
            fn(x)
            times.append(time.perf_counter() - start)
        reports.append(TimingReport(
            method=name,
            seconds=float(np.median(times)),
            n_samples=x.shape[0],
            n_train=getattr(model, "n_train", None),
            repeats=repeats,
        ))
    return reports


def timing_csv(reports, path) -> None:
    with open(path, "w") as fh:
        fh.write("method,seconds,n_samples,n_train,repeats\n")
        for r in reports:
            n_train = "" if r.n_train is None else str(r.n_train)
            fh.write(f"{r.method},{r.seconds:.17g},{r.n_samples},{n_train},{r.repeats}\n")
