"""Linear PCA and kernel PCA subspace models.

Both models standardize inputs, expose score projections, and compute
the two monitoring statistics: T2 in the retained subspace and the
squared residual (SPE). Kernel PCA keeps every positive-eigenvalue
component so the residual statistic can measure energy outside the full
empirical feature span, and centers test kernels with the stored Gram
row means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InsufficientRank, InvalidConfig, InvalidShape, NumericalFailure
from .linalg import ColumnStats
from .monitor import Thresholds

__all__ = [
    "KernelConfig",
    "PcaModel",
    "KpcaModel",
    "fit_pca",
    "kernel_eval",
    "kernel_matrix",
    "fit_kpca",
    "kpca_project",
    "kpca_scores",
    "kpca_statistics",
]

# Gram eigenvalues below this fraction of the largest are rank noise
_RANK_FLOOR = 1e-12


@dataclass(frozen=True)
class KernelConfig:
    """Kernel choice: 'rbf' with k(x,y)=exp(-||x-y||^2/width), or 'linear'."""

    kind: str = "rbf"
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise InvalidConfig(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not (self.width > 0.0 and np.isfinite(self.width)):
            raise InvalidConfig(f"rbf width must be positive and finite, got {self.width}")


@dataclass
class PcaModel:
    """Linear PCA on standardized data with descending eigenvalues."""

    loadings: np.ndarray
    eigenvalues: np.ndarray
    input_stats: ColumnStats
    n_components: int
    thresholds: Thresholds | None = None

    def transform(self, x) -> np.ndarray:
        """Scores of raw-unit rows in the retained subspace."""
        xs = linalg.apply_stats(np.atleast_2d(x), self.input_stats)
        return xs @ self.loadings

    def statistics(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Per-row (T2, SPE) for a raw-unit matrix."""
        xs = linalg.apply_stats(np.atleast_2d(x), self.input_stats)
        scores = xs @ self.loadings
        t2 = np.sum(scores * scores / self.eigenvalues, axis=1)
        resid = xs - scores @ self.loadings.T
        return t2, np.sum(resid * resid, axis=1)


def fit_pca(x, a: int) -> PcaModel:
    """Fit PCA retaining the top ``a`` covariance eigenvectors.

    Args:
        x: Raw data matrix, N x m.
        a: Number of retained components, 1 <= a <= m.

    Returns:
        PcaModel with loadings (m x a) and the retained covariance
        eigenvalues in descending order.

    Raises:
        InvalidConfig: a outside [1, m].
        DegenerateColumn: A constant input column.
    """
    xs, stats = linalg.standardize(x)
    n, m = xs.shape
    if not (1 <= a <= m):
        raise InvalidConfig(f"a must be in [1, {m}], got {a}")
    cov = (xs.T @ xs) / (n - 1)
    eig = linalg.sym_eig(cov)
    return PcaModel(
        loadings=np.ascontiguousarray(eig.vectors[:, :a]),
        eigenvalues=eig.values[:a].copy(),
        input_stats=stats,
        n_components=a,
    )


def kernel_eval(cfg: KernelConfig, x, y) -> float:
    """Scalar kernel value between two equal-length vectors."""
    xv = np.asarray(x, dtype=np.float64).ravel()
    yv = np.asarray(y, dtype=np.float64).ravel()
    if xv.shape != yv.shape:
        raise InvalidShape(f"vector lengths differ: {xv.shape[0]} vs {yv.shape[0]}")
    if cfg.kind == "linear":
        return float(xv @ yv)
    diff = xv - yv
    return float(np.exp(-(diff @ diff) / cfg.width))


def kernel_matrix(cfg: KernelConfig, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise kernel values, rows of ``a`` against rows of ``b``."""
    a = linalg.ensure_matrix(a, "a")
    b = linalg.ensure_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise InvalidShape(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    if cfg.kind == "linear":
        return a @ b.T
    sq_a = np.sum(a * a, axis=1)
    sq_b = np.sum(b * b, axis=1)
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-d2 / cfg.width)


def _tolerant_scale(x) -> tuple[np.ndarray, ColumnStats]:
    # like linalg.standardize, but constant columns are centered and
    # left at scale 1 instead of raising; degenerate inputs must still
    # reach the Gram stage so rank errors surface as InsufficientRank
    x = linalg.ensure_matrix(x, "x")
    if x.shape[0] < 2:
        raise InvalidShape(f"need at least 2 rows, got {x.shape[0]}")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std <= 1e-12, 1.0, std)
    stats = ColumnStats(mean=mean, std=std)
    return (x - mean) / std, stats


@dataclass
class KpcaModel:
    """Kernel PCA state: training rows, eigenpairs, and centering terms.

    ``alphas_full``/``eigenvalues_full`` hold every component above the
    rank floor (needed by the residual statistic); the first
    ``n_components`` columns are the retained subspace.
    """

    config: KernelConfig
    n_components: int
    training_data: np.ndarray
    input_stats: ColumnStats
    alphas: np.ndarray
    eigenvalues: np.ndarray
    alphas_full: np.ndarray
    eigenvalues_full: np.ndarray
    gram_row_means: np.ndarray
    gram_grand_mean: float
    train_scores: np.ndarray
    thresholds: Thresholds | None = None

    @property
    def n_train(self) -> int:
        return self.training_data.shape[0]

    def statistics(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Per-row (T2, SPE) for a raw-unit matrix (vectorized path)."""
        scores, kbar_self = _project_full(self, np.atleast_2d(x))
        lam_hat = self.eigenvalues / (self.n_train - 1)
        retained = scores[:, : self.n_components]
        t2 = np.sum(retained * retained / lam_hat, axis=1)
        spe_vals = kbar_self - np.sum(scores * scores, axis=1)
        return t2, spe_vals


def fit_kpca(x, a: int, cfg: KernelConfig) -> KpcaModel:
    """Fit kernel PCA on the double-centered Gram matrix.

    The Gram matrix of the scaled data is centered on both sides,
    eigendecomposed, and every eigenvalue above 1e-12 of the largest is
    kept. Eigenvector columns are scaled so the implicit feature-space
    loadings have unit norm (lambda * ||alpha||^2 = 1).

    Args:
        x: Raw data matrix, N x m.
        a: Retained component count, 1 <= a <= N.
        cfg: Kernel configuration.

    Returns:
        KpcaModel with training scores T = Kbar @ alphas.

    Raises:
        InvalidConfig: a outside [1, N].
        InsufficientRank: Fewer than ``a`` positive eigenvalues (for
            instance when all training rows are identical and the
            centered Gram is zero).
    """
    xs, stats = _tolerant_scale(x)
    n = xs.shape[0]
    if not (1 <= a <= n):
        raise InvalidConfig(f"a must be in [1, {n}], got {a}")
    k = kernel_matrix(cfg, xs, xs)
    k = 0.5 * (k + k.T)
    row_means = k.mean(axis=1)
    grand = float(k.mean())
    kc = k - row_means[:, None] - row_means[None, :] + grand
    kc = 0.5 * (kc + kc.T)
    eig = linalg.sym_eig(kc)
    top = float(eig.values[0]) if eig.values.size else 0.0
    if top <= 0.0:
        raise InsufficientRank("centered Gram matrix has no positive eigenvalues")
    keep = eig.values > _RANK_FLOOR * top
    r = int(np.count_nonzero(keep))
    if r < a:
        raise InsufficientRank(f"only {r} positive eigenvalues, {a} requested")
    lam_full = eig.values[:r].copy()
    alphas_full = eig.vectors[:, :r] / np.sqrt(lam_full)
    scores_full = kc @ alphas_full
    return KpcaModel(
        config=cfg,
        n_components=a,
        training_data=xs,
        input_stats=stats,
        alphas=np.ascontiguousarray(alphas_full[:, :a]),
        eigenvalues=lam_full[:a].copy(),
        alphas_full=np.ascontiguousarray(alphas_full),
        eigenvalues_full=lam_full,
        gram_row_means=row_means,
        gram_grand_mean=grand,
        train_scores=np.ascontiguousarray(scores_full[:, :a]),
    )


def _center_rows(model: KpcaModel, k_new: np.ndarray) -> np.ndarray:
    # kbar_new = k_new - row_means - mean(k_new) + grand, per test row
    return (
        k_new
        - model.gram_row_means[None, :]
        - k_new.mean(axis=1, keepdims=True)
        + model.gram_grand_mean
    )


def _project_full(model: KpcaModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full-rank scores and centered self-kernels for raw-unit rows."""
    xs = linalg.apply_stats(x, model.input_stats)
    k_new = kernel_matrix(model.config, xs, model.training_data)
    kc = _center_rows(model, k_new)
    scores = kc @ model.alphas_full
    if model.config.kind == "linear":
        k_self = np.sum(xs * xs, axis=1)
    else:
        k_self = np.ones(xs.shape[0])
    kbar_self = k_self - 2.0 * k_new.mean(axis=1) + model.gram_grand_mean
    return scores, kbar_self


def kpca_project(model: KpcaModel, x_new) -> np.ndarray:
    """Score vector (length a) for one raw-unit sample.

    Evaluates the kernel against all N training rows, centers with the
    stored row means, and projects; cost is Theta(N*m + N*a).
    """
    x = np.asarray(x_new, dtype=np.float64).ravel()
    if x.shape[0] != model.training_data.shape[1]:
        raise InvalidShape(
            f"sample length {x.shape[0]} != model dimension {model.training_data.shape[1]}"
        )
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("sample contains non-finite values")
    xs = (x - model.input_stats.mean) / model.input_stats.std
    if model.config.kind == "linear":
        k_new = model.training_data @ xs
    else:
        diff = model.training_data - xs
        k_new = np.exp(-np.sum(diff * diff, axis=1) / model.config.width)
    kc = k_new - model.gram_row_means - k_new.mean() + model.gram_grand_mean
    return kc @ model.alphas


def kpca_scores(model: KpcaModel, x) -> np.ndarray:
    """Retained score matrix (n x a) for raw-unit rows.

    The batched form of `kpca_project`: one kernel evaluation per
    training row per sample, then centering and projection onto the
    retained columns. This is the dominant online cost of the kernel
    method and the path the timing harness measures.
    """
    xs = linalg.apply_stats(np.atleast_2d(x), model.input_stats)
    k_new = kernel_matrix(model.config, xs, model.training_data)
    return _center_rows(model, k_new) @ model.alphas


def kpca_statistics(model: KpcaModel, x_new) -> tuple[float, float]:
    """(T2, SPE) for one raw-unit sample.

    T2 sums retained score components against eigenvalue/(N-1); SPE is
    the centered self-kernel minus the complete positive-rank expansion
    (energy outside the empirical feature span).
    """
    x = np.asarray(x_new, dtype=np.float64).reshape(1, -1)
    scores, kbar_self = _project_full(model, x)
    lam_hat = model.eigenvalues / (model.n_train - 1)
    retained = scores[0, : model.n_components]
    t2 = float(np.sum(retained * retained / lam_hat))
    spe_val = float(kbar_self[0] - scores[0] @ scores[0])
    return t2, spe_val
