"""The autoencoder-PCA network: structure, losses, training, scoring.

The pipeline is encoder -> fixed batch norm -> orthogonal projection
(parameterized through the Cayley transform of a trainable square
matrix) -> trainable inverse-BN affine -> decoder. Training is
full-batch Adam over the tape in `autodiff`; a validation checkpoint
rule selects the returned weights. Frozen-model scoring runs through
the fixed-accumulation kernels so batch and single-row results are
bitwise identical.

A plain autoencoder baseline (same widths, no BN/projection) trains
through the same machinery for comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, linalg, monitor
from .autodiff import AdamState, Tape, adam_step, batch_norm_stats, lr_schedule
from .errors import InvalidConfig, InvalidShape, NumericalFailure
from .linalg import ColumnStats
from .monitor import Thresholds

__all__ = [
    "NetworkConfig",
    "DaePcaModel",
    "DaeModel",
    "TrainReport",
    "cayley_projection",
    "forward",
    "loss_total",
    "train",
    "train_dae",
    "score_online",
    "score_batch",
    "statistics",
]


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture and training settings.

    ``encoder_hidden`` of None means one hidden layer of width 2*m on
    each side (the decoder mirrors the encoder). Loss weights of None
    resolve at training time: lambda1 = 1/(N*m), lambda2 = 1/(N*d),
    lambda3 = 2/a.
    """

    m: int
    d: int
    a: int
    encoder_hidden: tuple[int, ...] | None = None
    iter_max: int = 20000
    seed: int = 0
    lambda1: float | None = None
    lambda2: float | None = None
    lambda3: float | None = None
    lr_base: float = 0.01
    lr_decay: float = 0.7
    lr_period: int = 350
    checkpoint_interval: int = 100
    bn_epsilon: float = 1e-8
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.m < 1 or self.d < 1:
            raise InvalidConfig(f"widths must be positive, got m={self.m}, d={self.d}")
        if not (1 <= self.a <= self.d):
            raise InvalidConfig(f"need 1 <= a <= d, got a={self.a}, d={self.d}")
        if self.iter_max < 1:
            raise InvalidConfig(f"iter_max must be >= 1, got {self.iter_max}")
        if self.checkpoint_interval < 1:
            raise InvalidConfig("checkpoint_interval must be >= 1")
        if self.bn_epsilon <= 0.0:
            raise InvalidConfig("bn_epsilon must be positive")
        if self.lr_base <= 0.0 or not (0.0 < self.lr_decay <= 1.0) or self.lr_period < 1:
            raise InvalidConfig("learning rate schedule needs lr_base > 0, "
                                "0 < lr_decay <= 1, lr_period >= 1")
        for name in ("lambda1", "lambda2", "lambda3"):
            v = getattr(self, name)
            if v is not None and v < 0.0:
                raise InvalidConfig(f"{name} must be >= 0, got {v}")
        if self.encoder_hidden is not None:
            hidden = tuple(int(h) for h in self.encoder_hidden)
            if not hidden or any(h < 1 for h in hidden):
                raise InvalidConfig("encoder_hidden must be a nonempty tuple of widths")
            object.__setattr__(self, "encoder_hidden", hidden)

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.encoder_hidden if self.encoder_hidden is not None else (2 * self.m,)


@dataclass
class TrainReport:
    """Loss traces, checkpoint record, and the selected iteration."""

    loss_x: np.ndarray
    loss_phi: np.ndarray
    omega_t: np.ndarray
    total: np.ndarray
    orth_sq: np.ndarray
    checkpoint_iters: list[int]
    val_errors: list[float]
    checkpoint_orth_sq: list[float]
    selected_iteration: int
    variant: int
    seed: int


@dataclass(eq=False)
class DaePcaModel:
    """Trained network with frozen statistics for online scoring."""

    config: NetworkConfig
    variant: int
    enc_hidden: list[tuple[np.ndarray, np.ndarray]]
    enc_out_w: np.ndarray
    m0: np.ndarray
    inv_scale: np.ndarray
    inv_shift: np.ndarray
    dec_hidden: list[tuple[np.ndarray, np.ndarray]]
    dec_out_w: np.ndarray
    dec_out_b: np.ndarray
    frozen_bn: ColumnStats
    p: np.ndarray
    feature_cov: np.ndarray
    input_stats: ColumnStats
    thresholds: Thresholds | None = None
    _p_t: np.ndarray = field(init=False, repr=False)
    _cov_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._p_t = np.ascontiguousarray(self.p.T)
        self._cov_inv = np.ascontiguousarray(monitor.inv_pd(self.feature_cov))

    def statistics(self, x) -> tuple[np.ndarray, np.ndarray]:
        return statistics(self, x)


@dataclass(eq=False)
class DaeModel:
    """Plain autoencoder baseline: features are the raw encoder output."""

    config: NetworkConfig
    enc_hidden: list[tuple[np.ndarray, np.ndarray]]
    enc_out_w: np.ndarray
    enc_out_b: np.ndarray
    dec_hidden: list[tuple[np.ndarray, np.ndarray]]
    dec_out_w: np.ndarray
    dec_out_b: np.ndarray
    feature_mean: np.ndarray
    feature_cov: np.ndarray
    input_stats: ColumnStats
    thresholds: Thresholds | None = None
    _cov_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._cov_inv = np.ascontiguousarray(monitor.inv_pd(self.feature_cov))

    def score_batch(self, x) -> tuple[np.ndarray, np.ndarray]:
        xs = linalg.apply_stats(np.atleast_2d(x), self.input_stats)
        h = np.ascontiguousarray(xs)
        for w, b in self.enc_hidden:
            h = _kernels.affine_relu(h, w, b.ravel())
        f = _kernels.affine(h, self.enc_out_w, self.enc_out_b.ravel())
        h2 = f
        for w, b in self.dec_hidden:
            h2 = _kernels.affine_relu(h2, w, b.ravel())
        x_hat = _kernels.affine(h2, self.dec_out_w, self.dec_out_b.ravel())
        return f - self.feature_mean, xs - x_hat

    def statistics(self, x) -> tuple[np.ndarray, np.ndarray]:
        t, resid = self.score_batch(x)
        t = np.ascontiguousarray(t)
        resid = np.ascontiguousarray(resid)
        t2 = _kernels.row_dot(_kernels.matmul(t, self._cov_inv), t)
        return t2, _kernels.row_dot(resid, resid)


def cayley_projection(m0, a: int) -> np.ndarray:
    """First ``a`` columns of (I - S)(I + S)^-1 with S = triu(M0) - triu(M0)'.

    S is skew-symmetric by construction, so I + S has eigenvalues
    1 +- i*w and is always invertible in exact arithmetic; the
    conditioning gate in `linalg.invert` guards the numerical case.
    """
    m0 = linalg.ensure_matrix(m0, "m0")
    d = m0.shape[0]
    if m0.shape[1] != d:
        raise InvalidShape(f"m0 must be square, got {m0.shape}")
    if not (1 <= a <= d):
        raise InvalidConfig(f"need 1 <= a <= d, got a={a}, d={d}")
    m1 = np.triu(m0)
    s = m1 - m1.T
    eye = np.eye(d)
    a_mat = (eye - s) @ linalg.invert(eye + s)
    return np.ascontiguousarray(a_mat[:, :a])


def _init_params(cfg: NetworkConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    # draw order is part of the determinism contract: encoder weights,
    # encoder output, M0, decoder weights, decoder output
    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    params: dict[str, np.ndarray] = {}
    widths = (cfg.m, *cfg.hidden)
    for i in range(len(cfg.hidden)):
        params[f"enc{i}_w"] = glorot(widths[i], widths[i + 1])
        params[f"enc{i}_b"] = np.zeros((1, widths[i + 1]))
    # no bias before BN: the normalization cancels any constant shift,
    # leaving the bias gradient identically zero
    params["enc_out_w"] = glorot(widths[-1], cfg.d)
    params["m0"] = rng.uniform(-0.01, 0.01, size=(cfg.d, cfg.d))
    params["inv_scale"] = np.ones((1, cfg.d))
    params["inv_shift"] = np.zeros((1, cfg.d))
    dec_widths = (cfg.d, *reversed(cfg.hidden))
    for i in range(len(cfg.hidden)):
        params[f"dec{i}_w"] = glorot(dec_widths[i], dec_widths[i + 1])
        params[f"dec{i}_b"] = np.zeros((1, dec_widths[i + 1]))
    params["dec_out_w"] = glorot(dec_widths[-1], cfg.m)
    params["dec_out_b"] = np.zeros((1, cfg.m))
    return params


def _encode(params: dict[str, np.ndarray], cfg: NetworkConfig, xs: np.ndarray) -> np.ndarray:
    h = xs
    for i in range(len(cfg.hidden)):
        h = np.maximum(h @ params[f"enc{i}_w"] + params[f"enc{i}_b"], 0.0)
    return h @ params["enc_out_w"]


def forward(params: dict[str, np.ndarray], xs: np.ndarray, cfg: NetworkConfig,
            bn_stats: ColumnStats | None = None) -> dict[str, np.ndarray]:
    """Numpy forward pass over a standardized batch.

    With ``bn_stats`` of None the batch's own statistics normalize Phi
    (training mode); passing frozen stats reproduces inference.

    Returns:
        Dict with phi, phi_bar, t, phi_bar_fs, phi_fs, x_hat, p, and
        the batch-norm mean/sigma used.
    """
    xs = linalg.ensure_matrix(xs, "xs")
    if xs.shape[1] != cfg.m:
        raise InvalidShape(f"expected {cfg.m} columns, got {xs.shape[1]}")
    phi = _encode(params, cfg, xs)
    if bn_stats is None:
        mean, sigma = batch_norm_stats(phi, cfg.bn_epsilon)
    else:
        mean, sigma = bn_stats.mean, bn_stats.std
    phi_bar = (phi - mean) / sigma
    p = cayley_projection(params["m0"], cfg.a)
    t = phi_bar @ p
    phi_bar_fs = t @ p.T
    phi_fs = phi_bar_fs * params["inv_scale"] + params["inv_shift"]
    h = phi_fs
    for i in range(len(cfg.hidden)):
        h = np.maximum(h @ params[f"dec{i}_w"] + params[f"dec{i}_b"], 0.0)
    x_hat = h @ params["dec_out_w"] + params["dec_out_b"]
    return {
        "phi": phi,
        "phi_bar": phi_bar,
        "t": t,
        "phi_bar_fs": phi_bar_fs,
        "phi_fs": phi_fs,
        "x_hat": x_hat,
        "p": p,
        "bn_mean": mean,
        "bn_sigma": sigma,
    }


def _resolve_lambdas(cfg: NetworkConfig, n: int) -> tuple[float, float, float]:
    lam1 = cfg.lambda1 if cfg.lambda1 is not None else 1.0 / (n * cfg.m)
    lam2 = cfg.lambda2 if cfg.lambda2 is not None else 1.0 / (n * cfg.d)
    lam3 = cfg.lambda3 if cfg.lambda3 is not None else 2.0 / cfg.a
    return lam1, lam2, lam3


def loss_total(outputs: dict[str, np.ndarray], xs: np.ndarray, cfg: NetworkConfig,
               variant: int = 2) -> tuple[float, float, float, float]:
    """Weighted loss of a forward pass: (total, loss_x, loss_phi, omega_t).

    loss_x and loss_phi are squared Frobenius reconstruction errors of
    the input and of the normalized feature matrix; omega_t is the
    squared Frobenius norm of the scores (included only by variant 2).
    """
    if variant not in (1, 2):
        raise InvalidConfig(f"variant must be 1 or 2, got {variant}")
    diff_x = xs - outputs["x_hat"]
    loss_x = float(np.sum(diff_x * diff_x))
    diff_phi = outputs["phi_bar"] - outputs["phi_bar_fs"]
    loss_phi = float(np.sum(diff_phi * diff_phi))
    omega = float(np.sum(outputs["t"] * outputs["t"]))
    lam1, lam2, lam3 = _resolve_lambdas(cfg, xs.shape[0])
    total = lam1 * loss_x + lam2 * loss_phi
    if variant == 2:
        total += lam3 * omega
    return total, loss_x, loss_phi, omega


def _taped_forward(tape: Tape, leaves: dict[str, "object"], x_node, cfg: NetworkConfig,
                   variant: int, lam: tuple[float, float, float]):
    """Build the training graph; returns (total_node, part_values, p_node)."""
    h = x_node
    for i in range(len(cfg.hidden)):
        h = tape.relu(tape.add(tape.matmul(h, leaves[f"enc{i}_w"]), leaves[f"enc{i}_b"]))
    phi = tape.matmul(h, leaves["enc_out_w"])
    phi_bar = tape.batch_norm_fixed(phi, cfg.bn_epsilon)
    d = cfg.d
    eye = tape.leaf(np.eye(d))
    m1 = tape.upper_triangular(leaves["m0"])
    s = tape.subtract(m1, tape.transpose(m1))
    a_mat = tape.matmul(tape.subtract(eye, s), tape.matrix_inverse(tape.add(eye, s)))
    p = tape.slice_columns(a_mat, 0, cfg.a)
    t = tape.matmul(phi_bar, p)
    phi_bar_fs = tape.matmul(t, tape.transpose(p))
    phi_fs = tape.add(tape.mul(phi_bar_fs, leaves["inv_scale"]), leaves["inv_shift"])
    h2 = phi_fs
    for i in range(len(cfg.hidden)):
        h2 = tape.relu(tape.add(tape.matmul(h2, leaves[f"dec{i}_w"]), leaves[f"dec{i}_b"]))
    x_hat = tape.add(tape.matmul(h2, leaves["dec_out_w"]), leaves["dec_out_b"])
    loss_x = tape.frobenius_sq(tape.subtract(x_node, x_hat))
    loss_phi = tape.frobenius_sq(tape.subtract(phi_bar, phi_bar_fs))
    omega = tape.frobenius_sq(t)
    total = tape.add(tape.scalar_mul(lam[0], loss_x), tape.scalar_mul(lam[1], loss_phi))
    if variant == 2:
        total = tape.add(total, tape.scalar_mul(lam[2], omega))
    parts = (float(loss_x.value[0, 0]), float(loss_phi.value[0, 0]),
             float(omega.value[0, 0]))
    return total, parts, p


def taped_loss(params: dict[str, np.ndarray], xs: np.ndarray, cfg: NetworkConfig,
               variant: int = 2):
    """One differentiable loss evaluation; returns (tape, total, leaves).

    Exposed for gradient-correctness checks; `train` uses the same
    graph construction.
    """
    tape = Tape()
    leaves = {name: tape.leaf(value) for name, value in params.items()}
    x_node = tape.leaf(xs)
    lam = _resolve_lambdas(cfg, xs.shape[0])
    total, _, _ = _taped_forward(tape, leaves, x_node, cfg, variant, lam)
    return tape, total, leaves


def _orth_error_sq(p: np.ndarray) -> float:
    g = p.T @ p - np.eye(p.shape[1])
    return float(np.sum(g * g))


def _val_error(params, cfg, xs_val, bn: ColumnStats) -> float:
    out = forward(params, xs_val, cfg, bn_stats=bn)
    diff = xs_val - out["x_hat"]
    return float(np.sum(diff * diff)) / (xs_val.shape[0] * cfg.m)


def train(x_train, x_val, cfg: NetworkConfig, variant: int = 2,
          alpha: float = 0.99,
          kde: monitor.KdeConfig | None = None) -> tuple[DaePcaModel, TrainReport]:
    """Full-batch Adam training with checkpointed validation selection.

    Every ``checkpoint_interval`` iterations (and at the last), the
    current weights are evaluated: batch-norm statistics are frozen
    from a training-batch pass and the validation reconstruction error
    per element is recorded. The returned model is the checkpoint with
    the minimum validation error; its feature covariance is T'T/(N-1)
    over the frozen training scores, and KDE thresholds at ``alpha``
    are calibrated on the training statistics.

    Args:
        x_train: Fault-free training matrix, N x m raw units.
        x_val: Fault-free validation matrix, same width.
        cfg: Network configuration (cfg.m must match the data).
        variant: 1 omits the score-energy regularizer, 2 includes it.
        alpha: Confidence level for threshold calibration.
        kde: Optional KDE settings for the thresholds.

    Returns:
        (model, report).

    Raises:
        NumericalFailure: Non-finite loss or gradients (message carries
            the iteration index).
        DegenerateColumn: Constant training column.
    """
    if variant not in (1, 2):
        raise InvalidConfig(f"variant must be 1 or 2, got {variant}")
    xs_train, input_stats = linalg.standardize(x_train)
    if xs_train.shape[1] != cfg.m:
        raise InvalidShape(f"config m={cfg.m} but data has {xs_train.shape[1]} columns")
    xs_val = linalg.apply_stats(x_val, input_stats)
    n = xs_train.shape[0]
    rng = np.random.default_rng(cfg.seed)
    params = _init_params(cfg, rng)
    # the inverse-BN affine starts as the exact inverse of the initial
    # normalization so the decoder sees unscaled features from step one
    mean0, sigma0 = batch_norm_stats(_encode(params, cfg, xs_train), cfg.bn_epsilon)
    params["inv_scale"] = sigma0.reshape(1, cfg.d).copy()
    params["inv_shift"] = mean0.reshape(1, cfg.d).copy()
    names = list(params.keys())
    values = [params[k] for k in names]
    adam = AdamState.init(values, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    lam = _resolve_lambdas(cfg, n)

    loss_x_hist = np.empty(cfg.iter_max)
    loss_phi_hist = np.empty(cfg.iter_max)
    omega_hist = np.empty(cfg.iter_max)
    total_hist = np.empty(cfg.iter_max)
    orth_hist = np.empty(cfg.iter_max)
    checkpoint_iters: list[int] = []
    val_errors: list[float] = []
    checkpoint_orth: list[float] = []
    best_err = np.inf
    best_state: dict[str, np.ndarray] | None = None
    best_bn: ColumnStats | None = None
    best_iter = 0

    for it in range(cfg.iter_max):
        lr = lr_schedule(it, cfg.lr_base, cfg.lr_decay, cfg.lr_period)
        tape = Tape()
        leaves = {k: tape.leaf(v) for k, v in zip(names, values)}
        x_node = tape.leaf(xs_train)
        total, parts, p_node = _taped_forward(tape, leaves, x_node, cfg, variant, lam)
        total_value = float(total.value[0, 0])
        if not np.isfinite(total_value):
            raise NumericalFailure(f"non-finite loss at iteration {it}")
        loss_x_hist[it], loss_phi_hist[it], omega_hist[it] = parts
        total_hist[it] = total_value
        orth_hist[it] = _orth_error_sq(p_node.value)
        tape.backward(total)
        grads = [leaves[k].grad for k in names]
        try:
            adam_step(values, grads, adam, lr)
        except NumericalFailure as exc:
            raise NumericalFailure(f"at iteration {it}: {exc}") from exc
        if (it + 1) % cfg.checkpoint_interval == 0 or it == cfg.iter_max - 1:
            state = {k: v.copy() for k, v in zip(names, values)}
            phi = _encode(state, cfg, xs_train)
            bn_mean, bn_sigma = batch_norm_stats(phi, cfg.bn_epsilon)
            bn = ColumnStats(mean=bn_mean, std=bn_sigma)
            err = _val_error(state, cfg, xs_val, bn)
            checkpoint_iters.append(it + 1)
            val_errors.append(err)
            checkpoint_orth.append(_orth_error_sq(cayley_projection(state["m0"], cfg.a)))
            if err < best_err:
                best_err = err
                best_state = state
                best_bn = bn
                best_iter = it + 1

    assert best_state is not None and best_bn is not None
    model = _build_model(best_state, best_bn, input_stats, cfg, variant, xs_train,
                         alpha, kde)
    report = TrainReport(
        loss_x=loss_x_hist,
        loss_phi=loss_phi_hist,
        omega_t=omega_hist,
        total=total_hist,
        orth_sq=orth_hist,
        checkpoint_iters=checkpoint_iters,
        val_errors=val_errors,
        checkpoint_orth_sq=checkpoint_orth,
        selected_iteration=best_iter,
        variant=variant,
        seed=cfg.seed,
    )
    return model, report


def _build_model(state: dict[str, np.ndarray], bn: ColumnStats, input_stats: ColumnStats,
                 cfg: NetworkConfig, variant: int, xs_train: np.ndarray,
                 alpha: float, kde: monitor.KdeConfig | None) -> DaePcaModel:
    p = cayley_projection(state["m0"], cfg.a)
    out = forward(state, xs_train, cfg, bn_stats=bn)
    t_train = out["t"]
    cov = (t_train.T @ t_train) / (xs_train.shape[0] - 1)
    model = DaePcaModel(
        config=cfg,
        variant=variant,
        enc_hidden=[(state[f"enc{i}_w"], state[f"enc{i}_b"])
                    for i in range(len(cfg.hidden))],
        enc_out_w=state["enc_out_w"],
        m0=state["m0"],
        inv_scale=state["inv_scale"],
        inv_shift=state["inv_shift"],
        dec_hidden=[(state[f"dec{i}_w"], state[f"dec{i}_b"])
                    for i in range(len(cfg.hidden))],
        dec_out_w=state["dec_out_w"],
        dec_out_b=state["dec_out_b"],
        frozen_bn=bn,
        p=p,
        feature_cov=cov,
        input_stats=input_stats,
    )
    t2, spe = statistics(model, linalg.undo_stats(xs_train, input_stats))
    model.thresholds = monitor.calibrate_thresholds(t2, spe, alpha, kde)
    return model


def score_batch(model: DaePcaModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Frozen-model scores and residuals for raw-unit rows.

    Runs through fixed-order kernels: scoring a batch and scoring its
    rows one at a time produce bitwise-identical results, and the cost
    per sample is independent of the training-set size.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    xs = linalg.apply_stats(x, model.input_stats)
    cfg = model.config
    h = np.ascontiguousarray(xs)
    for w, b in model.enc_hidden:
        h = _kernels.affine_relu(h, w, b.ravel())
    phi = _kernels.matmul(h, model.enc_out_w)
    phi_bar = np.ascontiguousarray((phi - model.frozen_bn.mean) / model.frozen_bn.std)
    t = _kernels.matmul(phi_bar, model.p)
    phi_bar_fs = _kernels.matmul(t, model._p_t)
    phi_fs = np.ascontiguousarray(phi_bar_fs * model.inv_scale + model.inv_shift)
    h2 = phi_fs
    for w, b in model.dec_hidden:
        h2 = _kernels.affine_relu(h2, w, b.ravel())
    x_hat = _kernels.affine(h2, model.dec_out_w, model.dec_out_b.ravel())
    return t, np.ascontiguousarray(xs - x_hat)


def score_online(model: DaePcaModel, x_new) -> tuple[np.ndarray, np.ndarray]:
    """(score vector t, residual vector) for one raw-unit sample."""
    x = np.asarray(x_new, dtype=np.float64).ravel()
    if x.shape[0] != model.config.m:
        raise InvalidShape(f"sample length {x.shape[0]} != m={model.config.m}")
    t, resid = score_batch(model, x.reshape(1, -1))
    return t[0], resid[0]


def statistics(model: DaePcaModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (T2, SPE) for raw-unit rows through the frozen model."""
    t, resid = score_batch(model, x)
    t2 = _kernels.row_dot(_kernels.matmul(t, model._cov_inv), t)
    return t2, _kernels.row_dot(resid, resid)


def _taped_dae(tape: Tape, leaves, x_node, cfg: NetworkConfig, lam1: float):
    h = x_node
    for i in range(len(cfg.hidden)):
        h = tape.relu(tape.add(tape.matmul(h, leaves[f"enc{i}_w"]), leaves[f"enc{i}_b"]))
    f = tape.add(tape.matmul(h, leaves["enc_out_w"]), leaves["enc_out_b"])
    h2 = f
    for i in range(len(cfg.hidden)):
        h2 = tape.relu(tape.add(tape.matmul(h2, leaves[f"dec{i}_w"]), leaves[f"dec{i}_b"]))
    x_hat = tape.add(tape.matmul(h2, leaves["dec_out_w"]), leaves["dec_out_b"])
    loss_x = tape.frobenius_sq(tape.subtract(x_node, x_hat))
    return tape.scalar_mul(lam1, loss_x), loss_x


def _dae_init(cfg: NetworkConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    def glorot(fan_in, fan_out):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    params: dict[str, np.ndarray] = {}
    widths = (cfg.m, *cfg.hidden)
    for i in range(len(cfg.hidden)):
        params[f"enc{i}_w"] = glorot(widths[i], widths[i + 1])
        params[f"enc{i}_b"] = np.zeros((1, widths[i + 1]))
    params["enc_out_w"] = glorot(widths[-1], cfg.d)
    params["enc_out_b"] = np.zeros((1, cfg.d))
    dec_widths = (cfg.d, *reversed(cfg.hidden))
    for i in range(len(cfg.hidden)):
        params[f"dec{i}_w"] = glorot(dec_widths[i], dec_widths[i + 1])
        params[f"dec{i}_b"] = np.zeros((1, dec_widths[i + 1]))
    params["dec_out_w"] = glorot(dec_widths[-1], cfg.m)
    params["dec_out_b"] = np.zeros((1, cfg.m))
    return params


def _dae_forward_np(params, cfg, xs):
    h = xs
    for i in range(len(cfg.hidden)):
        h = np.maximum(h @ params[f"enc{i}_w"] + params[f"enc{i}_b"], 0.0)
    f = h @ params["enc_out_w"] + params["enc_out_b"]
    h2 = f
    for i in range(len(cfg.hidden)):
        h2 = np.maximum(h2 @ params[f"dec{i}_w"] + params[f"dec{i}_b"], 0.0)
    return f, h2 @ params["dec_out_w"] + params["dec_out_b"]


def train_dae(x_train, x_val, cfg: NetworkConfig, alpha: float = 0.99,
              kde: monitor.KdeConfig | None = None) -> tuple[DaeModel, TrainReport]:
    """Train the plain autoencoder baseline (same widths, no BN/PCA).

    The loss is the per-element input reconstruction error; checkpoint
    selection and Adam settings mirror `train`. Features for T2 are the
    encoder outputs centered at their training mean.
    """
    xs_train, input_stats = linalg.standardize(x_train)
    if xs_train.shape[1] != cfg.m:
        raise InvalidShape(f"config m={cfg.m} but data has {xs_train.shape[1]} columns")
    xs_val = linalg.apply_stats(x_val, input_stats)
    n = xs_train.shape[0]
    rng = np.random.default_rng(cfg.seed)
    params = _dae_init(cfg, rng)
    names = list(params.keys())
    values = [params[k] for k in names]
    adam = AdamState.init(values, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    lam1 = cfg.lambda1 if cfg.lambda1 is not None else 1.0 / (n * cfg.m)

    loss_hist = np.empty(cfg.iter_max)
    checkpoint_iters: list[int] = []
    val_errors: list[float] = []
    best_err = np.inf
    best_state = None
    best_iter = 0
    for it in range(cfg.iter_max):
        lr = lr_schedule(it, cfg.lr_base, cfg.lr_decay, cfg.lr_period)
        tape = Tape()
        leaves = {k: tape.leaf(v) for k, v in zip(names, values)}
        x_node = tape.leaf(xs_train)
        total, loss_x = _taped_dae(tape, leaves, x_node, cfg, lam1)
        total_value = float(total.value[0, 0])
        if not np.isfinite(total_value):
            raise NumericalFailure(f"non-finite loss at iteration {it}")
        loss_hist[it] = float(loss_x.value[0, 0])
        tape.backward(total)
        grads = [leaves[k].grad for k in names]
        try:
            adam_step(values, grads, adam, lr)
        except NumericalFailure as exc:
            raise NumericalFailure(f"at iteration {it}: {exc}") from exc
        if (it + 1) % cfg.checkpoint_interval == 0 or it == cfg.iter_max - 1:
            state = {k: v.copy() for k, v in zip(names, values)}
            _, x_hat = _dae_forward_np(state, cfg, xs_val)
            err = float(np.sum((xs_val - x_hat) ** 2)) / (xs_val.shape[0] * cfg.m)
            checkpoint_iters.append(it + 1)
            val_errors.append(err)
            if err < best_err:
                best_err = err
                best_state = state
                best_iter = it + 1

    assert best_state is not None
    f_train, _ = _dae_forward_np(best_state, cfg, xs_train)
    f_mean = f_train.mean(axis=0)
    centered = f_train - f_mean
    cov = (centered.T @ centered) / (n - 1)
    model = DaeModel(
        config=cfg,
        enc_hidden=[(best_state[f"enc{i}_w"], best_state[f"enc{i}_b"])
                    for i in range(len(cfg.hidden))],
        enc_out_w=best_state["enc_out_w"],
        enc_out_b=best_state["enc_out_b"],
        dec_hidden=[(best_state[f"dec{i}_w"], best_state[f"dec{i}_b"])
                    for i in range(len(cfg.hidden))],
        dec_out_w=best_state["dec_out_w"],
        dec_out_b=best_state["dec_out_b"],
        feature_mean=f_mean,
        feature_cov=cov,
        input_stats=input_stats,
    )
    t2, spe = model.statistics(x_train)
    model.thresholds = monitor.calibrate_thresholds(t2, spe, alpha, kde)
    report = TrainReport(
        loss_x=loss_hist,
        loss_phi=np.zeros_like(loss_hist),
        omega_t=np.zeros_like(loss_hist),
        total=lam1 * loss_hist,
        orth_sq=np.zeros_like(loss_hist),
        checkpoint_iters=checkpoint_iters,
        val_errors=val_errors,
        checkpoint_orth_sq=[0.0] * len(checkpoint_iters),
        selected_iteration=best_iter,
        variant=0,
        seed=cfg.seed,
    )
    return model, report
