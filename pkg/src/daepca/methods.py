"""Uniform fitting interface over the five monitoring methods.

Every fitted model exposes ``statistics(X) -> (t2, spe)`` and a
``thresholds`` attribute, so detection and evaluation code never
branches on the method. ``pca`` and ``kpca`` are deterministic given
the data; the network methods take a seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import monitor, network, subspace
from .errors import InvalidConfig
from .monitor import KdeConfig
from .network import NetworkConfig
from .subspace import KernelConfig

__all__ = ["METHODS", "DETERMINISTIC", "MethodSpec", "fit_method", "online_scorer"]

METHODS = ("pca", "kpca", "dae", "daepca1", "daepca2")
DETERMINISTIC = frozenset({"pca", "kpca"})


@dataclass(frozen=True)
class MethodSpec:
    """What to fit: method name, subspace size, and method settings.

    ``network`` supplies architecture and optimizer settings for the
    neural methods (its ``a`` and ``seed`` are overridden by
    ``components`` and the fitting seed); ``kernel`` applies to kpca.
    """

    name: str
    components: int
    alpha: float = 0.99
    kernel: KernelConfig | None = None
    network: NetworkConfig | None = None
    kde: KdeConfig | None = None

    def __post_init__(self):
        if self.name not in METHODS:
            raise InvalidConfig(f"unknown method {self.name!r}, expected one of {METHODS}")
        if self.components < 1:
            raise InvalidConfig(f"components must be >= 1, got {self.components}")
        if not (0.0 < self.alpha < 1.0):
            raise InvalidConfig(f"alpha must be in (0, 1), got {self.alpha}")


def _network_config(spec: MethodSpec, m: int, seed: int) -> NetworkConfig:
    base = spec.network
    if base is None:
        base = NetworkConfig(m=m, d=max(spec.components, m // 2 + 1), a=spec.components)
    if base.m != m:
        raise InvalidConfig(f"network config m={base.m} but data has {m} columns")
    return replace(base, a=spec.components, seed=seed)


def fit_method(spec: MethodSpec, train: np.ndarray, val: np.ndarray, seed: int = 0):
    """Fit ``spec`` on fault-free data; returns a model with thresholds.

    The linear and kernel methods calibrate their thresholds here from
    their training statistics; the network trainers already do so
    internally. ``val`` drives checkpoint selection for the network
    methods and is unused by pca/kpca.
    """
    if spec.name == "pca":
        model = subspace.fit_pca(train, spec.components)
        t2, spe = model.statistics(train)
        model.thresholds = monitor.calibrate_thresholds(t2, spe, spec.alpha, spec.kde)
        return model
    if spec.name == "kpca":
        kernel = spec.kernel if spec.kernel is not None else KernelConfig()
        model = subspace.fit_kpca(train, spec.components, kernel)
        t2, spe = model.statistics(train)
        model.thresholds = monitor.calibrate_thresholds(t2, spe, spec.alpha, spec.kde)
        return model
    cfg = _network_config(spec, train.shape[1], seed)
    if spec.name == "dae":
        model, _ = network.train_dae(train, val, cfg, alpha=spec.alpha, kde=spec.kde)
        return model
    variant = 1 if spec.name == "daepca1" else 2
    model, _ = network.train(train, val, cfg, variant=variant, alpha=spec.alpha,
                             kde=spec.kde)
    return model


def online_scorer(model):
    """The per-sample feature-extraction callable the timing runs measure.

    For kernel PCA this is the retained projection, whose cost per
    sample grows with the stored training size; for the network models
    it is the frozen forward pass (scores plus residual), independent
    of the training size; for linear PCA the projection and residual.
    """
    if isinstance(model, subspace.KpcaModel):
        return lambda x: subspace.kpca_scores(model, x)
    if isinstance(model, subspace.PcaModel):
        return lambda x: model.statistics(x)
    if isinstance(model, network.DaePcaModel):
        return lambda x: network.score_batch(model, x)
    if isinstance(model, network.DaeModel):
        return lambda x: model.score_batch(x)
    raise InvalidConfig(f"no online scorer for {type(model).__name__}")
