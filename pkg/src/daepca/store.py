"""Binary model files with a JSON sidecar.

Layout (all little-endian):

    magic      5 bytes, identifies the model kind
    count      u32, number of named arrays
    entries    u16 name length, UTF-8 name, u32 ndim,
               u64 per dimension, float64 data in row-major order

Float64 bytes round-trip exactly, so save followed by load reproduces
every array bit for bit. The sidecar at ``<path>.json`` carries the
configuration and kind; both files are needed to load.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .linalg import ColumnStats
from .monitor import Thresholds
from .network import DaeModel, DaePcaModel, NetworkConfig
from .subspace import KernelConfig, KpcaModel, PcaModel

__all__ = ["save_model", "load_model"]

_MAGICS = {
    "daepca": b"DPCA1",
    "dae": b"DAEF1",
    "pca": b"LPCA1",
    "kpca": b"KPCA1",
}
_KINDS = {v: k for k, v in _MAGICS.items()}


def _write_container(path: Path, magic: bytes, entries: list[tuple[str, np.ndarray]]) -> None:
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(entries)))
        for name, arr in entries:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(arr.tobytes(order="C"))


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated model file while reading {what}")
    return data


def _read_container(path: Path) -> tuple[str, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 5, "magic")
        kind = _KINDS.get(magic)
        if kind is None:
            raise FormatError(f"unrecognized model magic {magic!r}")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "entry count"))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, name_len, "name").decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4, "ndim"))
            shape = tuple(
                struct.unpack("<Q", _read_exact(fh, 8, "dimension"))[0]
                for _ in range(ndim)
            )
            n_items = 1
            for dim in shape:
                n_items *= dim
            raw = _read_exact(fh, 8 * n_items, f"data of {name}")
            arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise FormatError("trailing bytes after last entry")
    return kind, arrays


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _write_sidecar(path: Path, meta: dict) -> None:
    _sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def _read_sidecar(path: Path) -> dict:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise FormatError(f"missing sidecar {sidecar}")
    try:
        return json.loads(sidecar.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid sidecar JSON: {exc}") from exc


def _thresholds_entry(th: Thresholds | None) -> list[tuple[str, np.ndarray]]:
    if th is None:
        return []
    return [("thresholds", np.array([th.j_t2, th.j_spe, th.alpha]))]


def _thresholds_from(arrays: dict[str, np.ndarray]) -> Thresholds | None:
    if "thresholds" not in arrays:
        return None
    j_t2, j_spe, alpha = arrays["thresholds"]
    return Thresholds(j_t2=float(j_t2), j_spe=float(j_spe), alpha=float(alpha))


def _network_config_meta(cfg: NetworkConfig) -> dict:
    return {
        "m": cfg.m,
        "d": cfg.d,
        "a": cfg.a,
        "encoder_hidden": list(cfg.encoder_hidden) if cfg.encoder_hidden else None,
        "iter_max": cfg.iter_max,
        "seed": cfg.seed,
        "lambda1": cfg.lambda1,
        "lambda2": cfg.lambda2,
        "lambda3": cfg.lambda3,
        "lr_base": cfg.lr_base,
        "lr_decay": cfg.lr_decay,
        "lr_period": cfg.lr_period,
        "checkpoint_interval": cfg.checkpoint_interval,
        "bn_epsilon": cfg.bn_epsilon,
        "adam_beta1": cfg.adam_beta1,
        "adam_beta2": cfg.adam_beta2,
        "adam_eps": cfg.adam_eps,
    }


def _network_config_from(meta: dict) -> NetworkConfig:
    hidden = meta.get("encoder_hidden")
    return NetworkConfig(
        m=meta["m"],
        d=meta["d"],
        a=meta["a"],
        encoder_hidden=tuple(hidden) if hidden else None,
        iter_max=meta["iter_max"],
        seed=meta["seed"],
        lambda1=meta["lambda1"],
        lambda2=meta["lambda2"],
        lambda3=meta["lambda3"],
        lr_base=meta["lr_base"],
        lr_decay=meta["lr_decay"],
        lr_period=meta["lr_period"],
        checkpoint_interval=meta["checkpoint_interval"],
        bn_epsilon=meta["bn_epsilon"],
        adam_beta1=meta["adam_beta1"],
        adam_beta2=meta["adam_beta2"],
        adam_eps=meta["adam_eps"],
    )


def _layer_entries(prefix: str, layers: list[tuple[np.ndarray, np.ndarray]]):
    out = []
    for i, (w, b) in enumerate(layers):
        out.append((f"{prefix}{i}_w", w))
        out.append((f"{prefix}{i}_b", b))
    return out


def _layers_from(prefix: str, n: int, arrays: dict[str, np.ndarray]):
    return [(arrays[f"{prefix}{i}_w"], arrays[f"{prefix}{i}_b"]) for i in range(n)]


def save_model(model, path) -> None:
    """Write a fitted model to ``path`` plus ``<path>.json``.

    Supported kinds: DaePcaModel, DaeModel, PcaModel, KpcaModel. The
    arrays are written bit-exactly; loading reconstructs an equivalent
    model (derived caches are recomputed from the stored fields).
    """
    path = Path(path)
    if isinstance(model, DaePcaModel):
        entries = [
            ("input_mean", model.input_stats.mean),
            ("input_std", model.input_stats.std),
            ("bn_mean", model.frozen_bn.mean),
            ("bn_std", model.frozen_bn.std),
            ("enc_out_w", model.enc_out_w),
            ("m0", model.m0),
            ("inv_scale", model.inv_scale),
            ("inv_shift", model.inv_shift),
            ("dec_out_w", model.dec_out_w),
            ("dec_out_b", model.dec_out_b),
            ("p", model.p),
            ("feature_cov", model.feature_cov),
        ]
        entries += _layer_entries("enc", model.enc_hidden)
        entries += _layer_entries("dec", model.dec_hidden)
        entries += _thresholds_entry(model.thresholds)
        meta = {
            "kind": "daepca",
            "variant": model.variant,
            "n_hidden": len(model.enc_hidden),
            "config": _network_config_meta(model.config),
        }
        _write_container(path, _MAGICS["daepca"], entries)
    elif isinstance(model, DaeModel):
        entries = [
            ("input_mean", model.input_stats.mean),
            ("input_std", model.input_stats.std),
            ("enc_out_w", model.enc_out_w),
            ("enc_out_b", model.enc_out_b),
            ("dec_out_w", model.dec_out_w),
            ("dec_out_b", model.dec_out_b),
            ("feature_mean", model.feature_mean),
            ("feature_cov", model.feature_cov),
        ]
        entries += _layer_entries("enc", model.enc_hidden)
        entries += _layer_entries("dec", model.dec_hidden)
        entries += _thresholds_entry(model.thresholds)
        meta = {
            "kind": "dae",
            "n_hidden": len(model.enc_hidden),
            "config": _network_config_meta(model.config),
        }
        _write_container(path, _MAGICS["dae"], entries)
    elif isinstance(model, PcaModel):
        entries = [
            ("loadings", model.loadings),
            ("eigenvalues", model.eigenvalues),
            ("input_mean", model.input_stats.mean),
            ("input_std", model.input_stats.std),
        ]
        entries += _thresholds_entry(model.thresholds)
        meta = {"kind": "pca", "n_components": model.n_components}
        _write_container(path, _MAGICS["pca"], entries)
    elif isinstance(model, KpcaModel):
        entries = [
            ("training_data", model.training_data),
            ("input_mean", model.input_stats.mean),
            ("input_std", model.input_stats.std),
            ("alphas_full", model.alphas_full),
            ("eigenvalues_full", model.eigenvalues_full),
            ("gram_row_means", model.gram_row_means),
            ("gram_grand_mean", np.array(model.gram_grand_mean)),
            ("train_scores", model.train_scores),
        ]
        entries += _thresholds_entry(model.thresholds)
        meta = {
            "kind": "kpca",
            "n_components": model.n_components,
            "kernel": {"kind": model.config.kind, "width": model.config.width},
        }
        _write_container(path, _MAGICS["kpca"], entries)
    else:
        raise TypeError(f"cannot save model of type {type(model).__name__}")
    _write_sidecar(path, meta)


def load_model(path):
    """Load a model written by `save_model`.

    Raises:
        FormatError: Unknown magic, truncated data, or sidecar trouble.
        FileNotFoundError: Missing model file.
    """
    path = Path(path)
    kind, arrays = _read_container(path)
    meta = _read_sidecar(path)
    if meta.get("kind") != kind:
        raise FormatError(
            f"sidecar kind {meta.get('kind')!r} does not match file kind {kind!r}")
    thresholds = _thresholds_from(arrays)
    if kind == "daepca":
        cfg = _network_config_from(meta["config"])
        n_hidden = int(meta["n_hidden"])
        return DaePcaModel(
            config=cfg,
            variant=int(meta["variant"]),
            enc_hidden=_layers_from("enc", n_hidden, arrays),
            enc_out_w=arrays["enc_out_w"],
            m0=arrays["m0"],
            inv_scale=arrays["inv_scale"],
            inv_shift=arrays["inv_shift"],
            dec_hidden=_layers_from("dec", n_hidden, arrays),
            dec_out_w=arrays["dec_out_w"],
            dec_out_b=arrays["dec_out_b"],
            frozen_bn=ColumnStats(mean=arrays["bn_mean"], std=arrays["bn_std"]),
            p=arrays["p"],
            feature_cov=arrays["feature_cov"],
            input_stats=ColumnStats(mean=arrays["input_mean"], std=arrays["input_std"]),
            thresholds=thresholds,
        )
    if kind == "dae":
        cfg = _network_config_from(meta["config"])
        n_hidden = int(meta["n_hidden"])
        return DaeModel(
            config=cfg,
            enc_hidden=_layers_from("enc", n_hidden, arrays),
            enc_out_w=arrays["enc_out_w"],
            enc_out_b=arrays["enc_out_b"],
            dec_hidden=_layers_from("dec", n_hidden, arrays),
            dec_out_w=arrays["dec_out_w"],
            dec_out_b=arrays["dec_out_b"],
            feature_mean=arrays["feature_mean"],
            feature_cov=arrays["feature_cov"],
            input_stats=ColumnStats(mean=arrays["input_mean"], std=arrays["input_std"]),
            thresholds=thresholds,
        )
    if kind == "pca":
        return PcaModel(
            loadings=arrays["loadings"],
            eigenvalues=arrays["eigenvalues"],
            input_stats=ColumnStats(mean=arrays["input_mean"], std=arrays["input_std"]),
            n_components=int(meta["n_components"]),
            thresholds=thresholds,
        )
    if kind == "kpca":
        a = int(meta["n_components"])
        kernel = KernelConfig(kind=meta["kernel"]["kind"],
                              width=float(meta["kernel"]["width"]))
        alphas_full = arrays["alphas_full"]
        eigenvalues_full = arrays["eigenvalues_full"]
        return KpcaModel(
            config=kernel,
            n_components=a,
            training_data=arrays["training_data"],
            input_stats=ColumnStats(mean=arrays["input_mean"], std=arrays["input_std"]),
            alphas=np.ascontiguousarray(alphas_full[:, :a]),
            eigenvalues=eigenvalues_full[:a].copy(),
            alphas_full=alphas_full,
            eigenvalues_full=eigenvalues_full,
            gram_row_means=arrays["gram_row_means"],
            gram_grand_mean=float(arrays["gram_grand_mean"]),
            train_scores=arrays["train_scores"],
            thresholds=thresholds,
        )
    raise FormatError(f"unhandled model kind {kind!r}")
