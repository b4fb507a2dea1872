"""Command-line front end: synth, train, detect, eval, bench.

Settings come from an INI file checked strictly: unknown sections or
keys are refused so typos cannot silently fall back to defaults.
Configuration problems exit with status 2, runtime failures with 1.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import evaluation, monitor, store
from .dataio import (Dataset, FaultSpec, SynthConfig, load_csv, load_dataset_dir,
                     save_dataset, synthesize)
from .errors import InvalidConfig, ToolkitError
from .methods import METHODS, MethodSpec, fit_method
from .monitor import KdeConfig
from .network import NetworkConfig
from .subspace import KernelConfig

__all__ = ["main"]


class _ConfigError(Exception):
    """Configuration file problem; maps to exit status 2."""


_SCHEMA = {
    "run": {"method", "components", "alpha", "trials", "seed", "run_length", "workers"},
    "network": {"d", "hidden", "iter_max", "lambda1", "lambda2", "lambda3",
                "lr_base", "lr_decay", "lr_period", "checkpoint_interval",
                "bn_epsilon", "adam_beta1", "adam_beta2", "adam_eps"},
    "kernel": {"kind", "width"},
    "kde": {"bandwidth_rule", "fixed_bandwidth", "grid_points", "search_tolerance"},
    "synth": {"latent_dim", "observed_dim", "n_train", "n_val", "n_test",
              "noise_std", "ar_coeff", "seed"},
    "bench": {"methods", "repeats"},
}
_FAULT_KEYS = {"kind", "magnitude", "onset", "sensors"}


def _load_config(path) -> configparser.ConfigParser:
    p = Path(path)
    if not p.is_file():
        raise _ConfigError(f"config file not found: {p}")
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(p.read_text(), source=str(p))
    except configparser.Error as exc:
        raise _ConfigError(f"cannot parse {p}: {exc}") from exc
    for section in parser.sections():
        if section.startswith("fault."):
            allowed = _FAULT_KEYS
        elif section in _SCHEMA:
            allowed = _SCHEMA[section]
        else:
            raise _ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in allowed:
                raise _ConfigError(f"unknown key {key!r} in section [{section}]")
    return parser


def _convert(cfg, section: str, key: str, conv, default):
    if not cfg.has_option(section, key):
        return default
    raw = cfg.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise _ConfigError(f"bad value for {section}.{key}: {raw!r} ({exc})") from exc


def _int_tuple(raw: str) -> tuple[int, ...]:
    parts = [p for p in raw.replace(",", " ").split() if p]
    return tuple(int(p) for p in parts)


def _synth_config(cfg, seed_override: int | None) -> SynthConfig:
    seed = _convert(cfg, "synth", "seed", int, 0)
    if seed_override is not None:
        seed = seed_override
    try:
        return SynthConfig(
            latent_dim=_convert(cfg, "synth", "latent_dim", int, 4),
            observed_dim=_convert(cfg, "synth", "observed_dim", int, 20),
            n_train=_convert(cfg, "synth", "n_train", int, 1168),
            n_val=_convert(cfg, "synth", "n_val", int, 292),
            n_test=_convert(cfg, "synth", "n_test", int, 960),
            noise_std=_convert(cfg, "synth", "noise_std", float, 0.05),
            ar_coeff=_convert(cfg, "synth", "ar_coeff", float, 0.95),
            seed=seed,
        )
    except InvalidConfig as exc:
        raise _ConfigError(str(exc)) from exc


def _faults(cfg) -> list[FaultSpec]:
    specs = []
    for section in cfg.sections():
        if not section.startswith("fault."):
            continue
        try:
            specs.append(FaultSpec(
                kind=cfg.get(section, "kind", fallback="step"),
                magnitude=_convert(cfg, section, "magnitude", float, 1.0),
                onset=_convert(cfg, section, "onset", int, 160),
                sensors=_convert(cfg, section, "sensors", _int_tuple, (0,)),
            ))
        except InvalidConfig as exc:
            raise _ConfigError(f"[{section}]: {exc}") from exc
    return specs


def _kde_config(cfg) -> KdeConfig | None:
    if not cfg.has_section("kde"):
        return None
    try:
        return KdeConfig(
            bandwidth_rule=cfg.get("kde", "bandwidth_rule", fallback="silverman"),
            fixed_bandwidth=_convert(cfg, "kde", "fixed_bandwidth", float, None),
            grid_points=_convert(cfg, "kde", "grid_points", int, 256),
            search_tolerance=_convert(cfg, "kde", "search_tolerance", float, 1e-8),
        )
    except InvalidConfig as exc:
        raise _ConfigError(str(exc)) from exc


def _network_config(cfg, m: int, components: int, seed: int) -> NetworkConfig:
    try:
        d = _convert(cfg, "network", "d", int, max(components, m // 2 + 1))
        return NetworkConfig(
            m=m,
            d=d,
            a=components,
            encoder_hidden=_convert(cfg, "network", "hidden", _int_tuple, None),
            iter_max=_convert(cfg, "network", "iter_max", int, 20000),
            seed=seed,
            lambda1=_convert(cfg, "network", "lambda1", float, None),
            lambda2=_convert(cfg, "network", "lambda2", float, None),
            lambda3=_convert(cfg, "network", "lambda3", float, None),
            lr_base=_convert(cfg, "network", "lr_base", float, 0.01),
            lr_decay=_convert(cfg, "network", "lr_decay", float, 0.7),
            lr_period=_convert(cfg, "network", "lr_period", int, 350),
            checkpoint_interval=_convert(cfg, "network", "checkpoint_interval", int, 100),
            bn_epsilon=_convert(cfg, "network", "bn_epsilon", float, 1e-8),
            adam_beta1=_convert(cfg, "network", "adam_beta1", float, 0.9),
            adam_beta2=_convert(cfg, "network", "adam_beta2", float, 0.999),
            adam_eps=_convert(cfg, "network", "adam_eps", float, 1e-8),
        )
    except InvalidConfig as exc:
        raise _ConfigError(str(exc)) from exc


def _method_spec(cfg, dataset: Dataset, seed: int, name: str | None = None) -> MethodSpec:
    method = name or cfg.get("run", "method", fallback="daepca2")
    if method not in METHODS:
        raise _ConfigError(f"run.method must be one of {METHODS}, got {method!r}")
    components = _convert(cfg, "run", "components", int, 2)
    alpha = _convert(cfg, "run", "alpha", float, 0.99)
    kernel = None
    if cfg.has_section("kernel"):
        try:
            kernel = KernelConfig(
                kind=cfg.get("kernel", "kind", fallback="rbf"),
                width=_convert(cfg, "kernel", "width", float, 1.0),
            )
        except InvalidConfig as exc:
            raise _ConfigError(str(exc)) from exc
    network_cfg = None
    if method in ("dae", "daepca1", "daepca2"):
        network_cfg = _network_config(cfg, dataset.n_vars, components, seed)
    try:
        return MethodSpec(name=method, components=components, alpha=alpha,
                          kernel=kernel, network=network_cfg, kde=_kde_config(cfg))
    except InvalidConfig as exc:
        raise _ConfigError(str(exc)) from exc


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    synth_cfg = _synth_config(cfg, args.seed)
    faults = _faults(cfg)
    dataset = synthesize(synth_cfg, faults)
    out = _out_dir(args)
    save_dataset(dataset, out)
    print(f"wrote dataset: {dataset.train.shape[0]} train, {dataset.val.shape[0]} val, "
          f"{len(dataset.tests)} test sets, {dataset.n_vars} variables -> {out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _load_config(args.config)
    dataset = load_dataset_dir(args.data)
    seed = args.seed if args.seed is not None else _convert(cfg, "run", "seed", int, 0)
    spec = _method_spec(cfg, dataset, seed)
    model = fit_method(spec, dataset.train, dataset.val, seed)
    out = _out_dir(args)
    model_path = out / "model.bin"
    store.save_model(model, model_path)
    meta = {"method": spec.name, "components": spec.components,
            "alpha": spec.alpha, "seed": seed}
    (out / "train_meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    th = model.thresholds
    print(f"trained {spec.name} (a={spec.components}) -> {model_path}")
    print(f"thresholds: T2={th.j_t2:.6g} SPE={th.j_spe:.6g} alpha={th.alpha}")
    return 0


def _plot_series(series, thresholds, onset, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    idx = np.arange(series.t2.shape[0])
    fig, axes = plt.subplots(3, 1, figsize=(9.0, 7.5), sharex=True)
    floor = 1e-12
    axes[0].semilogy(idx, np.maximum(series.t2, floor), lw=0.8, color="tab:blue")
    axes[0].axhline(thresholds.j_t2, ls="--", color="tab:red", lw=1.0)
    axes[0].set_ylabel("T2")
    axes[1].semilogy(idx, np.maximum(series.spe, floor), lw=0.8, color="tab:blue")
    axes[1].axhline(thresholds.j_spe, ls="--", color="tab:red", lw=1.0)
    axes[1].set_ylabel("SPE")
    axes[2].plot(idx, series.bic, lw=0.8, color="tab:blue")
    axes[2].axhline(1.0 - thresholds.alpha, ls="--", color="tab:red", lw=1.0)
    axes[2].set_ylim(-0.05, 1.05)
    axes[2].set_ylabel("combined index")
    axes[2].set_xlabel("sample")
    if onset is not None:
        for ax in axes:
            ax.axvline(onset, ls=":", color="black", lw=1.0)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _cmd_detect(args) -> int:
    model = store.load_model(args.model)
    data, _ = load_csv(args.input)
    if data.shape[0] == 0:
        raise InvalidConfig(f"{args.input} has no data rows")
    if model.thresholds is None:
        raise InvalidConfig("model has no calibrated thresholds")
    t2, spe = model.statistics(data)
    series = monitor.detect(t2, spe, model.thresholds)
    out = _out_dir(args)
    series.to_csv(out / "series.csv")
    _plot_series(series, model.thresholds, args.onset, out / "trace.svg")
    frac = float(np.count_nonzero(series.alarm)) / series.alarm.shape[0]
    print(f"scored {series.alarm.shape[0]} samples, alarm fraction {frac:.4f} "
          f"-> {out / 'series.csv'}, {out / 'trace.svg'}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    dataset = load_dataset_dir(args.data)
    seed = args.seed if args.seed is not None else _convert(cfg, "run", "seed", int, 0)
    spec = _method_spec(cfg, dataset, seed)
    trials = _convert(cfg, "run", "trials", int, 1)
    run_length = _convert(cfg, "run", "run_length", int, 3)
    workers = args.workers or _convert(cfg, "run", "workers", int, 1)
    summary = evaluation.run_trials(dataset, spec, trials, base_seed=seed,
                                    run_length=run_length, workers=workers)
    out = _out_dir(args)
    summary.fdr_csv(out / "fdr.csv")
    summary.far_csv(out / "far.csv")
    summary.delay_csv(out / "delay.csv")
    meta = {"method": summary.method, "n_trials": summary.n_trials,
            "seeds": list(summary.seeds), "exclusions": list(summary.exclusions)}
    (out / "eval_meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    for fault_id in sorted(summary.trials):
        mean_fs, _ = summary.aggregate(fault_id, "fdr_fs")
        far_fs, _ = summary.aggregate(fault_id, "far_fs")
        print(f"fault {fault_id} ({summary.labels[fault_id]}): "
              f"FS detection {mean_fs:.2f}% / false alarms {far_fs:.2f}%")
    if summary.exclusions:
        print(f"excluded trials: {len(summary.exclusions)}", file=sys.stderr)
    print(f"wrote {out / 'fdr.csv'}, {out / 'far.csv'}, {out / 'delay.csv'}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _load_config(args.config)
    dataset = load_dataset_dir(args.data)
    seed = args.seed if args.seed is not None else _convert(cfg, "run", "seed", int, 0)
    raw = cfg.get("bench", "methods", fallback="kpca daepca2")
    names = [p for p in raw.replace(",", " ").split() if p]
    repeats = _convert(cfg, "bench", "repeats", int, 5)
    if not dataset.tests:
        raise InvalidConfig("bench needs a dataset with at least one test set")
    entries = []
    for name in names:
        spec = _method_spec(cfg, dataset, seed, name=name)
        entries.append((name, fit_method(spec, dataset.train, dataset.val, seed)))
    reports = evaluation.benchmark_online(entries, dataset.tests[0].data,
                                          repeats=repeats)
    out = _out_dir(args)
    evaluation.timing_csv(reports, out / "timing.csv")
    for r in reports:
        extra = f" (N={r.n_train})" if r.n_train is not None else ""
        print(f"{r.method}: {r.seconds * 1e3:.2f} ms for {r.n_samples} samples{extra}")
    print(f"wrote {out / 'timing.csv'}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daepca",
        description="Process monitoring with autoencoder-PCA and kernel baselines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="fit a monitoring model")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("detect", help="score a series with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="CSV of raw samples")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--onset", type=int, default=None)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="run detection trials and report rates")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="time online scoring per method")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ToolkitError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
