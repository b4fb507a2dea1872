"""Datasets: plant-record loading, synthetic generation, CSV exchange.

A Dataset bundles fault-free training and validation matrices with a
tuple of labeled fault test sets, each carrying the sample index where
its fault begins. Loaders here are strict: malformed numbers report
their line, and shape mismatches fail instead of guessing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidConfig, ParseError

__all__ = [
    "TestSet",
    "Dataset",
    "FaultSpec",
    "SynthConfig",
    "TeLayout",
    "synthesize",
    "load_te",
    "save_csv",
    "load_csv",
    "save_dataset",
    "load_dataset_dir",
]

FAULT_KINDS = ("step", "random_variation", "slow_drift", "sticking")


@dataclass(frozen=True)
class TestSet:
    """One labeled test series; rows from ``onset`` onward are faulty."""

    fault_id: int
    label: str
    data: np.ndarray
    onset: int

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2 or data.shape[0] < 2:
            raise InvalidConfig(f"test set needs a 2-D matrix with >= 2 rows, got {data.shape}")
        if not (0 < self.onset < data.shape[0]):
            raise InvalidConfig(
                f"onset must lie inside the series, got {self.onset} of {data.shape[0]}")


@dataclass(frozen=True)
class Dataset:
    """Fault-free train/val matrices plus fault test sets, shared width."""

    train: np.ndarray
    val: np.ndarray
    tests: tuple[TestSet, ...]
    variable_names: tuple[str, ...]

    def __post_init__(self):
        train = np.ascontiguousarray(self.train, dtype=np.float64)
        val = np.ascontiguousarray(self.val, dtype=np.float64)
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "val", val)
        object.__setattr__(self, "tests", tuple(self.tests))
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        if train.ndim != 2 or train.shape[0] < 2:
            raise InvalidConfig("training matrix must be 2-D with >= 2 rows")
        if val.ndim != 2 or val.shape[0] < 1:
            raise InvalidConfig("validation matrix must be 2-D and nonempty")
        m = train.shape[1]
        if val.shape[1] != m:
            raise InvalidConfig(f"validation width {val.shape[1]} != training width {m}")
        if len(self.variable_names) != m:
            raise InvalidConfig(
                f"{len(self.variable_names)} variable names for {m} columns")
        for ts in self.tests:
            if ts.data.shape[1] != m:
                raise InvalidConfig(
                    f"test set {ts.fault_id} width {ts.data.shape[1]} != {m}")

    @property
    def n_vars(self) -> int:
        return self.train.shape[1]


@dataclass(frozen=True)
class FaultSpec:
    """A fault to inject into one synthetic test series.

    Kinds: ``step`` adds ``magnitude`` to the chosen sensors from the
    onset on; ``random_variation`` adds zero-mean noise with standard
    deviation ``magnitude``; ``slow_drift`` adds a linear ramp that
    reaches ``magnitude`` at the last sample; ``sticking`` freezes the
    sensors at their onset values (magnitude unused).
    """

    kind: str
    magnitude: float
    onset: int
    sensors: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise InvalidConfig(f"unknown fault kind {self.kind!r}, expected {FAULT_KINDS}")
        if not (self.magnitude >= 0.0 and np.isfinite(self.magnitude)):
            raise InvalidConfig(f"magnitude must be finite and >= 0, got {self.magnitude}")
        if self.onset < 1:
            raise InvalidConfig(f"onset must be >= 1, got {self.onset}")
        sensors = tuple(int(s) for s in self.sensors)
        if not sensors or any(s < 0 for s in sensors):
            raise InvalidConfig("sensors must be a nonempty tuple of nonnegative indices")
        object.__setattr__(self, "sensors", sensors)


@dataclass(frozen=True)
class SynthConfig:
    """Settings for the synthetic plant generator.

    Observations follow x = tanh(z W1) W2 + offset + noise where z is a
    stationary AR(1) latent chain; every draw comes from one seeded
    stream, so equal configs generate bit-identical datasets.
    """

    latent_dim: int = 4
    observed_dim: int = 20
    n_train: int = 1168
    n_val: int = 292
    n_test: int = 960
    noise_std: float = 0.05
    ar_coeff: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim < 1 or self.observed_dim < 1:
            raise InvalidConfig("dimensions must be positive")
        if self.n_train < 2 or self.n_val < 1 or self.n_test < 2:
            raise InvalidConfig("need n_train >= 2, n_val >= 1, n_test >= 2")
        if not (0.0 < self.noise_std and np.isfinite(self.noise_std)):
            raise InvalidConfig(f"noise_std must be positive, got {self.noise_std}")
        if not (0.0 <= self.ar_coeff < 1.0):
            raise InvalidConfig(f"ar_coeff must be in [0, 1), got {self.ar_coeff}")


def _latent_chain(rng: np.random.Generator, n: int, dim: int, rho: float) -> np.ndarray:
    z = np.empty((n, dim))
    z[0] = rng.standard_normal(dim)
    scale = np.sqrt(1.0 - rho * rho)
    for t in range(1, n):
        z[t] = rho * z[t - 1] + scale * rng.standard_normal(dim)
    return z


def _inject(rng: np.random.Generator, x: np.ndarray, spec: FaultSpec) -> np.ndarray:
    n = x.shape[0]
    if spec.onset >= n:
        raise InvalidConfig(f"fault onset {spec.onset} outside test length {n}")
    if max(spec.sensors) >= x.shape[1]:
        raise InvalidConfig(
            f"fault sensor {max(spec.sensors)} outside dimension {x.shape[1]}")
    out = x.copy()
    cols = list(spec.sensors)
    post = n - spec.onset
    if spec.kind == "step":
        out[spec.onset:, cols] += spec.magnitude
    elif spec.kind == "random_variation":
        out[spec.onset:, cols] += spec.magnitude * rng.standard_normal((post, len(cols)))
    elif spec.kind == "slow_drift":
        ramp = spec.magnitude * (np.arange(1, post + 1) / post)
        out[spec.onset:, cols] += ramp[:, None]
    else:  # sticking
        out[spec.onset:, cols] = out[spec.onset, cols]
    return out


def synthesize(config: SynthConfig, faults: "tuple[FaultSpec, ...] | list[FaultSpec]" = ()) -> Dataset:
    """Generate a seeded synthetic dataset with one test set per fault.

    Train and validation come from a single continuous latent chain;
    each test set runs a fresh chain before its fault is injected.
    All randomness flows through one generator seeded by the config, so
    the same inputs reproduce the same dataset exactly.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    g = 2 * cfg.latent_dim
    w1 = rng.standard_normal((cfg.latent_dim, g)) / np.sqrt(cfg.latent_dim)
    w2 = rng.standard_normal((g, cfg.observed_dim)) / np.sqrt(g)
    offset = rng.uniform(-1.0, 1.0, cfg.observed_dim)

    def observe(n: int) -> np.ndarray:
        z = _latent_chain(rng, n, cfg.latent_dim, cfg.ar_coeff)
        clean = np.tanh(z @ w1) @ w2 + offset
        return clean + cfg.noise_std * rng.standard_normal((n, cfg.observed_dim))

    normal = observe(cfg.n_train + cfg.n_val)
    train = normal[: cfg.n_train]
    val = normal[cfg.n_train:]
    tests = []
    for i, spec in enumerate(faults, start=1):
        x = observe(cfg.n_test)
        tests.append(TestSet(fault_id=i, label=spec.kind, data=_inject(rng, x, spec),
                             onset=spec.onset))
    names = tuple(f"x{i + 1}" for i in range(cfg.observed_dim))
    return Dataset(train=train, val=val, tests=tuple(tests), variable_names=names)


def _parse_numeric(text: str, path, sep: str | None) -> tuple[np.ndarray, int]:
    """Whitespace- or comma-separated float rows; (matrix, first data line)."""
    rows = []
    width = None
    first_line = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split(sep) if sep else stripped.split()
        try:
            row = [float(p) for p in parts]
        except ValueError:
            bad = next(p for p in parts if not _is_float(p))
            raise ParseError(lineno, f"invalid number {bad!r} in {path}") from None
        if width is None:
            width = len(row)
            first_line = lineno
        elif len(row) != width:
            raise FormatError(
                f"{path}: line {lineno} has {len(row)} fields, expected {width}")
        rows.append(row)
    if not rows:
        return np.empty((0, 0)), first_line
    return np.array(rows, dtype=np.float64), first_line


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


# Fifty-two recorded variables per plant sample; the continuous
# measurements are columns 0..21 and the manipulated inputs 41..51.
_TE_WIDTH = 52
_TE_COLUMNS = tuple(range(22)) + tuple(range(41, 52))
_TE_NAMES = tuple(f"XMEAS_{i + 1}" for i in range(22)) + tuple(
    f"XMV_{i + 1}" for i in range(11))


@dataclass(frozen=True)
class TeLayout:
    """Which plant-record files to read and how to split them.

    ``train_files`` are fault-free and concatenated, then split by
    ``val_fraction`` (tail becomes validation). ``test_files`` maps a
    fault id to its file. Some distributions store the first normal
    file transposed (52 rows); the loader detects and fixes that.
    """

    train_files: tuple[str, ...] = ("d00.dat", "d00_te.dat")
    test_files: tuple[tuple[int, str], ...] = tuple(
        (i, f"d{i:02d}_te.dat") for i in range(1, 22))
    columns: tuple[int, ...] = _TE_COLUMNS
    variable_names: tuple[str, ...] = _TE_NAMES
    onset: int = 160
    val_fraction: float = 0.2

    def __post_init__(self):
        if not self.train_files:
            raise InvalidConfig("need at least one fault-free file")
        if not (0.0 < self.val_fraction < 1.0):
            raise InvalidConfig(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if len(self.columns) != len(self.variable_names):
            raise InvalidConfig("columns and variable_names must align")


def _load_te_file(path: Path) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(f"missing plant record {path}")
    mat, _ = _parse_numeric(path.read_text(), path, sep=None)
    if mat.size == 0:
        raise FormatError(f"{path}: no data rows")
    # some archives ship the normal-operation file as 52 x N
    if mat.shape[0] == _TE_WIDTH and mat.shape[1] != _TE_WIDTH:
        mat = np.ascontiguousarray(mat.T)
    if mat.shape[1] != _TE_WIDTH:
        raise FormatError(
            f"{path}: expected {_TE_WIDTH} columns, got {mat.shape[1]}")
    return mat


def load_te(dir_path, layout: TeLayout | None = None) -> Dataset:
    """Load the plant benchmark from a directory of .dat files.

    Fault-free files are concatenated and split into train/validation;
    each test file becomes a TestSet with the layout's onset. Column
    selection defaults to the 22 continuous measurements plus the 11
    manipulated variables.

    Raises:
        FileNotFoundError: Directory or a listed file is missing.
        FormatError: Wrong column count or inconsistent rows.
        ParseError: Non-numeric token (message carries the line).
    """
    layout = layout or TeLayout()
    root = Path(dir_path)
    if not root.is_dir():
        raise FileNotFoundError(f"no such data directory: {root}")
    cols = list(layout.columns)
    normal = np.vstack([_load_te_file(root / f)[:, cols] for f in layout.train_files])
    n_val = max(1, int(round(normal.shape[0] * layout.val_fraction)))
    if n_val >= normal.shape[0]:
        raise FormatError("not enough fault-free rows to split train/validation")
    train, val = normal[:-n_val], normal[-n_val:]
    tests = []
    for fault_id, fname in layout.test_files:
        mat = _load_te_file(root / fname)[:, cols]
        tests.append(TestSet(fault_id=fault_id, label=f"IDV({fault_id})",
                             data=mat, onset=layout.onset))
    return Dataset(train=train, val=val, tests=tuple(tests),
                   variable_names=layout.variable_names)


def save_csv(matrix, path, names: "tuple[str, ...] | None" = None) -> None:
    """Write a matrix as CSV with a header row, full float64 precision."""
    mat = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if names is None:
        names = tuple(f"x{i + 1}" for i in range(mat.shape[1]))
    if len(names) != mat.shape[1]:
        raise InvalidConfig(f"{len(names)} names for {mat.shape[1]} columns")
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in mat:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_csv(path) -> tuple[np.ndarray, tuple[str, ...]]:
    """Read a headed CSV written by `save_csv`; returns (matrix, names).

    A header-only file yields a zero-row matrix with the named width.

    Raises:
        FormatError: Empty file or ragged rows.
        ParseError: Non-numeric data cell (with its line number).
    """
    path = Path(path)
    text = path.read_text()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise FormatError(f"{path}: empty file")
    names = tuple(h.strip() for h in lines[0].split(","))
    # blank first line keeps reported line numbers aligned with the file
    body = "\n".join([""] + lines[1:])
    mat, _ = _parse_numeric(body, path, sep=",")
    if mat.size == 0:
        return np.empty((0, len(names))), names
    if mat.shape[1] != len(names):
        raise FormatError(
            f"{path}: header names {len(names)} columns but rows have {mat.shape[1]}")
    return mat, names


def save_dataset(dataset: Dataset, dir_path) -> None:
    """Write train.csv, val.csv, test_XX.csv, and meta.json to a directory."""
    root = Path(dir_path)
    root.mkdir(parents=True, exist_ok=True)
    names = dataset.variable_names
    save_csv(dataset.train, root / "train.csv", names)
    save_csv(dataset.val, root / "val.csv", names)
    tests_meta = []
    for ts in dataset.tests:
        fname = f"test_{ts.fault_id:02d}.csv"
        save_csv(ts.data, root / fname, names)
        tests_meta.append({
            "fault_id": ts.fault_id,
            "label": ts.label,
            "file": fname,
            "onset": ts.onset,
        })
    meta = {"variable_names": list(names), "tests": tests_meta}
    (root / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_dataset_dir(dir_path) -> Dataset:
    """Load a directory written by `save_dataset`."""
    root = Path(dir_path)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"missing {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid meta.json: {exc}") from exc
    train, names = load_csv(root / "train.csv")
    val, _ = load_csv(root / "val.csv")
    tests = []
    for entry in meta.get("tests", []):
        data, _ = load_csv(root / entry["file"])
        tests.append(TestSet(fault_id=int(entry["fault_id"]), label=str(entry["label"]),
                             data=data, onset=int(entry["onset"])))
    declared = meta.get("variable_names")
    if declared and tuple(declared) != names:
        raise FormatError("meta.json variable names disagree with train.csv header")
    return Dataset(train=train, val=val, tests=tuple(tests), variable_names=names)
