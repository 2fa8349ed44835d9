"""Data containers, CSV ingestion, gamma grids, and run configuration."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

OUTCOME_TYPES = ("continuous", "binary")

# Stream tags for derive_rng, so independent uses of one master seed never
# collide: 0 = fold assignment, 1 = simulation draws, 2 = oracle Monte Carlo.
FOLD_STREAM = 0
DGP_STREAM = 1
MC_STREAM = 2


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for (seed, *stream).

    Philox keyed by a SeedSequence spawn key, so replications/folds can be
    seeded independently and reproducibly regardless of execution order.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ObservedSample:
    """A single observation: outcome y, exposure a, covariate vector x."""

    y: float
    a: float
    x: tuple[float, ...]


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of (y, a, x) rows with a declared outcome type.

    Arrays are copied and marked read-only, so instances are safe to share
    across threads.
    """

    y: np.ndarray
    a: np.ndarray
    x: np.ndarray
    outcome_type: str = "continuous"

    def __post_init__(self):
        if self.outcome_type not in OUTCOME_TYPES:
            raise DataError(f"unknown outcome_type {self.outcome_type!r}")
        y = np.asarray(self.y, dtype=float)
        a = np.asarray(self.a, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if y.ndim != 1 or a.ndim != 1:
            raise DataError("y and a must be one-dimensional")
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2:
            raise DataError("x must be a (n, d) matrix")
        n = y.shape[0]
        if n == 0:
            raise DataError("empty dataset")
        if a.shape[0] != n or x.shape[0] != n:
            raise DataError("y, a, x must have the same number of rows")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(a)) and np.all(np.isfinite(x))):
            raise DataError("non-finite value in dataset")
        if self.outcome_type == "binary" and not np.all((y == 0.0) | (y == 1.0)):
            bad = int(np.argmax(~((y == 0.0) | (y == 1.0))))
            raise DataError(f"binary outcome must be 0/1; row {bad + 1} has y={y[bad]!r}")
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "a", _readonly(a))
        object.__setattr__(self, "x", _readonly(x))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def sample(self, i: int) -> ObservedSample:
        return ObservedSample(float(self.y[i]), float(self.a[i]), tuple(self.x[i]))

    def subset(self, index) -> "Dataset":
        """Dataset restricted to a boolean mask or integer index array."""
        return Dataset(self.y[index], self.a[index], self.x[index], self.outcome_type)


_XCOL = re.compile(r"^x([1-9][0-9]*)$")


def _resolve_header(header: list[str], where: str) -> tuple[dict[str, int], int]:
    names = [h.strip() for h in header]
    if len(set(names)) != len(names):
        raise DataError(f"{where}: duplicate column names in header")
    idx: dict[str, int] = {}
    x_indices = []
    for pos, name in enumerate(names):
        if name in ("y", "a"):
            idx[name] = pos
        else:
            m = _XCOL.match(name)
            if not m:
                raise DataError(f"{where}: unexpected column {name!r} (expected y, a, x1..xd)")
            x_indices.append(int(m.group(1)))
            idx[name] = pos
    for required in ("y", "a"):
        if required not in idx:
            raise DataError(f"{where}: missing column {required!r}")
    d = len(x_indices)
    if sorted(x_indices) != list(range(1, d + 1)):
        raise DataError(f"{where}: covariate columns must be x1..x{d} without gaps")
    return idx, d


def load_csv(path, outcome_type: str = "continuous") -> Dataset:
    """Load a dataset from a UTF-8 CSV file with columns y, a, x1..xd.

    Column order is flexible; names are fixed. Any missing or non-finite cell
    is an error naming the offending row and column.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (no header)") from None
        idx, d = _resolve_header(header, str(path))
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DataError(f"{path}: empty dataset")
    colnames = ["y", "a"] + [f"x{j}" for j in range(1, d + 1)]
    n = len(rows)
    out = np.empty((n, 2 + d))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 1} has {len(row)} cells, expected {len(header)}")
        for k, name in enumerate(colnames):
            cell = row[idx[name]].strip()
            if not cell:
                raise DataError(f"{path}: row {i + 1}, column {name!r}: missing value")
            try:
                value = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i + 1}, column {name!r}: cannot parse {cell!r}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}: row {i + 1}, column {name!r}: non-finite value {cell!r}")
            out[i, k] = value
    return Dataset(out[:, 0], out[:, 1], out[:, 2:], outcome_type)


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset in canonical column order; round-trips float64 exactly."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "a"] + [f"x{j}" for j in range(1, dataset.d + 1)])
        for i in range(dataset.n):
            row = [dataset.y[i], dataset.a[i], *dataset.x[i]]
            writer.writerow([format(v, ".17g") for v in row])


@dataclass(frozen=True)
class GammaGrid:
    """Evenly spaced, inclusive grid of sensitivity parameters."""

    gamma_lo: float = 0.0
    gamma_hi: float = math.log(2.0)
    n_points: int = 25

    def __post_init__(self):
        if self.gamma_lo < 0:
            raise ConfigError("gamma_lo must be >= 0")
        if self.gamma_hi < self.gamma_lo:
            raise ConfigError("gamma_hi must be >= gamma_lo")
        if self.n_points < 1:
            raise ConfigError("n_points must be >= 1")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.gamma_lo, self.gamma_hi, self.n_points)


@dataclass(frozen=True)
class RunConfig:
    """Analysis settings shared by the cross-fitting pipeline and the CLI.

    Learner settings (basis degrees, ridge penalty, resmoothing bandwidth,
    variance floor, median solver schedule) configure the default nuisance
    learners; a resmooth_bandwidth of None means 0.2 x sd(A) of the training
    fold.
    """

    outcome_type: str = "continuous"
    folds: int = 5
    lse_t: float = 50.0
    alpha: float = 0.05
    seed: int = 0
    score_truncation: float = 50.0
    basis_degree_a: int = 2
    basis_degree_x: int = 2
    interaction_order: int = 2
    ridge: float = 1e-3
    resmooth_bandwidth: float | None = None
    variance_floor: float = 1e-3
    median_iters: int = 2000
    median_step: float = 0.5

    def __post_init__(self):
        if self.outcome_type not in OUTCOME_TYPES:
            raise ConfigError(f"unknown outcome_type {self.outcome_type!r}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if not self.lse_t > 0:
            raise ConfigError("lse_t must be > 0")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must be in (0, 1)")
        if not self.score_truncation > 0:
            raise ConfigError("score_truncation must be > 0")
        if self.basis_degree_a < 0 or self.basis_degree_x < 0 or self.interaction_order < 0:
            raise ConfigError("basis degrees must be >= 0")
        if self.ridge < 0:
            raise ConfigError("ridge must be >= 0")
        if self.resmooth_bandwidth is not None and not self.resmooth_bandwidth > 0:
            raise ConfigError("resmooth_bandwidth must be > 0 (or omitted)")
        if not self.variance_floor > 0:
            raise ConfigError("variance_floor must be > 0")
        if self.median_iters < 1:
            raise ConfigError("median_iters must be >= 1")
        if not self.median_step > 0:
            raise ConfigError("median_step must be > 0")


_CONFIG_FIELDS = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"folds", "seed", "basis_degree_a", "basis_degree_x", "interaction_order", "median_iters"}


def parse_config_text(text: str, where: str = "<config>") -> dict:
    """Parse a flat key=value config body; unknown keys are errors."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{where}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_FIELDS:
            raise ConfigError(f"{where}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{where}:{lineno}: duplicate config key {key!r}")
        try:
            if key == "outcome_type":
                values[key] = val
            elif key == "resmooth_bandwidth":
                values[key] = None if val.lower() == "none" else float(val)
            elif key in _INT_KEYS:
                values[key] = int(val)
            else:
                values[key] = float(val)
        except ValueError:
            raise ConfigError(f"{where}:{lineno}: cannot parse value {val!r} for {key!r}") from None
    return values


def load_config(path, **overrides) -> RunConfig:
    """Build a RunConfig from a key=value file, with keyword overrides winning."""
    path = Path(path)
    values = parse_config_text(path.read_text(encoding="utf-8"), where=str(path))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def make_folds(n: int, n_folds: int, seed: int) -> np.ndarray:
    """Assign n samples to n_folds folds whose sizes differ by at most one.

    The assignment is a deterministic function of (n, n_folds, seed) only.
    """
    if n_folds < 2:
        raise ConfigError("n_folds must be >= 2")
    if n < n_folds:
        raise ConfigError(f"cannot split n={n} samples into {n_folds} folds")
    rng = derive_rng(seed, FOLD_STREAM)
    perm = rng.permutation(n)
    folds = np.empty(n, dtype=np.int64)
    folds[perm] = np.arange(n) % n_folds
    return folds
