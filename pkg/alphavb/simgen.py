"""Synthetic sparse-regression datasets: Y = X theta + N(0, I), X iid N(0, 1)."""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InvalidSparsityError, ShapeError, UnknownConfigError
from .model_core import DatasetView, precompute

logger = logging.getLogger(__name__)

SIGNAL_BOUND = 3.0

# name -> (n, p, s)
PREDEFINED_CONFIGS = {
    "i": (100, 200, 10),
    "ii": (400, 1000, 40),
    "iii": (200, 800, 5),
    "iv": (300, 450, 20),
}


@dataclass(frozen=True)
class SimConfig:
    n: int
    p: int
    s: int
    seed: int = 0
    test_n: int | None = None
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.p < 1:
            raise ShapeError(f"shape: n and p must be >= 1, got n={self.n}, p={self.p}")
        if not 0 <= self.s <= self.p:
            raise InvalidSparsityError(f"invalid sparsity: s={self.s} with p={self.p}")
        if self.test_n is None:
            object.__setattr__(self, "test_n", self.n)
        elif self.test_n < 1:
            raise ShapeError("shape: test_n must be >= 1")

    @property
    def label(self) -> str:
        return self.name or f"n{self.n}-p{self.p}-s{self.s}"


@dataclass(frozen=True, eq=False)
class SimInstance:
    train: DatasetView
    test: DatasetView | None
    theta_true: np.ndarray | None
    support: np.ndarray | None


def predefined_config(name: str, seed: int = 0) -> SimConfig:
    try:
        n, p, s = PREDEFINED_CONFIGS[name]
    except KeyError:
        raise UnknownConfigError(f"unknown config: {name!r} (expected one of {', '.join(PREDEFINED_CONFIGS)})")
    return SimConfig(n=n, p=p, s=s, seed=seed, name=name)


def generate(config: SimConfig) -> SimInstance:
    rng = np.random.default_rng(config.seed)
    support = np.sort(rng.choice(config.p, size=config.s, replace=False))
    theta = np.zeros(config.p)
    theta[support] = rng.uniform(-SIGNAL_BOUND, SIGNAL_BOUND, size=config.s)

    X = rng.standard_normal((config.n, config.p))
    Y = X @ theta + rng.standard_normal(config.n)
    X_test = rng.standard_normal((config.test_n, config.p))
    Y_test = X_test @ theta + rng.standard_normal(config.test_n)

    theta.setflags(write=False)
    support.setflags(write=False)
    return SimInstance(train=precompute(X, Y), test=precompute(X_test, Y_test), theta_true=theta, support=support)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def _read_csv(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, encoding="utf-8")


def write_instance(instance: SimInstance, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    p = instance.train.p
    x_header = [f"x{j}" for j in range(p)]
    _write_csv(directory / "X.csv", x_header, instance.train.X)
    _write_csv(directory / "Y.csv", ["y"], instance.train.Y[:, None])
    if instance.theta_true is not None:
        _write_csv(directory / "theta.csv", ["theta"], instance.theta_true[:, None])
    if instance.test is not None:
        _write_csv(directory / "X_test.csv", x_header, instance.test.X)
        _write_csv(directory / "Y_test.csv", ["y"], instance.test.Y[:, None])
    logger.info("Wrote simulated instance (n=%d, p=%d) to %s", instance.train.n, p, directory)
    return directory


def read_instance(directory) -> SimInstance:
    """Inverse of write_instance; theta and the test split are optional."""
    directory = Path(directory)
    train = precompute(_read_csv(directory / "X.csv"), _read_csv(directory / "Y.csv")[:, 0])

    theta = support = test = None
    if (directory / "theta.csv").exists():
        theta = _read_csv(directory / "theta.csv")[:, 0]
        if theta.shape[0] != train.p:
            raise ShapeError(f"shape: theta has {theta.shape[0]} entries, X has {train.p} columns")
        support = np.flatnonzero(theta)
    if (directory / "X_test.csv").exists() and (directory / "Y_test.csv").exists():
        test = precompute(_read_csv(directory / "X_test.csv"), _read_csv(directory / "Y_test.csv")[:, 0])
        if test.p != train.p:
            raise ShapeError(f"shape: X_test has {test.p} columns, X has {train.p}")
    return SimInstance(train=train, test=test, theta_true=theta, support=support)
