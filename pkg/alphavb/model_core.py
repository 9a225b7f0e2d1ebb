"""
Shared domain types and density primitives for the spike-and-slab solvers.

Everything here is immutable once built: arrays held by the dataclasses are
flagged read-only, and the functions are pure.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .exceptions import DomainError, NonFiniteInputError, ShapeError

GAMMA_FLOOR = 1e-10
LOG2 = np.log(2.0)


def _frozen(values, dtype=float):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def clamp_gamma(gamma):
    return np.clip(gamma, GAMMA_FLOOR, 1.0 - GAMMA_FLOOR)


@dataclass(frozen=True, eq=False)
class DatasetView:
    X: np.ndarray
    Y: np.ndarray
    gram: np.ndarray
    xty: np.ndarray
    yty: float

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class VariationalParams:
    """Per-coordinate (mu, sigma, gamma) of the mean-field spike-and-slab family.

    gamma is clamped to [GAMMA_FLOOR, 1 - GAMMA_FLOOR] on construction.
    """

    mu: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if mu.ndim != 1 or not (mu.shape == sigma.shape == gamma.shape):
            raise ShapeError(
                f"shape: mu {mu.shape}, sigma {sigma.shape}, gamma {gamma.shape} must be equal 1-d vectors"
            )
        if not np.all(sigma > 0):
            raise DomainError("domain: sigma must be strictly positive")
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "gamma", _frozen(clamp_gamma(gamma)))

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    def replace(self, **changes) -> "VariationalParams":
        values = {"mu": self.mu, "sigma": self.sigma, "gamma": self.gamma}
        values.update(changes)
        return VariationalParams(**values)


@dataclass(frozen=True)
class PriorSpec:
    lam: float = 1.0
    a0: float = 1.0
    b0: float = 1.0
    noise_var: float = 1.0
    w_bar: float = field(init=False)

    def __post_init__(self):
        for name in ("lam", "a0", "b0", "noise_var"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"domain: {name} must be a positive finite number, got {value!r}")
        object.__setattr__(self, "w_bar", self.a0 / (self.a0 + self.b0))

    @classmethod
    def for_dimension(cls, p, lam=1.0, a0=None, b0=None) -> "PriorSpec":
        """Default prior odds 1/p: a0 = 1, b0 = p unless given."""
        return cls(lam=lam, a0=1.0 if a0 is None else a0, b0=float(p) if b0 is None else b0)


@dataclass(frozen=True)
class RenyiConfig:
    alpha: float = 1.01
    epsilon_abs: float = 1e-8
    tol_entropy: float = 1e-5
    max_sweeps: int = 200
    scalar_opt_tol: float = 1e-6

    def __post_init__(self):
        if not (self.alpha > 0) or self.alpha == 1:
            raise DomainError(f"domain: alpha must be positive and different from 1, got {self.alpha!r}")
        if not self.epsilon_abs > 0:
            raise DomainError("domain: epsilon_abs must be positive")
        if not (self.tol_entropy > 0 and self.scalar_opt_tol > 0):
            raise DomainError("domain: tolerances must be positive")
        if int(self.max_sweeps) < 1:
            raise DomainError("domain: max_sweeps must be a positive integer")


def precompute(X, Y) -> DatasetView:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 1 or X.shape[0] != Y.shape[0] or min(X.shape) < 1:
        raise ShapeError(f"shape: X is {X.shape}, Y is {Y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise NonFiniteInputError()

    gram = X.T @ X
    # Exact symmetry; the BLAS product can differ in the last bit.
    gram = 0.5 * (gram + gram.T)
    return DatasetView(
        X=_frozen(X),
        Y=_frozen(Y),
        gram=_frozen(gram),
        xty=_frozen(X.T @ Y),
        yty=float(Y @ Y),
    )


def _check_sigma(sigma):
    if np.any(np.asarray(sigma) <= 0):
        raise DomainError("domain: sigma must be strictly positive")


def gaussian_logpdf(x, mu, sigma):
    _check_sigma(sigma)
    return stats.norm.logpdf(x, loc=mu, scale=sigma)


def laplace_logpdf(x, lam):
    if np.any(np.asarray(lam) <= 0):
        raise DomainError("domain: the Laplace rate must be strictly positive")
    return stats.laplace.logpdf(x, scale=1.0 / np.asarray(lam, dtype=float))


def folded_normal_mean(mu, sigma):
    """E|Z| for Z ~ N(mu, sigma^2)."""
    _check_sigma(sigma)
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    value = (
        sigma * np.sqrt(2.0 / np.pi) * np.exp(-(mu ** 2) / (2.0 * sigma ** 2))
        + mu * (1.0 - 2.0 * special.ndtr(-mu / sigma))
    )
    # Rounding can put the far-tail value a hair under |mu|.
    value = np.maximum(value, np.abs(mu))
    return value[()] if value.ndim == 0 else value


def binary_entropy(z):
    """Binary entropy in bits, with 0 log 0 = 0."""
    z = np.asarray(z, dtype=float)
    if np.any((z < 0) | (z > 1)) or np.any(np.isnan(z)):
        raise DomainError("domain: binary entropy is defined on [0, 1]")
    value = (special.entr(z) + special.entr(1.0 - z)) / LOG2
    return value[()] if value.ndim == 0 else value
