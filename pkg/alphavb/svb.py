"""
AlphaSVB: stochastic gradient ascent on the Monte Carlo variational Renyi
bound, using self-normalized importance weights over K spike-and-slab draws.
"""

import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .cavi import initial_params
from .exceptions import DegenerateBatchError, DomainError, NumericOverflowError, ShapeError
from .model_core import GAMMA_FLOOR, DatasetView, PriorSpec, VariationalParams, gaussian_logpdf, laplace_logpdf

logger = logging.getLogger(__name__)

ELBO_LIMIT_WIDTH = 1e-6
TAU_BOUND = math.log((1.0 - GAMMA_FLOOR) / GAMMA_FLOOR)


@dataclass(frozen=True)
class SvbConfig:
    alpha: float = 0.9
    k_samples: int = 64
    max_iters: int = 3000
    lr_mu: float = 1e-2
    lr_sigma: float = 1e-2
    lr_gamma: float = 1e-2
    grad_clip: float = 10.0
    seed: int = 0
    trace_every: int = 10

    def __post_init__(self):
        if not (self.alpha > 0) or self.alpha == 1:
            raise DomainError(f"domain: alpha must be positive and different from 1, got {self.alpha!r}")
        if int(self.k_samples) < 1 or int(self.max_iters) < 0 or int(self.trace_every) < 1:
            raise DomainError("domain: k_samples and trace_every must be >= 1, max_iters >= 0")
        # Zero rates are accepted: they turn the run into a no-op ascent.
        if min(self.lr_mu, self.lr_sigma, self.lr_gamma) < 0 or not self.grad_clip > 0:
            raise DomainError("domain: learning rates must be >= 0 and grad_clip > 0")


@dataclass(frozen=True)
class SvbSample:
    theta: np.ndarray
    z: np.ndarray


class SvbBatch(Sequence):
    """K draws from the variational family, stored as (K, p) arrays."""

    def __init__(self, theta, z):
        self.theta = np.asarray(theta, dtype=float)
        self.z = np.asarray(z, dtype=bool)
        if self.theta.shape != self.z.shape or self.theta.ndim != 2:
            raise ShapeError(f"shape: theta {self.theta.shape} and z {self.z.shape} must be equal (K, p) arrays")

    @classmethod
    def from_samples(cls, samples):
        return cls(np.stack([s.theta for s in samples]), np.stack([s.z for s in samples]))

    def __len__(self):
        return self.theta.shape[0]

    def __getitem__(self, j):
        if isinstance(j, slice):
            return SvbBatch(self.theta[j], self.z[j])
        return SvbSample(theta=self.theta[j], z=self.z[j])


@dataclass(frozen=True)
class UnconstrainedParams:
    mu: np.ndarray
    eta: np.ndarray
    tau: np.ndarray

    @classmethod
    def from_params(cls, params: VariationalParams) -> "UnconstrainedParams":
        return cls(mu=params.mu.copy(), eta=np.log(params.sigma), tau=special.logit(params.gamma))

    def to_params(self) -> VariationalParams:
        return VariationalParams(mu=self.mu, sigma=np.exp(self.eta), gamma=special.expit(self.tau))


@dataclass
class SvbTrace:
    bounds: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    iterations_run: int = 0
    diverged: bool = False
    wall_time_ms: float = 0.0


def sample_batch(params: VariationalParams, K: int, rng: np.random.Generator) -> SvbBatch:
    if int(K) < 1:
        raise DomainError("domain: K must be >= 1")
    shape = (int(K), params.p)
    z = rng.random(shape) < params.gamma
    slab = rng.normal(params.mu, params.sigma, size=shape)
    return SvbBatch(np.where(z, slab, 0.0), z)


def _as_batch(samples) -> SvbBatch:
    if isinstance(samples, SvbBatch):
        return samples
    if isinstance(samples, SvbSample):
        return SvbBatch(samples.theta[None, :], samples.z[None, :])
    return SvbBatch.from_samples(samples)


def _log_ratios(batch: SvbBatch, view: DatasetView, prior: PriorSpec, params: VariationalParams):
    theta, z = batch.theta, batch.z
    residual = view.Y[None, :] - theta @ view.X.T
    loglik = (
        -0.5 * view.n * (math.log(2.0 * math.pi) + math.log(prior.noise_var))
        - np.einsum("kn,kn->k", residual, residual) / (2.0 * prior.noise_var)
    )
    log_prior = (
        np.where(z, laplace_logpdf(theta, prior.lam), 0.0).sum(axis=1)
        + np.where(z, math.log(prior.w_bar), math.log1p(-prior.w_bar)).sum(axis=1)
    )
    # Dirac atoms appear on both sides and cancel; only the z-conditional parts remain.
    log_q = np.where(
        z,
        np.log(params.gamma) + gaussian_logpdf(theta, params.mu, params.sigma),
        np.log1p(-params.gamma),
    ).sum(axis=1)
    ratios = loglik + log_prior - log_q
    if not np.all(np.isfinite(ratios)):
        raise NumericOverflowError()
    return ratios


def log_ratio(sample: SvbSample, view: DatasetView, prior: PriorSpec, params: VariationalParams) -> float:
    if np.any(~np.asarray(sample.z, dtype=bool) & (np.asarray(sample.theta) != 0)):
        raise DomainError("domain: theta_i must be exactly 0 where z_i = 0")
    return float(_log_ratios(_as_batch(sample), view, prior, params)[0])


def importance_weights(log_ratios, alpha) -> np.ndarray:
    log_ratios = np.asarray(log_ratios, dtype=float)
    if log_ratios.size < 1:
        raise DomainError("domain: need at least one log ratio")
    if alpha == 1:
        raise DomainError("domain: alpha must differ from 1")
    if np.all(np.isneginf(log_ratios)):
        raise DegenerateBatchError()
    scaled = (1.0 - alpha) * log_ratios
    log_norm = special.logsumexp(scaled)
    if not np.isfinite(log_norm):
        raise DegenerateBatchError()
    weights = np.exp(scaled - log_norm)
    return weights / weights.sum()


def grad_log_q(sample: SvbSample, params: VariationalParams, i: int):
    """Gradient of log q(theta_i | z_i) with respect to (mu_i, sigma_i, gamma_i)."""
    theta, z = float(sample.theta[i]), bool(sample.z[i])
    mu, sigma, gamma = float(params.mu[i]), float(params.sigma[i]), float(params.gamma[i])
    if not z:
        return 0.0, 0.0, -1.0 / (1.0 - gamma)
    diff = theta - mu
    return diff / sigma ** 2, (diff * diff - sigma ** 2) / sigma ** 3, 1.0 / gamma


def _grad_log_q_batch(batch: SvbBatch, params: VariationalParams):
    z = batch.z
    diff = np.where(z, batch.theta - params.mu, 0.0)
    var = params.sigma ** 2
    d_mu = diff / var
    d_sigma = np.where(z, (diff * diff - var) / params.sigma ** 3, 0.0)
    d_gamma = np.where(z, 1.0 / params.gamma, -1.0 / (1.0 - params.gamma))
    return d_mu, d_sigma, d_gamma


def _weighted_gradient(batch, weights, params, alpha, grad_clip):
    d_mu, d_sigma, d_gamma = _grad_log_q_batch(batch, params)
    # Score term of each draw plus the explicit -grad log q inside the ratio:
    # (1 - (1 - alpha)) / (1 - alpha) = alpha / (1 - alpha). Weights sum to 1.
    scale = alpha / (1.0 - alpha)
    grads = (scale * (weights @ d_mu), scale * (weights @ d_sigma), scale * (weights @ d_gamma))
    return tuple(np.clip(g, -grad_clip, grad_clip) for g in grads)


def vr_gradient(batch, view, prior, params, alpha, grad_clip=10.0):
    """Score-function gradient of the Monte Carlo VR bound with respect to (mu, sigma, gamma)."""
    batch = _as_batch(batch)
    weights = importance_weights(_log_ratios(batch, view, prior, params), alpha)
    return _weighted_gradient(batch, weights, params, alpha, grad_clip)


def _bound_from_log_ratios(log_ratios, alpha):
    if abs(alpha - 1.0) < ELBO_LIMIT_WIDTH:
        return float(np.mean(log_ratios))
    scaled = (1.0 - alpha) * np.asarray(log_ratios)
    log_mean = special.logsumexp(scaled) - math.log(len(scaled))
    if not np.isfinite(log_mean):
        raise DegenerateBatchError()
    return float(log_mean / (1.0 - alpha))


def estimate_vr_bound(params, view, prior, alpha, K, rng) -> float:
    if not alpha > 0:
        raise DomainError("domain: alpha must be positive")
    batch = sample_batch(params, K, rng)
    return _bound_from_log_ratios(_log_ratios(batch, view, prior, params), alpha)


def run_svb(view: DatasetView, prior: PriorSpec, cfg: SvbConfig):
    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    state = UnconstrainedParams.from_params(initial_params(view, prior))
    mu, eta, tau = state.mu, state.eta, state.tau
    trace = SvbTrace()

    logger.info("AlphaSVB start: n=%d p=%d alpha=%g K=%d T=%d", view.n, view.p, cfg.alpha, cfg.k_samples, cfg.max_iters)
    params = state.to_params()
    for it in range(1, int(cfg.max_iters) + 1):
        sigma = np.exp(eta)
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma)) and np.all(sigma > 0)):
            trace.diverged = True
            break
        params = VariationalParams(mu=mu, sigma=sigma, gamma=special.expit(tau))
        batch = sample_batch(params, cfg.k_samples, rng)
        try:
            ratios = _log_ratios(batch, view, prior, params)
        except NumericOverflowError:
            trace.diverged = True
            break
        weights = importance_weights(ratios, cfg.alpha)
        g_mu, g_sigma, g_gamma = _weighted_gradient(batch, weights, params, cfg.alpha, cfg.grad_clip)

        # chain rule into (mu, log sigma, logit gamma)
        mu = mu + cfg.lr_mu * g_mu
        eta = eta + cfg.lr_sigma * params.sigma * g_sigma
        tau = np.clip(tau + cfg.lr_gamma * params.gamma * (1.0 - params.gamma) * g_gamma, -TAU_BOUND, TAU_BOUND)
        trace.iterations_run = it

        if it % cfg.trace_every == 0:
            bound = _bound_from_log_ratios(ratios, cfg.alpha)
            trace.iterations.append(it)
            trace.bounds.append(bound)
            logger.debug("AlphaSVB iter %d: bound=%.4f", it, bound)

    trace.wall_time_ms = (time.perf_counter() - started) * 1000.0
    if trace.diverged:
        # params still holds the last finite iterate
        logger.warning("AlphaSVB diverged after %d iterations", trace.iterations_run)
        result = params
    else:
        result = VariationalParams(mu=mu, sigma=np.exp(eta), gamma=special.expit(tau))
    logger.info("AlphaSVB finished %d iterations (%.0f ms)", trace.iterations_run, trace.wall_time_ms)
    return result, trace
