"""
AlphaVB: coordinate-ascent updates for the Renyi alpha-divergence with a
Laplace spike-and-slab prior.

Each coordinate update minimizes the delta-method surrogate log kappa_i over
mu_i, then over sigma_i (in log space), and finally sets gamma_i in closed
form from the logit Gamma_i. Sweeps run in descending |mu^(0)| order until
the largest change in binary entropy of gamma falls under tol_entropy.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .exceptions import AlphaRangeError, DomainError, InfeasibleObjectiveError, NumericOverflowError
from .model_core import (
    DatasetView,
    PriorSpec,
    RenyiConfig,
    VariationalParams,
    binary_entropy,
    clamp_gamma,
    folded_normal_mean,
)

logger = logging.getLogger(__name__)

LOG_ARGUMENT_FLOOR = 1e-12
MU_HALF_WIDTH = 5.0
MAX_BRACKET_EXPANSIONS = 10
LOG_SIGMA_BOUNDS = (math.log(1e-3), math.log(1e2))
GRID_POINTS = 17


@dataclass(frozen=True)
class CorrectionTerms:
    a_term: float
    b_term: float
    c_term: float
    log_g: float


@dataclass
class CaviState:
    params: VariationalParams
    order: np.ndarray
    sweep_count: int = 0
    delta_entropy: float = math.inf
    trace: list = field(default_factory=list)
    converged: bool = False
    bracket_expansions: int = 0
    wall_time_ms: float = 0.0


def _require_alpha(cfg: RenyiConfig):
    if not cfg.alpha > 1:
        raise AlphaRangeError()


def mean_field_moments(params: VariationalParams, i: int):
    """Mean and covariance diagonal of theta under the mean-field law given z_i = 1.

    Off-diagonal covariance is zero by independence and is not materialized.
    """
    mu, sigma, gamma = params.mu, params.sigma, params.gamma
    mean = gamma * mu
    var = gamma * (1.0 - gamma) * mu ** 2 + gamma * sigma ** 2
    mean[i] = mu[i]
    var[i] = sigma[i] ** 2
    return mean, var


def smooth_abs(x, eps):
    return np.sqrt(np.square(x) + eps)


class CoordinateObjective:
    """Surrogate objective for one coordinate with every other coordinate frozen.

    The O(p) sums over the other coordinates are taken once at construction;
    evaluating a candidate mu_i or sigma_i is then O(1).
    """

    def __init__(self, g_ii, xty_i, cross, c_sum, mu, sigma, lam, alpha, eps):
        self.g_ii = float(g_ii)
        self.xty_i = float(xty_i)
        self.cross = float(cross)
        self.c_sum = float(c_sum)
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.lam = float(lam)
        self.alpha = float(alpha)
        self.eps = float(eps)

    @classmethod
    def build(cls, view: DatasetView, params: VariationalParams, prior: PriorSpec, cfg: RenyiConfig, i: int):
        g_col = view.gram[:, i]
        weighted = params.gamma * params.mu
        var = params.gamma * (1.0 - params.gamma) * params.mu ** 2 + params.gamma * params.sigma ** 2
        cross = g_col @ weighted - g_col[i] * weighted[i]
        c_sum = np.square(g_col) @ var - g_col[i] ** 2 * var[i]
        return cls(
            g_ii=g_col[i],
            xty_i=view.xty[i],
            cross=cross,
            c_sum=c_sum,
            mu=params.mu[i],
            sigma=params.sigma[i],
            lam=prior.lam,
            alpha=cfg.alpha,
            eps=cfg.epsilon_abs,
        )

    def _quadratic(self, mu, s):
        return -self.xty_i * mu + 0.5 * mu * mu * self.g_ii + mu * self.cross + self.lam * s

    def terms(self, mu, sigma) -> CorrectionTerms:
        s = math.sqrt(mu * mu + self.eps)
        slope = -self.xty_i + mu * self.g_ii + self.cross + self.lam * mu / s
        var = sigma * sigma
        a_term = slope * slope * var
        b_term = self.g_ii * var - 1.0 + self.lam * var * (1.0 / s - mu * mu / s ** 3)
        c_term = mu * mu * self.c_sum
        log_g = (self.alpha - 1.0) * (self._quadratic(mu, s) - math.log(sigma))
        if not all(math.isfinite(v) for v in (a_term, b_term, c_term, log_g)):
            raise NumericOverflowError()
        return CorrectionTerms(a_term=a_term, b_term=b_term, c_term=c_term, log_g=log_g)

    def log_correction(self, terms: CorrectionTerms):
        am1 = self.alpha - 1.0
        argument = 1.0 + 0.5 * am1 * am1 * terms.a_term + 0.5 * am1 * terms.b_term + 0.5 * am1 * am1 * terms.c_term
        if not math.isfinite(argument):
            raise NumericOverflowError()
        return math.log(max(argument, LOG_ARGUMENT_FLOOR))

    def log_kappa_mu(self, mu):
        terms = self.terms(mu, self.sigma)
        s = math.sqrt(mu * mu + self.eps)
        value = (self.alpha - 1.0) * self._quadratic(mu, s) + self.log_correction(terms)
        if not math.isfinite(value):
            raise NumericOverflowError()
        return value

    def log_kappa_sigma(self, sigma):
        if not sigma > 0:
            raise DomainError("domain: sigma candidate must be strictly positive")
        terms = self.terms(self.mu, sigma)
        value = -(self.alpha - 1.0) * math.log(sigma) + self.log_correction(terms)
        if not math.isfinite(value):
            raise NumericOverflowError()
        return value


def correction_terms(view, params, prior, cfg, i, mu_i, sigma_i) -> CorrectionTerms:
    _require_alpha(cfg)
    if not sigma_i > 0:
        raise DomainError("domain: sigma_i must be strictly positive")
    return CoordinateObjective.build(view, params, prior, cfg, i).terms(float(mu_i), float(sigma_i))


def log_kappa_mu(view, params, prior, cfg, i, mu_candidate) -> float:
    _require_alpha(cfg)
    return CoordinateObjective.build(view, params, prior, cfg, i).log_kappa_mu(float(mu_candidate))


def log_kappa_sigma(view, params, prior, cfg, i, sigma_candidate) -> float:
    _require_alpha(cfg)
    return CoordinateObjective.build(view, params, prior, cfg, i).log_kappa_sigma(float(sigma_candidate))


def _evaluate(f, x):
    try:
        value = float(f(x))
    except (NumericOverflowError, OverflowError, ZeroDivisionError):
        return math.inf
    return value if math.isfinite(value) else math.inf


def scalar_minimize(f, bracket, tol):
    """Bracketed derivative-free 1-D minimization.

    A coarse grid locates the best cell, then bounded Brent
    (golden section + parabolic steps) refines inside its neighbours.
    Candidates where f is non-finite or overflows are treated as +inf.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise DomainError("domain: bracket must satisfy lo < hi")

    grid = np.linspace(lo, hi, GRID_POINTS)
    values = np.array([_evaluate(f, x) for x in grid])
    finite = np.isfinite(values)
    if not finite.any():
        raise InfeasibleObjectiveError()

    worst = values[finite].max()
    penalty = worst + 1e6 * (1.0 + abs(worst))

    def guarded(x):
        value = _evaluate(f, x)
        return value if math.isfinite(value) else penalty

    k = int(np.argmin(values))
    left, right = grid[max(k - 1, 0)], grid[min(k + 1, GRID_POINTS - 1)]
    xatol = tol * max(1.0, abs(grid[k]))
    result = optimize.minimize_scalar(guarded, bounds=(left, right), method="bounded", options={"xatol": xatol})

    x_best, f_best = float(grid[k]), float(values[k])
    if result.fun <= f_best:
        x_best, f_best = float(result.x), float(result.fun)
    return x_best, f_best


def _gamma_logit(g_ii, xty_i, cross, mu, sigma, prior: PriorSpec):
    return (
        math.log(prior.a0 / prior.b0)
        + math.log(math.sqrt(math.pi) * sigma * prior.lam / math.sqrt(2.0))
        + xty_i * mu
        - mu * cross
        - 0.5 * g_ii * (sigma * sigma + mu * mu)
        - prior.lam * float(folded_normal_mean(mu, sigma))
        + 0.5
    )


def gamma_logit(view: DatasetView, params: VariationalParams, prior: PriorSpec, i: int) -> float:
    g_row = view.gram[i]
    weighted = params.gamma * params.mu
    cross = g_row @ weighted - g_row[i] * weighted[i]
    value = _gamma_logit(g_row[i], view.xty[i], cross, params.mu[i], params.sigma[i], prior)
    if not math.isfinite(value):
        raise NumericOverflowError()
    return value


def initial_params(view: DatasetView, prior: PriorSpec) -> VariationalParams:
    """Marginal least squares per coordinate; sigma = 1, gamma = 1/2."""
    diag = np.diag(view.gram)
    mu = np.divide(view.xty, diag, out=np.zeros(view.p), where=diag > 0)
    return VariationalParams(mu=mu, sigma=np.ones(view.p), gamma=np.full(view.p, 0.5))


def update_order(params: VariationalParams) -> np.ndarray:
    # stable sort keeps ascending index among ties
    return np.argsort(-np.abs(params.mu), kind="stable")


def _minimize_mu(objective: CoordinateObjective, tol):
    center, half = objective.mu, MU_HALF_WIDTH
    expansions = 0
    while True:
        lo, hi = center - half, center + half
        x, _ = scalar_minimize(objective.log_kappa_mu, (lo, hi), tol)
        edge = 1e-3 * (hi - lo)
        if (lo + edge < x < hi - edge) or expansions >= MAX_BRACKET_EXPANSIONS:
            return x, expansions
        center, half = x, 2.0 * half
        expansions += 1


def _minimize_sigma(objective: CoordinateObjective, tol):
    log_sigma, _ = scalar_minimize(lambda t: objective.log_kappa_sigma(math.exp(t)), LOG_SIGMA_BOUNDS, tol)
    return math.exp(log_sigma)


def run_cavi(view: DatasetView, prior: PriorSpec, cfg: RenyiConfig):
    _require_alpha(cfg)
    started = time.perf_counter()

    start = initial_params(view, prior)
    order = update_order(start)
    mu, sigma, gamma = start.mu.copy(), start.sigma.copy(), start.gamma.copy()
    gram = view.gram
    gram_sq = np.square(gram)
    state = CaviState(params=start, order=order)

    logger.info("AlphaVB start: n=%d p=%d alpha=%g", view.n, view.p, cfg.alpha)
    for sweep in range(1, int(cfg.max_sweeps) + 1):
        # Refreshed each sweep so incremental updates do not drift.
        weighted = gamma * mu
        var = gamma * (1.0 - gamma) * mu ** 2 + gamma * sigma ** 2
        cross_all = gram @ weighted
        c_all = gram_sq @ var
        gamma_old = gamma.copy()

        for i in order:
            g_ii = gram[i, i]
            objective = CoordinateObjective(
                g_ii=g_ii,
                xty_i=view.xty[i],
                cross=cross_all[i] - g_ii * weighted[i],
                c_sum=c_all[i] - gram_sq[i, i] * var[i],
                mu=mu[i],
                sigma=sigma[i],
                lam=prior.lam,
                alpha=cfg.alpha,
                eps=cfg.epsilon_abs,
            )
            new_mu, expansions = _minimize_mu(objective, cfg.scalar_opt_tol)
            state.bracket_expansions += expansions
            objective.mu = new_mu
            new_sigma = _minimize_sigma(objective, cfg.scalar_opt_tol)
            logit = _gamma_logit(g_ii, objective.xty_i, objective.cross, new_mu, new_sigma, prior)
            if not math.isfinite(logit):
                raise NumericOverflowError()
            new_gamma = float(clamp_gamma(special.expit(logit)))

            new_weighted = new_gamma * new_mu
            new_var = new_gamma * (1.0 - new_gamma) * new_mu ** 2 + new_gamma * new_sigma ** 2
            cross_all += gram[i] * (new_weighted - weighted[i])
            c_all += gram_sq[i] * (new_var - var[i])
            weighted[i], var[i] = new_weighted, new_var
            mu[i], sigma[i], gamma[i] = new_mu, new_sigma, new_gamma

        delta = float(np.max(np.abs(binary_entropy(gamma) - binary_entropy(gamma_old))))
        state.sweep_count = sweep
        state.delta_entropy = delta
        state.trace.append(delta)
        logger.debug("AlphaVB sweep %d: delta_H=%.3e", sweep, delta)
        if delta < cfg.tol_entropy:
            state.converged = True
            break

    state.params = VariationalParams(mu=mu, sigma=sigma, gamma=gamma)
    state.wall_time_ms = (time.perf_counter() - started) * 1000.0
    if state.converged:
        logger.info("AlphaVB converged after %d sweeps (%.0f ms)", state.sweep_count, state.wall_time_ms)
    else:
        logger.warning(
            "AlphaVB not converged after %d sweeps, delta_H=%.3e", state.sweep_count, state.delta_entropy
        )
    return state.params, state
