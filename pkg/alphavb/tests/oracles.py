"""Exact single-feature posteriors by numerical quadrature."""

import math

import numpy as np
from scipy import integrate, special

from alphavb.model_core import laplace_logpdf, precompute

# (theta, seed): strong, moderate, weak, weak, null
SINGLE_FEATURE_CASES = ((3.0, 1), (1.0, 2), (0.3, 3), (0.2, 4), (0.0, 5))


def single_feature_view(theta, seed, n=100):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 1))
    return precompute(X, theta * X[:, 0] + rng.standard_normal(n))


def posterior_oracle(view, prior):
    """Return (P(z=1 | Y), E[theta | z=1, Y]) for a one-column design."""
    g, b = float(view.gram[0, 0]), float(view.xty[0])
    half_width = 12.0 / math.sqrt(g)
    lo = min(b / g, 0.0) - half_width
    hi = max(b / g, 0.0) + half_width

    def log_slab(t):
        # likelihood relative to theta = 0, times the Laplace slab
        return b * t - 0.5 * g * t * t + float(laplace_logpdf(t, prior.lam))

    shift = max(log_slab(t) for t in np.linspace(lo, hi, 4001))
    mass, _ = integrate.quad(lambda t: math.exp(log_slab(t) - shift), lo, hi, points=[0.0], limit=400)
    first, _ = integrate.quad(lambda t: t * math.exp(log_slab(t) - shift), lo, hi, points=[0.0], limit=400)

    log_odds = math.log(prior.w_bar) - math.log1p(-prior.w_bar) + shift + math.log(mass)
    return float(special.expit(log_odds)), first / mass
