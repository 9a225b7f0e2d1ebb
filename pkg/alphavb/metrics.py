from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import DomainError, ShapeError
from .model_core import VariationalParams

ESTIMATORS = ("gm", "mu-selected")
METRIC_NAMES = ("l2", "fdr", "tpr", "mspe")


@dataclass(frozen=True)
class MetricBundle:
    l2_error: float
    fdr: float
    tpr: float
    mspe: float

    def as_row(self) -> dict:
        return {"l2": self.l2_error, "fdr": self.fdr, "tpr": self.tpr, "mspe": self.mspe}

    def as_dict(self) -> dict:
        return asdict(self)


def select(params: VariationalParams, threshold: float = 0.5) -> np.ndarray:
    if not 0 < threshold < 1:
        raise DomainError("domain: threshold must lie in (0, 1)")
    return np.flatnonzero(params.gamma > threshold)


def point_estimate(params: VariationalParams, estimate: str = "gm", threshold: float = 0.5) -> np.ndarray:
    """gm: the variational posterior mean gamma * mu; mu-selected: mu on the selected set."""
    if estimate == "gm":
        return params.gamma * params.mu
    if estimate == "mu-selected":
        theta = np.zeros(params.p)
        chosen = select(params, threshold)
        theta[chosen] = params.mu[chosen]
        return theta
    raise DomainError(f"domain: unknown estimator {estimate!r}")


def evaluate(params: VariationalParams, instance, threshold: float = 0.5, estimate: str = "gm") -> MetricBundle:
    """l2 error, FDR, TPR and MSPE of a fit against a simulated instance.

    MSPE uses the held-out split when the instance has one, else the training rows.
    """
    if instance.theta_true is None:
        raise ShapeError("shape: instance has no true coefficients to evaluate against")
    if params.p != instance.theta_true.shape[0]:
        raise ShapeError(f"shape: params have p={params.p}, instance has p={instance.theta_true.shape[0]}")

    theta_hat = point_estimate(params, estimate, threshold)
    selected = set(select(params, threshold).tolist())
    support = set(np.asarray(instance.support).tolist())

    true_hits = len(selected & support)
    fdr = (len(selected) - true_hits) / max(len(selected), 1)
    tpr = true_hits / len(support) if support else 1.0

    held_out = instance.test if instance.test is not None else instance.train
    residual = held_out.Y - held_out.X @ theta_hat
    return MetricBundle(
        l2_error=float(np.linalg.norm(theta_hat - instance.theta_true)),
        fdr=float(fdr),
        tpr=float(tpr),
        mspe=float(residual @ residual / held_out.n),
    )
