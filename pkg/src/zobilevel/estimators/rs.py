"""Random-search gradient estimation from paired loss evaluations.

The estimators only see an opaque loss callback, so the same code serves raw
test functions and the full bi-level pipeline. The dimension factor is 1 for
Gaussian directions and d for unit-sphere directions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..types import Perturbation

__all__ = [
    "RsEstimate",
    "phi_factor",
    "one_point_estimate",
    "two_point_estimate",
    "multi_point_estimate",
    "rs_step",
    "NonFiniteLossError",
    "EstimatorError",
]

log = logging.getLogger(__name__)

LossFn = Callable[[np.ndarray], float]


class EstimatorError(RuntimeError):
    """No usable candidates were left to form an update."""


class NonFiniteLossError(EstimatorError):
    """The loss callback returned NaN or infinity."""


@dataclass
class RsEstimate:
    gradient_estimate: np.ndarray
    samples_used: int
    distribution: str
    phi_d: float


def phi_factor(distribution: str, d: int) -> float:
    if distribution == "gaussian":
        return 1.0
    if distribution == "sphere":
        return float(d)
    raise ValueError(f"unknown sampling distribution '{distribution}'")


def _checked(loss: float) -> float:
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"loss evaluation returned {loss}")
    return float(loss)


def one_point_estimate(
    loss_at: LossFn, alpha: np.ndarray, u: Perturbation, mu: float, phi_d: float
) -> np.ndarray:
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    l_plus = _checked(loss_at(alpha + mu * u.u))
    return (phi_d / mu) * l_plus * u.u


def two_point_estimate(
    loss_at: LossFn, alpha: np.ndarray, u: Perturbation, mu: float, phi_d: float
) -> np.ndarray:
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    l_plus = _checked(loss_at(alpha + mu * u.u))
    l_minus = _checked(loss_at(alpha - mu * u.u))
    return phi_d * ((l_plus - l_minus) / (2.0 * mu)) * u.u


def multi_point_estimate(
    loss_at: LossFn,
    alpha: np.ndarray,
    us: Sequence[Perturbation],
    mu: float,
    phi_d: float,
    distribution: str = "gaussian",
) -> RsEstimate:
    """Average of two-point estimates; identical to a single two-point
    estimate when only one sample is given."""
    if len(us) < 1:
        raise ValueError("need at least one sample")
    total = two_point_estimate(loss_at, alpha, us[0], mu, phi_d)
    for u in us[1:]:
        total = total + two_point_estimate(loss_at, alpha, u, mu, phi_d)
    return RsEstimate(
        gradient_estimate=total / float(len(us)),
        samples_used=len(us),
        distribution=distribution,
        phi_d=phi_d,
    )


def rs_step(
    loss_at: LossFn,
    alpha: np.ndarray,
    us: Sequence[Perturbation],
    mu: float,
    phi_d: float,
    xi: float,
    distribution: str = "gaussian",
    map_fn=map,
) -> tuple[Perturbation, RsEstimate]:
    """One search step: u* = -xi * multi-point estimate over the pairs.

    Pairs whose evaluation is non-finite are dropped and the average runs
    over the survivors; an update with no survivors raises EstimatorError.
    """
    points = []
    for u in us:
        points.append(alpha + mu * u.u)
        points.append(alpha - mu * u.u)
    losses = list(map_fn(loss_at, points))
    total = None
    used = 0
    for i, u in enumerate(us):
        l_plus, l_minus = losses[2 * i], losses[2 * i + 1]
        if not (np.isfinite(l_plus) and np.isfinite(l_minus)):
            log.warning("dropping sample %d with non-finite pair (%s, %s)", i, l_plus, l_minus)
            continue
        term = phi_d * ((l_plus - l_minus) / (2.0 * mu)) * u.u
        total = term if total is None else total + term
        used += 1
    if used == 0:
        raise EstimatorError("all sampled pairs evaluated to non-finite losses")
    estimate = RsEstimate(
        gradient_estimate=total / float(used),
        samples_used=used,
        distribution=distribution,
        phi_d=phi_d,
    )
    u_star = Perturbation.from_vector(-xi * estimate.gradient_estimate)
    return u_star, estimate
