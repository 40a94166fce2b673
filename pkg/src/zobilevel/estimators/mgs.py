"""Likelihood-guided search: softmin-of-loss target with importance sampling.

Updates are the self-normalized weighted mean of sampled candidates. Weights
are exp(-(L(alpha+u) - L(alpha)) / tau) / q(u), handled entirely in log space
with a max shift so small temperatures cannot overflow. The proposal is a
two-component Gaussian mixture, one component centered at the negative
frozen-weights gradient when the problem provides one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..types import Perturbation
from .rs import EstimatorError

__all__ = [
    "MgsCandidate",
    "MgsDiagnostics",
    "propose",
    "proposal_log_density",
    "make_candidate",
    "mgs_update",
    "prop1_direction_check",
]


@dataclass
class MgsCandidate:
    u: Perturbation
    val_loss_at_u: float
    log_p_tilde: float   # -(L(alpha+u) - L(alpha)) / tau
    log_q: float         # proposal log-density at u
    weight_normalized: float = math.nan


@dataclass
class MgsDiagnostics:
    ess: float
    esr: float
    weights: np.ndarray = field(repr=False)

    @property
    def max_weight(self) -> float:
        return float(self.weights.max())

    @property
    def min_weight(self) -> float:
        return float(self.weights.min())


def propose(
    rng: np.random.Generator,
    alpha: np.ndarray,
    grad_hint: np.ndarray | None,
    sigma: float,
    lambda_mix: float,
    n: int,
) -> list[Perturbation]:
    """Draw n candidates from the mixture proposal.

    Each sample picks the zero-centered component with probability
    lambda_mix, otherwise the component centered at -grad_hint. Without a
    gradient hint the mixture collapses to the zero-centered component.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    if not 0.0 <= lambda_mix <= 1.0:
        raise ValueError("lambda_mix must lie in [0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    d = np.asarray(alpha).size
    if grad_hint is None:
        lambda_mix = 1.0
        center = np.zeros(d)
    else:
        center = -np.asarray(grad_hint, dtype=np.float64)
    out = []
    for _ in range(n):
        zero_centered = rng.random() < lambda_mix
        mean = np.zeros(d) if zero_centered else center
        out.append(Perturbation.from_vector(mean + sigma * rng.standard_normal(d)))
    return out


def _log_normal(u: np.ndarray, mean: np.ndarray, sigma: float) -> float:
    d = u.size
    diff = u - mean
    return -0.5 * d * math.log(2.0 * math.pi * sigma * sigma) - float(diff @ diff) / (
        2.0 * sigma * sigma
    )


def proposal_log_density(
    u: Perturbation | np.ndarray,
    grad_hint: np.ndarray | None,
    sigma: float,
    lambda_mix: float,
) -> float:
    """Log-density of the mixture proposal, via a stable two-term log-sum."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    vec = u.u if isinstance(u, Perturbation) else np.asarray(u, dtype=np.float64)
    if grad_hint is None:
        lambda_mix = 1.0
    if lambda_mix >= 1.0:
        return _log_normal(vec, np.zeros(vec.size), sigma)
    guided = _log_normal(vec, -np.asarray(grad_hint, dtype=np.float64), sigma)
    if lambda_mix <= 0.0:
        return guided
    terms = (
        math.log1p(-lambda_mix) + guided,
        math.log(lambda_mix) + _log_normal(vec, np.zeros(vec.size), sigma),
    )
    hi = max(terms)
    return hi + math.log(math.exp(terms[0] - hi) + math.exp(terms[1] - hi))


def make_candidate(
    u: Perturbation,
    val_loss_at_u: float,
    base_loss: float,
    tau: float,
    log_q: float,
) -> MgsCandidate:
    """Bundle a sampled update with its target and proposal log terms."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if np.isfinite(val_loss_at_u) and np.isfinite(base_loss):
        log_p = -(val_loss_at_u - base_loss) / tau
    else:
        log_p = -math.inf  # poisoned candidate: zero weight
    return MgsCandidate(u=u, val_loss_at_u=float(val_loss_at_u), log_p_tilde=log_p, log_q=log_q)


def normalized_weights(log_weights: np.ndarray) -> np.ndarray:
    hi = np.max(log_weights)
    if not np.isfinite(hi):
        raise EstimatorError("all candidate weights vanished (non-finite losses)")
    w = np.exp(log_weights - hi)
    return w / w.sum()


def mgs_update(
    candidates: Sequence[MgsCandidate], tau: float
) -> tuple[Perturbation, MgsDiagnostics]:
    """Self-normalized importance-sampling update over the candidate batch.

    `tau` is the temperature the candidates' log_p_tilde was built with; the
    fold over candidates runs in index order so results are deterministic.
    """
    if len(candidates) < 1:
        raise ValueError("need at least one candidate")
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    log_w = np.array([c.log_p_tilde - c.log_q for c in candidates])
    weights = normalized_weights(log_w)
    for c, w in zip(candidates, weights):
        c.weight_normalized = float(w)
    u_star = weights[0] * candidates[0].u.u
    for c, w in zip(candidates[1:], weights[1:]):
        u_star = u_star + w * c.u.u
    ess = 1.0 / float(np.sum(weights * weights))
    diag = MgsDiagnostics(ess=ess, esr=ess / len(candidates), weights=weights)
    return Perturbation.from_vector(u_star), diag


def prop1_direction_check(
    a: np.ndarray,
    tau: float,
    sigma: float,
    n: int,
    rng: np.random.Generator,
) -> float:
    """Cosine between one update on the linear loss a.alpha and -a.

    Uses the zero-centered proposal so the test isolates the target
    distribution; as n grows the update aligns with the negative gradient.
    """
    a = np.asarray(a, dtype=np.float64)
    norm_a = float(np.linalg.norm(a))
    if norm_a == 0.0:
        raise ValueError("direction check is undefined for a zero gradient")
    alpha = np.zeros(a.size)
    base_loss = float(a @ alpha)
    us = propose(rng, alpha, None, sigma, 1.0, n)
    candidates = [
        make_candidate(
            u,
            val_loss_at_u=float(a @ (alpha + u.u)),
            base_loss=base_loss,
            tau=tau,
            log_q=proposal_log_density(u, None, sigma, 1.0),
        )
        for u in us
    ]
    u_star, _ = mgs_update(candidates, tau)
    return float(u_star.u @ (-a) / (np.linalg.norm(u_star.u) * norm_a))
