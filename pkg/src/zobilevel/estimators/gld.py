"""Direct search over spheres at geometrically spaced radii.

Each step samples one candidate per ladder radius, takes the strict argmin
over {current point} union {candidates}, and stays put on ties, so the loss
sequence is non-increasing by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..rng import sample_sphere
from ..types import Perturbation
from .rs import EstimatorError

__all__ = ["GldStep", "radius_ladder", "gld_step", "condition_number"]

log = logging.getLogger(__name__)

LossFn = Callable[[np.ndarray], float]


@dataclass
class GldStep:
    radii: list[float]
    chosen: int | None        # index into the candidate list, None = stay
    loss_before: float
    loss_after: float

    @property
    def chosen_radius(self) -> float:
        return 0.0 if self.chosen is None else self.radii[self.chosen]


def radius_ladder(r: float, big_r: float) -> list[float]:
    """Radii big_r * 2^-k for k = 0 .. floor(log2(big_r / r))."""
    if not 0.0 < r <= big_r:
        raise ValueError("radii must satisfy 0 < r <= R")
    k_max = int(math.floor(math.log2(big_r / r)))
    return [big_r * 2.0 ** (-k) for k in range(k_max + 1)]


def gld_step(
    loss_at: LossFn,
    alpha: np.ndarray,
    r: float,
    big_r: float,
    rng: np.random.Generator,
    samples_per_radius: int = 1,
    map_fn=map,
) -> tuple[Perturbation, GldStep]:
    """One direct-search step; returns the applied update (zero = stay).

    Candidates with non-finite losses are treated as +inf and logged. The
    argmin fold runs in ladder order, so results are deterministic.
    """
    if samples_per_radius < 1:
        raise ValueError("samples_per_radius must be >= 1")
    alpha = np.asarray(alpha, dtype=np.float64)
    current = float(loss_at(alpha))
    if not np.isfinite(current):
        raise EstimatorError("loss at the current point must be finite")
    ladder = radius_ladder(r, big_r)
    radii = []
    candidates = []
    for radius in ladder:
        for _ in range(samples_per_radius):
            candidates.append(sample_sphere(rng, alpha.size, radius))
            radii.append(radius)
    losses = list(map_fn(loss_at, (alpha + c.u for c in candidates)))
    best = current
    chosen = None
    for i, loss in enumerate(losses):
        if not np.isfinite(loss):
            log.warning("discarding candidate %d at radius %g (loss %s)", i, radii[i], loss)
            continue
        if loss < best:
            best = float(loss)
            chosen = i
    step = GldStep(radii=radii, chosen=chosen, loss_before=current, loss_after=best)
    if chosen is None:
        return Perturbation.zero(alpha.size), step
    return candidates[chosen], step


def condition_number(
    loss_at: LossFn, alpha: np.ndarray, probes: Sequence[np.ndarray]
) -> float:
    """Largest normalized loss-change ratio over the probe directions."""
    alpha = np.asarray(alpha, dtype=np.float64)
    alpha_norm = float(np.linalg.norm(alpha))
    base = float(loss_at(alpha))
    if alpha_norm == 0.0:
        raise ValueError("condition number is undefined at alpha = 0")
    if base == 0.0:
        raise ValueError("condition number is undefined where the loss is 0")
    if len(probes) == 0:
        raise ValueError("need at least one probe")
    best = 0.0
    for delta in probes:
        delta = np.asarray(delta, dtype=np.float64)
        dn = float(np.linalg.norm(delta))
        if dn == 0.0:
            raise ValueError("probe directions must be nonzero")
        ratio = abs(loss_at(alpha + delta) - base) * alpha_norm / (dn * abs(base))
        best = max(best, ratio)
    return best
