"""Outer search loop gluing problems, the inner solver, and estimators.

Each iteration snapshots the inner weights, evaluates candidates through
M-step inner solves from that snapshot (so evaluation order cannot matter),
applies the estimator's update to alpha, and then advances the live weights.
Gradient-descent baselines run the same loop with the update replaced by
-xi times the frozen or unrolled gradient.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import Estimator, SearchConfig
from .estimators.gld import GldStep, gld_step
from .estimators.mgs import (
    MgsDiagnostics,
    make_candidate,
    mgs_update,
    proposal_log_density,
    propose,
)
from .estimators.rs import EstimatorError, RsEstimate, phi_factor, rs_step
from .inner import InnerSolveError, advance_inner, solve_inner
from .rng import (
    STREAM_ALPHA_INIT,
    STREAM_DIRECTIONS,
    STREAM_OMEGA_INIT,
    orthonormal_pair,
    rng_split,
    sample_gaussian,
    sample_sphere,
)
from .types import ArchParams, Perturbation

__all__ = [
    "DartsDiagnostics",
    "IterationRecord",
    "SearchTrajectory",
    "LandscapeGrid",
    "TraceResult",
    "run_search",
    "landscape_grid",
    "trajectory_trace",
]

log = logging.getLogger(__name__)


def candidate_map():
    """Map function honoring the ZOBILEVEL_THREADS cap (0 or 1 = serial).

    Results always come back in input order, so parallel evaluation is
    indistinguishable from serial execution.
    """
    threads = int(os.environ.get("ZOBILEVEL_THREADS", "0") or 0)
    if threads <= 1:
        return map

    def pooled(fn, xs):
        xs = list(xs)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, xs))

    return pooled


@dataclass
class DartsDiagnostics:
    grad_norm: float


@dataclass
class IterationRecord:
    iteration: int
    alpha: ArchParams
    u_star: np.ndarray
    val_loss: float
    train_loss: float
    elapsed: float
    diagnostics: object | None = None


@dataclass
class SearchTrajectory:
    estimator: Estimator
    records: list[IterationRecord] = field(default_factory=list)
    error: str | None = None

    @property
    def final_alpha(self) -> np.ndarray:
        return self.records[-1].alpha.values

    def alphas(self) -> np.ndarray:
        return np.stack([r.alpha.values for r in self.records])

    def verify(self) -> list[str]:
        """Invariant checks embedded in every run; empty list = clean."""
        problems = []
        for prev, rec in zip(self.records, self.records[1:]):
            if not np.array_equal(prev.alpha.values + rec.u_star, rec.alpha.values):
                problems.append(f"iteration {rec.iteration}: alpha chain broken")
        for rec in self.records:
            diag = rec.diagnostics
            if isinstance(diag, MgsDiagnostics):
                n = diag.weights.size
                if not (1.0 - 1e-9 <= diag.ess <= n + 1e-9):
                    problems.append(f"iteration {rec.iteration}: ess {diag.ess} outside [1, {n}]")
                if not (0.0 < diag.esr <= 1.0 + 1e-12):
                    problems.append(f"iteration {rec.iteration}: esr {diag.esr} outside (0, 1]")
                if abs(diag.weights.sum() - 1.0) > 1e-10:
                    problems.append(f"iteration {rec.iteration}: weights do not sum to 1")
            if isinstance(diag, GldStep) and rec.val_loss > rec.diagnostics.loss_before:
                problems.append(f"iteration {rec.iteration}: direct-search step increased the loss")
        return problems


def _bilevel_loss(problem, snapshot, cfg: SearchConfig):
    """L(alpha) = val loss at the M-step inner estimate from the snapshot.

    Inner-solver failures surface as NaN so a bad candidate poisons only
    itself, never the whole run.
    """

    def loss_at(alpha: np.ndarray) -> float:
        try:
            report = solve_inner(problem, snapshot, alpha, cfg.m, cfg.inner_lr, cfg.inner_momentum)
        except InnerSolveError:
            return math.nan
        value = problem.val_loss(report.omega_star, alpha)
        return value if np.isfinite(value) else math.nan

    return loss_at


def _xi_at(cfg: SearchConfig, t: int) -> float:
    if not cfg.xi_cosine_decay or cfg.budget <= 0:
        return cfg.xi
    return cfg.xi * 0.5 * (1.0 + math.cos(math.pi * t / cfg.budget))


def _rs_iteration(problem, cfg, snapshot, loss_at, alpha, t, map_fn):
    d = alpha.size
    us = []
    for i in range(cfg.n):
        rng = rng_split(cfg.seed, t * cfg.n + i)
        if cfg.rs_distribution == "gaussian":
            us.append(sample_gaussian(rng, d))
        else:
            us.append(sample_sphere(rng, d, 1.0))
    phi = phi_factor(cfg.rs_distribution, d)
    u_star, estimate = rs_step(
        loss_at, alpha, us, cfg.mu, phi, _xi_at(cfg, t), cfg.rs_distribution, map_fn
    )
    return u_star, estimate, None


def _mgs_iteration(problem, cfg, snapshot, loss_at, alpha, t, map_fn):
    base_loss = loss_at(alpha)
    if problem.has_alpha_val_grad:
        grad_hint = problem.grad_alpha_val(snapshot.omega, alpha)
        lam = cfg.lambda_mix
    else:
        log.warning("problem exposes no alpha gradient; using the zero-centered proposal only")
        grad_hint = None
        lam = 1.0
    us = []
    for i in range(cfg.n):
        rng = rng_split(cfg.seed, t * cfg.n + i)
        us.append(propose(rng, alpha, grad_hint, cfg.sigma, lam, 1)[0])
    losses = list(map_fn(loss_at, (alpha + u.u for u in us)))
    candidates = [
        make_candidate(
            u,
            val_loss_at_u=loss,
            base_loss=base_loss,
            tau=cfg.tau,
            log_q=proposal_log_density(u, grad_hint, cfg.sigma, lam),
        )
        for u, loss in zip(us, losses)
    ]
    u_star, diag = mgs_update(candidates, cfg.tau)
    return u_star, diag, None


def _gld_iteration(problem, cfg, snapshot, loss_at, alpha, t, map_fn):
    rng = rng_split(cfg.seed, t)
    u_star, step = gld_step(
        loss_at, alpha, cfg.gld_r, cfg.gld_R, rng, cfg.samples_per_radius, map_fn
    )
    return u_star, step, step.loss_after


def _darts_iteration(problem, cfg, snapshot, loss_at, alpha, t, map_fn):
    from .inner import darts_grad

    order = cfg.darts_order or (1 if cfg.estimator is Estimator.DARTS1 else 2)
    grad = darts_grad(problem, snapshot.omega, alpha, order, cfg.xi, cfg.hvp_scale)
    if not np.all(np.isfinite(grad)):
        raise EstimatorError("baseline gradient is non-finite")
    u_star = Perturbation.from_vector(-cfg.xi * grad)
    return u_star, DartsDiagnostics(grad_norm=float(np.linalg.norm(grad))), None


_ITERATIONS = {
    Estimator.RS: _rs_iteration,
    Estimator.MGS: _mgs_iteration,
    Estimator.GLD: _gld_iteration,
    Estimator.DARTS1: _darts_iteration,
    Estimator.DARTS2: _darts_iteration,
}


def run_search(problem, cfg: SearchConfig, alpha0: np.ndarray | None = None) -> SearchTrajectory:
    """Run the zero-order search loop for cfg.budget iterations."""
    if alpha0 is None:
        alpha0 = problem.initial_alpha(rng_split(cfg.seed, STREAM_ALPHA_INIT))
    alpha = np.asarray(alpha0, dtype=np.float64).copy()
    state = problem.init_inner_state(rng_split(cfg.seed, STREAM_OMEGA_INIT))
    iteration_fn = _ITERATIONS[cfg.estimator]
    map_fn = candidate_map()
    trajectory = SearchTrajectory(estimator=cfg.estimator)

    start = time.perf_counter()
    initial_loss = _bilevel_loss(problem, state, cfg)(alpha)
    trajectory.records.append(
        IterationRecord(
            iteration=0,
            alpha=ArchParams(alpha),
            u_star=np.zeros_like(alpha),
            val_loss=initial_loss,
            train_loss=problem.train_loss(state.omega, alpha),
            elapsed=time.perf_counter() - start,
        )
    )

    for t in range(cfg.budget):
        tic = time.perf_counter()
        snapshot = state.snapshot()
        loss_at = _bilevel_loss(problem, snapshot, cfg)
        try:
            u_star, diag, val_new = iteration_fn(problem, cfg, snapshot, loss_at, alpha, t, map_fn)
            alpha = alpha + u_star.u
            arch = ArchParams(alpha)  # validates finiteness
            if val_new is None:
                val_new = loss_at(alpha)
            advance_inner(
                problem, state, alpha, cfg.resolved_post_update_steps, cfg.inner_lr, cfg.inner_momentum
            )
        except (EstimatorError, InnerSolveError, ValueError) as exc:
            trajectory.error = f"iteration {t}: {exc}"
            log.error("search truncated: %s", trajectory.error)
            break
        trajectory.records.append(
            IterationRecord(
                iteration=t + 1,
                alpha=arch,
                u_star=u_star.u,
                val_loss=val_new,
                train_loss=problem.train_loss(state.omega, alpha),
                elapsed=time.perf_counter() - tic,
                diagnostics=diag,
            )
        )
    return trajectory


# -- landscapes and traces -------------------------------------------------


@dataclass
class LandscapeGrid:
    a_coords: np.ndarray
    b_coords: np.ndarray
    values: np.ndarray        # values[i, j] = L(center + a_i v1 + b_j v2)
    v1: np.ndarray
    v2: np.ndarray
    mode: str
    seed: int
    step: float
    bounds: tuple[float, float]

    @property
    def direction_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.v1.tobytes())
        digest.update(self.v2.tobytes())
        return digest.hexdigest()

    @property
    def argmin_indices(self) -> tuple[int, int]:
        flat = np.nanargmin(self.values)
        i, j = np.unravel_index(flat, self.values.shape)
        return int(i), int(j)

    @property
    def argmin_coords(self) -> tuple[float, float]:
        i, j = self.argmin_indices
        return float(self.a_coords[i]), float(self.b_coords[j])

    def project(self, alpha: np.ndarray, center: np.ndarray) -> tuple[float, float]:
        delta = np.asarray(alpha, float) - np.asarray(center, float)
        return float(delta @ self.v1), float(delta @ self.v2)


def _grid_coords(lo: float, hi: float, step: float) -> np.ndarray:
    """Integer multiples of `step` inside [lo, hi] (0 included when valid)."""
    if lo > hi:
        raise ValueError("grid bounds must be ordered")
    if step <= 0.0:
        raise ValueError("grid step must be positive")
    k_min = math.ceil(lo / step - 1e-9)
    k_max = math.floor(hi / step + 1e-9)
    if k_min > k_max:
        raise ValueError("grid contains no points")
    return np.array([k * step for k in range(k_min, k_max + 1)])


def landscape_grid(
    problem,
    alpha_center: np.ndarray,
    mode: str,
    bounds: tuple[float, float] = (-1.0, 1.0),
    step: float = 0.02,
    seed: int = 0,
    m: int = 10,
    inner_lr: float = 0.025,
    inner_momentum: float = 0.9,
    snapshot=None,
) -> LandscapeGrid:
    """Validation-loss grid over a seeded pair of orthonormal directions.

    mode "first_order" keeps the snapshot weights frozen at every grid
    point; mode "finetuned" re-estimates the inner optimum with m steps per
    point. Both modes draw the direction pair from the same seed stream, so
    sharing the seed shares the directions bit-exactly. Inner failures are
    recorded as NaN cells.
    """
    if mode not in ("first_order", "finetuned"):
        raise ValueError("mode must be 'first_order' or 'finetuned'")
    alpha_center = np.asarray(alpha_center, dtype=np.float64)
    v1, v2 = orthonormal_pair(rng_split(seed, STREAM_DIRECTIONS), alpha_center.size)
    if snapshot is None:
        snapshot = problem.init_inner_state(rng_split(seed, STREAM_OMEGA_INIT))
    a_coords = _grid_coords(bounds[0], bounds[1], step)
    b_coords = a_coords.copy()
    values = np.empty((a_coords.size, b_coords.size))
    for i, a in enumerate(a_coords):
        for j, b in enumerate(b_coords):
            alpha = alpha_center + a * v1 + b * v2
            if mode == "first_order":
                value = problem.val_loss(snapshot.omega, alpha)
            else:
                try:
                    report = solve_inner(problem, snapshot, alpha, m, inner_lr, inner_momentum)
                    value = problem.val_loss(report.omega_star, alpha)
                except InnerSolveError:
                    value = math.nan
            values[i, j] = value
    return LandscapeGrid(
        a_coords=a_coords,
        b_coords=b_coords,
        values=values,
        v1=v1,
        v2=v2,
        mode=mode,
        seed=seed,
        step=step,
        bounds=(float(bounds[0]), float(bounds[1])),
    )


@dataclass
class TraceResult:
    paths: dict[str, np.ndarray]          # estimator -> (T+1, 2) plane coordinates
    trajectories: dict[str, SearchTrajectory]
    v1: np.ndarray
    v2: np.ndarray
    alpha0: np.ndarray

    def project(self, alpha: np.ndarray) -> tuple[float, float]:
        delta = np.asarray(alpha, float) - self.alpha0
        return float(delta @ self.v1), float(delta @ self.v2)


def trajectory_trace(
    problem,
    cfg: SearchConfig,
    estimators: list[str | Estimator],
    budget: int | None = None,
    alpha0: np.ndarray | None = None,
) -> TraceResult:
    """Optimization paths of several estimators in a shared landscape plane.

    All runs share alpha0, the seed, and the direction pair; each path is
    the per-iteration alpha projected onto the plane, starting at (0, 0).
    """
    if alpha0 is None:
        alpha0 = problem.initial_alpha(rng_split(cfg.seed, STREAM_ALPHA_INIT))
    alpha0 = np.asarray(alpha0, dtype=np.float64)
    v1, v2 = orthonormal_pair(rng_split(cfg.seed, STREAM_DIRECTIONS), alpha0.size)
    paths: dict[str, np.ndarray] = {}
    trajectories: dict[str, SearchTrajectory] = {}
    for name in estimators:
        est = Estimator(name) if not isinstance(name, Estimator) else name
        sub_cfg = replace(cfg, estimator=est, darts_order=0)
        if budget is not None:
            sub_cfg = replace(sub_cfg, budget=budget)
        traj = run_search(problem, sub_cfg, alpha0=alpha0)
        deltas = traj.alphas() - alpha0
        paths[est.value] = np.stack([deltas @ v1, deltas @ v2], axis=1)
        trajectories[est.value] = traj
    return TraceResult(paths=paths, trajectories=trajectories, v1=v1, v2=v2, alpha0=alpha0)
