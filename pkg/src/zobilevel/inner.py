"""Estimates of the inner optimum: M-step fine-tuning and unrolled baselines.

`solve_inner` runs momentum SGD on the train loss from a snapshot without
touching it, so candidate evaluations are order-independent. The baseline
gradients reproduce the frozen-weights shortcut (order 1) and the one-step
unroll whose curvature term is estimated by a central difference along the
validation gradient direction (order 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import InnerState

__all__ = [
    "InnerSolveError",
    "InnerSolveReport",
    "solve_inner",
    "advance_inner",
    "darts2_hvp_difference",
    "darts_grad",
]

# Below this validation-gradient norm the difference direction is undefined
# and the curvature correction is skipped.
DEGENERATE_GRAD_NORM = 1e-12


class InnerSolveError(RuntimeError):
    """Non-finite loss or gradient during inner descent."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (inner iteration {iteration})")
        self.iteration = iteration


@dataclass
class InnerSolveReport:
    omega_star: np.ndarray
    iterations_run: int
    final_train_loss: float
    initial_train_loss: float


def advance_inner(
    problem,
    state: InnerState,
    alpha: np.ndarray,
    m: int,
    lr: float,
    momentum: float,
) -> None:
    """Run m momentum-SGD steps on the train loss, mutating `state`."""
    if m < 0:
        raise ValueError("iteration count must be nonnegative")
    for k in range(m):
        g = problem.grad_omega_train(state.omega, alpha, step=state.step_count)
        if not np.all(np.isfinite(g)):
            raise InnerSolveError("non-finite training gradient", k)
        state.momentum = momentum * state.momentum + g
        state.omega = state.omega - lr * state.momentum
        state.step_count += 1


def solve_inner(
    problem,
    snapshot: InnerState,
    alpha: np.ndarray,
    m: int,
    lr: float,
    momentum: float,
) -> InnerSolveReport:
    """Estimate the inner optimum for `alpha` starting from `snapshot`.

    The snapshot is copied, never mutated; m=0 returns the snapshot weights
    unchanged (the frozen-weights approximation).
    """
    state = snapshot.snapshot()
    initial = problem.train_loss(state.omega, alpha)
    if not np.isfinite(initial):
        raise InnerSolveError("non-finite training loss at the snapshot", 0)
    advance_inner(problem, state, alpha, m, lr, momentum)
    final = problem.train_loss(state.omega, alpha)
    if not np.isfinite(final):
        raise InnerSolveError("non-finite training loss after descent", m)
    return InnerSolveReport(
        omega_star=state.omega,
        iterations_run=m,
        final_train_loss=final,
        initial_train_loss=initial,
    )


def darts2_hvp_difference(
    problem,
    omega: np.ndarray,
    omega_prime: np.ndarray,
    alpha: np.ndarray,
    scale: float = 0.01,
) -> tuple[np.ndarray, bool]:
    """Mixed second-derivative product estimated by a central difference.

    Returns (vector over alpha, degenerate). The perturbation size is
    scale / ||grad_omega val(omega', alpha)||, so the step along the
    normalized direction has fixed length `scale`. A vanishing validation
    gradient yields the zero vector with degenerate=True.
    """
    g_val = problem.grad_omega_val(omega_prime, alpha)
    norm = float(np.linalg.norm(g_val))
    if norm < DEGENERATE_GRAD_NORM:
        return np.zeros(problem.d_alpha), True
    eps = scale / norm
    ga_plus = problem.grad_alpha_train(omega + eps * g_val, alpha)
    ga_minus = problem.grad_alpha_train(omega - eps * g_val, alpha)
    return (ga_plus - ga_minus) / (2.0 * eps), False


def darts_grad(
    problem,
    omega: np.ndarray,
    alpha: np.ndarray,
    order: int,
    xi: float,
    scale: float = 0.01,
) -> np.ndarray:
    """Gradient-descent baseline direction for the outer variable.

    order=1 freezes the weights; order=2 takes one unrolled step of length
    xi and subtracts the difference-method curvature correction.
    """
    if order == 1:
        return problem.grad_alpha_val(omega, alpha)
    if order != 2:
        raise ValueError("order must be 1 or 2")
    g_train = problem.grad_omega_train(omega, alpha)
    omega_prime = omega - xi * g_train
    direct = problem.grad_alpha_val(omega_prime, alpha)
    hvp, _ = darts2_hvp_difference(problem, omega, omega_prime, alpha, scale)
    return direct - xi * hvp
