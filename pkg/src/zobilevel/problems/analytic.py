"""Quadratic bi-level problems with a closed-form inner optimum.

train(omega, alpha) = 0.5 * ||omega - A alpha - b||^2, so the inner optimum
is omega*(alpha) = A alpha + b exactly, and the effective outer objective
val(omega*(alpha), alpha) = 0.5 * ||A alpha + b - t||^2 + 0.5 * reg * ||alpha||^2
has its minimizer at the solution of (A^T A + reg I) alpha = A^T (t - b).
These problems serve as verification oracles for the search loop.
"""

from __future__ import annotations

import numpy as np

from ..rng import STREAM_PROBLEM_GEN, rng_split, sample_sphere
from ..types import InnerState
from .base import BilevelProblem

# Default offset of the search start from the optimum; keeps desk-scale runs
# inside the basin the short-budget acceptance runs assume.
INIT_OFFSET = 0.4
TARGET_NORM = 1.2


class AnalyticQuadraticProblem(BilevelProblem):
    def __init__(self, A: np.ndarray, b: np.ndarray, t: np.ndarray, reg: float = 0.0):
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise ValueError("A must be a matrix")
        self.A = A
        self.b = np.asarray(b, dtype=np.float64).reshape(A.shape[0])
        self.t = np.asarray(t, dtype=np.float64).reshape(A.shape[0])
        if reg < 0.0:
            raise ValueError("reg must be nonnegative")
        self.reg = float(reg)
        gram = A.T @ A + self.reg * np.eye(A.shape[1])
        if np.linalg.eigvalsh(gram).min() < 1e-12:
            raise ValueError(
                "A^T A + reg*I is singular; the outer optimum is not unique"
            )
        self.alpha_star = np.linalg.solve(gram, A.T @ (self.t - self.b))

    @property
    def d_alpha(self) -> int:
        return self.A.shape[1]

    @property
    def d_omega(self) -> int:
        return self.A.shape[0]

    def omega_star(self, alpha: np.ndarray) -> np.ndarray:
        """Closed-form inner optimum."""
        return self.A @ alpha + self.b

    def train_loss(self, omega, alpha) -> float:
        r = omega - self.A @ alpha - self.b
        return 0.5 * float(r @ r)

    def val_loss(self, omega, alpha) -> float:
        r = omega - self.t
        return 0.5 * float(r @ r) + 0.5 * self.reg * float(alpha @ alpha)

    def grad_omega_train(self, omega, alpha, step=None) -> np.ndarray:
        return omega - self.A @ alpha - self.b

    def grad_alpha_train(self, omega, alpha) -> np.ndarray:
        return -self.A.T @ (omega - self.A @ alpha - self.b)

    def grad_omega_val(self, omega, alpha) -> np.ndarray:
        return omega - self.t

    def grad_alpha_val(self, omega, alpha) -> np.ndarray:
        return self.reg * alpha

    def outer_gradient(self, alpha: np.ndarray) -> np.ndarray:
        """Exact gradient of val(omega*(alpha), alpha)."""
        return self.A.T @ (self.A @ alpha + self.b - self.t) + self.reg * alpha

    def init_inner_state(self, rng: np.random.Generator) -> InnerState:
        return InnerState.fresh(rng.standard_normal(self.d_omega))

    def initial_alpha(self, rng: np.random.Generator) -> np.ndarray:
        offset = sample_sphere(rng, self.d_alpha, INIT_OFFSET)
        return self.alpha_star + offset.u


def make_analytic(
    d_alpha: int,
    d_omega: int,
    seed: int,
    reg: float = 0.1,
    cond: float = 4.0,
) -> AnalyticQuadraticProblem:
    """Build a seeded random instance with a controlled singular-value spread.

    A has singular values log-spaced across a factor of `cond`; t is placed so
    the outer optimum sits near norm TARGET_NORM, making "converged to zero"
    (the frozen-weights failure mode) clearly distinguishable from "converged
    to the optimum".
    """
    if d_alpha < 1 or d_omega < 1:
        raise ValueError("dimensions must be >= 1")
    if cond < 1.0:
        raise ValueError("cond must be >= 1")
    rng = rng_split(seed, STREAM_PROBLEM_GEN)
    k = min(d_alpha, d_omega)
    u_mat, _ = np.linalg.qr(rng.standard_normal((d_omega, d_omega)))
    v_mat, _ = np.linalg.qr(rng.standard_normal((d_alpha, d_alpha)))
    if k > 1:
        s = np.geomspace(np.sqrt(cond), 1.0 / np.sqrt(cond), k)
    else:
        s = np.array([1.0])
    A = u_mat[:, :k] @ np.diag(s) @ v_mat[:, :k].T
    b = rng.standard_normal(d_omega)
    target = sample_sphere(rng, d_alpha, TARGET_NORM).u
    t = A @ target + b
    return AnalyticQuadraticProblem(A=A, b=b, t=t, reg=reg)
