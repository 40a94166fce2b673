"""Bi-level problem interface.

A problem exposes a train loss over inner weights and a validation loss
evaluated at those weights, both parameterized by the outer architecture
vector. Losses and gradients are pure functions of (omega, alpha), so
evaluations on distinct inner-state copies can run concurrently.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..types import InnerState


class BilevelProblem(ABC):
    """Evaluation interface for nested train/validation objectives."""

    #: Whether grad_alpha_val is implemented (the guided proposal needs it).
    has_alpha_val_grad: bool = True

    @property
    @abstractmethod
    def d_alpha(self) -> int: ...

    @property
    @abstractmethod
    def d_omega(self) -> int: ...

    @abstractmethod
    def train_loss(self, omega: np.ndarray, alpha: np.ndarray) -> float: ...

    @abstractmethod
    def val_loss(self, omega: np.ndarray, alpha: np.ndarray) -> float: ...

    @abstractmethod
    def grad_omega_train(
        self, omega: np.ndarray, alpha: np.ndarray, step: int | None = None
    ) -> np.ndarray:
        """Gradient of the train loss w.r.t. omega.

        `step` selects the minibatch for problems with a batch schedule and
        is ignored by full-batch problems.
        """

    @abstractmethod
    def grad_alpha_train(self, omega: np.ndarray, alpha: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def grad_omega_val(self, omega: np.ndarray, alpha: np.ndarray) -> np.ndarray: ...

    def grad_alpha_val(self, omega: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        raise NotImplementedError("problem does not expose an alpha gradient")

    @abstractmethod
    def init_inner_state(self, rng: np.random.Generator) -> InnerState: ...

    @abstractmethod
    def initial_alpha(self, rng: np.random.Generator) -> np.ndarray: ...
