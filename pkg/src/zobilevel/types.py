"""Shared value types for architecture parameters and sampled updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _as_float_vector(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a flat vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ArchParams:
    """Flat vector of architecture parameters (the outer variable)."""

    values: np.ndarray

    def __post_init__(self):
        arr = _as_float_vector(self.values)
        if not np.all(np.isfinite(arr)):
            raise ValueError("architecture parameters must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def d(self) -> int:
        return self.values.size

    def shifted(self, u: np.ndarray) -> "ArchParams":
        return ArchParams(self.values + u)


@dataclass(frozen=True)
class Perturbation:
    """A sampled update direction u with its cached Euclidean norm."""

    u: np.ndarray
    radius: float

    def __post_init__(self):
        arr = _as_float_vector(self.u)
        object.__setattr__(self, "u", arr)
        norm = float(np.linalg.norm(arr))
        if abs(self.radius - norm) > 1e-12 * max(1.0, norm):
            raise ValueError(
                f"cached radius {self.radius} does not match ||u|| = {norm}"
            )

    @classmethod
    def from_vector(cls, u) -> "Perturbation":
        arr = _as_float_vector(u)
        return cls(u=arr, radius=float(np.linalg.norm(arr)))

    @classmethod
    def zero(cls, d: int) -> "Perturbation":
        return cls(u=np.zeros(d), radius=0.0)

    @property
    def d(self) -> int:
        return self.u.size


@dataclass
class InnerState:
    """Operation weights plus momentum buffers; snapshot/restore is bit-exact."""

    omega: np.ndarray
    momentum: np.ndarray
    step_count: int = 0

    def __post_init__(self):
        self.omega = _as_float_vector(self.omega)
        self.momentum = _as_float_vector(self.momentum)
        if self.momentum.size != self.omega.size:
            raise ValueError("momentum buffer must match omega length")
        if self.step_count < 0:
            raise ValueError("step_count must be nonnegative")

    @classmethod
    def fresh(cls, omega) -> "InnerState":
        omega = _as_float_vector(omega)
        return cls(omega=omega.copy(), momentum=np.zeros_like(omega), step_count=0)

    def snapshot(self) -> "InnerState":
        return InnerState(
            omega=self.omega.copy(),
            momentum=self.momentum.copy(),
            step_count=self.step_count,
        )

    def restore(self, other: "InnerState") -> None:
        if other.omega.size != self.omega.size:
            raise ValueError("cannot restore from a state of different size")
        self.omega = other.omega.copy()
        self.momentum = other.momentum.copy()
        self.step_count = other.step_count
