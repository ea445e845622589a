"""Production-destruction systems and the two-species linear test problem.

A PDS with ``I`` species evolves as

    y_i' = sum_j p_ij(y) - d_ij(y),

with ``p_ij = d_ji`` (conservation) and ``d_ij -> 0`` as ``y_i -> 0``
(positivity). The production and destruction callables return full
``I x I`` matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

MatrixFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PdsSystem:
    """Conservative, positive production-destruction system.

    Parameters
    ----------
    dimension : int
        Number of species ``I``.
    production, destruction : callable
        Map a state of length ``I`` to an ``I x I`` array whose entry
        ``(i, j)`` is ``p_ij(y)`` (resp. ``d_ij(y)``).
    name : str
        Label used in diagnostics.
    """

    dimension: int
    production: MatrixFn
    destruction: MatrixFn
    name: str = "pds"

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be positive, got {self.dimension}")

    def rhs(self, y: np.ndarray) -> np.ndarray:
        """Right-hand side ``sum_j p_ij - d_ij``."""
        y = np.asarray(y, dtype=float)
        return self.production(y).sum(axis=1) - self.destruction(y).sum(axis=1)


def linear_pds(rates: np.ndarray, name: str = "linear") -> PdsSystem:
    """Build a linear PDS from a rate matrix.

    ``rates[i, j] >= 0`` (``i != j``) is the rate at which species ``j``
    feeds species ``i``, so ``p_ij(y) = rates[i, j] * y_j`` and
    ``d_ij(y) = rates[j, i] * y_i``. The diagonal is ignored.
    """
    k = np.array(rates, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError("rate matrix must be square")
    np.fill_diagonal(k, 0.0)
    if np.any(k < 0):
        raise ValueError("off-diagonal rates must be nonnegative")
    kt = k.T.copy()

    def production(y):
        return k * y[None, :]

    def destruction(y):
        return kt * y[:, None]

    return PdsSystem(k.shape[0], production, destruction, name=name)


@dataclass(frozen=True)
class TestProblem:
    """Linear test problem ``y' = A_theta y`` with

    ``A_theta = [[-theta, 1 - theta], [theta, -(1 - theta)]]``.

    Its nonzero eigenvalue is -1 for every ``theta``, with eigenvector
    ``(1, -1)``; the kernel is spanned by the steady state
    ``(1 - theta, theta)``.
    """

    __test__ = False  # not a pytest class

    theta: float

    def __post_init__(self):
        if not (0.0 < self.theta < 1.0):
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")

    @property
    def matrix(self) -> np.ndarray:
        th = self.theta
        return np.array([[-th, 1.0 - th], [th, -(1.0 - th)]])

    def as_pds(self) -> PdsSystem:
        return as_pds(self)

    def steady_state(self, total: float = 1.0) -> np.ndarray:
        return steady_state(self, total)

    def exact_solution(self, y0, t: float) -> np.ndarray:
        return exact_solution(self, y0, t)


def as_pds(problem: TestProblem) -> PdsSystem:
    """PDS view of the test problem: ``p_12 = d_21 = (1-theta) y_2``,
    ``d_12 = p_21 = theta y_1``."""
    th = problem.theta
    return linear_pds(
        np.array([[0.0, 1.0 - th], [th, 0.0]]), name=f"test_problem(theta={th!r})"
    )


def steady_state(problem: TestProblem, total: float = 1.0) -> np.ndarray:
    if not total > 0:
        raise ValueError("total mass must be positive")
    return total * np.array([1.0 - problem.theta, problem.theta])


def exact_solution(problem: TestProblem, y0, t: float) -> np.ndarray:
    """Closed-form solution ``y* + c exp(-t) (1, -1)``.

    ``y*`` carries the mass of ``y0`` and ``c`` is the component of
    ``y0 - y*`` along ``(1, -1)``.
    """
    y0 = check_state(y0, dimension=2)
    if t < 0:
        raise ValueError("t must be nonnegative")
    ystar = steady_state(problem, y0.sum())
    c = 0.5 * ((y0[0] - ystar[0]) - (y0[1] - ystar[1]))
    decay = np.exp(-t) * c
    return ystar + decay * np.array([1.0, -1.0])


def check_state(y, dimension: int | None = None, floor: float = 1e-300) -> np.ndarray:
    """Validate a state vector: finite and strictly positive (``> floor``)."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError(f"state must be a vector, got shape {y.shape}")
    if dimension is not None and y.shape[0] != dimension:
        raise ValueError(f"expected {dimension} species, got {y.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"state has non-finite entries: {y}")
    if np.any(y <= floor):
        raise ValueError(f"state must be strictly positive, got {y}")
    return y
