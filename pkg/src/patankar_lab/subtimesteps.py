"""Subtimestep nodes and Lagrange-integral coefficients for MPDeC.

For nodes ``0 = t^0 < ... < t^M = 1`` the coefficient ``theta[m, r]`` is
the integral of the ``r``-th Lagrange basis polynomial over ``[0, t^m]``,
for ``m = 1..M`` and ``r = 0..M``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

# entries this small are quadrature noise on exact zeros
_ZERO_SNAP = 1e-15


class NodeFamily(str, enum.Enum):
    EQ = "eq"
    GL = "gl"

    @classmethod
    def parse(cls, value) -> "NodeFamily":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown node family {value!r}; expected 'eq' or 'gl'") from None


def subtimestep_count(p: int, family) -> int:
    """``M = max(p - 1, 1)`` for EQ, ``ceil(p / 2)`` for GL."""
    family = NodeFamily.parse(family)
    if p < 1:
        raise ValueError(f"order must be >= 1, got {p}")
    if family is NodeFamily.EQ:
        return max(p - 1, 1)
    return max(math.ceil(p / 2), 1)


def _lobatto_reference(M: int, tol: float = 1e-14, maxiter: int = 100) -> np.ndarray:
    # Newton on (1 - x^2) P'_M(x) via the Legendre three-term recurrence,
    # starting from the Chebyshev-Gauss-Lobatto points.
    x = -np.cos(np.pi * np.arange(M + 1) / M)
    for _ in range(maxiter):
        P = np.empty((M + 1, M + 1))
        P[:, 0] = 1.0
        P[:, 1] = x
        for k in range(2, M + 1):
            P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
        dx = (x * P[:, M] - P[:, M - 1]) / ((M + 1) * P[:, M])
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    x = np.sort(x)
    x = 0.5 * (x - x[::-1])
    x[0], x[-1] = -1.0, 1.0
    if M % 2 == 0:
        x[M // 2] = 0.0
    return x


@functools.lru_cache(maxsize=None)
def _nodes_cached(family: NodeFamily, M: int) -> tuple:
    if family is NodeFamily.EQ:
        t = np.arange(M + 1) / M
    elif M == 1:
        t = np.array([0.0, 1.0])
    else:
        t = 0.5 * (_lobatto_reference(M) + 1.0)
    return tuple(float(v) for v in t)


def nodes(family, M: int) -> np.ndarray:
    """Return the ``M + 1`` subtimesteps on ``[0, 1]`` in ascending order."""
    family = NodeFamily.parse(family)
    if M < 1:
        raise ValueError(f"need at least one subtimestep, got M={M}")
    return np.array(_nodes_cached(family, int(M)))


@dataclass(frozen=True)
class ThetaMatrix:
    """MPDeC coefficients for order ``p``.

    ``values[m - 1, r]`` holds ``theta_r^m``; ``nodes`` has ``M + 1``
    entries and ``K = p`` correction sweeps are used.
    """

    order: int
    family: NodeFamily
    values: np.ndarray
    nodes: np.ndarray

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.order

    def row(self, m: int) -> np.ndarray:
        """Coefficients of subtimestep ``m`` (1-based, as in the DeC notation)."""
        if not 1 <= m <= self.M:
            raise IndexError(f"row {m} outside 1..{self.M}")
        return self.values[m - 1]


def _lagrange_integrals(t: np.ndarray) -> np.ndarray:
    M = len(t) - 1
    gx, gw = np.polynomial.legendre.leggauss(M + 1)
    out = np.empty((M, M + 1))
    for m in range(1, M + 1):
        xs = 0.5 * (gx + 1.0) * t[m]
        ws = 0.5 * gw * t[m]
        for r in range(M + 1):
            phi = np.ones_like(xs)
            for s in range(M + 1):
                if s != r:
                    phi *= (xs - t[s]) / (t[r] - t[s])
            out[m - 1, r] = ws @ phi
    out[np.abs(out) < _ZERO_SNAP] = 0.0
    return out


@functools.lru_cache(maxsize=None)
def _theta_cached(p: int, family: NodeFamily) -> ThetaMatrix:
    t = nodes(family, subtimestep_count(p, family))
    vals = _lagrange_integrals(t)
    vals.flags.writeable = False
    t.flags.writeable = False
    return ThetaMatrix(order=p, family=family, values=vals, nodes=t)


def theta_matrix(p: int, family) -> ThetaMatrix:
    """Coefficient matrix for MPDeC of order ``p`` (cached, read-only)."""
    family = NodeFamily.parse(family)
    if p < 1:
        raise ValueError(f"order must be >= 1, got {p}")
    return _theta_cached(int(p), family)


def split_theta(value: float) -> tuple[float, float]:
    """Split into ``((v - |v|) / 2, (v + |v|) / 2)``."""
    a = abs(value)
    return 0.5 * (value - a), 0.5 * (value + a)
