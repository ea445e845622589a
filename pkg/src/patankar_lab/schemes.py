"""One-step modified Patankar maps ``y^{n+1} = g(y^n)``.

Every stage of an MP scheme is a linear system

    y_i^new = y_i + dt * sum_j (P_ij y_j^new / w_j - D_ij y_i^new / w_i)

with nonnegative ``P = D^T`` and positive Patankar weights ``w``. Its
matrix has positive diagonal, nonpositive off-diagonal and unit column
sums, which is what makes the schemes conservative and unconditionally
positive.

Scheme identifiers: ``mprk22:ALPHA``, ``mpdec:P:eq``, ``mpdec:P:gl``,
``sspmprk43`` and ``ext:NAME:PARAM:...``.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .pds import PdsSystem, check_state
from .subtimesteps import NodeFamily, ThetaMatrix, theta_matrix

PIVOT_FLOOR = 1e-30


class SchemeError(RuntimeError):
    """A step could not be completed."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SingularSystemError(SchemeError):
    pass


class UnimplementedSchemeError(SchemeError):
    """Catalog entry whose one-step map has not been provided."""


class SchemeKind(str, enum.Enum):
    MPRK22 = "mprk22"
    MPDEC = "mpdec"
    EXT = "ext"


# catalog entries known by name whose step maps are not built in
KNOWN_EXTENSIONS = ("sspmprk43", "mprk32", "mprk43ab", "mprk43g", "sspmprk22")


def _format_param(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class SchemeConfig:
    kind: SchemeKind
    alpha: float | None = None
    order: int | None = None
    family: NodeFamily | None = None
    name: str | None = None
    params: tuple = ()

    def __post_init__(self):
        if self.kind is SchemeKind.MPRK22:
            if self.alpha is None or not self.alpha >= 0.5:
                raise ValueError(f"MPRK22 needs alpha >= 1/2, got {self.alpha}")
        elif self.kind is SchemeKind.MPDEC:
            if self.order is None or self.order < 1:
                raise ValueError(f"MPDeC needs order >= 1, got {self.order}")
            if self.family is None:
                raise ValueError("MPDeC needs a node family")
        elif not self.name:
            raise ValueError("extension schemes need a name")

    @classmethod
    def mprk22(cls, alpha: float) -> "SchemeConfig":
        return cls(SchemeKind.MPRK22, alpha=float(alpha))

    @classmethod
    def mpdec(cls, order: int, family="eq") -> "SchemeConfig":
        return cls(SchemeKind.MPDEC, order=int(order), family=NodeFamily.parse(family))

    @classmethod
    def ext(cls, name: str, *params) -> "SchemeConfig":
        return cls(SchemeKind.EXT, name=name.lower(), params=tuple(params))

    @classmethod
    def parse(cls, text: str) -> "SchemeConfig":
        """Parse a CLI scheme identifier."""
        parts = text.strip().lower().split(":")
        head = parts[0]
        try:
            if head == "mprk22" and len(parts) == 2:
                return cls.mprk22(float(parts[1]))
            if head == "mpdec" and len(parts) in (2, 3):
                return cls.mpdec(int(parts[1]), parts[2] if len(parts) == 3 else "eq")
            if head == "ext" and len(parts) >= 2:
                return cls.ext(parts[1], *(_parse_number(v) for v in parts[2:]))
            if head in KNOWN_EXTENSIONS:
                return cls.ext(head, *(_parse_number(v) for v in parts[1:]))
        except ValueError as exc:
            raise ValueError(f"bad scheme identifier {text!r}: {exc}") from None
        raise ValueError(f"unknown scheme identifier {text!r}")

    @property
    def identifier(self) -> str:
        if self.kind is SchemeKind.MPRK22:
            return f"mprk22:{self.alpha!r}"
        if self.kind is SchemeKind.MPDEC:
            return f"mpdec:{self.order}:{self.family.value}"
        if self.name in KNOWN_EXTENSIONS and not self.params:
            return self.name
        return ":".join(["ext", self.name, *map(_format_param, self.params)])

    def __str__(self):
        return self.identifier


def _parse_number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


@dataclass(frozen=True)
class StepContext:
    system: PdsSystem
    dt: float

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")


Stepper = Callable[[SchemeConfig, StepContext, np.ndarray], np.ndarray]

_EXTENSIONS: dict[str, Stepper] = {}


def register_extension(name: str, stepper: Stepper) -> None:
    """Attach a one-step map to an extension scheme name.

    ``stepper(config, ctx, y)`` must return the next state; it should be
    conservative and positive like the built-in schemes.
    """
    _EXTENSIONS[name.lower()] = stepper


def has_step(config: SchemeConfig) -> bool:
    return config.kind is not SchemeKind.EXT or config.name in _EXTENSIONS


def solve_patankar_system(matrix, rhs, pivot_floor: float = PIVOT_FLOOR) -> np.ndarray:
    """Gaussian elimination with partial pivoting."""
    a = np.array(matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    n = b.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix shape {a.shape} does not match rhs length {n}")
    if n <= _SMALL_SYSTEM:
        return np.array(_eliminate_lists(a.tolist(), b.tolist(), pivot_floor, matrix, rhs))
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if not abs(a[piv, k]) >= pivot_floor:
            raise _singular(matrix, rhs, k, a[piv, k], pivot_floor)
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            b[[k, piv]] = b[[piv, k]]
        f = a[k + 1 :, k] / a[k, k]
        a[k + 1 :, k:] -= np.outer(f, a[k, k:])
        b[k + 1 :] -= f * b[k]
    x = np.empty(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


# below this size plain float loops beat numpy call overhead
_SMALL_SYSTEM = 8


def _eliminate_lists(a, b, pivot_floor, matrix, rhs):
    n = len(b)
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(a[i][k]))
        if not abs(a[piv][k]) >= pivot_floor:
            raise _singular(matrix, rhs, k, a[piv][k], pivot_floor)
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            b[k], b[piv] = b[piv], b[k]
        rowk = a[k]
        for i in range(k + 1, n):
            f = a[i][k] / rowk[k]
            if f:
                rowi = a[i]
                for j in range(k, n):
                    rowi[j] -= f * rowk[j]
                b[i] -= f * b[k]
    x = [0.0] * n
    for k in range(n - 1, -1, -1):
        acc = b[k]
        for j in range(k + 1, n):
            acc -= a[k][j] * x[j]
        x[k] = acc / a[k][k]
    return x


def _singular(matrix, rhs, column, pivot, pivot_floor):
    return SingularSystemError(
        f"pivot {pivot:.3e} below {pivot_floor:.0e} in column {column}",
        {
            "matrix": np.asarray(matrix, dtype=float).tolist(),
            "rhs": np.asarray(rhs, dtype=float).tolist(),
            "column": column,
        },
    )


def _patankar_solve(prod, dest, weights, dt, rhs):
    # I + dt*(diag(sum_j D_ij)/w_i - P_ij/w_j)
    a = -dt * prod / weights[None, :]
    a[np.diag_indices_from(a)] += 1.0 + dt * dest.sum(axis=1) / weights
    # columns of a sum to one, so the last row may be swapped for mass
    # conservation; this keeps rounding at O(eps) instead of O(dt*eps)
    a[-1] = 1.0
    b = rhs.copy()
    b[-1] = rhs.sum()
    out = solve_patankar_system(a, b)
    if not np.all(np.isfinite(out)):
        raise SchemeError("non-finite stage value", {"matrix": a.tolist(), "rhs": rhs.tolist()})
    return out


def _mprk22_step(alpha: float, system: PdsSystem, dt: float, y: np.ndarray) -> np.ndarray:
    p0 = system.production(y)
    d0 = system.destruction(y)
    y1 = _patankar_solve(alpha * p0, alpha * d0, y, dt, y)
    sigma = y1 ** (1.0 / alpha) * y ** (1.0 - 1.0 / alpha)
    c = 1.0 / (2.0 * alpha)
    prod = (1.0 - c) * p0 + c * system.production(y1)
    dest = (1.0 - c) * d0 + c * system.destruction(y1)
    return _patankar_solve(prod, dest, sigma, dt, y)


@functools.lru_cache(maxsize=None)
def _split_rows(order: int, family: NodeFamily):
    vals = theta_matrix(order, family).values
    return np.where(vals > 0, vals, 0.0), np.where(vals < 0, vals, 0.0)


def _mpdec_step(theta: ThetaMatrix, system: PdsSystem, dt: float, y: np.ndarray) -> np.ndarray:
    pos, neg = _split_rows(theta.order, theta.family)
    M = theta.M
    prev = [y] * (M + 1)
    for _ in range(theta.K):
        P = np.stack([system.production(s) for s in prev])
        D = np.stack([system.destruction(s) for s in prev])
        # a negative coefficient swaps which species weights the term
        prod = np.tensordot(pos, P, axes=1) - np.tensordot(neg, D, axes=1)
        dest = np.tensordot(pos, D, axes=1) - np.tensordot(neg, P, axes=1)
        new = [y]
        for m in range(1, M + 1):
            new.append(_patankar_solve(prod[m - 1], dest[m - 1], prev[m], dt, y))
        prev = new
    return prev[M]


def step(config: SchemeConfig, ctx: StepContext, y) -> np.ndarray:
    """Advance one step of size ``ctx.dt`` from the positive state ``y``."""
    y = check_state(y, dimension=ctx.system.dimension)
    if config.kind is SchemeKind.MPRK22:
        out = _mprk22_step(config.alpha, ctx.system, ctx.dt, y)
    elif config.kind is SchemeKind.MPDEC:
        out = _mpdec_step(theta_matrix(config.order, config.family), ctx.system, ctx.dt, y)
    else:
        stepper = _EXTENSIONS.get(config.name)
        if stepper is None:
            raise UnimplementedSchemeError(f"no one-step map registered for {config.identifier}")
        out = np.asarray(stepper(config, ctx, y), dtype=float)
    if not np.all(out > 0):
        raise SchemeError(
            f"{config.identifier} produced a non-positive state",
            {"y": y.tolist(), "out": out.tolist(), "dt": ctx.dt},
        )
    return out


def integrate(config: SchemeConfig, ctx: StepContext, y0, n_steps: int) -> np.ndarray:
    """Trajectory of ``n_steps`` steps; row 0 is ``y0``."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    y = check_state(y0, dimension=ctx.system.dimension)
    out = np.empty((n_steps + 1, y.shape[0]))
    out[0] = y
    for n in range(n_steps):
        try:
            out[n + 1] = step(config, ctx, out[n])
        except SchemeError as exc:
            diag = dict(exc.diagnostics, step_index=n)
            raise type(exc)(f"step {n} failed: {exc}", diag) from exc
    return out
