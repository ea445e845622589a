"""Stability functions of MP schemes on the linear test problem.

The Jacobian of a conservative MP map at the steady state ``y*`` has
eigenvalues 1 (eigenvector ``y*``) and ``R`` (eigenvector ``(1, -1)``).
Because the test matrix has eigenvalue -1 for every theta, ``R`` is a
function of ``z = -dt`` only. A step size is compatible with
non-overshooting behaviour only while ``R(-dt) >= 0``; the first zero
of ``R`` on the negative axis is the Lyapunov bound.

``R`` is available three ways: closed-form rationals for a small
catalog, the MPDeC recurrence over the coefficient matrix, and a
finite-difference Jacobian of the actual one-step map.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from .pds import TestProblem
from .schemes import SchemeConfig, SchemeKind, StepContext, step
from .subtimesteps import NodeFamily, theta_matrix


class NotInCatalogError(LookupError):
    pass


class StabilityMode(str, enum.Enum):
    CLOSED = "closed"
    RECURRENCE = "recurrence"
    JACOBIAN = "jacobian"

    @classmethod
    def parse(cls, value) -> "StabilityMode":
        if isinstance(value, cls):
            return value
        aliases = {"closed_form": "closed", "closed-form": "closed"}
        text = str(value).lower()
        return cls(aliases.get(text, text))


@dataclass(frozen=True)
class RationalFn:
    """``R(z) = numerator(z) / denominator(z)``, coefficients ascending."""

    numerator: tuple
    denominator: tuple
    factored: str = ""

    def __post_init__(self):
        if not any(self.denominator):
            raise ValueError("denominator is identically zero")

    def __call__(self, z):
        z = np.asarray(z)
        return npoly.polyval(z, self.numerator) / npoly.polyval(z, self.denominator)

    @classmethod
    def from_factors(cls, numerator, scale: float, factors, label: str = "") -> "RationalFn":
        """Denominator ``scale * prod(f ** k)`` for ``(f, k)`` in ``factors``."""
        den = np.array([float(scale)])
        for coeffs, power in factors:
            den = npoly.polymul(den, npoly.polypow(np.asarray(coeffs, dtype=float), power))
        num = tuple(float(c) for c in numerator)
        return cls(num, tuple(float(c) for c in den), label)

    def zeros(self) -> np.ndarray:
        return npoly.polyroots(self.numerator)

    def poles(self) -> np.ndarray:
        return npoly.polyroots(self.denominator)


# ascending coefficients; R(0) = 1 for all of them

_MPDEC3_NUM = (-5184, 16416, -16452, 3096, 1830, -331)

_MPDEC4_EQ_NUM = (
    1934917632,
    -12415721472,
    34026780672,
    -51295431168,
    45088151040,
    -22031034912,
    4329437784,
    823521161,
    -534268140,
    64784148,
    1805344,
)

# K = 4 sweeps over the three Lobatto nodes (0, 1/2, 1)
_MPDEC4_GL_NUM = (-373248, 1772928, -3273696, 2787912, -832680, -167724, 101238, 895)

_SSPMPRK43_NUM = (
    1.0,
    -3.349136322977521,
    2.049225690609540,
    0.6815805312568625,
    -0.5093985705698671,
)
_SSPMPRK43_DEN = (
    1.0,
    -4.349136322977523,
    5.898362013587063,
    -3.208879987508106,
    0.6087426554481902,
)


def has_closed_form(scheme: SchemeConfig) -> bool:
    try:
        closed_form(scheme)
    except NotInCatalogError:
        return False
    return True


def closed_form(scheme: SchemeConfig) -> RationalFn:
    """Closed-form stability function for catalog schemes."""
    if scheme.kind is SchemeKind.MPRK22:
        a = scheme.alpha
        return RationalFn.from_factors(
            (2.0, -2.0 * a, -1.0), 2.0, [((1.0, -a), 1), ((1.0, -1.0), 1)],
            "2(1 - alpha z)(1 - z)",
        )
    if scheme.kind is SchemeKind.MPDEC:
        p, fam = scheme.order, scheme.family
        if p == 2:
            return RationalFn.from_factors((2.0, -2.0, -1.0), 2.0, [((1.0, -1.0), 2)], "2(1 - z)^2")
        if p == 3:
            return RationalFn.from_factors(
                _MPDEC3_NUM, 36.0, [((-12.0, 7.0), 2), ((-1.0, 1.0), 3)],
                "36(7z - 12)^2 (z - 1)^3",
            )
        if p == 4 and fam is NodeFamily.EQ:
            return RationalFn.from_factors(
                _MPDEC4_EQ_NUM, 1536.0,
                [((-36.0, 17.0), 3), ((-3.0, 2.0), 3), ((-1.0, 1.0), 4)],
                "1536(17z - 36)^3 (2z - 3)^3 (z - 1)^4",
            )
        if p == 4 and fam is NodeFamily.GL:
            return RationalFn.from_factors(
                _MPDEC4_GL_NUM, 216.0, [((-1.0, 1.0), 4), ((-12.0, 7.0), 3)],
                "216(z - 1)^4 (7z - 12)^3",
            )
    if scheme.kind is SchemeKind.EXT and scheme.name == "sspmprk43" and not scheme.params:
        return RationalFn(_SSPMPRK43_NUM, _SSPMPRK43_DEN)
    raise NotInCatalogError(f"no closed-form stability function for {scheme.identifier}")


def mpdec_recurrence(p: int, family, z):
    """Stability function of MPDeC(p) through the DeC sweep recurrence.

    ``z`` may be a scalar or array, real or complex. At a pole the result
    is non-finite.
    """
    th = theta_matrix(p, family)
    vals = th.values
    M, K = th.M, th.K
    neg = 0.5 * (vals - np.abs(vals))
    absum = np.abs(vals).sum(axis=1)

    z = np.asarray(z)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    dtype = np.result_type(z.dtype, float)
    z = z.astype(dtype)
    dens = [1.0 - z * absum[m - 1] for m in range(1, M + 1)]
    real_neg = np.isreal(z) & (z.real < 0)
    for den in dens:
        if np.any(den.real[real_neg] < 1.0):
            raise ArithmeticError("recurrence denominator below 1 on the negative real axis")

    one = np.ones_like(z)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        R = [one] + [(1.0 + 2.0 * z * neg[m - 1].sum()) / dens[m - 1] for m in range(1, M + 1)]
        for _ in range(2, K + 1):
            new = [one]
            for m in range(1, M + 1):
                row = vals[m - 1]
                acc = 1.0 + row[0] * z
                for j in range(1, M + 1):
                    if j != m:
                        acc = acc + z * row[j] * R[j]
                off = absum[m - 1] - abs(row[m]) - 2.0 * neg[m - 1, m]
                acc = acc - z * off * R[m]
                new.append(acc / dens[m - 1])
            R = new
    out = R[M]
    return out[0] if scalar else out


def _finite_difference_R(scheme: SchemeConfig, problem: TestProblem, dt: float, h: float) -> float:
    ctx = StepContext(problem.as_pds(), dt)
    ystar = problem.steady_state()
    ybar = np.array([1.0, -1.0])

    def central(hh):
        d = (step(scheme, ctx, ystar + hh * ybar) - step(scheme, ctx, ystar - hh * ybar)) / (2.0 * hh)
        return 0.5 * float(d @ ybar)

    # one Richardson level removes the O(h^2) term
    return (4.0 * central(0.5 * h) - central(h)) / 3.0


def _default_h(problem: TestProblem) -> float:
    return 1e-6 * float(np.max(problem.steady_state()))


def jacobian_R(scheme: SchemeConfig, theta: float, dt: float, h: float | None = None) -> float:
    """``R(-dt)`` from a central difference of the one-step map along ``(1, -1)``."""
    problem = TestProblem(theta)
    if not dt > 0:
        raise ValueError("dt must be positive")
    if h is None:
        h = _default_h(problem)
    if not 0 < h < min(theta, 1.0 - theta) / 4:
        raise ValueError(f"h={h} outside (0, min(theta, 1 - theta)/4)")
    return _finite_difference_R(scheme, problem, dt, h)


@dataclass(frozen=True)
class EigenDiagnostics:
    jacobian: np.ndarray
    R: float
    fixed_residual: float
    eigen_residual: float

    def ok(self, tol: float = 1e-6) -> bool:
        return self.fixed_residual <= tol and self.eigen_residual <= tol


def check_eigenstructure(scheme: SchemeConfig, theta: float, dt: float, h: float = 1e-6) -> EigenDiagnostics:
    """Full 2x2 finite-difference Jacobian at ``y*`` and its eigen-residuals."""
    problem = TestProblem(theta)
    if not 0 < h < min(theta, 1.0 - theta) / 4:
        raise ValueError(f"h={h} outside (0, min(theta, 1 - theta)/4)")
    ctx = StepContext(problem.as_pds(), dt)
    ystar = problem.steady_state()

    def column(k, hh):
        e = np.zeros(2)
        e[k] = hh
        return (step(scheme, ctx, ystar + e) - step(scheme, ctx, ystar - e)) / (2.0 * hh)

    J = np.column_stack([(4.0 * column(k, 0.5 * h) - column(k, h)) / 3.0 for k in range(2)])
    ybar = np.array([1.0, -1.0])
    R = 0.5 * float(J @ ybar @ ybar)
    return EigenDiagnostics(
        jacobian=J,
        R=R,
        fixed_residual=float(np.max(np.abs(J @ ystar - ystar))),
        eigen_residual=float(np.max(np.abs(J @ ybar - R * ybar))),
    )


def default_mode(scheme: SchemeConfig) -> StabilityMode:
    if has_closed_form(scheme):
        return StabilityMode.CLOSED
    if scheme.kind is SchemeKind.MPDEC:
        return StabilityMode.RECURRENCE
    return StabilityMode.JACOBIAN


@dataclass(frozen=True)
class StabilityEvaluator:
    """``R(z)`` for one scheme through one evaluation route.

    Jacobian mode only accepts real ``z < 0`` (it runs the scheme with
    ``dt = -z`` on the test problem with the given theta).
    """

    scheme: SchemeConfig
    mode: StabilityMode = StabilityMode.CLOSED
    theta: float = 0.3
    h: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mode", StabilityMode.parse(self.mode))
        if self.mode is StabilityMode.CLOSED:
            closed_form(self.scheme)
        elif self.mode is StabilityMode.RECURRENCE and self.scheme.kind is not SchemeKind.MPDEC:
            raise NotInCatalogError(f"recurrence mode needs an MPDeC scheme, got {self.scheme.identifier}")

    def __call__(self, z):
        if self.mode is StabilityMode.CLOSED:
            return closed_form(self.scheme)(z)
        if self.mode is StabilityMode.RECURRENCE:
            return mpdec_recurrence(self.scheme.order, self.scheme.family, z)
        zs = np.asarray(z, dtype=float)
        if np.any(zs >= 0):
            raise ValueError("jacobian mode evaluates R only for real z < 0")
        out = np.array([jacobian_R(self.scheme, self.theta, -float(v), self.h) for v in zs.ravel()])
        return out.reshape(zs.shape) if zs.ndim else float(out[0])


@dataclass(frozen=True)
class LyapunovBound:
    """First ``dt > 0`` with ``R(-dt) = 0``.

    ``dt0`` is ``inf`` when ``R`` keeps its sign up to ``scan_limit``;
    ``status`` is ``"ok"``, ``"inf"`` or ``"pole"`` (non-finite value
    met before any sign change, located at ``pole_at``).
    """

    scheme: str
    dt0: float
    bracket: tuple
    scan_limit: float
    mode: str
    status: str = "ok"
    pole_at: float | None = None
    points_per_decade: int = 2000
    extra: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.dt0)


def lyapunov_dt0(
    scheme: SchemeConfig,
    mode=None,
    scan_limit: float = 1e6,
    dt_min: float = 1e-3,
    points_per_decade: int = 2000,
    tol: float = 1e-10,
    theta: float = 0.3,
) -> LyapunovBound:
    """Scan ``R(-dt)`` on a log grid over ``[dt_min, scan_limit]`` and bisect
    the first sign change down to a bracket of width ``tol``."""
    mode = default_mode(scheme) if mode is None else StabilityMode.parse(mode)
    evaluator = StabilityEvaluator(scheme, mode, theta=theta)
    decades = math.log10(scan_limit / dt_min)
    n = max(int(math.ceil(decades * points_per_decade)) + 1, 2)
    dts = np.logspace(math.log10(dt_min), math.log10(scan_limit), n)
    vals = np.asarray(evaluator(-dts), dtype=float)

    def R(dt):
        return float(evaluator(np.array([-dt]))[0])

    common = dict(scheme=scheme.identifier, scan_limit=scan_limit, mode=mode.value,
                  points_per_decade=points_per_decade)

    lo = hi = None
    finite = np.isfinite(vals)
    if finite[0] and vals[0] <= 0:
        lo, hi = 0.0, float(dts[0])
    else:
        for i in range(n - 1):
            if not finite[i + 1]:
                return LyapunovBound(dt0=math.nan, bracket=(float(dts[i]), float(dts[i + 1])),
                                     status="pole", pole_at=float(dts[i + 1]), **common)
            if vals[i + 1] == 0.0:
                d = float(dts[i + 1])
                return LyapunovBound(dt0=d, bracket=(d, d), **common)
            if vals[i] * vals[i + 1] < 0:
                lo, hi = float(dts[i]), float(dts[i + 1])
                break
    if lo is None:
        return LyapunovBound(dt0=math.inf, bracket=(float(dts[-1]), math.inf), status="inf", **common)

    rlo = R(lo) if lo > 0 else 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        rm = R(mid)
        if rm == 0.0:
            lo = hi = mid
            break
        if (rm > 0) == (rlo > 0):
            lo, rlo = mid, rm
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    # a sign change through a pole also brackets; a true zero leaves R tiny
    if not abs(R(mid)) <= 1e-6:
        return LyapunovBound(dt0=math.nan, bracket=(lo, hi), status="pole", pole_at=mid, **common)
    return LyapunovBound(dt0=mid, bracket=(lo, hi), **common)


def mprk22_bound(alpha: float) -> float:
    """Analytic first zero ``alpha + sqrt(alpha^2 + 2)`` for MPRK22(alpha)."""
    return alpha + math.sqrt(alpha * alpha + 2.0)
