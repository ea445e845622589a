"""Overshoot detection and the empirical non-oscillation step bound.

A run started at ``y0 = (1 - eps, eps)`` overshoots when a step carries
``y_2`` from one side of ``theta`` to the other (``y_1`` likewise around
``1 - theta``). The numerical bound of a scheme is the smallest ``dt``
that makes any probe of a ``(theta, eps)`` grid overshoot.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .pds import TestProblem, exact_solution
from .schemes import SchemeConfig, StepContext, step
from .stability import jacobian_R

CROSSING_TOL = 1e-10
EXCLUSION_BAND = 1e-6
BISECTION_TOL = 1e-4
DT_START = 1e-2
DT_MAX = 1e3
DEFAULT_THETA_GRID = (0.01,) + tuple(round(0.1 * k, 10) for k in range(1, 10)) + (0.99,)
# eps -> 0 limit and near-steady-state offsets added to the base probes
FAR_EPS = 1e-10
NEAR_OFFSET = 1e-3
MULTISTEP_STEPS = 100

Propagator = Callable[[TestProblem, np.ndarray, float], np.ndarray]


def default_eps_grid(theta: float) -> list[float]:
    """Initial conditions on both sides of ``theta``, far and near.

    The extremes ``FAR_EPS`` and ``1 - FAR_EPS`` probe the nearly
    degenerate start where the smallest thresholds sit; the offsets
    ``theta (1 -+ NEAR_OFFSET)`` probe the linearised regime in which a
    negative stability function forces an overshoot.
    """
    return [
        FAR_EPS,
        theta / 100,
        theta / 10,
        theta / 2,
        theta * 1.5,
        min(theta * 2, (1 + theta) / 2),
        1 - (1 - theta) / 100,
        1 - FAR_EPS,
        theta * (1 - NEAR_OFFSET),
        theta * (1 + NEAR_OFFSET),
    ]


def probe_grid(theta_grid=None, eps_grid=None) -> list[tuple[float, float]]:
    """All admissible ``(theta, eps)`` pairs, sorted.

    ``eps_grid`` is either ``None`` (the default per-theta rule) or a fixed
    list applied to every theta. Pairs inside the exclusion band around
    the steady state, or outside ``(0, 1)``, are dropped.
    """
    thetas = DEFAULT_THETA_GRID if theta_grid is None else theta_grid
    pairs = set()
    for th in thetas:
        th = float(th)
        if not 0 < th < 1:
            raise ValueError(f"theta grid value {th} outside (0, 1)")
        for eps in (default_eps_grid(th) if eps_grid is None else eps_grid):
            eps = float(eps)
            if 0 < eps < 1 and abs(eps - th) >= EXCLUSION_BAND:
                pairs.add((th, eps))
    if not pairs:
        raise ValueError("probe grid is empty")
    return sorted(pairs)


@dataclass(frozen=True)
class OvershootProbe:
    theta: float
    epsilon: float
    n_steps: int = 1

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if abs(self.epsilon - self.theta) < EXCLUSION_BAND:
            raise ValueError("epsilon too close to theta: the run starts at the steady state")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def initial_state(self) -> np.ndarray:
        return np.array([1.0 - self.epsilon, self.epsilon])


def _crossed(prev: np.ndarray, new: np.ndarray, theta: float, tau: float) -> bool:
    if prev[1] < theta:
        return new[1] > theta + tau or new[0] < 1.0 - theta - tau
    if prev[1] > theta:
        return new[1] < theta - tau or new[0] > 1.0 - theta + tau
    return False


def exact_propagator(problem: TestProblem, y: np.ndarray, dt: float) -> np.ndarray:
    return exact_solution(problem, y, dt)


def overshoots(
    scheme: SchemeConfig | None,
    probe: OvershootProbe,
    dt: float,
    *,
    tau: float = CROSSING_TOL,
    propagator: Propagator | None = None,
) -> bool:
    """Run ``probe.n_steps`` steps and report whether any step crosses the
    steady state by more than ``tau``.

    ``propagator(problem, y, dt)`` replaces the scheme when given (used to
    check the exact flow).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    problem = TestProblem(probe.theta)
    if propagator is None:
        ctx = StepContext(problem.as_pds(), dt)

        def advance(y):
            return step(scheme, ctx, y)
    else:
        def advance(y):
            return propagator(problem, y, dt)

    y = probe.initial_state
    tol = tau * y.sum()
    for _ in range(probe.n_steps):
        new = advance(y)
        if _crossed(y, new, probe.theta, tol):
            return True
        y = new
    return False


def overshoot_threshold(
    scheme: SchemeConfig,
    probe: OvershootProbe,
    dt_start: float = DT_START,
    dt_max: float = DT_MAX,
    tol: float = BISECTION_TOL,
) -> float:
    """Smallest overshooting ``dt`` for one probe (``inf`` below ``dt_max``).

    Doubles ``dt`` from ``dt_start`` until the first overshoot, then
    bisects the last bracket to width ``tol`` and returns its upper end.
    """
    lo, hi = 0.0, min(dt_start, dt_max)
    while not overshoots(scheme, probe, hi):
        if hi >= dt_max:
            return math.inf
        lo, hi = hi, min(2.0 * hi, dt_max)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if overshoots(scheme, probe, mid):
            hi = mid
        else:
            lo = mid
    return hi


def _threshold_task(args):
    scheme, theta, eps, n_steps, dt_start, dt_max, tol = args
    probe = OvershootProbe(theta, eps, n_steps)
    return overshoot_threshold(scheme, probe, dt_start, dt_max, tol)


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get("PATANKAR_LAB_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def parallel_map(fn, tasks: Sequence, workers: int | None = None) -> list:
    """Order-preserving map, in worker processes when more than one is allowed."""
    n = min(worker_count(workers), len(tasks))
    if n <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * n))))


def _fmt(value):
    if value is None:
        return None
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


@dataclass
class BoundReport:
    """Numerical and Lyapunov step bounds of one scheme, with the settings
    that produced them."""

    scheme: str
    numerical_dt0: float
    lyapunov_dt0: float | None = None
    argmin: tuple | None = None
    n_steps: int = 1
    theta_grid: list = field(default_factory=list)
    eps_grid: str | list = "default"
    probes: int = 0
    bisection_tol: float = BISECTION_TOL
    dt_start: float = DT_START
    dt_max: float = DT_MAX
    crossing_tol: float = CROSSING_TOL
    exclusion_band: float = EXCLUSION_BAND
    scan_limit: float | None = None
    lyapunov_mode: str | None = None
    multistep_dt0: float | None = None
    multistep_steps: int | None = None
    status: str = "ok"

    def to_dict(self) -> dict:
        out = asdict(self)
        return {k: _fmt(v) for k, v in out.items()}


def numerical_dt0(
    scheme: SchemeConfig,
    theta_grid=None,
    eps_grid=None,
    n_steps: int = 1,
    dt_max: float = DT_MAX,
    *,
    dt_start: float = DT_START,
    tol: float = BISECTION_TOL,
    workers: int | None = None,
) -> BoundReport:
    """Minimum overshoot threshold over the probe grid.

    Ties are broken by the smallest ``(theta, eps)``, so the result does
    not depend on how the work was scheduled.
    """
    if not dt_max > 0:
        raise ValueError("dt_max must be positive")
    pairs = probe_grid(theta_grid, eps_grid)
    tasks = [(scheme, th, eps, n_steps, dt_start, dt_max, tol) for th, eps in pairs]
    values = parallel_map(_threshold_task, tasks, workers)
    best = min(zip(values, pairs))
    dt0, argmin = best
    return BoundReport(
        scheme=scheme.identifier,
        numerical_dt0=float(dt0),
        argmin=argmin if math.isfinite(dt0) else None,
        n_steps=n_steps,
        theta_grid=sorted({th for th, _ in pairs}),
        eps_grid="default" if eps_grid is None else [float(e) for e in eps_grid],
        probes=len(pairs),
        bisection_tol=tol,
        dt_start=dt_start,
        dt_max=dt_max,
    )


@dataclass
class OvershootCheck:
    """Outcome of searching for a first-step overshoot where ``R(-dt) < 0``.

    ``passed`` with the overshooting ``epsilon``, or the full search
    ``trace`` of ``(epsilon, y2_after_one_step)`` when none was found.
    """

    scheme: str
    theta: float
    dt: float
    R: float
    passed: bool
    epsilon: float | None = None
    trace: list = field(default_factory=list)


def verify_theorem1(scheme: SchemeConfig, theta: float, dt: float, max_halvings: int = 40) -> OvershootCheck:
    """Look for an initial state near ``y*`` that overshoots in one step.

    Requires ``R(-dt) < -1e-3``. Candidates are ``theta * (1 -+ 2^-k)``
    for ``k = 1..max_halvings``.
    """
    R = jacobian_R(scheme, theta, dt)
    if not R < -1e-3:
        raise ValueError(f"R(-{dt}) = {R:.6g} is not clearly negative; nothing to verify")
    problem = TestProblem(theta)
    ctx = StepContext(problem.as_pds(), dt)
    trace = []
    for k in range(1, max_halvings + 1):
        for sign in (-1.0, 1.0):
            eps = theta * (1.0 + sign * 2.0 ** -k)
            if not 0 < eps < 1 or eps == theta:
                continue
            y0 = np.array([1.0 - eps, eps])
            y1 = step(scheme, ctx, y0)
            trace.append((eps, float(y1[1])))
            if _crossed(y0, y1, theta, CROSSING_TOL):
                return OvershootCheck(scheme.identifier, theta, dt, R, True, eps, trace)
    return OvershootCheck(scheme.identifier, theta, dt, R, False, None, trace)
