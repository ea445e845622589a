"""Bound tables and parameter sweeps, plus their CSV rendering."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .oscillation import (
    BISECTION_TOL,
    DT_MAX,
    BoundReport,
    numerical_dt0,
)
from .schemes import SchemeConfig, SchemeKind, has_step
from .stability import StabilityMode, default_mode, has_closed_form, lyapunov_dt0

# MPRK(4,3,alpha,beta), MPRK(3,2) and SSPMPRK variants listed with SSPMPRK(4,3)
OTHER_SCHEMES = (
    "sspmprk43",
    "mprk32",
    "ext:mprk43ab:2:0.6",
    "ext:mprk43ab:0.9:0.5",
    "ext:mprk43ab:0.5:0.7",
    f"ext:mprk43ab:3:{7 / 15!r}",
    "ext:sspmprk22:0:1",
    "ext:sspmprk22:0:2",
    "ext:sspmprk22:0.4:1",
    "ext:sspmprk22:0.1:4",
)

TABLE_COLUMNS = ("scheme", "p_or_params", "numerical_dt0", "lyapunov_dt0", "status")
SWEEP_COLUMNS = ("param", "numerical_dt0", "lyapunov_dt0", "status")


def format_number(value) -> str:
    """17 significant digits; ``inf`` for unbounded, empty for missing."""
    if value is None:
        return ""
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return f"{value:.17g}"


def has_lyapunov(scheme: SchemeConfig) -> bool:
    return has_closed_form(scheme) or scheme.kind is SchemeKind.MPDEC or has_step(scheme)


@dataclass(frozen=True)
class BoundSettings:
    theta_grid: tuple | None = None
    eps_grid: tuple | None = None
    n_steps: int = 1
    dt_max: float = DT_MAX
    tol: float = BISECTION_TOL
    scan_limit: float = 1e6
    lyapunov_mode: str | None = None
    multistep_steps: int | None = None
    workers: int | None = None


def bound_report(scheme: SchemeConfig, settings: BoundSettings = BoundSettings()) -> BoundReport:
    """Numerical and Lyapunov bounds of one scheme, whichever are computable.

    ``status`` is ``unimplemented`` when the scheme has no registered
    one-step map (the Lyapunov bound is still filled in from a closed form
    if one exists).
    """
    if has_step(scheme):
        report = numerical_dt0(
            scheme, settings.theta_grid, settings.eps_grid, settings.n_steps,
            settings.dt_max, tol=settings.tol, workers=settings.workers,
        )
        if settings.multistep_steps:
            multi = numerical_dt0(
                scheme, settings.theta_grid, settings.eps_grid, settings.multistep_steps,
                settings.dt_max, tol=settings.tol, workers=settings.workers,
            )
            report.multistep_dt0 = multi.numerical_dt0
            report.multistep_steps = settings.multistep_steps
    else:
        report = BoundReport(scheme=scheme.identifier, numerical_dt0=math.nan, status="unimplemented")
    if has_lyapunov(scheme):
        mode = settings.lyapunov_mode
        if mode is None or (mode == StabilityMode.CLOSED.value and not has_closed_form(scheme)):
            mode = default_mode(scheme)
        lyap = lyapunov_dt0(scheme, mode, scan_limit=settings.scan_limit)
        report.lyapunov_dt0 = lyap.dt0
        report.lyapunov_mode = lyap.mode
        report.scan_limit = lyap.scan_limit
        if lyap.status == "pole":
            report.status = "pole"
    return report


@dataclass(frozen=True)
class TableRow:
    scheme: str
    p_or_params: str
    numerical_dt0: float | None
    lyapunov_dt0: float | None
    status: str

    def cells(self) -> list[str]:
        return [
            self.scheme,
            self.p_or_params,
            format_number(None if _nan(self.numerical_dt0) else self.numerical_dt0),
            format_number(self.lyapunov_dt0),
            self.status,
        ]


def _nan(v) -> bool:
    return v is None or (isinstance(v, float) and math.isnan(v))


def _params_label(scheme: SchemeConfig) -> str:
    if scheme.kind is SchemeKind.MPDEC:
        return str(scheme.order)
    if scheme.kind is SchemeKind.MPRK22:
        return repr(scheme.alpha)
    return ":".join(str(p) for p in scheme.params)


def parse_orders(text: str) -> list[int]:
    """``"1..9"``, ``"2,3,5"`` or a mix such as ``"1..3,7"``."""
    out: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ".." in chunk:
            a, b = chunk.split("..", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(chunk))
    if not out or min(out) < 1:
        raise ValueError(f"bad order list {text!r}")
    return out


def table_schemes(family: str, items=None) -> list[SchemeConfig]:
    family = family.lower()
    if family in ("mpdec-eq", "mpdec-gl"):
        orders = parse_orders(items) if isinstance(items, str) else list(items or range(1, 10))
        fam = family.split("-")[1]
        return [SchemeConfig.mpdec(p, fam) for p in orders]
    if family == "other":
        ids = items if items else OTHER_SCHEMES
        if isinstance(ids, str):
            ids = [ids]
        return [SchemeConfig.parse(i) for i in ids]
    raise ValueError(f"unknown table family {family!r}; expected mpdec-eq, mpdec-gl or other")


def table_rows(family: str, items=None, settings: BoundSettings = BoundSettings()) -> list[TableRow]:
    rows = []
    for scheme in table_schemes(family, items):
        rep = bound_report(scheme, settings)
        rows.append(TableRow(scheme.identifier, _params_label(scheme), rep.numerical_dt0, rep.lyapunov_dt0, rep.status))
    return rows


def parse_range(text: str) -> list[float]:
    """``a:b:step`` inclusive of ``b`` (to rounding), values rounded to 12 digits."""
    parts = [float(v) for v in text.split(":")]
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise ValueError(f"range must be a:b:step with a <= b and step > 0, got {text!r}")
    a, b, h = parts
    n = int(math.floor((b - a) / h + 1e-9))
    return [round(a + k * h, 12) for k in range(n + 1)]


@dataclass(frozen=True)
class SweepRow:
    param: float
    numerical_dt0: float | None
    lyapunov_dt0: float | None
    status: str

    def cells(self) -> list[str]:
        num = None if _nan(self.numerical_dt0) else self.numerical_dt0
        return [format_number(self.param), format_number(num), format_number(self.lyapunov_dt0), self.status]


def sweep_rows(family: str, params, settings: BoundSettings = BoundSettings()) -> list[SweepRow]:
    """Bounds over a one-parameter scheme family, sorted by parameter.

    ``mprk22`` sweeps alpha; ``mprk43g`` (gamma) is served through the
    extension registry.
    """
    family = family.lower()
    rows = []
    for value in sorted(float(v) for v in params):
        if family == "mprk22":
            scheme = SchemeConfig.mprk22(value)
        elif family == "mprk43g":
            scheme = SchemeConfig.ext("mprk43g", value)
        else:
            raise ValueError(f"unknown sweep family {family!r}; expected mprk22 or mprk43g")
        rep = bound_report(scheme, settings)
        rows.append(SweepRow(value, rep.numerical_dt0, rep.lyapunov_dt0, rep.status))
    return rows


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row.cells() if hasattr(row, "cells") else row)
    return buf.getvalue()


def theta_csv(theta) -> str:
    M = theta.M
    header = ["m", "t_m"] + [f"theta_{r}" for r in range(M + 1)]
    body = [
        [str(m), format_number(theta.nodes[m])] + [format_number(v) for v in theta.row(m)]
        for m in range(1, M + 1)
    ]
    return to_csv(header, body)


def trajectory_csv(traj: np.ndarray, dt: float) -> str:
    I = traj.shape[1]
    header = ["n", "t"] + [f"y{i + 1}" for i in range(I)] + ["sum"]
    body = [
        [str(n), format_number(n * dt)] + [format_number(v) for v in row] + [format_number(row.sum())]
        for n, row in enumerate(traj)
    ]
    return to_csv(header, body)

