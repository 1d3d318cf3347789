"""Blow-up criterion, Riccati comparison and the lifespan bound.

The momentum moment satisfies ``W(t) >= U0 + int_0^t c3 W^2 / (1 + c2 s)^5 ds``
with ``c2 = sigma/R`` and ``c3 = 3 / (4 pi max(rho0) R^5)``.  The comparison
function ``V`` solves ``V' = c3 V^2 / (1 + c2 t)^5``, ``V(0) = U0``; separating
variables,

    1/V(t) = 1/U0 - (c3 / (4 c2)) (1 - (1 + c2 t)^-4),

which blows up at the lifespan bound ``T*`` when ``U0 > 4 c2 / c3``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .initial_data import InitialData
from .model import Parameters


class NoBoundError(ValueError):
    pass


def constants(R: float, rho_max: float, sigma_est: float):
    """``(c2, c3)``."""
    return sigma_est / R, 3.0 / (4.0 * math.pi * rho_max * R ** 5)


def compute_U0(data: InitialData, params: Parameters) -> float:
    return data.W0 - params.lam * (data.H0 + data.rho0_max * data.u0_norm2)


@dataclass
class CriterionResult:
    satisfied: bool
    U0: float
    threshold: float
    W0: float
    W0_required: float     # the W0 >= ... form of the same criterion
    c2: float
    c3: float


def check_criterion(data: InitialData, params: Parameters, sigma_est: float) -> CriterionResult:
    c2, c3 = constants(data.R, data.rho0_max, sigma_est)
    U0 = compute_U0(data, params)
    thr = 4.0 * c2 / c3
    rhs = (params.lam * (data.H0 + data.rho0_max * data.u0_norm2)
           + 16.0 * data.R ** 4 * sigma_est * math.pi * data.rho0_max / 3.0)
    return CriterionResult(bool(U0 > thr), U0, thr, data.W0, rhs, c2, c3)


def blowup_bound_Tstar(U0: float, c2: float, c3: float) -> float:
    """Time at which the comparison function diverges."""
    if not (c2 > 0 and c3 > 0):
        raise ValueError("c2 and c3 must be positive")
    if not U0 > 4.0 * c2 / c3:
        raise NoBoundError(f"U0 = {U0} does not exceed 4 c2/c3 = {4.0 * c2 / c3}")
    ratio = 4.0 * c2 / (c3 * U0)
    # (1 - ratio)^(-1/4) - 1, written to keep precision when ratio is small
    return math.expm1(-0.25 * math.log1p(-ratio)) / c2


def V_closed_form(t, U0: float, c2: float, c3: float):
    """Comparison function; ``inf`` at and after ``T*``.  Any sign of ``U0``."""
    t = np.asarray(t, dtype=float)
    if U0 == 0.0:
        return np.zeros_like(t)
    if c2 == 0.0:
        K = c3 * t
    else:
        K = c3 / (4.0 * c2) * -np.expm1(-4.0 * np.log1p(c2 * t))
    inv = 1.0 / U0 - K
    with np.errstate(divide="ignore"):
        V = np.where(inv > 0 if U0 > 0 else inv < 0, 1.0 / inv, np.inf)
    return V


@dataclass
class VSeries:
    t: np.ndarray
    V: np.ndarray
    diverged: bool
    t_divergence: float | None = None


def integrate_V(U0: float, c2: float, c3: float, t_grid, blowup_level: float = 1e12,
                rtol: float = 1e-13) -> VSeries:
    """Numerically integrate the comparison ODE on ``t_grid``.

    Integration stops when ``V`` exceeds ``blowup_level``; the returned series
    is truncated there and flagged.
    """
    if not U0 > 0:
        raise ValueError("integrate_V needs U0 > 0")
    t_grid = np.asarray(t_grid, dtype=float)

    def f(t, y):
        return [c3 / (1.0 + c2 * t) ** 5 * y[0] * y[0]]

    def hit(t, y):
        return y[0] - blowup_level
    hit.terminal = True

    if c3 == 0.0:
        return VSeries(t_grid, np.full_like(t_grid, U0), False)
    sol = solve_ivp(f, (t_grid[0], t_grid[-1]), [U0], method="DOP853", t_eval=t_grid,
                    rtol=rtol, atol=1e-300, events=hit, dense_output=False)
    diverged = sol.status == 1
    t_div = float(sol.t_events[0][0]) if diverged else None
    return VSeries(sol.t, sol.y[0], diverged, t_div)


def divergence_time(U0, c2, c3, blowup_level=1e12, t_max=None) -> float:
    """First time the numerically integrated ``V`` reaches ``blowup_level``."""
    if t_max is None:
        t_max = 2.0 * blowup_bound_Tstar(U0, c2, c3)
    s = integrate_V(U0, c2, c3, [0.0, t_max], blowup_level)
    if not s.diverged:
        raise RuntimeError("no divergence before t_max")
    return s.t_divergence


@dataclass
class Comparison:
    passed: bool
    margin: np.ndarray
    min_margin: float
    tolerance: float


def compare_W_V(t, W, V, tol_rel: float = 1e-3, t_V=None) -> Comparison:
    """``margin = W - V`` over the window where ``V`` is finite."""
    W = np.asarray(W, dtype=float)
    V = np.asarray(V, dtype=float)
    if t_V is not None and not np.array_equal(np.asarray(t_V), np.asarray(t)):
        import warnings
        warnings.warn("W and V on different time grids; interpolating V")
        V = np.interp(t, t_V, V)
    margin = W - V
    ok = np.isfinite(V)
    tol = tol_rel * float(np.max(np.abs(W))) if W.size else 0.0
    mm = float(np.min(margin[ok])) if np.any(ok) else 0.0
    return Comparison(bool(mm >= -tol), margin, mm, tol)


@dataclass
class BlowupReport:
    c2: float
    c3: float
    U0: float
    criterion_satisfied: bool
    T_star: float | None
    sigma_est: float
    threshold: float
    W0: float
    H0: float
    u0_norm2: float
    rho0_max: float
    R: float
    V_t: list = field(default_factory=list)
    V: list = field(default_factory=list)

    def summary_line(self) -> str:
        if self.criterion_satisfied:
            return f"criterion satisfied: lifespan <= T* = {self.T_star!r}"
        return "criterion not satisfied: no lifespan bound"


def blowup_report(data: InitialData, params: Parameters, sigma_est: float,
                  n_points: int = 101) -> BlowupReport:
    crit = check_criterion(data, params, sigma_est)
    T_star = None
    Vt, V = [], []
    if crit.satisfied:
        T_star = blowup_bound_Tstar(crit.U0, crit.c2, crit.c3)
        tg = np.linspace(0.0, 0.99 * T_star, n_points)
        Vt, V = tg.tolist(), V_closed_form(tg, crit.U0, crit.c2, crit.c3).tolist()
    return BlowupReport(crit.c2, crit.c3, crit.U0, crit.satisfied, T_star, sigma_est,
                        crit.threshold, data.W0, data.H0, data.u0_norm2, data.rho0_max,
                        data.R, Vt, V)
