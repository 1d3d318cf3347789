"""Integral functionals of radial states and numerical checks of the energy
identity and the functional inequalities behind the blow-up argument.

All integrals are over R^3 and use the grid's midpoint rule with the
``4 pi r^2`` Jacobian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .initial_data import InitialData
from .model import Parameters, energy_terms
from .radial import RadialState, sup_grad_u
from .riccati import V_closed_form, compute_U0, constants

CSV_COLUMNS = ("t", "m", "W", "E", "int_trT", "cum_int_trT", "support_radius",
               "sup_grad_u", "energy_residual", "jensen_margin", "trT_slack",
               "W_ineq_residual", "V_lower")

SUPPORT_TOL = 1e-12


class InsufficientData(ValueError):
    pass


def quad_m(state: RadialState) -> float:
    return state.grid.integrate(state.rho - 1.0)


def quad_W(state: RadialState) -> float:
    return state.grid.integrate(state.rho * state.u * state.grid.centers)


def quad_trT(state: RadialState, params: Parameters) -> float:
    return state.grid.integrate(state.trace_T(params))


def quad_E(state: RadialState, params: Parameters) -> float:
    pe, se = energy_terms(state.rho, params)
    e = 0.5 * state.rho * state.u ** 2 + pe + se + 0.5 * state.trace_T(params)
    return state.grid.integrate(e)


def quad_kinetic2(state: RadialState) -> float:
    """``int rho |u|^2 dx``."""
    return state.grid.integrate(state.rho * state.u ** 2)


def support_radius(state: RadialState, tol: float = SUPPORT_TOL) -> float:
    dev = state.deviation()
    idx = np.nonzero(dev > tol)[0]
    return float(state.grid.centers[idx[-1]]) if idx.size else 0.0


def exterior_deviation(state: RadialState, radius: float) -> float:
    out = state.grid.centers > radius
    return float(np.max(state.deviation()[out])) if np.any(out) else 0.0


def check_jensen(state: RadialState, params: Parameters, sigma_est: float, R: float) -> float:
    """``int_{B(t)} (p(rho) - p(1)) dx`` with ``B(t) = {r <= R + sigma t}``."""
    inside = state.grid.centers <= R + sigma_est * state.t
    dp = params.a * (state.rho[inside] ** params.gamma - 1.0)
    return float(np.dot(state.grid.weights[inside], dp))


def jensen_scale(state: RadialState, params: Parameters, sigma_est: float, R: float) -> float:
    radius = min(R + sigma_est * state.t, state.grid.r_max)
    return params.a * 4.0 * math.pi / 3.0 * radius ** 3


@dataclass
class Series:
    """Diagnostics time series, one array per column."""
    t: np.ndarray
    m: np.ndarray
    W: np.ndarray
    E: np.ndarray
    int_trT: np.ndarray
    cum_int_trT: np.ndarray
    support_radius: np.ndarray
    sup_grad_u: np.ndarray
    jensen_margin: np.ndarray
    exterior_deviation: np.ndarray
    energy_residual: np.ndarray | None = None
    trT_slack: np.ndarray | None = None
    W_ineq_residual: np.ndarray | None = None
    V_lower: np.ndarray | None = None

    def __len__(self):
        return len(self.t)

    def rows(self):
        cols = [getattr(self, c) for c in CSV_COLUMNS]
        for k in range(len(self)):
            yield [float(c[k]) for c in cols]


class Recorder:
    """Callback for ``radial.run`` that accumulates diagnostics."""

    def __init__(self, params: Parameters, sigma_est: float, R: float):
        self.params = params
        self.sigma_est = sigma_est
        self.R = R
        self.cols = {k: [] for k in ("t", "m", "W", "E", "int_trT", "cum_int_trT",
                                     "support_radius", "sup_grad_u", "jensen_margin",
                                     "exterior_deviation")}

    def __call__(self, t, state: RadialState):
        c = self.cols
        trT = quad_trT(state, self.params)
        if c["t"]:
            # trapezoid in output time
            cum = c["cum_int_trT"][-1] + 0.5 * (t - c["t"][-1]) * (trT + c["int_trT"][-1])
        else:
            cum = 0.0
        c["t"].append(t)
        c["m"].append(quad_m(state))
        c["W"].append(quad_W(state))
        c["E"].append(quad_E(state, self.params))
        c["int_trT"].append(trT)
        c["cum_int_trT"].append(cum)
        c["support_radius"].append(support_radius(state))
        c["sup_grad_u"].append(sup_grad_u(state))
        c["jensen_margin"].append(check_jensen(state, self.params, self.sigma_est, self.R))
        c["exterior_deviation"].append(
            exterior_deviation(state, self.R + self.sigma_est * t))

    def series(self) -> Series:
        return Series(**{k: np.asarray(v, dtype=float) for k, v in self.cols.items()})


def _time_derivative(t, y):
    """Central differences inside; second-order one-sided at the ends."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if len(t) < 3:
        raise InsufficientData("need at least 3 records")
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (t[2:] - t[:-2])
    d[[0, -1]] = np.gradient(y, t, edge_order=2)[[0, -1]]
    return d


def check_energy_identity(series: Series, params: Parameters):
    """Residual of ``dE/dt + (1/lam) int tr(T)/2 = 0``.

    Returns ``(residual array, max |residual| over interior records)``.
    """
    dE = _time_derivative(series.t, series.E)
    res = dE + 0.5 * series.int_trT / params.lam
    return res, float(np.max(np.abs(res[1:-1])))


def energy_scale(series: Series, params: Parameters) -> float:
    return float(np.max(np.abs(series.int_trT))) / (2.0 * params.lam) + float(
        np.max(np.abs(_time_derivative(series.t, series.E))))


def trT_budget(data: InitialData, params: Parameters) -> float:
    """``lam (H0 + max rho0 ||u0||^2)``."""
    return params.lam * (data.H0 + data.rho0_max * data.u0_norm2)


def check_trT_bound(series: Series, params: Parameters, data: InitialData,
                    tol_rel: float = 1e-6):
    """Slack of the cumulative trace bound; ``(passed, slack array)``."""
    budget = trT_budget(data, params)
    slack = budget - series.cum_int_trT
    tol = tol_rel * max(budget, 1.0)
    return bool(np.all(slack >= -tol)), slack


def W_ineq_rhs(t, W, int_trT, R, sigma_est, rho_max):
    vol = 4.0 / 3.0 * math.pi * (R + sigma_est * np.asarray(t)) ** 5 * rho_max
    return np.asarray(W) ** 2 / vol - np.asarray(int_trT)


def check_W_inequality(series: Series, sigma_est: float, R: float, rho_max: float):
    """``W' - (W^2 / (4/3 pi (R + sigma t)^5 max rho0) - int tr(T))``."""
    dW = _time_derivative(series.t, series.W)
    return dW - W_ineq_rhs(series.t, series.W, series.int_trT, R, sigma_est, rho_max)


def V_lower(series: Series, data: InitialData, params: Parameters, sigma_est: float):
    c2, c3 = constants(data.R, data.rho0_max, sigma_est)
    return V_closed_form(series.t, compute_U0(data, params), c2, c3)


def complete(series: Series, data: InitialData, params: Parameters, sigma_est: float) -> Series:
    """Fill the derived columns in place (NaN where a column needs 3 records)."""
    nan = np.full(len(series), np.nan)
    if len(series) >= 3:
        series.energy_residual, _ = check_energy_identity(series, params)
        series.W_ineq_residual = check_W_inequality(series, sigma_est, data.R, data.rho0_max)
    else:
        series.energy_residual = nan.copy()
        series.W_ineq_residual = nan.copy()
    _, series.trT_slack = check_trT_bound(series, params, data)
    series.V_lower = V_lower(series, data, params, sigma_est)
    return series


# -- verdict table --------------------------------------------------------

@dataclass
class Tolerances:
    mass_rel: float = 1e-10
    jensen_rel: float = 1e-8
    trT_rel: float = 1e-6
    energy_rel: float = 2e-2
    W_ineq_rel: float = 1e-4
    compare_rel: float = 1e-3


@dataclass
class Check:
    name: str
    passed: bool
    residual: float
    tolerance: float


def verify(series: Series, data: InitialData, params: Parameters, sigma_est: float,
           tol: Tolerances | None = None) -> list[Check]:
    """Run every check on a completed series; one ``Check`` per row."""
    tol = tol or Tolerances()
    out = []
    drift = float(np.max(np.abs(series.m - data.m0)))
    mtol = tol.mass_rel * (1.0 + abs(data.m0))
    out.append(Check("mass_conservation", drift <= mtol, drift, mtol))
    mmin = float(np.min(series.m))
    out.append(Check("mass_nonnegative", mmin >= -mtol, mmin, -mtol))

    radius = np.minimum(data.R + sigma_est * series.t, data.grid.r_max)
    jscale = params.a * 4.0 * math.pi / 3.0 * float(np.max(radius)) ** 3
    jmin = float(np.min(series.jensen_margin))
    out.append(Check("jensen_pressure", jmin >= -tol.jensen_rel * jscale, jmin,
                     -tol.jensen_rel * jscale))

    budget = trT_budget(data, params)
    smin = float(np.min(series.trT_slack))
    stol = tol.trT_rel * max(budget, 1.0)
    out.append(Check("trace_bound", smin >= -stol, smin, -stol))

    if len(series) >= 3:
        res = series.energy_residual[1:-1]
        emax = float(np.max(np.abs(res)))
        etol = tol.energy_rel * max(energy_scale(series, params), 1e-300)
        if energy_scale(series, params) == 0.0:
            etol = 0.0
        out.append(Check("energy_identity", emax <= etol, emax, etol))

        dW = _time_derivative(series.t, series.W)
        wtol = tol.W_ineq_rel * float(np.max(np.abs(dW)))
        wmin = float(np.min(series.W_ineq_residual))
        out.append(Check("W_inequality", wmin >= -wtol, wmin, -wtol))

    finite = np.isfinite(series.V_lower)
    margin = series.W[finite] - series.V_lower[finite]
    ctol = tol.compare_rel * float(np.max(np.abs(series.W)))
    cmin = float(np.min(margin)) if margin.size else 0.0
    out.append(Check("W_geq_V", cmin >= -ctol, cmin, -ctol))
    return out
