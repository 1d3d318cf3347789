"""Finite-volume solver for spherically symmetric UCM flow.

Radial reduction
----------------
With ``u = u(r) e_r`` the velocity gradient is ``diag(u_r, u/r, u/r)`` in the
spherical frame, so diagonal ``F = diag(F_r, F_t, F_t)`` and
``A = diag(A_r, A_t, A_t)`` stay diagonal.  Writing ``D/Dt = d_t + u d_r``::

    D rho/Dt + rho (u_r + 2u/r)          = 0
    rho Du/Dt + d_r p0                   = d_r T_rr + (2/r)(T_rr - T_t)
    lam DA_r/Dt + A_r                    = F_r^-2
    lam DA_t/Dt + A_t                    = F_t^-2
    DF_r/Dt                              = u_r F_r
    DF_t/Dt                              = (u/r) F_t

with ``T_rr = rho G (F_r^2 A_r - 1)`` and ``T_t = rho G (F_t^2 A_t - 1)``.

Discretisation
--------------
Cells carry ``Q = (rho, rho u, rho A_r, rho A_t, rho F_r, rho F_t)`` and the
system is advanced in the conservative form::

    d_t rho     + div(rho u)                       = 0
    d_t (rho u) + r^-2 d_r(r^2 (rho u^2 + p~ - T_rr)) = (2/r)(p~ - T_t)
    d_t (rho X) + div(rho u X)                     = rho S_X

where ``p~ = p0 - a`` (the rest pressure has no gradient, subtracting it keeps
the rest state exactly stationary).  Primitive variables are reconstructed
with minmod-limited slopes; the mass and momentum fluxes are local
Lax-Friedrichs, and the transported quantities ``X`` ride on the numerical
mass flux with an upwind face value.  Time stepping is two-stage SSP
Runge-Kutta.  The face areas ``r_{j}^2`` and cell weights ``r_i^2 dr`` make
``sum rho_i r_i^2 dr`` exactly conserved.

An optional second stress copy ``(T_rr, T_t)`` can be carried along and
evolved with the upper-convected law written directly for ``T``::

    d_t T_rr + div(u T_rr) = 2 u_r T_rr  + 2 rho G u_r   - T_rr/lam
    d_t T_t  + div(u T_t)  = (2u/r) T_t  + 2 rho G u/r   - T_t/lam

It never feeds back into the momentum equation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import RadialGrid
from .initial_data import InitialData, max_deviation
from .model import Parameters, char_speed_radial

log = logging.getLogger(__name__)

NG = 2
PRIMS = ("rho", "u", "A_r", "A_t", "F_r", "F_t")


@dataclass
class RadialState:
    grid: RadialGrid
    rho: np.ndarray
    u: np.ndarray
    A_r: np.ndarray
    A_t: np.ndarray
    F_r: np.ndarray
    F_t: np.ndarray
    t: float = 0.0
    T_rr: np.ndarray | None = None
    T_t: np.ndarray | None = None

    @classmethod
    def background(cls, grid: RadialGrid) -> "RadialState":
        one = np.ones(grid.n_cells)
        return cls(grid, one.copy(), np.zeros(grid.n_cells), one.copy(), one.copy(),
                   one.copy(), one.copy())

    @classmethod
    def from_initial(cls, data: InitialData, track_T=False) -> "RadialState":
        s = cls(data.grid, data.rho0.copy(), data.u0.copy(), data.A0_r.copy(),
                data.A0_t.copy(), data.F0_r.copy(), data.F0_t.copy())
        if track_T:
            s.T_rr, s.T_t = s.stress(data.params)
        return s

    @property
    def tracks_T(self) -> bool:
        return self.T_rr is not None

    def stress(self, params: Parameters):
        G = params.G
        return (self.rho * G * (self.F_r ** 2 * self.A_r - 1.0),
                self.rho * G * (self.F_t ** 2 * self.A_t - 1.0))

    def trace_T(self, params: Parameters):
        T_rr, T_t = self.stress(params)
        return T_rr + 2.0 * T_t

    def deviation(self):
        return max_deviation(self.rho, self.u, self.A_r, self.A_t, self.F_r, self.F_t)

    def copy(self) -> "RadialState":
        return replace(self, **{k: getattr(self, k).copy() for k in PRIMS},
                       T_rr=None if self.T_rr is None else self.T_rr.copy(),
                       T_t=None if self.T_t is None else self.T_t.copy())

    def to_conserved(self) -> np.ndarray:
        rows = [self.rho, self.rho * self.u, self.rho * self.A_r, self.rho * self.A_t,
                self.rho * self.F_r, self.rho * self.F_t]
        if self.tracks_T:
            rows += [self.T_rr, self.T_t]
        return np.array(rows)

    def with_conserved(self, Q: np.ndarray, t: float) -> "RadialState":
        rho = Q[0]
        s = RadialState(self.grid, rho, Q[1] / rho, Q[2] / rho, Q[3] / rho,
                        Q[4] / rho, Q[5] / rho, t)
        if Q.shape[0] > 6:
            s.T_rr, s.T_t = Q[6].copy(), Q[7].copy()
        return s


@dataclass
class SchemeConfig:
    cfl: float = 0.5
    limiter: str = "minmod"
    positivity_floor: float = 1e-10
    dt_floor_factor: float = 1e-12
    dt_max: float = np.inf
    pin_velocity: bool = False

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl number must lie in (0, 1]")
        if self.limiter not in LIMITERS:
            raise ValueError(f"unknown limiter {self.limiter!r}")


@dataclass
class StepOutcome:
    state: RadialState | None = None
    breakdown: str | None = None
    t: float = 0.0
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.breakdown is None


class Breakdown(Exception):
    def __init__(self, reason, detail=""):
        super().__init__(f"{reason}: {detail}")
        self.reason = reason
        self.detail = detail


# -- reconstruction -------------------------------------------------------

def _minmod(a, b):
    return np.where(a * b > 0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _mc(a, b):
    c = 0.5 * (a + b)
    m = np.minimum(np.minimum(np.abs(c), 2 * np.abs(a)), 2 * np.abs(b))
    return np.where(a * b > 0, np.sign(a) * m, 0.0)


LIMITERS = {"minmod": _minmod, "mc": _mc}


def _pad(W, tracks_T):
    """Add NG ghost cells: mirror at r = 0 (u odd), rest state outside."""
    nv, n = W.shape
    P = np.empty((nv, n + 2 * NG))
    P[:, NG:NG + n] = W
    P[:, :NG] = W[:, NG - 1::-1]
    P[1, :NG] *= -1.0
    rest = np.ones(nv)
    rest[1] = 0.0
    if tracks_T:
        rest[6:] = 0.0
    P[:, NG + n:] = rest[:, None]
    return P


def _faces(P, limiter):
    """Left/right states at faces j = 0..n (face j sits at r = j dr)."""
    d = np.diff(P, axis=1)
    slope = LIMITERS[limiter](d[:, :-1], d[:, 1:])   # cells 1 .. n+2 of P
    cells = P[:, 1:-1]                                # cells -1 .. n
    left = (cells + 0.5 * slope)[:, :-1]     # right edges of cells -1 .. n-1
    right = (cells - 0.5 * slope)[:, 1:]     # left edges of cells 0 .. n
    return left, right


def _prims(state: RadialState, params):
    rows = [state.rho, state.u, state.A_r, state.A_t, state.F_r, state.F_t]
    if state.tracks_T:
        rows += [state.T_rr / state.rho, state.T_t / state.rho]
    return np.array(rows)


# -- right-hand side ------------------------------------------------------

def _conserved_rhs(state: RadialState, params: Parameters, scheme: SchemeConfig):
    grid = state.grid
    n = grid.n_cells
    r = grid.centers
    rf = grid.faces
    G, lam = params.G, params.lam
    W = _prims(state, params)
    nv = W.shape[0]
    L, R = _faces(_pad(W, state.tracks_T), scheme.limiter)

    rho, u = state.rho, state.u
    T_rr, T_t = state.stress(params)
    ptil = params.a * (rho ** params.gamma - 1.0)

    flux = np.zeros((nv, n + 1))
    if scheme.pin_velocity:
        ubar = np.zeros(n + 1)
    else:
        def phys(V):
            rh, uu = V[0], V[1]
            p = params.a * (rh ** params.gamma - 1.0)
            trr = rh * G * (V[4] ** 2 * V[2] - 1.0)
            return rh * uu, rh * uu * uu + p - trr

        fL_rho, fL_m = phys(L)
        fR_rho, fR_m = phys(R)
        alpha = np.maximum(char_speed_radial(*L[:6], params),
                           char_speed_radial(*R[:6], params))
        mass = 0.5 * (fL_rho + fR_rho) - 0.5 * alpha * (R[0] - L[0])
        flux[0] = mass
        flux[1] = 0.5 * (fL_m + fR_m) - 0.5 * alpha * (R[0] * R[1] - L[0] * L[1])
        up = np.where(mass >= 0.0, L[2:], R[2:])
        flux[2:] = mass * up
        ubar = 0.5 * (L[1] + R[1])
        ubar[0] = 0.0
        flux[:, 0] = 0.0

    area = rf * rf
    vol = r * r * grid.dr
    af = flux * area
    dQ = -(af[:, 1:] - af[:, :-1]) / vol

    u_r = np.diff(ubar) / grid.dr
    u_over_r = u / r
    if scheme.pin_velocity:
        u_r = np.zeros(n)
        u_over_r = np.zeros(n)
    else:
        dQ[1] += 2.0 / r * (ptil - T_t)
    dQ[2] += rho * (state.F_r ** -2 - state.A_r) / lam
    dQ[3] += rho * (state.F_t ** -2 - state.A_t) / lam
    dQ[4] += rho * u_r * state.F_r
    dQ[5] += rho * u_over_r * state.F_t
    if state.tracks_T:
        dQ[6] += 2.0 * u_r * state.T_rr + 2.0 * rho * G * u_r - state.T_rr / lam
        dQ[7] += 2.0 * u_over_r * state.T_t + 2.0 * rho * G * u_over_r - state.T_t / lam
    if scheme.pin_velocity:
        dQ[1] = 0.0
    return dQ


def rhs_radial(state: RadialState, params: Parameters, scheme: SchemeConfig | None = None):
    """Time derivatives of the primitive fields (dict keyed by field name)."""
    scheme = scheme or SchemeConfig()
    _check_positive(state, scheme.positivity_floor)
    dQ = _conserved_rhs(state, params, scheme)
    rho = state.rho
    drho = dQ[0]
    out = {"rho": drho, "u": (dQ[1] - state.u * drho) / rho}
    for k, name in enumerate(PRIMS[2:], start=2):
        out[name] = (dQ[k] - getattr(state, name) * drho) / rho
    if state.tracks_T:
        out["T_rr"], out["T_t"] = dQ[6], dQ[7]
    return out


def evolve_T_form(state: RadialState, params: Parameters,
                  scheme: SchemeConfig | None = None):
    """``(dT_rr/dt, dT_t/dt)`` from the stress-form constitutive law.

    If the state carries no independent stress copy, the stress is taken from
    ``(rho, A, F)``.
    """
    s = state
    if not s.tracks_T:
        s = state.copy()
        s.T_rr, s.T_t = state.stress(params)
    d = rhs_radial(s, params, scheme)
    return d["T_rr"], d["T_t"]


def _check_positive(state: RadialState, floor):
    for name in ("rho", "A_r", "A_t", "F_r", "F_t"):
        x = getattr(state, name)
        if not np.all(np.isfinite(x)):
            raise Breakdown("positivity", f"non-finite {name}")
        if np.min(x) <= floor:
            i = int(np.argmin(x))
            raise Breakdown("positivity",
                            f"{name} = {x[i]:.3e} at r = {state.grid.centers[i]:.6g}")
    if not np.all(np.isfinite(state.u)):
        raise Breakdown("positivity", "non-finite velocity")


def cfl_dt(state: RadialState, params: Parameters, cfl_number: float) -> float:
    if not 0 < cfl_number <= 1:
        raise ValueError("cfl number must lie in (0, 1]")
    s = char_speed_radial(state.rho, state.u, state.A_r, state.A_t, state.F_r,
                          state.F_t, params)
    smax = float(np.max(s))
    if not np.isfinite(smax) or smax <= 0:
        raise Breakdown("cfl", f"non-finite characteristic speed {smax}")
    return cfl_number * state.grid.dr / smax


def step(state: RadialState, params: Parameters, scheme: SchemeConfig,
         dt: float | None = None) -> StepOutcome:
    """One SSP-RK2 step.  ``dt`` defaults to the CFL step."""
    try:
        _check_positive(state, scheme.positivity_floor)
        if dt is None:
            dt = min(cfl_dt(state, params, scheme.cfl), scheme.dt_max)
        if dt < scheme.dt_floor_factor * state.grid.dr:
            raise Breakdown("cfl", f"time step {dt:.3e} below floor")
        Q0 = state.to_conserved()
        Q1 = Q0 + dt * _conserved_rhs(state, params, scheme)
        s1 = state.with_conserved(Q1, state.t + dt)
        _check_positive(s1, scheme.positivity_floor)
        Q2 = 0.5 * Q0 + 0.5 * (Q1 + dt * _conserved_rhs(s1, params, scheme))
        s2 = state.with_conserved(Q2, state.t + dt)
        if scheme.pin_velocity:
            s2.u = np.zeros_like(s2.u)
        _check_positive(s2, scheme.positivity_floor)
    except Breakdown as exc:
        return StepOutcome(None, exc.reason, state.t, exc.detail)
    return StepOutcome(s2, None, s2.t)


def sup_grad_u(state: RadialState) -> float:
    u = np.concatenate([[-state.u[0]], state.u, [0.0]])
    return float(np.max(np.abs(u[2:] - u[:-2])) / (2.0 * state.grid.dr))


# -- driver ---------------------------------------------------------------

@dataclass
class RunConfig:
    t_end: float = 1.0
    output_interval: float | None = None
    grad_factor: float = 1e3
    max_steps: int = 10_000_000
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    track_T: bool = False
    keep_snapshots: bool = True    # False keeps only the latest snapshot


@dataclass
class RunResult:
    snapshots: list            # list of (t, RadialState) at output times
    outcome: StepOutcome
    steps: int
    initial_grad: float

    @property
    def final(self) -> RadialState:
        return self.snapshots[-1][1]

    @property
    def last_healthy_time(self) -> float:
        return self.snapshots[-1][0]


def output_times(t_end, interval):
    if t_end <= 0:
        return np.array([0.0])
    k = int(np.ceil(t_end / interval - 1e-9))
    ts = np.minimum(np.arange(k + 1) * interval, t_end)
    ts[-1] = t_end
    return ts


def check_domain(data: InitialData, sigma_est: float, t_end: float):
    need = data.R + sigma_est * t_end
    if data.grid.r_max < need:
        raise ValueError(
            f"domain r_max = {data.grid.r_max} is smaller than R + sigma*t_end = {need}")


def run(data: InitialData, params: Parameters, cfg: RunConfig,
        sigma_est: float | None = None, state: RadialState | None = None,
        callback=None) -> RunResult:
    """March to ``cfg.t_end``, stopping at breakdown.

    Snapshots are kept at every output time.  ``callback(t, state)`` is called
    on each snapshot as it is taken.
    """
    if sigma_est is not None:
        check_domain(data, sigma_est, cfg.t_end)
    interval = cfg.output_interval or 0.002 * params.lam
    times = output_times(cfg.t_end, interval)
    if state is None:
        state = RadialState.from_initial(data, track_T=cfg.track_T)
    if cfg.scheme.pin_velocity:
        state.u = np.zeros_like(state.u)
    g0 = sup_grad_u(state)
    snaps = [(state.t, state)]
    if callback:
        callback(state.t, state)
    steps = 0
    outcome = StepOutcome(state, None, state.t)
    for t_next in times[1:]:
        while state.t < t_next:
            if steps >= cfg.max_steps:
                return RunResult(snaps, StepOutcome(None, "max_steps", state.t), steps, g0)
            try:
                dt = min(cfl_dt(state, params, cfg.scheme.cfl), cfg.scheme.dt_max)
            except Breakdown as exc:
                return RunResult(snaps, StepOutcome(None, exc.reason, state.t, exc.detail),
                                 steps, g0)
            if state.t + dt >= t_next - 1e-12 * max(1.0, t_next):
                dt = t_next - state.t
            outcome = step(state, params, cfg.scheme, dt)
            steps += 1
            if not outcome.ok:
                log.info("breakdown (%s) at t=%.6g: %s", outcome.breakdown, outcome.t,
                         outcome.detail)
                return RunResult(snaps, outcome, steps, g0)
            state = outcome.state
            if state.t >= t_next - 1e-12 * max(1.0, t_next):
                state.t = float(t_next)
            g = sup_grad_u(state)
            if g0 > 0 and g > cfg.grad_factor * g0:
                out = StepOutcome(None, "gradient", state.t,
                                  f"sup|u_r| = {g:.6g} exceeds {cfg.grad_factor:g} x {g0:.6g}")
                return RunResult(snaps, out, steps, g0)
        if not cfg.keep_snapshots:
            snaps.clear()
        snaps.append((state.t, state))
        if callback:
            callback(state.t, state)
    return RunResult(snaps, StepOutcome(state, None, state.t), steps, g0)
