"""First-order 3D Cartesian solver, used only to cross-check the radial
reduction on small grids.

Cells carry ``rho``, ``rho u``, ``rho A`` and ``rho F`` (full 3x3 tensors).
Convection is first-order upwind: the face mass flux is ``u_face * rho_upwind``
and momentum, ``A`` and ``F`` ride on it with upwind values.  Pressure and
stress enter the momentum flux as centred face averages, and ``grad u`` in the
``F`` source is centred.  There is no limiting and no added acoustic
dissipation.  Time stepping is three-stage SSP Runge-Kutta.  Outside the box
the state is the rest state.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .initial_data import InitialData
from .model import Parameters, background_speed
from .radial import RadialState, RunConfig, run as run_radial

NV = 22
_RHO, _U, _A, _F = 0, slice(1, 4), slice(4, 13), slice(13, 22)


@dataclass
class CartesianState:
    """``W`` stacks primitive fields ``(rho, u[3], A[9], F[9])`` on an ``n^3`` grid."""
    W: np.ndarray
    h: float
    t: float = 0.0

    @property
    def n(self) -> int:
        return self.W.shape[1]

    @property
    def rho(self):
        return self.W[_RHO]

    @property
    def u(self):
        return self.W[_U]

    @property
    def A(self):
        return self.W[_A].reshape((3, 3) + self.W.shape[1:])

    @property
    def F(self):
        return self.W[_F].reshape((3, 3) + self.W.shape[1:])

    def centers(self):
        n = self.n
        x = (np.arange(n) - 0.5 * (n - 1)) * self.h
        return np.meshgrid(x, x, x, indexing="ij")

    @classmethod
    def background(cls, n, h):
        W = np.zeros((NV, n, n, n))
        W[0] = 1.0
        for k in (0, 4, 8):
            W[4 + k] = 1.0
            W[13 + k] = 1.0
        return cls(W, h)

    def mass(self) -> float:
        return float(np.sum(self.rho) * self.h ** 3)


class CartBreakdown(RuntimeError):
    pass


def embed_radial(radial: RadialState, n: int, half_width: float) -> CartesianState:
    """Sample a radial state onto an ``n^3`` box ``[-half_width, half_width]^3``."""
    h = 2.0 * half_width / n
    st = CartesianState.background(n, h)
    X = np.array(st.centers())
    r = np.sqrt(np.sum(X * X, axis=0))
    e = X / r
    rc = radial.grid.centers

    def at(f, rest):
        return np.interp(r, rc, f, right=rest)

    st.W[0] = at(radial.rho, 1.0)
    st.W[_U] = at(radial.u, 0.0) * e
    ee = e[:, None] * e[None, :]
    eye = np.eye(3)[:, :, None, None, None]
    for sl, fr, ft in ((_A, radial.A_r, radial.A_t), (_F, radial.F_r, radial.F_t)):
        xr, xt = at(fr, 1.0), at(ft, 1.0)
        st.W[sl] = (xt * eye + (xr - xt) * ee).reshape((9,) + r.shape)
    return st


def _cell_fluxes(W, params: Parameters):
    rho = W[0]
    u = W[_U]
    A = W[_A].reshape((3, 3) + rho.shape)
    F = W[_F].reshape((3, 3) + rho.shape)
    B = np.einsum("ij...,jk...,lk...->il...", F, A, F)
    B = 0.5 * (B + np.swapaxes(B, 0, 1))
    T = rho * params.G * (B - np.eye(3)[:, :, None, None, None])
    ptil = params.a * (rho ** params.gamma - 1.0)
    bmax = np.linalg.eigvalsh(np.moveaxis(B, (0, 1), (-2, -1)))[..., -1]
    cs2 = params.a * params.gamma * rho ** (params.gamma - 1.0)
    speed = np.sqrt(np.sum(u * u, axis=0)) + np.sqrt(cs2 + 2.0 * params.G * (1.0 + bmax))
    return rho, u, T, ptil, speed, F, A


def _pad(W):
    n = W.shape[1]
    P = np.zeros((NV, n + 2, n + 2, n + 2))
    P[0] = 1.0
    for k in (0, 4, 8):
        P[4 + k] = 1.0
        P[13 + k] = 1.0
    P[:, 1:-1, 1:-1, 1:-1] = W
    return P


def rhs_cart(state: CartesianState, params: Parameters):
    """Time derivative of the conserved variables ``(rho, rho u, rho A, rho F)``."""
    W = state.W
    if np.min(W[0]) <= 0 or not np.all(np.isfinite(W)):
        raise CartBreakdown("density lost positivity")
    h = state.h
    P = _pad(W)
    rho, u, T, ptil, _, F, A = _cell_fluxes(P, params)
    dQ = np.zeros_like(W)
    grad_u = np.zeros((3, 3) + W.shape[1:])
    inner = (slice(1, -1),) * 3
    for d in range(3):
        lo = [slice(1, -1)] * 3
        hi = [slice(1, -1)] * 3
        lo[d] = slice(0, -1)
        hi[d] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        # faces normal to axis d, boundary faces included
        ubar = 0.5 * (u[(slice(None),) + lo] + u[(slice(None),) + hi])
        up = ubar[d] >= 0.0
        mass = ubar[d] * np.where(up, rho[lo], rho[hi])
        fl = np.empty((NV,) + mass.shape)
        fl[0] = mass
        for i in range(3):
            stress = 0.5 * (T[i, d][lo] + T[i, d][hi])
            if i == d:
                stress = stress - 0.5 * (ptil[lo] + ptil[hi])
            fl[1 + i] = mass * np.where(up, u[i][lo], u[i][hi]) - stress
        fl[4:] = mass * np.where(up, P[4:, lo[0], lo[1], lo[2]], P[4:, hi[0], hi[1], hi[2]])
        dQ -= np.diff(fl, axis=1 + d) / h
        grad_u[:, d] = np.diff(ubar, axis=1 + d) / h
    rho_c = rho[inner]
    Fc = F[(slice(None), slice(None)) + inner]
    Ac = A[(slice(None), slice(None)) + inner]
    Finv = np.linalg.inv(np.moveaxis(Fc, (0, 1), (-2, -1)))
    target = np.moveaxis(Finv @ np.swapaxes(Finv, -1, -2), (-2, -1), (0, 1))
    dQ[_A] += (rho_c * (target - Ac) / params.lam).reshape((9,) + rho_c.shape)
    dQ[_F] += (rho_c * np.einsum("ij...,jk...->ik...", grad_u, Fc)).reshape((9,) + rho_c.shape)
    return dQ


def max_speed(state: CartesianState, params: Parameters) -> float:
    return float(np.max(_cell_fluxes(state.W, params)[4]))


def _to_conserved(W):
    Q = W * W[0]
    Q[0] = W[0]
    return Q


def _from_conserved(Q):
    W = Q / Q[0]
    W[0] = Q[0]
    return W


def _euler(Q, state, params, dt):
    Q1 = Q + dt * rhs_cart(state, params)
    if np.min(Q1[0]) <= 0:
        raise CartBreakdown("density lost positivity")
    return Q1


def step_cart(state: CartesianState, params: Parameters, dt: float) -> CartesianState:
    """Three-stage SSP Runge-Kutta step (the centred terms need more than
    forward Euler to be stable)."""
    h, t = state.h, state.t
    Q0 = _to_conserved(state.W)
    Q1 = _euler(Q0, state, params, dt)
    Q2 = 0.75 * Q0 + 0.25 * _euler(Q1, CartesianState(_from_conserved(Q1), h), params, dt)
    Q3 = Q0 / 3.0 + 2.0 / 3.0 * _euler(Q2, CartesianState(_from_conserved(Q2), h), params, dt)
    return CartesianState(_from_conserved(Q3), h, t + dt)


def run_cart(state: CartesianState, params: Parameters, t_end: float, cfl: float = 0.5):
    while state.t < t_end:
        dt = cfl * state.h / max_speed(state, params)
        dt = min(dt, t_end - state.t)
        state = step_cart(state, params, dt)
    return state


# -- comparison -----------------------------------------------------------

def sample_radial(radial: RadialState, cart: CartesianState):
    X = np.array(cart.centers())
    r = np.sqrt(np.sum(X * X, axis=0))
    rc = radial.grid.centers
    return np.interp(r, rc, radial.rho, right=1.0), np.interp(r, rc, radial.u, right=0.0)


def _rel(a, b):
    den = np.sqrt(np.sum(b * b))
    return float(np.sqrt(np.sum((a - b) ** 2)) / den) if den > 0 else float(
        np.sqrt(np.sum(a * a)))


def field_discrepancy(radial: RadialState, cart: CartesianState) -> dict:
    """Relative L2 differences of the density excess and the speed."""
    rho_r, u_r = sample_radial(radial, cart)
    speed = np.sqrt(np.sum(cart.u ** 2, axis=0))
    d_rho = _rel(cart.rho - 1.0, rho_r - 1.0)
    d_u = _rel(speed, np.abs(u_r))
    return {"rho": d_rho, "speed": d_u, "max": max(d_rho, d_u)}


def octant_asymmetry(cart: CartesianState) -> float:
    """Largest difference of density/speed under axis reflections and swaps."""
    worst = 0.0
    speed = np.sqrt(np.sum(cart.u ** 2, axis=0))
    for f in (cart.rho, speed):
        for ax in range(3):
            worst = max(worst, float(np.max(np.abs(f - np.flip(f, axis=ax)))))
        for perm in ((1, 0, 2), (0, 2, 1), (2, 1, 0)):
            worst = max(worst, float(np.max(np.abs(f - np.transpose(f, perm)))))
    return worst


def run_compare(data: InitialData, params: Parameters, n: int, t_short: float,
                sigma_est: float | None = None, radial_cfg: RunConfig | None = None) -> dict:
    """Embed radial data in an ``n^3`` box, run both solvers, compare.

    Returns a JSON-ready report with the discrepancy (largest of the
    density-excess and speed relative L2 errors).
    """
    if n > 64:
        raise ValueError("the Cartesian oracle is limited to n <= 64")
    sigma = sigma_est if sigma_est is not None else background_speed(params)
    half = data.R + sigma * t_short
    half *= n / (n - 4.0)
    cfg = radial_cfg or RunConfig(t_end=t_short, output_interval=max(t_short, 1e-300))
    res = run_radial(data, params, cfg)
    report = {"n": n, "t_short": t_short, "sigma_est": sigma, "half_width": half}
    if not res.outcome.ok:
        report.update(aborted=True, reason=f"radial breakdown: {res.outcome.breakdown}")
        return report
    cart0 = embed_radial(RadialState.from_initial(data), n, half)
    m0 = cart0.mass()
    try:
        cart = run_cart(cart0, params, t_short)
    except CartBreakdown as exc:
        report.update(aborted=True, reason=f"cartesian breakdown: {exc}")
        return report
    d = field_discrepancy(res.final, cart)
    report.update(aborted=False, discrepancy=d["max"], rho=d["rho"], speed=d["speed"],
                  mass_drift=abs(cart.mass() - m0) / m0,
                  octant_asymmetry=octant_asymmetry(cart))
    return report
