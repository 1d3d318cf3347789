"""Large-amplitude radial initial data for the blow-up construction.

The velocity is ``u0(x) = v(|x|) x/|x|`` where ``v`` is a mollified version of
the piecewise-cosine profile ``tilde_v``; density and conformation are raised
by a smooth plateau supported in ``[0, R]`` and ``F0 = I``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .grid import RadialGrid
from .model import Parameters, energy_terms

# Gauss-Legendre nodes per smooth piece of the mollifier integral
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


class ConstructionError(ValueError):
    pass


class SearchError(ConstructionError):
    pass


@dataclass(frozen=True)
class ProfileSpec:
    L: float
    R: float
    mollifier_width: float = 0.125
    rho0_amplitude: float = 0.1
    delta_A: float = 0.0
    taper_width: float = 1.0

    def __post_init__(self):
        if not self.L > 0:
            raise ConstructionError("L must be positive")
        if not self.R >= 5:
            raise ConstructionError(
                f"R = {self.R} violates the requirement R >= 5 "
                "(needed for (R-2)^4 - 2^4 > R^4/32)")
        if not 0 < self.mollifier_width <= 0.25:
            raise ConstructionError("mollifier_width must lie in (0, 1/4]")
        if self.rho0_amplitude < 0:
            raise ConstructionError("rho0_amplitude must be >= 0")
        if self.delta_A < 0:
            raise ConstructionError("delta_A must be >= 0")
        if not 0 <= self.taper_width <= self.R - 2:
            raise ConstructionError("taper_width must lie in [0, R-2]")

    def as_dict(self) -> dict:
        return asdict(self)


def tilde_v(r, L, R):
    """Piecewise-cosine profile: rises on [0,1], flat L until R-1, falls to 0 at R."""
    r = np.asarray(r, dtype=float)
    return np.select(
        [r <= 1.0, r <= R - 1.0, r <= R],
        [L * np.cos(0.5 * np.pi * (r - 1.0)),
         np.full_like(r, L),
         0.5 * L * np.cos(np.pi * (r - R + 1.0)) + 0.5 * L],
        default=0.0,
    )


def _cut_profile(y, spec: ProfileSpec):
    # tilde_v with its outer edge pulled in by one mollifier width and
    # zeroed below 3w, so the mollified result vanishes on [0, 2w] and [R, inf)
    w = spec.mollifier_width
    vals = tilde_v(y, spec.L, spec.R - w)
    return np.where(y >= 3.0 * w, vals, 0.0)


def _bump_kernel(x):
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def mollified_v(r, spec: ProfileSpec):
    """Evaluate the smoothed profile ``v`` at arbitrary radii."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    w = spec.mollifier_width
    Rc = spec.R - w
    kinks = np.array([3.0 * w, 1.0, Rc - 1.0, Rc])
    lo, hi = r - w, r + w
    edges = np.concatenate(
        [lo[:, None], np.clip(kinks[None, :], lo[:, None], hi[:, None]), hi[:, None]],
        axis=1)
    num = np.zeros_like(r)
    den = np.zeros_like(r)
    all_flat = np.ones(r.shape, dtype=bool)
    all_zero = np.ones(r.shape, dtype=bool)
    for k in range(edges.shape[1] - 1):
        a, b = edges[:, k], edges[:, k + 1]
        half = 0.5 * (b - a)
        y = 0.5 * (a + b)[:, None] + half[:, None] * _GL_NODES[None, :]
        wts = half[:, None] * _GL_WEIGHTS[None, :] * _bump_kernel((r[:, None] - y) / w)
        vals = _cut_profile(y, spec)
        num += np.sum(wts * vals, axis=1)
        den += np.sum(wts, axis=1)
        used = half > 0
        all_flat &= ~used | np.all(vals == spec.L, axis=1)
        all_zero &= ~used | np.all(vals == 0.0, axis=1)
    v = num / den
    v[all_flat] = spec.L
    v[all_zero] = 0.0
    return v


def _check_resolution(spec: ProfileSpec, grid: RadialGrid):
    if grid.dr > spec.mollifier_width / 8.0 * (1 + 1e-12):
        raise ConstructionError(
            f"grid spacing {grid.dr} does not resolve the mollifier width "
            f"{spec.mollifier_width} with 8 cells")


def mollify_profile(spec: ProfileSpec, grid: RadialGrid) -> np.ndarray:
    _check_resolution(spec, grid)
    r = grid.centers
    v = mollified_v(r, spec)
    plateau = (r > 2.0) & (r < spec.R - 2.0)
    if np.any(v[plateau] < spec.L):
        raise ConstructionError("mollified profile drops below L on (2, R-2)")
    vt = tilde_v(r, spec.L, spec.R)
    if grid.integrate(v * v) > 4.0 * grid.integrate(vt * vt):
        raise ConstructionError("mollified profile violates ||v|| <= 2 ||tilde v||")
    return v


def plateau(r, R, taper):
    """Smooth cutoff: 1 on [0, R - taper], 0 on [R, inf).  ``taper = 0`` gives
    the sharp indicator of ``[0, R]``."""
    r = np.asarray(r, dtype=float)
    if taper == 0:
        return (r <= R).astype(float)
    x = np.clip((R - r) / taper, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        g = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return f / (f + g)


@dataclass
class InitialData:
    grid: RadialGrid
    R: float
    rho0: np.ndarray
    u0: np.ndarray
    A0_r: np.ndarray
    A0_t: np.ndarray
    F0_r: np.ndarray
    F0_t: np.ndarray
    params: Parameters
    spec: ProfileSpec | None = None
    m0: float = 0.0
    H0: float = 0.0
    W0: float = 0.0
    u0_norm2: float = 0.0

    FIELDS = ("rho0", "u0", "A0_r", "A0_t", "F0_r", "F0_t")

    @classmethod
    def from_arrays(cls, grid, R, params, rho0, u0, A0_r=None, A0_t=None,
                    F0_r=None, F0_t=None, spec=None) -> "InitialData":
        one = np.ones(grid.n_cells)
        data = cls(grid, float(R), np.asarray(rho0, float), np.asarray(u0, float),
                   one.copy() if A0_r is None else np.asarray(A0_r, float),
                   one.copy() if A0_t is None else np.asarray(A0_t, float),
                   one.copy() if F0_r is None else np.asarray(F0_r, float),
                   one.copy() if F0_t is None else np.asarray(F0_t, float),
                   params, spec)
        data.refresh()
        return data

    def refresh(self):
        self.m0 = compute_m0(self)
        self.H0 = compute_H0(self, self.params)
        self.W0 = compute_W0(self)
        self.u0_norm2 = compute_u0_norm2(self)

    @property
    def rho0_max(self) -> float:
        return float(np.max(self.rho0))

    @property
    def rho0_min(self) -> float:
        return float(np.min(self.rho0))

    def trace_T0(self) -> np.ndarray:
        return self.rho0 * self.params.G * (
            self.F0_r ** 2 * self.A0_r + 2.0 * self.F0_t ** 2 * self.A0_t - 3.0)

    def summary(self) -> dict:
        return {"m0": self.m0, "H0": self.H0, "W0": self.W0,
                "u0_norm2": self.u0_norm2, "rho0_max": self.rho0_max,
                "rho0_min": self.rho0_min, "R": self.R}


def build_initial_state(spec: ProfileSpec, params: Parameters,
                        grid: RadialGrid) -> InitialData:
    if grid.r_max < spec.R:
        raise ConstructionError("grid does not cover the support radius R")
    r = grid.centers
    v = mollify_profile(spec, grid)
    chi = plateau(r, spec.R, spec.taper_width)
    rho0 = 1.0 + spec.rho0_amplitude * chi
    A0 = 1.0 + spec.delta_A * chi
    one = np.ones_like(r)
    data = InitialData(grid, float(spec.R), rho0, v, A0, A0.copy(), one, one.copy(),
                       params, spec)
    data.refresh()
    check_admissible(data)
    return data


def check_admissible(data: InitialData, tol: float = 0.0):
    """Raise ConstructionError unless m0 >= 0, tr(T0) >= 0 and the data are
    supported in the ball of radius R."""
    if data.m0 < -tol:
        raise ConstructionError(f"excess-mass condition violated: m0 = {data.m0} < 0")
    trT = data.trace_T0()
    if np.any(trT < -tol):
        raise ConstructionError(
            f"stress-trace condition violated: min tr(T0) = {trT.min()} < 0")
    if np.any(data.rho0 <= 0):
        raise ConstructionError("initial density must be positive")
    outside = data.grid.centers > data.R
    dev = max_deviation(data.rho0, data.u0, data.A0_r, data.A0_t, data.F0_r, data.F0_t)
    if np.any(dev[outside] != 0.0):
        raise ConstructionError("initial data not supported in B_R")


def max_deviation(rho, u, A_r, A_t, F_r, F_t):
    """Pointwise max distance from the rest state over all fields."""
    return np.max(np.abs(np.stack(
        [rho - 1.0, u, A_r - 1.0, A_t - 1.0, F_r - 1.0, F_t - 1.0])), axis=0)


def compute_m0(data: InitialData) -> float:
    return data.grid.integrate(data.rho0 - 1.0)


def compute_H0(data: InitialData, params: Parameters) -> float:
    pe, se = energy_terms(data.rho0, params)
    return data.grid.integrate(2.0 * pe + 2.0 * se + data.trace_T0())


def compute_W0(data: InitialData) -> float:
    r = data.grid.centers
    return data.grid.integrate(data.rho0 * data.u0 * r)


def compute_u0_norm2(data: InitialData) -> float:
    return data.grid.integrate(data.u0 * data.u0)


# -- automatic choice of (L, R) ------------------------------------------

def _next_pow2(x: float) -> float:
    k = math.ceil(math.log2(x))
    while 2.0 ** (k - 1) >= x:
        k -= 1
    while 2.0 ** k < x:
        k += 1
    return 2.0 ** k


def amplitude_condition(spec: ProfileSpec, sigma_est, rho_min, rho_max):
    """(pi min rho0 / 64) L >= 16 sigma pi max rho0 / 3: returns (lhs, rhs)."""
    return (math.pi * rho_min / 64.0 * spec.L,
            16.0 * sigma_est * math.pi * rho_max / 3.0)


def radius_condition(spec: ProfileSpec, params: Parameters, H0, rho_min, rho_max):
    """(pi min rho0/64) L R^4 >= lam (H0 + max rho0 4 L^2 (4 pi/3) R^3): (lhs, rhs)."""
    L, R = spec.L, spec.R
    lhs = math.pi * rho_min / 64.0 * L * R ** 4
    rhs = params.lam * (H0 + rho_max * 4.0 * L * L * 4.0 * math.pi / 3.0 * R ** 3)
    return lhs, rhs


def _H0_for(spec: ProfileSpec, params: Parameters) -> float:
    # H0 does not involve the velocity, so only rho0 and A0 are needed
    dr = spec.mollifier_width / 8.0
    grid = RadialGrid.covering(spec.R + 1.0, dr)
    chi = plateau(grid.centers, spec.R, spec.taper_width)
    rho0 = 1.0 + spec.rho0_amplitude * chi
    A0 = 1.0 + spec.delta_A * chi
    pe, se = energy_terms(rho0, params)
    trT = rho0 * params.G * 3.0 * (A0 - 1.0)
    return grid.integrate(2.0 * pe + 2.0 * se + trT)


def choose_L_R(params: Parameters, sigma_est: float, template: ProfileSpec | None = None,
               margin: float = 0.1, R_cap: float = 4096.0) -> ProfileSpec:
    """Pick (L, R) so that the amplitude and radius conditions both hold.

    L is the smallest power of two meeting the amplitude condition with
    ``margin``; R then doubles from 8 until the radius condition holds.
    ``template`` supplies the remaining profile fields.
    """
    if not sigma_est > 0:
        raise ValueError("sigma_est must be positive")
    if template is None:
        template = ProfileSpec(L=1.0, R=8.0)
    rho_min = 1.0
    rho_max = 1.0 + template.rho0_amplitude
    L = _next_pow2((1.0 + margin) * 1024.0 * sigma_est * rho_max / (3.0 * rho_min))
    R = 8.0
    while R <= R_cap:
        spec = replace(template, L=L, R=R,
                       taper_width=min(template.taper_width, R - 2.0))
        lhs, rhs = radius_condition(spec, params, _H0_for(spec, params), rho_min, rho_max)
        if lhs >= rhs:
            return spec
        R *= 2.0
    raise SearchError(
        f"no R <= {R_cap} satisfies the radius condition for L = {L} "
        f"(binding: lam*(H0 + max rho0*4L^2*(4pi/3)R^3) = {rhs:.6g} > {lhs:.6g})")
