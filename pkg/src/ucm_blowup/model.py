"""Constitutive relations for the compressible UCM system.

The state is carried in the ``(rho, u, A, F)`` form, with the extra stress
recovered as ``T = rho * G * (F A F^T - I)``.  Everything here is a pure
function of its arguments.

Wave speeds
-----------
Linearising the ``(rho, u, A, F)`` system about the rest state
``rho = 1, u = 0, A = F = I`` and dropping the (lower order) relaxation term
gives, for a plane wave along ``x``::

    u_tt = (a*gamma + 2*G) u_xx     (longitudinal)
    v_tt = G v_xx                   (transverse)

because the stress perturbation is ``G (a' + f' + f'^T)`` and ``f'_t = grad u'``.
Repeating the computation about a general state whose left Cauchy-Green-like
tensor ``B = F A F^T`` has eigenvalue ``b`` in the wave direction yields a
longitudinal speed squared ``c_s^2 + G (b + 1)``.  The bound used by the
solvers takes the largest eigenvalue of ``B`` and doubles the elastic term.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ELASTIC_SAFETY = 2.0


class DomainError(ValueError):
    """Raised when a state lies outside the physical domain."""


@dataclass(frozen=True)
class Parameters:
    """Physical constants.  ``lam`` is the relaxation time."""

    a: float = 1.0
    gamma: float = 1.4
    lam: float = 1.0
    mu0: float = 1.0
    rho_bar: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"pressure coefficient a must be > 0, got {self.a}")
        if not self.gamma > 1:
            raise DomainError(f"gamma must be > 1, got {self.gamma}")
        if not self.lam > 0:
            raise DomainError(f"relaxation time must be > 0, got {self.lam}")
        if not self.mu0 > 0:
            raise DomainError(f"mu0 must be > 0, got {self.mu0}")

    @property
    def G(self) -> float:
        return self.mu0 / self.lam

    def as_dict(self) -> dict:
        return {"a": self.a, "gamma": self.gamma, "lambda": self.lam,
                "mu0": self.mu0, "G": self.G, "rho_bar": self.rho_bar}

    @classmethod
    def from_dict(cls, d: dict) -> "Parameters":
        lam = d["lambda"] if "lambda" in d else d["lam"]
        return cls(a=float(d["a"]), gamma=float(d["gamma"]), lam=float(lam),
                   mu0=float(d["mu0"]))


@dataclass
class PointState:
    rho: float
    u: np.ndarray
    A: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).reshape(3)
        self.A = np.asarray(self.A, dtype=float).reshape(3, 3)
        self.F = np.asarray(self.F, dtype=float).reshape(3, 3)
        if not self.rho > 0:
            raise DomainError(f"density must be positive, got {self.rho}")
        if not np.array_equal(self.A, self.A.T):
            raise DomainError("A must be symmetric")
        try:
            np.linalg.cholesky(self.A)
        except np.linalg.LinAlgError:
            raise DomainError("A must be positive definite") from None
        if np.linalg.det(self.F) == 0.0:
            raise DomainError("F must be invertible")

    @classmethod
    def background(cls) -> "PointState":
        return cls(1.0, np.zeros(3), np.eye(3), np.eye(3))


@dataclass
class RadialPointState:
    """Spherically symmetric point state: ``A = diag(A_r, A_t, A_t)`` etc.
    in the local ``(e_r, e_theta, e_phi)`` frame."""

    rho: float
    u: float
    A_r: float
    A_t: float
    F_r: float
    F_t: float

    def __post_init__(self):
        for name in ("A_r", "A_t", "F_r", "F_t"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")

    def to_point_state(self, e_r=(1.0, 0.0, 0.0)) -> PointState:
        e = np.asarray(e_r, dtype=float)
        e = e / np.linalg.norm(e)
        P = np.outer(e, e)
        Q = np.eye(3) - P
        A = self.A_r * P + self.A_t * Q
        return PointState(self.rho, self.u * e, 0.5 * (A + A.T),
                          self.F_r * P + self.F_t * Q)


def _check_rho(rho, strict=False):
    rho = np.asarray(rho, dtype=float)
    bad = rho <= 0 if strict else rho < 0
    if np.any(bad):
        raise DomainError("density outside domain")
    return rho


def eval_p0(rho, params: Parameters):
    """gamma-law pressure ``a * rho**gamma``."""
    rho = _check_rho(rho)
    return params.a * rho ** params.gamma


def sound_speed_sq(rho, params: Parameters):
    rho = _check_rho(rho)
    return params.a * params.gamma * rho ** (params.gamma - 1.0)


def eval_stress(state: PointState, params: Parameters) -> np.ndarray:
    M = state.F @ state.A @ state.F.T
    M = 0.5 * (M + M.T)
    return state.rho * params.G * (M - np.eye(3))


def conformation_from_stress(T, rho, F, params: Parameters) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    F = np.asarray(F, dtype=float)
    if not rho > 0:
        raise DomainError("density must be positive")
    Finv = np.linalg.inv(F)  # raises LinAlgError on singular F
    A = Finv @ (T / (rho * params.G) + np.eye(3)) @ Finv.T
    return 0.5 * (A + A.T)


def energy_terms(rho, params: Parameters):
    """The three density contributions to the energy density.

    Returns ``(pressure_part, entropy_part)``; both are nonnegative for
    ``rho > 0``.
    """
    rho = _check_rho(rho, strict=True)
    g = params.gamma
    pressure_part = params.a / (g - 1.0) * (rho ** g - 1.0 - g * (rho - 1.0))
    entropy_part = params.G * (rho * np.log(rho) - rho + 1.0)
    return pressure_part, entropy_part


def energy_integrand(state: PointState, params: Parameters) -> float:
    pe, se = energy_terms(state.rho, params)
    kinetic = 0.5 * state.rho * float(state.u @ state.u)
    trT = float(np.trace(eval_stress(state, params)))
    return kinetic + float(pe) + float(se) + 0.5 * trT


def char_speed_bound(state: PointState, params: Parameters) -> float:
    B = state.F @ state.A @ state.F.T
    bmax = float(np.linalg.eigvalsh(0.5 * (B + B.T))[-1])
    return _speed(state.rho, float(np.linalg.norm(state.u)), bmax, params)


def char_speed_radial(rho, u, A_r, A_t, F_r, F_t, params: Parameters):
    """Vectorised ``char_speed_bound`` for radial states."""
    bmax = np.maximum(F_r * F_r * A_r, F_t * F_t * A_t)
    return _speed(rho, np.abs(u), bmax, params)


def _speed(rho, speed, bmax, params):
    cs2 = params.a * params.gamma * np.power(rho, params.gamma - 1.0)
    ce2 = ELASTIC_SAFETY * params.G * (1.0 + np.maximum(bmax, 0.0))
    return speed + np.sqrt(cs2 + ce2)


def background_speed(params: Parameters) -> float:
    """Default front-speed estimate: the bound at the rest state."""
    return float(_speed(1.0, 0.0, 1.0, params))


def linear_longitudinal_speed(params: Parameters) -> float:
    return float(np.sqrt(params.a * params.gamma + 2.0 * params.G))


# -- material rates, used to check the (A, F) and T forms agree -----------

def stress_rate_from_AF(state: PointState, grad_u, params: Parameters):
    """``DT/Dt`` implied by the (rho, A, F) evolution at a point.

    ``grad_u[i, j] = d u_i / d x_j``.
    """
    L = np.asarray(grad_u, dtype=float)
    rho, A, F = state.rho, state.A, state.F
    drho = -rho * np.trace(L)
    dF = L @ F
    Finv = np.linalg.inv(F)
    dA = (Finv @ Finv.T - A) / params.lam
    B = F @ A @ F.T
    dB = dF @ A @ F.T + F @ dA @ F.T + F @ A @ dF.T
    return params.G * (drho * (B - np.eye(3)) + rho * dB)


def stress_rate_T_form(T, rho, grad_u, params: Parameters):
    """``DT/Dt`` from the upper-convected Maxwell law written for ``T``."""
    L = np.asarray(grad_u, dtype=float)
    T = np.asarray(T, dtype=float)
    D = 0.5 * (L + L.T)
    return (L @ T + T @ L.T - np.trace(L) * T
            + (2.0 * params.mu0 * rho * D - T) / params.lam)
