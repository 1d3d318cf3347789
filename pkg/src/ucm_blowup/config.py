"""Flat ``section.key = value`` run configuration.

Example::

    params.a = 1.0
    params.gamma = 1.4
    params.lambda = 1.0
    params.mu0 = 1.0
    profile.L = auto
    profile.R = auto
    solver.n_cells = 4096
    solver.t_end = 0.5
    sigma_est = 2.3

Lines starting with ``#`` are comments.  Unknown or repeated keys are errors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .diagnostics import Tolerances
from .grid import RadialGrid
from .initial_data import ProfileSpec, choose_L_R
from .model import Parameters, background_speed
from .radial import RunConfig, SchemeConfig


class ConfigError(ValueError):
    pass


PARAM_KEYS = {"a": "a", "gamma": "gamma", "lambda": "lam", "mu0": "mu0"}
PROFILE_KEYS = ("kind", "L", "R", "mollifier_width", "rho0_amplitude", "delta_A",
                "taper_width")
SOLVER_KEYS = ("n_cells", "dr", "r_max", "cfl", "t_end", "output_interval", "grad_factor",
               "positivity_floor", "dt_floor_factor", "dt_max", "limiter",
               "pin_velocity", "track_T")
VERIFY_KEYS = tuple(f.name for f in fields(Tolerances))
ORACLE_KEYS = ("n", "t_short")
BOUND_KEYS = ("U0", "c2", "c3")


def parse_text(text: str) -> dict:
    out = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected key = value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in out:
            raise ConfigError(f"line {no}: duplicate key {k!r}")
        out[k] = v
    return out


def _num(key, v):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def _bool(key, v):
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {v!r}")


@dataclass
class Config:
    params: Parameters = field(default_factory=Parameters)
    profile: dict = field(default_factory=dict)      # raw profile entries
    solver: dict = field(default_factory=dict)
    tolerances: Tolerances = field(default_factory=Tolerances)
    oracle: dict = field(default_factory=dict)
    bound: dict = field(default_factory=dict)       # injected (U0, c2, c3)
    sigma_est: float | None = None
    out: str | None = None
    raw: dict = field(default_factory=dict)

    @property
    def has_params(self) -> bool:
        return any(k.startswith("params.") for k in self.raw)

    @property
    def sigma(self) -> float:
        """Explicit ``sigma_est`` or the speed bound at the rest state."""
        return self.sigma_est if self.sigma_est is not None else background_speed(self.params)

    @property
    def kind(self) -> str:
        return self.profile.get("kind", "pulse")

    def profile_spec(self) -> ProfileSpec | None:
        """Resolved profile (``auto`` L/R chosen here); ``None`` for background."""
        if self.kind == "background":
            return None
        p = {k: v for k, v in self.profile.items() if k != "kind"}
        auto = [k for k in ("L", "R") if p.get(k) == "auto"]
        if auto and len(auto) != 2:
            raise ConfigError("profile.L and profile.R must both be 'auto' or both numbers")
        extra = {k: _num(f"profile.{k}", v) for k, v in p.items() if k not in ("L", "R")}
        if auto:
            template = ProfileSpec(L=1.0, R=8.0, **extra)
            return choose_L_R(self.params, self.sigma, template)
        if "L" not in p or "R" not in p:
            raise ConfigError("profile.L and profile.R are required")
        return ProfileSpec(L=_num("profile.L", p["L"]), R=_num("profile.R", p["R"]), **extra)

    def support_radius(self, spec: ProfileSpec | None) -> float:
        if spec is not None:
            return spec.R
        return _num("profile.R", self.profile.get("R", "5"))

    def grid(self, spec: ProfileSpec | None) -> RadialGrid:
        """Grid from ``solver.n_cells``/``solver.dr``/``solver.r_max``.

        Missing pieces default to ``dr = mollifier_width/8`` and a domain of
        ``R + sigma_est t_end + 1``.
        """
        s = self.solver
        R = self.support_radius(spec)
        t_end = float(s.get("t_end", 1.0))
        r_need = R + self.sigma * t_end + 1.0
        if "n_cells" in s and "dr" in s:
            return RadialGrid(int(s["n_cells"]), float(s["dr"]))
        if "n_cells" in s:
            r_max = float(s.get("r_max", r_need))
            return RadialGrid(int(s["n_cells"]), r_max / int(s["n_cells"]))
        w = spec.mollifier_width if spec is not None else 0.125
        dr = float(s.get("dr", w / 8.0))
        return RadialGrid.covering(float(s.get("r_max", r_need)), dr)

    def run_config(self) -> RunConfig:
        s = self.solver
        scheme = SchemeConfig(**{k: s[k] for k in ("cfl", "limiter", "positivity_floor",
                                                   "dt_floor_factor", "dt_max",
                                                   "pin_velocity") if k in s})
        kw = {k: s[k] for k in ("t_end", "output_interval", "grad_factor", "track_T")
              if k in s}
        return RunConfig(scheme=scheme, **kw)


def from_dict(raw: dict) -> Config:
    cfg = Config(raw=dict(raw))
    pkw, tkw = {}, {}
    for key, v in raw.items():
        sec, _, name = key.partition(".")
        if not name:
            if key == "sigma_est":
                cfg.sigma_est = _num(key, v)
                if not cfg.sigma_est > 0:
                    raise ConfigError("sigma_est must be positive")
            elif key == "out":
                cfg.out = v
            else:
                raise ConfigError(f"unknown key {key!r}")
        elif sec == "params" and name in PARAM_KEYS:
            pkw[PARAM_KEYS[name]] = _num(key, v)
        elif sec == "profile" and name in PROFILE_KEYS:
            if name == "kind" and v not in ("pulse", "background"):
                raise ConfigError(f"profile.kind must be pulse or background, got {v!r}")
            cfg.profile[name] = v
        elif sec == "solver" and name in SOLVER_KEYS:
            if name == "limiter":
                cfg.solver[name] = v
            elif name in ("pin_velocity", "track_T"):
                cfg.solver[name] = _bool(key, v)
            elif name == "n_cells":
                n = _num(key, v)
                if n != int(n) or n < 1:
                    raise ConfigError(f"{key} must be a positive integer")
                cfg.solver[name] = int(n)
            else:
                cfg.solver[name] = _num(key, v)
        elif sec == "verify" and name in VERIFY_KEYS:
            tkw[name] = _num(key, v)
        elif sec == "oracle" and name in ORACLE_KEYS:
            cfg.oracle[name] = _num(key, v)
        elif sec == "bound" and name in BOUND_KEYS:
            cfg.bound[name] = _num(key, v)
        else:
            raise ConfigError(f"unknown key {key!r}")
    try:
        cfg.params = Parameters(**pkw)
        cfg.tolerances = replace(Tolerances(), **tkw)
        cfg.run_config()
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.bound and set(cfg.bound) != set(BOUND_KEYS):
        raise ConfigError("bound.U0, bound.c2 and bound.c3 must be given together")
    t_end = cfg.solver.get("t_end", 1.0)
    if not (t_end >= 0 and math.isfinite(t_end)):
        raise ConfigError("solver.t_end must be finite and >= 0")
    return cfg


def load(path) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return from_dict(parse_text(text))


def dump(cfg: Config) -> str:
    return "".join(f"{k} = {v}\n" for k, v in sorted(cfg.raw.items()))
