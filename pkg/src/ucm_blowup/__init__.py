"""Numerical lab for finite-time breakdown in radially symmetric compressible
upper convected Maxwell flow."""
from .model import Parameters, PointState, char_speed_bound, background_speed
from .grid import RadialGrid
from .initial_data import (ConstructionError, InitialData, ProfileSpec, SearchError,
                           build_initial_state, choose_L_R)
from .radial import RadialState, RunConfig, SchemeConfig, run
from .riccati import blowup_bound_Tstar, check_criterion, compute_U0, integrate_V

__version__ = "0.1.0"
