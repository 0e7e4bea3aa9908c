"""Distributed adaptive leader-follower synchronization of heterogeneous second-order agents."""

from .config import ScenarioConfig
from .engine import RunResult, StateLayout, benchmark, error_dynamics_oracle, lyapunov_monitor, simulate
from .errors import (
    ArbitraryRequiresEight, ConfigInvalid, GridEmpty, IsolatedFollower, NonFiniteInput,
    NumericalBlowup, PassyncError, UnknownPreset, WrongControllerKind,
)
from .graph import Network, TopologyPreset, build_preset, check_connectivity, normalize
from .plant import PlantParams, PlantState, paper_params
from .spr import SprGains, rh_gain_check, spr_certify_frequency
from .nonspr import CompensatorParams, nonspr_certify

__version__ = "0.1.0"
