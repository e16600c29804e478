from .hvac import HvacParams, default_scenario, hvac_model, make_hvac_setpoint, resolve_walls
from .rlc import RlcParams, RlcSystem, rlc_model, series_rlc, simulate_driven, two_mesh_rlc

__all__ = [
    "HvacParams",
    "hvac_model",
    "resolve_walls",
    "make_hvac_setpoint",
    "default_scenario",
    "RlcParams",
    "RlcSystem",
    "rlc_model",
    "series_rlc",
    "two_mesh_rlc",
    "simulate_driven",
]
