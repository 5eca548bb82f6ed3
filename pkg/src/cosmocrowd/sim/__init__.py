"""Fleet simulation and detector evaluation."""

from cosmocrowd.sim.simfleet import (
    GroundTruth,
    SimConfig,
    evaluate,
    flight_altitude_km,
    flight_profile,
    make_config,
    simulate,
)

__all__ = [
    "GroundTruth",
    "SimConfig",
    "evaluate",
    "flight_altitude_km",
    "flight_profile",
    "make_config",
    "simulate",
]
