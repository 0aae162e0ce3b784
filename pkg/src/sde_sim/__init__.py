"""Forward simulation of the truncated jump-diffusion."""
from src.sde_sim.grid import TimeGrid
from src.sde_sim.moments import MomentFit, MomentReport, moment_check
from src.sde_sim.noise import PathNoise, sample_noise
from src.sde_sim.rng import Stream, aux_stream, path_stream
from src.sde_sim.simulator import PathBundle, compensator_drift, simulate

__all__ = [
    "TimeGrid",
    "PathBundle",
    "PathNoise",
    "MomentFit",
    "MomentReport",
    "Stream",
    "path_stream",
    "aux_stream",
    "sample_noise",
    "simulate",
    "compensator_drift",
    "moment_check",
]
