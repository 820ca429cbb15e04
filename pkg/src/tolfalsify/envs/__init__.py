"""Parametric benchmark simulators."""

from .base import (
    DYNAMICS,
    SIMULATIONS,
    DeviationError,
    DeviationSpace,
    Dynamics,
    SimulationCounter,
    SystemInstance,
    SystemModel,
    instantiate,
    rk4_step,
    simulate,
)
from .registry import BENCHMARKS, SYSTEMS, make_model

__all__ = [
    "BENCHMARKS",
    "DYNAMICS",
    "SIMULATIONS",
    "SYSTEMS",
    "DeviationError",
    "DeviationSpace",
    "Dynamics",
    "SimulationCounter",
    "SystemInstance",
    "SystemModel",
    "instantiate",
    "make_model",
    "rk4_step",
    "simulate",
]
