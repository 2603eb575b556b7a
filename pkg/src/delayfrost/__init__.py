"""Delay-robust distributed optimisation over directed graphs.

Row-stochastic gradient tracking (FROST) made tolerant to bounded,
time-varying communication delays by a square-wave normalised dynamic
average tracker, plus the delay-free baselines and validation tooling.
"""
from ._accel import DEFAULT_BACKEND, HAVE_NUMBA
from .async_frost import (AssumptionViolation, AsyncRunResult, EpochSchedule, run_async_frost,
                          step_size_theorem2)
from .delay import DelayModel
from .graph import DirectedGraph, WeightMatrix, build_graph, build_weights, first_left_eigenvector
from .objectives import GlobalProblem, Quadratic, integer_shift_quadratics
from .sync import run_sync
from .tracker import SquareWaveClock, TrackerEngine

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation", "AsyncRunResult", "DEFAULT_BACKEND", "DelayModel", "DirectedGraph",
    "EpochSchedule", "GlobalProblem", "HAVE_NUMBA", "Quadratic", "SquareWaveClock", "TrackerEngine",
    "WeightMatrix", "build_graph", "build_weights", "first_left_eigenvector", "integer_shift_quadratics",
    "run_async_frost", "run_sync", "step_size_theorem2",
]
