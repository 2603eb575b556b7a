"""Delay-free baselines: DGD, gradient tracking, ADD-OPT and FROST.

Every step has the signature ``step(state, weights, objectives) -> state`` and
returns a new state; inputs are never mutated. States hold per-agent rows:
``x`` is (N, n).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

import numpy as np

from .graph import COLUMN, DOUBLY, ROW, WeightMatrix
from .objectives import LocalObjective, local_gradients

StepSize = Union[float, np.ndarray, Callable[[int], float]]


class ConfigurationWarning(UserWarning):
    """Algorithm runs, but its convergence guarantee does not apply."""


class NumericalFailure(ArithmeticError):
    """A divisor collapsed; usually means the weights are not primitive."""


@dataclass(frozen=True)
class SyncRunState:
    algorithm: str
    x: np.ndarray
    alpha: StepSize
    tick: int = 0
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    w: np.ndarray | None = None


def _alpha(state: SyncRunState) -> float | np.ndarray:
    a = state.alpha
    if callable(a):
        return a(state.tick)
    return a


def _alpha_col(a) -> float | np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else float(a)


def diminishing(alpha0: float) -> Callable[[int], float]:
    """``alpha_t = alpha0 / (t + 1)``: divergent sum, summable squares."""
    def schedule(t: int) -> float:
        return alpha0 / (t + 1)
    return schedule


def _as_rows(x0, n_agents: int) -> np.ndarray:
    x = np.array(x0, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if x.size == n_agents else np.tile(x, (n_agents, 1))
    return x


def _require(weights: WeightMatrix, kinds: tuple[str, ...], algorithm: str) -> None:
    if weights.kind not in kinds:
        warnings.warn(
            f"{algorithm} expects {' or '.join(kinds)} weights, got {weights.kind}; "
            "convergence is not guaranteed",
            ConfigurationWarning,
            stacklevel=3,
        )


# --------------------------------------------------------------------- DGD

def init_dgd(objectives, x0, alpha: StepSize = None) -> SyncRunState:
    x = _as_rows(x0, len(objectives))
    return SyncRunState("dgd", x, diminishing(0.5) if alpha is None else alpha)


def dgd_step(state: SyncRunState, weights: WeightMatrix, objectives) -> SyncRunState:
    _require(weights, (DOUBLY,), "DGD")
    a = weights.entries
    g = local_gradients(objectives, state.x)
    x = a @ state.x - _alpha_col(_alpha(state)) * g
    return replace(state, x=x, tick=state.tick + 1)


# ------------------------------------------------------- gradient tracking

def init_gradient_tracking(objectives, x0, alpha: StepSize = 0.05) -> SyncRunState:
    x = _as_rows(x0, len(objectives))
    return SyncRunState("gradient_tracking", x, alpha, y=local_gradients(objectives, x))


def gradient_tracking_step(state: SyncRunState, weights: WeightMatrix, objectives) -> SyncRunState:
    _require(weights, (DOUBLY,), "gradient tracking")
    a = weights.entries
    x_new = a @ state.x - _alpha_col(_alpha(state)) * state.y
    y_new = a @ state.y + local_gradients(objectives, x_new) - local_gradients(objectives, state.x)
    return replace(state, x=x_new, y=y_new, tick=state.tick + 1)


# ----------------------------------------------------------------- ADD-OPT

def init_addopt(objectives, x0, alpha: StepSize = 0.05) -> SyncRunState:
    x = _as_rows(x0, len(objectives))
    y = np.ones(len(objectives))
    z = x / y[:, None]
    return SyncRunState("addopt", x, alpha, y=y, z=z, w=local_gradients(objectives, z))


def addopt_step(state: SyncRunState, weights: WeightMatrix, objectives) -> SyncRunState:
    """x <- Ax - alpha w; y <- Ay; z <- x/y; w <- Aw + grad(z_new) - grad(z)."""
    _require(weights, (COLUMN, DOUBLY), "ADD-OPT")
    a = weights.entries
    x_new = a @ state.x - _alpha_col(_alpha(state)) * state.w
    y_new = a @ state.y
    if np.min(y_new) < 1e-12:
        raise NumericalFailure(f"ADD-OPT scaling y collapsed to {np.min(y_new):.3e}")
    z_new = x_new / y_new[:, None]
    w_new = a @ state.w + local_gradients(objectives, z_new) - local_gradients(objectives, state.z)
    return replace(state, x=x_new, y=y_new, z=z_new, w=w_new, tick=state.tick + 1)


# ------------------------------------------------------------------- FROST

def init_frost(objectives, x0, alpha: StepSize = 0.05) -> SyncRunState:
    x = _as_rows(x0, len(objectives))
    n = len(objectives)
    return SyncRunState("frost", x, alpha, y=np.eye(n), z=local_gradients(objectives, x))


def frost_step(state: SyncRunState, weights: WeightMatrix, objectives) -> SyncRunState:
    """y <- Ay; x <- Ax - alpha z; z <- Az + grad(x_new)/[y_new]_ii - grad(x)/[y]_ii.

    ``alpha`` may be a per-agent vector (uncoordinated step sizes).
    """
    _require(weights, (ROW, DOUBLY), "FROST")
    a = weights.entries
    y_new = a @ state.y
    d_old, d_new = np.diag(state.y), np.diag(y_new)
    if np.min(d_new) <= 0:
        raise NumericalFailure("FROST eigenvector estimate has a nonpositive diagonal entry")
    x_new = a @ state.x - _alpha_col(_alpha(state)) * state.z
    z_new = (
        a @ state.z
        + local_gradients(objectives, x_new) / d_new[:, None]
        - local_gradients(objectives, state.x) / d_old[:, None]
    )
    return replace(state, x=x_new, y=y_new, z=z_new, tick=state.tick + 1)


STEPPERS = {
    "dgd": (init_dgd, dgd_step),
    "gradient_tracking": (init_gradient_tracking, gradient_tracking_step),
    "addopt": (init_addopt, addopt_step),
    "frost": (init_frost, frost_step),
}


def run_sync(algorithm: str, weights: WeightMatrix, objectives: Sequence[LocalObjective], x0,
             ticks: int, alpha: StepSize = None, callback=None) -> list[SyncRunState]:
    """Run ``ticks`` steps and return every state, the initial one included."""
    init, step = STEPPERS[algorithm]
    state = init(objectives, x0) if alpha is None else init(objectives, x0, alpha)
    states = [state]
    with warnings.catch_warnings():
        warnings.simplefilter("once", ConfigurationWarning)
        for _ in range(ticks):
            state = step(state, weights, objectives)
            states.append(state)
            if callback is not None:
                callback(state)
    return states
