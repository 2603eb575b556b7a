"""Delay-robust dynamic average tracking with square-wave normalisation.

Discrete dynamics (one update per tick, x_dot(t) = x(t+1) - x(t)):

    r_i(t+1) = r_i(t) + db_i(t) - kappa' sum_j a_ij (r_i(t) - r_j(t - tau_ij(t)))
    s_i(t+1) = s_i(t) + dg(t)   - kappa' sum_j a_ij (s_i(t) - s_j(t - tau_ij(t)))

with kappa' = kappa / d_ii. The sum runs over the self-looped neighbourhood and
the self term is read through the channel like any other edge, so with a
constant delay d the settled shift of r after an input step db is
``u . db / (1 + kappa d)``; s picks up the same factor from the square wave,
and their ratio removes it.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .delay import DelayModel, HistoryBuffer, sample_delay, stale_read
from .graph import WeightMatrix
from .sync import ConfigurationWarning, NumericalFailure

SETTLE_TOL = 1e-9
SETTLE_WINDOW = 10


@dataclass(frozen=True)
class SquareWaveClock:
    """Synchronised square wave g(t) = 0.5 (sgn(sin(2 pi t / T_g)) + 1).

    Implemented on integers: g = 1 on [2mH, (2m+1)H), 0 on [(2m+1)H, (2m+2)H)
    with H = T_g / 2, so g(0) = 1 and every edge falls on a multiple of H.
    Before tick 0 the wave is low.
    """

    period: int

    def __post_init__(self):
        if self.period <= 0 or self.period % 2:
            raise ValueError(f"square-wave period must be a positive even integer, got {self.period}")

    @property
    def half(self) -> int:
        return self.period // 2

    def value(self, t: int) -> float:
        if t < 0:
            return 0.0
        return 1.0 if (t // self.half) % 2 == 0 else 0.0

    def delta(self, t: int) -> float:
        """g(t+1) - g(t)."""
        return self.value(t + 1) - self.value(t)


@dataclass
class TrackerState:
    """r (N, n), s (N,), their histories, gain kappa and the current tick."""

    r: np.ndarray
    s: np.ndarray
    kappa: float
    r_hist: HistoryBuffer
    s_hist: HistoryBuffer
    tick: int = 0
    flags: dict = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return self.r.shape[0]


def init_tracker(b0: np.ndarray, kappa: float, tau_max: int, *, s0: float = 1.0,
                 r_prehistory: float = 0.0, s_prehistory: float = 0.0) -> TrackerState:
    """r(0) = b(0), s(0) = g(0) = 1; r and s read as zero before tick 0."""
    b0 = np.array(b0, dtype=float)
    if b0.ndim == 1:
        b0 = b0[:, None]
    n = b0.shape[0]
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return TrackerState(
        r=b0.copy(),
        s=np.full(n, float(s0)),
        kappa=float(kappa),
        r_hist=HistoryBuffer(tau_max, np.full_like(b0, r_prehistory)),
        s_hist=HistoryBuffer(tau_max, np.full(n, float(s_prehistory))),
    )


def check_gain(kappa: float, weights: WeightMatrix | None = None) -> None:
    """Warn when the per-tick gain kappa' d_ii reaches 1 (overshoot, possible instability)."""
    if kappa >= 1.0:
        warnings.warn(f"gain kappa={kappa:.3g} >= 1 may destabilise delayed consensus",
                      ConfigurationWarning, stacklevel=2)


def consensus_step(x: np.ndarray, weights: WeightMatrix, kappa: float) -> np.ndarray:
    """One delay-free step x_i <- x_i - kappa' sum_j a_ij (x_i - x_j)."""
    check_gain(kappa, weights)
    a = weights.entries
    d = a.sum(axis=1)
    x = np.asarray(x, dtype=float)
    kp = (kappa / d).reshape((-1,) + (1,) * (x.ndim - 1))
    lap = d.reshape(kp.shape) * x - a @ x
    return x - kp * lap


def tracker_step(state: TrackerState, weights: WeightMatrix, delays: DelayModel,
                 clock: SquareWaveClock | None = None, db: np.ndarray | None = None,
                 ds: np.ndarray | None = None) -> TrackerState:
    """Advance one tick by direct stale reads (reference implementation).

    ``db`` and ``ds`` are input increments entering at this tick; the clock adds
    its own increment g(t+1) - g(t) to s.
    """
    t = state.tick
    a = weights.entries
    n = a.shape[0]
    r_hist, s_hist = state.r_hist.copy(), state.s_hist.copy()
    r_hist.publish(t, state.r)
    s_hist.publish(t, state.s)
    acc_r = np.zeros_like(state.r)
    acc_s = np.zeros(n)
    for i in range(n):
        for j in range(n):
            if a[i, j] <= 0:
                continue
            tau = sample_delay(delays, (j, i), t)
            acc_r[i] += a[i, j] * stale_read(r_hist, t, tau, node=j)
            acc_s[i] += a[i, j] * stale_read(s_hist, t, tau, node=j)
    d = a.sum(axis=1)
    r = state.r - state.kappa * (state.r - acc_r / d[:, None])
    s = state.s - state.kappa * (state.s - acc_s / d)
    if db is not None:
        r = r + np.asarray(db, dtype=float).reshape(r.shape)
    if ds is not None:
        s = s + np.asarray(ds, dtype=float)
    if clock is not None:
        s = s + clock.delta(t)
    return replace(state, r=r, s=s, r_hist=r_hist, s_hist=s_hist, tick=t + 1)


class TrackerEngine:
    """Kernel-backed multi-tick tracker over a fixed graph and delay model.

    Holds ring buffers sized ``tau_max + 1`` and advances r and s in place.
    """

    def __init__(self, weights: WeightMatrix, delays: DelayModel, b0: np.ndarray, kappa: float,
                 clock: SquareWaveClock | None = None, backend: str | None = None,
                 s0: float = 1.0, r_prehistory: float = 0.0, s_prehistory: float = 0.0):
        check_gain(kappa, weights)
        b0 = np.array(b0, dtype=float)
        if b0.ndim == 1:
            b0 = b0[:, None]
        self.weights = weights
        self.delays = delays
        self.kappa = float(kappa)
        self.clock = clock
        self.backend = backend
        self.edges = kernels.kernel_edges(weights.entries)
        self.delay_args = delays.kernel_args(self.edges[0], self.edges[1])
        depth = delays.tau_max + 1
        n, dim = b0.shape
        self.r = b0.copy()
        self.s = np.full(n, float(s0))
        self.rbuf = np.zeros((depth, n, dim))
        self.sbuf = np.zeros((depth, n))
        self.pre_r = np.full((n, dim), float(r_prehistory))
        self.pre_s = np.full(n, float(s_prehistory))
        self.tick = 0

    def advance(self, ticks: int, db: np.ndarray | None = None, ds: np.ndarray | None = None,
                window: int = SETTLE_WINDOW) -> tuple[float, float]:
        """Run ``ticks`` ticks; increments enter at the first one. Returns the
        max-norm change of (r, s) over the final ``window`` ticks."""
        inc_r = np.zeros_like(self.r) if db is None else np.asarray(db, dtype=float).reshape(self.r.shape)
        inc_s = np.zeros_like(self.s) if ds is None else np.asarray(ds, dtype=float).reshape(self.s.shape)
        half = 0 if self.clock is None else self.clock.half
        t0, t1 = self.tick, self.tick + int(ticks)
        out = kernels.run_tracker_ticks(
            self.r, self.s, self.rbuf, self.sbuf, self.pre_r, self.pre_s, t0, t1,
            np.ascontiguousarray(inc_r), np.ascontiguousarray(inc_s), self.kappa,
            self.edges, self.delay_args, half=half, window=window, backend=self.backend,
        )
        self.tick = t1
        return out

    def trace(self, ticks: int, every: int = 1):
        """Advance ``ticks`` ticks, yielding ``(tick, r, s)`` every ``every`` ticks
        (tick 0 state first when starting fresh)."""
        if self.tick == 0:
            yield 0, self.r.copy(), self.s.copy()
        end = self.tick + ticks
        while self.tick < end:
            step = min(every, end - self.tick)
            self.advance(step, window=0)
            yield self.tick, self.r.copy(), self.s.copy()


def equilibrium_shift_prediction(u: np.ndarray, db: np.ndarray, kappa: float, mean_tau: float) -> np.ndarray:
    """(u kron I_n) db / (1 + kappa tau_bar): settled r shift after an input step."""
    db = np.asarray(db, dtype=float)
    if db.ndim == 1:
        db = db[:, None]
    return (np.asarray(u, dtype=float) @ db) / (1.0 + kappa * mean_tau)


def normalized_average(c_r: np.ndarray, c_s_jump: float, tol: float = 1e-9) -> np.ndarray:
    """c_r / |c_s - c_s'|: delay-free weighted average recovered from the trackers."""
    jump = abs(float(c_s_jump))
    if jump < tol:
        raise NumericalFailure(f"s-tracker jump {jump:.3e} too small to normalise (unsettled epoch?)")
    return np.asarray(c_r, dtype=float) / jump
