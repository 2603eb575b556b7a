"""Delay-robust asynchronous FROST.

Time is split into epochs of H = T_g / 2 ticks, one per half period of the
shared square wave. At each epoch boundary k every agent

1. folds the settled tracker shift of the previous epoch into its
   weighted-gradient estimate p (normalising by the s-tracker jump),
2. takes a descent step x(k) = A x(k-1) - alpha_k p(k),
3. advances its eigenvector estimate e(k) = A e(k-1),
4. injects the change of its normalised gradient grad f_i(x_i)/[e_i]_i into r,

and the r/s trackers then run H ticks under delayed reads. Because H exceeds
tau_max, a delayed read of x or e taken at a boundary always lands in the
previous epoch, so the x and e updates use last epoch's values directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .delay import DelayModel
from .graph import WeightMatrix
from .objectives import GlobalProblem, LocalObjective, check_assumption5, local_gradients
from .sync import NumericalFailure
from .tracker import SETTLE_TOL, SETTLE_WINDOW, SquareWaveClock, TrackerEngine, check_gain

DEFAULT_SETTLE_FACTOR = 40.0


class AssumptionViolation(ValueError):
    """Problem data violates an assumption the requested policy relies on."""


@dataclass(frozen=True)
class EpochSchedule:
    """Epoch length ``half`` (= T_g / 2 ticks) and epoch budget."""

    half: int
    epochs: int
    settle_tol: float = SETTLE_TOL
    window: int = SETTLE_WINDOW

    def __post_init__(self):
        if self.half < 2:
            raise ValueError("epoch length must be at least 2 ticks")
        if self.epochs < 0:
            raise ValueError("epoch budget must be nonnegative")

    @property
    def period(self) -> int:
        return 2 * self.half

    @classmethod
    def auto(cls, tau_max: int, kappa: float, epochs: int, row_sum: float = 1.0,
             settle_ticks: int | None = None, **kw) -> "EpochSchedule":
        """H = tau_max + settling window (default 40 / kappa' ticks)."""
        if settle_ticks is None:
            settle_ticks = math.ceil(DEFAULT_SETTLE_FACTOR / (kappa / row_sum))
        return cls(half=int(tau_max) + int(settle_ticks), epochs=epochs, **kw)

    def validate(self, delays: DelayModel) -> None:
        if self.half <= delays.tau_max:
            raise ValueError(
                f"epoch length {self.half} must exceed tau_max={delays.tau_max} so boundary reads "
                "land in the previous epoch"
            )


@dataclass
class AsyncAgentState:
    """Epoch-level state of all agents (rows are agents)."""

    x: np.ndarray            # (N, n) optimum estimates
    e: np.ndarray            # (N, N) eigenvector estimates, row i held by agent i
    p: np.ndarray            # (N, n) weighted-average normalised gradient
    grad_norm: np.ndarray    # (N, n) grad f_i(x_i) / [e_i]_i at the current x, e
    r_mark: np.ndarray       # (N, n) r at the end of the previous epoch
    s_mark: np.ndarray       # (N,)  s at the end of the previous epoch
    epoch: int = 0
    settled: bool = True


def normalized_gradients(objectives: Sequence[LocalObjective], x: np.ndarray, e: np.ndarray) -> np.ndarray:
    diag = np.diag(e)
    if np.min(diag) <= 0:
        raise NumericalFailure("eigenvector estimate has a nonpositive diagonal entry")
    return local_gradients(objectives, x) / diag[:, None]


# ------------------------------------------------------------------ updates

def eigen_update(e: np.ndarray, weights: WeightMatrix) -> np.ndarray:
    """e_i(k) = sum_j a_ij e_j(k-1)."""
    return weights.entries @ e


def descent_step(x: np.ndarray, weights: WeightMatrix, alpha, p: np.ndarray) -> np.ndarray:
    """x_i(k) = sum_j a_ij x_j(k-1) - alpha_k p_i(k); ``alpha`` may be per agent."""
    a = np.asarray(alpha, dtype=float)
    a = a[:, None] if a.ndim == 1 else float(a)
    return weights.entries @ x - a * p


def accumulate_average(p: np.ndarray, r_shift: np.ndarray, s_jump: np.ndarray,
                       tol: float = 1e-9) -> np.ndarray:
    """p <- p + (r shift) / |s jump| per agent."""
    jump = np.abs(np.asarray(s_jump, dtype=float))
    if np.min(jump) < tol:
        raise NumericalFailure(
            f"s-tracker jump {np.min(jump):.3e} below {tol:g}; epoch unsettled or kappa*tau too large"
        )
    return p + r_shift / jump[:, None]


def inject_and_track(engine: TrackerEngine, increment: np.ndarray, ticks: int,
                     window: int = SETTLE_WINDOW, tol: float = SETTLE_TOL) -> bool:
    """Inject ``increment`` into r at the current tick and run the trackers for
    ``ticks`` ticks. Returns True if r and s settled (max change over the last
    ``window`` ticks below ``tol``)."""
    dr, ds = engine.advance(ticks, db=increment, window=window)
    return dr < tol and ds < tol


def theorem1_coefficient(smoothness, e_diag, u, alpha: float) -> float:
    """a_1(k) = 4 + 4N sum_i (l_i alpha u_i/[e_i]_i)^2 - 8 alpha sum_i u_i l_i/[e_i]_i."""
    l = np.asarray(smoothness, dtype=float)
    q = np.asarray(u, dtype=float) / np.asarray(e_diag, dtype=float)
    n = len(l)
    return float(4.0 + 4.0 * n * np.sum((l * alpha * q) ** 2) - 8.0 * alpha * np.sum(q * l))


def step_size_theorem2(smoothness, e_diag, u, strict: bool = True) -> tuple[float, float]:
    """Minimiser of the contraction coefficient, alpha_k = -B_k / (2 A_k), and a_1(k) there.

    A_k = 4N sum l_i^2 (u_i/[e_i]_i)^2, B_k = -8 sum u_i l_i/[e_i]_i. With
    ``strict`` the smoothness constants must satisfy the homogeneity ratio
    (> 3/4) and the resulting a_1 must lie in [0, 1).
    """
    l = np.asarray(smoothness, dtype=float)
    ok, ratio = check_assumption5(l)
    if strict and not ok:
        raise AssumptionViolation(
            f"smoothness ratio (sum l)^2/(N sum l^2) = {ratio:.6g} <= 3/4; no admissible step size"
        )
    q = np.asarray(u, dtype=float) / np.asarray(e_diag, dtype=float)
    n = len(l)
    a_k = 4.0 * n * np.sum((l * q) ** 2)
    b_k = -8.0 * np.sum(q * l)
    alpha = -b_k / (2.0 * a_k)
    a1 = 4.0 + a_k * alpha**2 + b_k * alpha
    if strict and not (-1e-12 <= a1 < 1.0):
        raise AssumptionViolation(f"a_1 = {a1:.6g} outside [0, 1) at the current eigenvector estimates")
    return float(alpha), float(max(a1, 0.0) if abs(a1) < 1e-12 else a1)


class StepPolicy:
    """Step size per epoch: ``theorem2``, a fixed float, or ``{'diminishing': a0}``."""

    def __init__(self, spec, smoothness: np.ndarray, u: np.ndarray):
        self.spec = spec
        self.l = np.asarray(smoothness, dtype=float)
        self.u = np.asarray(u, dtype=float)
        if spec == "theorem2":
            ok, ratio = check_assumption5(self.l)
            if not ok:
                raise AssumptionViolation(
                    f"theorem2 step size needs (sum l)^2/(N sum l^2) > 3/4, got {ratio:.6g}"
                )
        elif isinstance(spec, dict):
            if set(spec) != {"diminishing"}:
                raise ValueError(f"unknown step policy {spec!r}")
        elif not isinstance(spec, (int, float)) or spec < 0:
            raise ValueError(f"unknown step policy {spec!r}")

    def __call__(self, k: int, e_diag: np.ndarray) -> tuple[float, float]:
        if self.spec == "theorem2":
            return step_size_theorem2(self.l, e_diag, self.u, strict=False)
        if isinstance(self.spec, dict):
            alpha = float(self.spec["diminishing"]) / k
        else:
            alpha = float(self.spec)
        return alpha, theorem1_coefficient(self.l, e_diag, self.u, alpha)


# ---------------------------------------------------------------- run loop

@dataclass
class AsyncRunResult:
    """Per-epoch record. Row k holds x(k), e(k) and the direction p(k), step
    alpha_k and coefficient a_1(k) that produced x(k) (row 0: initial state)."""

    x: np.ndarray           # (K+1, N, n)
    p: np.ndarray           # (K+1, N, n)
    e_diag: np.ndarray      # (K+1, N)
    e_err: np.ndarray       # (K+1,) max_i ||e_i - u||_inf
    alpha: np.ndarray       # (K+1,)
    a1: np.ndarray          # (K+1,)
    tracking_err: np.ndarray  # (K+1,) max_i ||p_i(k) - u . gradnorm(k-1)||
    settled: np.ndarray     # (K+1,) bool, tracker settled in the epoch ending at row k's boundary
    ticks: np.ndarray       # (K+1,) boundary tick of row k
    u: np.ndarray
    x_star: np.ndarray
    smoothness: np.ndarray
    schedule: EpochSchedule
    local_grad_at_opt: np.ndarray = field(default=None)

    @property
    def epochs(self) -> int:
        return self.x.shape[0] - 1

    @property
    def final(self) -> np.ndarray:
        return self.x[-1]

    def consensus_error(self) -> np.ndarray:
        xbar = np.einsum("i,kid->kd", self.u, self.x)
        return np.sqrt(np.sum((self.x - xbar[:, None, :]) ** 2, axis=(1, 2)))

    def distance_to_optimum(self) -> np.ndarray:
        """(K+1, N) per-agent ||x_i(k) - x*||."""
        return np.linalg.norm(self.x - self.x_star[None, None, :], axis=2)


def _initial_rows(x0, n_agents: int, dim: int) -> np.ndarray:
    x = np.array(x0, dtype=float)
    if x.ndim == 0:
        return np.full((n_agents, dim), float(x))
    if x.ndim == 1:
        return x[:, None] if (x.size == n_agents and dim == 1) else np.tile(x, (n_agents, 1))
    return x


def run_async_frost(problem: GlobalProblem, weights: WeightMatrix, delays: DelayModel, *,
                    kappa: float = 0.01, epochs: int = 40, schedule: EpochSchedule | None = None,
                    alpha="theorem2", x0=0.0, initial_average: str = "exact",
                    backend: str | None = None, early_stop: float | None = None,
                    tracker_log: list | None = None) -> AsyncRunResult:
    """Simulate the delay-robust asynchronous FROST updates.

    ``initial_average='exact'`` seeds p with the u-weighted average of the
    initial normalised gradients; ``'tracked'`` reads it from the trackers at
    the end of epoch 0 instead (r over s, both excited from zero at tick 0).
    """
    objs = problem.objectives
    n, dim = problem.n_agents, problem.dim
    if weights.n != n:
        raise ValueError(f"weights are {weights.n}x{weights.n} but there are {n} agents")
    if initial_average not in ("exact", "tracked"):
        raise ValueError(f"initial_average must be 'exact' or 'tracked', got {initial_average!r}")
    u = weights.fle
    row_sum = float(np.max(weights.entries.sum(axis=1)))
    if schedule is None:
        schedule = EpochSchedule.auto(delays.tau_max, kappa, epochs, row_sum=row_sum)
    schedule.validate(delays)
    check_gain(kappa, weights)
    policy = StepPolicy(alpha, problem.smoothness, u)
    H = schedule.half
    K = schedule.epochs

    x = _initial_rows(x0, n, dim)
    e = np.eye(n)
    g_norm = normalized_gradients(objs, x, e)
    engine = TrackerEngine(weights, delays, g_norm, kappa, clock=SquareWaveClock(2 * H),
                           backend=backend, s0=1.0, r_prehistory=0.0, s_prehistory=0.0)

    # epoch 0: trackers settle on the initial inputs, ticks [0, H-1)
    dr, ds = engine.advance(H - 1, window=schedule.window)
    settled0 = dr < schedule.settle_tol and ds < schedule.settle_tol
    if initial_average == "exact":
        p = np.tile(u @ g_norm, (n, 1))
    else:
        if np.min(np.abs(engine.s)) < 1e-9:
            raise NumericalFailure("s tracker did not build up during epoch 0")
        p = engine.r / engine.s[:, None]
    state = AsyncAgentState(x=x, e=e, p=p, grad_norm=g_norm, r_mark=engine.r.copy(),
                            s_mark=engine.s.copy(), epoch=0, settled=settled0)
    if tracker_log is not None:
        tracker_log.append((engine.tick, engine.r.copy(), engine.s.copy()))

    xs, ps, eds, eerr = [x.copy()], [p.copy()], [np.diag(e).copy()], [np.max(np.abs(e - u))]
    alphas, a1s, terr = [math.nan], [math.nan], [float(np.max(np.abs(p - u @ g_norm)))]
    settled, ticks = [settled0], [0]

    for k in range(1, K + 1):
        if k >= 2:
            state.p = accumulate_average(state.p, engine.r - state.r_mark, engine.s - state.s_mark)
            state.r_mark, state.s_mark = engine.r.copy(), engine.s.copy()
        target = u @ state.grad_norm
        alpha_k, a1_k = policy(k, np.diag(state.e))

        x_new = descent_step(state.x, weights, alpha_k, state.p)
        e_new = eigen_update(state.e, weights)
        g_new = normalized_gradients(objs, x_new, e_new)
        increment = g_new - state.grad_norm

        boundary = engine.tick + 1
        ok = inject_and_track(engine, increment, H, schedule.window, schedule.settle_tol)
        if tracker_log is not None:
            tracker_log.append((engine.tick, engine.r.copy(), engine.s.copy()))

        xs.append(x_new.copy())
        ps.append(state.p.copy())
        eds.append(np.diag(e_new).copy())
        eerr.append(float(np.max(np.abs(e_new - u))))
        alphas.append(alpha_k)
        a1s.append(a1_k)
        terr.append(float(np.max(np.linalg.norm(state.p - target, axis=1))))
        settled.append(state.settled)
        ticks.append(boundary)

        moved = float(np.max(np.linalg.norm(x_new - state.x, axis=1)))
        state.x, state.e, state.grad_norm, state.epoch, state.settled = x_new, e_new, g_new, k, ok
        if early_stop is not None and moved < early_stop:
            break

    x_star = problem.optimum
    return AsyncRunResult(
        x=np.array(xs), p=np.array(ps), e_diag=np.array(eds), e_err=np.array(eerr),
        alpha=np.array(alphas), a1=np.array(a1s), tracking_err=np.array(terr),
        settled=np.array(settled, dtype=bool), ticks=np.array(ticks), u=np.array(u),
        x_star=np.array(x_star), smoothness=problem.smoothness, schedule=schedule,
        local_grad_at_opt=local_gradients(objs, np.tile(x_star, (n, 1))),
    )


def reference_weighted_descent(problem: GlobalProblem, weights: WeightMatrix, *, epochs: int,
                               alpha="theorem2", x0=0.0) -> np.ndarray:
    """Delay-free epoch recursion the asynchronous run reduces to:
    x(k) = A x(k-1) - alpha_k 1 (u . gradnorm(x(k-1), e(k-1))), e(k) = A e(k-1).

    Returns x for k = 0..epochs, shape (epochs+1, N, n).
    """
    objs = problem.objectives
    n, dim = problem.n_agents, problem.dim
    u = weights.fle
    policy = StepPolicy(alpha, problem.smoothness, u)
    x = _initial_rows(x0, n, dim)
    e = np.eye(n)
    out = [x.copy()]
    for k in range(1, epochs + 1):
        direction = u @ normalized_gradients(objs, x, e)
        alpha_k, _ = policy(k, np.diag(e))
        x = weights.entries @ x - alpha_k * np.tile(direction, (n, 1))
        e = weights.entries @ e
        out.append(x.copy())
    return np.array(out)
