"""Offline numerical checks of the convergence theory.

Every function here consumes finished traces or problem data and returns a
``TheoryReport``; nothing in this module feeds back into the algorithms.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import WeightMatrix, contraction_factor
from .objectives import LocalObjective, local_gradients
from .sync import init_frost, init_gradient_tracking, frost_step, gradient_tracking_step

SLACK = -1e-9


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    passed: bool
    measured: float
    bound: float
    tolerance: float
    anchor: str
    detail: str = ""


@dataclass
class TheoryReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, *args, **kw) -> CheckResult:
        c = CheckResult(*args, **kw)
        self.checks.append(c)
        return c

    def extend(self, other: "TheoryReport") -> "TheoryReport":
        self.checks.extend(other.checks)
        return self

    def __getitem__(self, check_id: str) -> CheckResult:
        for c in self.checks:
            if c.check_id == check_id:
                return c
        raise KeyError(check_id)

    def to_text(self) -> str:
        lines = []
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            lines.append(f"{tag} {c.check_id}: measured={c.measured:.6g} bound={c.bound:.6g} "
                         f"tol={c.tolerance:.3g} [{c.anchor}]" + (f" {c.detail}" if c.detail else ""))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return repr(v)
            return v
        return {"passed": self.passed,
                "checks": [{k: clean(v) for k, v in asdict(c).items()} for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------- co-coercivity

def cocoercivity_check(f: LocalObjective, samples: int = 1000, seed: int = 0,
                       scale: float = 10.0, slack: float = SLACK) -> TheoryReport:
    """Sample pairs (x, y) and test
    <x-y, g(x)-g(y)> >= mu1 ||g(x)-g(y)||^2 + mu2 ||x-y||^2
    with mu1 = 1/(sigma+L), mu2 = sigma L/(sigma+L). ``measured`` is the worst
    normalised margin (margin / ||x-y||^2)."""
    sigma, L = float(f.strong_convexity), float(f.smoothness)
    mu1, mu2 = 1.0 / (sigma + L), sigma * L / (sigma + L)
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-scale, scale, size=(samples, f.dim))
    ys = rng.uniform(-scale, scale, size=(samples, f.dim))
    worst, violations = math.inf, 0
    for x, y in zip(xs, ys):
        dx = x - y
        dg = f.grad(x) - f.grad(y)
        margin = dx @ dg - mu1 * (dg @ dg) - mu2 * (dx @ dx)
        norm = max(dx @ dx, 1.0)
        worst = min(worst, margin / norm)
        if margin / norm < slack:
            violations += 1
    rep = TheoryReport()
    rep.add("cocoercivity", violations == 0, worst, 0.0, abs(slack),
            "co-coercivity extension for strongly convex smooth functions",
            f"violations={violations}/{samples} mu1={mu1:.6g} mu2={mu2:.6g}")
    return rep


# ----------------------------------------------------- consensus contraction

def _consensus_projector(weights: WeightMatrix, dim: int) -> np.ndarray:
    a = weights.entries
    n = a.shape[0]
    return np.kron(a - np.outer(np.ones(n), weights.fle), np.eye(dim))


def lemma3_contraction_check(weights: WeightMatrix, x0, epochs: int = 20,
                             tol: float = 1e-10, rate_tol: float = 1e-6) -> TheoryReport:
    """Consensus-only dynamics x(k) = A x(k-1): the simulated error
    ||x(k) - 1 (u x(k))|| against the dense power ||(A kron I - 1 u kron I)^k x(0)||,
    and the spectral radius of that matrix against ``contraction_factor``."""
    a = weights.entries
    n = a.shape[0]
    x = np.array(x0, dtype=float).reshape(n, -1)
    dim = x.shape[1]
    u = weights.fle
    m = _consensus_projector(weights, dim)
    v0 = x.reshape(-1)

    # (A - 1u)^k = A^k - 1u only for k >= 1, so k = 0 is not compared
    sim, dense = [], []
    xk = x.copy()
    for k in range(1, epochs + 1):
        xk = a @ xk
        sim.append(float(np.linalg.norm(xk - np.outer(np.ones(n), u @ xk))))
        dense.append(float(np.linalg.norm(np.linalg.matrix_power(m, k) @ v0)))
    sim, dense = np.array(sim), np.array(dense)
    gap = float(np.max(np.abs(sim - dense)))

    rho_dense = float(np.max(np.abs(np.linalg.eigvals(m))))
    rho = contraction_factor(weights)

    rep = TheoryReport()
    rep.add("consensus_error_equality", gap <= tol, gap, 0.0, tol,
            "consensus error equals matrix-power form", f"epochs={epochs}")
    rep.add("contraction_rate", abs(rho_dense - rho) <= rate_tol, rho_dense, rho, rate_tol,
            "consensus error decays at rate rho(A - 1u^T)")
    # the norm bound ||M^k|| <= rho^k needs M normal; check it only then
    if np.allclose(m @ m.T, m.T @ m, atol=1e-12):
        ks = np.arange(1, epochs + 1)
        bound = rho ** ks * np.linalg.norm(v0)
        excess = float(np.max(dense - bound))
        rep.add("contraction_norm_bound", excess <= tol, excess, 0.0, tol,
                "normal consensus matrix contracts by rho per step")
    return rep


# ------------------------------------------------- descent coefficient trace

def _geometric_fit(values: np.ndarray, floor: float = 1e-28):
    """Least-squares fit of log(values) = log C + k log lambda over entries above
    ``floor``. Returns (lambda, C, R^2, points used)."""
    k = np.arange(len(values))
    keep = values > floor
    if keep.sum() < 3:
        return 0.0, 0.0, 1.0, int(keep.sum())
    kk, yy = k[keep], np.log(values[keep])
    slope, icpt = np.polyfit(kk, yy, 1)
    pred = icpt + slope * kk
    ss_res = float(np.sum((yy - pred) ** 2))
    ss_tot = float(np.sum((yy - yy.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(slope)), float(np.exp(icpt)), r2, int(keep.sum())


def theorem1_coefficient_trace(run, transient: int | None = None, r2_min: float = 0.95) -> TheoryReport:
    """Contraction coefficient a_1(k) and the bias term of the distance recursion.

    ``run`` needs ``a1``, ``alpha``, ``e_diag``, ``u`` and ``local_grad_at_opt``
    (an ``AsyncRunResult`` has them). Row 0 is the initial state and carries no
    step, so it is skipped. Checks: a_1(k) < 1 for every k past ``transient``
    (default a quarter of the run) and the bias
    ||sum_i alpha_k grad f_i(x*) (1 - u_i/[e_i(k)]_i)||^2 decays geometrically.
    """
    a1 = np.asarray(run.a1, dtype=float)[1:]
    alpha = np.asarray(run.alpha, dtype=float)[1:]
    e_diag = np.asarray(run.e_diag, dtype=float)[:-1]   # e(k-1) set the step for epoch k
    u = np.asarray(run.u, dtype=float)
    g_star = np.asarray(run.local_grad_at_opt, dtype=float)
    K = len(a1)
    if transient is None:
        transient = K // 4

    late = a1[transient:]
    worst = float(np.max(late)) if len(late) else math.nan
    first_ok = next((k for k in range(K) if np.all(a1[k:] < 1.0)), K)

    bias = np.array([
        float(np.sum((alpha[k] * ((1.0 - u / e_diag[k]) @ g_star)) ** 2)) for k in range(K)
    ])
    lam, c, r2, used = _geometric_fit(bias)

    rep = TheoryReport()
    rep.add("a1_below_one", bool(len(late)) and worst < 1.0, worst, 1.0, 0.0,
            "distance contraction coefficient a_1(k) < 1",
            f"transient={transient} first_k_all_below={first_ok + 1}")
    rep.add("bias_geometric_decay", lam < 1.0 and r2 > r2_min, lam, 1.0, 0.0,
            "bias term bounded by C lambda^k, 0 < lambda < 1",
            f"C={c:.4g} R2={r2:.6f} points={used}")
    rep.a1_trace = a1  # type: ignore[attr-defined]
    rep.bias_trace = bias  # type: ignore[attr-defined]
    return rep


# ------------------------------------------------------ tracking identities

def frost_tracking_identity_check(weights: WeightMatrix, objectives, x0, ticks: int,
                                  alpha=0.05, tol: float = 1e-10) -> TheoryReport:
    """u z(t) = u Y(t)^{-1} grad f(x(t)) at every tick of synchronous FROST."""
    u = weights.fle
    state = init_frost(objectives, x0, alpha)
    worst = 0.0
    for t in range(ticks + 1):
        lhs = u @ state.z
        rhs = u @ (local_gradients(objectives, state.x) / np.diag(state.y)[:, None])
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        if t < ticks:
            state = frost_step(state, weights, objectives)
    rep = TheoryReport()
    rep.add("frost_tracking_identity", worst <= tol, worst, 0.0, tol,
            "FROST tracker holds the u-weighted normalised gradient average")
    return rep


def gradient_tracking_conservation_check(weights: WeightMatrix, objectives, x0, ticks: int,
                                         alpha=0.05, tol: float = 1e-12) -> TheoryReport:
    """mean(y(t)) = mean(grad f(x(t))) at every tick (doubly stochastic weights)."""
    state = init_gradient_tracking(objectives, x0, alpha)
    worst = 0.0
    for t in range(ticks + 1):
        gap = state.y.mean(axis=0) - local_gradients(objectives, state.x).mean(axis=0)
        worst = max(worst, float(np.max(np.abs(gap))))
        if t < ticks:
            state = gradient_tracking_step(state, weights, objectives)
    rep = TheoryReport()
    rep.add("gradient_tracking_conservation", worst <= tol, worst, 0.0, tol,
            "gradient tracker conserves the average gradient")
    return rep
