"""Local objectives f_i and the global problem min (1/N) sum_i f_i(x)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class LocalObjective:
    """Smooth, strongly convex local function on R^n.

    Subclasses provide ``value`` and ``grad`` and set ``dim``, ``smoothness``
    (l_i) and ``strong_convexity`` (sigma_i).
    """

    dim: int
    smoothness: float
    strong_convexity: float

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def minimizer(self) -> np.ndarray | None:
        """Closed-form local minimizer if known."""
        return None

    def __call__(self, x):
        return self.value(x)


class Quadratic(LocalObjective):
    """``f(x) = a * ||x + c||^2``; l = sigma = 2a."""

    def __init__(self, shift, curvature: float = 1.0):
        if curvature <= 0:
            raise ValueError(f"curvature must be positive, got {curvature}")
        self.shift = np.atleast_1d(np.asarray(shift, dtype=float)).copy()
        self.curvature = float(curvature)
        self.dim = self.shift.size
        self.smoothness = 2.0 * self.curvature
        self.strong_convexity = 2.0 * self.curvature

    def value(self, x):
        d = np.asarray(x, dtype=float) + self.shift
        return float(self.curvature * d @ d)

    def grad(self, x):
        return 2.0 * self.curvature * (np.asarray(x, dtype=float) + self.shift)

    def minimizer(self):
        return -self.shift.copy()

    def hessian(self):
        return 2.0 * self.curvature * np.eye(self.dim)

    def __repr__(self):
        return f"Quadratic(shift={self.shift.tolist()}, curvature={self.curvature})"


class QuadraticForm(LocalObjective):
    """``f(x) = 0.5 (x - center)^T H (x - center)`` with symmetric positive definite H."""

    def __init__(self, hessian, center):
        h = np.atleast_2d(np.asarray(hessian, dtype=float))
        if not np.allclose(h, h.T):
            raise ValueError("hessian must be symmetric")
        eig = np.linalg.eigvalsh(h)
        if eig[0] <= 0:
            raise ValueError("hessian must be positive definite")
        self.H = h
        self.center = np.atleast_1d(np.asarray(center, dtype=float)).copy()
        self.dim = self.center.size
        self.smoothness = float(eig[-1])
        self.strong_convexity = float(eig[0])

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return float(0.5 * d @ self.H @ d)

    def grad(self, x):
        return self.H @ (np.asarray(x, dtype=float) - self.center)

    def minimizer(self):
        return self.center.copy()

    def hessian(self):
        return self.H.copy()

    def __repr__(self):
        return f"QuadraticForm(dim={self.dim}, sigma={self.strong_convexity:.4g}, L={self.smoothness:.4g})"


class RegularizedLogistic(LocalObjective):
    """Mean logistic loss plus ``(reg/2)||x||^2``.

    ``features`` is (m, n), ``labels`` in {-1, +1}.
    """

    def __init__(self, features, labels, reg: float = 0.1):
        if reg <= 0:
            raise ValueError("reg must be positive for strong convexity")
        self.features = np.atleast_2d(np.asarray(features, dtype=float))
        self.labels = np.asarray(labels, dtype=float)
        self.reg = float(reg)
        m, self.dim = self.features.shape
        spec = np.linalg.norm(self.features, 2) ** 2 if m else 0.0
        self.smoothness = self.reg + spec / (4.0 * m)
        self.strong_convexity = self.reg

    def value(self, x):
        z = -self.labels * (self.features @ np.asarray(x, dtype=float))
        return float(np.mean(np.logaddexp(0.0, z)) + 0.5 * self.reg * x @ x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        z = -self.labels * (self.features @ x)
        sig = 0.5 * (1.0 + np.tanh(0.5 * z))  # logistic(z), overflow-free
        return self.features.T @ (-self.labels * sig) / len(self.labels) + self.reg * x


def quadratic(shift, curvature: float = 1.0) -> Quadratic:
    return Quadratic(shift, curvature)


def integer_shift_quadratics(n_agents: int = 22, outlier: float | None = None) -> list[Quadratic]:
    """``f_i(x) = (x + i)^2`` for i = 1..N; with ``outlier`` set, agent 1 uses
    ``(x + outlier)^2`` instead."""
    objs = [Quadratic([float(i)]) for i in range(1, n_agents + 1)]
    if outlier is not None:
        objs[0] = Quadratic([float(outlier)])
    return objs


@dataclass
class GlobalProblem:
    objectives: Sequence[LocalObjective]
    _optimum: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.objectives:
            raise ValueError("a problem needs at least one objective")
        dims = {f.dim for f in self.objectives}
        if len(dims) != 1:
            raise ValueError(f"objectives disagree on dimension: {sorted(dims)}")
        self.objectives = list(self.objectives)

    @property
    def n_agents(self) -> int:
        return len(self.objectives)

    @property
    def dim(self) -> int:
        return self.objectives[0].dim

    @property
    def smoothness(self) -> np.ndarray:
        return np.array([f.smoothness for f in self.objectives])

    @property
    def strong_convexity(self) -> np.ndarray:
        return np.array([f.strong_convexity for f in self.objectives])

    @property
    def optimum(self) -> np.ndarray:
        if self._optimum is None:
            self._optimum = global_optimum(self)
        return self._optimum

    def value(self, x) -> float:
        return float(np.mean([f.value(x) for f in self.objectives]))

    def grad(self, x) -> np.ndarray:
        return np.mean([f.grad(x) for f in self.objectives], axis=0)

    def local_gradients(self, X: np.ndarray) -> np.ndarray:
        """Row i is grad f_i evaluated at row i of ``X`` (shape (N, n))."""
        return np.stack([f.grad(X[i]) for i, f in enumerate(self.objectives)])


def local_gradients(objectives: Sequence[LocalObjective], X: np.ndarray) -> np.ndarray:
    return np.stack([f.grad(X[i]) for i, f in enumerate(objectives)])


def global_optimum(p: GlobalProblem | Sequence[LocalObjective], tol: float = 1e-10,
                   max_iter: int = 1_000_000) -> np.ndarray:
    """Minimizer of the uniform average. Closed form when every objective is a
    quadratic; gradient descent on F until ||grad F|| < tol otherwise."""
    objs = p.objectives if isinstance(p, GlobalProblem) else list(p)
    if all(hasattr(f, "hessian") for f in objs):
        hsum = sum(f.hessian() for f in objs)
        rhs = sum(f.hessian() @ f.minimizer() for f in objs)
        return np.linalg.solve(hsum, rhs)

    n = len(objs)
    L = np.mean([f.smoothness for f in objs])
    x = np.zeros(objs[0].dim)
    for _ in range(max_iter):
        g = sum(f.grad(x) for f in objs) / n
        if np.linalg.norm(g) < tol:
            return x
        x = x - g / L
    raise RuntimeError(f"gradient descent did not reach ||grad F|| < {tol}")


def check_assumption5(p: GlobalProblem | Sequence[float]) -> tuple[bool, float]:
    """Smoothness homogeneity ratio ``(sum l)^2 / (N sum l^2)``; passes if > 3/4.

    The ratio never exceeds 1 (Cauchy-Schwarz).
    """
    if isinstance(p, GlobalProblem):
        l = p.smoothness
    else:
        l = np.array([getattr(f, "smoothness", f) for f in p], dtype=float)
    ratio = float(l.sum() ** 2 / (len(l) * np.sum(l * l)))
    return ratio > 0.75, ratio
