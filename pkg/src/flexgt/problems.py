"""Local objective families with exact gradients and Gaussian stochastic oracles.

All gradient routines are vectorized over nodes: ``X`` is an ``(n, p)`` array
whose row ``i`` is the point at which node ``i`` evaluates ``grad f_i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Problem",
    "RidgeProblem",
    "LogisticNonconvexProblem",
    "GradientSample",
    "make_ridge",
    "make_least_squares",
    "make_nonconvex",
    "problem_from_dict",
    "grad",
    "stoch_grad",
    "optimum",
    "heterogeneity",
]

REGIMES = ("strongly_convex", "convex", "nonconvex")


@dataclass(frozen=True)
class GradientSample:
    value: np.ndarray
    node: int
    snapshot: np.ndarray


@dataclass(frozen=True)
class Problem:
    """Base class: ``n`` local objectives on ``R^p`` with smoothness ``L``.

    ``noise`` selects how ``sigma`` is spread over coordinates: ``"total"``
    gives per-coordinate variance ``sigma**2 / p`` (so ``E||delta||^2 = sigma**2``),
    ``"per_coordinate"`` gives variance ``sigma**2`` on every coordinate.
    """

    n: int
    p: int
    regime: str
    L: float
    mu: float
    sigma: float
    seed: int | None = None
    noise: str = "total"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "strongly_convex" and not self.mu > 0:
            raise ValueError("strongly convex problems need mu > 0")
        if self.noise not in ("total", "per_coordinate"):
            raise ValueError(f"unknown noise convention {self.noise!r}")

    # subclasses implement the two vectorized primitives
    def local_values(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def local_grads(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def noise_scale(self) -> float:
        if self.noise == "total":
            return self.sigma / np.sqrt(self.p)
        return self.sigma

    def grad_i(self, i: int, x: np.ndarray) -> np.ndarray:
        if not 0 <= i < self.n:
            raise IndexError(f"node index {i} out of range for n={self.n}")
        X = np.zeros((self.n, self.p))
        X[i] = x
        return self.local_grads(X)[i]

    def value(self, x: np.ndarray) -> float:
        """Global objective ``f(x) = mean_i f_i(x)``."""
        return float(self.local_values(np.broadcast_to(x, (self.n, self.p))).mean())

    def full_grad(self, x: np.ndarray) -> np.ndarray:
        return self.local_grads(np.broadcast_to(x, (self.n, self.p))).mean(axis=0)

    def sample_grads(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One stochastic gradient per node, all nodes at once."""
        G = self.local_grads(X)
        if self.sigma > 0:
            G = G + self.noise_scale * rng.standard_normal(G.shape)
        return G

    def optimum(self) -> np.ndarray | None:
        return None

    def f_star(self) -> float | None:
        xs = self.optimum()
        return None if xs is None else self.value(xs)

    def f_gap(self, x: np.ndarray, f_star: float) -> float:
        return self.value(x) - f_star

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class RidgeProblem(Problem):
    """``f_i(x) = (h_i^T x - vbar_i)^2 + (mu/2)||x||^2`` (noise constant dropped)."""

    H: np.ndarray = field(default=None, repr=False)
    vbar: np.ndarray = field(default=None, repr=False)

    def local_values(self, X):
        r = np.einsum("ij,ij->i", self.H, X) - self.vbar
        return r**2 + 0.5 * self.mu * np.einsum("ij,ij->i", X, X)

    def local_grads(self, X):
        r = np.einsum("ij,ij->i", self.H, X) - self.vbar
        return 2.0 * self.H * r[:, None] + self.mu * X

    @property
    def hessian(self) -> np.ndarray:
        return 2.0 * self.H.T @ self.H / self.n + self.mu * np.eye(self.p)

    def optimum(self):
        A = self.hessian
        b = 2.0 * self.H.T @ self.vbar / self.n
        if self.mu > 0:
            return np.linalg.solve(A, b)
        return np.linalg.lstsq(A, b, rcond=None)[0]

    def f_gap(self, x, f_star):
        # quadratic: f(x) - f(x*) = d^T A d / 2 exactly, free of cancellation
        d = np.asarray(x) - self.optimum()
        return float(0.5 * d @ self.hessian @ d)

    def to_dict(self):
        return {
            "family": "ridge",
            "n": self.n,
            "p": self.p,
            "regime": self.regime,
            "mu": self.mu,
            "sigma": self.sigma,
            "L": self.L,
            "seed": self.seed,
            "noise": self.noise,
            "H": self.H.tolist(),
            "vbar": self.vbar.tolist(),
        }


def _ridge(H, vbar, mu, sigma, seed=None, noise="total", regime=None) -> RidgeProblem:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    vbar = np.atleast_1d(np.asarray(vbar, dtype=float))
    n, p = H.shape
    L = 2.0 * float(np.max(np.einsum("ij,ij->i", H, H))) + mu
    if regime is None:
        regime = "strongly_convex" if mu > 0 else "convex"
    H.setflags(write=False)
    vbar.setflags(write=False)
    return RidgeProblem(n=n, p=p, regime=regime, L=L, mu=mu, sigma=sigma, seed=seed, noise=noise, H=H, vbar=vbar)


def make_ridge(
    n: int,
    p: int,
    mu: float,
    sigma: float,
    seed: int | None = None,
    *,
    H: np.ndarray | None = None,
    vbar: np.ndarray | None = None,
    noise: str = "total",
) -> RidgeProblem:
    """Distributed ridge regression with ``h_i ~ U[0,1]^p`` and ``vbar_i ~ U[0,1]``.

    ``H``/``vbar`` may be passed explicitly (e.g. for hand-checked instances).
    """
    if n < 1 or p < 1:
        raise ValueError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    if not mu > 0:
        raise ValueError(f"ridge regularization mu must be > 0, got {mu}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    if H is None:
        H = rng.random((n, p))
    if vbar is None:
        vbar = rng.random(n)
    return _ridge(np.reshape(H, (n, p)), np.reshape(vbar, (n,)), mu, sigma, seed, noise)


def make_least_squares(n: int, p: int, sigma: float, seed: int | None = None, *, noise: str = "total") -> RidgeProblem:
    """Ridge family with ``mu = 0``; treated as merely convex."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    rng = np.random.default_rng(seed)
    return _ridge(rng.random((n, p)), rng.random(n), 0.0, sigma, seed, noise, regime="convex")


@dataclass(frozen=True)
class LogisticNonconvexProblem(Problem):
    """Logistic loss plus the bounded nonconvex penalty ``lam * sum x_d^2 / (1 + x_d^2)``.

    ``A`` has shape ``(n, m, p)`` and labels ``b`` shape ``(n, m)`` in ``{-1, +1}``.
    Both terms are non-negative, so ``f* >= 0``.
    """

    A: np.ndarray = field(default=None, repr=False)
    b: np.ndarray = field(default=None, repr=False)
    lam: float = 0.1

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def _margins(self, X):
        return self.b * np.einsum("imp,ip->im", self.A, X)

    def local_values(self, X):
        z = self._margins(X)
        loss = np.logaddexp(0.0, -z).mean(axis=1)
        return loss + self.lam * (X**2 / (1.0 + X**2)).sum(axis=1)

    def local_grads(self, X):
        z = self._margins(X)
        # d/dz log(1 + e^{-z}) = -1 / (1 + e^{z})
        w = -self.b * _expit(-z) / self.m
        g = np.einsum("im,imp->ip", w, self.A)
        return g + self.lam * 2.0 * X / (1.0 + X**2) ** 2

    def f_star(self):
        return 0.0

    def to_dict(self):
        return {
            "family": "nonconvex",
            "n": self.n,
            "p": self.p,
            "regime": self.regime,
            "sigma": self.sigma,
            "L": self.L,
            "lam": self.lam,
            "seed": self.seed,
            "noise": self.noise,
            "A": self.A.tolist(),
            "b": self.b.tolist(),
        }


def _expit(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def nonconvex_smoothness(A: np.ndarray, lam: float) -> float:
    """``max_i lambda_max(A_i^T A_i) / (4 m) + 2 lam``; |phi''| of the penalty peaks at 2."""
    m = A.shape[1]
    top = max(np.linalg.eigvalsh(Ai.T @ Ai)[-1] for Ai in A)
    return float(top / (4.0 * m) + 2.0 * lam)


def make_nonconvex(
    n: int,
    p: int,
    sigma: float,
    seed: int | None = None,
    *,
    m: int = 20,
    lam: float = 0.1,
    shift: float = 1.0,
    noise: str = "total",
) -> LogisticNonconvexProblem:
    """Synthetic heterogeneous classification data, one labelled set per node.

    Node ``i`` draws features around a node-specific mean (scaled by ``shift``)
    so the local objectives differ.
    """
    if n < 1 or p < 1:
        raise ValueError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(p)
    centers = shift * rng.standard_normal((n, 1, p))
    A = (centers + rng.standard_normal((n, m, p))) / np.sqrt(p)
    b = np.where(A @ w_true + 0.3 * rng.standard_normal((n, m)) >= 0, 1.0, -1.0)
    return _nonconvex(A, b, lam, sigma, seed, noise)


def _nonconvex(A, b, lam, sigma, seed=None, noise="total"):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n, _, p = A.shape
    L = nonconvex_smoothness(A, lam)
    A.setflags(write=False)
    b.setflags(write=False)
    return LogisticNonconvexProblem(
        n=n, p=p, regime="nonconvex", L=L, mu=0.0, sigma=sigma, seed=seed, noise=noise, A=A, b=b, lam=lam
    )


def problem_from_dict(d: dict) -> Problem:
    family = d["family"]
    if family == "ridge":
        return _ridge(np.array(d["H"]), np.array(d["vbar"]), d["mu"], d["sigma"], d.get("seed"), d.get("noise", "total"), d["regime"])
    if family == "nonconvex":
        return _nonconvex(np.array(d["A"]), np.array(d["b"]), d["lam"], d["sigma"], d.get("seed"), d.get("noise", "total"))
    raise ValueError(f"unknown problem family {family!r}")


def grad(problem: Problem, i: int, x: np.ndarray) -> np.ndarray:
    """Exact gradient of ``f_i`` at ``x``."""
    return problem.grad_i(i, np.asarray(x, dtype=float))


def stoch_grad(problem: Problem, i: int, x: np.ndarray, rng: np.random.Generator) -> GradientSample:
    x = np.asarray(x, dtype=float)
    g = problem.grad_i(i, x)
    if problem.sigma > 0:
        g = g + problem.noise_scale * rng.standard_normal(problem.p)
    return GradientSample(value=g, node=i, snapshot=x.copy())


def optimum(problem: Problem) -> np.ndarray | None:
    return problem.optimum()


def heterogeneity(problem: Problem, x: np.ndarray | list[np.ndarray]) -> float:
    """``(1/n) sum_i ||grad f_i(x) - grad f(x)||^2``.

    Given a list of points, returns the maximum over them (a sampled stand-in
    for the supremum).
    """
    if isinstance(x, list):
        return max(heterogeneity(problem, xi) for xi in x)
    G = problem.local_grads(np.broadcast_to(np.asarray(x, dtype=float), (problem.n, problem.p)))
    D = G - G.mean(axis=0)
    return float((D**2).sum() / problem.n)
