"""Order-level complexity estimates, the accelerated choice of ``alpha``,
empirical steps-to-accuracy and Pareto frontiers over ``(alpha, beta)``.

Hidden constants are 1 and logarithms are natural. Inside the closed forms the
effective gap is the protocol's upper bound, not the exact operator norm.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .graph import RHO_CAP, rho_bar_bound

__all__ = [
    "ComplexityQuery",
    "CostPoint",
    "effective_gap",
    "iteration_complexity",
    "acc_iteration_complexity",
    "table_costs",
    "select_alpha",
    "empirical_cost",
    "pareto_frontier",
    "pareto_flags",
    "table_grid",
    "grid_to_csv",
]

REGIMES = ("strongly_convex", "convex", "nonconvex")
METRICS = ("opt_gap", "f_gap_avg", "grad_norm_avg")


@dataclass(frozen=True)
class ComplexityQuery:
    regime: str
    L: float
    mu: float
    sigma: float
    n: int
    rho_w: float
    epsilon: float
    alpha: int = 1
    beta: int = 1
    protocol: str = "direct"
    V0: float = 1.0
    f0: float = 1.0
    R0: float = 0.0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.L > 0:
            raise ValueError(f"L must be > 0, got {self.L}")
        if self.regime == "strongly_convex" and not self.mu > 0:
            raise ValueError("strongly convex regime needs mu > 0")
        if self.sigma < 0 or self.n < 1:
            raise ValueError("need sigma >= 0 and n >= 1")
        if not 0 <= self.rho_w <= 1:
            raise ValueError(f"rho_w must lie in [0, 1], got {self.rho_w}")
        if self.alpha < 1 or self.beta < 1:
            raise ValueError("alpha and beta must be >= 1")
        if self.protocol not in ("direct", "accelerated"):
            raise ValueError(f"unknown protocol {self.protocol!r}")

    def with_(self, **kw) -> "ComplexityQuery":
        return replace(self, **kw)


@dataclass(frozen=True)
class CostPoint:
    """Total communication/computation steps; ``rounds`` is the generating ``K``."""

    comm: float
    comp: float
    alpha: int
    beta: int
    rounds: float = math.nan


def effective_gap(q: ComplexityQuery) -> float:
    return rho_bar_bound(q.rho_w, q.protocol, q.alpha)


def _log_term(a: float, eps: float) -> float:
    # the log factor only counts when the start is worse than the target
    return max(math.log(a / eps), 0.0) if a > 0 else 0.0


def iteration_complexity(q: ComplexityQuery) -> float:
    """Rounds ``K`` needed for accuracy ``epsilon`` (general ``alpha``, either protocol)."""
    r = effective_gap(q)
    g = 1.0 - r
    L, mu, s2, n, b, eps = q.L, q.mu, q.sigma**2, q.n, q.beta, q.epsilon
    if q.regime == "strongly_convex":
        return (
            L / (g**2 * mu) * _log_term(q.V0, eps)
            + s2 / (b * mu**2 * n * eps)
            + math.sqrt(L * r * s2) / (mu**1.5 * g**1.5 * eps**0.5)
        )
    if q.regime == "convex":
        return (L / (g**2 * eps) + s2 / (b * n * eps**2) + math.sqrt(L * r * s2) / (g**1.5 * eps**1.5)) * q.V0
    return (
        L / (g**2 * eps) + q.R0 / eps + L * s2 / (b * n * eps**2) + L * math.sqrt(r * s2) / (g**1.5 * eps**1.5)
    ) * q.f0


def acc_iteration_complexity(q: ComplexityQuery) -> float:
    """Rounds for the accelerated variant run with :func:`select_alpha`'s ``alpha``."""
    L, mu, s2, n, b, eps = q.L, q.mu, q.sigma**2, q.n, q.beta, q.epsilon
    if q.regime == "strongly_convex":
        return L / mu * _log_term(q.V0, eps) + s2 / (n * mu**2 * b * eps)
    if q.regime == "convex":
        return (math.sqrt(L) / eps + L * s2 / (n * b * eps**2)) * q.V0
    return (L / eps + L * s2 / (n * b * eps**2)) * q.f0


def _table_rounds(q: ComplexityQuery) -> float:
    """Round count behind the tabulated costs: log factors and initial quantities dropped."""
    r = min(q.rho_w**q.alpha, RHO_CAP)
    g = 1.0 - r
    L, mu, s2, n, b, eps = q.L, q.mu, q.sigma**2, q.n, q.beta, q.epsilon
    if q.regime == "strongly_convex":
        return L / (g**2 * mu) + s2 / (b * mu**2 * n * eps) + math.sqrt(L * r * s2) / (mu**1.5 * g**1.5 * eps**0.5)
    if q.regime == "convex":
        return L / (g**2 * eps) + s2 / (b * n * eps**2) + math.sqrt(L * r * s2) / (g**1.5 * eps**1.5)
    return L * s2 / (b * n * eps**2) + L / (g**2 * eps) + q.R0 / eps + L * math.sqrt(r * s2) / (g**1.5 * eps**1.5)


def _acc_table_rounds(q: ComplexityQuery) -> float:
    L, mu, s2, n, b, eps = q.L, q.mu, q.sigma**2, q.n, q.beta, q.epsilon
    if q.regime == "strongly_convex":
        return L / mu + s2 / (n * b * mu**2 * eps)
    if q.regime == "convex":
        return math.sqrt(L) / eps + L * s2 / (n * b * eps**2)
    return L / eps + L * s2 / (n * b * eps**2)


def table_costs(q: ComplexityQuery) -> CostPoint:
    """Tabulated (communication, computation) totals for ``(alpha, beta)``.

    Direct protocol: ``comm = alpha K``, ``comp = beta K``. Accelerated protocol:
    ``alpha`` is replaced by its order ``1/sqrt(1 - sqrt(rho_w))`` (the log factor
    of the selected ``alpha`` is absorbed), and ``q.alpha`` is ignored in favor of
    :func:`select_alpha`, which is reported in the returned point.
    """
    if q.protocol == "direct":
        K = _table_rounds(q)
        return CostPoint(comm=q.alpha * K, comp=q.beta * K, alpha=q.alpha, beta=q.beta, rounds=K)
    if q.rho_w >= 1:
        raise ValueError("accelerated costs need rho_w < 1")
    K = _acc_table_rounds(q)
    a_eff = 1.0 / math.sqrt(1.0 - math.sqrt(q.rho_w))
    a = select_alpha(q.regime, q.rho_w, q.n, q.beta, q.L, q.mu, q.R0)
    return CostPoint(comm=a_eff * K, comp=q.beta * K, alpha=a, beta=q.beta, rounds=K)


def select_alpha(regime: str, rho_w: float, n: int, beta: int, L: float = 1.0, mu: float = 1.0, R0: float = 0.0) -> int:
    """Number of accelerated gossip steps per round that makes ``1 - rho_bar >= 1/2``."""
    if not 0 <= rho_w < 1:
        raise ValueError(f"rho_w must lie in [0, 1), got {rho_w}")
    if regime == "strongly_convex":
        if not (mu > 0 and L > 0):
            raise ValueError("strongly convex selection needs L, mu > 0")
        arg = n * beta * L / mu
    elif regime == "convex":
        arg = n * beta
    elif regime == "nonconvex":
        arg = beta * max(n, R0)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    num = max(math.log(2.0), 0.5 * math.log(arg))
    return max(1, math.ceil(num / math.sqrt(1.0 - math.sqrt(rho_w))))


def _running_mean(v: np.ndarray) -> np.ndarray:
    return np.cumsum(v) / np.arange(1, v.size + 1)


def empirical_cost(traj, epsilon: float, metric: str = "opt_gap") -> CostPoint | None:
    """Counters at the first recorded round where ``metric`` is ``<= epsilon``.

    ``f_gap_avg`` and ``grad_norm_avg`` use the running average from round 0.
    """
    if metric == "opt_gap":
        v = traj.column("opt_gap")
    elif metric == "f_gap_avg":
        v = _running_mean(traj.column("f_gap"))
    elif metric == "grad_norm_avg":
        v = _running_mean(traj.column("grad_norm_sq"))
    else:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    hit = np.flatnonzero(v <= epsilon)
    if hit.size == 0:
        return None
    rec = traj.records[int(hit[0])]
    cfg = traj.config
    return CostPoint(
        comm=rec.comm_steps,
        comp=rec.comp_steps,
        alpha=cfg.alpha if cfg else 1,
        beta=cfg.beta if cfg else 1,
        rounds=rec.round,
    )


def pareto_flags(points: Sequence[CostPoint]) -> list[bool]:
    """``True`` for points no other point weakly beats in both coordinates with one strict."""
    order = sorted(range(len(points)), key=lambda i: (points[i].comm, points[i].comp))
    flags = [False] * len(points)
    best_before = math.inf  # min comp over strictly smaller comm
    k = 0
    while k < len(order):
        comm = points[order[k]].comm
        j = k
        while j < len(order) and points[order[j]].comm == comm:
            j += 1
        group = order[k:j]
        gmin = points[group[0]].comp
        if gmin < best_before:
            for i in group:
                flags[i] = points[i].comp == gmin
        best_before = min(best_before, gmin)
        k = j
    return flags


def pareto_frontier(points: Iterable[CostPoint]) -> list[CostPoint]:
    pts = list(points)
    flags = pareto_flags(pts)
    front = [p for p, f in zip(pts, flags) if f]
    return sorted(front, key=lambda p: (p.comm, p.comp))


def table_grid(q: ComplexityQuery, alphas: Iterable[int], betas: Iterable[int]) -> list[CostPoint]:
    """Analytic costs over the ``alpha x beta`` grid, alpha-major order."""
    return [table_costs(q.with_(alpha=a, beta=b)) for a, b in product(alphas, betas)]


def grid_to_csv(points: Sequence[CostPoint], flags: Sequence[bool] | None = None, extra: dict | None = None) -> str:
    """CSV with columns ``alpha, beta, comm, comp, pareto_flag`` (+ any ``extra`` columns)."""
    if flags is None:
        flags = pareto_flags(points)
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "beta", "comm", "comp", "pareto_flag", *extra])
    for i, (p, f) in enumerate(zip(points, flags)):
        w.writerow([p.alpha, p.beta, repr(float(p.comm)), repr(float(p.comp)), int(f), *(v[i] for v in extra.values())])
    return buf.getvalue()
