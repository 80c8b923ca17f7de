"""Per-round diagnostics, the Lyapunov function, and numerical checks of the
convergence bounds and their supporting per-round inequalities.

Every check returns a :class:`CheckReport` whose ``margins`` are
``rhs - lhs`` (non-negative means the inequality holds).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .problems import Problem

__all__ = [
    "MetricRecord",
    "LyapunovCoeffs",
    "TheoryParams",
    "CheckReport",
    "measure",
    "check_sc_contraction",
    "sc_noise_floor",
    "check_convex_rate",
    "check_nc_rate",
    "check_opt_gap_lemma",
    "check_client_divergence",
    "check_consensus_contraction",
    "check_tracking_contraction",
    "check_accumulated_consensus",
    "check_accumulated_tracking",
    "check_descent_lemma",
]

# relative roundoff allowance when deciding pass/fail; margins are reported raw
REL_TOL = 1e-12


@dataclass
class MetricRecord:
    round: int
    comp_steps: int
    comm_steps: int
    opt_gap: float | None
    cons_err: float
    track_err: float
    lyapunov: float | None
    grad_norm_sq: float
    f_gap: float | None
    f_value: float

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class LyapunovCoeffs:
    c_x: float
    c_y: float

    @classmethod
    def from_params(cls, gamma: float, beta: int, L: float, n: int, rho_bar: float) -> "LyapunovCoeffs":
        if rho_bar >= 1:
            return cls(math.nan, math.nan)
        c_x = 16.0 * gamma * beta * L / (n * (1.0 - rho_bar))
        c_y = 256.0 * gamma**3 * beta**3 * L * rho_bar / (n * (1.0 - rho_bar) ** 3)
        return cls(c_x, c_y)


def measure(state, problem: Problem, coeffs: LyapunovCoeffs, x_star=None, f_star=None) -> MetricRecord:
    X, Y = state.X, state.Y
    xbar = X.mean(axis=0)
    cons = float(np.sum((X - xbar) ** 2))
    track = float(np.sum((Y - Y.mean(axis=0)) ** 2))
    g = problem.full_grad(xbar)
    fval = problem.value(xbar)
    opt_gap = lyap = f_gap = None
    if x_star is not None:
        opt_gap = float(np.sum((xbar - x_star) ** 2))
        if math.isfinite(coeffs.c_x):
            lyap = opt_gap + coeffs.c_x * cons + coeffs.c_y * track
    if f_star is not None:
        f_gap = problem.f_gap(xbar, f_star)
    return MetricRecord(
        round=state.round,
        comp_steps=state.comp_steps,
        comm_steps=state.comm_steps,
        opt_gap=opt_gap,
        cons_err=cons,
        track_err=track,
        lyapunov=lyap,
        grad_norm_sq=float(g @ g),
        f_gap=f_gap,
        f_value=fval,
    )


@dataclass(frozen=True)
class TheoryParams:
    """Constants entering the bounds. ``L`` must be a true smoothness constant."""

    gamma: float
    beta: int
    L: float
    n: int
    rho_bar: float
    sigma: float = 0.0
    mu: float = 0.0

    @classmethod
    def from_run(cls, traj, problem: Problem, L: float | None = None) -> "TheoryParams":
        c = traj.config
        return cls(c.gamma, c.beta, problem.L if L is None else L, problem.n, traj.rho_bar, problem.sigma, problem.mu)

    @property
    def sc_rate(self) -> float:
        return min(self.mu * self.beta * self.gamma / 2.0, (1.0 - self.rho_bar) / 8.0)


@dataclass
class CheckReport:
    name: str
    margins: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def violations(self) -> np.ndarray:
        tol = REL_TOL * np.maximum(np.abs(self.lhs), np.abs(self.rhs))
        return np.flatnonzero(self.margins < -tol)

    @property
    def passed(self) -> bool:
        return self.violations.size == 0

    @property
    def first_violation(self) -> int | None:
        v = self.violations
        return int(v[0]) if v.size else None

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins)) if self.margins.size else math.inf

    @property
    def min_rel_margin(self) -> float:
        scale = np.maximum(np.abs(self.rhs), 1e-300)
        return float(np.min(self.margins / scale)) if self.margins.size else math.inf

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "first_violation": self.first_violation,
            "min_margin": self.min_margin,
            "min_rel_margin": self.min_rel_margin,
            "margins": self.margins.tolist(),
            "params": self.params,
        }


def _report(name, lhs, rhs, params):
    lhs = np.atleast_1d(np.asarray(lhs, dtype=float))
    rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
    return CheckReport(name, rhs - lhs, lhs, rhs, asdict(params) if isinstance(params, TheoryParams) else dict(params))


def _mean_column(trajs, name):
    return np.mean([t.column(name) for t in trajs], axis=0)


def sc_noise_floor(p: TheoryParams) -> float:
    """Additive noise per round in the strongly convex recursion."""
    return p.gamma**2 * p.beta * p.sigma**2 / p.n + 1664.0 * p.gamma**3 * p.beta**3 * p.L * p.rho_bar * p.sigma**2 / (
        1.0 - p.rho_bar
    ) ** 3


def check_sc_contraction(trajs, p: TheoryParams, slack: float = 1.0) -> CheckReport:
    """``V_{k+1} <= (1 - rate) V_k + noise`` per round on the (ensemble-mean) Lyapunov value.

    ``slack`` multiplies the right-hand side; use 1.0 for deterministic runs.
    """
    trajs = trajs if isinstance(trajs, (list, tuple)) else [trajs]
    V = _mean_column(trajs, "lyapunov")
    rhs = slack * ((1.0 - p.sc_rate) * V[:-1] + sc_noise_floor(p))
    return _report("sc_contraction", V[1:], rhs, p)


def check_convex_rate(trajs, p: TheoryParams, K: int, slack: float = 1.0) -> CheckReport:
    """Running-average f-gap over the first ``K`` rounds against its sublinear bound."""
    trajs = trajs if isinstance(trajs, (list, tuple)) else [trajs]
    fgap = _mean_column(trajs, "f_gap")
    V0 = float(np.mean([t.records[0].lyapunov for t in trajs]))
    lhs = fgap[:K].mean()
    r = p.rho_bar
    rhs = (
        2.0 * V0 / (p.gamma * p.beta * K)
        + 2.0 * p.gamma * p.sigma**2 / p.n
        + 3328.0 * p.gamma**2 * p.beta**2 * p.L * r * p.sigma**2 / (1.0 - r) ** 3
    )
    return _report(f"convex_rate_K{K}", lhs, slack * rhs, p)


def check_nc_rate(trajs, p: TheoryParams, K: int, f_star: float = 0.0, slack: float = 1.0) -> CheckReport:
    """Running-average squared gradient norm over ``K`` rounds against its bound."""
    trajs = trajs if isinstance(trajs, (list, tuple)) else [trajs]
    gn = _mean_column(trajs, "grad_norm_sq")
    f0 = float(np.mean([t.records[0].f_value for t in trajs])) - f_star
    y0 = float(np.mean([t.records[0].track_err for t in trajs]))
    lhs = gn[:K].mean()
    r, g, b, L = p.rho_bar, p.gamma, p.beta, p.L
    rhs = (
        8.0 * f0 / (g * b * K)
        + 8.0 * g**2 * b**2 * L**2 * r * y0 / (p.n * (1.0 - r) ** 3 * K)
        + 4.0 * g * L * p.sigma**2 / p.n
        + 3328.0 * g**2 * b**2 * L**2 * r * p.sigma**2 / (1.0 - r) ** 3
    )
    return _report(f"nc_rate_K{K}", lhs, slack * rhs, p)


# ---------------------------------------------------------------------------
# per-round supporting inequalities; need trajectories run with keep_states=True


def _state_series(traj):
    if not traj.states:
        raise ValueError("trajectory was not recorded with keep_states=True")
    X = np.array([s[0] for s in traj.states])
    Y = np.array([s[1] for s in traj.states])
    return X, Y


def _sq_dev(A):
    return np.sum((A - A.mean(axis=1, keepdims=True)) ** 2, axis=(1, 2))


def check_client_divergence(traj, p: TheoryParams) -> CheckReport:
    """``||x_{k+1} - 1 xbar_k||^2 <= 3||x~||^2 + 16 n g^2 b^2 s^2 + 8 g^2 b^2 ||y~||^2 + 16 n g^2 b^2 ||grad f(xbar)||^2``."""
    X, Y = _state_series(traj)
    xbar = X.mean(axis=1)
    lhs = np.sum((X[1:] - xbar[:-1, None, :]) ** 2, axis=(1, 2))
    gb2 = p.gamma**2 * p.beta**2
    gn = traj.column("grad_norm_sq")[:-1]
    rhs = 3.0 * _sq_dev(X)[:-1] + 16 * p.n * gb2 * p.sigma**2 + 8 * gb2 * _sq_dev(Y)[:-1] + 16 * p.n * gb2 * gn
    return _report("client_divergence", lhs, rhs, p)


def check_consensus_contraction(traj, p: TheoryParams) -> CheckReport:
    r = p.rho_bar
    X, Y = _state_series(traj)
    cx, cy = _sq_dev(X), _sq_dev(Y)
    gb2 = p.gamma**2 * p.beta**2
    rhs = (1 + r) / 2 * cx[:-1] + 4 * gb2 * r / (1 - r) * cy[:-1] + 8 * p.n * gb2 * r / (1 - r) * p.sigma**2
    return _report("consensus_contraction", cx[1:], rhs, p)


def check_tracking_contraction(traj, p: TheoryParams) -> CheckReport:
    r, L = p.rho_bar, p.L
    X, Y = _state_series(traj)
    cx, cy = _sq_dev(X), _sq_dev(Y)
    gn = traj.column("grad_norm_sq")
    gb2 = p.gamma**2 * p.beta**2
    rhs = (
        (3 + r) / 4 * cy[:-1]
        + 18 * r * L**2 / (1 - r) * cx[:-1]
        + 96 * p.n * gb2 * L**2 * r / (1 - r) * gn[:-1]
        + 6 * p.n * p.sigma**2
    )
    return _report("tracking_contraction", cy[1:], rhs, p)


def check_opt_gap_lemma(traj, p: TheoryParams) -> CheckReport:
    """``||xbar+ - x*||^2 <= (1 - mu b g/2)||xbar - x*||^2 + g^2 b s^2/n + 3 g b L/n ||x~||^2 - g b (f(xbar) - f*)``."""
    opt = traj.column("opt_gap")
    fgap = traj.column("f_gap")
    cons = traj.column("cons_err")
    gb = p.gamma * p.beta
    rhs = (
        (1 - p.mu * gb / 2) * opt[:-1]
        + p.gamma * gb * p.sigma**2 / p.n
        + 3 * gb * p.L / p.n * cons[:-1]
        - gb * fgap[:-1]
    )
    return _report("opt_gap_lemma", opt[1:], rhs, p)


def check_descent_lemma(traj, p: TheoryParams, f_star: float = 0.0) -> CheckReport:
    """Running-average gradient norm against ``4(f0 - f*)/(g b K) + 4L^2/n avg||x~||^2 + 2 g L s^2/n``, every K."""
    gn = traj.column("grad_norm_sq")[:-1]
    cons = traj.column("cons_err")[:-1]
    K = np.arange(1, gn.size + 1)
    f0 = traj.records[0].f_value - f_star
    lhs = np.cumsum(gn) / K
    rhs = 4 * f0 / (p.gamma * p.beta * K) + 4 * p.L**2 / p.n * np.cumsum(cons) / K + 2 * p.gamma * p.L * p.sigma**2 / p.n
    return _report("descent_lemma", lhs, rhs, p)


def check_accumulated_consensus(traj, p: TheoryParams) -> CheckReport:
    r = p.rho_bar
    cons = traj.column("cons_err")[:-1]
    track = traj.column("track_err")[:-1]
    K = np.arange(1, cons.size + 1)
    gb2 = p.gamma**2 * p.beta**2
    lhs = np.cumsum(cons) / K
    rhs = (
        2 * cons[0] / ((1 - r) * K)
        + 16 * p.n * gb2 * r / (1 - r) ** 2 * p.sigma**2
        + 8 * gb2 * r / (1 - r) ** 2 * np.cumsum(track) / K
    )
    return _report("accumulated_consensus", lhs, rhs, p)


def check_accumulated_tracking(traj, p: TheoryParams) -> CheckReport:
    r, L = p.rho_bar, p.L
    cons = traj.column("cons_err")[:-1]
    track = traj.column("track_err")[:-1]
    gn = traj.column("grad_norm_sq")[:-1]
    K = np.arange(1, cons.size + 1)
    gb2 = p.gamma**2 * p.beta**2
    lhs = np.cumsum(track) / K
    rhs = (
        4 * track[0] / ((1 - r) * K)
        + 24 * p.n * p.sigma**2 / ((1 - r) * K)
        + 96 * r * L**2 / (1 - r) ** 2 * np.cumsum(cons) / K
        + 384 * p.n * gb2 * L**2 * r / (1 - r) ** 2 * np.cumsum(gn) / K
    )
    return _report("accumulated_tracking", lhs, rhs, p)
