"""FlexGT / Acc-FlexGT rounds, the DSGD baseline and an independent compact-form round.

A round is: snapshot reset ``Z <- X``, ``beta`` local steps that move ``X``
along the tracking variable ``Y`` while ``Y`` absorbs fresh stochastic
gradients taken at the snapshot, then ``alpha`` communication steps on
``(X, Y)`` folded into one operator ``W_bar``.

Two conventions exist for the gradient that closes a round (``boundary``):

``"snapshot"``
    The last tracking increment of round ``k`` is sampled at the next
    snapshot ``x_{beta(k+1)} = W_bar(...)``, so at every round boundary
    ``1^T y`` equals the sum of gradients at the current iterate.
``"stored"``
    Every increment is sampled at the current snapshot; the first increment of
    the next round subtracts the stored sample from the previous snapshot.

Both keep ``1^T Y == 1^T Gprev`` exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .graph import MixingMatrix, MixingOperator, make_operator
from .problems import Problem

__all__ = [
    "AlgoConfig",
    "SwarmState",
    "Trajectory",
    "init",
    "local_phase",
    "comm_phase",
    "run_round",
    "compact_round",
    "run",
    "run_ensemble",
    "stepsize_rule",
    "empirical_stepsize",
    "tracking_violation",
]

METHODS = ("flexgt", "dsgd")
BOUNDARIES = ("snapshot", "stored")


@dataclass(frozen=True)
class AlgoConfig:
    alpha: int = 1
    beta: int = 1
    gamma: float = 0.01
    protocol: str = "direct"
    method: str = "flexgt"
    boundary: str = "snapshot"

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and v >= 1):
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be a positive finite number, got {self.gamma!r}")
        if self.protocol not in ("direct", "accelerated"):
            raise ValueError(f"protocol must be 'direct' or 'accelerated', got {self.protocol!r}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")


@dataclass
class SwarmState:
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    Gprev: np.ndarray
    round: int = 0
    comp_steps: int = 0
    comm_steps: int = 0

    def copy(self) -> "SwarmState":
        return SwarmState(self.X.copy(), self.Y.copy(), self.Z.copy(), self.Gprev.copy(), self.round, self.comp_steps, self.comm_steps)


StepHook = Callable[[str, SwarmState], None]


def tracking_violation(state: SwarmState) -> float:
    """``||1^T Y - 1^T Gprev||_inf / max(1, ||Gprev||_inf)``."""
    diff = np.abs(state.Y.sum(axis=0) - state.Gprev.sum(axis=0)).max()
    return float(diff / max(1.0, np.abs(state.Gprev).max()))


def init(problem: Problem, x0: np.ndarray | None, rng: np.random.Generator) -> SwarmState:
    """All nodes start at ``x0``; ``y_0`` is one stochastic gradient per node."""
    x0 = np.zeros(problem.p) if x0 is None else np.asarray(x0, dtype=float)
    X = np.tile(x0, (problem.n, 1))
    G = problem.sample_grads(X, rng)
    return SwarmState(X=X, Y=G.copy(), Z=X.copy(), Gprev=G)


def local_phase(
    state: SwarmState,
    problem: Problem,
    config: AlgoConfig,
    rng: np.random.Generator,
    hook: StepHook | None = None,
) -> SwarmState:
    """``beta`` local steps at the frozen snapshot ``Z``.

    Under ``boundary="snapshot"`` the final tracking increment is deferred to
    :func:`comm_phase` (it needs the communicated iterate).
    """
    s = state.copy()
    gamma = config.gamma
    if config.method == "dsgd":
        for _ in range(config.beta):
            G = problem.sample_grads(s.X, rng)
            s.X = s.X - gamma * G
            s.Y = G
            s.Gprev = G
            if hook:
                hook("comp", s)
        s.comp_steps += config.beta
        return s

    n_track = config.beta if config.boundary == "stored" else config.beta - 1
    for t in range(config.beta):
        s.X = s.X - gamma * s.Y
        if t < n_track:
            G = problem.sample_grads(s.Z, rng)
            s.Y = s.Y + G - s.Gprev
            s.Gprev = G
        if hook:
            hook("comp", s)
    s.comp_steps += n_track
    return s


def comm_phase(
    state: SwarmState,
    op: MixingOperator,
    problem: Problem | None = None,
    config: AlgoConfig | None = None,
    rng: np.random.Generator | None = None,
    hook: StepHook | None = None,
    sequential: bool = False,
) -> SwarmState:
    """Apply ``W_bar`` to ``X`` and ``Y``.

    With ``problem``/``config``/``rng`` given and ``boundary="snapshot"``, the
    round's last gradient is sampled at the mixed ``X`` and folded into ``Y``
    before ``Y`` is mixed. ``sequential=True`` applies the ``alpha`` gossip
    steps one at a time instead of the cached matrix (debug path).
    """
    s = state.copy()
    if s.X.shape[0] != op.matrix.shape[0]:
        raise ValueError(f"operator is {op.matrix.shape[0]}x{op.matrix.shape[0]} but state has {s.X.shape[0]} nodes")
    mix = _sequential_mixer(op) if sequential else op.apply
    s.X = mix(s.X)
    deferred = config is not None and config.method == "flexgt" and config.boundary == "snapshot"
    if deferred:
        G = problem.sample_grads(s.X, rng)
        s.Y = s.Y + G - s.Gprev
        s.Gprev = G
        s.comp_steps += 1
    s.Y = mix(s.Y)
    s.comm_steps += op.alpha
    if hook:
        hook("comm", s)
    return s


def _sequential_mixer(op: MixingOperator) -> Callable[[np.ndarray], np.ndarray]:
    W = op.base
    if W is None:
        raise ValueError("sequential mixing needs the operator's base matrix")

    def mix(A):
        prev, cur = A, A
        for _ in range(op.alpha):
            nxt = (1.0 + op.eta) * (W @ cur) - op.eta * prev
            prev, cur = cur, nxt
        return cur

    return mix


def run_round(
    state: SwarmState,
    problem: Problem,
    config: AlgoConfig,
    op: MixingOperator,
    rng: np.random.Generator,
    hook: StepHook | None = None,
) -> SwarmState:
    s = state.copy()
    s.Z = s.X.copy()
    s = local_phase(s, problem, config, rng, hook)
    s = comm_phase(s, op, problem, config, rng, hook)
    s.round += 1
    return s


def compact_round(
    state: SwarmState,
    problem: Problem,
    config: AlgoConfig,
    op: MixingOperator,
    rng: np.random.Generator,
) -> SwarmState:
    """Same round written in summed form.

    ``x+ = W_bar(x - gamma * sum_j y_j)`` with ``y_j = y + g_j - g_prev``, and
    ``y+ = W_bar(y + g_beta - g_prev)``. Draw order matches :func:`run_round`.
    """
    if config.method != "flexgt":
        raise ValueError("compact_round is defined for flexgt only")
    beta, gamma, Wb = config.beta, config.gamma, op.matrix
    Z = state.X
    inner = [problem.sample_grads(Z, rng) for _ in range(beta - 1)]
    y_sum = beta * state.Y
    for g in inner:
        y_sum = y_sum + (g - state.Gprev)
    X_new = Wb @ (state.X - gamma * y_sum)
    if config.boundary == "snapshot":
        g_last = problem.sample_grads(X_new, rng)
    else:
        g_last = problem.sample_grads(Z, rng)
    Y_new = Wb @ (state.Y + (g_last - state.Gprev))
    return SwarmState(
        X=X_new,
        Y=Y_new,
        Z=Z.copy(),
        Gprev=g_last,
        round=state.round + 1,
        comp_steps=state.comp_steps + beta,
        comm_steps=state.comm_steps + op.alpha,
    )


def stepsize_rule(regime: str, L: float, beta: int, rho_bar: float) -> float:
    """Largest stepsize allowed by the proof conditions.

    (strongly) convex: ``min{1/(4 sqrt2 beta L), (1-r)/(18 beta L sqrt r), (1-r)^2/(40 beta L r)}``;
    nonconvex uses ``1/(4 beta L)`` and ``14`` in the second term.
    """
    if not 0 <= rho_bar < 1:
        raise ValueError(f"rho_bar must lie in [0, 1), got {rho_bar}")
    if regime in ("strongly_convex", "convex"):
        first, c2 = 1.0 / (4.0 * math.sqrt(2.0) * beta * L), 18.0
    elif regime == "nonconvex":
        first, c2 = 1.0 / (4.0 * beta * L), 14.0
    else:
        raise ValueError(f"unknown regime {regime!r}")
    if rho_bar == 0:
        return first
    second = (1.0 - rho_bar) / (c2 * beta * L * math.sqrt(rho_bar))
    third = (1.0 - rho_bar) ** 2 / (40.0 * beta * L * rho_bar)
    return min(first, second, third)


def empirical_stepsize(L: float, beta: int, rho_bar: float, c: float = 10.0, cap: bool = True) -> float:
    """Tuned rule ``c (1 - r)^2 / (r beta L)`` used for the synthetic experiments.

    The rule blows up as ``r -> 0``; ``cap`` clips it at ``1 / (beta L)``.
    """
    limit = 1.0 / (beta * L)
    if rho_bar <= 0:
        return limit
    g = c * (1.0 - rho_bar) ** 2 / (rho_bar * beta * L)
    return min(g, limit) if cap else g


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    config: AlgoConfig | None = None
    problem: dict | None = None
    seed: int | None = None
    rho_bar: float | None = None
    states: list | None = None
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self) -> str:
        from .metrics import MetricRecord

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = MetricRecord.field_names()
        w.writerow(names)
        for r in self.records:
            w.writerow([_fmt(getattr(r, k)) for k in names])
        return buf.getvalue()

    def to_json(self, extra: dict | None = None) -> str:
        payload = {
            "config": asdict(self.config) if self.config else None,
            "problem": self.problem,
            "seed": self.seed,
            "rho_bar": self.rho_bar,
            "meta": self.meta,
            "records": [asdict(r) for r in self.records],
        }
        if extra:
            payload.update(extra)
        return json.dumps(payload, indent=1, default=_json_default)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def _check_finite(state: SwarmState, k: int):
    for name in ("X", "Y"):
        if not np.all(np.isfinite(getattr(state, name))):
            raise FloatingPointError(f"non-finite {name} at round {k}")


def run(
    problem: Problem,
    config: AlgoConfig,
    mixing: MixingMatrix | MixingOperator,
    K: int,
    seed: int | None = None,
    *,
    x0: np.ndarray | None = None,
    L_theory: float | None = None,
    keep_states: bool = False,
    hook: StepHook | None = None,
    stop: Callable | None = None,
) -> Trajectory:
    """Initialize and execute ``K`` rounds, measuring at every round boundary.

    ``stop(record)`` may end the run early (after recording).
    """
    from .metrics import LyapunovCoeffs, measure

    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    op = mixing if isinstance(mixing, MixingOperator) else make_operator(mixing, config.protocol, config.alpha)
    rng = np.random.default_rng(seed)
    L = problem.L if L_theory is None else L_theory
    coeffs = LyapunovCoeffs.from_params(config.gamma, config.beta, L, problem.n, op.rho_bar)
    x_star = problem.optimum()
    f_star = problem.f_star()

    state = init(problem, x0, rng)
    traj = Trajectory(config=config, problem=problem.to_dict(), seed=seed, rho_bar=op.rho_bar, states=[] if keep_states else None)
    traj.meta["x0_dist_sq"] = None if x_star is None else float(np.sum((state.X[0] - x_star) ** 2))

    def record(s):
        rec = measure(s, problem, coeffs, x_star=x_star, f_star=f_star)
        traj.records.append(rec)
        if keep_states:
            traj.states.append((s.X.copy(), s.Y.copy()))
        return rec

    rec = record(state)
    for k in range(K):
        state = run_round(state, problem, config, op, rng, hook)
        _check_finite(state, k + 1)
        rec = record(state)
        if stop is not None and stop(rec):
            break
    return traj


def run_ensemble(problem, config, mixing, K, seeds, n_jobs: int = 1, **kw) -> list[Trajectory]:
    """Independent trajectories, one per seed; results do not depend on ``n_jobs``."""
    seeds = list(seeds)
    if n_jobs == 1 or len(seeds) == 1:
        return [run(problem, config, mixing, K, s, **kw) for s in seeds]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(lambda s: run(problem, config, mixing, K, s, **kw), seeds))


def with_gamma(config: AlgoConfig, gamma: float) -> AlgoConfig:
    return replace(config, gamma=gamma)
