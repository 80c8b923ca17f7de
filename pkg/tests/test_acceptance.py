"""Acceptance criteria 1-13, each at its stated tolerance and runtime budget.

Every test records one ``criterion N: PASS|FAIL`` line; the lines are printed
as they happen (visible with ``-s``) and again in the terminal summary.
Run just these with ``pytest tests/test_acceptance.py -s``.
"""

import time

import numpy as np
import pytest
import yaml
from conftest import ACCEPTANCE_LINES, rel_err

from flexgt.algorithm import AlgoConfig, compact_round, init, run, run_ensemble, run_round, stepsize_rule, tracking_violation
from flexgt.cli import main
from flexgt.complexity import ComplexityQuery, pareto_frontier, select_alpha, table_costs, table_grid
from flexgt.graph import build_topology, make_operator, metropolis_weights, random_topology
from flexgt.metrics import (
    TheoryParams,
    check_client_divergence,
    check_consensus_contraction,
    check_convex_rate,
    check_nc_rate,
    check_opt_gap_lemma,
    check_sc_contraction,
    check_tracking_contraction,
    sc_noise_floor,
)
from flexgt.problems import make_least_squares, make_nonconvex, make_ridge


class Verdict:
    def __init__(self, label: str, budget: float | None = None):
        self.label, self.budget = label, budget
        self.start = time.perf_counter()

    def __call__(self, ok: bool, detail: str) -> bool:
        dt = time.perf_counter() - self.start
        within = self.budget is None or dt < self.budget
        passed = bool(ok) and within
        budget = f" (budget {self.budget:.0f}s)" if self.budget else ""
        line = f"criterion {self.label}: {'PASS' if passed else 'FAIL'}  {detail}  [{dt:.1f}s{budget}]"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)
        return passed


@pytest.fixture(scope="module")
def exp5():
    return metropolis_weights(build_topology("exponential", 20, 5))


@pytest.fixture(scope="module")
def ring20():
    return metropolis_weights(build_topology("ring", 20))


# -- 1 ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def mixing_cases():
    rng = np.random.default_rng(2024)
    cases = []
    for _ in range(50):
        n = int(rng.integers(4, 65))
        alpha = int(rng.integers(1, 11))
        topo = random_topology(n, rng)
        assert topo.is_connected()
        cases.append((metropolis_weights(topo), alpha))
    return cases


def test_criterion_1a_direct_mixing_bound(mixing_cases):
    v = Verdict("1a", budget=60)
    excess = []
    for mixing, alpha in mixing_cases:
        op = make_operator(mixing, "direct", alpha)
        excess.append(op.rho_bar - (mixing.rho_w**alpha + 1e-12))
    worst = max(excess)
    assert v(worst <= 0, f"direct rho_bar <= rho_w^alpha + 1e-12 on 50 graphs, worst excess {worst:.2e}")


def test_criterion_1b_accelerated_mixing_bound(mixing_cases):
    v = Verdict("1b", budget=60)
    excess = []
    for mixing, alpha in mixing_cases:
        op = make_operator(mixing, "accelerated", alpha)
        excess.append(op.rho_bar - (op.bound + 1e-9))
    bad = sum(e > 0 for e in excess)
    worst = max(excess)
    assert v(bad == 0, f"accelerated closed-form bound violated on {bad}/50 graphs, worst excess {worst:.3e}")


# -- 2, 3 ---------------------------------------------------------------------


def _random_case(seed, sigma_min=0.0):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 16))
    p = int(rng.integers(1, 8))
    mixing = metropolis_weights(random_topology(n, rng))
    alpha, beta = int(rng.integers(1, 6)), int(rng.integers(1, 6))
    protocol = ("direct", "accelerated")[int(rng.integers(2))]
    sigma = float(rng.uniform(sigma_min, 0.5))
    if rng.random() < 0.7:
        prob = make_ridge(n, p, float(rng.uniform(0.1, 2.0)), sigma, seed=seed)
    else:
        prob = make_nonconvex(n, p, sigma, seed=seed)
    cfg = AlgoConfig(alpha=alpha, beta=beta, gamma=0.05 / (beta * prob.L), protocol=protocol)
    return prob, cfg, make_operator(mixing, protocol, alpha)


def test_criterion_2_tracking_identity():
    v = Verdict("2", budget=60)
    worst = 0.0
    steps = 0
    for seed in range(20):
        prob, cfg, op = _random_case(1000 + seed, sigma_min=0.05)
        assert prob.sigma > 0

        def hook(kind, s):
            nonlocal worst, steps
            worst = max(worst, tracking_violation(s))
            steps += 1

        run(prob, cfg, op, 200, seed, hook=hook)
    assert v(worst <= 1e-9, f"max scaled |1'Y - 1'Gprev| = {worst:.2e} over {steps} steps (tol 1e-9)")


def test_criterion_3_loop_compact_equivalence():
    v = Verdict("3")
    worst = 0.0
    for seed in range(50):
        prob, cfg, op = _random_case(seed)
        ra, rb = np.random.default_rng(seed), np.random.default_rng(seed)
        a, b = init(prob, None, ra), init(prob, None, rb)
        for _ in range(50):
            a = run_round(a, prob, cfg, op, ra)
            b = compact_round(b, prob, cfg, op, rb)
            worst = max(worst, rel_err(b.X, a.X), rel_err(b.Y, a.Y))
    assert v(worst <= 1e-12, f"max relative deviation {worst:.2e} over 50 configs x 50 rounds (tol 1e-12)")


# -- 4, 5 ---------------------------------------------------------------------


def _dsgt_reference(problem, W, gamma, K, seed):
    rng = np.random.default_rng(seed)
    x = np.zeros((problem.n, problem.p))
    g = problem.sample_grads(x, rng)
    y = g.copy()
    xs = [x]
    for _ in range(K):
        x = W @ (x - gamma * y)
        g_new = problem.sample_grads(x, rng)
        y = W @ (y + g_new - g)
        g = g_new
        xs.append(x)
    return xs


def test_criterion_4_dsgt_reduction(exp5):
    v = Verdict("4")
    prob = make_ridge(20, 10, 0.5, 0.2, seed=3)
    traj = run(prob, AlgoConfig(alpha=1, beta=1, gamma=0.02), exp5, 100, 7, keep_states=True)
    ref = _dsgt_reference(prob, exp5.W, 0.02, 100, 7)
    mismatched = sum(not np.array_equal(X, R) for (X, _), R in zip(traj.states, ref))
    assert v(mismatched == 0, f"{mismatched}/101 iterates differ bitwise from the DSGT reference")


def test_criterion_5_centralized_reduction():
    v = Verdict("5")
    prob = make_ridge(20, 10, 0.5, 0.0, seed=1)
    J = metropolis_weights(build_topology("complete", 20))
    gamma = 0.01
    worst = 0.0
    for beta in (1, 2, 4):
        traj = run(prob, AlgoConfig(alpha=1, beta=beta, gamma=gamma), J, 100, 0, keep_states=True)
        x = np.zeros(prob.p)
        for k in range(1, 101):
            z = x.copy()
            for _ in range(beta):
                x = x - gamma * prob.full_grad(z)
            worst = max(worst, rel_err(traj.states[k][0].mean(axis=0), x))
    assert v(worst <= 1e-12, f"max deviation from centralized GD {worst:.2e} (beta in 1,2,4; tol 1e-12)")


# -- 6, 7 ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def sc_deterministic(exp5):
    t0 = time.perf_counter()
    prob = make_ridge(20, 10, 1.0, 0.0, seed=0)
    op = make_operator(exp5, "direct", 3)
    cfg = AlgoConfig(alpha=3, beta=3, gamma=stepsize_rule("strongly_convex", prob.L, 3, op.rho_bar))
    traj = run(prob, cfg, op, 500, 0, keep_states=True)
    return prob, traj, TheoryParams.from_run(traj, prob), time.perf_counter() - t0


def test_criterion_6_linear_rate(sc_deterministic):
    prob, traj, p, elapsed = sc_deterministic
    v = Verdict("6", budget=10)
    v.start -= elapsed
    rep = check_sc_contraction(traj, p)
    V = traj.column("lyapunov")
    predicted = (1.0 - p.sc_rate) ** 500 * V[0]
    final_ok = V[500] <= 10.0 * predicted
    assert v(
        rep.passed and final_ok,
        f"per-round contraction min rel margin {rep.min_rel_margin:.3g}; "
        f"V500/V0 = {V[500] / V[0]:.2e} vs predicted {predicted / V[0]:.2e} (10x slack)",
    )


def test_criterion_7_lemma_contractions(sc_deterministic):
    prob, traj, p, _ = sc_deterministic
    v = Verdict("7")
    reps = [
        check_client_divergence(traj, p),
        check_consensus_contraction(traj, p),
        check_tracking_contraction(traj, p),
        check_opt_gap_lemma(traj, p),
    ]
    detail = ", ".join(f"{r.name} {r.min_margin:.2e}" for r in reps)
    assert v(all(r.passed for r in reps), f"min margins: {detail}")


# -- 8, 9 ---------------------------------------------------------------------


def test_criterion_8_noise_floor(exp5):
    v = Verdict("8", budget=300)
    prob = make_ridge(20, 10, 1.0, 0.1, seed=0)
    op = make_operator(exp5, "direct", 3)
    cfg = AlgoConfig(alpha=3, beta=3, gamma=stepsize_rule("strongly_convex", prob.L, 3, op.rho_bar))
    trajs = run_ensemble(prob, cfg, op, 2000, range(100))
    V = np.mean([t.column("lyapunov") for t in trajs], axis=0)
    steady = V[-500:].mean()
    p = TheoryParams.from_run(trajs[0], prob)
    bound = 1.1 * sc_noise_floor(p) / p.sc_rate
    assert v(steady <= bound, f"steady-state mean V {steady:.3e} <= 1.1 x floor {bound:.3e} (ratio {steady / bound:.2e})")


def _ensemble(prob, mixing, seeds, K=500):
    op = make_operator(mixing, "direct", 2)
    cfg = AlgoConfig(alpha=2, beta=2, gamma=stepsize_rule(prob.regime, prob.L, 2, op.rho_bar))
    trajs = run_ensemble(prob, cfg, op, K, seeds)
    return trajs, TheoryParams.from_run(trajs[0], prob)


def test_criterion_9_convex_and_nonconvex_rates(exp5):
    v = Verdict("9", budget=600)
    parts = []
    ok = True
    trajs, p = _ensemble(make_least_squares(20, 10, 0.1, seed=0), exp5, range(50))
    for K in (50, 200, 500):
        rep = check_convex_rate(trajs, p, K, slack=1.1)
        ok &= rep.passed
        parts.append(f"convex K={K} {rep.lhs[0]:.2e}<={rep.rhs[0]:.2e}")
    nc = make_nonconvex(20, 10, 0.1, seed=0)
    trajs, p = _ensemble(nc, exp5, range(50))
    for K in (50, 200, 500):
        rep = check_nc_rate(trajs, p, K, f_star=0.0, slack=1.1)
        ok &= rep.passed
        parts.append(f"nonconvex K={K} {rep.lhs[0]:.2e}<={rep.rhs[0]:.2e}")
    assert v(ok, "; ".join(parts))


# -- 10 -----------------------------------------------------------------------


def _brute_front(points):
    def dominates(a, b):
        return a.comm <= b.comm and a.comp <= b.comp and (a.comm < b.comm or a.comp < b.comp)

    front = [p for p in points if not any(dominates(q, p) for q in points)]
    return sorted(front, key=lambda p: (p.comm, p.comp))


def test_criterion_10_pareto_structure(exp5):
    v = Verdict("10", budget=10)
    q = ComplexityQuery(
        regime="strongly_convex", L=1.0, mu=0.001, sigma=0.1, n=20, rho_w=exp5.rho_w, epsilon=1e-3
    )
    grid = table_grid(q, range(1, 9), range(1, 9))
    a_ok = pareto_frontier(grid) == _brute_front(grid)
    by_alpha = [[c.comp for c in grid if c.alpha == a] for a in range(1, 9)]
    b_ok = all(np.all(np.diff(row) >= 0) for row in by_alpha)
    acc = [table_costs(q.with_(protocol="accelerated", beta=b)) for b in range(1, 65)]
    dominated = 64 - len(pareto_frontier(acc))
    alphas_ok = all(c.alpha == select_alpha("strongly_convex", exp5.rho_w, 20, c.beta, 1.0, 0.001) for c in acc)
    c_ok = dominated == 0 and alphas_ok
    assert v(
        a_ok and b_ok and c_ok,
        f"(a) frontier == brute force: {a_ok}; (b) comp monotone in beta: {b_ok}; "
        f"(c) dominated accelerated betas: {dominated}/64",
    )


# -- 11 -----------------------------------------------------------------------


def _comm_to_residual(prob, cfg, op, seeds, target, max_rounds):
    # runs start at x0 = 0, so the initial gap is ||x*||^2 for every seed
    g0 = float(np.sum(prob.optimum() ** 2))
    out = []
    for s in seeds:
        traj = run(prob, cfg, op, max_rounds, s, stop=lambda rec: rec.opt_gap <= target * g0)
        rec = traj.records[-1]
        out.append(rec.comm_steps if rec.opt_gap <= target * g0 else np.inf)
    return np.array(out, dtype=float)


def test_criterion_11_acceleration_benefit(ring20):
    v = Verdict("11", budget=300)
    prob = make_ridge(20, 10, 1.0, 0.1, seed=0)
    beta = 1
    alpha = select_alpha(prob.regime, ring20.rho_w, prob.n, beta, prob.L, prob.mu)
    comm = {}
    for protocol in ("direct", "accelerated"):
        op = make_operator(ring20, protocol, alpha)
        cfg = AlgoConfig(
            alpha=alpha, beta=beta, protocol=protocol, gamma=stepsize_rule(prob.regime, prob.L, beta, op.rho_bar)
        )
        comm[protocol] = _comm_to_residual(prob, cfg, op, range(20), 1e-3, 4000)
    d, a = comm["direct"].mean(), comm["accelerated"].mean()
    assert v(a < d, f"mean comm steps to residual 1e-3 at alpha={alpha}: accelerated {a:.0f} < direct {d:.0f}")


# -- 12 -----------------------------------------------------------------------


def test_criterion_12_heterogeneity(ring20):
    v = Verdict("12")
    prob = make_ridge(20, 10, 1.0, 0.0, seed=0)
    res = {}
    for method in ("flexgt", "dsgd"):
        gap = run(prob, AlgoConfig(gamma=0.01, method=method), ring20, 2000, 0).column("opt_gap")
        res[method] = gap / gap[0]
    dsgd, gt = res["dsgd"], res["flexgt"]
    plateau = abs(dsgd[-1] - dsgd[-200]) <= 1e-6 * dsgd[-1]
    ok = dsgd[-1] > 1e-4 and plateau and gt.min() < 1e-10
    assert v(ok, f"DSGD plateau {dsgd[-1]:.2e} (> 1e-4, flat: {plateau}); FlexGT reaches {gt.min():.1e} (< 1e-10)")


# -- 13 -----------------------------------------------------------------------


def test_criterion_13_negative_control(tmp_path):
    v = Verdict("13")
    raw = {
        "problem": {"family": "ridge", "n": 20, "p": 10, "mu": 1.0, "sigma": 0.0, "seed": 0},
        "topology": {"kind": "exponential", "degree": 5},
        "algorithms": [{"name": "fx", "alpha": 3, "beta": 3, "stepsize": "proof", "gamma_scale": 10}],
        "rounds": 500,
        "out": str(tmp_path),
    }
    cfg = tmp_path / "neg.yaml"
    cfg.write_text(yaml.safe_dump(raw))
    code = main(["verify", "--config", str(cfg)])
    report = yaml.safe_load((tmp_path / "verify.json").read_text())
    failed = sorted(c["name"] for c in report["checks"] if c["gating"] and not c["passed"])
    contraction = [f for f in failed if "contraction" in f]
    assert v(code != 0 and bool(contraction), f"exit code {code}; failed checks {failed}")
