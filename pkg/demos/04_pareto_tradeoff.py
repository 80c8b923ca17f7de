"""Communication versus computation: which (alpha, beta) are worth using?

The closed-form round counts turn every (alpha, beta) into a pair of total
costs. A pair is Pareto-optimal if no other choice is cheaper in both. The
script prints the analytic frontier on an 8 x 8 grid for the exponential
graph, then measures a few cells empirically with the tuned stepsize.
"""

import numpy as np

from flexgt import (
    AlgoConfig,
    ComplexityQuery,
    build_topology,
    empirical_stepsize,
    make_operator,
    make_ridge,
    metropolis_weights,
    pareto_flags,
    run,
    table_costs,
    table_grid,
)

mixing = metropolis_weights(build_topology("exponential", 20, 5))
q = ComplexityQuery(regime="strongly_convex", L=1.0, mu=0.001, sigma=0.1, n=20, rho_w=mixing.rho_w, epsilon=1e-3)
grid = table_grid(q, range(1, 9), range(1, 9))
flags = pareto_flags(grid)
print(f"analytic grid, rho_W = {mixing.rho_w:.3f}: {sum(flags)} of 64 cells are Pareto-optimal")
print("  alpha\\beta " + " ".join(f"{b:>3}" for b in range(1, 9)))
for a in range(1, 9):
    row = ["  * " if flags[(a - 1) * 8 + b - 1] else "  . " for b in range(1, 9)]
    print(f"  {a:>9} " + "".join(row))

acc = [table_costs(q.with_(protocol="accelerated", beta=b)) for b in (1, 2, 4, 8, 16)]
print("\naccelerated variant: raising beta trades communication for computation")
for c in acc:
    print(f"  beta = {c.beta:>2}  alpha = {c.alpha:>2}  comm = {c.comm:10.3e}  comp = {c.comp:10.3e}")

problem = make_ridge(20, 10, mu=0.001, sigma=0.1, seed=0)
print("\nempirical steps to ||xbar - x*||^2 <= 1e-3 (5 seeds, c = 10 stepsize):")
for a, b in [(1, 1), (1, 4), (2, 2), (4, 1), (4, 4)]:
    op = make_operator(mixing, "direct", a)
    cfg = AlgoConfig(alpha=a, beta=b, gamma=empirical_stepsize(problem.L, b, op.rho_bar))
    comm, comp = [], []
    for seed in range(5):
        t = run(problem, cfg, op, 5000, seed, stop=lambda r: r.opt_gap <= 1e-3)
        if t.records[-1].opt_gap <= 1e-3:
            comm.append(t.records[-1].comm_steps)
            comp.append(t.records[-1].comp_steps)
    if comm:
        print(f"  (alpha, beta) = ({a}, {b}):  comm {np.mean(comm):7.0f}  comp {np.mean(comp):7.0f}")
    else:
        print(f"  (alpha, beta) = ({a}, {b}):  target not reached in 5000 rounds")
