"""Why track gradients at all?

Twenty nodes on a ring each hold a different least-squares term. Plain
decentralized SGD with a constant stepsize stalls at a biased point: every
node keeps pulling toward its own local minimizer. Adding the tracking
variable removes that bias at the same stepsize and communication budget.
"""

import numpy as np

from flexgt import AlgoConfig, build_topology, make_ridge, metropolis_weights, run
from flexgt.problems import heterogeneity

problem = make_ridge(n=20, p=10, mu=1.0, sigma=0.0, seed=0)
ring = metropolis_weights(build_topology("ring", 20))
print(f"ring of 20 nodes, rho_W = {ring.rho_w:.3f}; local-gradient spread at the optimum = {heterogeneity(problem, problem.optimum()):.3f}")

curves = {}
for method in ("dsgd", "flexgt"):
    gap = run(problem, AlgoConfig(gamma=0.01, method=method), ring, 2000, seed=0).column("opt_gap")
    curves[method] = gap / gap[0]

print(f"\n{'round':>6} {'DSGD':>12} {'FlexGT':>12}")
for k in (0, 10, 100, 500, 1000, 1500, 2000):
    print(f"{k:>6} {curves['dsgd'][k]:12.3e} {curves['flexgt'][k]:12.3e}")

print(f"\nDSGD settles at a relative error of {curves['dsgd'][-1]:.1e} and stays there;")
print(f"with tracking the error keeps falling, down to {curves['flexgt'].min():.1e}.")
