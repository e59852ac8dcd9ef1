"""Adding spatial parallelism: Schwarz sweeps inside every fine time step.

The fine propagator now solves each implicit-Euler step with K_s overlapping
additive Schwarz sweeps over P_s spatial subdomains instead of a direct
factorization.  Truncating those sweeps adds a new error source, and the
estimator splits the fine discretization part accordingly:
  D_t - temporal discretization,
  D_s - spatial discretization,
  D_k - truncated Schwarz iteration,
plus the K, C, A parts of the time-parallel decomposition.

Run:  python3 demos/02_space_time_parallel_schwarz.py
"""

from parapost import ExperimentConfig, run_sweep

base = ExperimentConfig(
    Nhat_t=20, r=2, P_t=10, K_t=2, Nhat_s=20, qhat_s=1, q_s=2,
    schwarz=True, P_s=2, beta=0.2, tau=0.4, nu=4, mu=2,
)

print(__doc__)
print("running K_s = 2, 4, 6 ...\n")
values = [2, 4, 6]
records = run_sweep(base, "K_s", values)

header = f"{'K_s':>3} {'est err':>11} {'gamma':>8} " \
         f"{'D_t':>11} {'D_s':>11} {'D_k':>11} {'K':>11} {'C':>11} {'A':>11}"
print(header)
print("-" * len(header))
for k, rec in zip(values, records):
    c = rec.components
    print(f"{k:>3} {rec.estimated_error:>11.3e} {rec.effectivity:>8.4f} "
          f"{c['D_t']:>11.3e} {c['D_s']:>11.3e} {c['D_k']:>11.3e} "
          f"{c['K']:>11.3e} {c['C']:>11.3e} {c['A']:>11.3e}")

print(
    "\nWith two sweeps per step the Schwarz truncation error D_k is twice"
    "\nthe temporal discretization error D_t; by six sweeps it has decayed"
    "\nbelow it.  That is exactly the information needed to balance sweep"
    "\ncounts against step sizes: sweeping further than K_s ~ 6 here buys"
    "\nnothing, because D_t takes over as the bottleneck."
)
