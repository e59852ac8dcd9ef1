"""Where does the error of a time-parallel solve come from?

We solve the manufactured heat problem u_t - u_xx = f on (0,1) x (0,2] with
exact solution cos(4*pi*t) sin(pi*x), using the Parareal iteration: 10
temporal subdomains, a coarse propagator (piecewise-linear space, large
steps) and a fine propagator (quadratic space, 16x smaller steps).

The a posteriori estimator decomposes the terminal-time QoI error into
  D  - fine discretization error,
  K  - error from stopping the Parareal iteration early,
  C  - coarse-solution jumps at the synchronization times,
  A  - adjoint discontinuities at the synchronization times,
and the sum should match the true error (effectivity gamma close to 1).

Run:  python3 demos/01_time_parallel_breakdown.py
"""

from parapost import ExperimentConfig, run_sweep

base = ExperimentConfig(
    Nhat_t=20, r=16, P_t=10, Nhat_s=20, qhat_s=1, q_s=2, nu=4, mu=1,
)

print(__doc__)
print("running K_t = 1, 2, 3 ...\n")
records = run_sweep(base, "K_t", [1, 2, 3])

header = f"{'K_t':>3} {'est err':>11} {'gamma':>8} " \
         f"{'D':>11} {'K':>11} {'C':>11} {'A':>11}"
print(header)
print("-" * len(header))
for k, rec in zip([1, 2, 3], records):
    c = rec.components
    print(f"{k:>3} {rec.estimated_error:>11.3e} {rec.effectivity:>8.4f} "
          f"{c['D']:>11.3e} {c['K']:>11.3e} {c['C']:>11.3e} {c['A']:>11.3e}")

print(
    "\nReading the table: after one iteration the iteration error K"
    "\ndominates; two iterations later it has dropped two orders of"
    "\nmagnitude and the fine discretization error D is what is left."
    "\nIterating further cannot improve the answer -- refining the fine"
    "\npropagator could.  The effectivity stays at 1.00 throughout, so the"
    "\nestimate can be trusted to make that call without a reference solve."
)
