"""Compare control effort: two actuated ends versus one, and no feedback at all.

The one-sided baseline uses the classical single-boundary kernel tuned to the
same decay rate and only feeds forward at x = 0.  Sharing the work between
both ends lowers the peak outlet input.

With c1 = 0 the bilateral law reduces to pure feedforward.  The plant only
involves derivatives of u, so a uniform offset of the vehicle count is never
corrected: the density still converges, but the tracking error settles to a
nonzero constant.
"""

import numpy as np

from hjbilateral.sim import run_closed_loop, traffic_config

bilateral = run_closed_loop(traffic_config("fullstate", linearization_check=False))
unilateral = run_closed_loop(traffic_config("unilateral", linearization_check=False))
print(f"max|U1| bilateral  = {bilateral.max_abs_U1:.4f}")
print(f"max|U1| unilateral = {unilateral.max_abs_U1:.4f}")
print(f"ratio              = {bilateral.max_abs_U1 / unilateral.max_abs_U1:.4f}")

open_loop = run_closed_loop(traffic_config("feedforward", c1=0.0, linearization_check=False))
h1 = open_loop.norms["h1_u_tilde"]
u_tilde = open_loop.u_snapshots[-1].values - (2.0 + (1 - open_loop.config.grid.nodes) / 2)
print(f"\nfeedforward only: h1(u_tilde) {h1[0]:.4f} -> {h1[-1]:.4f} "
      f"(ratio {h1[-1] / h1[0]:.3f}); final error is uniform: "
      f"{u_tilde.min():.6f} .. {u_tilde.max():.6f}")
print(f"final sup|rho - 1/2| = {open_loop.norms['rho_deviation'][-1]:.2e}")
print(f"bilateral feedback: final h1(u_tilde) = {bilateral.norms['h1_u_tilde'][-1]:.2e}")
