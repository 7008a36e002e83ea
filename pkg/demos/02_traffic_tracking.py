"""Drive a congested highway stretch to capacity flow with bilateral control.

The Moskowitz function u (cumulative vehicle count) obeys
u_t = u_xx / 4 - u_x (1 + u_x), with density rho = -u_x.  Capacity flow is
rho = 1/2, i.e. the reference u_ref(x, t) = t/4 + (1 - x)/2.  The initial
state is that profile perturbed by 0.1 sin(pi x).

Both ends are actuated (Neumann inputs U0, U1) by the full-state
backstepping law with decay rate c1 = 1, so the transformed error should
decay at c1 + a^2 b^2 / (4 eps) = 2.
"""

import numpy as np

from hjbilateral.sim import run_closed_loop, traffic_config
from hjbilateral.verify import lyapunov_decay

result = run_closed_loop(traffic_config("fullstate", c1=1.0))

print("  t    |u(1,t) - t/4|   h1(u_tilde)   sup|rho - 1/2|    U0        U1")
for t in (0, 0.5, 1, 2, 3, 5, 8):
    i = result.index_of(t)
    n = result.norms
    print(f"{t:4.1f}   {abs(n['u_at_1'][i] - t / 4):10.2e}     {n['h1_u_tilde'][i]:9.2e}     "
          f"{n['rho_deviation'][i]:9.2e}     {result.U0_series[i]:+.4f}   {result.U1_series[i]:+.4f}")

fit = lyapunov_decay(result, window=(1.0, 5.0))
print(f"\nfitted decay rate of the target-system functional: {fit.rate:.3f} (design value 2)")
print(f"final density range: [{result.density().values.min():.5f}, {result.density().values.max():.5f}]")
print(f"simulated 8 time units in {result.wall_time:.1f} s")

# The linear PDE is satisfied by the Hopf-Cole image of the simulated state
# to within the scheme's own truncation error (the first record has no
# earlier time levels and is NaN).
ratio = np.nanmax(result.norms["lin_residual"] / result.norms["lin_truncation"])
print(f"largest linearization residual / truncation estimate: {ratio:.3f}")
