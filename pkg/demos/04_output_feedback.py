"""Close the loop from boundary measurements only.

Loop detectors at the two ends measure u(0, t) and u(1, t).  An observer of
the transformed error, corrected by output injection at both boundaries,
starts from a zero estimate; the control law uses the estimate in place of
the state.  The estimation error is designed to decay at
c2 + a^2 b^2 / (4 eps) = 2.
"""

from hjbilateral.sim import run_closed_loop, traffic_config
from hjbilateral.verify import fit_decay_rate

result = run_closed_loop(traffic_config("output_feedback", c1=1.0, c2=1.0, linearization_check=False))

print("  t    h1(estimation error)   h1(u_tilde)   |u(1,t) - t/4|")
for t in (0, 0.5, 1, 2, 4, 6, 8):
    i = result.index_of(t)
    n = result.norms
    print(f"{t:4.1f}   {n['h1_e'][i]:12.3e}          {n['h1_u_tilde'][i]:9.2e}     "
          f"{abs(n['u_at_1'][i] - t / 4):9.2e}")

fit = fit_decay_rate(result.times, result.norms["h1_e"], window=(1.0, 5.0))
print(f"\nfitted estimation-error decay rate: {fit.rate:.3f} (design value 2)")
