"""
A weakly linearly degenerate family
===================================

In the "wld-pair" system lambda_1(u) = u1^2 has zero slope at the origin
along its own eigenvector, so family 1 has index alpha = 1 and the lifespan
grows like eps^-2 instead of eps^-1.
"""

import math

from qlhyper.catalog import builtin_system, power_law_system
from qlhyper.geometry import analyze_wld
from qlhyper.lifespan import builtin_family, compute_M0
from qlhyper.riccati import leading_term_fit
from qlhyper.solver import GridConfig, solve_cauchy

system = builtin_system("wld-pair")
wld = analyze_wld(system)
for e in wld.entries:
    print(f"family {e.family + 1}: alpha = {e.alpha_label()}, leading derivative = {e.leading}")

###############################################################################
# The index is read off the first nonvanishing derivative of lambda along the
# rarefaction curve. Synthetic power laws recover it exactly.

for alpha in range(4):
    e = analyze_wld(power_law_system(alpha, c=1.5)).entry(0)
    print(f"lambda = 1.5 s^{alpha + 1}: alpha = {e.alpha}, "
          f"leading/(1.5 (alpha+1)!) = {e.leading / (1.5 * math.factorial(alpha + 1)):.8f}")

###############################################################################
# Family 2 is linear (alpha = 0) but carries no data, so the prediction is
# restricted to family 1.

family = builtin_family("gaussian-derivative", n=2)
pred = compute_M0(system, wld, family, families=[0])
eps = 0.4
T_pred = pred.M0 * eps ** -(pred.alpha + 1)
print(f"\nM0 = {pred.M0:.4f}, x* = {pred.x_star:.4f}, T_pred(eps={eps}) = {T_pred:.3f}")

###############################################################################
# Along the characteristic launched from x*, the Riccati coefficient a0 should
# approach its leading-order value -lambda''(0) u1. The gap is discretization
# error and shrinks as the grid is refined.

for cells in (512, 1024, 2048):
    sol = solve_cauchy(system, family, eps, GridConfig(cells=cells, window=(-5.5, 5.5)),
                       t_end=0.8 * T_pred)
    fit = leading_term_fit(sol, 0, pred.x_star, 1, wld.entry(0).leading, t_stop=0.8 * T_pred)
    print(f"cells = {cells:5d}: max |a0 - leading| = {fit.max_deviation:.3e}")
