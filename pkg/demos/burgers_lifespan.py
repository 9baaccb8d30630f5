"""
Lifespan of small Burgers data
==============================

For u_t + u u_x = 0 with data eps * psi(x) the gradient blows up at
T* = 1 / (eps * sup(-psi')). The library predicts this from the eigenvalue
geometry alone, then checks it against a finite-difference run.
"""

import numpy as np

from qlhyper.catalog import builtin_system
from qlhyper.geometry import analyze_wld
from qlhyper.lifespan import builtin_family, compute_M0, predict_lifespan
from qlhyper.solver import GridConfig, epsilon_sweep

system = builtin_system("burgers")
family = builtin_family("gaussian-derivative")  # psi(x) = -x exp(-x^2)

# lambda(u) = u is genuinely nonlinear, so the index is 0
wld = analyze_wld(system)
pred = compute_M0(system, wld, family)
print(f"alpha = {pred.alpha}, M0 = {pred.M0:.6f}, steepest point x* = {pred.x_star:.2e}")

eps_list = [0.1, 0.05, 0.025]
for eps in eps_list:
    print(f"  eps = {eps:<6} T_pred = {predict_lifespan(pred, eps).T_pred:.3f}")

###############################################################################
# Solve each case until the gradient exceeds the grid's threshold and fit the
# blow-up time from 1/max|u_x|.

sweep = epsilon_sweep(system, family, eps_list, GridConfig(cells=2048), pred.alpha, pred.M0,
                      launch=(0, [pred.x_star]))
print("\n   eps    T_num   eps*T_num  compression")
for r in sweep.rows:
    print(f"{r.eps:6.3f} {r.T_num:8.3f} {r.scaled:10.4f} {r.compression_time:11.3f}")
print(f"extrapolated eps -> 0 limit of eps*T_num: {sweep.extrapolated_limit:.4f}")

###############################################################################
# The scaled sup norm and total variation stay put as eps shrinks.

w = np.array([r.W1_over_eps for r in sweep.rows])
print("W1/eps at 0.9 T_num:", np.round(w, 4))
