"""
When the Riccati blow-up bound fails
====================================

For z' = a0 z^2 + a1 z + a2 on [0, T] with z0 > K, the bound

    int |a0| exp(-int |a1|) < 1 / (z0 - K)

is claimed to force blow-up before T. It does hold when a0 >= 0, but a
negative a0 breaks it. Here is a constant counterexample, followed by the
randomized suite.
"""

from qlhyper.riccati import (RiccatiCoefficients, check_blowup_lemma, hormander_quantities,
                             integrate_riccati, lemma_property_suite)

# a0 = -2, z0 = 2: z(t) = 2 / (1 + 4t) decays and exists for all time
c = RiccatiCoefficients.constant(-2.0, T=1.0)
traj = integrate_riccati(c, 2.0)
q = hormander_quantities(c, 1.0, 2.0)
print(f"global solution: {traj.exists_globally}, z(1) = {traj.z[-1]:.6f} (exact 0.4)")
print(f"K = {q.K}, int|a0| = {q.int_a0}, 1/(z0-K) = {1 / (2.0 - q.K)}")
print("lemma check:", check_blowup_lemma(c, 2.0).verdict)

###############################################################################
# With a0 >= 0 the inequality holds in every sampled case. With sign-changing
# a0 it fails in a sizable fraction of them.

for nonneg in (True, False):
    res = lemma_property_suite(1000, seed=0, nonnegative_a0=nonneg)
    label = "a0 >= 0    " if nonneg else "a0 any sign"
    print(f"{label}: {res.passed}/{res.cases} hold, {res.rejected} draws without global solution")

ce = res.counterexamples[0]
print("first counterexample:", {k: ce[k] for k in ("attempt", "z0", "K",
                                                   "weighted_a0_integral", "bound")})
