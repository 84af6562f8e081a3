"""
Upper and lower bound curves
============================

The connectivity function tau_d(L) sits between a lower envelope (chains
running straight out through a narrow cone) and a compound Poisson Chernoff
bound. Path counts through the origin are bounded by (2K)^m / m!.
"""
import math

from nnlab import bounds

d = 2
print("E exp(r|W|) growth: log M(r) / r^2 ->", f"{bounds.mgf_growth_constant(d):.5f}")
for r in (5.0, 20.0, 80.0):
    print(f"  r={r:5.1f}  {bounds.log_mgf_absW(d, r) / r**2:.5f}")

print("\n  L    log lower     log upper    r*")
for L in (2, 5, 10, 20, 40, 80):
    env = bounds.tau_lower_envelope(d, L)
    up = bounds.compound_tail_bound(d, L)
    print(f"{L:4d}  {env.log_value:11.3f}  {up.log_value:11.3f}  {up.r_star:6.3f}")
print("(the upper bound stays at 1 until c_2 L exceeds E U = 2K E|W|)")

# the Chernoff step alone against simulation of U
print("\nChernoff step vs Monte Carlo of P(U >= c_2 L):")
for L in (16, 20, 25, 30):
    tb = bounds.compound_tail_bound(d, L)
    mc = bounds.compound_tail_mc(d, L, n_samples=200_000, seed=L)
    print(f"  L={L}: chernoff {tb.chernoff:.3e}  MC {mc.estimate:.3e}")

print("\npath bound (2K)^(n/2) / (n/2)!:")
for n in (4, 20, 40, 60, 100):
    lr = bounds.log_rho_upper(d, n)
    print(f"  n={n:3d}  log bound {lr:9.3f}  bound {math.exp(min(0.0, lr)):.3e}")
