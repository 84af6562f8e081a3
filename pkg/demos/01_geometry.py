"""
Ball, cap and lens volumes
==========================

Everything the bounds need from geometry is three numbers: the volume of the
unit ball, the surface fraction of a polar cap, and the volume of the
intersection of two balls.
"""
import math

from nnlab import geometry as geo

# unit ball volumes peak near d = 5 and then collapse
for d in (1, 2, 3, 5, 10, 20):
    print(f"pi_{d:<2d} = {geo.unit_ball_volume(d):10.6f}   nn scale {geo.nn_scale(d):.4f}")

# the cap fraction by incomplete beta, against direct quadrature
print()
for d in (2, 3, 8):
    th = math.pi / 4
    print(f"d={d}: cap(pi/4) = {geo.cap_fraction(d, th):.10f}   quad {geo.cap_fraction_quad(d, th):.10f}")

# lens volume: closed form against rejection sampling
print()
a, b, y = 1.0, 1.0, 1.0
for d in (2, 3, 6):
    mc, se = geo.lens_volume_mc(a, b, y, d, n_samples=200_000, seed=d)
    print(f"d={d}: lens(1,1,1) = {geo.lens_volume(a, b, y, d):.5f}   MC {mc:.5f} +- {se:.5f}")

# the overlap of B(0,1) with B(y, y) takes a vanishing share of the unit ball
print()
for d, r in geo.lens_ratio_sequence(1.0, 12):
    print(f"d={d:<2d} L_d(1,1,1)/pi_d = {r:.5f}")
