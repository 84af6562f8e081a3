"""Ball volumes, spherical-cap fractions and lens (two-ball intersection) volumes in R^d."""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import betainc, gammaln


def _check_dim(d: int) -> int:
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return int(d)


def log_unit_ball_volume(d: int) -> float:
    d = _check_dim(d)
    return 0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0)


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d, pi^(d/2) / Gamma(d/2 + 1)."""
    return math.exp(log_unit_ball_volume(d))


def ball_volume(radius: float, d: int) -> float:
    return unit_ball_volume(d) * radius**d


def nn_scale(d: int) -> float:
    """Radius of the ball with unit volume; the typical nearest-neighbor distance at intensity 1."""
    return unit_ball_volume(d) ** (-1.0 / d)


def cap_fraction(d: int, theta: float) -> float:
    """Fraction of the unit sphere S^(d-1) with first coordinate >= cos(theta).

    Only half-angles in (0, pi/2] are accepted. On S^0 (d = 1) the cap is the
    single point +1 for every admissible angle, so the fraction is 1/2.
    """
    d = _check_dim(d)
    if not (0.0 < theta <= 0.5 * math.pi):
        raise ValueError(f"theta must lie in (0, pi/2], got {theta!r}")
    if d == 1:
        return 0.5
    s2 = min(math.sin(theta) ** 2, 1.0)
    return 0.5 * float(betainc(0.5 * (d - 1), 0.5, s2))


def cap_fraction_quad(d: int, theta: float) -> float:
    """Quadrature oracle for :func:`cap_fraction` (polar-angle density sin^(d-2))."""
    d = _check_dim(d)
    if not (0.0 < theta <= 0.5 * math.pi):
        raise ValueError(f"theta must lie in (0, pi/2], got {theta!r}")
    if d == 1:
        return 0.5
    f = lambda phi: math.sin(phi) ** (d - 2)
    num, _ = integrate.quad(f, 0.0, theta, epsabs=1e-14, epsrel=1e-13)
    den, _ = integrate.quad(f, 0.0, math.pi, epsabs=1e-14, epsrel=1e-13)
    return num / den


def cap_volume(radius: float, h: float, d: int) -> float:
    """Volume of {x in B(0, radius): x_1 > h}; h may be negative."""
    if h >= radius:
        return 0.0
    if h <= -radius:
        return ball_volume(radius, d)
    if h < 0.0:
        return ball_volume(radius, d) - cap_volume(radius, -h, d)
    t = (h * h) / (radius * radius)
    frac = float(betainc(0.5 * (d + 1), 0.5, 1.0 - t))
    # near-half caps: the complementary form keeps h^2 from being lost against 1
    if frac > 0.5:
        frac = 1.0 - float(betainc(0.5, 0.5 * (d + 1), t))
    return 0.5 * ball_volume(radius, d) * frac


def lens_volume(a: float, b: float, y: float, d: int) -> float:
    """Volume of B(s, a) intersected with B(t, b) where |s - t| = y.

    The two caps are split at the radical hyperplane, which sits at signed
    distance (y^2 + a^2 - b^2) / (2y) from s along the axis s -> t.
    """
    d = _check_dim(d)
    if a <= 0 or b <= 0 or y < 0:
        raise ValueError(f"need a > 0, b > 0, y >= 0; got a={a}, b={b}, y={y}")
    if y >= a + b:
        return 0.0
    if y <= abs(a - b):
        return ball_volume(min(a, b), d)
    ha = (y * y + a * a - b * b) / (2.0 * y)
    hb = y - ha
    return cap_volume(a, ha, d) + cap_volume(b, hb, d)


def lens_volume_mc(a: float, b: float, y: float, d: int, n_samples: int = 200_000,
                   seed: int = 0) -> tuple[float, float]:
    """Rejection-sampling oracle for :func:`lens_volume`; returns (estimate, standard error)."""
    d = _check_dim(d)
    rng = np.random.default_rng(seed)
    pts = uniform_in_ball(rng, n_samples, d, a)
    pts[:, 0] -= y
    inside = np.einsum("ij,ij->i", pts, pts) < b * b
    frac = inside.mean()
    vol = ball_volume(a, d)
    return vol * frac, vol * math.sqrt(frac * (1.0 - frac) / n_samples)


def uniform_in_ball(rng: np.random.Generator, n: int, d: int, radius: float = 1.0) -> np.ndarray:
    """n points uniform in the centered open ball of the given radius."""
    g = rng.standard_normal((n, d))
    norms = np.sqrt(np.einsum("ij,ij->i", g, g))
    norms[norms == 0.0] = 1.0
    r = radius * rng.random(n) ** (1.0 / d)
    return g * (r / norms)[:, None]


def lens_ratio(y: float, d: int) -> float:
    return lens_volume(1.0, y, y, d) / unit_ball_volume(d)


def lens_ratio_sequence(y: float, d_max: int) -> list[tuple[int, float]]:
    """[(d, L_d(1, y, y) / pi_d) for d = 1..d_max]."""
    if y < 1.0:
        raise ValueError(f"y must be >= 1, got {y!r}")
    d_max = _check_dim(d_max)
    return [(d, lens_ratio(y, d)) for d in range(1, d_max + 1)]
