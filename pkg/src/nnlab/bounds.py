"""Analytic bounds and limit laws for NN-graph components, with Monte Carlo cross-checks.

Random vectors W in R^d here have density exp(-pi_d |w|^d); equivalently
pi_d |W|^d is standard exponential. The compound Poisson variable U is the sum
of a Poisson(2K) number of independent copies of |W|, K being the kissing
number. All combinatorial factors are handled in log space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from . import geometry


class KissingUnavailable(ValueError):
    """No kissing number is known for the requested dimension."""


_KISSING_DEFAULTS = {
    1: (2, "exact"),
    2: (6, "exact"),
    3: (12, "exact (Schuette-van der Waerden)"),
    4: (24, "exact (Musin)"),
    5: (40, "best known lattice value; proven range 40-44"),
    6: (72, "best known lattice value; proven range 72-77"),
    7: (126, "best known lattice value; proven range 126-134"),
    8: (240, "exact (E8)"),
}


@dataclass
class KissingTable:
    """Kissing numbers K_d with a provenance tag per entry; user overrides win."""

    overrides: dict = field(default_factory=dict)

    def __getitem__(self, d: int) -> int:
        if d in self.overrides:
            return int(self.overrides[d])
        if d in _KISSING_DEFAULTS:
            return _KISSING_DEFAULTS[d][0]
        raise KissingUnavailable(f"no kissing number for d={d}; supply one explicitly")

    def source(self, d: int) -> str:
        if d in self.overrides:
            return "user supplied"
        if d in _KISSING_DEFAULTS:
            return _KISSING_DEFAULTS[d][1]
        raise KissingUnavailable(f"no kissing number for d={d}")

    def __contains__(self, d: int) -> bool:
        return d in self.overrides or d in _KISSING_DEFAULTS

    @classmethod
    def parse(cls, text: str | None) -> "KissingTable":
        """Parse ``"d=K,d=K"`` override strings."""
        overrides = {}
        for part in (text or "").split(","):
            part = part.strip()
            if not part:
                continue
            d, _, k = part.partition("=")
            if not k:
                raise ValueError(f"bad kissing entry {part!r}; expected d=K")
            kv = int(k)
            if kv < 1:
                raise ValueError(f"kissing number must be positive, got {kv}")
            overrides[int(d)] = kv
        return cls(overrides)


DEFAULT_KISSING = KissingTable()


def _kissing(d: int, kissing) -> int:
    if kissing is None:
        return DEFAULT_KISSING[d]
    if isinstance(kissing, (int, np.integer)):
        return int(kissing)
    return kissing[d]


# ------------------------------------------------------------ |W| and U

def sample_absW(d: int, seed, size=None) -> np.ndarray | float:
    """|W| = (Y / pi_d)^(1/d) with Y ~ Exp(1)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y = rng.standard_exponential(size)
    return (y / geometry.unit_ball_volume(d)) ** (1.0 / d)


def mean_absW(d: int) -> float:
    return math.gamma(1.0 + 1.0 / d) * geometry.unit_ball_volume(d) ** (-1.0 / d)


def log_mgf_absW(d: int, r: float) -> float:
    """log E exp(r |W|) by adaptive quadrature over y = pi_d |w|^d, shifted by the integrand's peak."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0:
        return 0.0
    kappa = geometry.unit_ball_volume(d)
    if d == 1 and r >= 2.0:
        raise OverflowError("E exp(r|W|) diverges in d=1 for r >= 2")
    if d == 1:
        y_peak = 0.0
    else:
        y_peak = (r / (d * kappa ** (1.0 / d))) ** (d / (d - 1.0))
    top = r * (y_peak / kappa) ** (1.0 / d) - y_peak

    def f(y):
        return math.exp(r * (y / kappa) ** (1.0 / d) - y - top)

    width = max(1.0, 10.0 * math.sqrt(y_peak + 1.0))
    pieces = [(0.0, y_peak), (y_peak, y_peak + width)] if y_peak > 0 else [(0.0, width)]
    total = 0.0
    for a, b in pieces:
        total += integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    total += integrate.quad(f, pieces[-1][1], np.inf, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return top + math.log(total)


def mgf_absW(d: int, r: float) -> float:
    """E exp(r |W|); diverges (OverflowError) for d = 1 and r >= 2."""
    return math.exp(log_mgf_absW(d, r))


def mgf_growth_constant(d: int) -> float:
    """Limit of log E exp(r|W|) / r^(d/(d-1)) as r grows (Laplace method), d >= 2."""
    if d < 2:
        raise ValueError("growth constant is defined for d >= 2")
    kappa = geometry.unit_ball_volume(d)
    return (d - 1.0) * (d * kappa ** (1.0 / d)) ** (-d / (d - 1.0))


def fit_mgf_growth(d: int, r_grid) -> float:
    """Smallest c with log E exp(r|W|) <= c r^(d/(d-1)) on every r in the grid."""
    p = d / (d - 1.0)
    return max(log_mgf_absW(d, r) / r**p for r in r_grid)


def sample_compound(d: int, kissing, n_samples: int, seed) -> np.ndarray:
    """Draws of U = |W_1| + ... + |W_N| with N ~ Poisson(2K)."""
    K = _kissing(d, kissing)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = rng.poisson(2 * K, size=n_samples)
    w = sample_absW(d, rng, int(counts.sum()))
    owner = np.repeat(np.arange(n_samples), counts)
    return np.bincount(owner, weights=w, minlength=n_samples)


@dataclass
class MCEstimate:
    estimate: float
    std_error: float
    n_samples: int


def compound_tail_mc(d: int, L: float, kissing=None, n_samples: int = 100_000,
                     seed=0, chunk: int = 1_000_000) -> MCEstimate:
    """Direct Monte Carlo estimate of P(U >= c_2 L), c_2 = K^(-1/d)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    K = _kissing(d, kissing)
    thr = L * K ** (-1.0 / d)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        hits += int(np.sum(sample_compound(d, K, m, rng) >= thr))
        done += m
    p = hits / n_samples
    return MCEstimate(p, math.sqrt(p * (1 - p) / n_samples), n_samples)


def compound_mgf_mc(d: int, r: float, kissing=None, n_per_count: int = 50_000,
                    seed=0, n_max: int | None = None) -> MCEstimate:
    """Monte Carlo estimate of E exp(rU), stratified over the Poisson count N.

    For n = 1, 2, ... the sum |W_1| + ... + |W_n| is simulated afresh and
    exp(r * sum) averaged; strata are recombined with exact Poisson weights and
    the loop stops once a stratum past the Poisson mean contributes < 1e-12.
    Plain sampling of U is hopeless here (exp(rU) has relative standard
    deviation near 90 at r = 1, d = 2), while no stratum uses E exp(r|W|).
    """
    K = _kissing(d, kissing)
    lam = 2.0 * K
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    est = math.exp(-lam)
    var = 0.0
    n = 0
    while True:
        n += 1
        s = np.zeros(n_per_count)
        for _ in range(n):
            s += sample_absW(d, rng, n_per_count)
        v = np.exp(r * s)
        w = math.exp(-lam + n * math.log(lam) - gammaln(n + 1))
        term = w * v.mean()
        est += term
        var += w * w * v.var(ddof=1) / n_per_count
        if n_max is not None:
            if n >= n_max:
                break
        elif n > lam and term < 1e-12 * est:
            break
    return MCEstimate(float(est), math.sqrt(var), n_per_count * n)


def compound_mgf(d: int, r: float, kissing=None) -> float:
    """E exp(rU) = exp(2K (E exp(r|W|) - 1))."""
    K = _kissing(d, kissing)
    return math.exp(2 * K * (mgf_absW(d, r) - 1.0))


@dataclass
class TailBound:
    L: float
    value: float
    log_value: float
    log_chernoff: float
    r_star: float
    K: int
    c2: float

    @property
    def chernoff(self) -> float:
        return math.exp(min(0.0, self.log_chernoff))


def _chernoff_exponent(d: int, K: int, thr: float, r: float) -> float:
    try:
        m = mgf_absW(d, r)
    except OverflowError:
        return math.inf
    return 2 * K * (m - 1.0) - r * thr


def compound_tail_bound(d: int, L: float, kissing=None) -> TailBound:
    """Upper bound e^{2K} P(U >= c_2 L) <= e^{2K} exp(inf_r {2K(E e^{r|W|} - 1) - r c_2 L}).

    The infimum is located by golden-section search over log r, seeded at
    r = (log L)^((d-1)/d). When c_2 L does not exceed E U the infimum is the
    r -> 0 limit 0 and the bound is vacuous (clamped to 1).
    """
    if L < 0:
        raise ValueError("L must be nonnegative")
    K = _kissing(d, kissing)
    c2 = K ** (-1.0 / d)
    thr = c2 * L
    if thr <= 2 * K * mean_absW(d):
        log_ch = 0.0
        r_star = 0.0
    else:
        h = lambda t: _chernoff_exponent(d, K, thr, math.exp(t))
        seed_r = math.log(L) ** ((d - 1.0) / d) if L > math.e else 1.0
        if d == 1:
            seed_r = min(seed_r, 1.0)
        t_mid = math.log(seed_r)
        step = 0.5
        lo, hi = t_mid - step, t_mid + step
        while not h(lo) > h(t_mid):
            t_mid, lo = lo, lo - step
            step *= 1.5
        step = 0.5
        while not h(hi) > h(t_mid):
            t_mid, hi = hi, hi + step
            step *= 1.5
        res = optimize.minimize_scalar(h, bracket=(lo, t_mid, hi), method="golden",
                                       options={"xtol": 1e-10})
        r_star = math.exp(res.x)
        log_ch = min(0.0, float(res.fun))
    log_val = min(0.0, 2 * K + log_ch)
    return TailBound(L, math.exp(log_val), log_val, log_ch, r_star, K, c2)


# ------------------------------------------------------- lower envelopes

def log_lower_bound_p(d: int, n, L, theta):
    """log of b(theta)^n / n! * exp(-(pi_d / cos^d theta) n (L/n)^d); vectorized in n and theta."""
    n = np.asarray(n, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(n < 1):
        raise ValueError("n must be >= 1")
    if np.any(theta <= 0) or np.any(theta > math.pi / 4 + 1e-15):
        raise ValueError("theta must lie in (0, pi/4]")
    if L < 0:
        raise ValueError("L must be nonnegative")
    logb = np.log(np.vectorize(lambda t: geometry.cap_fraction(d, float(t)))(theta))
    c1 = geometry.unit_ball_volume(d) / np.cos(theta) ** d
    out = n * logb - gammaln(n + 1.0) - c1 * n * (L / n) ** d
    return out if out.ndim else float(out)


def lower_bound_p(d: int, n: int, L: float, theta: float) -> float:
    return math.exp(log_lower_bound_p(d, n, L, theta))


def default_theta_grid(size: int = 64) -> np.ndarray:
    return np.linspace(math.pi / 4 / size, math.pi / 4, size)


@dataclass
class Envelope:
    L: float
    log_value: float
    n_star: int
    theta_star: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def heuristic_n(d: int, L: float) -> float:
    return L / math.log(L) ** (1.0 / d)


def tau_lower_envelope(d: int, L: float, theta_grid=None) -> Envelope:
    """Best lower bound on p_d(n, L) over n in [1, 4 n0] and theta on a grid, n0 = L / (log L)^(1/d)."""
    if L < 2:
        raise ValueError("L must be >= 2")
    thetas = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, dtype=float)
    n0 = heuristic_n(d, L)
    ns = np.arange(1, int(math.ceil(4 * n0)) + 2, dtype=float)
    logb = np.log([geometry.cap_fraction(d, float(t)) for t in thetas])
    c1 = geometry.unit_ball_volume(d) / np.cos(thetas) ** d
    vals = (ns[:, None] * logb[None, :] - gammaln(ns + 1.0)[:, None]
            - c1[None, :] * (ns * (L / ns) ** d)[:, None])
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    return Envelope(L, float(vals[i, j]), int(ns[i]), float(thetas[j]))


def log_rho_upper(d: int, n: int, kissing=None) -> float:
    """log of (2K)^m / m!, m = floor(n/2), before clamping."""
    if n < 1:
        raise ValueError("n must be >= 1")
    K = _kissing(d, kissing)
    m = n // 2
    return m * math.log(2 * K) - float(gammaln(m + 1))


def rho_upper(d: int, n: int, kissing=None) -> float:
    return math.exp(min(0.0, log_rho_upper(d, n, kissing)))


# ---------------------------------------------------- high-d limit law

def leading_term(k: int) -> float:
    """k / (k+1)!."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return math.exp(math.log(k) - gammaln(k + 2))


def leading_term_mc(k: int, n_samples: int = 1_000_000, seed=0,
                    chunk: int = 1_000_000) -> MCEstimate:
    """(1/2) P(Y_1 >= ... >= Y_k), Y_1..Y_{k-1} ~ Exp(1), Y_k ~ Exp(rate 2)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return MCEstimate(0.5, 0.0, n_samples)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        y = rng.standard_exponential((m, k))
        y[:, -1] *= 0.5
        hits += int(np.sum(np.all(y[:, :-1] >= y[:, 1:], axis=1)))
        done += m
    p = hits / n_samples
    return MCEstimate(0.5 * p, 0.5 * math.sqrt(p * (1 - p) / n_samples), n_samples)


def mutual_nn_prob(d: int) -> float:
    """Palm probability that the origin and its NN are mutual nearest neighbors.

    With the NN at distance r, mutuality needs the part of B(NN, r) outside
    B(0, r) to be empty; that region has volume pi_d r^d (1 - lambda_d) with
    lambda_d = L_d(1,1,1)/pi_d, and integrating against the NN density in the
    variable y = pi_d r^d gives 1 / (2 - lambda_d).
    """
    lam = geometry.lens_volume(1.0, 1.0, 1.0, d) / geometry.unit_ball_volume(d)
    return 1.0 / (2.0 - lam)


def mutual_nn_prob_mc(d: int, n_samples: int = 20_000, seed=0) -> MCEstimate:
    """Independent oracle for :func:`mutual_nn_prob` from explicit Poisson samples in a ball.

    Each draw puts Poisson points in B(0, R) around an extra origin point, takes
    the origin's NN y and checks that no point other than the origin lies in
    B(y, |y|). R is large enough that the relevant balls stay inside B(0, R)
    except with negligible probability.
    """
    rng = np.random.default_rng(seed)
    kappa = geometry.unit_ball_volume(d)
    R = 3.0 * (12.0 / kappa) ** (1.0 / d)
    hits = 0
    used = 0
    for _ in range(n_samples):
        k = int(rng.poisson(kappa * R**d))
        if k == 0:
            continue
        pts = geometry.uniform_in_ball(rng, k, d, R)
        dist = np.sqrt(np.einsum("ij,ij->i", pts, pts))
        j = int(np.argmin(dist))
        r = dist[j]
        if 2 * r >= R:
            continue
        diff = pts - pts[j]
        dj = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        dj[j] = np.inf
        hits += int(dj.min() > r)
        used += 1
    p = hits / used
    return MCEstimate(p, math.sqrt(p * (1 - p) / used), used)
