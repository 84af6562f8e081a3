"""Trial orchestration and Monte Carlo estimates of g_d(k), tau_d(L), rho_d(n), p_d(n, L).

One trial samples a Palm configuration, builds the NN graph and measures the
origin's component. Two samplers exist:

``torus``
    Periodic box (:mod:`nnlab.pointprocess`). Gives every observable. A trial
    is invalid when the component diameter exceeds side/4 or a member's NN
    distance exceeds side/8; the sample is then embedded in a box of twice the
    side (old points kept, new shell filled), up to ``max_redoubles`` times.
``explore``
    Exact lazy sampling in infinite volume (:mod:`nnlab.explore`). Gives only
    chain observables (generation number, p_d(n, L)), but works in any
    dimension. ``auto`` picks it for d >= 5.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .explore import explore_chain
from .nngraph import build_nn_graph, max_in_degree, origin_component
from .pointprocess import (SampleError, SeedSpec, WindowSpec, default_side, extend_palm,
                           sample_palm)

EXPLORE_FROM_DIM = 5

CSV_COLUMNS = ["quantity", "d", "param_k", "param_L", "param_n", "estimate", "std_error",
               "ci_low", "ci_high", "n_trials", "n_invalid", "base_seed", "wall_time_s"]


@dataclass(frozen=True)
class RunConfig:
    d: int
    n_trials: int
    base_seed: int = 0
    side: float | None = None
    max_redoubles: int = 2
    sampler: str = "auto"
    workers: int = 1
    rule: str = "nearest"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.max_redoubles < 0:
            raise ValueError("max_redoubles must be >= 0")
        if self.base_seed < 0:
            raise ValueError("base_seed must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.sampler not in ("auto", "torus", "explore"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.side is not None:
            WindowSpec(self.d, self.side)

    @property
    def resolved_sampler(self) -> str:
        if self.sampler != "auto":
            return self.sampler
        return "explore" if self.d >= EXPLORE_FROM_DIM else "torus"

    @property
    def window(self) -> WindowSpec:
        return WindowSpec(self.d, self.side if self.side is not None else default_side(self.d))


@dataclass(frozen=True)
class TrialStats:
    trial_index: int
    d: int
    base_seed: int
    generation_of_origin: int
    chain_points: int
    chain_norms: tuple
    origin_nn_dist: float
    valid: bool = True
    reason: str = ""
    extent: float | None = None
    longest_path_points: int | None = None
    max_in_degree: int | None = None
    component_size: int | None = None
    side: float | None = None
    attempts: int = 1
    ties: int = 0


def _torus_trial(cfg: RunConfig, idx: int) -> TrialStats:
    window = cfg.window
    ties = 0
    try:
        sample = sample_palm(window, SeedSpec(cfg.base_seed, idx))
    except SampleError as exc:
        return TrialStats(idx, cfg.d, cfg.base_seed, 0, 0, (), math.nan, False, str(exc),
                          side=window.side)
    for attempt in range(cfg.max_redoubles + 1):
        if attempt:
            sample = extend_palm(sample, SeedSpec(cfg.base_seed, idx, attempt))
        window = sample.window
        graph = build_nn_graph(sample, rule=cfg.rule)
        ties += graph.ties
        comp = origin_component(graph, sample)
        problems = []
        if comp.diameter > window.side / 4:
            problems.append("diameter > side/4")
        if comp.max_member_nn_dist > window.side / 8:
            problems.append("nn distance > side/8")
        stats = TrialStats(
            trial_index=idx, d=cfg.d, base_seed=cfg.base_seed,
            generation_of_origin=int(comp.generation[sample.origin_index]),
            chain_points=comp.chain_points,
            chain_norms=comp.chain_norms,
            origin_nn_dist=float(graph.nn_dist[sample.origin_index]),
            valid=not problems, reason="; ".join(problems),
            extent=comp.extent,
            longest_path_points=comp.longest_path_points,
            max_in_degree=max_in_degree(graph),
            component_size=len(comp.members),
            side=window.side, attempts=attempt + 1, ties=ties,
        )
        if not problems:
            break
    return stats


def _explore_trial(cfg: RunConfig, idx: int) -> TrialStats:
    norms, nn0 = explore_chain(cfg.d, SeedSpec(cfg.base_seed, idx).generator())
    return TrialStats(trial_index=idx, d=cfg.d, base_seed=cfg.base_seed,
                      generation_of_origin=len(norms), chain_points=len(norms),
                      chain_norms=norms, origin_nn_dist=nn0)


def run_trial(cfg: RunConfig, idx: int) -> TrialStats:
    if cfg.resolved_sampler == "explore":
        if cfg.rule != "nearest":
            raise ValueError("the explore sampler only supports the nearest-neighbor rule")
        return _explore_trial(cfg, idx)
    return _torus_trial(cfg, idx)


def _run_range(args) -> list[TrialStats]:
    cfg, lo, hi = args
    return [run_trial(cfg, i) for i in range(lo, hi)]


def run_trials(config: RunConfig) -> list[TrialStats]:
    """TrialStats for trial indices 0..n_trials-1, identical for any worker count."""
    n = config.n_trials
    if config.workers == 1:
        return _run_range((config, 0, n))
    n_chunks = min(n, 4 * config.workers)
    edges = np.linspace(0, n, n_chunks + 1).astype(int)
    jobs = [(config, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    out: list[TrialStats] = []
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        for part in pool.map(_run_range, jobs):
            out.extend(part)
    return out


# ------------------------------------------------------------- estimation

def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    z = float(norm.ppf(0.5 + 0.5 * level))
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    low = 0.0 if successes == 0 else max(0.0, min(p, center - half))
    high = 1.0 if successes == trials else min(1.0, max(p, center + half))
    return low, high


@dataclass(frozen=True)
class Tally:
    """Binomial tally; addition merges tallies from disjoint trial sets."""

    successes: int = 0
    trials: int = 0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(self.successes + other.successes, self.trials + other.trials)


@dataclass
class EstimateResult:
    quantity: str
    d: int
    params: dict
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    n_trials: int
    n_invalid: int
    base_seed: int
    wall_time: float = 0.0
    successes: int = 0

    @classmethod
    def from_tally(cls, quantity, d, params, tally: Tally, n_invalid, base_seed,
                   wall_time=0.0, level=0.95):
        n = tally.trials
        p = tally.successes / n
        low, high = wilson_interval(tally.successes, n, level)
        return cls(quantity, d, params, p, math.sqrt(p * (1 - p) / n), low, high, n,
                   n_invalid, base_seed, wall_time, tally.successes)

    def csv_row(self) -> list[str]:
        k = self.params.get("k")
        if k is not None and self.params.get("tail"):
            k = f"{k}+"
        return [self.quantity, str(self.d), _fmt_param(k), _fmt_param(self.params.get("L")),
                _fmt_param(self.params.get("n")), _fmt(self.estimate), _fmt(self.std_error),
                _fmt(self.ci_low), _fmt(self.ci_high), str(self.n_trials), str(self.n_invalid),
                str(self.base_seed), f"{self.wall_time:.3f}"]

    def to_json(self) -> dict:
        return asdict(self)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _fmt_param(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _split(stats: Sequence[TrialStats]):
    if not stats:
        raise ValueError("no trials")
    valid = [s for s in stats if s.valid]
    if not valid:
        raise ValueError("all trials are invalid")
    return valid, len(stats) - len(valid), stats[0].d, stats[0].base_seed


def tally_g(stats: Sequence[TrialStats], k_max: int) -> list[Tally]:
    """Counts of generation k = 1..k_max and of the tail k > k_max over valid trials."""
    valid = [s for s in stats if s.valid]
    counts = [0] * (k_max + 1)
    for s in valid:
        g = s.generation_of_origin
        counts[min(g, k_max + 1) - 1] += 1
    return [Tally(c, len(valid)) for c in counts]


def estimate_g(stats: Sequence[TrialStats], k_max: int, wall_time: float = 0.0,
               level: float = 0.95) -> list[EstimateResult]:
    """Fractions of valid trials with origin generation k for k = 1..k_max, plus a tail row."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    valid, n_inv, d, seed = _split(stats)
    out = []
    for k, t in enumerate(tally_g(valid, k_max), start=1):
        params = {"k": k, "tail": k == k_max + 1}
        out.append(EstimateResult.from_tally("G", d, params, t, n_inv, seed, wall_time, level))
    return out


def estimate_tau(stats: Sequence[TrialStats], L_grid, wall_time: float = 0.0,
                 level: float = 0.95) -> list[EstimateResult]:
    """Fraction of valid trials whose component reaches beyond distance L."""
    valid, n_inv, d, seed = _split(stats)
    if any(s.extent is None for s in valid):
        raise ValueError("extent is unavailable for explore-sampler trials")
    limit = min(s.side for s in valid) / 4
    ext = np.array([s.extent for s in valid])
    out = []
    for L in L_grid:
        if L < 0:
            raise ValueError("L must be nonnegative")
        if L >= limit:
            raise ValueError(f"L={L} is beyond the window guard side/4={limit:.4g}")
        t = Tally(int(np.sum(ext > L)), len(valid))
        out.append(EstimateResult.from_tally("TAU", d, {"L": float(L)}, t, n_inv, seed,
                                             wall_time, level))
    return out


def estimate_rho(stats: Sequence[TrialStats], n_grid, wall_time: float = 0.0,
                 level: float = 0.95) -> list[EstimateResult]:
    """Fraction of valid trials whose longest path through the origin has more than n points."""
    valid, n_inv, d, seed = _split(stats)
    if any(s.longest_path_points is None for s in valid):
        raise ValueError("path lengths are unavailable for explore-sampler trials")
    lp = np.array([s.longest_path_points for s in valid])
    out = []
    for n in n_grid:
        if n < 1:
            raise ValueError("n must be >= 1")
        t = Tally(int(np.sum(lp > n)), len(valid))
        out.append(EstimateResult.from_tally("RHO", d, {"n": int(n)}, t, n_inv, seed,
                                             wall_time, level))
    return out


def p_indicator(s: TrialStats, n: int, L: float) -> bool:
    return s.chain_points >= n and s.chain_norms[n - 1] > L


def estimate_p(stats: Sequence[TrialStats], n: int, L: float, wall_time: float = 0.0,
               level: float = 0.95) -> EstimateResult:
    """Fraction of valid trials whose directed chain has >= n points with the n-th beyond L."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if L < 0:
        raise ValueError("L must be nonnegative")
    valid, n_inv, d, seed = _split(stats)
    t = Tally(sum(p_indicator(s, n, L) for s in valid), len(valid))
    return EstimateResult.from_tally("P", d, {"n": int(n), "L": float(L)}, t, n_inv, seed,
                                     wall_time, level)


# ---------------------------------------------------------------- output

def write_csv(results: Sequence[EstimateResult], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(r.csv_row())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def write_jsonl(results: Sequence[EstimateResult], path: str | Path | None = None) -> str:
    text = "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in results)
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
