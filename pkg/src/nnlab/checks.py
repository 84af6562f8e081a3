"""Structural and distributional self-checks shared by the ``check`` command and the tests."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import bounds
from .geometry import unit_ball_volume
from .nngraph import (StructuralViolation, build_nn_graph, nn_brute, nn_grid, origin_component,
                      structural_report, structural_violations)
from .pointprocess import Sample, SeedSpec, WindowSpec, default_side, sample_palm


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    counterexample: Sample | None = field(default=None, repr=False)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def check_sample(sample: Sample, rule: str = "nearest") -> list[str]:
    """All structural violations found in one configuration (empty list if clean)."""
    graph = build_nn_graph(sample, rule=rule)
    problems = structural_violations(structural_report(graph))
    try:
        origin_component(graph, sample)
    except StructuralViolation as exc:
        problems.append(f"origin component: {exc}")
    return problems


def structural_suite(d: int, n_trials: int = 1000, base_seed: int = 0, side: float | None = None,
                     rule: str = "nearest") -> CheckResult:
    """Scan every component of ``n_trials`` torus samples; stop at the first violation.

    A trial counts as valid when its origin component passes the window guards
    (diameter <= side/4, member NN distances <= side/8); all components of all
    trials are scanned regardless.
    """
    window = WindowSpec(d, side if side is not None else default_side(d))
    totals = {"components": 0, "small_components_path_checked": 0, "ties": 0}
    n_valid = 0
    for i in range(n_trials):
        sample = sample_palm(window, SeedSpec(base_seed, i))
        graph = build_nn_graph(sample, rule=rule)
        rep = structural_report(graph)
        problems = structural_violations(rep)
        try:
            comp = origin_component(graph, sample)
        except StructuralViolation as exc:
            problems.append(str(exc))
            comp = None
        if problems:
            return CheckResult(f"structure d={d}", False,
                               f"trial {i}: " + "; ".join(problems), sample)
        for key in totals:
            totals[key] += rep[key]
        if comp.diameter <= window.side / 4 and comp.max_member_nn_dist <= window.side / 8:
            n_valid += 1
    detail = (f"{n_trials} trials ({n_valid} valid), {totals['components']} components, "
              f"{totals['small_components_path_checked']} path-checked, ties={totals['ties']}")
    return CheckResult(f"structure d={d}", True, detail)


def nn_oracle_suite(dims=(1, 2, 3, 5), n_configs: int = 100, seed: int = 0,
                    n_range=(50, 500)) -> CheckResult:
    """Grid-accelerated NN must equal the brute-force oracle index for index."""
    rng = np.random.default_rng(seed)
    mismatches = 0
    total = 0
    for d in dims:
        for _ in range(n_configs):
            n = int(rng.integers(n_range[0], n_range[1] + 1))
            side = float(n) ** (1.0 / d) * rng.uniform(0.8, 1.25)
            pts = rng.random((n, d)) * side
            a = nn_grid(pts, side)[0]
            b = nn_brute(pts, side)[0]
            mismatches += int(np.sum(a != b))
            total += 1
    return CheckResult("nn grid == brute force", mismatches == 0,
                       f"{total} configurations, {mismatches} mismatched indices")


def origin_nn_distances(d: int, n_trials: int, base_seed: int = 0,
                        side: float | None = None) -> np.ndarray:
    window = WindowSpec(d, side if side is not None else default_side(d))
    out = np.empty(n_trials)
    for i in range(n_trials):
        sample = sample_palm(window, SeedSpec(base_seed, i))
        g = build_nn_graph(sample)
        out[i] = g.nn_dist[sample.origin_index]
    return out


def ks_critical(n: int, alpha: float = 0.01) -> float:
    return float(stats.kstwo.ppf(1.0 - alpha, n))


def void_probability_check(d: int = 2, n_trials: int = 10_000, base_seed: int = 0,
                           alpha: float = 0.01) -> CheckResult:
    """KS test of the origin's NN distance against P(D > r) = exp(-pi_d r^d)."""
    dist = origin_nn_distances(d, n_trials, base_seed)
    kappa = unit_ball_volume(d)
    ks = stats.kstest(dist, lambda r: 1.0 - np.exp(-kappa * r**d)).statistic
    crit = ks_critical(n_trials, alpha)
    return CheckResult(f"void probability d={d}", ks < crit,
                       f"KS={ks:.5f} < {crit:.5f} ({n_trials} trials)")


def radial_law_check(d: int = 2, n_samples: int = 100_000, seed: int = 0) -> CheckResult:
    """pi_d |W|^d must be standard exponential."""
    w = bounds.sample_absW(d, seed, n_samples)
    y = unit_ball_volume(d) * w**d
    res = stats.kstest(y, "expon")
    return CheckResult(f"radial law d={d}", res.pvalue > 0.01,
                       f"KS p-value {res.pvalue:.3f} ({n_samples} draws)")


def mgf_identity_check(d: int = 2, rs=(0.1, 0.5, 1.0), seed: int = 0,
                       rel_tol: float = 0.01, n_per_count: int = 50_000) -> CheckResult:
    """Monte Carlo E exp(rU) against exp(2K (E exp(r|W|) - 1))."""
    worst = 0.0
    parts = []
    for j, r in enumerate(rs):
        mc = bounds.compound_mgf_mc(d, r, n_per_count=n_per_count, seed=seed + j)
        exact = bounds.compound_mgf(d, r)
        rel = abs(mc.estimate - exact) / exact
        worst = max(worst, rel)
        parts.append(f"r={r}: {rel:.2e}")
    return CheckResult(f"compound MGF identity d={d}", worst < rel_tol, ", ".join(parts))


def run_all(dims=(1, 2, 3), n_trials: int = 1000, base_seed: int = 0, side: float | None = None,
            rule: str = "nearest", identity_trials: int = 10_000) -> list[CheckResult]:
    results = [structural_suite(d, n_trials, base_seed, side if len(dims) == 1 else None, rule)
               for d in dims]
    if rule != "nearest":
        return results
    results.append(nn_oracle_suite(seed=base_seed))
    results.append(void_probability_check(2, identity_trials, base_seed))
    results.append(radial_law_check(2, seed=base_seed))
    results.append(mgf_identity_check(2, seed=base_seed))
    return results
