"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line in the summary.

Large trial streams are computed once per session and shared between criteria
that read the same quantities (d=2 feeds the oracle, tail-bound and sandwich
checks).
"""
import math
import time

import numpy as np
import pytest

from conftest import record_acceptance
from nnlab import bounds as bd
from nnlab import checks, cli
from nnlab import estimators as est
from nnlab.estimators import read_csv
from nnlab.nngraph import build_nn_graph, origin_component
from nnlab.pointprocess import SeedSpec, WindowSpec, default_side, extend_palm, sample_palm

pytestmark = pytest.mark.slow

BIG = 100_000
_CACHE: dict = {}


def big_run(d):
    if d not in _CACHE:
        t0 = time.perf_counter()
        stats = est.run_trials(est.RunConfig(d, BIG, base_seed=2024))
        _CACHE[d] = (stats, time.perf_counter() - t0)
    return _CACHE[d]


def g_tallies(stats, k_max):
    return est.tally_g(stats, k_max)


# 1 -----------------------------------------------------------------------

def test_criterion_1_structural_suite():
    t0 = time.perf_counter()
    results = [checks.structural_suite(d, 1100, base_seed=1) for d in (1, 2, 3)]
    elapsed = time.perf_counter() - t0
    valid = [int(r.detail.split("(")[1].split()[0]) for r in results]
    ok = all(r.passed for r in results) and min(valid) >= 1000 and elapsed <= 120
    record_acceptance(1, ok, f"d=1,2,3 valid trials {valid}, zero violations="
                      f"{all(r.passed for r in results)}, {elapsed:.1f}s (limit 120s)")
    for r in results:
        assert r.passed, r.detail
    assert min(valid) >= 1000
    assert elapsed <= 120


# 2 -----------------------------------------------------------------------

def test_criterion_2_void_probability():
    res = checks.void_probability_check(2, 10_000, base_seed=3, alpha=0.01)
    record_acceptance(2, res.passed, res.detail)
    assert res.passed


# 3 -----------------------------------------------------------------------

def test_criterion_3_nn_exactness():
    res = checks.nn_oracle_suite(dims=(1, 2, 3, 5), n_configs=100, seed=4, n_range=(50, 500))
    record_acceptance(3, res.passed, res.detail + " (100 per d at d=1,2,3,5)")
    assert res.passed


# 4 -----------------------------------------------------------------------

def test_criterion_4_g1_oracle():
    parts, ok = [], True
    total = 0.0
    for d in (1, 2, 3):
        mc = bd.mutual_nn_prob_mc(d, 20_000, seed=40 + d)
        oracle = bd.mutual_nn_prob(d)
        assert abs(mc.estimate - oracle) < 3 * mc.std_error, "oracle fails independent MC"
        stats, wall = big_run(d)
        total += wall
        row = est.estimate_g(stats, 1)[0]
        z = abs(row.estimate - oracle) / row.std_error
        ok &= z < 3
        parts.append(f"d={d} {row.estimate:.5f} vs {oracle:.5f} ({z:.2f} SE, "
                     f"invalid {row.n_invalid})")
    ok &= total <= 600
    record_acceptance(4, ok, "; ".join(parts) + f"; {total:.0f}s (limit 600s)")
    assert ok


# 5 -----------------------------------------------------------------------

def _g1(d, n):
    stats = est.run_trials(est.RunConfig(d, n, base_seed=55))
    return est.estimate_g(stats, 1)[0]


def test_criterion_5_high_dimension_calibration():
    stats = est.run_trials(est.RunConfig(10, BIG, base_seed=5))
    tallies = g_tallies(stats, 3)
    rows = est.estimate_g(stats, 3)
    parts, ok = [], True
    for k, r in enumerate(rows[:3], start=1):
        target = bd.leading_term(k)
        tol = max(3 * r.std_error, 0.05)
        ok &= abs(r.estimate - target) < tol
        parts.append(f"k={k} {r.estimate:.4f} vs {target:.4f}")
    sums_to_one = sum(t.successes for t in tallies) == tallies[0].trials
    ok &= sums_to_one
    g1 = [_g1(d, 20_000) for d in (2, 5)] + [rows[0]]
    vals = [r.estimate for r in g1]
    increases = vals[0] < vals[1] < vals[2] < 0.5
    decreases = all(v > 0.5 for v in vals) and vals[0] > vals[1] > vals[2]
    _CACHE["g1_path"] = (vals, increases, decreases)
    record_acceptance(5, ok and increases,
                      ", ".join(parts) + f", sum=1 {sums_to_one}; g(1) at d=2,5,10 = "
                      + ", ".join(f"{v:.4f}" for v in vals)
                      + f": 'strictly increases toward 1/2' is {increases}"
                      + f" (exact values {', '.join(f'{bd.mutual_nn_prob(d):.4f}' for d in (2, 5, 10))}"
                      + " decrease toward 1/2 from above)")
    assert ok


@pytest.mark.xfail(strict=True, reason="g_d(1) = 1/(2 - L_d(1,1,1)/pi_d) decreases toward 1/2, "
                                       "so a strictly increasing path cannot occur")
def test_criterion_5_literal_increasing_clause():
    if "g1_path" not in _CACHE:
        test_criterion_5_high_dimension_calibration()
    vals, increases, _ = _CACHE["g1_path"]
    assert increases, f"g(1) along d=2,5,10: {vals}"


def test_criterion_5_monotone_approach_to_half():
    if "g1_path" not in _CACHE:
        test_criterion_5_high_dimension_calibration()
    vals, _, decreases = _CACHE["g1_path"]
    assert decreases, vals


# 6 -----------------------------------------------------------------------

def test_criterion_6_leading_term_mc():
    parts, ok = [], True
    for k in range(1, 7):
        mc = bd.leading_term_mc(k, 1_000_000, seed=600 + k)
        exact = bd.leading_term(k)
        good = abs(mc.estimate - exact) <= 3 * mc.std_error
        ok &= good
        z = 0.0 if mc.std_error == 0 else abs(mc.estimate - exact) / mc.std_error
        parts.append(f"k={k} {z:.2f}SE")
    record_acceptance(6, ok, ", ".join(parts) + " (10^6 samples each)")
    assert ok


# 7 -----------------------------------------------------------------------

def test_criterion_7_compound_poisson():
    ident = checks.mgf_identity_check(2, (0.1, 0.5, 1.0), seed=70, rel_tol=0.01)
    dom = []
    for L in range(1, 11):
        b = bd.compound_tail_bound(2, L)
        mc = bd.compound_tail_mc(2, L, n_samples=100_000, seed=700 + L)
        dom.append(b.value >= mc.estimate and b.chernoff >= mc.estimate)
    stats, _ = big_run(2)
    L_grid = [round(0.25 * i, 2) for i in range(1, 16)]
    taus = est.estimate_tau(stats, L_grid)
    n = taus[0].n_trials
    checked = [(r.params["L"], r.estimate - 3 * r.std_error <= bd.compound_tail_bound(2, r.params["L"]).value)
               for r in taus if r.estimate > 10 / n]
    ok = ident.passed and all(dom) and all(c for _, c in checked)
    record_acceptance(7, ok, f"{ident.detail}; bound >= MC tail at L=1..10: {all(dom)}; "
                      f"tau-3SE <= bound at {len(checked)} resolved L: {all(c for _, c in checked)}")
    assert ident.passed, ident.detail
    assert all(dom)
    assert all(c for _, c in checked)


# 8 -----------------------------------------------------------------------

def test_criterion_8_sandwich_and_shapes():
    stats, _ = big_run(2)
    L_grid = [2.0, 2.5, 3.0, 3.5]
    lower_ok = all(r.estimate >= bd.tau_lower_envelope(2, r.params["L"]).value - 3 * r.std_error
                   for r in est.estimate_tau(stats, L_grid))
    n_max = max(s.longest_path_points for s in stats if s.valid)
    rho_ok = all(r.estimate <= bd.rho_upper(2, r.params["n"]) + 3 * r.std_error
                 for r in est.estimate_rho(stats, range(1, n_max + 1)))

    ns = np.array([1e3, 1e4, 1e5, 1e6])
    rr = np.array([bd.log_rho_upper(2, int(n)) / (n * math.log(n)) for n in ns])
    corr = (rr + 0.5) * 2 * np.log(ns)
    rho_shape = bool(np.all(np.diff(np.abs(rr + 0.5)) < 0)
                     and abs(corr[-1] - (math.log(24) + 1)) < 0.05)

    Ls = [10.0, 100.0, 1000.0, 10000.0]
    er = np.array([bd.tau_lower_envelope(2, L).log_value / (L * math.log(L) ** 0.5) for L in Ls])
    env_shape = bool(np.all(er < 0) and np.all(np.diff(np.abs(np.diff(er))) < 0))

    ok = lower_ok and rho_ok and rho_shape and env_shape
    record_acceptance(8, ok, f"tau >= envelope-3SE {lower_ok}; rho <= upper+3SE up to n={n_max} "
                      f"{rho_ok}; log rho_upper/(n log n) = {rr[-1]:.3f} at n=1e6 with Stirling "
                      f"correction {corr[-1]:.3f} (log 4K + 1 = {math.log(24) + 1:.3f}); "
                      f"envelope ratio {', '.join(f'{x:.2f}' for x in er)} settling")
    assert ok


# 9 -----------------------------------------------------------------------

def test_criterion_9_torus_bias():
    n = 10_000
    w = WindowSpec(2, default_side(2))
    small = large = 0
    for i in range(n):
        s = sample_palm(w, SeedSpec(9, i))
        g = build_nn_graph(s)
        small += origin_component(g, s).generation[s.origin_index] == 1
        # the doubled box reuses this trial's points around the origin
        big = extend_palm(s, SeedSpec(9, i, 1))
        gb = build_nn_graph(big)
        large += origin_component(gb, big).generation[big.origin_index] == 1
    p1, p2 = small / n, large / n
    se = math.sqrt(p1 * (1 - p1) / n + p2 * (1 - p2) / n)
    ok = abs(p1 - p2) < 2 * se
    record_acceptance(9, ok, f"g(1) side {w.side:.2f}: {p1:.4f}, side {2 * w.side:.2f}: {p2:.4f}, "
                      f"|diff| = {abs(p1 - p2):.4f} < 2*SE = {2 * se:.4f}")
    assert ok


# 10 ----------------------------------------------------------------------

def test_criterion_10_worker_reproducibility(tmp_path):
    rows = {}
    for w in (1, 4, 16):
        out = tmp_path / f"w{w}"
        code = cli.main(["estimate", "--dim", "2", "--trials", "400", "--seed", "10",
                         "--workers", str(w), "--L", "0.5:3:0.5", "--n", "1:6:1",
                         "--out", str(out)])
        assert code == 0
        got = read_csv(out / "estimates.csv")
        for r in got:
            r.pop("wall_time_s")
        rows[w] = got
    ok = rows[1] == rows[4] == rows[16]
    record_acceptance(10, ok, f"{len(rows[1])} result rows identical for workers 1, 4, 16: {ok}")
    assert ok
