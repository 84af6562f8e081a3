import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnlab import estimators as est
from nnlab.bounds import compound_tail_bound, log_lower_bound_p, rho_upper
from nnlab.pointprocess import default_side


def _fake(gens, valid=None, d=2):
    valid = valid or [True] * len(gens)
    return [est.TrialStats(i, d, 0, g, g, tuple(float(3 - j) for j in range(g)), 0.5, v)
            for i, (g, v) in enumerate(zip(gens, valid))]


@pytest.fixture(scope="module")
def d2_stats():
    return est.run_trials(est.RunConfig(2, 3000, base_seed=1))


# ----------------------------------------------------------- configuration

@pytest.mark.parametrize("kwargs", [dict(n_trials=0), dict(max_redoubles=-1), dict(d=0),
                                    dict(workers=0), dict(sampler="magic"), dict(base_seed=-2),
                                    dict(side=1.0)])
def test_run_config_rejects(kwargs):
    base = dict(d=2, n_trials=10)
    base.update(kwargs)
    with pytest.raises(ValueError):
        est.RunConfig(**base)


def test_sampler_resolution():
    assert est.RunConfig(3, 1).resolved_sampler == "torus"
    assert est.RunConfig(5, 1).resolved_sampler == "explore"
    assert est.RunConfig(10, 1, sampler="torus").resolved_sampler == "torus"
    assert est.RunConfig(2, 1).window.side == pytest.approx(default_side(2))


# ---------------------------------------------------------------- trials

def test_run_trials_deterministic():
    cfg = est.RunConfig(2, 50, base_seed=9)
    assert est.run_trials(cfg) == est.run_trials(cfg)
    other = est.run_trials(est.RunConfig(2, 50, base_seed=10))
    assert other != est.run_trials(cfg)


def test_run_trials_prefix_stable():
    a = est.run_trials(est.RunConfig(2, 40, base_seed=3))
    b = est.run_trials(est.RunConfig(2, 15, base_seed=3))
    assert a[:15] == b


def test_trial_stats_invariants(d2_stats):
    for s in d2_stats:
        assert s.valid
        assert s.generation_of_origin >= 1
        assert s.generation_of_origin == s.chain_points
        assert 2 <= s.longest_path_points <= s.component_size
        assert s.max_in_degree <= 6
        assert len(s.chain_norms) == s.chain_points
        assert s.extent >= max(s.chain_norms) - 1e-12


def test_invalid_fraction_after_redoubling_d2():
    stats = est.run_trials(est.RunConfig(2, 10_000, base_seed=4))
    bad = sum(not s.valid for s in stats)
    assert bad / len(stats) < 1e-3


def test_tiny_window_flags_and_redoubles():
    stats = est.run_trials(est.RunConfig(2, 200, base_seed=0, side=3.0, max_redoubles=0))
    assert any(not s.valid for s in stats)
    assert all(s.reason for s in stats if not s.valid)
    redo = est.run_trials(est.RunConfig(2, 200, base_seed=0, side=3.0, max_redoubles=3))
    assert sum(not s.valid for s in redo) < sum(not s.valid for s in stats)
    assert max(s.attempts for s in redo) > 1
    # trials valid at the first attempt are unchanged by the redoubling budget
    for a, b in zip(stats, redo):
        if a.valid:
            assert a == b


def test_explore_trials():
    stats = est.run_trials(est.RunConfig(10, 300, base_seed=2))
    assert all(s.extent is None and s.valid for s in stats)
    with pytest.raises(ValueError):
        est.estimate_tau(stats, [1.0])
    with pytest.raises(ValueError):
        est.estimate_rho(stats, [2])
    with pytest.raises(ValueError):
        est.run_trials(est.RunConfig(10, 3, rule="second"))


def test_worker_count_does_not_matter():
    cfg = est.RunConfig(2, 60, base_seed=5)
    one = est.run_trials(cfg)
    many = est.run_trials(est.RunConfig(2, 60, base_seed=5, workers=3))
    assert one == many


# ------------------------------------------------------------- estimates

def test_wilson_examples():
    lo, hi = est.wilson_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=5e-4)
    assert hi == pytest.approx(0.5962, abs=5e-4)
    assert est.wilson_interval(0, 10)[0] == 0.0
    assert est.wilson_interval(10, 10)[1] == 1.0
    for bad in [(-1, 10), (11, 10), (0, 0)]:
        with pytest.raises(ValueError):
            est.wilson_interval(*bad)


def test_wilson_against_score_test_inversion():
    from scipy.optimize import brentq
    from scipy.stats import norm
    z = norm.ppf(0.975)
    for s, n in [(3, 40), (17, 50), (199, 200)]:
        p = s / n
        lo = brentq(lambda q: (p - q) / math.sqrt(q * (1 - q) / n) - z, 1e-12, p)
        hi = brentq(lambda q: (q - p) / math.sqrt(q * (1 - q) / n) - z, p, 1 - 1e-12)
        got = est.wilson_interval(s, n)
        assert got[0] == pytest.approx(lo, abs=1e-9)
        assert got[1] == pytest.approx(hi, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 10_000), frac=st.floats(0, 1), level=st.floats(0.5, 0.999))
def test_wilson_contains_estimate(n, frac, level):
    s = int(round(frac * n))
    lo, hi = est.wilson_interval(s, n, level)
    assert 0.0 <= lo <= s / n <= hi <= 1.0


def test_estimate_g_all_generation_one():
    rows = est.estimate_g(_fake([1] * 20), 3)
    assert [r.estimate for r in rows] == [1.0, 0.0, 0.0, 0.0]
    assert rows[-1].params["tail"]
    assert rows[0].std_error == 0.0


def test_estimate_g_counts_sum_to_trials(d2_stats):
    rows = est.estimate_g(d2_stats, 4)
    assert sum(r.successes for r in rows) == rows[0].n_trials == 3000
    assert sum(r.estimate for r in rows) == pytest.approx(1.0, abs=1e-12)
    for r in rows:
        assert 0 <= r.ci_low <= r.estimate <= r.ci_high <= 1
        assert r.std_error == pytest.approx(math.sqrt(r.estimate * (1 - r.estimate) / 3000))


def test_estimate_g_excludes_invalid():
    stats = _fake([1, 2, 1, 3], valid=[True, False, True, True])
    rows = est.estimate_g(stats, 2)
    assert rows[0].n_trials == 3 and rows[0].n_invalid == 1
    assert rows[0].estimate == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        est.estimate_g(_fake([1], valid=[False]), 2)
    with pytest.raises(ValueError):
        est.estimate_g([], 2)
    with pytest.raises(ValueError):
        est.estimate_g(stats, 0)


@settings(max_examples=50, deadline=None)
@given(gens=st.lists(st.integers(1, 8), min_size=1, max_size=60), cut=st.integers(0, 60))
def test_tally_merge_is_partition_free(gens, cut):
    stats = _fake(gens)
    whole = est.tally_g(stats, 4)
    left, right = est.tally_g(stats[:cut], 4), est.tally_g(stats[cut:], 4)
    merged = [a + b for a, b in zip(left, right)]
    assert merged == whole
    assert merged == [b + a for a, b in zip(left, right)]


def test_estimates_order_invariant(d2_stats):
    shuffled = list(d2_stats)
    np.random.default_rng(0).shuffle(shuffled)
    a = [r.estimate for r in est.estimate_g(d2_stats, 5) + est.estimate_tau(d2_stats, [1, 2])]
    b = [r.estimate for r in est.estimate_g(shuffled, 5) + est.estimate_tau(shuffled, [1, 2])]
    assert a == b


def test_tau_rho_p_monotone_and_nested(d2_stats):
    Ls = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0]
    tau = [r.estimate for r in est.estimate_tau(d2_stats, Ls)]
    assert tau[0] == 1.0
    assert np.all(np.diff(tau) <= 0)
    rho = [r.estimate for r in est.estimate_rho(d2_stats, range(1, 10))]
    assert rho[0] == 1.0
    assert np.all(np.diff(rho) <= 0)
    assert est.estimate_p(d2_stats, 1, 0.0).estimate == 1.0
    for n in (1, 2, 3):
        ps = [est.estimate_p(d2_stats, n, L).estimate for L in Ls]
        assert np.all(np.diff(ps) <= 0)
        for p, t in zip(ps, tau):
            assert p <= t


def test_tau_guard_and_bad_args(d2_stats):
    side = d2_stats[0].side
    with pytest.raises(ValueError):
        est.estimate_tau(d2_stats, [side / 4])
    with pytest.raises(ValueError):
        est.estimate_tau(d2_stats, [-1.0])
    with pytest.raises(ValueError):
        est.estimate_rho(d2_stats, [0])
    with pytest.raises(ValueError):
        est.estimate_p(d2_stats, 0, 1.0)


def test_sandwich_against_bounds_d2(d2_stats):
    for r in est.estimate_tau(d2_stats, [0.5, 1.0, 2.0, 3.0]):
        L = r.params["L"]
        assert r.estimate - 3 * r.std_error <= compound_tail_bound(2, L).value
    for r in est.estimate_rho(d2_stats, range(1, 12)):
        assert r.estimate - 3 * r.std_error <= rho_upper(2, r.params["n"])
    thetas = np.linspace(0.05, math.pi / 4, 16)
    for n, L in [(1, 0.5), (2, 1.0), (3, 1.5), (2, 2.0)]:
        r = est.estimate_p(d2_stats, n, L)
        lb = math.exp(max(log_lower_bound_p(2, n, L, t) for t in thetas))
        assert r.estimate + 3 * r.std_error >= lb


def test_csv_and_jsonl_output(tmp_path, d2_stats):
    rows = est.estimate_g(d2_stats, 2) + est.estimate_tau(d2_stats, [1.0])
    text = est.write_csv(rows, tmp_path / "e.csv")
    assert text.splitlines()[0].split(",") == est.CSV_COLUMNS
    back = est.read_csv(tmp_path / "e.csv")
    assert [r["param_k"] for r in back] == ["1", "2", "3+", ""]
    assert back[-1]["param_L"] == "1"
    assert float(back[0]["estimate"]) == pytest.approx(rows[0].estimate, rel=1e-5)
    lines = est.write_jsonl(rows, tmp_path / "e.jsonl").splitlines()
    assert json.loads(lines[0])["quantity"] == "G"
    assert len(lines) == len(rows)
