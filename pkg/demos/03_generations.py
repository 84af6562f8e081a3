"""
Generation numbers across dimensions
====================================

The fraction of Palm samples in which the origin sits in a mini-loop has a
closed form, 1 / (2 - L_d(1,1,1)/pi_d). In high dimension the whole law of the
generation number approaches k/(k+1)!.
"""
from nnlab import bounds
from nnlab.estimators import RunConfig, estimate_g, run_trials

N = 4000
print(f"{'d':>3} {'sampler':>8} {'g(1)':>8} {'+-':>7} {'exact':>8}")
for d in (1, 2, 3, 5, 10):
    cfg = RunConfig(d=d, n_trials=N, base_seed=3)
    rows = estimate_g(run_trials(cfg), k_max=4)
    g1 = rows[0]
    print(f"{d:>3} {cfg.resolved_sampler:>8} {g1.estimate:8.4f} {g1.std_error:7.4f} "
          f"{bounds.mutual_nn_prob(d):8.4f}")

print("\nd=10 against the large-d limit:")
rows = estimate_g(run_trials(RunConfig(d=10, n_trials=N, base_seed=4)), k_max=4)
for r in rows:
    k = r.params["k"]
    limit = "" if r.params["tail"] else f"{bounds.leading_term(k):.4f}"
    label = f"{k}+" if r.params["tail"] else str(k)
    print(f"  k={label:<3} {r.estimate:.4f}  limit {limit}")

# the same limit from ordered exponentials
print("\nordered-exponential evaluation of k/(k+1)!:")
for k in range(1, 6):
    mc = bounds.leading_term_mc(k, 200_000, seed=k)
    print(f"  k={k}: {mc.estimate:.4f} +- {mc.std_error:.4f}   exact {bounds.leading_term(k):.4f}")
