"""Attack original vs obfuscated data and build the comparison report.

Run from the repo root after `pip install -e .`:

    python demos/04_attack_evaluation.py
"""

import json

import loadveil as lv

profiles = lv.standard_four_appliance()
train, _ = lv.generate_synthetic(profiles, t=96, batches=50, seed=11)
test, truth = lv.generate_synthetic(profiles, t=96, batches=24, seed=99)

result = lv.train_dictionary(train, lv.TrainingConfig(n=192, seed=1))

params = lv.PrivacyParams(f=0.5, seed=13)
stream = lv.process_stream(test, result.dictionary, params, result.sparsity_weight)

report = lv.compare_report(
    test, truth, [r.obfuscated for r in stream], profiles, params,
    epsilons=lv.compose_stream_budget(stream))

# The state detector is a greedy threshold attack; lower F1 on the
# obfuscated column means the noise hides more behavior.
print(f"{'appliance':14s} {'original F1':>12s} {'obfuscated F1':>14s}")
for row in report.appliances:
    print(f"{row.name:14s} {row.original.f1:12.3f} {row.obfuscated.f1:14.3f}")

u = report.utility
print(f"\nutility: mae {u.mae_watts:.1f} W, total energy error "
      f"{u.total_energy_relative_error:.4f}, worst instant aggregate error "
      f"{u.instant_aggregate_relative_error:.4f}")
print(f"privacy: {report.privacy}")

# The same structure the evaluate subcommand writes as report.json.
print("\nreport JSON (truncated):")
text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
print("\n".join(text.splitlines()[:16]))
print("  ...")
