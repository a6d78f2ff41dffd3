from types import SimpleNamespace

import numpy as np
import pytest

import loadveil as lv


def make_planted(t: int, n: int, k: int, seed: int, lo: float = 0.5, hi: float = 2.0):
    """Planted instance: random unit-column dictionary, k-sparse truth, y = B a."""
    rng = np.random.default_rng(seed)
    basis = rng.random((t, n))
    basis /= np.linalg.norm(basis, axis=0)
    a_true = np.zeros(n)
    a_true[rng.choice(n, size=k, replace=False)] = rng.uniform(lo, hi, size=k)
    return lv.Dictionary(basis), a_true, basis @ a_true


def spike_dictionary(t: int, extra: int = 4) -> lv.Dictionary:
    """Over-complete dictionary containing all unit spikes: fits any batch exactly."""
    rng = np.random.default_rng(0)
    pad = rng.random((t, extra))
    pad /= np.linalg.norm(pad, axis=0)
    return lv.Dictionary(np.hstack([np.eye(t), pad]))


def micro_f1(batch_values, truths, profiles, config=None):
    """Micro-averaged per-appliance F1 of the attack, computed with plain numpy."""
    counts = {p.name: [0, 0, 0] for p in profiles}
    for values, truth in zip(batch_values, truths):
        predictions = lv.nilm_attack(values, profiles, config)
        truth_by_name = {g.appliance_name: g.states for g in truth}
        for p in profiles:
            pred = predictions[p.name]
            actual = truth_by_name[p.name]
            counts[p.name][0] += int(np.sum(pred & actual))
            counts[p.name][1] += int(np.sum(pred & ~actual))
            counts[p.name][2] += int(np.sum(~pred & actual))
    scores = {}
    for name, (tp, fp, fn) in counts.items():
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores[name] = (2 * precision * recall / (precision + recall)
                        if precision + recall else 0.0)
    return scores


@pytest.fixture(scope="session")
def standard_scenario():
    """Four-appliance scenario with a dictionary trained on held-out data.

    Shared by the evaluation tests and the acceptance suite; training runs
    once per session.
    """
    profiles = lv.standard_four_appliance()
    train, _ = lv.generate_synthetic(profiles, t=96, batches=50, seed=11)
    test, truth = lv.generate_synthetic(profiles, t=96, batches=24, seed=99)
    result = lv.train_dictionary(train, lv.TrainingConfig(n=192, seed=1))
    activations = [
        lv.infer_activation(b.values, result.dictionary, result.sparsity_weight)
        for b in test
    ]
    return SimpleNamespace(
        profiles=profiles,
        train=train,
        test=test,
        truth=truth,
        result=result,
        dictionary=result.dictionary,
        sparsity_weight=result.sparsity_weight,
        activations=activations,
    )
