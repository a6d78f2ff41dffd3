"""Privacy and utility evaluation of obfuscated load profiles.

Privacy is measured by how well a deterministic NILM attack recovers
per-appliance ON/OFF states from the aggregate signal: greedy residual
subtraction with per-appliance watt thresholds. Noise that lowers the
attack's F1 raises behavioral privacy. Utility is measured by distortion of
the readings themselves (mean absolute error, total-energy error, and the
per-instant aggregate error across consumers).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .meterdata import ApplianceProfile, GroundTruthStates, ReadingBatch
from .randomized_response import PrivacyParams

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AttackConfig:
    """Detection thresholds (watts) per appliance plus run-length hysteresis.

    An appliance is flagged ON in a slot when the remaining residual power
    meets its threshold. ON-runs shorter than ``hysteresis_slots`` are
    suppressed; the default of 1 keeps every detection.
    """

    thresholds_watts: dict[str, float]
    hysteresis_slots: int = 1

    def __post_init__(self):
        if not self.thresholds_watts:
            raise ValueError("at least one appliance threshold is required")
        for name, thr in self.thresholds_watts.items():
            if not thr > 0:
                raise ValueError(f"threshold for {name!r} must be > 0, got {thr}")
        if self.hysteresis_slots < 1:
            raise ValueError(f"hysteresis_slots must be >= 1, got {self.hysteresis_slots}")

    @classmethod
    def for_profiles(cls, profiles: list[ApplianceProfile], fraction: float = 0.5,
                     hysteresis_slots: int = 1) -> "AttackConfig":
        """Thresholds at ``fraction`` of each appliance's rated power."""
        return cls({p.name: fraction * p.rated_power_watts for p in profiles},
                   hysteresis_slots=hysteresis_slots)


@dataclass(frozen=True)
class DetectionScores:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class UtilityMetrics:
    """Distortion of obfuscated vs original readings.

    ``total_energy_relative_error`` is NaN when the original energy is zero
    but the obfuscated energy is not (relative error undefined).
    ``instant_aggregate_relative_error`` is None unless multi-consumer data
    was supplied: then it is the worst per-slot relative error of the summed
    consumption across consumers.
    """

    mae_watts: float
    total_energy_relative_error: float
    instant_aggregate_relative_error: float | None = None


def _suppress_short_runs(states: np.ndarray, min_len: int) -> np.ndarray:
    if min_len <= 1 or not states.any():
        return states
    out = states.copy()
    n = out.size
    pos = 0
    while pos < n:
        if out[pos]:
            end = pos
            while end < n and out[end]:
                end += 1
            if end - pos < min_len:
                out[pos:end] = False
            pos = end
        else:
            pos += 1
    return out


def nilm_attack(values, profiles: list[ApplianceProfile],
                config: AttackConfig | None = None) -> dict[str, np.ndarray]:
    """Greedy residual-subtraction state detector.

    Appliances are taken in descending rated-power order; per slot, an
    appliance is ON when the residual meets its threshold, and its rated
    power is then subtracted before the next appliance is tested.
    Deterministic in its inputs.
    """
    values = np.asarray(values, dtype=float)
    if config is None:
        config = AttackConfig.for_profiles(profiles)
    ordered = sorted(profiles, key=lambda p: (-p.rated_power_watts, p.name))
    residual = values.copy()
    predictions: dict[str, np.ndarray] = {}
    for profile in ordered:
        threshold = config.thresholds_watts.get(
            profile.name, 0.5 * profile.rated_power_watts)
        on = residual >= threshold
        on = _suppress_short_runs(on, config.hysteresis_slots)
        residual = residual - profile.rated_power_watts * on
        predictions[profile.name] = on
    return predictions


def _confusion(predicted: np.ndarray, truth: np.ndarray) -> tuple[int, int, int]:
    tp = int(np.sum(predicted & truth))
    fp = int(np.sum(predicted & ~truth))
    fn = int(np.sum(~predicted & truth))
    return tp, fp, fn


def _scores_from_counts(tp: int, fp: int, fn: int) -> DetectionScores:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return DetectionScores(precision, recall, f1)


def f1_score(predicted, truth) -> DetectionScores:
    """Precision, recall, and F1 of ON-state detection.

    precision = TP/(TP+FP), recall = TP/(TP+FN),
    f1 = 2 * precision * recall / (precision + recall); any zero denominator
    scores 0.
    """
    predicted = np.asarray(predicted, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: predicted {predicted.shape} vs truth {truth.shape}")
    return _scores_from_counts(*_confusion(predicted, truth))


def _relative_error(total_new: float, total_ref: float) -> float:
    if total_ref == 0.0:
        return 0.0 if total_new == 0.0 else math.nan
    return abs(total_new - total_ref) / total_ref


def utility_metrics(y, y_prime, all_consumers_at_instant=None) -> UtilityMetrics:
    """Distortion metrics between an original and an obfuscated series.

    ``all_consumers_at_instant``, when given, is a pair of matrices
    (originals, obfuscated) of shape (consumers, slots); the per-instant
    aggregate error is the max over slots of the relative error of the
    column sums.
    """
    y = np.asarray(y, dtype=float)
    y_prime = np.asarray(y_prime, dtype=float)
    if y.shape != y_prime.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_prime.shape}")
    mae = float(np.mean(np.abs(y_prime - y)))
    total_err = _relative_error(float(y_prime.sum()), float(y.sum()))

    instant_err = None
    if all_consumers_at_instant is not None:
        originals, obfuscated = all_consumers_at_instant
        originals = np.asarray(originals, dtype=float)
        obfuscated = np.asarray(obfuscated, dtype=float)
        if originals.shape != obfuscated.shape or originals.ndim != 2:
            raise ValueError("multi-consumer inputs must be equal-shape 2-D matrices")
        agg_ref = originals.sum(axis=0)
        agg_new = obfuscated.sum(axis=0)
        per_slot = [_relative_error(float(n), float(r)) for n, r in zip(agg_new, agg_ref)]
        if any(math.isnan(e) for e in per_slot):
            instant_err = math.nan
        else:
            instant_err = float(max(per_slot))
    return UtilityMetrics(mae, total_err, instant_err)


@dataclass(frozen=True)
class ApplianceComparison:
    name: str
    original: DetectionScores
    obfuscated: DetectionScores


@dataclass(frozen=True)
class EvalReport:
    """Comparison of attack success and utility on original vs obfuscated data."""

    appliances: tuple[ApplianceComparison, ...]
    utility: UtilityMetrics
    privacy: dict
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            return x

        return clean({
            "schema_version": REPORT_SCHEMA_VERSION,
            "appliances": [
                {
                    "name": a.name,
                    "original": vars(a.original),
                    "obfuscated": vars(a.obfuscated),
                }
                for a in self.appliances
            ],
            "utility": {
                "mae_watts": self.utility.mae_watts,
                "total_energy_relative_error": self.utility.total_energy_relative_error,
                "instant_aggregate_relative_error":
                    self.utility.instant_aggregate_relative_error,
            },
            "privacy": dict(self.privacy),
            "config": dict(self.config),
        })

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")


def compare_report(
    original_batches: list[ReadingBatch],
    truths: list[list[GroundTruthStates]],
    obfuscated_batches: list[ReadingBatch],
    profiles: list[ApplianceProfile],
    params: PrivacyParams,
    *,
    attack_config: AttackConfig | None = None,
    epsilons: tuple[float, float] | None = None,
) -> EvalReport:
    """Attack both versions of every batch and report per-appliance scores.

    Counts are pooled (micro-averaged) across batches before computing
    precision/recall/F1. Utility metrics run on the concatenated series;
    with two or more equal-length batches they are also aggregated per slot
    as if each batch were one consumer, giving the instant-aggregate error.
    ``epsilons``, when given, is the stream's composed
    (epsilon_paper, epsilon_mechanism) pair.
    """
    if not original_batches:
        raise ValueError("at least one batch is required")
    if not (len(original_batches) == len(truths) == len(obfuscated_batches)):
        raise ValueError(
            f"batch counts differ: {len(original_batches)} original, "
            f"{len(truths)} truth, {len(obfuscated_batches)} obfuscated")
    if attack_config is None:
        attack_config = AttackConfig.for_profiles(profiles)

    names = [p.name for p in profiles]
    pooled = {name: {"original": [0, 0, 0], "obfuscated": [0, 0, 0]} for name in names}
    for original, truth, obfuscated in zip(original_batches, truths, obfuscated_batches):
        if original.t != obfuscated.t:
            raise ValueError(
                f"batch length mismatch: original t={original.t} vs obfuscated t={obfuscated.t}")
        truth_by_name = {g.appliance_name: g.states for g in truth}
        missing = set(names) - set(truth_by_name)
        if missing:
            raise ValueError(f"ground truth missing for appliances: {sorted(missing)}")
        for label, batch in (("original", original), ("obfuscated", obfuscated)):
            predictions = nilm_attack(batch.values, profiles, attack_config)
            for name in names:
                counts = _confusion(predictions[name], truth_by_name[name])
                bucket = pooled[name][label]
                for i in range(3):
                    bucket[i] += counts[i]

    appliances = tuple(
        ApplianceComparison(
            name=name,
            original=_scores_from_counts(*pooled[name]["original"]),
            obfuscated=_scores_from_counts(*pooled[name]["obfuscated"]),
        )
        for name in names
    )

    y_all = np.concatenate([b.values for b in original_batches])
    y_prime_all = np.concatenate([b.values for b in obfuscated_batches])
    multi = None
    lengths = {b.t for b in original_batches}
    if len(original_batches) >= 2 and len(lengths) == 1:
        multi = (np.stack([b.values for b in original_batches]),
                 np.stack([b.values for b in obfuscated_batches]))
    utility = utility_metrics(y_all, y_prime_all, multi)

    privacy = {
        "epsilon_paper": epsilons[0] if epsilons else None,
        "epsilon_mechanism": epsilons[1] if epsilons else None,
        "f": params.f,
        "delta0": params.delta0,
    }
    config = {
        "averaging": "micro (TP/FP/FN pooled across batches)",
        "thresholds_watts": dict(attack_config.thresholds_watts),
        "hysteresis_slots": attack_config.hysteresis_slots,
        "batches": len(original_batches),
        "caveats": [
            "composed budgets take the max across batches; one meter's batches "
            "are not disjoint datasets, so the longitudinal guarantee is weaker",
        ],
    }
    return EvalReport(appliances=appliances, utility=utility, privacy=privacy, config=config)
