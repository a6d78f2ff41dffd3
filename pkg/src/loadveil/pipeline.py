"""End-to-end obfuscation of reading batches.

Per batch: infer the sparse activation against a fixed trained dictionary,
randomize it, re-aggregate to an obfuscated load profile, and account for
the privacy budget. The dictionary is read-only shared state; each batch
perturbation draws from an independent stream derived from
(seed, batch_index), so results do not depend on execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import derive_rng
from .meterdata import ReadingBatch
from .randomized_response import (
    InvalidPrivacyParams,
    PrivacyParams,
    build_transition_matrix,
    compose_parallel,
    epsilon_closed_form,
    epsilon_empirical,
    perturb_activation,
)
from .sparse_coding import Activation, Dictionary, infer_activation, sparsity

# zero-ratio statistic clamped away from 0 before entering the closed form
MIN_DELTA0 = 1e-3


class BatchProcessingError(RuntimeError):
    """A batch failed mid-stream; ``batch_index`` identifies it."""

    def __init__(self, batch_index: int, message: str):
        super().__init__(f"batch {batch_index}: {message}")
        self.batch_index = batch_index


@dataclass(frozen=True)
class ObfuscationResult:
    """Everything produced for one batch.

    ``reconstruction_error`` is ||y - B a||_2 for the unperturbed activation.
    ``epsilon_paper`` is the closed-form budget at the batch's (clamped)
    zero ratio: infinity at f = 0, NaN when the formula's domain is violated
    (a warning records why). ``epsilon_mechanism`` is the measured budget of
    the substitution mechanism over the n positions.
    """

    original: ReadingBatch
    obfuscated: ReadingBatch
    activation: Activation
    perturbed_activation: Activation
    reconstruction_error: float
    epsilon_paper: float
    epsilon_mechanism: float
    delta0: float
    warnings: tuple[str, ...] = ()


def reaggregate(dictionary: Dictionary, activation: Activation) -> np.ndarray:
    """Obfuscated profile B a; rounding negatives in [-1e-9, 0) are clamped to 0."""
    if activation.n != dictionary.n:
        raise ValueError(
            f"activation length {activation.n} does not match dictionary n={dictionary.n}")
    out = dictionary.basis @ activation.coeffs
    tiny = (out < 0) & (out >= -1e-9)
    if np.any(tiny):
        out = np.where(tiny, 0.0, out)
    return out


def _budget_pair(f: float, n: int, delta0: float) -> tuple[float, float, tuple[str, ...]]:
    if f == 0.0:
        note = "f = 0 applies no noise; both budgets are unbounded"
        return math.inf, math.inf, (note,)
    mechanism = epsilon_empirical(build_transition_matrix(np.arange(n, dtype=float), f))
    try:
        paper = epsilon_closed_form(f, delta0)
        return paper, mechanism, ()
    except InvalidPrivacyParams as exc:
        return math.nan, mechanism, (f"closed-form budget undefined: {exc}",)


def obfuscate_batch(
    batch: ReadingBatch,
    dictionary: Dictionary,
    params: PrivacyParams,
    sparsity_weight: float = 0.0,
    *,
    batch_index: int = 0,
    sigma: float | None = None,
) -> ObfuscationResult:
    """Infer, randomize, and re-aggregate one batch.

    delta0 for the closed-form budget is params.delta0 when given, else the
    activation's measured zero ratio clamped to [1e-3, 1]. When ``sigma`` is
    set and the reconstruction error exceeds it, a warning is recorded on
    the result rather than failing the batch.
    """
    if batch.t != dictionary.t:
        raise ValueError(
            f"batch length t={batch.t} does not match dictionary t={dictionary.t}")

    activation = infer_activation(batch.values, dictionary, sparsity_weight)
    rng = derive_rng(params.seed, batch_index)
    perturbed = perturb_activation(activation, params.f, rng)
    values = reaggregate(dictionary, perturbed)

    recon = float(np.linalg.norm(batch.values - dictionary.basis @ activation.coeffs))
    if params.delta0 is not None:
        delta0 = params.delta0
    else:
        delta0 = min(1.0, max(MIN_DELTA0, sparsity(activation)))
    eps_paper, eps_mechanism, warnings = _budget_pair(params.f, dictionary.n, delta0)
    if sigma is not None and recon > sigma:
        warnings = warnings + (
            f"reconstruction error {recon:.6g} exceeds the configured bound {sigma:.6g}",)

    obfuscated = ReadingBatch(
        meter_id=batch.meter_id,
        start_time=batch.start_time,
        values=values,
        period_seconds=batch.period_seconds,
    )
    return ObfuscationResult(
        original=batch,
        obfuscated=obfuscated,
        activation=activation,
        perturbed_activation=perturbed,
        reconstruction_error=recon,
        epsilon_paper=eps_paper,
        epsilon_mechanism=eps_mechanism,
        delta0=delta0,
        warnings=warnings,
    )


def process_stream(
    batches: list[ReadingBatch],
    dictionary: Dictionary,
    params: PrivacyParams,
    sparsity_weight: float = 0.0,
    *,
    sigma: float | None = None,
) -> list[ObfuscationResult]:
    """Obfuscate a batch stream; output order always matches input order."""
    for index, batch in enumerate(batches):
        if batch.t != dictionary.t:
            raise ValueError(
                f"batch {index} has t={batch.t}, dictionary expects t={dictionary.t}")
    results = []
    for index, batch in enumerate(batches):
        try:
            results.append(obfuscate_batch(
                batch, dictionary, params, sparsity_weight,
                batch_index=index, sigma=sigma))
        except Exception as exc:
            raise BatchProcessingError(index, str(exc)) from exc
    return results


def compose_stream_budget(results: list[ObfuscationResult]) -> tuple[float, float]:
    """Max budget across a stream's batches (parallel-composition rule).

    Batches of one meter are successive readings of the same household, not
    disjoint datasets, so treat these maxima as a lower bound on the
    longitudinal budget rather than a guarantee.
    """
    if not results:
        raise ValueError("no results to compose")
    paper = [r.epsilon_paper for r in results]
    mech = [r.epsilon_mechanism for r in results]
    eps_paper = math.nan if any(math.isnan(e) for e in paper) else compose_parallel(paper)
    return eps_paper, compose_parallel(mech)
