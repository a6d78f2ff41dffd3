"""Randomized response over activation vectors, with privacy-budget accounting.

The mechanism reports each activation entry unchanged with probability
``1 - f`` and otherwise substitutes the value at a uniformly chosen position
(self-substitution allowed), so the per-entry keep probability is
``1 - f + f/n``. Two budgets are reported side by side: the closed-form
``epsilon_closed_form`` = ln((1-f)/(delta0*f)) taking the activation's zero
ratio ``delta0`` as given, and the mechanism's tight per-coordinate budget
``epsilon_empirical`` obtained from its transition probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import as_generator
from .sparse_coding import Activation


class InvalidPrivacyParams(ValueError):
    """Parameter combination outside the mechanism's valid domain."""


class UnboundedPrivacyBudget(InvalidPrivacyParams):
    """No noise is applied (f = 0); the budget is infinite."""


@dataclass(frozen=True)
class PrivacyParams:
    """Mechanism knobs.

    ``f`` in [0, 1): substitution probability; f = 0 is a no-noise test mode
    with an unbounded budget. ``delta0`` in (0, 1] overrides the zero-ratio
    statistic fed to the closed-form budget; None measures it from each
    activation.
    """

    f: float
    delta0: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.f < 1.0:
            raise InvalidPrivacyParams(f"f must be in [0, 1), got {self.f}")
        if self.delta0 is not None and not 0.0 < self.delta0 <= 1.0:
            raise InvalidPrivacyParams(f"delta0 must be in (0, 1], got {self.delta0}")


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic candidate-to-candidate substitution probabilities."""

    candidate_values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.array(self.candidate_values, dtype=float)
        probs = np.array(self.probs, dtype=float)
        i = values.size
        if values.ndim != 1 or i == 0:
            raise ValueError("candidate_values must be a nonempty 1-D sequence")
        if np.unique(values).size != i:
            raise ValueError("candidate_values must be distinct")
        if probs.shape != (i, i):
            raise ValueError(f"probs must be {i}x{i}, got {probs.shape}")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("every row must sum to 1")
        values.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "candidate_values", values)
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return self.candidate_values.size


def perturb_activation(activation: Activation, f: float, rng, *, trials: int | None = None):
    """Randomize an activation entry-wise.

    Per position: keep with probability 1 - f, otherwise copy the value at a
    uniformly drawn position (possibly itself). The output is always a
    positionwise resampling of the input values. f in [0, 1] here; the
    endpoints are useful in tests even though PrivacyParams excludes f = 1.

    The draw order is fixed (one uniform per position, then one donor index
    per position), so a given (activation, f, seed) always yields the same
    output. With ``trials`` set, runs that many independent repetitions at
    once and returns a (trials, n) array of raw values instead of an
    Activation; each row is one mechanism invocation.
    """
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"f must be in [0, 1], got {f}")
    rng = as_generator(rng)
    coeffs = activation.coeffs
    n = coeffs.size
    if trials is None:
        replace = rng.random(n) < f
        donors = rng.integers(0, n, size=n)
        return Activation(np.where(replace, coeffs[donors], coeffs))
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    replace = rng.random((trials, n)) < f
    donors = rng.integers(0, n, size=(trials, n))
    return np.where(replace, coeffs[donors], coeffs[None, :])


def build_transition_matrix(values, f: float) -> TransitionMatrix:
    """Transition probabilities of uniform substitution over i candidates.

    probs[r][c] = f/i + (1-f) * [r == c].
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("values must be a nonempty 1-D sequence")
    if np.unique(values).size != values.size:
        raise ValueError("candidate values must be distinct")
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"f must be in [0, 1], got {f}")
    i = values.size
    probs = np.full((i, i), f / i) + (1.0 - f) * np.eye(i)
    return TransitionMatrix(values, probs)


def epsilon_empirical(tm: TransitionMatrix) -> float:
    """Tight per-coordinate budget of a transition matrix.

    The max over output values of ln(P(out|in1) / P(out|in2)) across input
    pairs; infinity when some output separates inputs with a zero
    probability.
    """
    probs = tm.probs
    eps = 0.0
    for c in range(tm.size):
        column = probs[:, c]
        hi = float(column.max())
        lo = float(column.min())
        if hi == 0.0:
            continue  # output never produced, no constraint
        if lo == 0.0:
            return math.inf
        eps = max(eps, math.log(hi / lo))
    return eps


def epsilon_closed_form(f: float, delta0: float) -> float:
    """Closed-form budget ln((1-f)/(delta0*f)).

    Valid for 0 < f < 1, 0 < delta0 <= 1 and (1-f)/(delta0*f) >= 1;
    combinations that would make the budget negative are rejected.
    """
    if f == 0:
        raise UnboundedPrivacyBudget("f = 0 applies no noise; the budget is unbounded")
    if not 0.0 < f < 1.0:
        raise InvalidPrivacyParams(f"f must be in (0, 1), got {f}")
    if not 0.0 < delta0 <= 1.0:
        raise InvalidPrivacyParams(f"delta0 must be in (0, 1], got {delta0}")
    ratio = (1.0 - f) / (delta0 * f)
    if ratio < 1.0:
        raise InvalidPrivacyParams(
            f"(1-f)/(delta0*f) = {ratio:.6g} < 1 gives a negative budget "
            f"(f={f}, delta0={delta0})")
    return math.log(ratio)


def rappor_bit(x: int, f: float, rng) -> int:
    """Baseline single-bit flip: report 1 w.p. f/2, 0 w.p. f/2, x w.p. 1-f."""
    if x not in (0, 1):
        raise ValueError(f"x must be 0 or 1, got {x}")
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"f must be in [0, 1], got {f}")
    u = as_generator(rng).random()
    if u < f / 2:
        return 1
    if u < f:
        return 0
    return int(x)


def compose_parallel(epsilons) -> float:
    """Budget of mechanisms applied to disjoint inputs: the maximum."""
    eps = list(epsilons)
    if not eps:
        raise ValueError("at least one budget is required")
    if any(e < 0 for e in eps):
        raise ValueError(f"budgets must be nonnegative, got {min(eps)}")
    return float(max(eps))
