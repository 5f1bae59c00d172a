"""Randomized-response mechanisms and exact (epsilon, delta) verification.

All mechanisms are row-stochastic matrices M[input, output] over finite
alphabets, with every pair of inputs treated as adjacent.  ``tightest_epsilon``
and ``tightest_delta`` compute the smallest privacy parameters a matrix
actually satisfies; ``verify_dp`` checks a declared budget and produces a
witness on failure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import Alphabet, SUM_ATOL, COMPOSED_SUM_ATOL, _freeze

# Slack applied when comparing a computed delta against a declared budget.
DP_ATOL = 1e-12


@dataclass(frozen=True)
class MechanismMatrix:
    """Row-stochastic randomization M[input, output]."""

    in_alphabet: Alphabet
    out_alphabet: Alphabet
    rows: np.ndarray
    atol: float = field(default=SUM_ATOL, compare=False, repr=False)

    def __post_init__(self):
        rows = _freeze(self.rows)
        expected = (self.in_alphabet.size, self.out_alphabet.size)
        if rows.shape != expected:
            raise ValidationError(
                f"mechanism has shape {rows.shape}, expected {expected}"
            )
        if np.any(rows < 0):
            i, j = np.unravel_index(int(np.argmin(rows)), rows.shape)
            raise ValidationError(f"mechanism entry [{i}][{j}] is negative: {rows[i, j]}")
        sums = rows.sum(axis=1)
        bad = np.abs(sums - 1.0) > self.atol
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise ValidationError(
                f"mechanism row {i} sums to {sums[i]!r}, expected 1 within {self.atol}"
            )
        object.__setattr__(self, "rows", rows)


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValidationError(f"delta must lie in [0, 1], got {self.delta}")


def identity_mechanism(alphabet: Alphabet) -> MechanismMatrix:
    return MechanismMatrix(alphabet, alphabet, np.eye(alphabet.size))


def uniform_mechanism(alphabet: Alphabet) -> MechanismMatrix:
    k = alphabet.size
    return MechanismMatrix(alphabet, alphabet, np.full((k, k), 1.0 / k))


def randomized_response(alphabet: Alphabet, epsilon: float) -> MechanismMatrix:
    """k-ary randomized response keeping the true value with p = e^eps / (e^eps + k - 1)."""
    k = alphabet.size
    if k < 2:
        raise ValidationError(
            f"randomized response needs an alphabet of size >= 2, got {k}"
        )
    if epsilon < 0:
        raise ValidationError(f"epsilon must be >= 0, got {epsilon}")
    e = math.exp(epsilon)
    keep = e / (e + k - 1)
    other = (1.0 - keep) / (k - 1)
    rows = np.full((k, k), other)
    np.fill_diagonal(rows, keep)
    return MechanismMatrix(alphabet, alphabet, rows)


def binary_rr_from_p(alphabet: Alphabet, p: float) -> MechanismMatrix:
    """Binary randomized response that reports the true value with probability p."""
    if alphabet.size != 2:
        raise ValidationError(
            f"binary randomized response needs exactly 2 labels, got {alphabet.size}"
        )
    if not 0.0 < p < 1.0:
        raise ValidationError(
            f"keep probability must lie strictly inside (0, 1), got {p} "
            "(the endpoints give a degenerate, non-invertible mechanism)"
        )
    rows = np.array([[p, 1.0 - p], [1.0 - p, p]])
    return MechanismMatrix(alphabet, alphabet, rows)


def tightest_epsilon(mech: MechanismMatrix) -> float:
    """Smallest epsilon for which the mechanism is (epsilon, 0)-DP.

    Equals the max over input pairs and outputs of log(M[a, o] / M[a', o]);
    a positive-over-zero entry makes it infinite, 0/0 columns are skipped.
    """
    rows = mech.rows
    num = rows[:, None, :]
    den = rows[None, :, :]
    off = ~np.eye(rows.shape[0], dtype=bool)[:, :, None]
    if np.any((num > 0) & (den == 0) & off):
        return math.inf
    both = (num > 0) & (den > 0) & off
    if not np.any(both):
        return 0.0
    ratios = np.where(both, np.divide(num, den, where=den > 0), 1.0)
    return float(max(0.0, math.log(ratios.max())))


def tightest_delta(mech: MechanismMatrix, epsilon: float) -> float:
    """Smallest delta for which the mechanism is (epsilon, delta)-DP.

    The worst event for a pair (a, a') is the set of outputs with a positive
    gap M[a, o] - e^eps * M[a', o]; delta is the summed positive gap,
    maximised over ordered pairs.
    """
    if epsilon < 0:
        raise ValidationError(f"epsilon must be >= 0, got {epsilon}")
    if math.isinf(epsilon):
        return 0.0
    rows = mech.rows
    gap = rows[:, None, :] - math.exp(epsilon) * rows[None, :, :]
    per_pair = np.maximum(gap, 0.0).sum(axis=2)
    np.fill_diagonal(per_pair, 0.0)
    return float(min(1.0, max(0.0, per_pair.max())))


@dataclass(frozen=True)
class DPVerdict:
    passed: bool
    budget: PrivacyBudget
    achieved_delta: float
    witness_pair: tuple[str, str] | None = None
    witness_event: tuple[str, ...] | None = None

    def __bool__(self) -> bool:
        return self.passed


def verify_dp(mech: MechanismMatrix, budget: PrivacyBudget) -> DPVerdict:
    """Check (epsilon, delta)-DP; on failure return the violating pair and event."""
    achieved = tightest_delta(mech, budget.epsilon)
    if achieved <= budget.delta + DP_ATOL:
        return DPVerdict(True, budget, achieved)
    rows = mech.rows
    gap = rows[:, None, :] - math.exp(budget.epsilon) * rows[None, :, :]
    per_pair = np.maximum(gap, 0.0).sum(axis=2)
    np.fill_diagonal(per_pair, 0.0)
    i, j = np.unravel_index(int(np.argmax(per_pair)), per_pair.shape)
    event = tuple(
        mech.out_alphabet.labels[o] for o in np.nonzero(gap[i, j] > 0)[0]
    )
    pair = (mech.in_alphabet.labels[i], mech.in_alphabet.labels[j])
    return DPVerdict(False, budget, achieved, pair, event)


def post_process(mech: MechanismMatrix, mapping: MechanismMatrix) -> MechanismMatrix:
    """Apply a data-independent randomized map to the mechanism's output."""
    if mech.out_alphabet != mapping.in_alphabet:
        raise ValidationError(
            "post-processing map must consume the mechanism's output alphabet; "
            f"got {mapping.in_alphabet.labels}, expected {mech.out_alphabet.labels}"
        )
    return MechanismMatrix(
        mech.in_alphabet,
        mapping.out_alphabet,
        mech.rows @ mapping.rows,
        atol=COMPOSED_SUM_ATOL,
    )


def tightest_delta_bruteforce(mech: MechanismMatrix, epsilon: float) -> float:
    """Exhaustive 2^k-subset evaluation of the smallest delta (|out| <= 12)."""
    k = mech.out_alphabet.size
    if k > 12:
        raise ValidationError(f"brute-force oracle is limited to |out| <= 12, got {k}")
    masks = np.arange(1 << k)
    members = (masks[:, None] >> np.arange(k)) & 1
    subset_mass = mech.rows @ members.T.astype(float)  # (inputs, 2^k)
    gap = subset_mass[:, None, :] - math.exp(epsilon) * subset_mass[None, :, :]
    n = mech.in_alphabet.size
    gap[np.eye(n, dtype=bool)] = 0.0
    return float(min(1.0, max(0.0, gap.max())))


def mechanism_from_dict(data: dict) -> MechanismMatrix:
    for key in ("in", "out", "rows"):
        if key not in data:
            raise ValidationError(f"mechanism file is missing required key {key!r}")
    return MechanismMatrix(
        Alphabet(tuple(data["in"])),
        Alphabet(tuple(data["out"])),
        np.asarray(data["rows"], dtype=float),
    )


def load_mechanism(path) -> MechanismMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return mechanism_from_dict(json.load(fh))
