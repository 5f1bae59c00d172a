"""Utility-aware fairness metrics on tabular worlds.

The headline quantities are the log worst-case ratios of expected utility
across sensitive groups, evaluated either within each context value
(:func:`local_g_fairness`) or after marginalising the context
(:func:`global_g_fairness`).  Classical group metrics (demographic parity,
equalized odds) and the probability-ratio supremum R_max that upper-bounds
them are computed exactly via total-variation distances on the finite
alphabets.

Ratio conventions for degenerate expectations: a 0/0 pair is skipped
(contributes ratio 1), and a positive value over an exact zero yields an
infinite metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import TabularWorld, conditional_utility_matrix, marginal_utility_vector
from .utility import UtilityTable


@dataclass(frozen=True)
class FairnessValue:
    """A log-ratio fairness metric, possibly infinite, with its witness.

    ``witness`` is the (x, a, a') triple attaining the supremum (x is None
    for context-free metrics); ``event`` is the decision label realising a
    probability-ratio supremum, when one exists.
    """

    value: float
    witness: tuple[str | None, str, str] | None = None
    event: str | None = None

    def __post_init__(self):
        if not (self.value >= 0.0 or math.isinf(self.value)):
            raise ValidationError(f"fairness value must be >= 0, got {self.value}")

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


def log_ratio_supremum(matrix: np.ndarray) -> tuple[float, tuple[int, int, int] | None]:
    """log sup over rows r and column pairs (j, j') of matrix[r, j] / matrix[r, j'].

    Rows are contexts, columns are groups.  Returns the index witness
    (row, j, j') or None when every row is skipped by the 0/0 convention.
    """
    best = 1.0
    witness = None
    for r in range(matrix.shape[0]):
        row = matrix[r]
        pos = row > 0
        if not pos.any():
            continue  # all-zero row: every pair is 0/0, skipped
        if not pos.all():
            j = int(np.argmax(row))
            jp = int(np.argmin(pos))  # first zero column
            return math.inf, (r, j, jp)
        j = int(np.argmax(row))
        jp = int(np.argmin(row))
        ratio = float(row[j] / row[jp])
        if ratio > best:
            best = ratio
            witness = (r, j, jp)
    return math.log(best), witness


def _fairness_from_matrix(matrix, x_labels, a_labels, events=None) -> FairnessValue:
    value, widx = log_ratio_supremum(matrix)
    if widx is None:
        return FairnessValue(value)
    r, j, jp = widx
    x_label = None if x_labels is None else x_labels[r]
    event = None if events is None else events[r]
    return FairnessValue(value, (x_label, a_labels[j], a_labels[jp]), event)


def local_g_fairness(world: TabularWorld, g: UtilityTable) -> FairnessValue:
    """Worst-case log ratio of E[g | X=x, A=a] across groups within a context."""
    matrix = conditional_utility_matrix(world, g)
    return _fairness_from_matrix(matrix, world.x_alphabet.labels, world.a_alphabet.labels)


def global_g_fairness(world: TabularWorld, g: UtilityTable) -> FairnessValue:
    """Worst-case log ratio of E[g | A=a] across groups, context marginalised."""
    vector = marginal_utility_vector(world, g)
    return _fairness_from_matrix(vector[None, :], None, world.a_alphabet.labels)


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Total-variation distance between two finite distributions."""
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())


def sup_event_gap_bruteforce(p: np.ndarray, q: np.ndarray) -> float:
    """max over subsets S of |P(S) - Q(S)|, by enumerating all 2^k events.

    Exponential-cost cross-check for :func:`tv_distance`; limited to k <= 12.
    """
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    k = len(p)
    if k > 12:
        raise ValidationError(f"subset enumeration is limited to k <= 12, got {k}")
    masks = np.arange(1 << k)
    members = ((masks[:, None] >> np.arange(k)) & 1).astype(float)
    return float(np.abs(members @ (p - q)).max())


def decision_law_by_group(world: TabularWorld) -> np.ndarray:
    """P(U | A = a) for every group, shape (|A|, |U|)."""
    out = np.empty((world.a_alphabet.size, world.u_alphabet.size))
    for ai in range(world.a_alphabet.size):
        weights = world.x_weights_given_a(ai)
        out[ai] = weights @ world.policy.table[:, ai, :]
    return out


def _max_pairwise_tv(rows: np.ndarray) -> float:
    diffs = rows[:, None, :] - rows[None, :, :]
    return float(0.5 * np.abs(diffs).sum(axis=2).max())


def demographic_parity(world: TabularWorld) -> float:
    """Largest decision-probability gap between groups over all events.

    Equals the maximum pairwise total-variation distance between the
    per-group decision laws P(U | A = a).
    """
    return _max_pairwise_tv(decision_law_by_group(world))


def equalized_odds(world: TabularWorld) -> float:
    """Demographic-parity gap within each context, maximised over contexts."""
    best = 0.0
    for xi in range(world.x_alphabet.size):
        best = max(best, _max_pairwise_tv(world.policy.table[xi]))
    return best


def ratio_sup(world: TabularWorld, conditional: bool = True) -> FairnessValue:
    """log R_max: the supremum of decision-probability ratios across groups.

    With ``conditional`` the ratio is over P(u | x, a) / P(u | x, a') for
    every decision and context; otherwise over the marginal laws P(u | a).
    The attained decision label is reported in ``event``.
    """
    if conditional:
        nx, na, nu = world.policy.table.shape
        # one pseudo-row per (x, u) pair, columns are groups
        matrix = world.policy.table.transpose(0, 2, 1).reshape(nx * nu, na)
        x_labels = [world.x_alphabet.labels[i // nu] for i in range(nx * nu)]
        events = [world.u_alphabet.labels[i % nu] for i in range(nx * nu)]
    else:
        laws = decision_law_by_group(world)  # (na, nu)
        nu = world.u_alphabet.size
        matrix = laws.T  # (nu, na)
        x_labels = None
        events = list(world.u_alphabet.labels)
    return _fairness_from_matrix(matrix, x_labels, world.a_alphabet.labels, events)


def witness_utility_family(world: TabularWorld, k: float) -> UtilityTable:
    """Utility g_k(u) = 1 + k * [u = u*], with u* the ratio-supremum decision.

    As k grows, the local fairness of g_k increases monotonically towards
    log R_max (it reaches infinity in the limit when some group assigns the
    witness decision probability zero).  k = 0 gives the constant utility.
    """
    if k < 0:
        raise ValidationError(f"k must be >= 0, got {k}")
    rs = ratio_sup(world, conditional=True)
    if rs.event is None:
        return UtilityTable.constant(world, 1.0)
    star = rs.event
    return UtilityTable.from_u_function(world, lambda lbl: 1.0 + (k if lbl == star else 0.0))
