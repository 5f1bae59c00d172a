"""Finite-alphabet probability model of a stochastic decision pipeline.

A :class:`TabularWorld` bundles priors over a context variable X and a
sensitive attribute A with a decision table P(U | X, A).  Randomising
mechanisms applied to X and A compose into an effective decision table
over the true attributes, and expectations of a utility can be computed
exactly or approximated by seeded sampling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import LabelError, UndefinedConditionalError, ValidationError

# "sums to one" tolerance for loaded data, and the looser one used after
# mechanism composition (accumulated rounding).
SUM_ATOL = 1e-12
COMPOSED_SUM_ATOL = 1e-10


def _freeze(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Alphabet:
    """Ordered finite set of distinct category labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(lbl) for lbl in self.labels)
        if not labels:
            raise ValidationError("alphabet must contain at least one label")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"alphabet labels must be unique, got {labels}")
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(
                f"label {label!r} is not in alphabet {list(self.labels)}"
            ) from None

    def __iter__(self) -> Iterator[str]:
        return iter(self.labels)


def _check_distribution(probs: np.ndarray, what: str, atol: float = SUM_ATOL) -> None:
    if np.any(probs < 0):
        idx = int(np.argmin(probs))
        raise ValidationError(f"{what} has negative entry {probs.flat[idx]} at index {idx}")
    total = float(probs.sum())
    if abs(total - 1.0) > atol:
        raise ValidationError(f"{what} sums to {total!r}, expected 1 within {atol}")


@dataclass(frozen=True)
class Prior:
    """Probability vector over an alphabet."""

    alphabet: Alphabet
    probs: np.ndarray

    def __post_init__(self):
        probs = _freeze(self.probs)
        if probs.shape != (self.alphabet.size,):
            raise ValidationError(
                f"prior has shape {probs.shape}, alphabet has {self.alphabet.size} labels"
            )
        _check_distribution(probs, "prior")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, alphabet: Alphabet) -> "Prior":
        return cls(alphabet, np.full(alphabet.size, 1.0 / alphabet.size))


@dataclass(frozen=True)
class DecisionPolicy:
    """Conditional decision table P(U | X, A), stored as table[x, a, u]."""

    u_alphabet: Alphabet
    x_alphabet: Alphabet
    a_alphabet: Alphabet
    table: np.ndarray
    atol: float = field(default=SUM_ATOL, compare=False, repr=False)

    def __post_init__(self):
        table = _freeze(self.table)
        expected = (self.x_alphabet.size, self.a_alphabet.size, self.u_alphabet.size)
        if table.shape != expected:
            raise ValidationError(
                f"policy table has shape {table.shape}, expected {expected} ([x][a][u])"
            )
        if np.any(table < 0):
            x, a, u = np.unravel_index(int(np.argmin(table)), table.shape)
            raise ValidationError(
                f"policy entry [x={x}][a={a}][u={u}] is negative: {table[x, a, u]}"
            )
        sums = table.sum(axis=2)
        bad = np.abs(sums - 1.0) > self.atol
        if np.any(bad):
            x, a = np.argwhere(bad)[0]
            raise ValidationError(
                f"policy row [x={x}][a={a}] sums to {sums[x, a]!r}, "
                f"expected 1 within {self.atol}"
            )
        object.__setattr__(self, "table", table)


@dataclass(frozen=True)
class TabularWorld:
    """Joint model of (U, X, A).

    When ``joint_xa`` is absent, X and A are independent with the product
    of the two priors.  When present it must be a valid joint distribution
    whose marginals match the priors.
    """

    policy: DecisionPolicy
    prior_x: Prior
    prior_a: Prior
    joint_xa: np.ndarray | None = None

    def __post_init__(self):
        if self.prior_x.alphabet != self.policy.x_alphabet:
            raise ValidationError("prior_x alphabet does not match the policy's X alphabet")
        if self.prior_a.alphabet != self.policy.a_alphabet:
            raise ValidationError("prior_a alphabet does not match the policy's A alphabet")
        if self.joint_xa is not None:
            joint = _freeze(self.joint_xa)
            shape = (self.prior_x.alphabet.size, self.prior_a.alphabet.size)
            if joint.shape != shape:
                raise ValidationError(f"joint_xa has shape {joint.shape}, expected {shape}")
            _check_distribution(joint.reshape(-1), "joint_xa")
            if np.max(np.abs(joint.sum(axis=1) - self.prior_x.probs)) > SUM_ATOL:
                raise ValidationError("joint_xa X-marginal does not match prior_x")
            if np.max(np.abs(joint.sum(axis=0) - self.prior_a.probs)) > SUM_ATOL:
                raise ValidationError("joint_xa A-marginal does not match prior_a")
            object.__setattr__(self, "joint_xa", joint)

    @property
    def u_alphabet(self) -> Alphabet:
        return self.policy.u_alphabet

    @property
    def x_alphabet(self) -> Alphabet:
        return self.policy.x_alphabet

    @property
    def a_alphabet(self) -> Alphabet:
        return self.policy.a_alphabet

    def is_product_prior(self, atol: float = SUM_ATOL) -> bool:
        """True when X and A are independent under this world."""
        if self.joint_xa is None:
            return True
        product = np.outer(self.prior_x.probs, self.prior_a.probs)
        return bool(np.max(np.abs(self.joint_xa - product)) <= atol)

    def x_weights_given_a(self, a_index: int) -> np.ndarray:
        """P(X | A = a) as a vector over X."""
        if self.joint_xa is None:
            return self.prior_x.probs
        pa = float(self.prior_a.probs[a_index])
        if pa <= 0.0:
            label = self.a_alphabet.labels[a_index]
            raise UndefinedConditionalError(
                f"cannot condition on A={label!r}: the group has probability zero"
            )
        return self.joint_xa[:, a_index] / pa


class TraceRecord(NamedTuple):
    x: str
    a: str
    x_tilde: str
    a_tilde: str
    u: str


@dataclass(frozen=True)
class Trace:
    """Sampled pipeline records, stored as index arrays for fast counting."""

    u_alphabet: Alphabet
    x_alphabet: Alphabet
    a_alphabet: Alphabet
    x_idx: np.ndarray
    a_idx: np.ndarray
    x_tilde_idx: np.ndarray
    a_tilde_idx: np.ndarray
    u_idx: np.ndarray

    def __len__(self) -> int:
        return len(self.u_idx)

    def records(self) -> list[TraceRecord]:
        xs, as_ = self.x_alphabet.labels, self.a_alphabet.labels
        us = self.u_alphabet.labels
        return [
            TraceRecord(xs[x], as_[a], xs[xt], as_[at], us[u])
            for x, a, xt, at, u in zip(
                self.x_idx, self.a_idx, self.x_tilde_idx, self.a_tilde_idx, self.u_idx
            )
        ]

    def counts_cube(self) -> np.ndarray:
        """Counts n[x, a, u] over the true attributes and the decision."""
        nx, na, nu = self.x_alphabet.size, self.a_alphabet.size, self.u_alphabet.size
        flat = (self.x_idx * na + self.a_idx) * nu + self.u_idx
        return np.bincount(flat, minlength=nx * na * nu).reshape(nx, na, nu).astype(float)


def conditional_utility(world: TabularWorld, g, x: str, a: str) -> float:
    """E[g(U, X, A) | X = x, A = a] as an exact finite sum."""
    xi = world.x_alphabet.index(x)
    ai = world.a_alphabet.index(a)
    g.require_alphabets(world)
    return float(world.policy.table[xi, ai] @ g.values[:, xi, ai])


def conditional_utility_matrix(world: TabularWorld, g) -> np.ndarray:
    """All conditional expected utilities at once, shape (|X|, |A|)."""
    g.require_alphabets(world)
    return np.einsum("xau,uxa->xa", world.policy.table, g.values)


def marginal_utility(world: TabularWorld, g, a: str) -> float:
    """E[g(U, X, A) | A = a], marginalising the context X."""
    ai = world.a_alphabet.index(a)
    weights = world.x_weights_given_a(ai)
    cond = conditional_utility_matrix(world, g)[:, ai]
    return float(weights @ cond)


def marginal_utility_vector(world: TabularWorld, g) -> np.ndarray:
    """E[g | A = a] for every group, shape (|A|,)."""
    cond = conditional_utility_matrix(world, g)
    out = np.empty(world.a_alphabet.size)
    for ai in range(world.a_alphabet.size):
        out[ai] = world.x_weights_given_a(ai) @ cond[:, ai]
    return out


def _require_mechanism_on(mech, alphabet: Alphabet, role: str) -> None:
    if mech.in_alphabet != alphabet or mech.out_alphabet != alphabet:
        raise ValidationError(
            f"{role} mechanism must map the world's {role} alphabet to itself; "
            f"got {mech.in_alphabet.labels} -> {mech.out_alphabet.labels}, "
            f"world uses {alphabet.labels}"
        )


def compose_mechanisms(world: TabularWorld, mech_a=None, mech_x=None) -> TabularWorld:
    """Effective decision table when the engine sees randomised attributes.

    P'(u | x, a) = sum over (x~, a~) of M_X(x~|x) M_A(a~|a) P(u | x~, a~).
    Absent mechanisms act as the identity.  Priors are unchanged: the true
    attributes keep their distribution, only the decision table moves.
    """
    table = world.policy.table
    if mech_x is not None:
        _require_mechanism_on(mech_x, world.x_alphabet, "X")
        table = np.einsum("xk,kau->xau", mech_x.rows, table)
    if mech_a is not None:
        _require_mechanism_on(mech_a, world.a_alphabet, "A")
        table = np.einsum("al,xlu->xau", mech_a.rows, table)
    policy = DecisionPolicy(
        world.u_alphabet,
        world.x_alphabet,
        world.a_alphabet,
        table,
        atol=COMPOSED_SUM_ATOL,
    )
    return TabularWorld(policy, world.prior_x, world.prior_a, world.joint_xa)


def _sample_rows(rows: np.ndarray, row_idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one categorical sample per entry of row_idx from rows[row_idx]."""
    cum = np.cumsum(rows, axis=1)
    r = rng.random(len(row_idx))
    out = (r[:, None] > cum[row_idx]).sum(axis=1)
    return np.minimum(out, rows.shape[1] - 1)


def sample_trace(
    world: TabularWorld,
    mech_a=None,
    mech_x=None,
    n: int = 1,
    seed: int = 0,
) -> Trace:
    """n i.i.d. draws through the privatised pipeline, deterministic per seed.

    Each record is (x, a, x~, a~, u) with (x, a) from the prior, the tilded
    values from the mechanisms (identity when absent) and u drawn from the
    decision table at the tilded attributes.
    """
    if n < 1:
        raise ValidationError(f"sample count must be >= 1, got {n}")
    if mech_x is not None:
        _require_mechanism_on(mech_x, world.x_alphabet, "X")
    if mech_a is not None:
        _require_mechanism_on(mech_a, world.a_alphabet, "A")
    rng = np.random.default_rng(seed)
    nx, na = world.x_alphabet.size, world.a_alphabet.size

    if world.joint_xa is not None:
        flat = world.joint_xa.reshape(-1)
        pair = _sample_rows(flat[None, :], np.zeros(n, dtype=int), rng)
        x_idx, a_idx = pair // na, pair % na
    else:
        x_idx = _sample_rows(world.prior_x.probs[None, :], np.zeros(n, dtype=int), rng)
        a_idx = _sample_rows(world.prior_a.probs[None, :], np.zeros(n, dtype=int), rng)

    x_tilde = x_idx if mech_x is None else _sample_rows(mech_x.rows, x_idx, rng)
    a_tilde = a_idx if mech_a is None else _sample_rows(mech_a.rows, a_idx, rng)

    nu = world.u_alphabet.size
    rows = world.policy.table.reshape(nx * na, nu)
    u_idx = _sample_rows(rows, x_tilde * na + a_tilde, rng)

    return Trace(
        world.u_alphabet,
        world.x_alphabet,
        world.a_alphabet,
        x_idx,
        a_idx,
        x_tilde,
        a_tilde,
        u_idx,
    )


def world_from_dict(data: dict) -> TabularWorld:
    """Build and validate a world from its JSON representation."""
    for key in ("u", "x", "a", "prior_x", "prior_a", "policy"):
        if key not in data:
            raise ValidationError(f"world file is missing required key {key!r}")
    u = Alphabet(tuple(data["u"]))
    x = Alphabet(tuple(data["x"]))
    a = Alphabet(tuple(data["a"]))
    policy = DecisionPolicy(u, x, a, np.asarray(data["policy"], dtype=float))
    prior_x = Prior(x, np.asarray(data["prior_x"], dtype=float))
    prior_a = Prior(a, np.asarray(data["prior_a"], dtype=float))
    joint = data.get("joint_xa")
    joint_arr = None if joint is None else np.asarray(joint, dtype=float)
    return TabularWorld(policy, prior_x, prior_a, joint_arr)


def load_world(path) -> TabularWorld:
    with open(path, "r", encoding="utf-8") as fh:
        return world_from_dict(json.load(fh))


def product_world(
    policy_table: Sequence,
    u_labels: Sequence[str],
    x_labels: Sequence[str],
    a_labels: Sequence[str],
    prior_x: Sequence[float] | None = None,
    prior_a: Sequence[float] | None = None,
) -> TabularWorld:
    """Convenience constructor for independent (X, A) worlds."""
    u, x, a = Alphabet(tuple(u_labels)), Alphabet(tuple(x_labels)), Alphabet(tuple(a_labels))
    policy = DecisionPolicy(u, x, a, np.asarray(policy_table, dtype=float))
    px = Prior.uniform(x) if prior_x is None else Prior(x, np.asarray(prior_x, dtype=float))
    pa = Prior.uniform(a) if prior_a is None else Prior(a, np.asarray(prior_a, dtype=float))
    return TabularWorld(policy, px, pa)
