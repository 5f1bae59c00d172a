"""Seeded random instance generators for the randomized theorem checks."""

from __future__ import annotations

import math

import numpy as np

from .mechanisms import (
    MechanismMatrix,
    PrivacyBudget,
    randomized_response,
    tightest_delta,
)
from .model import Alphabet, DecisionPolicy, Prior, TabularWorld
from .utility import UtilityTable


def make_alphabet(prefix: str, size: int) -> Alphabet:
    return Alphabet(tuple(f"{prefix}{i}" for i in range(size)))


def random_sizes(rng: np.random.Generator, choices=(2, 3, 4)) -> tuple[int, int, int]:
    return tuple(int(rng.choice(choices)) for _ in range(3))


def random_world(
    rng: np.random.Generator,
    nu: int | None = None,
    nx: int | None = None,
    na: int | None = None,
    zero_prob: float = 0.0,
) -> TabularWorld:
    """Random product-prior world; zero_prob plants exact zeros in policy rows."""
    du, dx, da = random_sizes(rng)
    nu, nx, na = nu or du, nx or dx, na or da
    u, x, a = make_alphabet("u", nu), make_alphabet("x", nx), make_alphabet("a", na)
    table = rng.dirichlet(np.ones(nu), size=(nx, na))
    if zero_prob > 0:
        for xi in range(nx):
            for ai in range(na):
                if rng.random() < zero_prob:
                    row = table[xi, ai].copy()
                    row[rng.integers(nu)] = 0.0
                    if row.sum() == 0:
                        row[rng.integers(nu)] = 1.0
                    table[xi, ai] = row / row.sum()
    return TabularWorld(
        DecisionPolicy(u, x, a, table),
        Prior(x, rng.dirichlet(np.ones(nx))),
        Prior(a, rng.dirichlet(np.ones(na))),
    )


def random_dependent_world(rng: np.random.Generator) -> TabularWorld:
    """World with a genuinely non-product joint over (X, A)."""
    world = random_world(rng)
    nx, na = world.x_alphabet.size, world.a_alphabet.size
    while True:
        joint = rng.dirichlet(np.ones(nx * na)).reshape(nx, na)
        product = np.outer(joint.sum(axis=1), joint.sum(axis=0))
        if np.max(np.abs(joint - product)) > 1e-3:
            break
    return TabularWorld(
        world.policy,
        Prior(world.x_alphabet, joint.sum(axis=1)),
        Prior(world.a_alphabet, joint.sum(axis=0)),
        joint,
    )


def random_utility(
    rng: np.random.Generator,
    world: TabularWorld,
    low: float = 0.05,
    high: float = 2.0,
    a_independent: bool = False,
    u_only: bool = False,
) -> UtilityTable:
    nu, nx, na = world.u_alphabet.size, world.x_alphabet.size, world.a_alphabet.size
    if u_only:
        values = np.broadcast_to(
            rng.uniform(low, high, size=(nu, 1, 1)), (nu, nx, na)
        ).copy()
    elif a_independent:
        values = np.broadcast_to(
            rng.uniform(low, high, size=(nu, nx, 1)), (nu, nx, na)
        ).copy()
    else:
        values = rng.uniform(low, high, size=(nu, nx, na))
    return UtilityTable(world.u_alphabet, world.x_alphabet, world.a_alphabet, values)


def random_mechanism(
    rng: np.random.Generator, alphabet: Alphabet, kind: str = "mixed"
) -> MechanismMatrix:
    """Random stochastic matrix on an alphabet.

    "rr" draws a randomized-response matrix, "dirichlet" fully random rows,
    and "mixed" blends the two (strictly positive, non-trivial privacy).
    """
    k = alphabet.size
    if kind == "rr":
        return randomized_response(alphabet, float(rng.uniform(0.0, 4.0)))
    if kind == "dirichlet":
        return MechanismMatrix(alphabet, alphabet, rng.dirichlet(np.ones(k), size=k))
    rr = randomized_response(alphabet, float(rng.uniform(0.0, 4.0))).rows
    noise = rng.dirichlet(np.ones(k), size=k)
    lam = rng.uniform(0.0, 0.5)
    return MechanismMatrix(alphabet, alphabet, (1 - lam) * rr + lam * noise)


def budget_with_delta_cap(
    rng: np.random.Generator,
    mech: MechanismMatrix,
    eps_range: tuple[float, float] = (0.0, 4.0),
    delta_cap: float = 0.3,
) -> PrivacyBudget:
    """A valid (epsilon, tightest-delta) budget with delta at most the cap.

    The tightest delta is non-increasing in epsilon, so if the drawn epsilon
    leaves too much slack the epsilon is raised by bisection until the delta
    falls under the cap.
    """
    lo, hi = eps_range
    eps = float(rng.uniform(lo, hi))
    delta = tightest_delta(mech, eps)
    if delta > delta_cap:
        upper = max(hi, 16.0)
        while tightest_delta(mech, upper) > delta_cap:
            upper *= 2
            if upper > 1e6:  # pathological matrix; fall back to pure DP via cap
                return PrivacyBudget(epsilon=upper, delta=tightest_delta(mech, upper))
        lo_eps = eps
        for _ in range(80):
            mid = 0.5 * (lo_eps + upper)
            if tightest_delta(mech, mid) > delta_cap:
                lo_eps = mid
            else:
                upper = mid
        eps = upper
        delta = tightest_delta(mech, eps)
    return PrivacyBudget(epsilon=eps, delta=delta)


def derived_rng(base_seed: int, index: int) -> np.random.Generator:
    """Per-instance generator: task seeds are base_seed + task_index."""
    return np.random.default_rng(base_seed + index)
