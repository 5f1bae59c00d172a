"""Check runners: counterexample reproduction and the randomized property suite.

The property suite draws seeded random instances (seed + index per task),
evaluates the certified inequalities and the exhaustive oracles, and stops
at the first counterexample, printing a reproduction shrunk to the
smallest alphabets when one can be found there.  Summary lines on stdout
are deterministic for a fixed seed; timings go to stderr.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .certificates import (
    AttributeMetric,
    certify,
    counterexample_world,
    x_privacy_check,
)
from .errors import HypothesisViolationError
from .mechanisms import (
    randomized_response,
    post_process,
    tightest_delta,
    tightest_delta_bruteforce,
    tightest_epsilon,
    verify_dp,
    PrivacyBudget,
)
from .metrics import (
    demographic_parity,
    equalized_odds,
    global_g_fairness,
    local_g_fairness,
    ratio_sup,
    witness_utility_family,
)
from .model import (
    DecisionPolicy,
    TabularWorld,
    compose_mechanisms,
    marginal_utility,
)
from .mechanisms import MechanismMatrix
from .randomgen import (
    budget_with_delta_cap,
    derived_rng,
    random_dependent_world,
    random_mechanism,
    make_alphabet,
    random_utility,
    random_world,
)
from .utility import UtilityTable

CHAIN_ATOL = 1e-9


def repro_counterexample(mech_override=None, stream=None) -> int:
    """Reproduce the X-privacy counterexample values; exit 0 iff all match.

    ``mech_override`` substitutes the X mechanism (test hook for checking
    that the detector notices perturbed values).
    """
    stream = stream or sys.stdout
    bundle = counterexample_world()
    mech = bundle.mech_x if mech_override is None else mech_override
    composed = compose_mechanisms(bundle.world, mech_x=mech)
    computed = {
        "global_identity": global_g_fairness(bundle.world, bundle.g).value,
        "global_privatized": global_g_fairness(composed, bundle.g).value,
        "mechanism_epsilon": tightest_epsilon(mech),
        "mean_group_0": marginal_utility(composed, bundle.g, "0"),
        "mean_group_1": marginal_utility(composed, bundle.g, "1"),
    }
    tol = 1e-12
    print("X-privacy counterexample reproduction", file=stream)
    failures = 0
    for key, expected in bundle.expected.items():
        got = computed[key]
        diff = abs(got - expected)
        ok = diff <= tol
        failures += 0 if ok else 1
        status = "ok" if ok else "MISMATCH"
        print(
            f"  {key:<22} computed={got:.16e}  expected={expected:.16e}  "
            f"|diff|={diff:.3e}  {status}",
            file=stream,
        )
    if failures:
        print(f"FAIL: {failures}/5 values off by more than {tol}", file=stream)
        return 1
    print(f"PASS: all 5 values match within {tol}", file=stream)
    return 0


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    n: int
    failure_index: int | None = None
    detail: str = ""


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.12g}"


# ---------------------------------------------------------------------------
# per-instance checks; each returns (ok, detail string)


def _check_composition(rng, small=False):
    kw = dict(nu=2, nx=2, na=2) if small else {}
    world = random_world(rng, **kw)
    mech_a = random_mechanism(rng, world.a_alphabet)
    mech_x = random_mechanism(rng, world.x_alphabet)
    composed = compose_mechanisms(world, mech_a=mech_a, mech_x=mech_x)
    sums = composed.policy.table.sum(axis=2)
    if np.any(np.abs(sums - 1.0) > 1e-10) or np.any(composed.policy.table < 0):
        return False, "composed table is not row-stochastic"
    # chaining two A-mechanisms equals composing their matrix product
    mech_b = random_mechanism(rng, world.a_alphabet)
    chained = compose_mechanisms(compose_mechanisms(world, mech_a=mech_b), mech_a=mech_a)
    product = MechanismMatrix(
        world.a_alphabet, world.a_alphabet, mech_a.rows @ mech_b.rows, atol=1e-10
    )
    direct = compose_mechanisms(world, mech_a=product)
    gap = float(np.abs(chained.policy.table - direct.policy.table).max())
    if gap > 1e-10:
        return False, f"mechanism chaining deviates from matrix product by {gap:.3e}"
    return True, ""


def _check_c1_chain(rng, small=False):
    kw = dict(nu=2, nx=2, na=2) if small else {}
    world = random_world(rng, **kw)
    g = random_utility(rng, world)
    mech_a = random_mechanism(rng, world.a_alphabet)
    mech_x = random_mechanism(rng, world.x_alphabet) if rng.random() < 0.5 else None
    budget = budget_with_delta_cap(rng, mech_a)
    cert = certify(
        world, g, AttributeMetric(), mech_a, mech_x=mech_x, epsilon=budget.epsilon
    )
    if not cert.holds:
        return False, (
            f"chain violated: l_bar={_fmt(cert.global_value.value)} "
            f"l={_fmt(cert.local_value.value)} bound={_fmt(cert.bound)} "
            f"eps={budget.epsilon:.6g} delta={cert.budget.delta:.6g}"
        )
    return True, ""


def _check_c3_pure(rng, small=False):
    kw = dict(nu=2, nx=2, na=2) if small else {}
    world = random_world(rng, **kw)
    g = random_utility(rng, world, a_independent=True)
    eps = float(rng.uniform(0.0, 4.0))
    mech_a = randomized_response(world.a_alphabet, eps)
    mech_x = random_mechanism(rng, world.x_alphabet) if rng.random() < 0.5 else None
    cert = certify(world, g, AttributeMetric(), mech_a, mech_x=mech_x)
    if cert.theorem != "corollary_c3":
        return False, f"expected corollary_c3, got {cert.theorem}"
    if not cert.holds or cert.local_value.value > eps + CHAIN_ATOL:
        return False, (
            f"pure-DP bound violated: l={_fmt(cert.local_value.value)} eps={eps:.6g}"
        )
    return True, ""


def _check_b1_bounds(rng, small=False):
    kw = dict(nu=2, nx=2, na=2) if small else {}
    world = random_world(rng, zero_prob=0.3, **kw)
    r_cond = ratio_sup(world, conditional=True).value
    r_marg = ratio_sup(world, conditional=False).value
    l_eo = equalized_odds(world)
    l_dp = demographic_parity(world)
    eo_cap = math.inf if math.isinf(r_cond) else math.expm1(r_cond)
    dp_cap = math.inf if math.isinf(r_marg) else math.expm1(r_marg)
    if l_eo > eo_cap + CHAIN_ATOL:
        return False, f"l_eo={l_eo:.6g} exceeds exp(log R)-1={_fmt(eo_cap)}"
    if l_dp > dp_cap + CHAIN_ATOL:
        return False, f"l_dp={l_dp:.6g} exceeds exp(log R_bar)-1={_fmt(dp_cap)}"
    return True, ""


def _floored_world(rng, small=False):
    # strictly positive rows with a uniform-mixture floor keep R_max and its
    # attaining denominators bounded, so the k = 1e6 witness tolerance is met
    kw = dict(nu=2, nx=2, na=2) if small else {}
    world = random_world(rng, **kw)
    nu = world.u_alphabet.size
    table = 0.7 * world.policy.table + 0.3 / nu
    policy = DecisionPolicy(
        world.u_alphabet, world.x_alphabet, world.a_alphabet, table, atol=1e-10
    )
    return TabularWorld(policy, world.prior_x, world.prior_a)


def _check_witness_family(rng, small=False):
    world = _floored_world(rng, small)
    r_max = math.exp(ratio_sup(world, conditional=True).value)
    previous = -math.inf
    for k in (0.0, 1.0, 10.0, 100.0, 1e4, 1e6):
        g_k = witness_utility_family(world, k)
        value = math.exp(local_g_fairness(world, g_k).value)
        if value < previous - 1e-12:
            return False, f"witness value decreased at k={k}: {value} < {previous}"
        if value > r_max + 1e-9:
            return False, f"witness value {value} overshoots R_max={r_max}"
        previous = value
    if abs(previous - r_max) > 1e-3:
        return False, f"witness at k=1e6 reaches {previous}, R_max={r_max}"
    return True, ""


def _check_c2_x_privacy(rng, small=False):
    kw = dict(nu=2, nx=2, na=2) if small else {}
    world = random_world(rng, zero_prob=0.4, **kw)
    g = random_utility(rng, world, u_only=True)
    if rng.random() < 0.3:
        # zero out some decision values so infinite metrics get exercised
        values = np.array(g.values)
        keep = rng.random(world.u_alphabet.size) < 0.7
        if not keep.any():
            keep[0] = True
        values[~keep] = 0.0
        g = UtilityTable(g.u_alphabet, g.x_alphabet, g.a_alphabet, values)
    mech_x = random_mechanism(rng, world.x_alphabet)
    result = x_privacy_check(world, g, mech_x)
    if not result.non_worsening:
        return False, (
            f"privatising X worsened local fairness: "
            f"{_fmt(result.l_with.value)} > {_fmt(result.l_without.value)}"
        )
    return True, ""


def _check_dp_oracle(rng, small=False):
    size = 2 if small else int(rng.integers(2, 11))
    kind = "dirichlet" if rng.random() < 0.7 else "mixed"
    alphabet = make_alphabet("o", size)
    mech = random_mechanism(rng, alphabet, kind=kind)
    if rng.random() < 0.3:  # plant exact zeros
        rows = np.array(mech.rows)
        i = int(rng.integers(size))
        j = int(rng.integers(size))
        rows[i, j] = 0.0
        rows[i] = rows[i] / rows[i].sum()
        mech = MechanismMatrix(alphabet, alphabet, rows)
    eps_star = tightest_epsilon(mech)
    eps_values = [0.0, 0.2, 1.0, 2.5]
    if not math.isinf(eps_star):
        eps_values.append(eps_star)
    for eps in eps_values:
        exact = tightest_delta(mech, eps)
        brute = tightest_delta_bruteforce(mech, eps)
        if abs(exact - brute) > 1e-12:
            return False, (
                f"delta mismatch at eps={eps:.6g}: closed-form {exact!r}, "
                f"subset oracle {brute!r}"
            )
        verdict = verify_dp(mech, PrivacyBudget(eps, brute))
        if not verdict.passed:
            return False, f"verify_dp rejects its own tightest delta at eps={eps:.6g}"
    if not math.isinf(eps_star):
        if tightest_delta(mech, eps_star) > 1e-12:
            return False, "tightest delta at tightest epsilon is not zero"
    return True, ""


def _check_post_processing(rng, small=False):
    size = 2 if small else int(rng.integers(2, 6))
    alphabet = make_alphabet("o", size)
    mech = random_mechanism(rng, alphabet, kind="dirichlet")
    mapping = random_mechanism(rng, alphabet, kind="dirichlet")
    processed = post_process(mech, mapping)
    e_before, e_after = tightest_epsilon(mech), tightest_epsilon(processed)
    if e_after > e_before + 1e-12 and not math.isinf(e_before):
        return False, f"post-processing raised epsilon: {e_before} -> {e_after}"
    for eps in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0):
        if tightest_delta(processed, eps) > tightest_delta(mech, eps) + 1e-12:
            return False, f"post-processing raised delta at eps={eps}"
    return True, ""


def _check_dependent_world_routing(rng, small=False):
    world = random_dependent_world(rng)
    g = random_utility(rng, world)
    mech_a = randomized_response(world.a_alphabet, 1.0)
    try:
        certify(world, g, AttributeMetric(), mech_a)
    except HypothesisViolationError:
        return True, ""
    return False, "certify accepted a dependent (X, A) world"


_CHECKS: list[tuple[str, Callable, int]] = [
    ("composition-stochasticity", _check_composition, 2000),
    ("theorem-c1-chain", _check_c1_chain, 0),  # 0 = use the full count
    ("theorem-c3-pure-dp", _check_c3_pure, 0),
    ("theorem-b1-classical-bounds", _check_b1_bounds, 0),
    ("lemma-b1-witness-family", _check_witness_family, 100),
    ("theorem-c2-x-privacy", _check_c2_x_privacy, 0),
    ("dp-subset-oracle", _check_dp_oracle, 500),
    ("post-processing-monotone", _check_post_processing, 1000),
    ("dependent-world-routing", _check_dependent_world_routing, 50),
]


def _try_shrink(fn: Callable, seed: int, attempts: int = 2000):
    """Look for a failure at the smallest alphabets; None if none found."""
    for j in range(attempts):
        rng = derived_rng(seed + 50_000_000, j)
        ok, detail = fn(rng, small=True)
        if not ok:
            return j, detail
    return None


def run_property_suite(seed: int = 0, count: int = 10000, stream=None) -> int:
    """Run every randomized check; stop and report on the first failure."""
    stream = stream or sys.stdout
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    for name, fn, cap in _CHECKS:
        n = count if cap == 0 else min(count, cap)
        started = time.perf_counter()
        for i in range(n):
            rng = derived_rng(seed, i)
            ok, detail = fn(rng)
            if not ok:
                print(f"{name}: FAIL at instance {i} (seed {seed + i})", file=stream)
                print(f"  {detail}", file=stream)
                shrunk = _try_shrink(fn, seed)
                if shrunk is not None:
                    j, small_detail = shrunk
                    print(
                        f"  minimized reproduction: alphabets (2,2,2), "
                        f"seed {seed + 50_000_000 + j}",
                        file=stream,
                    )
                    print(f"  {small_detail}", file=stream)
                return 1
        elapsed = time.perf_counter() - started
        print(f"{name}: pass (n={n})", file=stream)
        print(f"  [{name}: {elapsed:.2f}s]", file=sys.stderr)
    print("property suite: all checks passed", file=stream)
    return 0
