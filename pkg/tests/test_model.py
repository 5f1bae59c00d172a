import json
import math

import numpy as np
import pytest

from privfair import (
    Alphabet,
    DecisionPolicy,
    LabelError,
    Prior,
    TabularWorld,
    UndefinedConditionalError,
    UtilityTable,
    ValidationError,
    compose_mechanisms,
    conditional_utility,
    identity_mechanism,
    marginal_utility,
    product_world,
    sample_trace,
    uniform_mechanism,
    world_from_dict,
)
from privfair.model import load_world
from privfair.randomgen import random_mechanism, random_world


def test_alphabet_rejects_duplicates_and_empty():
    with pytest.raises(ValidationError):
        Alphabet(("a", "a"))
    with pytest.raises(ValidationError):
        Alphabet(())
    alpha = Alphabet(("x", "y"))
    assert alpha.size == 2
    assert alpha.index("y") == 1
    with pytest.raises(LabelError):
        alpha.index("z")


def test_prior_validation(binary):
    with pytest.raises(ValidationError):
        Prior(binary, np.array([0.6, 0.6]))
    with pytest.raises(ValidationError):
        Prior(binary, np.array([-0.1, 1.1]))
    with pytest.raises(ValidationError):
        Prior(binary, np.array([1.0]))


def test_policy_row_sum_error_names_indices(binary):
    table = np.array([[[0.5, 0.5], [0.9, 0.2]]])
    with pytest.raises(ValidationError, match=r"\[x=0\]\[a=1\]"):
        DecisionPolicy(binary, Alphabet(("x0",)), binary, table)


def test_joint_must_match_marginals(binary, simple_world):
    joint = np.array([[0.6, 0.4]])  # X marginal 1.0 but prior_x says uniform? nx=1
    x = Alphabet(("x0",))
    world = TabularWorld(
        simple_world.policy,
        Prior(x, np.array([1.0])),
        Prior(binary, np.array([0.6, 0.4])),
        joint,
    )
    assert not world.is_product_prior() or np.allclose(joint, np.outer([1.0], [0.6, 0.4]))
    bad = np.array([[0.5, 0.5]])
    with pytest.raises(ValidationError, match="marginal"):
        TabularWorld(
            simple_world.policy,
            Prior(x, np.array([1.0])),
            Prior(binary, np.array([0.6, 0.4])),
            bad,
        )


def test_conditional_utility_hand_sum():
    world = product_world(
        [[[0.25, 0.75], [0.25, 0.75]], [[0.5, 0.5], [0.5, 0.5]]],
        u_labels=("0", "1"),
        x_labels=("x0", "x1"),
        a_labels=("a0", "a1"),
    )
    g = UtilityTable.u_value(world)
    assert conditional_utility(world, g, "x0", "a0") == pytest.approx(0.75, abs=1e-15)


def test_conditional_utility_constant_is_one(simple_world):
    g = UtilityTable.constant(simple_world, 1.0)
    assert conditional_utility(simple_world, g, "x0", "0") == 1.0


def test_conditional_utility_unknown_label(simple_world):
    g = UtilityTable.u_value(simple_world)
    with pytest.raises(LabelError):
        conditional_utility(simple_world, g, "nope", "0")


def test_counterexample_composed_conditionals_and_marginal(counterexample):
    composed = compose_mechanisms(counterexample.world, mech_x=counterexample.mech_x)
    g = counterexample.g
    assert conditional_utility(composed, g, "0", "0") == pytest.approx(0.9, abs=1e-12)
    assert conditional_utility(composed, g, "1", "0") == pytest.approx(0.7, abs=1e-12)
    assert marginal_utility(composed, g, "0") == pytest.approx(0.8, abs=1e-12)
    assert marginal_utility(composed, g, "1") == pytest.approx(0.2, abs=1e-12)


def test_marginal_utility_identity_counterexample(counterexample):
    assert marginal_utility(counterexample.world, counterexample.g, "0") == pytest.approx(
        0.5, abs=1e-15
    )


def test_marginal_utility_weighted_average():
    world = product_world(
        [[[0.8, 0.2], [0.8, 0.2]], [[0.4, 0.6], [0.4, 0.6]]],
        u_labels=("0", "1"),
        x_labels=("x0", "x1"),
        a_labels=("a0", "a1"),
    )
    g = UtilityTable.u_value(world)
    assert marginal_utility(world, g, "a0") == pytest.approx(0.4, abs=1e-15)


def test_marginal_constant_utility(simple_world):
    g = UtilityTable.constant(simple_world, 3.5)
    assert marginal_utility(simple_world, g, "0") == pytest.approx(3.5, abs=1e-12)


def test_zero_probability_group_with_joint_errors(binary):
    x = Alphabet(("x0", "x1"))
    table = np.full((2, 2, 2), 0.5)
    joint = np.array([[0.5, 0.0], [0.5, 0.0]])
    world = TabularWorld(
        DecisionPolicy(binary, x, binary, table),
        Prior(x, np.array([0.5, 0.5])),
        Prior(binary, np.array([1.0, 0.0])),
        joint,
    )
    g = UtilityTable.u_value(world)
    with pytest.raises(UndefinedConditionalError):
        marginal_utility(world, g, "1")


def test_compose_identity_is_noop(counterexample):
    world = counterexample.world
    ident_x = identity_mechanism(world.x_alphabet)
    ident_a = identity_mechanism(world.a_alphabet)
    composed = compose_mechanisms(world, mech_a=ident_a, mech_x=ident_x)
    assert np.max(np.abs(composed.policy.table - world.policy.table)) <= 1e-15


def test_compose_counterexample_mechanism_rows(counterexample):
    composed = compose_mechanisms(counterexample.world, mech_x=counterexample.mech_x)
    # P'(U=1 | X=0, A=0) = 0.9 and P'(U=1 | X=1, A=0) = 0.7
    assert composed.policy.table[0, 0, 1] == pytest.approx(0.9, abs=1e-15)
    assert composed.policy.table[1, 0, 1] == pytest.approx(0.7, abs=1e-15)


def test_compose_uniform_mechanism_erases_group_dependence():
    rng = np.random.default_rng(3)
    world = random_world(rng)
    composed = compose_mechanisms(world, mech_a=uniform_mechanism(world.a_alphabet))
    mean_rows = world.policy.table.mean(axis=1, keepdims=True)
    assert np.allclose(composed.policy.table, np.broadcast_to(mean_rows, world.policy.table.shape))


def test_compose_alphabet_mismatch(simple_world):
    other = identity_mechanism(Alphabet(("p", "q", "r")))
    with pytest.raises(ValidationError, match="alphabet"):
        compose_mechanisms(simple_world, mech_a=other)


def test_composition_keeps_rows_stochastic_on_random_instances():
    for i in range(200):
        rng = np.random.default_rng(100 + i)
        world = random_world(rng)
        composed = compose_mechanisms(
            world,
            mech_a=random_mechanism(rng, world.a_alphabet),
            mech_x=random_mechanism(rng, world.x_alphabet),
        )
        sums = composed.policy.table.sum(axis=2)
        assert np.max(np.abs(sums - 1.0)) <= 1e-10
        assert np.min(composed.policy.table) >= 0.0


def test_sample_trace_rejects_empty(simple_world):
    with pytest.raises(ValidationError):
        sample_trace(simple_world, n=0, seed=1)


def test_sample_trace_point_mass():
    world = product_world(
        [[[1.0, 0.0]]],
        u_labels=("u0", "u1"),
        x_labels=("x0",),
        a_labels=("a0",),
    )
    trace = sample_trace(world, n=1, seed=5)
    assert trace.records() == [("x0", "a0", "x0", "a0", "u0")]


def test_sample_trace_deterministic(counterexample):
    t1 = sample_trace(counterexample.world, mech_x=counterexample.mech_x, n=500, seed=11)
    t2 = sample_trace(counterexample.world, mech_x=counterexample.mech_x, n=500, seed=11)
    assert t1.records() == t2.records()


def test_sample_trace_counterexample_group_mean(counterexample):
    trace = sample_trace(
        counterexample.world, mech_x=counterexample.mech_x, n=100_000, seed=42
    )
    mask = trace.a_idx == 0
    mean = trace.u_idx[mask].mean()
    assert abs(mean - 0.8) <= 0.01


def test_sample_trace_empirical_frequencies_near_exact():
    rng = np.random.default_rng(9)
    world = random_world(rng, nu=3, nx=2, na=2)
    mech_a = random_mechanism(rng, world.a_alphabet)
    mech_x = random_mechanism(rng, world.x_alphabet)
    trace = sample_trace(world, mech_a=mech_a, mech_x=mech_x, n=100_000, seed=123)
    composed = compose_mechanisms(world, mech_a=mech_a, mech_x=mech_x)
    cube = trace.counts_cube()
    cell = cube.sum(axis=2)
    assert np.all(cell > 0)
    empirical = cube / cell[:, :, None]
    assert np.max(np.abs(empirical - composed.policy.table)) <= 0.02


def test_world_json_roundtrip(tmp_path, counterexample):
    world = counterexample.world
    payload = {
        "u": list(world.u_alphabet.labels),
        "x": list(world.x_alphabet.labels),
        "a": list(world.a_alphabet.labels),
        "prior_x": world.prior_x.probs.tolist(),
        "prior_a": world.prior_a.probs.tolist(),
        "policy": world.policy.table.tolist(),
    }
    path = tmp_path / "world.json"
    path.write_text(json.dumps(payload))
    loaded = load_world(path)
    assert np.array_equal(loaded.policy.table, world.policy.table)
    with pytest.raises(ValidationError, match="missing required key"):
        world_from_dict({"u": ["0"]})


def test_utility_validation_and_shorthands(simple_world):
    with pytest.raises(ValidationError, match="negative"):
        UtilityTable(
            simple_world.u_alphabet,
            simple_world.x_alphabet,
            simple_world.a_alphabet,
            -np.ones((2, 1, 2)),
        )
    g = UtilityTable.u_value(simple_world)
    assert g.depends_only_on_u() and g.independent_of_a()
    ind = UtilityTable.indicator_u_equals_a(simple_world)
    assert ind.values[0, 0, 0] == 1.0 and ind.values[0, 0, 1] == 0.0
    assert not ind.independent_of_a()
    scaled = g.scaled(2.0)
    assert scaled.max_value == 2.0
    with pytest.raises(ValidationError):
        g.scaled(0.0)


def test_utility_loader(tmp_path, simple_world):
    from privfair import load_utility

    path = tmp_path / "g.json"
    path.write_text(json.dumps({"kind": "u_value"}))
    g = load_utility(path, simple_world)
    assert g.values[1, 0, 0] == 1.0
    path.write_text(json.dumps({"kind": "mystery"}))
    with pytest.raises(ValidationError):
        load_utility(path, simple_world)
    dense = np.ones((2, 1, 2)).tolist()
    path.write_text(json.dumps({"g": dense}))
    assert load_utility(path, simple_world).max_value == 1.0
