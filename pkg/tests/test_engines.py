import json
from pathlib import Path

import numpy as np
import pytest

from privfair import (
    Alphabet,
    DecisionPolicy,
    EngineDecision,
    Profile,
    ProtocolError,
    ScenarioError,
    SyntheticBiasedEngine,
    TabularEngine,
    ValidationError,
    binary_rr_from_p,
    build_prompt,
    compose_mechanisms,
    default_hr_weights,
    parse_decision,
    privatize_profile,
    uniform_mechanism,
)
from privfair.engines import CandidateRoute, EngineRequest
from privfair.scenario import builtin_hr_scenario, builtin_package_scenario

DATA = Path(__file__).parent / "data"


def hr_request(profiles=None, context="maternity leave"):
    scenario = builtin_hr_scenario()
    return EngineRequest(
        scenario="hr_delivery",
        candidates=scenario.candidate_routes(),
        profiles=profiles or scenario.profile_list,
        context=context,
    )


def test_engine_decision_invariants():
    with pytest.raises(ValidationError):
        EngineDecision(scores={"a": 1.2, "b": 0.0}, chosen="a")
    with pytest.raises(ValidationError):
        EngineDecision(scores={"a": 0.4, "b": 0.6}, chosen="a")
    tie = EngineDecision(scores={"a": 0.5, "b": 0.5}, chosen="a")
    assert tie.chosen == "a"  # first candidate wins exact ties


def test_tabular_engine_point_mass_and_uniform(binary):
    u = Alphabet(("c0", "c1"))
    x = Alphabet(("ctx",))
    a = Alphabet(("anyone",))
    routes = (CandidateRoute("c0", 1.0, "r0"), CandidateRoute("c1", 1.0, "r1"))
    profiles = (Profile.from_mapping({"n": "p"}), Profile.from_mapping({"n": "q"}))

    point = TabularEngine(
        DecisionPolicy(u, x, a, np.array([[[0.0, 1.0]]])), sensitive="anyone"
    )
    request = EngineRequest("hr_delivery", routes, profiles, context="ctx")
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert point.decide(request, rng).chosen == "c1"

    fair = TabularEngine(
        DecisionPolicy(u, x, a, np.array([[[0.5, 0.5]]])), sensitive="anyone"
    )
    rng = np.random.default_rng(1)
    picks = sum(fair.decide(request, rng).chosen == "c0" for _ in range(10_000))
    assert abs(picks / 10_000 - 0.5) <= 0.03


def test_tabular_engine_matches_composed_pipeline(counterexample):
    """Sampling decisions through the engine reproduces the composed table."""
    world = counterexample.world
    mech_x = counterexample.mech_x
    composed = compose_mechanisms(world, mech_x=mech_x)
    u = world.u_alphabet
    routes = (CandidateRoute("0", 1.0, "r0"), CandidateRoute("1", 1.0, "r1"))
    profiles = (Profile.from_mapping({"id": "g0"}), Profile.from_mapping({"id": "g1"}))
    n = 40_000
    rng = np.random.default_rng(5)
    counts = np.zeros(2)
    engine = TabularEngine(world.policy, sensitive="0")
    for i in range(n):
        x_true = 0
        x_tilde = 0 if rng.random() < mech_x.rows[x_true, 0] else 1
        request = EngineRequest(
            "hr_delivery", routes, profiles, context=str(x_tilde)
        )
        decision = engine.decide(request, rng)
        counts[int(decision.chosen)] += 1
    assert abs(counts[1] / n - composed.policy.table[0, 0, 1]) <= 0.02


def test_tabular_engine_encoding_mismatch():
    u = Alphabet(("left", "right"))
    x = Alphabet(("ctx",))
    a = Alphabet(("anyone",))
    engine = TabularEngine(
        DecisionPolicy(u, x, a, np.array([[[0.5, 0.5]]])), sensitive="anyone"
    )
    request = hr_request()  # candidate ids are HR1/HR2, not left/right
    with pytest.raises(ValidationError, match="do not match"):
        engine.decide(request, np.random.default_rng(0))


def test_synthetic_engine_equal_weights_split():
    engine = SyntheticBiasedEngine({lbl: 1.0 for lbl in ("Tom", "Mary", "25", "55", "Asian", "American")})
    request = hr_request()
    picks = 0
    trials = 10_000
    for i in range(trials):
        picks += engine.decide(request, np.random.default_rng(i)).chosen == "HR1"
    assert abs(picks / trials - 0.5) <= 0.03


def test_synthetic_engine_default_weights_prefer_second():
    engine = SyntheticBiasedEngine(default_hr_weights())
    request = hr_request()
    picks = sum(
        engine.decide(request, np.random.default_rng(i)).chosen == "HR2"
        for i in range(100)
    )
    assert picks >= 95


def test_synthetic_engine_weight_shift_invariance():
    request = hr_request()
    base = SyntheticBiasedEngine(default_hr_weights())
    shifted = SyntheticBiasedEngine({k: v + 7.5 for k, v in default_hr_weights().items()})
    for i in range(50):
        a = base.decide(request, np.random.default_rng(i)).chosen
        b = shifted.decide(request, np.random.default_rng(i)).chosen
        assert a == b


def test_synthetic_engine_missing_weight():
    engine = SyntheticBiasedEngine({"Tom": 1.0})
    with pytest.raises(ValidationError, match="no weight"):
        engine.decide(hr_request(), np.random.default_rng(0))


def test_build_prompt_contents_and_golden_files():
    hr = builtin_hr_scenario()
    text = build_prompt("hr_delivery", hr.profile_list, hr.candidate_routes(), "maternity leave")
    assert "HR1" in text and "HR2" in text
    assert "JSON" in text and '"HR2": "1.0"' in text
    assert text == (DATA / "prompt_hr.txt").read_text()
    again = build_prompt("hr_delivery", hr.profile_list, hr.candidate_routes(), "maternity leave")
    assert text == again

    pkg = builtin_package_scenario()
    package = build_prompt(
        "package_delivery", pkg.profile_list, pkg.candidate_routes(), "standard parcel"
    )
    assert "order for the two recipients" in package
    assert package == (DATA / "prompt_package.txt").read_text()


def test_build_prompt_requires_two_profiles():
    hr = builtin_hr_scenario()
    with pytest.raises(ScenarioError):
        build_prompt("hr_delivery", hr.profile_list[:1], hr.candidate_routes()[:1])
    with pytest.raises(ScenarioError):
        build_prompt("unknown", hr.profile_list, hr.candidate_routes())


def test_parse_decision_output_examples():
    body = json.dumps({"HR1": "0.0", "HR2": "1.0", "reason": "better fit"})
    decision = parse_decision(body, "hr_delivery", ("HR1", "HR2"))
    assert decision.chosen == "HR2"
    assert decision.scores == {"HR1": 0.0, "HR2": 1.0}
    assert decision.reason == "better fit"

    ranks = json.dumps({"Recipient1": "2.0", "Recipient2": "1.0", "reason": "order"})
    ordered = parse_decision(ranks, "package_delivery", ("Recipient1", "Recipient2"))
    assert ordered.chosen == "Recipient2"
    assert ordered.scores["Recipient2"] == 1.0
    assert ordered.scores["Recipient1"] == 0.5


def test_parse_decision_fenced_fixture():
    body = (DATA / "fenced_response.txt").read_text()
    decision = parse_decision(body, "hr_delivery", ("HR1", "HR2"))
    assert decision.chosen == "HR2"


def test_parse_decision_errors():
    with pytest.raises(ProtocolError, match="no JSON object"):
        parse_decision("I would pick HR2.", "hr_delivery", ("HR1", "HR2"))
    with pytest.raises(ProtocolError, match="missing keys"):
        parse_decision(json.dumps({"HR1": "1.0"}), "hr_delivery", ("HR1", "HR2"))
    with pytest.raises(ProtocolError, match="not numeric"):
        parse_decision(
            json.dumps({"HR1": "maybe", "HR2": "1.0"}), "hr_delivery", ("HR1", "HR2")
        )
    with pytest.raises(ProtocolError, match=r"\[0, 1\]"):
        parse_decision(
            json.dumps({"HR1": "2.0", "HR2": "1.0"}), "hr_delivery", ("HR1", "HR2")
        )
    with pytest.raises(ProtocolError, match="positive"):
        parse_decision(
            json.dumps({"Recipient1": "0.0", "Recipient2": "1.0"}),
            "package_delivery",
            ("Recipient1", "Recipient2"),
        )


def test_privatize_profile_variants(binary):
    profile = Profile.from_mapping({"name": "Tom", "age": "25"})
    rng = np.random.default_rng(0)
    assert privatize_profile(profile, None, rng) is profile

    names = Alphabet(("Tom", "Mary"))
    ages = Alphabet(("25", "55"))
    per_attr = {"name": binary_rr_from_p(names, 0.7), "age": binary_rr_from_p(ages, 0.7)}
    noisy = privatize_profile(profile, per_attr, rng)
    assert set(noisy.as_dict()) == {"name", "age"}
    assert noisy.as_dict()["name"] in names.labels

    with pytest.raises(ValidationError, match="no mechanism"):
        privatize_profile(profile, {"name": per_attr["name"]}, rng)
    with pytest.raises(ValidationError, match="outside"):
        privatize_profile(profile, uniform_mechanism(binary), rng)


def test_privatize_profile_uniform_randomizes():
    names = Alphabet(("Tom", "Mary"))
    profile = Profile.from_mapping({"name": "Tom"})
    rng = np.random.default_rng(2)
    outcomes = {
        privatize_profile(profile, {"name": uniform_mechanism(names)}, rng).as_dict()["name"]
        for _ in range(50)
    }
    assert outcomes == {"Tom", "Mary"}
