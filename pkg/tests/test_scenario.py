import numpy as np
import pytest

from privfair import ScenarioError
from privfair.errors import EngineError
from privfair.scenario import (
    builtin_hr_scenario,
    builtin_package_scenario,
    load_scenario,
    scenario_from_dict,
    scenario_to_toml,
)
from privfair.simulate import (
    run_trials,
    simulate_scenario,
    summarize_trials,
    summary_from_trace,
)


def test_builtin_scenarios_roundtrip_through_toml(tmp_path):
    for scenario in (builtin_hr_scenario(), builtin_package_scenario()):
        path = tmp_path / "s.toml"
        path.write_text(scenario_to_toml(scenario))
        loaded = load_scenario(path)
        assert loaded == scenario


def test_scenario_validation_errors():
    base = {
        "version": 1,
        "kind": "hr_delivery",
        "contexts": ["doc"],
        "attributes": {"name": ["Tom", "Mary"]},
        "profiles": [
            {"id": "HR1", "name": "Tom"},
            {"id": "HR2", "name": "Mary"},
        ],
        "routes": {"HR1": 1.0, "HR2": 1.0},
    }
    scenario_from_dict(base)  # sanity: the base document is valid

    with pytest.raises(ScenarioError, match="version"):
        scenario_from_dict({**base, "version": 2})
    with pytest.raises(ScenarioError, match="missing required key"):
        scenario_from_dict({k: v for k, v in base.items() if k != "routes"})
    with pytest.raises(ScenarioError, match="outside its alphabet"):
        scenario_from_dict(
            {**base, "profiles": [{"id": "HR1", "name": "Bob"}, {"id": "HR2", "name": "Mary"}]}
        )
    with pytest.raises(ScenarioError, match="route ids"):
        scenario_from_dict({**base, "routes": {"HR1": 1.0, "Other": 1.0}})
    with pytest.raises(ScenarioError, match="exactly 2"):
        scenario_from_dict({**base, "profiles": base["profiles"][:1]})
    with pytest.raises(ScenarioError, match="undeclared attribute"):
        scenario_from_dict(
            {
                **base,
                "profiles": [
                    {"id": "HR1", "name": "Tom", "rank": "boss"},
                    {"id": "HR2", "name": "Mary"},
                ],
            }
        )


def test_scenario_file_error_is_wrapped(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("version = ???")
    with pytest.raises(ScenarioError, match="not valid TOML"):
        load_scenario(path)


def test_mechanisms_and_composed_epsilon():
    scenario = builtin_hr_scenario()
    mechs = scenario.mechanisms(1.0)
    assert set(mechs) == {"name", "age", "race"}
    assert mechs["name"].rows[0, 0] == pytest.approx(np.e / (np.e + 1))
    assert scenario.mechanisms(None) is None
    assert scenario.composed_epsilon(1.0) == pytest.approx(3.0)
    assert scenario.composed_epsilon(None) is None


def test_make_engine_variants():
    hr = builtin_hr_scenario()
    engine = hr.make_engine("synthetic")
    assert engine.weights["Mary"] > engine.weights["Tom"]
    with pytest.raises(ScenarioError):
        hr.make_engine("tabular")  # no policy declared
    pkg = builtin_package_scenario()
    tab = pkg.make_engine("tabular")
    assert tab.policy.table.shape == (1, 1, 2)
    with pytest.raises(ScenarioError):
        pkg.make_engine("nonsense")


def test_run_trials_deterministic():
    scenario = builtin_hr_scenario()
    engine = scenario.make_engine("synthetic")
    a = run_trials(scenario, engine, trials=40, seed=3, epsilon=0.5)
    b = run_trials(scenario, engine, trials=40, seed=3, epsilon=0.5)
    assert [r.record.chosen for r in a] == [r.record.chosen for r in b]
    assert [r.context for r in a] == [r.context for r in b]


class FlakyEngine:
    """Fails on every third trial (by profile hash of the rng draw)."""

    def __init__(self):
        self.calls = 0
        self.lock = None

    def decide(self, request, rng):
        self.calls += 1
        if self.calls % 3 == 0:
            raise RuntimeError("transient engine failure")
        from privfair.engines import one_hot_decision

        return one_hot_decision(request.candidate_ids, request.candidate_ids[0], "ok")


def test_run_trials_records_failures():
    scenario = builtin_hr_scenario()
    results = run_trials(scenario, FlakyEngine(), trials=9, seed=0)
    failed = [r for r in results if not r.ok]
    assert len(failed) == 3
    assert all("engine failed" in r.error for r in failed)
    summary = summarize_trials(scenario, results, n_boot=20)
    assert summary["n_failed"] == 3
    assert summary["n_complete"] == 6


def test_simulate_trace_roundtrip(tmp_path):
    scenario = builtin_package_scenario()
    engine = scenario.make_engine("tabular")
    out = tmp_path / "trace.json"
    doc = simulate_scenario(
        scenario, engine, trials=60, seed=5, epsilon=1.0, n_boot=100, out_path=out
    )
    assert out.exists()
    import json

    stored = json.loads(out.read_text())
    recomputed = summary_from_trace(stored, n_boot=100)
    assert recomputed == doc["summary"]
    assert stored["epsilon_composed"] == pytest.approx(1.0)  # single attribute


def test_package_tabular_engine_is_symmetric():
    scenario = builtin_package_scenario()
    engine = scenario.make_engine("tabular")
    results = run_trials(scenario, engine, trials=100, seed=11)
    first = sum(r.record.chosen == "Recipient1" for r in results) / 100
    assert abs(first - 0.5) <= 0.1
