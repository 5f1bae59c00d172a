"""Scenario files: profiles, attribute alphabets, routes and engine presets.

Scenarios are TOML documents with an explicit ``version = 1`` marker.  A
scenario fixes the two candidate profiles, the per-attribute alphabets the
privacy mechanisms act on, the context values a trial can draw, and equal
route costs for the candidates.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .engines import (
    CandidateRoute,
    Profile,
    SyntheticBiasedEngine,
    TabularEngine,
    default_hr_weights,
)
from .errors import ScenarioError
from .mechanisms import MechanismMatrix, randomized_response
from .model import Alphabet, DecisionPolicy

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Scenario:
    kind: str
    contexts: tuple[str, ...]
    attributes: dict[str, Alphabet]
    profiles: tuple[tuple[str, Profile], ...]
    routes: dict[str, float]
    synthetic_weights: dict[str, float] | None = None
    tabular_policy: list | None = None

    def __post_init__(self):
        if self.kind not in ("hr_delivery", "package_delivery"):
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if not self.contexts:
            raise ScenarioError("scenario needs at least one context value")
        if len(self.profiles) != 2:
            raise ScenarioError(
                f"scenario needs exactly 2 profiles, got {len(self.profiles)}"
            )
        ids = [cid for cid, _ in self.profiles]
        if len(set(ids)) != 2:
            raise ScenarioError(f"profile ids must be distinct, got {ids}")
        for cid, profile in self.profiles:
            for key, label in profile.attributes:
                if key not in self.attributes:
                    raise ScenarioError(
                        f"profile {cid!r} uses undeclared attribute {key!r}"
                    )
                if label not in self.attributes[key].labels:
                    raise ScenarioError(
                        f"profile {cid!r} attribute {key!r} has label {label!r} "
                        f"outside its alphabet {self.attributes[key].labels}"
                    )
        if set(self.routes) != set(ids):
            raise ScenarioError(
                f"route ids {sorted(self.routes)} do not match profile ids {sorted(ids)}"
            )
        for cid, cost in self.routes.items():
            if cost < 0:
                raise ScenarioError(f"route cost for {cid!r} must be >= 0, got {cost}")

    @property
    def candidate_ids(self) -> tuple[str, ...]:
        return tuple(cid for cid, _ in self.profiles)

    @property
    def profile_list(self) -> tuple[Profile, ...]:
        return tuple(profile for _, profile in self.profiles)

    @property
    def attribute_count(self) -> int:
        return len(next(iter(self.profile_list)).attributes)

    def candidate_routes(self) -> tuple[CandidateRoute, ...]:
        return tuple(
            CandidateRoute(
                cid,
                self.routes[cid],
                f"route length {self.routes[cid]:.1f} cells to {cid}",
            )
            for cid in self.candidate_ids
        )

    def mechanisms(self, epsilon: float | None) -> dict[str, MechanismMatrix] | None:
        """Per-attribute randomized response at a shared epsilon (None = identity)."""
        if epsilon is None:
            return None
        return {
            name: randomized_response(alphabet, epsilon)
            for name, alphabet in self.attributes.items()
        }

    def composed_epsilon(self, epsilon: float | None) -> float | None:
        """Summed budget when every attribute is privatised independently."""
        if epsilon is None:
            return None
        return epsilon * self.attribute_count

    def make_engine(self, name: str):
        if name == "synthetic":
            weights = self.synthetic_weights
            if weights is None:
                raise ScenarioError(
                    "scenario declares no [engine.synthetic] weight table"
                )
            return SyntheticBiasedEngine(weights)
        if name == "tabular":
            if self.tabular_policy is None:
                raise ScenarioError("scenario declares no [engine.tabular] policy")
            u = Alphabet(self.candidate_ids)
            x = Alphabet(self.contexts)
            a = Alphabet(("anyone",))
            table = np.asarray(self.tabular_policy, dtype=float)
            if table.ndim == 2:  # rows per context, no sensitive axis
                table = table[:, None, :]
            return TabularEngine(DecisionPolicy(u, x, a, table), sensitive="anyone")
        raise ScenarioError(f"unknown engine {name!r}; use 'synthetic' or 'tabular'")


def scenario_from_dict(data: dict) -> Scenario:
    version = data.get("version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported scenario version {version!r}, expected {SCHEMA_VERSION}"
        )
    for key in ("kind", "contexts", "attributes", "profiles", "routes"):
        if key not in data:
            raise ScenarioError(f"scenario file is missing required key {key!r}")
    try:
        attributes = {
            name: Alphabet(tuple(labels)) for name, labels in data["attributes"].items()
        }
    except AttributeError:
        raise ScenarioError("'attributes' must be a table of label lists") from None
    profiles = []
    for entry in data["profiles"]:
        if "id" not in entry:
            raise ScenarioError(f"profile entry has no 'id': {entry!r}")
        cid = str(entry["id"])
        attrs = {k: str(v) for k, v in entry.items() if k != "id"}
        if not attrs:
            raise ScenarioError(f"profile {cid!r} declares no attributes")
        profiles.append((cid, Profile.from_mapping(attrs)))
    engine = data.get("engine", {})
    weights = engine.get("synthetic")
    policy = engine.get("tabular", {}).get("policy") if "tabular" in engine else None
    return Scenario(
        kind=str(data["kind"]),
        contexts=tuple(str(c) for c in data["contexts"]),
        attributes=attributes,
        profiles=tuple(profiles),
        routes={str(k): float(v) for k, v in data["routes"].items()},
        synthetic_weights=None if weights is None else {str(k): float(v) for k, v in weights.items()},
        tabular_policy=policy,
    )


def load_scenario(path) -> Scenario:
    with open(path, "rb") as fh:
        try:
            data = _toml.load(fh)
        except _toml.TOMLDecodeError as exc:
            raise ScenarioError(f"scenario file is not valid TOML: {exc}") from exc
    return scenario_from_dict(data)


def builtin_hr_scenario() -> Scenario:
    """Document delivery between two HR staff members with sensitive profiles."""
    return Scenario(
        kind="hr_delivery",
        contexts=("maternity leave", "holiday leave", "sick leave"),
        attributes={
            "name": Alphabet(("Tom", "Mary")),
            "age": Alphabet(("25", "55")),
            "race": Alphabet(("Asian", "American")),
        },
        profiles=(
            ("HR1", Profile.from_mapping({"name": "Tom", "age": "25", "race": "Asian"})),
            ("HR2", Profile.from_mapping({"name": "Mary", "age": "55", "race": "American"})),
        ),
        routes={"HR1": 14.0, "HR2": 14.0},
        synthetic_weights=default_hr_weights(),
    )


def builtin_package_scenario() -> Scenario:
    """Package delivery ordering between two recipients with complaint-rate profiles."""
    return Scenario(
        kind="package_delivery",
        contexts=("standard parcel",),
        attributes={"complaint_rate": Alphabet(("low", "high"))},
        profiles=(
            ("Recipient1", Profile.from_mapping({"complaint_rate": "low"})),
            ("Recipient2", Profile.from_mapping({"complaint_rate": "high"})),
        ),
        routes={"Recipient1": 12.0, "Recipient2": 12.0},
        synthetic_weights={"low": 1.5, "high": 0.0},
        tabular_policy=[[0.5, 0.5]],
    )


def scenario_to_toml(scenario: Scenario) -> str:
    """Serialise a scenario back to its file format."""

    def q(s: str) -> str:
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = [f"version = {SCHEMA_VERSION}", f"kind = {q(scenario.kind)}", ""]
    lines.append("contexts = [" + ", ".join(q(c) for c in scenario.contexts) + "]")
    lines.append("")
    lines.append("[attributes]")
    for name, alphabet in scenario.attributes.items():
        lines.append(f"{q(name)} = [" + ", ".join(q(l) for l in alphabet.labels) + "]")
    for cid, profile in scenario.profiles:
        lines.append("")
        lines.append("[[profiles]]")
        lines.append(f"id = {q(cid)}")
        for key, value in profile.attributes:
            lines.append(f"{q(key)} = {q(value)}")
    lines.append("")
    lines.append("[routes]")
    for cid, cost in scenario.routes.items():
        lines.append(f"{q(cid)} = {cost!r}")
    if scenario.synthetic_weights is not None:
        lines.append("")
        lines.append("[engine.synthetic]")
        for label, weight in scenario.synthetic_weights.items():
            lines.append(f"{q(label)} = {weight!r}")
    if scenario.tabular_policy is not None:
        lines.append("")
        lines.append("[engine.tabular]")
        lines.append(f"policy = {scenario.tabular_policy!r}")
    return "\n".join(lines) + "\n"
