"""Task assignment: privatised profiles plus candidate routes into an engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engines import (
    CandidateRoute,
    EngineDecision,
    EngineRequest,
    Profile,
    privatize_profile,
)
from ..errors import EngineError, ValidationError
from .planner import PathPlan


def routes_from_plans(plans) -> tuple[CandidateRoute, ...]:
    out = []
    for i, plan in enumerate(plans):
        if isinstance(plan, CandidateRoute):
            out.append(plan)
            continue
        if not isinstance(plan, PathPlan):
            raise ValidationError(f"candidate {i} is neither a PathPlan nor a CandidateRoute")
        cid = plan.destination if plan.destination is not None else f"dest{i}"
        out.append(
            CandidateRoute(cid, plan.cost, f"route length {plan.cost:.1f} cells to {cid}")
        )
    return tuple(out)


@dataclass(frozen=True)
class AssignmentRecord:
    """Audit record of one assignment: raw and privatised views plus the decision."""

    chosen: str
    decision: EngineDecision
    raw_profiles: tuple[Profile, ...]
    privatized_profiles: tuple[Profile, ...]
    context: str | None
    seed: int


def assign_task(
    candidates,
    profiles,
    engine,
    mechanisms=None,
    seed: int = 0,
    scenario: str = "hr_delivery",
    context: str | None = None,
) -> AssignmentRecord:
    """Privatise the profiles, ask the engine, and return the audited choice.

    Deterministic for a fixed seed and a deterministic engine; engine
    failures are re-raised as :class:`EngineError` carrying the request.
    """
    routes = routes_from_plans(candidates)
    profiles = tuple(profiles)
    if len(profiles) != len(routes):
        raise ValidationError(
            f"{len(profiles)} profiles for {len(routes)} candidate routes"
        )
    rng = np.random.default_rng(seed)
    privatized = tuple(privatize_profile(p, mechanisms, rng) for p in profiles)
    request = EngineRequest(
        scenario=scenario, candidates=routes, profiles=privatized, context=context
    )
    try:
        decision = engine.decide(request, rng)
    except EngineError:
        raise
    except Exception as exc:
        raise EngineError(f"engine failed: {exc}", request=request) from exc
    if decision.chosen not in request.candidate_ids:
        raise EngineError(
            f"engine chose {decision.chosen!r}, not one of {request.candidate_ids}",
            request=request,
        )
    return AssignmentRecord(
        chosen=decision.chosen,
        decision=decision,
        raw_profiles=profiles,
        privatized_profiles=privatized,
        context=context,
        seed=seed,
    )
