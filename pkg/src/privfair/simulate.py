"""Scenario simulation: seeded trials, pick-frequency estimates, trace files."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EngineError, ValidationError
from .estimate import EstimateWithCI, _percentile_pair
from .metrics import log_ratio_supremum
from .nav.assign import AssignmentRecord, assign_task
from .scenario import Scenario


@dataclass(frozen=True)
class TrialResult:
    index: int
    context: str
    record: AssignmentRecord | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.record is not None


def run_trials(
    scenario: Scenario,
    engine,
    trials: int,
    seed: int = 0,
    epsilon: float | None = None,
    max_in_flight: int | None = None,
) -> list[TrialResult]:
    """Run seeded assignment trials; engine failures are recorded, not raised.

    Contexts are drawn uniformly from an upfront stream; each trial then runs
    with its own derived seed, so results do not depend on execution order.
    The in-flight cap (explicit, or the engine's configured one) bounds
    concurrency when trials are parallelised.
    """
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    ctx_rng = np.random.default_rng(seed)
    contexts = [
        scenario.contexts[int(ctx_rng.integers(len(scenario.contexts)))]
        for _ in range(trials)
    ]
    mechanisms = scenario.mechanisms(epsilon)
    routes = scenario.candidate_routes()
    profiles = scenario.profile_list

    cap = max_in_flight
    if cap is None:
        cap = getattr(getattr(engine, "config", None), "max_in_flight", 1)

    def run_one(i: int) -> TrialResult:
        try:
            record = assign_task(
                routes,
                profiles,
                engine,
                mechanisms=mechanisms,
                seed=seed + 1 + i,
                scenario=scenario.kind,
                context=contexts[i],
            )
            return TrialResult(i, contexts[i], record)
        except EngineError as exc:
            return TrialResult(i, contexts[i], None, error=str(exc))

    if cap > 1:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            return list(pool.map(run_one, range(trials)))
    return [run_one(i) for i in range(trials)]


def estimate_from_picks(
    x_idx: np.ndarray,
    u_idx: np.ndarray,
    nx: int,
    nu: int,
    smoothing: float = 0.5,
    n_boot: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
) -> dict[str, EstimateWithCI]:
    """Fairness of pick frequencies, local per context and marginalised.

    The utility here is the task-burden indicator (the chosen candidate
    carries the burden), so the metric reduces to log ratios of selection
    probabilities, per context and overall.
    """
    n = len(u_idx)
    if n == 0:
        raise ValidationError("cannot estimate from an empty trial set")
    counts = np.bincount(
        np.asarray(x_idx) * nu + np.asarray(u_idx), minlength=nx * nu
    ).reshape(nx, nu).astype(float)

    def both(c: np.ndarray) -> tuple[float, float]:
        c = c + smoothing
        rows = c.sum(axis=1)
        safe = np.where(rows > 0, rows, 1.0)
        p_u_given_x = c / safe[:, None]
        local, _ = log_ratio_supremum(p_u_given_x)
        p_x = rows / rows.sum()
        p_u = p_x @ p_u_given_x
        glob, _ = log_ratio_supremum(p_u[None, :])
        return local, glob

    point_local, point_global = both(counts)
    rng = np.random.default_rng(seed)
    probs = (counts / n).reshape(-1)
    boot_local, boot_global = np.empty(n_boot), np.empty(n_boot)
    for b in range(n_boot):
        res = rng.multinomial(n, probs).reshape(nx, nu).astype(float)
        boot_local[b], boot_global[b] = both(res)

    method = "plugin_smoothed" if smoothing > 0 else "plugin"
    out = {}
    for name, point, boot in (
        ("local", point_local, boot_local),
        ("global", point_global, boot_global),
    ):
        lo, hi = _percentile_pair(boot, alpha)
        lo, hi = min(lo, point), max(hi, point)
        out[name] = EstimateWithCI(point, lo, hi, n, method)
    return out


def summarize_trials(
    scenario: Scenario,
    results: list[TrialResult],
    smoothing: float = 0.5,
    n_boot: int = 1000,
    seed: int = 0,
) -> dict:
    """Pick frequencies plus estimated local/global fairness with CIs."""
    complete = [r for r in results if r.ok]
    if not complete:
        raise ValidationError("no trial completed; cannot summarise")
    ids = scenario.candidate_ids
    ctx_index = {c: i for i, c in enumerate(scenario.contexts)}
    id_index = {cid: i for i, cid in enumerate(ids)}
    x_idx = np.array([ctx_index[r.context] for r in complete])
    u_idx = np.array([id_index[r.record.chosen] for r in complete])

    frequencies = {
        cid: float((u_idx == i).mean()) for i, cid in enumerate(ids)
    }
    estimates = estimate_from_picks(
        x_idx,
        u_idx,
        nx=len(scenario.contexts),
        nu=len(ids),
        smoothing=smoothing,
        n_boot=n_boot,
        seed=seed,
    )
    return {
        "n_trials": len(results),
        "n_complete": len(complete),
        "n_failed": len(results) - len(complete),
        "pick_frequencies": frequencies,
        "local": _estimate_dict(estimates["local"]),
        "global": _estimate_dict(estimates["global"]),
    }


def _estimate_dict(est: EstimateWithCI) -> dict:
    def num(v: float):
        return "inf" if math.isinf(v) else v

    return {
        "point": num(est.point),
        "ci_low": num(est.ci_low),
        "ci_high": num(est.ci_high),
        "n_samples": est.n_samples,
        "method": est.method,
    }


def trace_document(
    scenario: Scenario,
    results: list[TrialResult],
    seed: int,
    epsilon: float | None,
    summary: dict,
) -> dict:
    """Trace file contents: per-trial raw/privatised views plus the summary."""
    trials = []
    for r in results:
        entry: dict = {"index": r.index, "context": r.context}
        if r.ok:
            rec = r.record
            entry.update(
                raw={cid: p.as_dict() for cid, p in zip(scenario.candidate_ids, rec.raw_profiles)},
                privatized={
                    cid: p.as_dict()
                    for cid, p in zip(scenario.candidate_ids, rec.privatized_profiles)
                },
                chosen=rec.chosen,
                scores=rec.decision.scores,
                reason=rec.decision.reason,
            )
        else:
            entry["error"] = r.error
        trials.append(entry)
    return {
        "version": 1,
        "scenario": scenario.kind,
        "seed": seed,
        "epsilon": epsilon,
        "epsilon_composed": scenario.composed_epsilon(epsilon),
        "candidates": list(scenario.candidate_ids),
        "contexts": list(scenario.contexts),
        "trials": trials,
        "summary": summary,
    }


def summary_from_trace(doc: dict, smoothing: float = 0.5, n_boot: int = 1000, seed: int | None = None) -> dict:
    """Recompute the summary of a written trace (round-trip check)."""
    ids = list(doc["candidates"])
    contexts = list(doc["contexts"])
    ctx_index = {c: i for i, c in enumerate(contexts)}
    id_index = {cid: i for i, cid in enumerate(ids)}
    complete = [t for t in doc["trials"] if "chosen" in t]
    if not complete:
        raise ValidationError("trace contains no completed trials")
    x_idx = np.array([ctx_index[t["context"]] for t in complete])
    u_idx = np.array([id_index[t["chosen"]] for t in complete])
    frequencies = {cid: float((u_idx == i).mean()) for i, cid in enumerate(ids)}
    estimates = estimate_from_picks(
        x_idx,
        u_idx,
        nx=len(contexts),
        nu=len(ids),
        smoothing=smoothing,
        n_boot=n_boot,
        seed=doc["seed"] if seed is None else seed,
    )
    return {
        "n_trials": len(doc["trials"]),
        "n_complete": len(complete),
        "n_failed": len(doc["trials"]) - len(complete),
        "pick_frequencies": frequencies,
        "local": _estimate_dict(estimates["local"]),
        "global": _estimate_dict(estimates["global"]),
    }


def simulate_scenario(
    scenario: Scenario,
    engine,
    trials: int,
    seed: int = 0,
    epsilon: float | None = None,
    smoothing: float = 0.5,
    n_boot: int = 1000,
    out_path=None,
    max_in_flight: int | None = None,
) -> dict:
    """End-to-end scenario run; optionally writes the JSON trace file."""
    results = run_trials(
        scenario, engine, trials, seed=seed, epsilon=epsilon, max_in_flight=max_in_flight
    )
    summary = summarize_trials(
        scenario, results, smoothing=smoothing, n_boot=n_boot, seed=seed
    )
    doc = trace_document(scenario, results, seed, epsilon, summary)
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return doc
