"""Privacy sweeps: fairness and bounds across an epsilon grid.

Tabular sweeps compose a randomized-response mechanism at each grid value,
compute the exact metrics, a Monte-Carlo estimate with confidence interval
and the certified bound.  Scenario sweeps drive a decision engine through
seeded trials instead; exact columns stay empty and the per-attribute as
well as the summed (composed) epsilon are reported.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields

import numpy as np

from .certificates import AttributeMetric, bound_constants, theorem_bound
from .errors import ValidationError
from .estimate import estimate_metrics
from .mechanisms import PrivacyBudget, randomized_response, tightest_delta
from .metrics import global_g_fairness, local_g_fairness
from .model import TabularWorld, compose_mechanisms, sample_trace
from .scenario import Scenario
from .simulate import estimate_from_picks, run_trials
from .utility import UtilityTable


@dataclass(frozen=True)
class SweepRow:
    epsilon_a: float
    delta_a: float
    l_exact: float | None
    l_bar_exact: float | None
    l_hat: float
    l_hat_ci_low: float
    l_hat_ci_high: float
    l_bar_hat: float
    bound: float | None
    n_samples: int
    epsilon_a_total: float | None = None

    def __post_init__(self):
        if not (self.l_hat_ci_low <= self.l_hat <= self.l_hat_ci_high):
            raise ValidationError(
                f"CI [{self.l_hat_ci_low}, {self.l_hat_ci_high}] "
                f"does not contain {self.l_hat}"
            )


CSV_COLUMNS = tuple(f.name for f in fields(SweepRow))


def _validate_grid(grid) -> list[float]:
    grid = [float(e) for e in grid]
    if not grid:
        raise ValidationError("epsilon grid must be non-empty")
    if any(e < 0 for e in grid):
        raise ValidationError(f"epsilon grid entries must be >= 0, got {grid}")
    if sorted(grid) != grid:
        raise ValidationError(f"epsilon grid must be sorted ascending, got {grid}")
    return grid


def run_sweep_tabular(
    world: TabularWorld,
    g: UtilityTable,
    grid,
    metric: AttributeMetric | None = None,
    samples: int = 50,
    seed: int = 0,
    smoothing: float = 0.5,
    n_boot: int = 1000,
) -> list[SweepRow]:
    grid = _validate_grid(grid)
    if samples < 1:
        raise ValidationError(f"samples must be >= 1, got {samples}")
    metric = metric or AttributeMetric()
    rows = []
    for i, eps in enumerate(grid):
        mech = randomized_response(world.a_alphabet, eps)
        delta = tightest_delta(mech, eps)
        budget = PrivacyBudget(eps, delta)
        composed = compose_mechanisms(world, mech_a=mech)
        l_exact = local_g_fairness(composed, g).value
        l_bar_exact = global_g_fairness(composed, g).value
        constants = bound_constants(composed, g, metric)
        bound = theorem_bound(budget, constants)

        trace = sample_trace(world, mech_a=mech, n=samples, seed=seed + i)
        est = estimate_metrics(
            trace, g, smoothing=smoothing, n_boot=n_boot, seed=seed + i
        )
        rows.append(
            SweepRow(
                epsilon_a=eps,
                delta_a=delta,
                l_exact=l_exact,
                l_bar_exact=l_bar_exact,
                l_hat=est["local"].point,
                l_hat_ci_low=est["local"].ci_low,
                l_hat_ci_high=est["local"].ci_high,
                l_bar_hat=est["global"].point,
                bound=bound,
                n_samples=samples,
                epsilon_a_total=eps,
            )
        )
    return rows


def run_sweep_scenario(
    scenario: Scenario,
    engine,
    grid,
    samples: int = 50,
    seed: int = 0,
    smoothing: float = 0.5,
    n_boot: int = 1000,
    max_in_flight: int | None = None,
) -> list[SweepRow]:
    grid = _validate_grid(grid)
    if samples < 1:
        raise ValidationError(f"samples must be >= 1, got {samples}")
    ids = scenario.candidate_ids
    id_index = {cid: i for i, cid in enumerate(ids)}
    ctx_index = {c: i for i, c in enumerate(scenario.contexts)}
    rows = []
    for i, eps in enumerate(grid):
        results = run_trials(
            scenario,
            engine,
            samples,
            seed=seed + i * (samples + 1),
            epsilon=eps,
            max_in_flight=max_in_flight,
        )
        complete = [r for r in results if r.ok]
        if not complete:
            raise ValidationError(f"no trial completed at epsilon={eps}")
        x_idx = np.array([ctx_index[r.context] for r in complete])
        u_idx = np.array([id_index[r.record.chosen] for r in complete])
        est = estimate_from_picks(
            x_idx,
            u_idx,
            nx=len(scenario.contexts),
            nu=len(ids),
            smoothing=smoothing,
            n_boot=n_boot,
            seed=seed + i,
        )
        rows.append(
            SweepRow(
                epsilon_a=eps,
                delta_a=0.0,
                l_exact=None,
                l_bar_exact=None,
                l_hat=est["local"].point,
                l_hat_ci_low=est["local"].ci_low,
                l_hat_ci_high=est["local"].ci_high,
                l_bar_hat=est["global"].point,
                bound=None,
                n_samples=len(complete),
                epsilon_a_total=scenario.composed_epsilon(eps),
            )
        )
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[SweepRow]) -> str:
    """Byte-stable CSV: fixed column order, shortest round-trip floats."""
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_cell(getattr(row, name)) for name in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def rows_to_json(rows: list[SweepRow]) -> str:
    def jsonable(value):
        if isinstance(value, float) and math.isinf(value):
            return "inf"
        if isinstance(value, float) and math.isnan(value):
            return None
        return value

    payload = [
        {name: jsonable(getattr(row, name)) for name in CSV_COLUMNS} for row in rows
    ]
    return json.dumps(payload, indent=2) + "\n"


def write_rows(rows: list[SweepRow], path, fmt: str = "csv") -> None:
    if fmt not in ("csv", "json"):
        raise ValidationError(f"format must be 'csv' or 'json', got {fmt!r}")
    text = rows_to_csv(rows) if fmt == "csv" else rows_to_json(rows)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
