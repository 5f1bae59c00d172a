"""Plug-in estimation of the fairness metrics from sampled traces.

Estimates are computed from the empirical (x, a, u) counts with optional
additive smoothing (0.5 per cell by default, which keeps finite-sample
ratios finite).  Confidence intervals are seeded percentile bootstraps
over trace resamples.  With smoothing 0, individual bootstrap resamples
may empty a conditioning cell; the ratio conventions then apply and the
interval can become infinite, which is reported as-is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ValidationError
from .metrics import log_ratio_supremum, _max_pairwise_tv
from .model import Trace
from .utility import UtilityTable

METRIC_NAMES = ("local", "global", "demographic_parity", "equalized_odds")


@dataclass(frozen=True)
class EstimateWithCI:
    point: float
    ci_low: float
    ci_high: float
    n_samples: int
    method: str  # "plugin" or "plugin_smoothed"

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError(f"n_samples must be >= 1, got {self.n_samples}")
        if not (self.ci_low <= self.point <= self.ci_high):
            raise ValidationError(
                f"interval [{self.ci_low}, {self.ci_high}] does not contain {self.point}"
            )


def metrics_from_cube(cube: np.ndarray, g_values: np.ndarray) -> dict[str, float]:
    """The four fairness metrics of the empirical world defined by a count cube.

    ``cube`` holds (possibly smoothed) counts n[x, a, u]; ``g_values`` is the
    utility array indexed [u, x, a].  The empirical joint of (X, A) is the
    normalised cell mass, so dependent empirical frequencies are handled.
    """
    cell = cube.sum(axis=2)
    safe_cell = np.where(cell > 0, cell, 1.0)
    p = cube / safe_cell[:, :, None]

    total = cell.sum()
    joint = cell / total
    prior_a = joint.sum(axis=0)
    safe_pa = np.where(prior_a > 0, prior_a, 1.0)
    x_given_a = joint / safe_pa[None, :]  # column a: P(x | a)

    cond = np.einsum("xau,uxa->xa", p, g_values)
    local, _ = log_ratio_supremum(cond)

    marg = np.einsum("xa,xa->a", x_given_a, cond)
    glob, _ = log_ratio_supremum(marg[None, :])

    law = np.einsum("xa,xau->au", x_given_a, p)
    l_dp = _max_pairwise_tv(law)

    l_eo = max(_max_pairwise_tv(p[xi]) for xi in range(cube.shape[0]))

    return {
        "local": local,
        "global": glob,
        "demographic_parity": l_dp,
        "equalized_odds": l_eo,
    }


def _percentile_pair(samples: np.ndarray, alpha: float) -> tuple[float, float]:
    # "nearest" avoids interpolation arithmetic, which would produce NaN
    # when both neighbours are infinite.
    lo = float(np.percentile(samples, 100 * alpha / 2, method="nearest"))
    hi = float(np.percentile(samples, 100 * (1 - alpha / 2), method="nearest"))
    return lo, hi


def estimate_metrics(
    trace: Trace,
    g: UtilityTable,
    smoothing: float = 0.5,
    n_boot: int = 1000,
    seed: int = 0,
    alpha: float = 0.05,
) -> dict[str, EstimateWithCI]:
    """Plug-in fairness estimates with percentile-bootstrap confidence intervals.

    Raises :class:`InsufficientDataError` when ``smoothing`` is 0 and some
    (x, a) conditioning cell received no samples.
    """
    if smoothing < 0:
        raise ValidationError(f"smoothing must be >= 0, got {smoothing}")
    if (
        g.u_alphabet != trace.u_alphabet
        or g.x_alphabet != trace.x_alphabet
        or g.a_alphabet != trace.a_alphabet
    ):
        raise ValidationError("utility table alphabets do not match the trace")
    n = len(trace)
    cube = trace.counts_cube()

    if smoothing == 0.0:
        cell = cube.sum(axis=2)
        if np.any(cell == 0):
            xi, ai = np.argwhere(cell == 0)[0]
            raise InsufficientDataError(
                f"no samples for cell (x={trace.x_alphabet.labels[xi]!r}, "
                f"a={trace.a_alphabet.labels[ai]!r}); use smoothing > 0 or sample more"
            )

    method = "plugin_smoothed" if smoothing > 0 else "plugin"
    point = metrics_from_cube(cube + smoothing, g.values)

    rng = np.random.default_rng(seed)
    probs = (cube / n).reshape(-1)
    boot = {name: np.empty(n_boot) for name in METRIC_NAMES}
    for b in range(n_boot):
        resampled = rng.multinomial(n, probs).reshape(cube.shape).astype(float)
        values = metrics_from_cube(resampled + smoothing, g.values)
        for name in METRIC_NAMES:
            boot[name][b] = values[name]

    out = {}
    for name in METRIC_NAMES:
        lo, hi = _percentile_pair(boot[name], alpha)
        p = point[name]
        # percentile intervals can exclude a boundary point estimate
        # (e.g. an infinite plug-in value); widen so they always cover it
        lo, hi = min(lo, p), max(hi, p)
        out[name] = EstimateWithCI(p, lo, hi, n, method)
    return out
