"""Machine-checkable certificates tying privacy budgets to fairness bounds.

Given a world, a utility, a metric on the sensitive alphabet and the
mechanisms actually deployed, :func:`certify` composes the pipeline,
measures the local and global fairness of the result and evaluates the
guarantee

    global <= local <= epsilon + log(1 + (L_A * diam(A) + delta * gamma) / tau)

where L_A is the utility's Lipschitz constant in its group argument,
gamma a uniform upper bound on the utility and tau a positive floor on
the *composed* pipeline's conditional expected utilities.  The floor is
taken on the composed pipeline because the guarantee divides by the
conditional expectations of the very system being measured; the raw
table's floor is additionally reported for diagnostics but would be
unsound as the divisor (a mixing mechanism can push conditional
expectations below it when the utility varies with its arguments).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FloorViolationError, HypothesisViolationError, ValidationError
from .mechanisms import (
    DP_ATOL,
    MechanismMatrix,
    PrivacyBudget,
    tightest_delta,
    tightest_epsilon,
)
from .metrics import FairnessValue, local_g_fairness, global_g_fairness
from .model import (
    Alphabet,
    DecisionPolicy,
    Prior,
    TabularWorld,
    compose_mechanisms,
    conditional_utility_matrix,
)
from .utility import UtilityTable

CERT_ATOL = 1e-9


@dataclass(frozen=True)
class AttributeMetric:
    """A metric d on the sensitive alphabet: discrete or an explicit matrix."""

    kind: str = "discrete"
    distances: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("discrete", "explicit"):
            raise ValidationError(f"metric kind must be 'discrete' or 'explicit', got {self.kind!r}")
        if self.kind == "explicit":
            if self.distances is None:
                raise ValidationError("explicit metric requires a distance matrix")
            d = np.array(self.distances, dtype=float)
            if d.ndim != 2 or d.shape[0] != d.shape[1]:
                raise ValidationError(f"distance matrix must be square, got shape {d.shape}")
            if np.any(np.abs(np.diag(d)) > 0):
                raise ValidationError("distance matrix must have a zero diagonal")
            if np.any(d != d.T):
                raise ValidationError("distance matrix must be symmetric")
            off = ~np.eye(d.shape[0], dtype=bool)
            if np.any(d[off] <= 0):
                raise ValidationError("off-diagonal distances must be positive")
            k = d.shape[0]
            for m in range(k):
                if np.any(d > d[:, m][:, None] + d[m, :][None, :] + 1e-12):
                    raise ValidationError(
                        f"distance matrix violates the triangle inequality through index {m}"
                    )
            d.setflags(write=False)
            object.__setattr__(self, "distances", d)
        elif self.distances is not None:
            raise ValidationError("discrete metric does not take a distance matrix")

    def matrix(self, alphabet: Alphabet) -> np.ndarray:
        if self.kind == "discrete":
            return 1.0 - np.eye(alphabet.size)
        if self.distances.shape[0] != alphabet.size:
            raise ValidationError(
                f"distance matrix is {self.distances.shape[0]}x{self.distances.shape[0]}, "
                f"alphabet has {alphabet.size} labels"
            )
        return self.distances


def lipschitz_constant(g: UtilityTable, metric: AttributeMetric) -> float:
    """Largest |g(u,x,a) - g(u,x,a')| / d(a,a') over the finite grid."""
    d = metric.matrix(g.a_alphabet)
    diffs = np.abs(g.values[:, :, :, None] - g.values[:, :, None, :])
    off = d > 0
    if not off.any():
        return 0.0
    ratios = diffs[:, :, off] / d[off]
    return float(ratios.max())


def diameter(metric: AttributeMetric, alphabet: Alphabet) -> float:
    """Largest pairwise distance on the alphabet."""
    if alphabet.size < 2:
        raise ValidationError(
            f"diameter needs at least two labels, got alphabet {alphabet.labels}"
        )
    return float(metric.matrix(alphabet).max())


@dataclass(frozen=True)
class BoundConstants:
    lipschitz_la: float
    diameter: float
    gamma: float
    tau: float

    def __post_init__(self):
        if self.lipschitz_la < 0:
            raise ValidationError(f"Lipschitz constant must be >= 0, got {self.lipschitz_la}")
        if self.diameter <= 0:
            raise ValidationError(f"diameter must be > 0, got {self.diameter}")
        if not 0 < self.tau <= self.gamma + 1e-12:
            raise ValidationError(
                f"need 0 < tau <= gamma, got tau={self.tau}, gamma={self.gamma}"
            )


def _require_product_prior(world: TabularWorld) -> None:
    if not world.is_product_prior():
        raise HypothesisViolationError(
            "the guarantee assumes X and A are independent, but the world's "
            "joint_xa is not the product of its priors"
        )


def bound_constants(
    world: TabularWorld, g: UtilityTable, metric: AttributeMetric
) -> BoundConstants:
    """Constants (L_A, diam, gamma, tau) for the given world's own table.

    tau is the smallest conditional expected utility of this world; pass the
    composed world to obtain the floor the guarantee actually divides by.
    """
    _require_product_prior(world)
    cond = conditional_utility_matrix(world, g)
    if np.any(cond <= 0):
        xi, ai = np.argwhere(cond <= 0)[0]
        raise FloorViolationError(
            "conditional expected utility is zero at "
            f"(x={world.x_alphabet.labels[xi]!r}, a={world.a_alphabet.labels[ai]!r}); "
            "the guarantee requires a positive floor"
        )
    return BoundConstants(
        lipschitz_la=lipschitz_constant(g, metric),
        diameter=diameter(metric, world.a_alphabet),
        gamma=g.max_value,
        tau=float(cond.min()),
    )


def theorem_bound(budget: PrivacyBudget, constants: BoundConstants) -> float:
    """epsilon + log(1 + (L_A * diam + delta * gamma) / tau)."""
    slack = (constants.lipschitz_la * constants.diameter + budget.delta * constants.gamma)
    return budget.epsilon + math.log1p(slack / constants.tau)


@dataclass(frozen=True)
class Certificate:
    local_value: FairnessValue
    global_value: FairnessValue
    bound: float
    budget: PrivacyBudget
    constants: BoundConstants | None
    theorem: str  # "main_c1", "corollary_c3" or "remark_g_indep"
    holds: bool
    tau_inner: float | None = None
    violated_hypothesis: str | None = None

    def to_dict(self) -> dict:
        def num(v):
            if v is None or (isinstance(v, float) and math.isnan(v)):
                return None
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            return v

        return {
            "l": num(self.local_value.value),
            "l_bar": num(self.global_value.value),
            "bound": num(self.bound),
            "epsilon": num(self.budget.epsilon),
            "delta": self.budget.delta,
            "constants": None
            if self.constants is None
            else {
                "lipschitz_la": self.constants.lipschitz_la,
                "diameter": self.constants.diameter,
                "gamma": self.constants.gamma,
                "tau": self.constants.tau,
                "tau_inner": num(self.tau_inner),
            },
            "theorem": self.theorem,
            "holds": self.holds,
            "violated_hypothesis": self.violated_hypothesis,
        }


def _select_theorem(budget: PrivacyBudget, constants: BoundConstants | None) -> str:
    if constants is not None and constants.lipschitz_la == 0.0:
        return "corollary_c3" if budget.delta == 0.0 else "remark_g_indep"
    return "main_c1"


def certify(
    world: TabularWorld,
    g: UtilityTable,
    metric: AttributeMetric,
    mech_a: MechanismMatrix,
    mech_x: MechanismMatrix | None = None,
    epsilon: float | None = None,
) -> Certificate:
    """Compose the pipeline, measure fairness and evaluate the privacy bound.

    The budget is never taken on trust: epsilon defaults to the mechanism's
    tightest value and delta is always the mechanism's tightest delta at the
    epsilon used.  A zero conditional-utility floor yields a non-holding
    certificate naming the violated hypothesis instead of raising.
    """
    _require_product_prior(world)
    eps = tightest_epsilon(mech_a) if epsilon is None else float(epsilon)
    if eps < 0:
        raise ValidationError(f"epsilon must be >= 0, got {eps}")
    delta = tightest_delta(mech_a, eps)
    if delta <= DP_ATOL:  # rounding noise from an ulp-short tightest epsilon
        delta = 0.0
    budget = PrivacyBudget(epsilon=eps, delta=delta)

    composed = compose_mechanisms(world, mech_a=mech_a, mech_x=mech_x)
    l_val = local_g_fairness(composed, g)
    lb_val = global_g_fairness(composed, g)
    inner = float(conditional_utility_matrix(world, g).min())

    try:
        constants = bound_constants(composed, g, metric)
    except FloorViolationError as exc:
        return Certificate(
            local_value=l_val,
            global_value=lb_val,
            bound=math.nan,
            budget=budget,
            constants=None,
            theorem=_select_theorem(budget, None),
            holds=False,
            tau_inner=inner,
            violated_hypothesis=str(exc),
        )

    bound = theorem_bound(budget, constants)
    holds = (
        lb_val.value <= l_val.value + CERT_ATOL
        and l_val.value <= bound + CERT_ATOL
    )
    return Certificate(
        local_value=l_val,
        global_value=lb_val,
        bound=bound,
        budget=budget,
        constants=constants,
        theorem=_select_theorem(budget, constants),
        holds=holds,
        tau_inner=inner,
    )


@dataclass(frozen=True)
class XPrivacyResult:
    l_with: FairnessValue
    l_without: FairnessValue
    non_worsening: bool


def x_privacy_check(
    world: TabularWorld, g: UtilityTable, mech_x: MechanismMatrix
) -> XPrivacyResult:
    """Local fairness with and without randomising the context variable.

    Requires a utility that depends on the decision only; privatising X can
    then only shrink (never grow) the local metric.
    """
    if not g.depends_only_on_u():
        raise HypothesisViolationError(
            "the X-privacy comparison requires a utility depending on the decision only"
        )
    l_without = local_g_fairness(world, g)
    l_with = local_g_fairness(compose_mechanisms(world, mech_x=mech_x), g)
    non_worsening = l_with.value <= l_without.value + CERT_ATOL
    return XPrivacyResult(l_with, l_without, non_worsening)


@dataclass(frozen=True)
class CounterexampleBundle:
    world: TabularWorld
    mech_x: MechanismMatrix
    g: UtilityTable
    expected: dict[str, float]


def counterexample_world() -> CounterexampleBundle:
    """The binary instance where privatising X strictly worsens global fairness.

    All three alphabets are {"0", "1"} with uniform independent priors; the
    decision copies the (privatised) context for group "0" and flips it for
    group "1"; the X mechanism keeps 0 with probability 0.9 and maps 1 to 0
    with probability 0.7.  Without the mechanism the group means are equal
    (global fairness 0); with it they become 0.8 and 0.2, giving log 4.
    """
    binary = Alphabet(("0", "1"))
    table = np.zeros((2, 2, 2))
    for x in (0, 1):
        for a in (0, 1):
            u_one = 1.0 if x == a else 0.0
            table[x, a, 0] = 1.0 - u_one
            table[x, a, 1] = u_one
    world = TabularWorld(
        DecisionPolicy(binary, binary, binary, table),
        Prior.uniform(binary),
        Prior.uniform(binary),
    )
    mech_x = MechanismMatrix(binary, binary, np.array([[0.9, 0.1], [0.7, 0.3]]))
    g = UtilityTable.u_value(world)
    expected = {
        "global_identity": 0.0,
        "global_privatized": math.log(4.0),
        "mechanism_epsilon": math.log(3.0),
        "mean_group_0": 0.8,
        "mean_group_1": 0.2,
    }
    return CounterexampleBundle(world, mech_x, g, expected)
