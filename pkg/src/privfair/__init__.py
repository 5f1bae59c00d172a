"""privfair: fairness certification for privatised decision pipelines.

Exact utility-aware fairness metrics over finite-alphabet decision models,
randomized-response mechanisms with tight (epsilon, delta) verification,
machine-checkable privacy-to-fairness certificates, Monte-Carlo estimation,
and a grid-map navigation harness with pluggable decision engines.
"""

from .certificates import (
    AttributeMetric,
    BoundConstants,
    Certificate,
    bound_constants,
    certify,
    counterexample_world,
    diameter,
    lipschitz_constant,
    theorem_bound,
    x_privacy_check,
)
from .engines import (
    CandidateRoute,
    EngineDecision,
    EngineRequest,
    Profile,
    SyntheticBiasedEngine,
    TabularEngine,
    build_prompt,
    default_hr_weights,
    parse_decision,
    privatize_profile,
)
from .errors import (
    EngineError,
    EngineNetworkError,
    FloorViolationError,
    HypothesisViolationError,
    InsufficientDataError,
    LabelError,
    PrivfairError,
    ProtocolError,
    ScenarioError,
    UndefinedConditionalError,
    ValidationError,
)
from .estimate import EstimateWithCI, estimate_metrics, metrics_from_cube
from .mechanisms import (
    DPVerdict,
    MechanismMatrix,
    PrivacyBudget,
    binary_rr_from_p,
    identity_mechanism,
    load_mechanism,
    post_process,
    randomized_response,
    tightest_delta,
    tightest_delta_bruteforce,
    tightest_epsilon,
    uniform_mechanism,
    verify_dp,
)
from .metrics import (
    FairnessValue,
    demographic_parity,
    equalized_odds,
    global_g_fairness,
    local_g_fairness,
    ratio_sup,
    sup_event_gap_bruteforce,
    tv_distance,
    witness_utility_family,
)
from .model import (
    Alphabet,
    DecisionPolicy,
    Prior,
    TabularWorld,
    Trace,
    compose_mechanisms,
    conditional_utility,
    load_world,
    marginal_utility,
    product_world,
    sample_trace,
    world_from_dict,
)
from .scenario import (
    Scenario,
    builtin_hr_scenario,
    builtin_package_scenario,
    load_scenario,
)
from .simulate import simulate_scenario, summary_from_trace
from .sweep import SweepRow, run_sweep_scenario, run_sweep_tabular
from .utility import UtilityTable, load_utility

__version__ = "0.1.0"
