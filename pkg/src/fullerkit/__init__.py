"""Computational toolkit for switching-structure analysis of single-input
control-affine systems: exact Lie-bracket word algebra, Pontryagin-extremal
simulation with bang and singular arcs, empirical accumulation-order
("Fuller order") estimation of switching sets, and the codimension-counting
dynamics behind the (n-1)^2 order bound.
"""

from .bracket_algebra import (
    BracketCache,
    BracketWord,
    Decomposition,
    Polynomial,
    PolyVectorField,
    ad_power,
    as_word,
    decompose_word,
    eval_at,
    eval_word_field,
    lie_bracket,
    pairing,
    two_frame_minors,
    wedge_det,
)
from .extremal_sim import (
    AmbiguousSwitchError,
    ArcSegment,
    ControlDecision,
    DegenerateSingularError,
    ExtremalState,
    ExtremalSystem,
    Scenario,
    SimOptions,
    SimResult,
    SingularRangeError,
    check_arc_invariants,
    collinearity_report,
    h_word,
    locate_switch,
    simulate,
)
from .fuller_analysis import (
    ChatterStats,
    OrderReport,
    SwitchSet,
    auto_epsilon,
    chatter_ratio,
    check_accumulation_conditions,
    divergence_check,
    fuller_order,
    geometric_times,
    nested_geometric_times,
    recursion_simulate,
    strip_isolated,
)
from .fuller_fixture import (
    ChatterConfig,
    chattering_seed,
    selfsimilar_cycle,
    simulate_chattering,
)
from .genericity_combinatorics import (
    AccumulationState,
    AdmissibleCurve,
    BoundResult,
    BranchReport,
    CollinearDegeneracy,
    PointClass,
    RelationExpr,
    accumulation_branches,
    build_q_relation,
    classify_point_3d,
    collinear_degeneracy_test,
    collinear_order_chain,
    eval_relation,
    fourth_order_branch_test,
    fuller_bound,
    initial_accumulation_state,
    longest_admissible,
    poisson,
    simple_relation,
)
from .scenarios import (
    BUILTIN_NAMES,
    RunRecord,
    ScenarioBundle,
    builtin,
    emit_scenario,
    parse_scenario,
    run_bundle,
    scenario_hash,
    trajectory_csv,
)

__version__ = "0.1.0"
