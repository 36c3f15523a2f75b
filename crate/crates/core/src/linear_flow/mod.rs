//! Rescaled gradient flow of deep linear residual networks on a matrix
//! regression problem, with the diagnostics that track its depth limit.

pub mod diagnostics;
pub mod flow;
pub mod problem;


pub use diagnostics::{
    check_assumption1, compliant_problem, depth_double_compare, extract_limit_map, monitor_invariants, product_vs_ode,
    profile_flow_map, psi_l2_distance, Assumption1Report, InvariantReport, LimitMap, FLOW_NORM_LIMIT, INIT_NORM_LIMIT,
};
pub use flow::{
    all_layer_gradients, integrate_flow, layer_gradient, loss, FlowSample, FlowState, FlowTrace,
    LOSS_INCREASE_TOLERANCE,
};
pub use problem::{build_problem, RegressionProblem};
