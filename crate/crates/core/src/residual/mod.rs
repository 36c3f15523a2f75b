//! Residual-function families `f(x, θ)` with exact vector-Jacobian products,
//! depth-indexed weight schedules, and sampled smoothness constants.

pub mod constants;
pub mod families;
pub mod family;
pub mod schedule;

pub use constants::{estimate_constants, SmoothnessConstants};
pub use families::{
    make_linear_family, make_mlp_family, make_offset_family, make_square_family, make_zero_family, LinearFamily,
    MlpFamily, OffsetFamily, SquareFamily, ZeroFamily,
};
pub use family::ResidualFamily;
pub use schedule::{make_alternating_sign_schedule, make_index_schedule, weight_smoothness, WeightSchedule};
