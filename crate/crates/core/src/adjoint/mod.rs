//! Exact backpropagation from stored activations, memory-free adjoint
//! backpropagation that reconstructs activations in reverse, and gradient
//! error metrics.

pub mod backprop;
pub mod check;
pub mod gradients;
pub mod reconstruct;

#[cfg(test)]
mod tests;

pub use backprop::{
    adjoint_sweep_euler, adjoint_sweep_heun, backprop_adjoint, backprop_adjoint_euler, backprop_adjoint_heun,
    backprop_exact, backprop_exact_for, backprop_exact_heun,
};
pub use check::{finite_difference_schedule_gradient, heun_step_defect, quadratic_output_loss};
pub use gradients::{compare_gradients, GradientComparison, GradientSet, GradientSink, RELATIVE_FLOOR};
pub use reconstruct::{reconstruct_backward_euler, reconstruct_backward_heun, ReconstructionReport};
