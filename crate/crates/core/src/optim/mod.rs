//! Search engines used by the framework: UCB acquisition and its maximizer,
//! Latin hypercube designs, and the CMA-ES / PSO / DE population steps.
//!
//! Everything here works on surrogate values only; no function in this
//! module can reach the true objective.

mod acquisition;
mod ea;
mod lhs;

pub use acquisition::{maximize_acquisition, ucb, AcquisitionConfig, MaximizerConfig};
pub use ea::{
    ea_step, environmental_selection, identify_promising, CmaState, EaKind, EaParams, Population,
    PsoState, Strategy,
};
pub use lhs::latin_hypercube;

/// Clamps `x` into the box.
pub fn clamp_to_bounds(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*l, *u);
    }
}
