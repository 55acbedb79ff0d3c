//! Identification of the nonlinear macro parameters from virtual-laboratory
//! work histories.

mod cost;
mod identify;
mod optimizer;
mod theta;

pub use cost::{CaseTerm, CostConfig, CostFunction, CostReport, PENALTY};
pub use identify::{calibrate, Calibration};
pub use optimizer::{minimize, Gradient, Minimum, Termination, TraceRow, TrustRegionConfig};
pub use theta::{constraints_check, denormalize, normalize, Bounds, ConstraintReport, Theta, DIM, NAMES, UNITS};

#[cfg(test)]
mod tests;
