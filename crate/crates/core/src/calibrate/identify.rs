//! Calibration driver: feasibility of the start, normalization, trust-region
//! search and the resulting report.

use serde::{Deserialize, Serialize};

use super::cost::{CostFunction, CostReport};
use super::optimizer::{minimize, Minimum, TraceRow, TrustRegionConfig};
use super::theta::{denormalize, normalize, Bounds, Theta, DIM};
use crate::error::{Error, Result};

/// Outcome of a calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub theta0: Theta,
    pub bounds: Bounds,
    pub theta_star: Theta,
    pub xi_star: Vec<f64>,
    pub initial: CostReport,
    pub report: CostReport,
    /// `Σ_k |W_final|` of the data [J/m³].
    pub work_scale: f64,
    pub minimum: Minimum,
}

impl Calibration {
    /// Accepted-iterate trace as `epoch,cost,step` CSV.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("epoch,cost,step\n");
        for TraceRow { epoch, cost, step } in &self.minimum.trace {
            out.push_str(&format!("{epoch},{cost},{step}\n"));
        }
        out
    }

    /// Final cost relative to the data work scale.
    pub fn relative_cost(&self) -> f64 {
        self.report.total / self.work_scale
    }
}

/// Identify `θ*` from `theta0` inside `bounds`.
pub fn calibrate(cost: &CostFunction, theta0: &Theta, bounds: &Bounds, config: &TrustRegionConfig) -> Result<Calibration> {
    bounds.validate()?;
    let xi0 = normalize(theta0, bounds)?;
    let violated = cost.violations(theta0);
    if !violated.is_empty() {
        return Err(Error::Infeasible(violated));
    }
    let initial = cost.evaluate(theta0);
    if !initial.feasible {
        return Err(Error::Infeasible(initial.violated));
    }
    let to_theta = |xi: &[f64]| denormalize(&std::array::from_fn::<f64, DIM, _>(|i| xi[i]), bounds);
    let minimum = minimize(|xi| cost.evaluate(&to_theta(xi)).total, &xi0, config)?;
    let theta_star = to_theta(&minimum.xi);
    Ok(Calibration {
        theta0: *theta0,
        bounds: *bounds,
        theta_star,
        xi_star: minimum.xi.clone(),
        initial,
        report: cost.evaluate(&theta_star),
        work_scale: cost.work_scale(),
        minimum,
    })
}
