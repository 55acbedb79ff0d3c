//! Internal-work mismatch between campaign histories and the damage law
//! replayed on the same strains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::theta::{constraints_check, Theta};
use crate::damage::{Constitutive, PointLaw};
use crate::vlab::{internal_work, work_series, HistoryRecord};

/// Cost assigned to parameter sets the law cannot represent.
pub const PENALTY: f64 = 1e30;

/// Options of the cost function.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    /// Sum `|ΔW|` over every step instead of the final step only.
    pub all_steps: bool,
}

/// Contribution of one history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseTerm {
    pub case_id: usize,
    /// Final internal work of the data [J/m³].
    pub w_data: f64,
    /// Final internal work of the replay [J/m³].
    pub w_model: f64,
    /// Contribution to the total [J/m³].
    pub term: f64,
}

/// Value of the cost at one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: f64,
    pub terms: Vec<CaseTerm>,
    pub feasible: bool,
    pub violated: Vec<String>,
}

/// Campaign data prepared for repeated cost evaluations.
#[derive(Debug, Clone)]
pub struct CostFunction {
    records: Vec<HistoryRecord>,
    work: Vec<Vec<f64>>,
    pub e: f64,
    pub nu: f64,
    pub l_rse: f64,
    pub config: CostConfig,
    /// Extra element lengths at which the law must also be admissible.
    pub deploy_lengths: Vec<f64>,
}

impl CostFunction {
    /// `records` must already live in the isotropic space of `(e, nu)`.
    pub fn new(records: &[HistoryRecord], e: f64, nu: f64, l_rse: f64, config: CostConfig) -> Self {
        Self {
            work: records.iter().map(internal_work).collect(),
            records: records.to_vec(),
            e,
            nu,
            l_rse,
            config,
            deploy_lengths: Vec::new(),
        }
    }

    pub fn records(&self) -> &[HistoryRecord] {
        &self.records
    }

    /// `Σ_k |W_final| ` of the data, the natural scale of the cost.
    pub fn work_scale(&self) -> f64 {
        self.work.iter().map(|w| w.last().map_or(0.0, |x| x.abs())).sum()
    }

    /// Constraint names violated by `theta` at the calibration length and
    /// at every deployment length.
    pub fn violations(&self, theta: &Theta) -> Vec<String> {
        let mut out = constraints_check(theta, self.e, self.l_rse).violated();
        for &l in &self.deploy_lengths {
            for name in constraints_check(theta, self.e, l).violated() {
                out.push(format!("{name} at l = {l} m"));
            }
        }
        out
    }

    pub fn evaluate(&self, theta: &Theta) -> CostReport {
        let violated = self.violations(theta);
        let law = match PointLaw::new(&theta.to_params(self.e, self.nu), self.l_rse) {
            Ok(law) if violated.is_empty() => law,
            Ok(_) => return penalized(violated),
            Err(e) => return penalized(vec![e.to_string()]),
        };
        let terms: Vec<CaseTerm> = self
            .records
            .par_iter()
            .zip(self.work.par_iter())
            .map(|(r, w)| self.replay(&law, r, w))
            .collect();
        let total = terms.iter().map(|t| t.term).sum();
        if !f64::is_finite(total) {
            return penalized(vec!["non-finite replay".into()]);
        }
        CostReport {
            total,
            terms,
            feasible: true,
            violated,
        }
    }

    fn replay(&self, law: &PointLaw, record: &HistoryRecord, w_data: &[f64]) -> CaseTerm {
        let mut state = law.virgin_state();
        let pairs = record.steps.iter().map(|s| {
            let (stress, next) = law.integrate(s.strain, &state);
            state = next;
            (s.strain, stress)
        });
        let w_model = work_series(pairs);
        let last = |w: &[f64]| w.last().copied().unwrap_or(0.0);
        let term = if self.config.all_steps {
            w_model.iter().zip(w_data).map(|(a, b)| (a - b).abs()).sum()
        } else {
            (last(&w_model) - last(w_data)).abs()
        };
        CaseTerm {
            case_id: record.case_id,
            w_data: last(w_data),
            w_model: last(&w_model),
            term,
        }
    }
}

fn penalized(violated: Vec<String>) -> CostReport {
    CostReport {
        total: PENALTY,
        terms: Vec::new(),
        feasible: false,
        violated,
    }
}
