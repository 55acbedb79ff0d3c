//! Calibrated macroscale law: an isotropic damage law acting in the
//! fictitious isotropic space reached through the linear map `T`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calibrate::{Theta, NAMES, UNITS};
use crate::damage::{Constitutive, DamageState, MaterialParams, PointLaw};
use crate::error::{Error, Result};
use crate::tensor::{Mat3, StrainV, StressV};

/// Deployable macro law. Immutable once built and shareable across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroLaw {
    pub theta: Theta,
    pub e: f64,
    pub nu: f64,
    pub t: Mat3,
    pub l_rse: f64,
    /// Free-form provenance such as input file hashes.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

/// Ratio of the macro element length to the representative single element length.
pub fn omega_ch(l_macro: f64, l_rse: f64) -> f64 {
    l_macro / l_rse
}

impl MacroLaw {
    pub fn new(theta: Theta, e: f64, nu: f64, t: Mat3, l_rse: f64) -> Result<Self> {
        if t.inverse().is_none() {
            return Err(Error::Singular);
        }
        let law = Self {
            theta,
            e,
            nu,
            t,
            l_rse,
            provenance: BTreeMap::new(),
        };
        law.bind(l_rse)?;
        Ok(law)
    }

    /// Isotropic-space damage parameters.
    pub fn params(&self) -> MaterialParams {
        self.theta.to_params(self.e, self.nu)
    }

    /// Bind the law to a macro element of characteristic length `l_macro`.
    ///
    /// Regularizing at `l_macro` is the same as dividing the energy densities
    /// identified at `l_RSE` by `omega_ch(l_macro, l_RSE)`.
    pub fn bind(&self, l_macro: f64) -> Result<MacroPoint> {
        Ok(MacroPoint {
            point: PointLaw::new(&self.params(), l_macro)?,
            t: self.t,
            t_transpose: self.t.transpose(),
        })
    }

    /// Orthotropic elastic stiffness `Tᵀ·C_iso·T`.
    pub fn elastic_stiffness(&self) -> Result<Mat3> {
        let c = crate::damage::plane_stress_elasticity(self.e, self.nu)?;
        Ok(self.t.transpose().matmul(&c).matmul(&self.t))
    }

    /// Pretty JSON with a units table alongside the parameter vector.
    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        let units: serde_json::Map<String, Value> = NAMES
            .iter()
            .zip(UNITS)
            .map(|(n, u)| (n.to_string(), Value::from(u)))
            .chain([
                ("e".to_string(), Value::from("Pa")),
                ("nu".to_string(), Value::from("-")),
                ("l_rse".to_string(), Value::from("m")),
            ])
            .collect();
        v.as_object_mut()
            .expect("law serializes to an object")
            .insert("units".into(), Value::Object(units));
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// Parse a law file, naming the first missing field.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let obj = v.as_object().ok_or_else(|| Error::Parse {
            what: "macro law".into(),
            message: "top level is not an object".into(),
        })?;
        for key in ["theta", "e", "nu", "t", "l_rse"] {
            if !obj.contains_key(key) {
                return Err(Error::MissingField(key.into()));
            }
        }
        let theta = obj["theta"].as_object().ok_or_else(|| Error::Parse {
            what: "macro law".into(),
            message: "`theta` is not an object".into(),
        })?;
        if let Some(name) = NAMES.iter().find(|n| !theta.contains_key(**n)) {
            return Err(Error::MissingField(format!("theta.{name}")));
        }
        let law: MacroLaw = serde_json::from_value(v)?;
        if law.t.inverse().is_none() {
            return Err(Error::Singular);
        }
        Ok(law)
    }
}

/// Macro law bound to an element length.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroPoint {
    point: PointLaw,
    t: Mat3,
    t_transpose: Mat3,
}

impl MacroPoint {
    pub fn isotropic(&self) -> &PointLaw {
        &self.point
    }

    fn to_iso(&self, eps: StrainV) -> StrainV {
        StrainV::from_array(self.t.mul_vec(eps.to_array()))
    }

    fn stress_from_iso(&self, s: StressV) -> StressV {
        StressV::from_array(self.t_transpose.mul_vec(s.to_array()))
    }
}

impl Constitutive for MacroPoint {
    fn virgin_state(&self) -> DamageState {
        self.point.virgin_state()
    }

    fn integrate(&self, eps: StrainV, state: &DamageState) -> (StressV, DamageState) {
        let (s_iso, next) = self.point.integrate(self.to_iso(eps), state);
        (self.stress_from_iso(s_iso), next)
    }

    fn secant(&self, eps: StrainV, state: &DamageState) -> Mat3 {
        let s = self.point.secant(self.to_iso(eps), state);
        self.t_transpose.matmul(&s).matmul(&self.t)
    }
}

/// One macro constitutive update at element length `l_macro`.
pub fn macro_integrate(
    eps: StrainV,
    state: &DamageState,
    law: &MacroLaw,
    l_macro: f64,
) -> Result<(StressV, DamageState)> {
    Ok(law.bind(l_macro)?.integrate(eps, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_law() -> MacroLaw {
        let t = Mat3([
            [1.08385, -1.6945e-2, 5.009e-8],
            [-3.0412e-2, 0.96048, 8.362e-8],
            [9.400e-8, 1.4143e-7, 0.96388],
        ]);
        MacroLaw::new(Theta::starting_point(), 4.46701076e9, 0.21639363, t, 0.0103).unwrap()
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega_ch(0.05, 0.05), 1.0);
        assert!((omega_ch(0.2, 0.05) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn identity_map_reduces_to_point_law() {
        let mut law = sample_law();
        law.t = Mat3::IDENTITY;
        let point = PointLaw::new(&law.params(), 0.008).unwrap();
        let eps = StrainV::new(3e-4, -1e-4, 2e-4);
        let st = point.virgin_state();
        assert_eq!(macro_integrate(eps, &st, &law, 0.008).unwrap(), point.integrate(eps, &st));
    }

    #[test]
    fn elastic_response_is_orthotropic_stiffness() {
        let law = sample_law();
        let c = law.elastic_stiffness().unwrap();
        let eps = StrainV::new(1e-6, 2e-6, -1e-6);
        let (s, _) = macro_integrate(eps, &DamageState::virgin(&law.params()), &law, 0.012).unwrap();
        let expect = c.stress_from(eps);
        assert!((s - expect).norm() <= 1e-10 * expect.norm());
        let (z, _) = macro_integrate(StrainV::ZERO, &DamageState::virgin(&law.params()), &law, 0.012).unwrap();
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn json_round_trip_and_missing_fields() {
        let law = sample_law();
        let text = law.to_json().unwrap();
        assert!(text.contains("\"units\""));
        let back = MacroLaw::from_json(&text).unwrap();
        assert_eq!(back, law);
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("nu");
        match MacroLaw::from_json(&v.to_string()) {
            Err(Error::MissingField(f)) => assert_eq!(f, "nu"),
            other => panic!("unexpected {other:?}"),
        }
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["theta"].as_object_mut().unwrap().remove("gc");
        match MacroLaw::from_json(&v.to_string()) {
            Err(Error::MissingField(f)) => assert_eq!(f, "theta.gc"),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Energy per unit area dissipated by a macro element of length `l`
    /// pulled along x until the stress vanishes.
    fn dissipated_per_area(law: &MacroLaw, l: f64) -> f64 {
        let point = law.bind(l).unwrap();
        let mut state = point.virgin_state();
        let steps = 200_000;
        let mut prev = (StrainV::ZERO, StressV::ZERO);
        let mut work = 0.0;
        for n in 1..=steps {
            let eps = StrainV::new(1.5 * n as f64 / steps as f64, 0.0, 0.0);
            let (s, next) = point.integrate(eps, &state);
            state = next;
            work += 0.5 * (s + prev.1).dot(eps - prev.0);
            prev = (eps, s);
        }
        assert!(prev.1.norm() < 1e-3 * law.theta.f0t);
        (work - 0.5 * prev.1.dot(prev.0)) * l
    }

    #[test]
    fn dissipation_per_area_is_independent_of_element_length() {
        let mut law = sample_law();
        law.theta.gc = 1500.0;
        let a = dissipated_per_area(&law, 0.01);
        let b = dissipated_per_area(&law, 0.02);
        assert!((a - b).abs() <= 0.03 * a, "{a} vs {b}");
    }

    #[test]
    fn snap_back_reports_length() {
        let law = sample_law();
        match law.bind(10.0) {
            Err(Error::SnapBack { length, .. }) => assert_eq!(length, 10.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
