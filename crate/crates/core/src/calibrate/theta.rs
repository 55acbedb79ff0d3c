//! The 12 nonlinear macro parameters, their bounds and the feasibility rules.

use serde::{Deserialize, Serialize};

use crate::damage::{build_compression_law, tension_softening_a, MaterialParams};
use crate::error::{Error, Result};

/// Number of calibrated parameters.
pub const DIM: usize = 12;

/// Parameter names in vector order.
pub const NAMES: [&str; DIM] = [
    "f0t", "gt", "kb", "kappa", "gc", "fpc", "epc", "f0c", "frc", "c1", "c2", "c3",
];

/// Units of each parameter in vector order.
pub const UNITS: [&str; DIM] = ["Pa", "N/m", "-", "-", "N/m", "Pa", "-", "Pa", "Pa", "-", "-", "-"];

/// Nonlinear parameters of the macro damage law (elastic constants excluded).
/// Missing fields of a serialized vector fall back to the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Theta {
    pub f0t: f64,
    pub gt: f64,
    pub kb: f64,
    pub kappa: f64,
    pub gc: f64,
    pub fpc: f64,
    pub epc: f64,
    pub f0c: f64,
    pub frc: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Theta {
    /// Starting point of the reference calibration.
    pub const fn starting_point() -> Self {
        Self {
            f0t: 3.5e5,
            gt: 500.0,
            kb: 1.15,
            kappa: 2.7443e-5,
            gc: 778.1,
            fpc: 1.0e7,
            epc: 6.10e-3,
            f0c: 3.997e6,
            frc: 1.0e4,
            c1: 0.49547,
            c2: 0.6,
            c3: 2.1997,
        }
    }

    pub const fn to_array(&self) -> [f64; DIM] {
        [
            self.f0t, self.gt, self.kb, self.kappa, self.gc, self.fpc, self.epc, self.f0c, self.frc, self.c1,
            self.c2, self.c3,
        ]
    }

    pub const fn from_array(v: [f64; DIM]) -> Self {
        Self {
            f0t: v[0],
            gt: v[1],
            kb: v[2],
            kappa: v[3],
            gc: v[4],
            fpc: v[5],
            epc: v[6],
            f0c: v[7],
            frc: v[8],
            c1: v[9],
            c2: v[10],
            c3: v[11],
        }
    }

    /// Full damage-law parameter set with the given elastic constants.
    pub fn to_params(&self, e: f64, nu: f64) -> MaterialParams {
        MaterialParams {
            e,
            nu,
            ft: self.f0t,
            gt: self.gt,
            f0c: self.f0c,
            fpc: self.fpc,
            frc: self.frc,
            epc: self.epc,
            gc: self.gc,
            kb: self.kb,
            kappa: self.kappa,
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
        }
    }
}

impl Default for Theta {
    fn default() -> Self {
        Self::starting_point()
    }
}

/// Box bounds on each parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: [f64; DIM],
    pub hi: [f64; DIM],
}

impl Bounds {
    /// Reference bounds for the Flemish-bond calibration.
    pub const fn reference() -> Self {
        Self {
            lo: [1.5e5, 100.0, 1.15, 0.0, 600.0, 7.0e6, 6.0e-3, 3.9e6, 1.0e4, 0.01, 0.01, 0.3],
            hi: [5.0e5, 2000.0, 1.7, 0.2, 1500.0, 11.0e6, 9.0e-3, 4.2e6, 1.0e5, 0.9, 0.6, 2.2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..DIM {
            if !(self.lo[i] < self.hi[i]) {
                return Err(Error::InvalidParams(format!(
                    "bounds for `{}` need lower < upper, got [{}, {}]",
                    NAMES[i], self.lo[i], self.hi[i]
                )));
            }
        }
        Ok(())
    }

    /// Error for the first component of `theta` outside the closed box.
    pub fn check(&self, theta: &Theta) -> Result<()> {
        let v = theta.to_array();
        for i in 0..DIM {
            if !(v[i] >= self.lo[i] && v[i] <= self.hi[i]) {
                return Err(Error::OutOfBounds {
                    name: NAMES[i],
                    value: v[i],
                    lo: self.lo[i],
                    hi: self.hi[i],
                });
            }
        }
        Ok(())
    }
}

/// Affine map of `theta` onto the unit box.
pub fn normalize(theta: &Theta, b: &Bounds) -> Result<[f64; DIM]> {
    b.check(theta)?;
    let v = theta.to_array();
    Ok(std::array::from_fn(|i| (v[i] - b.lo[i]) / (b.hi[i] - b.lo[i])))
}

/// Inverse of [`normalize`].
pub fn denormalize(xi: &[f64; DIM], b: &Bounds) -> Theta {
    Theta::from_array(std::array::from_fn(|i| b.lo[i] + xi[i] * (b.hi[i] - b.lo[i])))
}

/// Physical admissibility of a parameter set at the calibration length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub peak_above_onset: bool,
    pub peak_strain_beyond_onset: bool,
    pub no_tensile_snap_back: bool,
    pub compressive_curve_admissible: bool,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.violated().is_empty()
    }

    pub fn violated(&self) -> Vec<String> {
        [
            (self.peak_above_onset, "fpc > f0c"),
            (self.peak_strain_beyond_onset, "epc > f0c/E"),
            (self.no_tensile_snap_back, "l_RSE < 2 E Gt / f0t^2"),
            (self.compressive_curve_admissible, "compressive Bezier energy"),
        ]
        .iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, name)| name.to_string())
        .collect()
    }
}

/// Evaluate the four admissibility constraints.
pub fn constraints_check(theta: &Theta, e: f64, l_rse: f64) -> ConstraintReport {
    let p = theta.to_params(e, 0.0);
    ConstraintReport {
        peak_above_onset: theta.fpc > theta.f0c,
        peak_strain_beyond_onset: theta.epc > theta.f0c / e,
        no_tensile_snap_back: l_rse - 2.0 * e * theta.gt / (theta.f0t * theta.f0t) < 0.0
            && tension_softening_a(&p, l_rse).is_ok(),
        compressive_curve_admissible: build_compression_law(&p, l_rse).is_ok(),
    }
}
