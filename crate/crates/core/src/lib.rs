//! Machine-learning homogenization of in-plane masonry.
//!
//! The crate builds a periodic representative volume element, probes it with
//! a virtual strain-controlled laboratory, maps the resulting orthotropic
//! responses onto an isotropic space and calibrates a single-point damage law
//! that can then be used as a macroscale material.

// `!(x > 0.0)` deliberately rejects NaN; index loops mirror the matrix algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibrate;
pub mod damage;
pub mod error;
pub mod fem;
pub mod isotropize;
pub mod macro_law;
pub mod tensor;
pub mod validation;
pub mod vlab;

pub use damage::{Constitutive, DamageState, MaterialParams, PointLaw};
pub use error::{Error, Result};
pub use tensor::{Mat3, StrainV, StressV};
pub use macro_law::MacroLaw;
