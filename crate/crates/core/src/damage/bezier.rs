//! Quadratic Bezier segments parametrized by abscissa.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadratic Bezier segment through control points `(x1,y1) (x2,y2) (x3,y3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BezierCurve {
    pub x: [f64; 3],
    pub y: [f64; 3],
}

impl BezierCurve {
    pub const fn new(x: [f64; 3], y: [f64; 3]) -> Self {
        Self { x, y }
    }

    /// Curve parameter `p ∈ [0, 1]` whose abscissa equals `xv`.
    ///
    /// Solves `A p² + B p + C = 0` with the rationalized root
    /// `p = -2C / (B + √D)`, identical to `(-B + √D) / 2A` but stable when
    /// `A → 0`.
    fn parameter(&self, xv: f64) -> f64 {
        let [x1, x2, x3] = self.x;
        let a = x1 - 2.0 * x2 + x3;
        let b = 2.0 * (x2 - x1);
        let c = x1 - xv;
        if a == 0.0 {
            if b == 0.0 {
                return 0.0;
            }
            return -c / b;
        }
        let d = (b * b - 4.0 * a * c).max(0.0);
        let den = b + d.sqrt();
        if den == 0.0 {
            return 0.0;
        }
        (-2.0 * c / den).clamp(0.0, 1.0)
    }

    /// Ordinate at parameter `p`.
    pub fn point(&self, p: f64) -> (f64, f64) {
        let q = 1.0 - p;
        let bx = q * q * self.x[0] + 2.0 * p * q * self.x[1] + p * p * self.x[2];
        let by = (self.y[0] - 2.0 * self.y[1] + self.y[2]) * p * p
            + 2.0 * p * (self.y[1] - self.y[0])
            + self.y[0];
        (bx, by)
    }

    /// Exact area under the segment, `∫ y dx` over `[x1, x3]`.
    pub fn area(&self) -> f64 {
        let [x1, x2, x3] = self.x;
        let [y1, y2, y3] = self.y;
        (x2 - x1) * (y1 / 2.0 + y2 / 3.0 + y3 / 6.0) + (x3 - x2) * (y1 / 6.0 + y2 / 3.0 + y3 / 2.0)
    }

    pub fn is_monotone(&self) -> bool {
        self.x[0] <= self.x[1] && self.x[1] <= self.x[2]
    }
}

/// Bezier ordinate at abscissa `xv`.
pub fn bezier_eval(c: &BezierCurve, xv: f64) -> Result<f64> {
    let (lo, hi) = (c.x[0], c.x[2]);
    let slack = 1e-14 * lo.abs().max(hi.abs());
    if !(xv >= lo - slack && xv <= hi + slack) {
        return Err(Error::OutOfSegment { x: xv, lo, hi });
    }
    if c.x[0] == c.x[2] {
        return Ok(c.y[0]);
    }
    Ok(c.point(c.parameter(xv)).1)
}

/// Evaluation without bounds checking; callers guarantee `xv` lies in the segment.
pub(crate) fn eval_unchecked(c: &BezierCurve, xv: f64) -> f64 {
    if c.x[0] == c.x[2] {
        return c.y[0];
    }
    c.point(c.parameter(xv)).1
}
