//! Flemish-bond masonry mesh generator.
//!
//! Each course alternates one stretcher and one header separated by head
//! joints, and is topped by a bed joint. Odd courses are shifted by half a
//! period so that every header sits centred over the stretcher below. The
//! header length is `(stretcher - joint) / 2`, the usual brick proportion.

use serde::{Deserialize, Serialize};

use super::mesh::{structured_grid, Mesh, BRICK, MORTAR};
use crate::error::{Error, Result};

/// Brick and joint dimensions plus meshing density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlemishGeometry {
    /// Stretcher length [m].
    pub brick_length: f64,
    /// Brick height [m].
    pub brick_height: f64,
    /// Joint thickness [m].
    pub joint: f64,
    /// Number of courses of the periodic cell.
    pub courses: usize,
    /// Elements across one joint thickness.
    pub resolution: usize,
    /// Optional coarser element size inside bricks [m].
    pub max_brick_element: Option<f64>,
    /// Out-of-plane thickness [m].
    pub thickness: f64,
}

impl Default for FlemishGeometry {
    fn default() -> Self {
        Self {
            brick_length: 0.25,
            brick_height: 0.055,
            joint: 0.01,
            courses: 2,
            resolution: 1,
            max_brick_element: None,
            thickness: 1.0,
        }
    }
}

impl FlemishGeometry {
    pub fn header(&self) -> f64 {
        0.5 * (self.brick_length - self.joint)
    }

    /// Horizontal period: stretcher, joint, header, joint.
    pub fn period(&self) -> f64 {
        self.brick_length + self.header() + 2.0 * self.joint
    }

    pub fn course_height(&self) -> f64 {
        self.brick_height + self.joint
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.brick_length, "brick length"),
            (self.brick_height, "brick height"),
            (self.joint, "joint thickness"),
            (self.thickness, "thickness"),
        ];
        if let Some((v, name)) = positive.iter().find(|(v, _)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Geometry(format!("{name} must be positive, got {v}")));
        }
        if self.resolution == 0 {
            return Err(Error::Geometry("resolution must be at least one element per joint".into()));
        }
        if self.courses == 0 || !self.courses.is_multiple_of(2) {
            return Err(Error::Geometry(format!(
                "a periodic Flemish cell needs an even, nonzero number of courses, got {}",
                self.courses
            )));
        }
        if !(self.header() > 0.0) {
            return Err(Error::Geometry(format!(
                "joint {} leaves no room for a header in a {} m stretcher",
                self.joint, self.brick_length
            )));
        }
        // Head joints of adjacent courses must not overlap.
        let shift = 0.5 * self.period();
        let heads = [self.brick_length, self.brick_length + self.joint + self.header()];
        for a in heads {
            for b in heads {
                let d = (a - (b + shift)).rem_euclid(self.period());
                let gap = d.min(self.period() - d);
                if gap < self.joint * (1.0 - 1e-9) {
                    return Err(Error::Geometry("head joints of adjacent courses overlap".into()));
                }
            }
        }
        if let Some(h) = self.max_brick_element {
            if !(h > 0.0) {
                return Err(Error::Geometry(format!("brick element size {h} must be positive")));
            }
        }
        Ok(())
    }

    /// Material at a point of the infinite periodic pattern.
    pub fn material_at(&self, x: f64, y: f64) -> usize {
        let ch = self.course_height();
        let course = (y / ch).floor();
        if y - course * ch > self.brick_height {
            return MORTAR;
        }
        let shift = if (course as i64).rem_euclid(2) == 1 {
            0.5 * self.period()
        } else {
            0.0
        };
        let xl = (x - shift).rem_euclid(self.period());
        let s = self.brick_length;
        let header_start = s + self.joint;
        if xl < s || (xl > header_start && xl < header_start + self.header()) {
            BRICK
        } else {
            MORTAR
        }
    }

    fn x_breaks(&self, width: f64) -> Vec<f64> {
        let p = self.period();
        let edges = [0.0, self.brick_length, self.brick_length + self.joint, p - self.joint];
        let mut cuts = Vec::new();
        let mut k = 0.0;
        while k * p <= width {
            for shift in [0.0, 0.5 * p] {
                for e in edges {
                    cuts.push(k * p + (e + shift).rem_euclid(p));
                }
            }
            k += 1.0;
        }
        cuts.push(width);
        sorted_breaks(cuts, width)
    }

    fn y_breaks(&self, height: f64) -> Vec<f64> {
        let ch = self.course_height();
        let mut cuts = Vec::new();
        let mut k = 0.0;
        while k * ch <= height {
            cuts.push(k * ch);
            cuts.push(k * ch + self.brick_height);
            k += 1.0;
        }
        cuts.push(height);
        sorted_breaks(cuts, height)
    }

    /// Subdivide each breakpoint interval into elements no larger than the
    /// joint size (or the brick size for intervals wider than a joint).
    fn refine(&self, breaks: &[f64]) -> Vec<f64> {
        let h_joint = self.joint / self.resolution as f64;
        let h_brick = self.max_brick_element.map_or(h_joint, |h| h.max(h_joint));
        let mut out = vec![breaks[0]];
        for w in breaks.windows(2) {
            let len = w[1] - w[0];
            let h = if len <= self.joint * (1.0 + 1e-9) { h_joint } else { h_brick };
            let n = ((len / h) - 1e-9).ceil().max(1.0) as usize;
            for i in 1..=n {
                out.push(if i == n { w[1] } else { w[0] + len * i as f64 / n as f64 });
            }
        }
        out
    }

    /// Mesh a `width × height` window of the bond anchored at the origin.
    pub fn mesh_window(&self, width: f64, height: f64) -> Result<Mesh> {
        self.validate()?;
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Geometry(format!("window {width} x {height} must be positive")));
        }
        let xs = self.refine(&self.x_breaks(width));
        let ys = self.refine(&self.y_breaks(height));
        Ok(structured_grid(&xs, &ys, self.thickness, |x, y| self.material_at(x, y)))
    }

    /// Element counts along x and y of the periodic cell.
    pub fn grid_counts(&self) -> Result<(usize, usize)> {
        self.validate()?;
        let p = self.period();
        let h = self.courses as f64 * self.course_height();
        Ok((
            self.refine(&self.x_breaks(p)).len() - 1,
            self.refine(&self.y_breaks(h)).len() - 1,
        ))
    }

    /// Analytic mortar area fraction of the periodic cell.
    pub fn mortar_fraction(&self) -> f64 {
        1.0 - (self.brick_length + self.header()) * self.brick_height / (self.period() * self.course_height())
    }
}

fn sorted_breaks(mut cuts: Vec<f64>, limit: f64) -> Vec<f64> {
    let tol = 1e-12 * limit;
    cuts.retain(|&c| c >= 0.0 && c <= limit + tol);
    cuts.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(cuts.len());
    for c in cuts {
        match out.last() {
            Some(&l) if c - l <= tol => {}
            _ => out.push(c),
        }
    }
    let last = out.len() - 1;
    out[last] = limit;
    if last > 0 && out[last] - out[last - 1] <= tol {
        out.remove(last - 1);
    }
    out
}

/// Periodic Flemish-bond cell: one horizontal period and `courses` courses.
pub fn generate_flemish_rve(geometry: &FlemishGeometry) -> Result<Mesh> {
    geometry.validate()?;
    geometry.mesh_window(geometry.period(), geometry.courses as f64 * geometry.course_height())
}
