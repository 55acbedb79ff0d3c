//! Bilinear isoparametric quadrilateral with 2×2 Gauss quadrature.

use crate::error::{Error, Result};
use crate::tensor::{Mat3, StrainV, StressV};

const G: f64 = 0.577_350_269_189_625_8;

/// Gauss points in the reference square, counter-clockwise from `(-,-)`.
pub const GAUSS_POINTS: [[f64; 2]; 4] = [[-G, -G], [G, -G], [G, G], [-G, G]];

/// Strain-displacement matrix for element DOFs `(u1, v1, ..., u4, v4)`.
pub type BMatrix = [[f64; 8]; 3];

/// Element geometry in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub coords: [[f64; 2]; 4],
}

fn shape_derivatives(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    [
        [-0.25 * (1.0 - eta), -0.25 * (1.0 - xi)],
        [0.25 * (1.0 - eta), -0.25 * (1.0 + xi)],
        [0.25 * (1.0 + eta), 0.25 * (1.0 + xi)],
        [-0.25 * (1.0 + eta), 0.25 * (1.0 - xi)],
    ]
}

impl Quad {
    pub const fn new(coords: [[f64; 2]; 4]) -> Self {
        Self { coords }
    }

    fn jacobian(&self, dn: &[[f64; 2]; 4]) -> [[f64; 2]; 2] {
        let mut j = [[0.0; 2]; 2];
        for (d, x) in dn.iter().zip(&self.coords) {
            for a in 0..2 {
                for b in 0..2 {
                    j[a][b] += d[a] * x[b];
                }
            }
        }
        j
    }

    /// Jacobian determinants at the corners and Gauss points are all positive.
    pub fn jacobians_positive(&self) -> bool {
        let corners = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        corners.iter().chain(&GAUSS_POINTS).all(|&[xi, eta]| {
            let j = self.jacobian(&shape_derivatives(xi, eta));
            j[0][0] * j[1][1] - j[0][1] * j[1][0] > 0.0
        })
    }

    /// Strain-displacement matrices and `det J` at the four Gauss points.
    pub fn gauss_data(&self) -> Result<([BMatrix; 4], [f64; 4])> {
        let mut bs = [[[0.0; 8]; 3]; 4];
        let mut dets = [0.0; 4];
        for (g, &[xi, eta]) in GAUSS_POINTS.iter().enumerate() {
            let dn = shape_derivatives(xi, eta);
            let j = self.jacobian(&dn);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det > 0.0) {
                return Err(Error::Geometry(format!("non-positive Jacobian {det}")));
            }
            let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
            for (a, d) in dn.iter().enumerate() {
                let dx = inv[0][0] * d[0] + inv[0][1] * d[1];
                let dy = inv[1][0] * d[0] + inv[1][1] * d[1];
                bs[g][0][2 * a] = dx;
                bs[g][1][2 * a + 1] = dy;
                bs[g][2][2 * a] = dy;
                bs[g][2][2 * a + 1] = dx;
            }
            dets[g] = det;
        }
        Ok((bs, dets))
    }
}

/// Precomputed integration data of one element.
#[derive(Debug, Clone)]
pub struct ElementKernel {
    pub b: [BMatrix; 4],
    /// Gauss weight times `det J` times thickness.
    pub w: [f64; 4],
    pub area: f64,
}

impl ElementKernel {
    pub fn new(coords: [[f64; 2]; 4], thickness: f64) -> Result<Self> {
        let (b, dets) = Quad::new(coords).gauss_data()?;
        Ok(Self {
            b,
            w: dets.map(|d| d * thickness),
            area: dets.iter().sum(),
        })
    }

    pub fn strain(&self, g: usize, ue: &[f64; 8]) -> StrainV {
        let b = &self.b[g];
        let row = |r: usize| (0..8).map(|k| b[r][k] * ue[k]).sum::<f64>();
        StrainV::new(row(0), row(1), row(2))
    }

    /// Adds `w·Bᵀσ` of Gauss point `g` to `f`.
    pub fn add_force(&self, g: usize, s: StressV, f: &mut [f64; 8]) {
        let b = &self.b[g];
        let s = s.to_array();
        for (k, fk) in f.iter_mut().enumerate() {
            *fk += self.w[g] * (b[0][k] * s[0] + b[1][k] * s[1] + b[2][k] * s[2]);
        }
    }

    /// Adds `w·BᵀDB` of Gauss point `g` to `k`.
    pub fn add_stiffness(&self, g: usize, d: &Mat3, k: &mut [[f64; 8]; 8]) {
        let b = &self.b[g];
        let mut db = [[0.0; 8]; 3];
        for i in 0..3 {
            for c in 0..8 {
                db[i][c] = (0..3).map(|m| d.0[i][m] * b[m][c]).sum();
            }
        }
        for r in 0..8 {
            for c in 0..8 {
                k[r][c] += self.w[g] * (0..3).map(|i| b[i][r] * db[i][c]).sum::<f64>();
            }
        }
    }
}
