//! Plane-stress Voigt algebra.
//!
//! Strains carry the engineering shear `γxy = 2εxy`, stresses carry the tensor
//! component `σxy`. With that convention the work product is the plain
//! 3-vector dot product and every elasticity matrix in the crate maps
//! `StrainV -> StressV` directly.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// In-plane strain `(εxx, εyy, γxy)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StrainV {
    pub exx: f64,
    pub eyy: f64,
    pub gxy: f64,
}

/// In-plane stress `(σxx, σyy, σxy)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StressV {
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
}

macro_rules! voigt_vector {
    ($t:ident, $a:ident, $b:ident, $c:ident) => {
        impl $t {
            pub const ZERO: $t = $t {
                $a: 0.0,
                $b: 0.0,
                $c: 0.0,
            };

            pub const fn new($a: f64, $b: f64, $c: f64) -> Self {
                Self { $a, $b, $c }
            }

            pub const fn from_array(v: [f64; 3]) -> Self {
                Self {
                    $a: v[0],
                    $b: v[1],
                    $c: v[2],
                }
            }

            pub const fn to_array(self) -> [f64; 3] {
                [self.$a, self.$b, self.$c]
            }

            /// Euclidean norm of the Voigt 3-vector.
            pub fn norm(self) -> f64 {
                (self.$a * self.$a + self.$b * self.$b + self.$c * self.$c).sqrt()
            }

            pub fn is_finite(self) -> bool {
                self.$a.is_finite() && self.$b.is_finite() && self.$c.is_finite()
            }
        }

        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t {
                $t::new(self.$a + o.$a, self.$b + o.$b, self.$c + o.$c)
            }
        }

        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t {
                $t::new(self.$a - o.$a, self.$b - o.$b, self.$c - o.$c)
            }
        }

        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                $t::new(-self.$a, -self.$b, -self.$c)
            }
        }

        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t {
                $t::new(self.$a * s, self.$b * s, self.$c * s)
            }
        }
    };
}

voigt_vector!(StrainV, exx, eyy, gxy);
voigt_vector!(StressV, sxx, syy, sxy);

impl StressV {
    /// Work-conjugate product `σ:ε` (engineering shear on the strain side).
    pub fn dot(self, e: StrainV) -> f64 {
        self.sxx * e.exx + self.syy * e.eyy + self.sxy * e.gxy
    }
}

/// Dense 3x3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Default for Mat3 {
    fn default() -> Self {
        Mat3::ZERO
    }
}

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub const fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// `C·ε` for an elasticity-like matrix.
    pub fn stress_from(&self, e: StrainV) -> StressV {
        StressV::from_array(self.mul_vec(e.to_array()))
    }

    pub fn matmul(&self, o: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut r = self.0;
        r.iter_mut().flatten().for_each(|v| *v *= s);
        Mat3(r)
    }

    pub fn sub(&self, o: &Mat3) -> Mat3 {
        let mut r = self.0;
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v -= o.0[i][j];
            }
        }
        Mat3(r)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn determinant(&self) -> f64 {
        self.to_na().determinant()
    }

    pub fn inverse(&self) -> Option<Mat3> {
        let scale = self.max_abs();
        if scale == 0.0 {
            return None;
        }
        let inv = self.to_na().try_inverse()?;
        let out = Mat3::from_na(&inv);
        out.is_finite().then_some(out)
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let tol = rel_tol * self.max_abs().max(f64::MIN_POSITIVE);
        (0..3).all(|i| (0..3).all(|j| (self.0[i][j] - self.0[j][i]).abs() <= tol))
    }

    pub fn to_na(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.0[i][j])
    }

    pub fn from_na(m: &Matrix3<f64>) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        Mat3(r)
    }
}

/// Principal values and directions of an in-plane stress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalPair {
    /// `(σ_max, σ_min)`.
    pub values: (f64, f64),
    /// Unit eigenvectors matching `values`.
    pub directions: ([f64; 2], [f64; 2]),
}

impl PrincipalPair {
    pub fn max(&self) -> f64 {
        self.values.0
    }

    pub fn min(&self) -> f64 {
        self.values.1
    }
}

/// `H(x)`: zero for `x <= 0`, one otherwise.
#[inline]
pub fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Macaulay bracket `<x> = max(x, 0)`.
#[inline]
pub fn macaulay(x: f64) -> f64 {
    x.max(0.0)
}

/// Eigen-decomposition of `[[σxx, σxy], [σxy, σyy]]`.
///
/// Tied eigenvalues return the canonical axes.
pub fn principal_decomposition(s: StressV) -> PrincipalPair {
    let center = 0.5 * (s.sxx + s.syy);
    let half_diff = 0.5 * (s.sxx - s.syy);
    let radius = half_diff.hypot(s.sxy);
    // atan2(0, 0) = 0 gives the canonical axes for hydrostatic states.
    let theta = if radius == 0.0 {
        0.0
    } else {
        0.5 * s.sxy.atan2(half_diff)
    };
    let (sin, cos) = theta.sin_cos();
    PrincipalPair {
        values: (center + radius, center - radius),
        directions: ([cos, sin], [-sin, cos]),
    }
}

/// Outer product `n ⊗ n` scaled by `value`, in Voigt stress form.
#[inline]
fn dyad(value: f64, n: [f64; 2]) -> StressV {
    StressV::new(value * n[0] * n[0], value * n[1] * n[1], value * n[0] * n[1])
}

/// Spectral split `σ = σ⁺ + σ⁻` into tensile and compressive parts.
pub fn spectral_split(s: StressV) -> (StressV, StressV) {
    let pp = principal_decomposition(s);
    let (s1, s2) = pp.values;
    if s2 > 0.0 {
        return (s, StressV::ZERO);
    }
    if s1 <= 0.0 {
        return (StressV::ZERO, s);
    }
    // Exactly one positive eigenvalue here.
    let pos = dyad(s1, pp.directions.0);
    (pos, s - pos)
}

/// Voigt matrix of the positive projection `P⁺ = Σ H(σi) pii ⊗ pii`
/// acting on stress vectors.
pub fn positive_projector(s: StressV) -> Mat3 {
    let pp = principal_decomposition(s);
    let mut p = Mat3::ZERO;
    for (value, n) in [(pp.values.0, pp.directions.0), (pp.values.1, pp.directions.1)] {
        if value <= 0.0 {
            continue;
        }
        let left = [n[0] * n[0], n[1] * n[1], n[0] * n[1]];
        let right = [n[0] * n[0], n[1] * n[1], 2.0 * n[0] * n[1]];
        for i in 0..3 {
            for j in 0..3 {
                p.0[i][j] += left[i] * right[j];
            }
        }
    }
    p
}

/// `(I1, J2)` of a plane-stress state, with `J2` taken from the 3D deviator
/// (`σzz = 0`).
pub fn invariants(s: StressV) -> (f64, f64) {
    let i1 = s.sxx + s.syy;
    let p = i1 / 3.0;
    let (dx, dy, dz) = (s.sxx - p, s.syy - p, -p);
    let j2 = 0.5 * (dx * dx + dy * dy + dz * dz) + s.sxy * s.sxy;
    (i1, j2)
}

/// Symmetric square root of an SPD matrix.
pub fn spd_sqrt(m: &Mat3) -> Result<Mat3> {
    if !m.is_finite() || !m.is_symmetric(1e-9) {
        return Err(Error::NotSpd("matrix is not symmetric".into()));
    }
    let sym = (m.to_na() + m.to_na().transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::NotSpd(format!(
            "eigenvalue range [{min:e}, {max:e}]"
        )));
    }
    let root = eig.eigenvalues.map(f64::sqrt);
    let r = eig.eigenvectors * Matrix3::from_diagonal(&root) * eig.eigenvectors.transpose();
    let r = (r + r.transpose()) * 0.5;
    Ok(Mat3::from_na(&r))
}

/// Moore-Penrose pseudoinverse via SVD, truncating singular values below
/// `1e-10·σ_max`.
pub fn pseudoinverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = a.shape();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return DMatrix::zeros(k, n);
    }
    let cut = 1e-10 * smax;
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vt");
    let mut out = DMatrix::zeros(k, n);
    for (idx, &s) in svd.singular_values.iter().enumerate() {
        if s <= cut {
            continue;
        }
        let v_col = vt.row(idx).transpose();
        let u_col = u.column(idx);
        out += (v_col * u_col.transpose()) / s;
    }
    out
}

/// Numerical rank with the same truncation rule as [`pseudoinverse`].
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if !(smax > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn heaviside_and_macaulay() {
        assert_eq!(heaviside(0.0), 0.0);
        assert_eq!(heaviside(-2.0), 0.0);
        assert_eq!(heaviside(1e-12), 1.0);
        assert_eq!(macaulay(-3.0), 0.0);
        assert_eq!(macaulay(0.0), 0.0);
        assert_eq!(macaulay(4.2), 4.2);
    }

    #[test]
    fn principal_examples() {
        let p = principal_decomposition(StressV::new(5.0, 0.0, 0.0));
        assert_eq!(p.values, (5.0, 0.0));
        assert_eq!(p.directions, ([1.0, 0.0], [-0.0, 1.0]));

        let p = principal_decomposition(StressV::new(0.0, 0.0, 2.0));
        assert!(close(p.values.0, 2.0, 1e-15) && close(p.values.1, -2.0, 1e-15));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(p.directions.0[0], h, 1e-15) && close(p.directions.0[1], h, 1e-15));

        let p = principal_decomposition(StressV::new(3.0, 3.0, 0.0));
        assert_eq!(p.values, (3.0, 3.0));
        assert_eq!(p.directions.0, [1.0, 0.0]);
    }

    #[test]
    fn split_examples() {
        let f = 4.0;
        let (p, n) = spectral_split(StressV::new(f, 0.0, 0.0));
        assert_eq!(p, StressV::new(f, 0.0, 0.0));
        assert_eq!(n, StressV::ZERO);

        let tau = 2.0;
        let (p, n) = spectral_split(StressV::new(0.0, 0.0, tau));
        for (a, b) in p.to_array().iter().zip([1.0, 1.0, 1.0]) {
            assert!(close(*a, b, 1e-14));
        }
        for (a, b) in n.to_array().iter().zip([-1.0, -1.0, 1.0]) {
            assert!(close(*a, b, 1e-14));
        }

        let s = StressV::new(-1.0, -2.0, 0.0);
        let (p, n) = spectral_split(s);
        assert_eq!(p, StressV::ZERO);
        assert_eq!(n, s);
    }

    #[test]
    fn projector_matches_split() {
        let s = StressV::new(1.3, -0.4, 0.7);
        let (pos, _) = spectral_split(s);
        let via = StressV::from_array(positive_projector(s).mul_vec(s.to_array()));
        assert!((via - pos).norm() < 1e-14);
    }

    #[test]
    fn invariant_examples() {
        let (i1, j2) = invariants(StressV::new(-7.0, 0.0, 0.0));
        assert_eq!(i1, -7.0);
        assert!(close((3.0 * j2).sqrt(), 7.0, 1e-15));
        let (i1, j2) = invariants(StressV::new(2.0, 2.0, 0.0));
        assert_eq!(i1, 4.0);
        assert!(close(j2, 4.0 / 3.0, 1e-15));
        let (i1, j2) = invariants(StressV::new(0.0, 0.0, 3.0));
        assert_eq!(i1, 0.0);
        assert!(close(j2, 9.0, 1e-15));
    }

    #[test]
    fn spd_sqrt_examples() {
        let r = spd_sqrt(&Mat3::IDENTITY).unwrap();
        assert!(r.sub(&Mat3::IDENTITY).max_abs() < 1e-15);
        let r = spd_sqrt(&Mat3::diag(4.0, 9.0, 16.0)).unwrap();
        assert!(r.sub(&Mat3::diag(2.0, 3.0, 4.0)).max_abs() < 1e-14);
        assert!(spd_sqrt(&Mat3::diag(1.0, -1.0, 1.0)).is_err());
        let mut asym = Mat3::IDENTITY;
        asym.0[0][1] = 0.5;
        assert!(spd_sqrt(&asym).is_err());
    }

    #[test]
    fn pinv_examples() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let inv = a.clone().try_inverse().unwrap();
        assert!((pseudoinverse(&a) - inv).amax() < 1e-13);

        let z = DMatrix::<f64>::zeros(3, 5);
        let pz = pseudoinverse(&z);
        assert_eq!(pz.shape(), (5, 3));
        assert_eq!(pz.amax(), 0.0);

        let wide = DMatrix::from_fn(3, 26, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + (i == j % 3) as u8 as f64);
        assert_eq!(numerical_rank(&wide), 3);
        let eye = &wide * pseudoinverse(&wide);
        assert!((eye - DMatrix::identity(3, 3)).amax() < 1e-12);
    }
}
