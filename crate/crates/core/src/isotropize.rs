//! Isotropization of campaign data.
//!
//! The linear range of a campaign gives a raw elasticity matrix. It is
//! symmetrized to orthotropic form, projected onto the closest isotropic
//! plane-stress matrix, and related to it by `T = (√C_iso)⁻¹·√C_ortho`, so
//! that `Tᵀ·C_iso·T = C_ortho`. Histories are mapped into the isotropic
//! space with `ε_iso = T·ε` and `σ_iso = T⁻ᵀ·σ`, which preserves `σ·ε`.
//!
//! Projection metric: both matrices are compared in Mandel form
//! `D·C·D`, `D = diag(1, 1, √2)`. The volumetric modulus `κ*` is the
//! Frobenius projection of the stiffness onto `t = (1, 1, 0)/√2`, which
//! reduces to `mᵀ·C·m / 4`. The shear modulus `μ*` is the Frobenius
//! projection of the compliance onto the deviatoric subspace `K = I − t·tᵀ`,
//! giving `μ* = 1 / tr(K·S_M)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{numerical_rank, pseudoinverse, spd_sqrt, Mat3, StrainV, StressV};
use crate::vlab::{HistoryRecord, HistoryStep};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Result of the elastic identification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityFit {
    pub c_raw: Mat3,
    pub c_ortho: Mat3,
    pub c_iso: Mat3,
    pub t: Mat3,
    /// `‖C_raw − C_ortho‖_F` [Pa].
    pub frobenius_gap: f64,
    /// `‖C_ortho − C_iso‖_F` [Pa].
    pub iso_gap: f64,
    pub kappa_star: f64,
    pub mu_star: f64,
    pub e_iso: f64,
    pub nu_iso: f64,
}

/// Closest isotropic matrix and its moduli.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicProjection {
    pub c_iso: Mat3,
    pub kappa: f64,
    pub mu: f64,
}

/// First-step strain and stress columns of every record.
pub fn extract_linear_pairs(records: &[HistoryRecord]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = records.len();
    let mut strains = DMatrix::zeros(3, n);
    let mut stresses = DMatrix::zeros(3, n);
    for (i, r) in records.iter().enumerate() {
        let first = r.steps.first().ok_or_else(|| Error::Parse {
            what: format!("case {}", r.case_id),
            message: "history has no steps".into(),
        })?;
        for k in 0..3 {
            strains[(k, i)] = first.strain.to_array()[k];
            stresses[(k, i)] = first.stress.to_array()[k];
        }
    }
    let rank = numerical_rank(&strains);
    if rank < 3 {
        return Err(Error::RankDeficient { rank });
    }
    Ok((strains, stresses))
}

/// Least-squares `C_raw = σ̆·ε̆⁺`.
pub fn raw_elasticity(strains: &DMatrix<f64>, stresses: &DMatrix<f64>) -> Result<Mat3> {
    if strains.nrows() != 3 || stresses.shape() != strains.shape() {
        return Err(Error::InvalidParams(format!(
            "strain block {:?} and stress block {:?} must both be 3 x n",
            strains.shape(),
            stresses.shape()
        )));
    }
    let rank = numerical_rank(strains);
    if rank < 3 {
        return Err(Error::RankDeficient { rank });
    }
    let c = stresses * pseudoinverse(strains);
    Ok(Mat3(std::array::from_fn(|i| std::array::from_fn(|j| c[(i, j)]))))
}

/// Drop the normal-shear couplings and symmetrize. Returns the orthotropic
/// matrix and `‖C_raw − C_ortho‖_F`.
pub fn orthotropize(c_raw: &Mat3) -> Result<(Mat3, f64)> {
    let mut c = c_raw.0;
    for k in 0..2 {
        c[k][2] = 0.0;
        c[2][k] = 0.0;
    }
    let off = 0.5 * (c[0][1] + c[1][0]);
    c[0][1] = off;
    c[1][0] = off;
    let ortho = Mat3(c);
    check_spd(&ortho, "orthotropic matrix")?;
    Ok((ortho, c_raw.sub(&ortho).frobenius()))
}

/// Isotropic plane-stress matrix `[[κ+μ, κ−μ, 0], [κ−μ, κ+μ, 0], [0, 0, μ]]`.
pub fn isotropic_matrix(kappa: f64, mu: f64) -> Mat3 {
    Mat3([[kappa + mu, kappa - mu, 0.0], [kappa - mu, kappa + mu, 0.0], [0.0, 0.0, mu]])
}

fn mandel(c: &Mat3) -> Mat3 {
    let d = [1.0, 1.0, SQRT2];
    Mat3(std::array::from_fn(|i| std::array::from_fn(|j| d[i] * c.0[i][j] * d[j])))
}

/// Closest isotropic matrix in the metric described in the module docs.
pub fn closest_isotropic(c: &Mat3) -> Result<IsotropicProjection> {
    check_spd(c, "input of the isotropic projection")?;
    let kappa = 0.25 * (c.0[0][0] + c.0[0][1] + c.0[1][0] + c.0[1][1]);
    let s = mandel(c).inverse().ok_or(Error::Singular)?;
    // tr(K·S) with K = I − t·tᵀ, t = (1, 1, 0)/√2.
    let t_s_t = 0.5 * (s.0[0][0] + s.0[0][1] + s.0[1][0] + s.0[1][1]);
    let trace = s.0[0][0] + s.0[1][1] + s.0[2][2] - t_s_t;
    let mu = 1.0 / trace;
    if !(kappa > 0.0 && mu > 0.0 && mu.is_finite()) {
        return Err(Error::NotSpd(format!("isotropic moduli kappa = {kappa:e}, mu = {mu:e}")));
    }
    Ok(IsotropicProjection {
        c_iso: isotropic_matrix(kappa, mu),
        kappa,
        mu,
    })
}

/// Projection objective: relative stiffness misfit along `t` plus relative
/// compliance misfit on the deviatoric subspace, both in Mandel form.
pub fn projection_distance(c: &Mat3, kappa: f64, mu: f64) -> Result<f64> {
    let cm = mandel(c);
    let sm = cm.inverse().ok_or(Error::Singular)?;
    let t = [1.0 / SQRT2, 1.0 / SQRT2, 0.0];
    let t_c_t: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| t[i] * cm.0[i][j] * t[j]).sum();
    let volumetric = (t_c_t - 2.0 * kappa) / t_c_t;
    let k = Mat3(std::array::from_fn(|i| {
        std::array::from_fn(|j| f64::from(u8::from(i == j)) - t[i] * t[j])
    }));
    let ksk = k.matmul(&sm).matmul(&k);
    let deviatoric = ksk.sub(&k.scale(0.5 / mu)).frobenius() / ksk.frobenius();
    Ok(volumetric * volumetric + deviatoric * deviatoric)
}

/// `T = (√C_iso)⁻¹·√C_ortho`.
pub fn transformation_matrix(c_ortho: &Mat3, c_iso: &Mat3) -> Result<Mat3> {
    let root_ortho = spd_sqrt(c_ortho)?;
    let root_iso = spd_sqrt(c_iso)?;
    let inv = root_iso.inverse().ok_or(Error::Singular)?;
    Ok(inv.matmul(&root_ortho))
}

/// Map a history into the isotropic space.
pub fn map_history(h: &HistoryRecord, t: &Mat3) -> Result<HistoryRecord> {
    let inv_t = t.inverse().ok_or(Error::Singular)?.transpose();
    let steps = h
        .steps
        .iter()
        .map(|s| HistoryStep {
            t: s.t,
            strain: StrainV::from_array(t.mul_vec(s.strain.to_array())),
            stress: StressV::from_array(inv_t.mul_vec(s.stress.to_array())),
        })
        .collect();
    Ok(HistoryRecord {
        steps,
        direction: StrainV::from_array(t.mul_vec(h.direction.to_array())),
        ..h.clone()
    })
}

/// `ν = C12 / C11`, `E = C11·(1 − ν²)`.
pub fn identify_e_nu(c_iso: &Mat3) -> (f64, f64) {
    let nu = c_iso.0[0][1] / c_iso.0[0][0];
    (c_iso.0[0][0] * (1.0 - nu * nu), nu)
}

/// Isotropic projection, transformation and elastic constants of an
/// orthotropic matrix.
pub fn fit_from_ortho(c_raw: Mat3, c_ortho: Mat3, frobenius_gap: f64) -> Result<ElasticityFit> {
    let iso = closest_isotropic(&c_ortho)?;
    let t = transformation_matrix(&c_ortho, &iso.c_iso)?;
    let (e_iso, nu_iso) = identify_e_nu(&iso.c_iso);
    Ok(ElasticityFit {
        c_raw,
        c_ortho,
        c_iso: iso.c_iso,
        t,
        frobenius_gap,
        iso_gap: c_ortho.sub(&iso.c_iso).frobenius(),
        kappa_star: iso.kappa,
        mu_star: iso.mu,
        e_iso,
        nu_iso,
    })
}

/// Whole elastic identification from campaign records.
pub fn fit_elasticity(records: &[HistoryRecord]) -> Result<ElasticityFit> {
    let (strains, stresses) = extract_linear_pairs(records)?;
    let c_raw = raw_elasticity(&strains, &stresses)?;
    let (c_ortho, gap) = orthotropize(&c_raw)?;
    fit_from_ortho(c_raw, c_ortho, gap)
}

impl ElasticityFit {
    /// Verify `Tᵀ·C_iso·T = C_ortho`, returning the relative residual.
    pub fn reconstruction_error(&self) -> f64 {
        let back = self.t.transpose().matmul(&self.c_iso).matmul(&self.t);
        back.sub(&self.c_ortho).frobenius() / self.c_ortho.frobenius()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn check_spd(c: &Mat3, what: &str) -> Result<()> {
    let m = c.to_na();
    if !c.is_finite() || !c.is_symmetric(1e-9) {
        return Err(Error::NotSpd(format!("{what} is not symmetric")));
    }
    let eig = nalgebra::SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues;
    if eig.min() <= 1e-12 * eig.max().abs() {
        return Err(Error::NotSpd(format!("{what} has eigenvalue {:e}", eig.min())));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
