//! Tension/compression (d⁺/d⁻) isotropic damage law for plane stress.
//!
//! The effective stress `σ̄ = C:ε` is split spectrally into `σ̄⁺` and `σ̄⁻`.
//! Two equivalent stresses `τ⁺`, `τ⁻` drive irreversible thresholds
//! `r⁺`, `r⁻`; tension softens exponentially, compression follows a
//! three-segment Bezier hardening-softening curve. Both branches are
//! regularized by the characteristic length handed to [`PointLaw::new`].

mod bezier;
mod compression;

pub use bezier::{bezier_eval, BezierCurve};
pub use compression::{build_compression_law, compression_energies, d_minus, CompressionEnergies, CompressionLaw};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    heaviside, invariants, macaulay, positive_projector, principal_decomposition, spectral_split, Mat3,
    StrainV, StressV,
};

/// Full parameter set of the damage law, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// Young's modulus [Pa].
    pub e: f64,
    pub nu: f64,
    /// Tensile strength, onset and peak coincide [Pa].
    pub ft: f64,
    /// Tensile fracture energy [N/m].
    pub gt: f64,
    /// Compressive damage onset [Pa].
    pub f0c: f64,
    /// Compressive peak [Pa].
    pub fpc: f64,
    /// Compressive residual [Pa].
    pub frc: f64,
    /// Strain at compressive peak.
    pub epc: f64,
    /// Compressive fracture energy [N/m].
    pub gc: f64,
    /// Biaxial to uniaxial compressive strength ratio.
    pub kb: f64,
    /// Shear-compression reduction of the compressive surface.
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl MaterialParams {
    /// Brick unit of the reference Flemish-bond masonry.
    pub const fn brick() -> Self {
        Self {
            e: 7.0e9,
            nu: 0.2,
            ft: 2.0e6,
            gt: 80.0,
            f0c: 8.0e6,
            fpc: 12.0e6,
            frc: 1.0e6,
            epc: 0.004,
            gc: 6000.0,
            kb: 1.2,
            kappa: 0.0,
            c1: 0.65,
            c2: 0.5,
            c3: 1.5,
        }
    }

    /// Mortar joint of the reference Flemish-bond masonry.
    pub const fn mortar() -> Self {
        Self {
            e: 1.8e9,
            nu: 0.2,
            ft: 0.12e6,
            gt: 16.0,
            f0c: 3.0e6,
            fpc: 10.0e6,
            frc: 2.0e6,
            epc: 0.04,
            gc: 80_000.0,
            kb: 1.2,
            kappa: 0.16,
            c1: 0.65,
            c2: 0.5,
            c3: 1.5,
        }
    }

    /// Check the scalar invariants that do not depend on a length scale.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.e, self.nu, self.ft, self.gt, self.f0c, self.fpc, self.frc, self.epc, self.gc, self.kb,
            self.kappa, self.c1, self.c2, self.c3,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if !(self.e > 0.0) || !(0.0..0.5).contains(&self.nu) {
            return Err(Error::InvalidElastic { e: self.e, nu: self.nu });
        }
        let checks: [(bool, &str); 9] = [
            (self.ft > 0.0, "ft > 0"),
            (self.f0c > 0.0 && self.f0c <= self.fpc, "0 < f0c <= fpc"),
            (self.frc > 0.0 && self.frc <= self.fpc, "0 < frc <= fpc"),
            (self.epc > self.f0c / self.e, "epc > f0c/E"),
            (self.gt > 0.0, "Gt > 0"),
            (self.gc > 0.0, "Gc > 0"),
            (self.kb > 1.0, "kb > 1"),
            (self.kappa >= 0.0, "kappa >= 0"),
            (self.c1 > 0.0 && self.c2 > 0.0 && self.c3 > 0.0, "c1, c2, c3 > 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, what)) => Err(Error::InvalidParams(format!("violated {what}"))),
            None => Ok(()),
        }
    }
}

/// History variables of one material point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageState {
    pub r_t: f64,
    pub r_c: f64,
    pub d_t: f64,
    pub d_c: f64,
}

impl DamageState {
    /// Undamaged state with thresholds at the elastic limits.
    pub fn virgin(p: &MaterialParams) -> Self {
        Self {
            r_t: p.ft,
            r_c: p.f0c,
            d_t: 0.0,
            d_c: 0.0,
        }
    }
}

/// Isotropic plane-stress elasticity in engineering-shear Voigt form.
pub fn plane_stress_elasticity(e: f64, nu: f64) -> Result<Mat3> {
    if !(e > 0.0) || !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidElastic { e, nu });
    }
    let f = e / (1.0 - nu * nu);
    Ok(Mat3([
        [f, f * nu, 0.0],
        [f * nu, f, 0.0],
        [0.0, 0.0, f * (1.0 - nu) / 2.0],
    ]))
}

/// Yield-surface shape constants `(α, β)`.
pub fn alpha_beta(p: &MaterialParams) -> (f64, f64) {
    let alpha = (p.kb - 1.0) / (2.0 * p.kb - 1.0);
    let beta = (1.0 - alpha) * p.fpc / p.ft - (1.0 + alpha);
    (alpha, beta)
}

/// Tensile equivalent stress `τ⁺`.
pub fn tau_plus(s_eff: StressV, p: &MaterialParams) -> f64 {
    let (alpha, beta) = alpha_beta(p);
    tau_plus_with(s_eff, alpha, beta, p.ft / p.fpc)
}

fn tau_plus_with(s: StressV, alpha: f64, beta: f64, ratio: f64) -> f64 {
    let smax = principal_decomposition(s).max();
    if heaviside(smax) == 0.0 {
        return 0.0;
    }
    let (i1, j2) = invariants(s);
    (alpha * i1 + (3.0 * j2).sqrt() + beta * smax) / (1.0 - alpha) * ratio
}

/// Compressive equivalent stress `τ⁻`.
pub fn tau_minus(s_eff: StressV, p: &MaterialParams) -> f64 {
    let (alpha, beta) = alpha_beta(p);
    tau_minus_with(s_eff, alpha, beta, p.kappa)
}

fn tau_minus_with(s: StressV, alpha: f64, beta: f64, kappa: f64) -> f64 {
    let pp = principal_decomposition(s);
    if heaviside(-pp.min()) == 0.0 {
        return 0.0;
    }
    let (i1, j2) = invariants(s);
    (alpha * i1 + (3.0 * j2).sqrt() + kappa * beta * macaulay(pp.max())) / (1.0 - alpha)
}

/// Irreversible threshold update `r = max(r_prev, τ)`.
#[inline]
pub fn update_threshold(tau: f64, r_prev: f64) -> f64 {
    r_prev.max(tau)
}

/// Exponential-softening parameter `A` for the tensile branch.
pub fn tension_softening_a(p: &MaterialParams, l_dis: f64) -> Result<f64> {
    let den = p.gt * p.e / (l_dis * p.ft * p.ft) - 0.5;
    if !(den > 0.0) || !(l_dis > 0.0) {
        return Err(Error::SnapBack {
            branch: "tensile",
            length: l_dis,
        });
    }
    Ok(1.0 / den)
}

const MAX_TENSILE_DAMAGE: f64 = 1.0 - 1e-12;

fn d_plus_with(r_t: f64, r0: f64, a: f64) -> f64 {
    if r_t <= r0 {
        return 0.0;
    }
    let d = 1.0 - (r0 / r_t) * (a * (1.0 - r_t / r0)).exp();
    d.clamp(0.0, MAX_TENSILE_DAMAGE)
}

/// Tensile damage `d⁺(r⁺)` regularized at `l_dis`.
pub fn d_plus(r_t: f64, p: &MaterialParams, l_dis: f64) -> Result<f64> {
    let a = tension_softening_a(p, l_dis)?;
    Ok(d_plus_with(r_t, p.ft, a))
}

/// Damage law bound to a characteristic length, with all derived constants
/// precomputed. This is what finite elements and replays hold per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLaw {
    pub params: MaterialParams,
    pub l_dis: f64,
    elastic: Mat3,
    alpha: f64,
    beta: f64,
    tension_a: f64,
    compression: CompressionLaw,
}

impl PointLaw {
    pub fn new(params: &MaterialParams, l_dis: f64) -> Result<Self> {
        params.validate()?;
        let elastic = plane_stress_elasticity(params.e, params.nu)?;
        let (alpha, beta) = alpha_beta(params);
        let tension_a = tension_softening_a(params, l_dis)?;
        let compression = build_compression_law(params, l_dis)?;
        Ok(Self {
            params: *params,
            l_dis,
            elastic,
            alpha,
            beta,
            tension_a,
            compression,
        })
    }

    pub fn elastic(&self) -> &Mat3 {
        &self.elastic
    }

    pub fn compression(&self) -> &CompressionLaw {
        &self.compression
    }

    /// As [`Constitutive::integrate`], also returning the effective stress.
    pub fn integrate_full(&self, eps: StrainV, state: &DamageState) -> (StressV, DamageState, StressV) {
        let p = &self.params;
        let eff = self.elastic.stress_from(eps);
        let (pos, neg) = spectral_split(eff);
        let tau_t = tau_plus_with(eff, self.alpha, self.beta, p.ft / p.fpc);
        let tau_c = tau_minus_with(eff, self.alpha, self.beta, p.kappa);

        let mut next = *state;
        if tau_t > state.r_t {
            next.r_t = update_threshold(tau_t, state.r_t);
            next.d_t = d_plus_with(next.r_t, p.ft, self.tension_a).max(state.d_t);
        }
        if tau_c > state.r_c {
            next.r_c = update_threshold(tau_c, state.r_c);
            next.d_c = d_minus(next.r_c, &self.compression, p.e).max(state.d_c);
        }
        let stress = pos * (1.0 - next.d_t) + neg * (1.0 - next.d_c);
        (stress, next, eff)
    }
}

/// Rate-independent point law with scalar tensile/compressive damage.
pub trait Constitutive {
    fn virgin_state(&self) -> DamageState;

    /// Stress and updated history for total strain `eps` starting from the
    /// last converged `state`.
    fn integrate(&self, eps: StrainV, state: &DamageState) -> (StressV, DamageState);

    /// Secant operator at the trial history, `σ = S·ε`.
    fn secant(&self, eps: StrainV, state: &DamageState) -> Mat3;

    /// Forward-difference tangent at frozen input history.
    fn tangent(&self, eps: StrainV, state: &DamageState, h: f64) -> Mat3 {
        let (base, _) = self.integrate(eps, state);
        self.tangent_from(eps, state, base, h)
    }

    /// Forward-difference tangent reusing the already integrated `base` stress.
    fn tangent_from(&self, eps: StrainV, state: &DamageState, base: StressV, h: f64) -> Mat3 {
        tangent_columns(|e| self.integrate(e, state).0, eps, base, h)
    }
}

impl Constitutive for PointLaw {
    fn virgin_state(&self) -> DamageState {
        DamageState::virgin(&self.params)
    }

    fn integrate(&self, eps: StrainV, state: &DamageState) -> (StressV, DamageState) {
        let (stress, next, _) = self.integrate_full(eps, state);
        (stress, next)
    }

    /// `[(1-d⁺)P⁺ + (1-d⁻)(I-P⁺)]·C`.
    fn secant(&self, eps: StrainV, state: &DamageState) -> Mat3 {
        let (_, next, eff) = self.integrate_full(eps, state);
        let pp = positive_projector(eff);
        let mut blend = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                blend.0[i][j] = (1.0 - next.d_t) * pp.0[i][j] + (1.0 - next.d_c) * (id - pp.0[i][j]);
            }
        }
        blend.matmul(&self.elastic)
    }
}

/// Default perturbation `1e-8·max(‖ε‖, 1e-6)`.
pub fn default_perturbation(eps: StrainV) -> f64 {
    1e-8 * eps.norm().max(1e-6)
}

pub(crate) fn tangent_columns(
    mut eval: impl FnMut(StrainV) -> StressV,
    eps: StrainV,
    base: StressV,
    h: f64,
) -> Mat3 {
    let mut t = Mat3::ZERO;
    for j in 0..3 {
        let mut e = eps.to_array();
        e[j] += h;
        let col = ((eval(StrainV::from_array(e)) - base) * (1.0 / h)).to_array();
        for i in 0..3 {
            t.0[i][j] = col[i];
        }
    }
    t
}

/// One constitutive update for total strain `eps` from history `state`.
pub fn integrate_stress(
    eps: StrainV,
    state: &DamageState,
    p: &MaterialParams,
    l_dis: f64,
) -> Result<(StressV, DamageState)> {
    Ok(PointLaw::new(p, l_dis)?.integrate(eps, state))
}

/// Finite-difference constitutive tangent with perturbation `h`.
pub fn tangent_fd(eps: StrainV, state: &DamageState, p: &MaterialParams, l_dis: f64, h: f64) -> Result<Mat3> {
    Ok(PointLaw::new(p, l_dis)?.tangent(eps, state, h))
}
