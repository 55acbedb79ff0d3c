//! Compressive hardening-softening law built from three quadratic Bezier
//! segments and a residual plateau, regularized by the characteristic length.

use serde::{Deserialize, Serialize};

use super::bezier::{eval_unchecked, BezierCurve};
use super::MaterialParams;
use crate::error::{Error, Result};

/// Control points of the uniaxial compressive curve (strains positive in
/// compression), already stretched for the characteristic length `l_ch`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionLaw {
    pub e0: f64,
    pub ei: f64,
    pub ep: f64,
    pub ej: f64,
    pub ek: f64,
    pub er: f64,
    pub eu: f64,
    pub f0: f64,
    pub fi: f64,
    pub fp: f64,
    pub fj: f64,
    pub fk: f64,
    pub fr: f64,
    pub fu: f64,
    pub young: f64,
    pub l_ch: f64,
}

/// Unstretched control strains and the two energies that drive the stretch.
#[derive(Debug, Clone, Copy)]
pub struct CompressionEnergies {
    /// Area under the curve up to the peak strain.
    pub hardening: f64,
    /// Area under the unstretched curve up to `ε_u`.
    pub total: f64,
}

struct ControlPoints {
    e0: f64,
    ei: f64,
    ep: f64,
    ej: f64,
    ek: f64,
    er: f64,
    eu: f64,
    fk: f64,
}

fn control_points(p: &MaterialParams) -> Result<ControlPoints> {
    let (s0, sp, sr) = (p.f0c, p.fpc, p.frc);
    if !(sp > 0.0 && s0 > 0.0 && s0 <= sp && sr > 0.0 && sr < sp) {
        return Err(Error::InvalidParams(format!(
            "compressive stresses need 0 < f0c <= fpc and 0 < frc < fpc (f0c={s0}, fpc={sp}, frc={sr})"
        )));
    }
    if !(p.c1 > 0.0 && p.c1 < 1.0 && p.c2 > 0.0 && p.c2 <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "Bezier controllers need 0 < c1 < 1 and 0 < c2 <= 1 (c1={}, c2={})",
            p.c1, p.c2
        )));
    }
    if p.c3 < 1.0 {
        return Err(Error::InvalidParams(format!(
            "Bezier controller c3 = {} < 1 puts the ultimate strain before the residual control strain",
            p.c3
        )));
    }
    let e0 = s0 / p.e;
    let ei = sp / p.e;
    let ep = p.epc;
    let spread = 2.0 * (ep - ei);
    if !(spread > 0.0) {
        return Err(Error::InvalidParams(format!(
            "peak strain {ep} must exceed fpc/E = {ei}"
        )));
    }
    let fk = sr + (sp - sr) * p.c1;
    let ej = ep + spread * p.c2;
    let ek = ej + spread * (1.0 - p.c2);
    let er = (ek - ej) / (sp - fk) * (sp - sr) + ej;
    let eu = er * p.c3;
    Ok(ControlPoints {
        e0,
        ei,
        ep,
        ej,
        ek,
        er,
        eu,
        fk,
    })
}

fn segments(c: &ControlPoints, p: &MaterialParams) -> [BezierCurve; 3] {
    let (s0, sp, sr) = (p.f0c, p.fpc, p.frc);
    [
        BezierCurve::new([c.e0, c.ei, c.ep], [s0, sp, sp]),
        BezierCurve::new([c.ep, c.ej, c.ek], [sp, sp, c.fk]),
        BezierCurve::new([c.ek, c.er, c.eu], [c.fk, sr, sr]),
    ]
}

/// Hardening area and unstretched total area of the compressive curve.
pub fn compression_energies(p: &MaterialParams) -> Result<CompressionEnergies> {
    let c = control_points(p)?;
    let [b1, b2, b3] = segments(&c, p);
    let hardening = 0.5 * c.e0 * p.f0c + b1.area();
    Ok(CompressionEnergies {
        hardening,
        total: hardening + b2.area() + b3.area(),
    })
}

/// Build the regularized compressive law for characteristic length `l_ch`.
///
/// Post-peak control strains are stretched about `ε_p` so that the area under
/// the curve from the origin to `ε_u` equals `Gc / l_ch`.
pub fn build_compression_law(p: &MaterialParams, l_ch: f64) -> Result<CompressionLaw> {
    if !(l_ch > 0.0) {
        return Err(Error::InvalidParams(format!("characteristic length {l_ch} must be positive")));
    }
    let mut c = control_points(p)?;
    let energies = compression_energies(p)?;
    let specific = p.gc / l_ch;
    let factor = (specific - energies.hardening) / (energies.total - energies.hardening);
    if !(factor > 0.0) {
        return Err(Error::SnapBack {
            branch: "compressive",
            length: l_ch,
        });
    }
    for e in [&mut c.ej, &mut c.ek, &mut c.er, &mut c.eu] {
        *e = c.ep + (*e - c.ep) * factor;
    }
    Ok(CompressionLaw {
        e0: c.e0,
        ei: c.ei,
        ep: c.ep,
        ej: c.ej,
        ek: c.ek,
        er: c.er,
        eu: c.eu,
        f0: p.f0c,
        fi: p.fpc,
        fp: p.fpc,
        fj: p.fpc,
        fk: c.fk,
        fr: p.frc,
        fu: p.frc,
        young: p.e,
        l_ch,
    })
}

impl CompressionLaw {
    pub fn segments(&self) -> [BezierCurve; 3] {
        [
            BezierCurve::new([self.e0, self.ei, self.ep], [self.f0, self.fi, self.fp]),
            BezierCurve::new([self.ep, self.ej, self.ek], [self.fp, self.fj, self.fk]),
            BezierCurve::new([self.ek, self.er, self.eu], [self.fk, self.fr, self.fu]),
        ]
    }

    /// Uniaxial stress `Ψ(ξ)` at strain-like abscissa `ξ`.
    pub fn psi(&self, xi: f64) -> f64 {
        if xi <= self.e0 {
            return self.young * xi;
        }
        let [b1, b2, b3] = self.segments();
        if xi <= self.ep {
            eval_unchecked(&b1, xi)
        } else if xi <= self.ek {
            eval_unchecked(&b2, xi)
        } else if xi <= self.eu {
            eval_unchecked(&b3, xi)
        } else {
            self.fu
        }
    }

    /// Area under the curve from the origin to `ε_u`.
    pub fn area(&self) -> f64 {
        let [b1, b2, b3] = self.segments();
        0.5 * self.e0 * self.f0 + b1.area() + b2.area() + b3.area()
    }

    /// Area from the peak to `ε_u`.
    pub fn softening_area(&self) -> f64 {
        let [_, b2, b3] = self.segments();
        b2.area() + b3.area()
    }
}

/// Compressive damage `d⁻ = 1 - Ψ(r⁻/E) / r⁻`.
pub fn d_minus(r_c: f64, law: &CompressionLaw, young: f64) -> f64 {
    if r_c <= law.f0 {
        return 0.0;
    }
    let xi = r_c / young;
    (1.0 - law.psi(xi) / r_c).clamp(0.0, 1.0)
}
