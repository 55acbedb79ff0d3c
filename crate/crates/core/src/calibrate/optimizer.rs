//! Bound-constrained trust-region minimization on the unit box.
//!
//! The model is quadratic with a finite-difference gradient and a damped
//! BFGS Hessian. Each subproblem minimizes the model over the intersection
//! of the unit box and an ∞-norm ball by accelerated projected gradient,
//! started from the Cauchy point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::PENALTY;
use crate::error::{Error, Result};

/// Finite-difference scheme for the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gradient {
    Forward,
    Central,
}

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustRegionConfig {
    /// Stop once an accepted step satisfies `‖Δξ‖∞ < tol`.
    pub tol: f64,
    /// Cap on outer iterations, accepted or not.
    pub epochs: usize,
    pub initial_radius: f64,
    pub max_radius: f64,
    /// Finite-difference step in ξ.
    pub fd_step: f64,
    pub gradient: Gradient,
    /// Minimum ratio of actual to predicted reduction for acceptance.
    pub eta: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            epochs: 200,
            initial_radius: 0.5,
            max_radius: 1.0,
            fd_step: 1e-4,
            gradient: Gradient::Forward,
            eta: 1e-4,
        }
    }
}

/// Why the optimizer stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StepTolerance,
    RadiusTolerance,
    StationaryPoint,
    EpochLimit,
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub cost: f64,
    pub step: f64,
}

/// Result of [`minimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub xi: Vec<f64>,
    pub cost: f64,
    pub evaluations: usize,
    pub epochs: usize,
    pub termination: Termination,
    /// Starting point followed by every accepted iterate.
    pub trace: Vec<TraceRow>,
}

fn admissible(f: f64) -> bool {
    f.is_finite() && f < PENALTY
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(b: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    b.iter().map(|row| dot(row, v)).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Finite-difference gradient at `x` (with value `fx`).
struct Probe {
    g: Vec<f64>,
    /// Coordinates whose forward neighbour is infeasible.
    blocked_up: Vec<bool>,
    /// Coordinates whose backward neighbour is infeasible.
    blocked_down: Vec<bool>,
    evaluations: usize,
}

/// Steps that leave the box or hit an infeasible point fall back to the
/// opposite side; a component with no admissible neighbour is zero.
fn gradient(f: &(impl Fn(&[f64]) -> f64 + Sync), x: &[f64], fx: f64, config: &TrustRegionConfig) -> Probe {
    let h = config.fd_step;
    // (admissible value, evaluated, infeasible)
    let probe = |i: usize, d: f64| -> (Option<f64>, usize, bool) {
        let mut y = x.to_vec();
        y[i] += d;
        if !(0.0..=1.0).contains(&y[i]) {
            return (None, 0, false);
        }
        let v = f(&y);
        (Some(v).filter(|v| admissible(*v)), 1, !admissible(v))
    };
    let parts: Vec<(f64, usize, bool, bool)> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let (fwd, n_fwd, up) = probe(i, h);
            let need_backward = config.gradient == Gradient::Central || fwd.is_none();
            let (bwd, n_bwd, down) = if need_backward { probe(i, -h) } else { (None, 0, false) };
            let g = match (config.gradient, fwd, bwd) {
                (Gradient::Central, Some(a), Some(b)) => (a - b) / (2.0 * h),
                (_, Some(a), _) => (a - fx) / h,
                (_, None, Some(b)) => (fx - b) / h,
                (_, None, None) => 0.0,
            };
            (g, n_fwd + n_bwd, up, down)
        })
        .collect();
    Probe {
        g: parts.iter().map(|p| p.0).collect(),
        evaluations: parts.iter().map(|p| p.1).sum(),
        blocked_up: parts.iter().map(|p| p.2).collect(),
        blocked_down: parts.iter().map(|p| p.3).collect(),
    }
}

/// Minimize `gᵀs + ½sᵀBs` over `lo ≤ s ≤ hi`.
fn solve_subproblem(g: &[f64], b: &[Vec<f64>], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = g.len();
    let project = |s: &mut Vec<f64>| {
        for i in 0..n {
            s[i] = s[i].clamp(lo[i], hi[i]);
        }
    };
    let model = |s: &[f64]| dot(g, s) + 0.5 * dot(s, &mat_vec(b, s));
    // Gershgorin bound on the largest eigenvalue.
    let lipschitz = b
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    // Cauchy point: minimizer along the projected steepest-descent path,
    // approximated by backtracking from the largest box-limited step.
    let mut best = vec![0.0; n];
    let mut best_m = 0.0;
    let mut t = hi.iter().zip(lo).map(|(h, l)| h - l).fold(0.0, f64::max) / inf_norm(g).max(f64::MIN_POSITIVE);
    for _ in 0..60 {
        let mut s: Vec<f64> = g.iter().map(|gi| -t * gi).collect();
        project(&mut s);
        let m = model(&s);
        if m < best_m {
            best = s;
            best_m = m;
        }
        t *= 0.5;
    }

    // Accelerated projected gradient from the Cauchy point.
    let step = 1.0 / lipschitz;
    let mut x = best.clone();
    let mut y = best.clone();
    let mut k = 1.0_f64;
    for _ in 0..2000 {
        let grad: Vec<f64> = mat_vec(b, &y).iter().zip(g).map(|(a, c)| a + c).collect();
        let mut next: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - step * gi).collect();
        project(&mut next);
        let k_next = 0.5 * (1.0 + (1.0 + 4.0 * k * k).sqrt());
        let moved = next.iter().zip(&x).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        y = next.iter().zip(&x).map(|(a, c)| a + (k - 1.0) / k_next * (a - c)).collect();
        project(&mut y);
        x = next;
        k = k_next;
        if moved <= 1e-14 * (1.0 + inf_norm(&x)) {
            break;
        }
    }
    if model(&x) < best_m {
        x
    } else {
        best
    }
}

/// Powell-damped BFGS update of `b` with step `s` and gradient change `y`.
fn damped_bfgs(b: &mut [Vec<f64>], s: &[f64], y: &[f64]) {
    let bs = mat_vec(b, s);
    let sbs = dot(s, &bs);
    if !(sbs > 0.0) {
        return;
    }
    let sy = dot(s, y);
    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
    let r: Vec<f64> = y.iter().zip(&bs).map(|(yi, bi)| theta * yi + (1.0 - theta) * bi).collect();
    let sr = dot(s, &r);
    if !(sr > 0.0) {
        return;
    }
    for i in 0..b.len() {
        for j in 0..b.len() {
            b[i][j] += r[i] * r[j] / sr - bs[i] * bs[j] / sbs;
        }
    }
}

/// Minimize `f` over `[0, 1]^n` starting from the admissible point `x0`.
pub fn minimize(f: impl Fn(&[f64]) -> f64 + Sync, x0: &[f64], config: &TrustRegionConfig) -> Result<Minimum> {
    let n = x0.len();
    if x0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParams("starting point outside the unit box".into()));
    }
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evaluations = 1;
    if !admissible(fx) {
        return Err(Error::NoProgress { evaluations });
    }
    let mut probe = gradient(&f, &x, fx, config);
    evaluations += probe.evaluations;
    let mut radius = config.initial_radius;
    let mut b: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0; n];
            row[i] = (inf_norm(&probe.g) / radius).max(f64::MIN_POSITIVE);
            row
        })
        .collect();
    let mut trace = vec![TraceRow {
        epoch: 0,
        cost: fx,
        step: 0.0,
    }];
    let mut accepted = 0;
    let mut rejected_evaluations = 0;
    let mut epoch = 0;
    let termination = loop {
        if epoch >= config.epochs {
            break Termination::EpochLimit;
        }
        epoch += 1;
        // Directions that lead straight into an infeasible neighbour are frozen.
        let lo: Vec<f64> = (0..n)
            .map(|i| if probe.blocked_down[i] { 0.0 } else { (-x[i]).max(-radius) })
            .collect();
        let hi: Vec<f64> = (0..n)
            .map(|i| if probe.blocked_up[i] { 0.0 } else { (1.0 - x[i]).min(radius) })
            .collect();
        let g = &probe.g;
        let s = solve_subproblem(g, &b, &lo, &hi);
        let predicted = -(dot(g, &s) + 0.5 * dot(&s, &mat_vec(&b, &s)));
        if !(predicted > 0.0) || inf_norm(&s) == 0.0 {
            break Termination::StationaryPoint;
        }
        let trial: Vec<f64> = x.iter().zip(&s).map(|(a, c)| (a + c).clamp(0.0, 1.0)).collect();
        let f_trial = f(&trial);
        evaluations += 1;
        let rho = if admissible(f_trial) { (fx - f_trial) / predicted } else { f64::NEG_INFINITY };
        let step = inf_norm(&s);
        if rho > config.eta && f_trial <= fx {
            let next = gradient(&f, &trial, f_trial, config);
            evaluations += next.evaluations;
            let y: Vec<f64> = next.g.iter().zip(g).map(|(a, c)| a - c).collect();
            damped_bfgs(&mut b, &s, &y);
            x = trial;
            fx = f_trial;
            probe = next;
            accepted += 1;
            trace.push(TraceRow {
                epoch,
                cost: fx,
                step,
            });
            if rho > 0.75 && step >= 0.99 * radius {
                radius = (2.0 * radius).min(config.max_radius);
            }
            if step < config.tol {
                break Termination::StepTolerance;
            }
        } else {
            rejected_evaluations += 1;
            if accepted == 0 && rejected_evaluations >= 3 * n {
                return Err(Error::NoProgress { evaluations });
            }
        }
        if rho < 0.25 {
            radius *= 0.25;
        }
        if radius < config.tol {
            if accepted == 0 {
                return Err(Error::NoProgress { evaluations });
            }
            break Termination::RadiusTolerance;
        }
    };
    Ok(Minimum {
        xi: x,
        cost: fx,
        evaluations,
        epochs: epoch,
        termination,
        trace,
    })
}
