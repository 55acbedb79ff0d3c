//! Incremental Newton solver for displacement-driven plane-stress problems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::banded::{reverse_cuthill_mckee, BandMatrix};
use super::element::ElementKernel;
use super::mesh::{characteristic_lengths, Mesh};
use crate::damage::{default_perturbation, Constitutive, DamageState, MaterialParams, PointLaw};
use crate::error::{Error, Result};
use crate::macro_law::{MacroLaw, MacroPoint};
use crate::tensor::{Mat3, StrainV, StressV};

/// Constitutive model attached to a material id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MaterialModel {
    Damage(MaterialParams),
    Macro(MacroLaw),
}

impl MaterialModel {
    /// Bind the model to an element of crack-band length `l`.
    pub fn bind(&self, l: f64) -> Result<ElementLaw> {
        Ok(match self {
            MaterialModel::Damage(p) => ElementLaw::Damage(PointLaw::new(p, l)?),
            MaterialModel::Macro(m) => ElementLaw::Macro(m.bind(l)?),
        })
    }
}

/// Constitutive law of one element, regularized at its own length.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementLaw {
    Damage(PointLaw),
    Macro(MacroPoint),
}

impl Constitutive for ElementLaw {
    fn virgin_state(&self) -> DamageState {
        match self {
            ElementLaw::Damage(l) => l.virgin_state(),
            ElementLaw::Macro(l) => l.virgin_state(),
        }
    }

    fn integrate(&self, eps: StrainV, state: &DamageState) -> (StressV, DamageState) {
        match self {
            ElementLaw::Damage(l) => l.integrate(eps, state),
            ElementLaw::Macro(l) => l.integrate(eps, state),
        }
    }

    fn secant(&self, eps: StrainV, state: &DamageState) -> Mat3 {
        match self {
            ElementLaw::Damage(l) => l.secant(eps, state),
            ElementLaw::Macro(l) => l.secant(eps, state),
        }
    }
}

/// Newton and load-stepping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Residual tolerance relative to the reaction-force norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iterations with the consistent tangent before switching to the secant.
    pub secant_after: usize,
    pub max_bisections: u32,
    /// Residual ratio at which an increment that used up its iterations is
    /// still committed from its best iterate; zero disables the fallback.
    pub relaxed_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 40,
            secant_after: 10,
            max_bisections: 8,
            relaxed_tolerance: 1e-3,
        }
    }
}

/// Nodal displacements and Gauss-point histories of a converged increment.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub damage: Vec<[DamageState; 4]>,
    pub stress: Vec<[StressV; 4]>,
    /// Assembled internal nodal forces; at constrained DOFs these are the reactions.
    pub force: Vec<f64>,
}

/// Radial strain drive of the whole boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDrive {
    pub eps: StrainV,
    pub lambda_max: f64,
    pub steps: usize,
    /// Optional first step at this small amplitude, ahead of the uniform
    /// schedule, so that the record starts with an elastic sample.
    #[serde(default)]
    pub probe: f64,
}

impl BoundaryDrive {
    pub fn new(eps: StrainV, lambda_max: f64, steps: usize) -> Result<Self> {
        if (eps.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("drive direction norm {} is not 1", eps.norm())));
        }
        if steps == 0 || !(lambda_max > 0.0) {
            return Err(Error::InvalidParams("drive needs steps >= 1 and a positive amplitude".into()));
        }
        Ok(Self {
            eps,
            lambda_max,
            steps,
            probe: 0.0,
        })
    }

    /// Prepend a probe step at amplitude `probe`. It is ignored unless it is
    /// positive and below the first uniform amplitude.
    pub fn with_probe(self, probe: f64) -> Self {
        Self { probe, ..self }
    }

    /// Amplitude after step `n` of the uniform schedule.
    pub fn amplitude(&self, n: usize) -> f64 {
        self.lambda_max * n as f64 / self.steps as f64
    }

    /// Every amplitude of the drive in order.
    pub fn schedule(&self) -> Vec<f64> {
        let probe = (self.probe > 0.0 && self.probe < self.amplitude(1)).then_some(self.probe);
        probe.into_iter().chain((1..=self.steps).map(|n| self.amplitude(n))).collect()
    }
}

/// Affine boundary displacements `(node, [d_x, d_y])` for strain `eps` at
/// amplitude `t`, measured from the lower-left corner of the mesh.
pub fn apply_boundary_strain(mesh: &Mesh, eps: StrainV, t: f64) -> Vec<(usize, [f64; 2])> {
    let b = mesh.bounding_box();
    mesh.boundary_nodes()
        .into_iter()
        .map(|n| (n, affine_displacement(mesh.nodes[n], [b[0], b[1]], eps, t)))
        .collect()
}

fn affine_displacement(p: [f64; 2], origin: [f64; 2], eps: StrainV, t: f64) -> [f64; 2] {
    let (x, y) = (p[0] - origin[0], p[1] - origin[1]);
    let half = 0.5 * eps.gxy;
    [(eps.exx * x + half * y) * t, (eps.eyy * y + half * x) * t]
}

/// Volume-averaged stress `(1/A)·Σ_j (A_j/4)·Σ_l σ_jl`.
pub fn upscale_stress(mesh: &Mesh, state: &FieldState) -> StressV {
    let mut acc = StressV::ZERO;
    let mut area = 0.0;
    for (e, gp) in state.stress.iter().enumerate() {
        let a = mesh.element_area(e);
        area += a;
        let sum = gp.iter().fold(StressV::ZERO, |s, &g| s + g);
        acc = acc + sum * (a / gp.len() as f64);
    }
    acc * (1.0 / area)
}

/// Convergence statistics of one accepted load step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
    pub bisections: u32,
    pub substeps: usize,
    /// Substeps committed under the relaxed tolerance.
    pub relaxed: usize,
}

struct Evaluation {
    strain: Vec<[StrainV; 4]>,
    stress: Vec<[StressV; 4]>,
    damage: Vec<[DamageState; 4]>,
    force: Vec<[f64; 8]>,
}

/// Smallest step fraction tried by the line search.
const LINE_SEARCH_MIN: f64 = 0.125;

struct Trial {
    eval: Evaluation,
    force: Vec<f64>,
    residual: Vec<f64>,
    r_norm: f64,
    reaction: f64,
}

#[derive(Clone, Copy)]
enum Stiffness {
    Tangent,
    Secant,
}

/// One nonlinear analysis owning its mesh, element laws and field state.
#[derive(Debug, Clone)]
pub struct Analysis {
    mesh: Mesh,
    kernels: Vec<ElementKernel>,
    laws: Vec<ElementLaw>,
    dofs: Vec<[usize; 8]>,
    prescribed: Vec<usize>,
    equation: Vec<Option<usize>>,
    n_free: usize,
    bandwidth: usize,
    config: SolverConfig,
    state: FieldState,
    t: f64,
    peak_reaction: f64,
}

impl Analysis {
    /// Set up an analysis with the listed global DOFs (`2·node + component`)
    /// under displacement control. Every element is bound to
    /// `models[material_id]` at its own crack-band length.
    pub fn new(mesh: Mesh, models: &[MaterialModel], prescribed: Vec<usize>, config: SolverConfig) -> Result<Self> {
        mesh.validate(models.len())?;
        let (lengths, _) = characteristic_lengths(&mesh);
        let kernels = (0..mesh.element_count())
            .map(|e| ElementKernel::new(mesh.element_coords(e), mesh.thickness))
            .collect::<Result<Vec<_>>>()?;
        let laws = (0..mesh.element_count())
            .map(|e| models[mesh.material[e]].bind(lengths[e]))
            .collect::<Result<Vec<_>>>()?;
        let n_dof = 2 * mesh.node_count();
        let mut prescribed = prescribed;
        prescribed.sort_unstable();
        prescribed.dedup();
        if prescribed.last().is_some_and(|&d| d >= n_dof) {
            return Err(Error::Geometry("prescribed DOF outside the mesh".into()));
        }
        let mut fixed = vec![false; n_dof];
        prescribed.iter().for_each(|&d| fixed[d] = true);

        let mut adjacency = vec![Vec::new(); mesh.node_count()];
        for conn in &mesh.elements {
            for &a in conn {
                for &b in conn {
                    if a != b {
                        adjacency[a].push(b);
                    }
                }
            }
        }
        adjacency.iter_mut().for_each(|v| {
            v.sort_unstable();
            v.dedup();
        });
        let mut equation = vec![None; n_dof];
        let mut n_free = 0;
        for node in reverse_cuthill_mckee(&adjacency) {
            for d in [2 * node, 2 * node + 1] {
                if !fixed[d] {
                    equation[d] = Some(n_free);
                    n_free += 1;
                }
            }
        }
        let dofs: Vec<[usize; 8]> = mesh
            .elements
            .iter()
            .map(|c| std::array::from_fn(|k| 2 * c[k / 2] + k % 2))
            .collect();
        let bandwidth = dofs
            .iter()
            .map(|d| {
                let eq: Vec<usize> = d.iter().filter_map(|&g| equation[g]).collect();
                match (eq.iter().min(), eq.iter().max()) {
                    (Some(lo), Some(hi)) => hi - lo,
                    _ => 0,
                }
            })
            .max()
            .unwrap_or(0);
        let state = FieldState {
            u: vec![0.0; n_dof],
            damage: laws.iter().map(|l| [l.virgin_state(); 4]).collect(),
            stress: vec![[StressV::ZERO; 4]; mesh.element_count()],
            force: vec![0.0; n_dof],
        };
        Ok(Self {
            mesh,
            kernels,
            laws,
            dofs,
            prescribed,
            equation,
            n_free,
            bandwidth,
            config,
            state,
            t: 0.0,
            peak_reaction: 0.0,
        })
    }

    /// Analysis of a cell whose entire boundary follows the affine strain map.
    pub fn with_boundary_strain(mesh: Mesh, models: &[MaterialModel], config: SolverConfig) -> Result<Self> {
        let prescribed = mesh.boundary_nodes().into_iter().flat_map(|n| [2 * n, 2 * n + 1]).collect();
        Self::new(mesh, models, prescribed, config)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn laws(&self) -> &[ElementLaw] {
        &self.laws
    }

    /// Constrained global DOFs, ascending.
    pub fn prescribed(&self) -> &[usize] {
        &self.prescribed
    }

    /// Current pseudo-time of the last converged state.
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn upscaled_stress(&self) -> StressV {
        upscale_stress(&self.mesh, &self.state)
    }

    /// Sum of reaction forces in direction `component` over `nodes`.
    pub fn reaction(&self, nodes: &[usize], component: usize) -> f64 {
        nodes.iter().map(|&n| self.state.force[2 * n + component]).sum()
    }

    /// Prescribed DOF values of the affine strain drive `eps` as a function
    /// of the amplitude.
    pub fn affine_drive(&self, eps: StrainV) -> impl Fn(f64) -> Vec<f64> + Sync {
        let b = self.mesh.bounding_box();
        let points: Vec<([f64; 2], usize)> =
            self.prescribed.iter().map(|&d| (self.mesh.nodes[d / 2], d % 2)).collect();
        move |t| {
            points
                .iter()
                .map(|&(p, c)| affine_displacement(p, [b[0], b[1]], eps, t)[c])
                .collect()
        }
    }

    /// Advance from the current pseudo-time to `t_target`, where `drive(t)`
    /// returns the prescribed DOF values. Failed increments are bisected up to
    /// the configured depth.
    pub fn advance(&mut self, t_target: f64, drive: &(dyn Fn(f64) -> Vec<f64> + Sync)) -> Result<StepInfo> {
        let mut info = StepInfo::default();
        let t0 = self.t;
        let mut level: u32 = 0;
        let mut frac = 0.0;
        let full = t_target - t0;
        while frac < 1.0 {
            let step = (0.5f64).powi(level as i32);
            let next = (frac + step).min(1.0);
            let t = if next >= 1.0 { t_target } else { t0 + full * next };
            match self.solve(t, &drive(t)) {
                Ok((iterations, relaxed)) => {
                    info.iterations += iterations;
                    info.substeps += 1;
                    info.relaxed += usize::from(relaxed);
                    frac = next;
                }
                Err(_) if level < self.config.max_bisections => {
                    level += 1;
                    info.bisections = info.bisections.max(level);
                }
                Err(_) => {
                    return Err(Error::Diverged {
                        t,
                        bisections: level,
                    })
                }
            }
        }
        Ok(info)
    }

    /// Newton solve of one increment to pseudo-time `t` with prescribed DOF
    /// values `values`; commits the state on success and returns the
    /// number of linear solves.
    pub fn solve_increment(&mut self, t: f64, values: &[f64]) -> Result<usize> {
        self.solve(t, values).map(|(iterations, _)| iterations)
    }

    /// Newton iterations of one increment. Returns the number of linear
    /// solves and whether the relaxed tolerance was needed.
    fn solve(&mut self, t: f64, values: &[f64]) -> Result<(usize, bool)> {
        if values.len() != self.prescribed.len() {
            return Err(Error::InvalidParams(format!(
                "{} prescribed values for {} constrained DOFs",
                values.len(),
                self.prescribed.len()
            )));
        }
        let mut u = self.predict(values)?;
        let mut trial = self.residual(&u);
        let mut best: Option<(f64, Vec<f64>, Trial)> = None;
        for it in 0..=self.config.max_iterations {
            if !trial.r_norm.is_finite() || !trial.reaction.is_finite() {
                return Err(Error::Diverged { t, bisections: 0 });
            }
            let reference = trial.reaction.max(1e-3 * self.peak_reaction);
            let ratio = if trial.r_norm == 0.0 { 0.0 } else { trial.r_norm / reference };
            if ratio <= self.config.tolerance {
                self.commit(t, u, trial);
                return Ok((it, false));
            }
            if it == self.config.max_iterations {
                if best.as_ref().is_none_or(|b| ratio < b.0) {
                    best = Some((ratio, u, trial));
                }
                break;
            }
            let mode = if it < self.config.secant_after {
                Stiffness::Tangent
            } else {
                Stiffness::Secant
            };
            let lu = self.band(&self.element_blocks(&trial.eval, mode)).factor()?;
            let mut du: Vec<f64> = trial.residual.iter().map(|r| -r).collect();
            lu.solve(&mut du);
            // Backtrack while the residual grows; the last halving is kept.
            let mut alpha = 1.0;
            let next = loop {
                let mut next = u.clone();
                for (d, eq) in self.equation.iter().enumerate() {
                    if let Some(q) = eq {
                        next[d] += alpha * du[*q];
                    }
                }
                let candidate = self.residual(&next);
                if candidate.r_norm < trial.r_norm || alpha <= LINE_SEARCH_MIN {
                    break (next, candidate);
                }
                alpha *= 0.5;
            };
            if best.as_ref().is_none_or(|b| ratio < b.0) {
                best = Some((ratio, std::mem::replace(&mut u, next.0), std::mem::replace(&mut trial, next.1)));
            } else {
                (u, trial) = next;
            }
        }
        match best {
            Some((ratio, u, trial)) if ratio <= self.config.relaxed_tolerance => {
                self.commit(t, u, trial);
                Ok((self.config.max_iterations, true))
            }
            _ => Err(Error::Diverged { t, bisections: 0 }),
        }
    }

    fn commit(&mut self, t: f64, u: Vec<f64>, trial: Trial) {
        self.peak_reaction = self.peak_reaction.max(trial.reaction);
        self.state = FieldState {
            u,
            damage: trial.eval.damage,
            stress: trial.eval.stress,
            force: trial.force,
        };
        self.t = t;
    }

    fn residual(&self, u: &[f64]) -> Trial {
        let eval = self.evaluate(u);
        let mut force = vec![0.0; u.len()];
        for (dofs, fe) in self.dofs.iter().zip(&eval.force) {
            for k in 0..8 {
                force[dofs[k]] += fe[k];
            }
        }
        let mut residual = vec![0.0; self.n_free];
        for (d, eq) in self.equation.iter().enumerate() {
            if let Some(q) = eq {
                residual[*q] = force[d];
            }
        }
        let r_norm = norm(&residual);
        let reaction = self.prescribed.iter().map(|&d| force[d] * force[d]).sum::<f64>().sqrt();
        Trial {
            eval,
            force,
            residual,
            r_norm,
            reaction,
        }
    }

    fn evaluate(&self, u: &[f64]) -> Evaluation {
        let per: Vec<_> = (0..self.kernels.len())
            .into_par_iter()
            .map(|e| {
                let ue: [f64; 8] = self.dofs[e].map(|d| u[d]);
                let k = &self.kernels[e];
                let mut f = [0.0; 8];
                let mut strain = [StrainV::ZERO; 4];
                let mut stress = [StressV::ZERO; 4];
                let mut damage = self.state.damage[e];
                for g in 0..4 {
                    let eps = k.strain(g, &ue);
                    let (s, next) = self.laws[e].integrate(eps, &self.state.damage[e][g]);
                    k.add_force(g, s, &mut f);
                    strain[g] = eps;
                    stress[g] = s;
                    damage[g] = next;
                }
                (strain, stress, damage, f)
            })
            .collect();
        let mut ev = Evaluation {
            strain: Vec::with_capacity(per.len()),
            stress: Vec::with_capacity(per.len()),
            damage: Vec::with_capacity(per.len()),
            force: Vec::with_capacity(per.len()),
        };
        for (a, b, c, d) in per {
            ev.strain.push(a);
            ev.stress.push(b);
            ev.damage.push(c);
            ev.force.push(d);
        }
        ev
    }

    /// Tangent predictor from the committed state: prescribed DOFs jump to
    /// `values` and the free DOFs follow through the committed stiffness.
    fn predict(&self, values: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.state.u.clone();
        let mut jump = vec![0.0; u.len()];
        for (&d, &v) in self.prescribed.iter().zip(values) {
            jump[d] = v - u[d];
            u[d] = v;
        }
        if jump.iter().all(|&j| j == 0.0) || self.n_free == 0 {
            return Ok(u);
        }
        let committed = self.evaluate(&self.state.u);
        let blocks = self.element_blocks(&committed, Stiffness::Tangent);
        let mut rhs = vec![0.0; self.n_free];
        for (e, dofs) in self.dofs.iter().enumerate() {
            for r in 0..8 {
                let Some(i) = self.equation[dofs[r]] else { continue };
                let mut f = committed.force[e][r];
                for c in 0..8 {
                    f += blocks[e][r][c] * jump[dofs[c]];
                }
                rhs[i] -= f;
            }
        }
        self.band(&blocks).factor()?.solve(&mut rhs);
        for (d, eq) in self.equation.iter().enumerate() {
            if let Some(q) = eq {
                u[d] += rhs[*q];
            }
        }
        Ok(u)
    }

    fn element_blocks(&self, eval: &Evaluation, mode: Stiffness) -> Vec<[[f64; 8]; 8]> {
        (0..self.kernels.len())
            .into_par_iter()
            .map(|e| {
                let mut ke = [[0.0; 8]; 8];
                for g in 0..4 {
                    let eps = eval.strain[e][g];
                    let hist = &self.state.damage[e][g];
                    let d = match mode {
                        Stiffness::Tangent => {
                            self.laws[e].tangent_from(eps, hist, eval.stress[e][g], default_perturbation(eps))
                        }
                        Stiffness::Secant => self.laws[e].secant(eps, hist),
                    };
                    self.kernels[e].add_stiffness(g, &d, &mut ke);
                }
                ke
            })
            .collect()
    }

    fn band(&self, blocks: &[[[f64; 8]; 8]]) -> BandMatrix {
        let mut k = BandMatrix::zeros(self.n_free, self.bandwidth, self.bandwidth);
        for (dofs, ke) in self.dofs.iter().zip(blocks) {
            for r in 0..8 {
                let Some(i) = self.equation[dofs[r]] else { continue };
                for c in 0..8 {
                    if let Some(j) = self.equation[dofs[c]] {
                        k.add(i, j, ke[r][c]);
                    }
                }
            }
        }
        k
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
