//! Wall analyses used to compare the micro model with the calibrated macro law.
//!
//! The base of the wall is clamped and the top edge is driven as a rigid
//! plate: a vertical displacement, optionally followed by a horizontal one at
//! constant vertical displacement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{characteristic_lengths, Analysis, FlemishGeometry, MaterialModel, Mesh, SolverConfig};

/// Displacement program of the top edge. Displacements are magnitudes; the
/// vertical one pushes the top down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WallProgram {
    Compression {
        dy_max: f64,
        steps: usize,
    },
    ShearCompression {
        dy: f64,
        pre_steps: usize,
        dx_max: f64,
        steps: usize,
    },
}

impl WallProgram {
    pub fn total_steps(&self) -> usize {
        match *self {
            WallProgram::Compression { steps, .. } => steps,
            WallProgram::ShearCompression { pre_steps, steps, .. } => pre_steps + steps,
        }
    }

    /// Top displacement `(d_x, d_y)` at pseudo-time `t ∈ [0, total_steps]`.
    pub fn displacement(&self, t: f64) -> (f64, f64) {
        match *self {
            WallProgram::Compression { dy_max, steps } => (0.0, -dy_max * t / steps as f64),
            WallProgram::ShearCompression {
                dy,
                pre_steps,
                dx_max,
                steps,
            } => {
                let pre = pre_steps as f64;
                if t <= pre {
                    (0.0, -dy * t / pre)
                } else {
                    (dx_max * (t - pre) / steps as f64, -dy)
                }
            }
        }
    }

    /// Reaction component that measures the response: 1 for compression,
    /// 0 for shear.
    pub fn measured_component(&self) -> usize {
        match self {
            WallProgram::Compression { .. } => 1,
            WallProgram::ShearCompression { .. } => 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            WallProgram::Compression { dy_max, steps } => dy_max >= 0.0 && steps > 0,
            WallProgram::ShearCompression {
                dy,
                pre_steps,
                dx_max,
                steps,
            } => dy >= 0.0 && dx_max >= 0.0 && pre_steps > 0 && steps > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("wall program {self:?} needs non-negative displacements and steps")))
        }
    }
}

/// Reaction of the top edge after one converged step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub dx: f64,
    pub dy: f64,
    pub fx: f64,
    pub fy: f64,
}

/// Element-wise damage and displacement magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub x: f64,
    pub y: f64,
    pub d_t: f64,
    pub d_c: f64,
    pub u: f64,
}

/// How a wall analysis ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WallStatus {
    Completed,
    /// The reaction dropped below the failure fraction of its peak.
    Failed,
    /// The solver gave up at pseudo-time `t`; the curve holds converged steps.
    Diverged { t: f64 },
}

/// Curve and snapshots of one wall analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallResult {
    pub curve: Vec<CurveRow>,
    /// Snapshots keyed by step.
    pub snapshots: BTreeMap<usize, Vec<SnapshotRow>>,
    pub status: WallStatus,
    pub elements: usize,
    pub characteristic_length: f64,
}

/// Controls of a wall run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallRunConfig {
    pub solver: SolverConfig,
    /// Store a damage snapshot every this many steps, and at the last step.
    pub snapshot_every: usize,
    /// Stop once the measured reaction drops below this fraction of its peak.
    pub failure_ratio: f64,
}

impl Default for WallRunConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            snapshot_every: 10,
            failure_ratio: 0.05,
        }
    }
}

/// Flemish-bond micro mesh of a `width × height` wall.
pub fn micro_wall_mesh(geometry: &FlemishGeometry, width: f64, height: f64) -> Result<Mesh> {
    geometry.mesh_window(width, height)
}

/// Uniform macro mesh of a `width × height` wall with a single material.
pub fn macro_wall_mesh(width: f64, height: f64, nx: usize, ny: usize, thickness: f64) -> Result<Mesh> {
    crate::fem::uniform_grid(width, height, nx, ny, thickness)
}

fn snapshot(a: &Analysis) -> Vec<SnapshotRow> {
    let mesh = a.mesh();
    let st = a.state();
    (0..mesh.element_count())
        .map(|e| {
            let [x, y] = mesh.centroid(e);
            let gp = &st.damage[e];
            let n = gp.len() as f64;
            let u = mesh.elements[e]
                .iter()
                .map(|&node| st.u[2 * node].hypot(st.u[2 * node + 1]))
                .sum::<f64>()
                / 4.0;
            SnapshotRow {
                x,
                y,
                d_t: gp.iter().map(|d| d.d_t).sum::<f64>() / n,
                d_c: gp.iter().map(|d| d.d_c).sum::<f64>() / n,
                u,
            }
        })
        .collect()
}

/// Run `program` on a wall. Solver failure after 10% of the program ends the
/// curve early with the status flagged; earlier failure is an error.
pub fn run_wall(mesh: Mesh, models: &[MaterialModel], program: &WallProgram, config: &WallRunConfig) -> Result<WallResult> {
    program.validate()?;
    let bottom = mesh.bottom_nodes();
    let top = mesh.top_nodes();
    let mut dofs: Vec<usize> = Vec::with_capacity(2 * (bottom.len() + top.len()));
    for n in bottom.iter().chain(&top) {
        dofs.extend([2 * n, 2 * n + 1]);
    }
    let elements = mesh.element_count();
    let characteristic_length = characteristic_lengths(&mesh).1;
    let mut analysis = Analysis::new(mesh, models, dofs, config.solver)?;
    let top_set: BTreeMap<usize, usize> = top.iter().flat_map(|&n| [(2 * n, 0), (2 * n + 1, 1)]).collect();
    let prescribed = analysis.prescribed().to_vec();
    let program = *program;
    let drive = move |t: f64| {
        let (dx, dy) = program.displacement(t);
        prescribed
            .iter()
            .map(|d| match top_set.get(d) {
                Some(0) => dx,
                Some(_) => dy,
                None => 0.0,
            })
            .collect::<Vec<f64>>()
    };
    let total = program.total_steps();
    let component = program.measured_component();
    let mut result = WallResult {
        curve: Vec::with_capacity(total),
        snapshots: BTreeMap::new(),
        status: WallStatus::Completed,
        elements,
        characteristic_length,
    };
    let mut peak: f64 = 0.0;
    for step in 1..=total {
        if let Err(e) = analysis.advance(step as f64, &drive) {
            let t = match e {
                Error::Diverged { t, .. } => t,
                other => return Err(other),
            };
            if (step - 1) * 10 < total {
                return Err(e);
            }
            result.status = WallStatus::Diverged { t };
            break;
        }
        let (dx, dy) = program.displacement(step as f64);
        let row = CurveRow {
            step,
            dx,
            dy,
            fx: analysis.reaction(&top, 0),
            fy: analysis.reaction(&top, 1),
        };
        result.curve.push(row);
        let measured = [row.fx, row.fy][component].abs();
        peak = peak.max(measured);
        let failed = peak > 0.0 && measured < config.failure_ratio * peak;
        if config.snapshot_every > 0 && (step % config.snapshot_every == 0 || step == total || failed) {
            result.snapshots.insert(step, snapshot(&analysis));
        }
        if failed {
            result.status = WallStatus::Failed;
            break;
        }
    }
    if let (Some(last), WallStatus::Diverged { .. }) = (result.curve.last(), result.status) {
        result.snapshots.entry(last.step).or_insert_with(|| snapshot(&analysis));
    }
    Ok(result)
}

impl WallResult {
    /// Secant stiffness of the measured reaction over the first step [N/m].
    pub fn initial_stiffness(&self, program: &WallProgram) -> Option<f64> {
        let c = program.measured_component();
        let first = match program {
            WallProgram::Compression { .. } => self.curve.first()?,
            WallProgram::ShearCompression { pre_steps, .. } => self.curve.iter().find(|r| r.step == pre_steps + 1)?,
        };
        let before = self.curve.iter().find(|r| r.step + 1 == first.step);
        let (d0, f0) = before.map_or((0.0, 0.0), |r| ([r.dx, r.dy][c], [r.fx, r.fy][c]));
        let d = [first.dx, first.dy][c] - d0;
        let f = [first.fx, first.fy][c] - f0;
        (d != 0.0).then(|| (f / d).abs())
    }

    /// Largest magnitude of the measured reaction.
    pub fn peak_reaction(&self, program: &WallProgram) -> f64 {
        let c = program.measured_component();
        self.curve.iter().map(|r| [r.fx, r.fy][c].abs()).fold(0.0, f64::max)
    }

    /// `step,dx,dy,fx,fy` CSV.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("step,dx,dy,fx,fy\n");
        for r in &self.curve {
            out.push_str(&format!("{},{},{},{},{}\n", r.step, r.dx, r.dy, r.fx, r.fy));
        }
        out
    }

    /// `x,y,d_t,d_c,u` CSV of the snapshot at `step`.
    pub fn snapshot_csv(&self, step: usize) -> Option<String> {
        let rows = self.snapshots.get(&step)?;
        let mut out = String::from("x,y,d_t,d_c,u\n");
        for r in rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.x, r.y, r.d_t, r.d_c, r.u));
        }
        Some(out)
    }
}
