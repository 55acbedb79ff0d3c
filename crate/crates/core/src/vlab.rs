//! Virtual laboratory: strain-driven experiments on the cell along a sphere
//! of directions, their histories, storage and internal work.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::damage::{Constitutive, MaterialParams};
use crate::error::{Error, Result};
use crate::fem::{characteristic_lengths, Analysis, BoundaryDrive, MaterialModel, Mesh, SolverConfig};
use crate::tensor::{principal_decomposition, StrainV, StressV};

/// The 26 unit strain directions `(εxx, εyy, γxy)` in case order.
pub fn strain_directions() -> Vec<StrainV> {
    let s2 = 2f64.sqrt();
    let raw: [[f64; 3]; 26] = [
        [-1.0, 0.0, 0.0],
        [-1.0, -1.0, 0.0],
        [-s2, -1.0, -2.0],
        [-s2, -1.0, 2.0],
        [-1.0, 0.0, -2.0],
        [-1.0, 0.0, 2.0],
        [-s2, 1.0, -2.0],
        [-s2, 1.0, 2.0],
        [-1.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, -1.0, -2.0],
        [0.0, -1.0, 2.0],
        [0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0],
        [0.0, 1.0, -2.0],
        [0.0, 1.0, 2.0],
        [0.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
        [s2, -1.0, -2.0],
        [s2, -1.0, 2.0],
        [1.0, 0.0, -2.0],
        [1.0, 0.0, 2.0],
        [s2, 1.0, -2.0],
        [s2, 1.0, 2.0],
        [1.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
    ];
    raw.iter()
        .map(|v| {
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            StrainV::new(v[0] / n, v[1] / n, v[2] / n)
        })
        .collect()
}

/// Sign pattern of the principal stresses along an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StressState {
    /// Both principal stresses compressive.
    CompressionCompression,
    /// One tensile, one compressive.
    TensionCompression,
    /// Both tensile.
    TensionTension,
}

impl StressState {
    pub fn label(self) -> &'static str {
        match self {
            StressState::CompressionCompression => "C/C",
            StressState::TensionCompression => "T/C",
            StressState::TensionTension => "T/T",
        }
    }
}

/// Expected stress state of each case for the reference Flemish cell.
pub fn reference_stress_states() -> Vec<StressState> {
    (1..=26)
        .map(|c| match c {
            1 | 2 | 3 | 4 | 10 => StressState::CompressionCompression,
            17 | 23 | 24 | 25 | 26 => StressState::TensionTension,
            _ => StressState::TensionCompression,
        })
        .collect()
}

/// Classify a stress by principal signs, treating values within
/// `1e-3·‖σ‖` of zero as either sign.
pub fn classify_stress(s: StressV) -> StressState {
    let tol = 1e-3 * s.norm();
    let p = principal_decomposition(s);
    if p.max() <= tol {
        StressState::CompressionCompression
    } else if p.min() >= -tol {
        StressState::TensionTension
    } else {
        StressState::TensionCompression
    }
}

/// One stored step of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryStep {
    pub t: f64,
    pub strain: StrainV,
    pub stress: StressV,
}

/// How an experiment ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseStatus {
    /// The stress norm fell below the failure fraction of its peak.
    Failed,
    /// The amplitude cap was reached first.
    AmplitudeCap,
    /// The solver gave up at amplitude `t`; the history holds converged steps only.
    Diverged { t: f64 },
}

/// Strain and upscaled-stress history of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub case_id: usize,
    pub direction: StrainV,
    pub steps: Vec<HistoryStep>,
    pub l_rse: f64,
    pub status: CaseStatus,
}

impl HistoryRecord {
    /// Stress state induced by the drive, read at the first loaded step.
    pub fn stress_state(&self) -> Option<StressState> {
        self.steps
            .iter()
            .find(|s| s.stress.norm() > 0.0)
            .map(|s| classify_stress(s.stress))
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, CaseStatus::Diverged { .. })
    }
}

/// Cumulative trapezoidal work `W_n` per unit volume, starting from the
/// unstrained, unstressed origin.
pub fn internal_work(h: &HistoryRecord) -> Vec<f64> {
    work_series(h.steps.iter().map(|s| (s.strain, s.stress)))
}

pub(crate) fn work_series(pairs: impl Iterator<Item = (StrainV, StressV)>) -> Vec<f64> {
    let mut prev = (StrainV::ZERO, StressV::ZERO);
    let mut w = 0.0;
    pairs
        .map(|(e, s)| {
            w += 0.5 * (prev.1 + s).dot(e - prev.0);
            prev = (e, s);
            w
        })
        .collect()
}

/// Amplitude schedule of a single case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveOverride {
    pub case: usize,
    pub lambda_max: f64,
    pub steps: usize,
}

/// Amplitude schedules and stopping rule of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Amplitude cap for directions with a tensile principal strain.
    pub tension_lambda: f64,
    pub tension_steps: usize,
    /// Amplitude cap for directions whose principal strains are both non-positive.
    pub compression_lambda: f64,
    pub compression_steps: usize,
    /// Stop once the upscaled stress norm drops below this fraction of its peak.
    pub failure_ratio: f64,
    /// Amplitude of the elastic first step of every drive; zero disables it.
    pub probe_amplitude: f64,
    pub overrides: Vec<DriveOverride>,
    pub solver: SolverConfig,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            tension_lambda: 2e-2,
            tension_steps: 400,
            compression_lambda: 3e-2,
            compression_steps: 300,
            failure_ratio: 0.05,
            probe_amplitude: 1e-6,
            overrides: Vec::new(),
            solver: SolverConfig::default(),
        }
    }
}

impl CampaignConfig {
    /// Drive of case `case` (1-based) along `direction`.
    pub fn drive(&self, case: usize, direction: StrainV) -> Result<BoundaryDrive> {
        let drive = if let Some(o) = self.overrides.iter().find(|o| o.case == case) {
            BoundaryDrive::new(direction, o.lambda_max, o.steps)?
        } else if principal_strain_max(direction) > 1e-12 {
            BoundaryDrive::new(direction, self.tension_lambda, self.tension_steps)?
        } else {
            BoundaryDrive::new(direction, self.compression_lambda, self.compression_steps)?
        };
        Ok(drive.with_probe(self.probe_amplitude))
    }
}

fn principal_strain_max(e: StrainV) -> f64 {
    let c = 0.5 * (e.exx + e.eyy);
    let r = (0.25 * (e.exx - e.eyy).powi(2) + 0.25 * e.gxy * e.gxy).sqrt();
    c + r
}

/// Materials of a masonry cell, indexed by material id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasonryMaterials {
    pub brick: MaterialParams,
    pub mortar: MaterialParams,
}

impl Default for MasonryMaterials {
    fn default() -> Self {
        Self {
            brick: MaterialParams::brick(),
            mortar: MaterialParams::mortar(),
        }
    }
}

impl MasonryMaterials {
    pub fn models(&self) -> Vec<MaterialModel> {
        vec![MaterialModel::Damage(self.brick), MaterialModel::Damage(self.mortar)]
    }
}

/// Run one experiment to failure on the cell. A solver failure ends the
/// record early with the converged steps kept and the status flagged.
pub fn run_experiment(
    mesh: &Mesh,
    models: &[MaterialModel],
    case_id: usize,
    drive: &BoundaryDrive,
    config: &CampaignConfig,
) -> Result<HistoryRecord> {
    let (_, l_rse) = characteristic_lengths(mesh);
    let mut analysis = Analysis::with_boundary_strain(mesh.clone(), models, config.solver)?;
    let eps = drive.eps;
    let mut record = HistoryRecord {
        case_id,
        direction: eps,
        steps: Vec::with_capacity(drive.steps + 1),
        l_rse,
        status: CaseStatus::AmplitudeCap,
    };
    let drive_fn = analysis.affine_drive(eps);
    let mut peak: f64 = 0.0;
    for t in drive.schedule() {
        let result = analysis.advance(t, &drive_fn);
        if let Err(e) = result {
            match e {
                Error::Diverged { t, .. } => {
                    record.status = CaseStatus::Diverged { t };
                    return Ok(record);
                }
                other => return Err(other),
            }
        }
        let stress = analysis.upscaled_stress();
        record.steps.push(HistoryStep {
            t,
            strain: eps * t,
            stress,
        });
        peak = peak.max(stress.norm());
        if stress.norm() < config.failure_ratio * peak {
            record.status = CaseStatus::Failed;
            break;
        }
    }
    Ok(record)
}

/// Run the same experiment on a single material point carrying `law`.
pub fn run_point_experiment(
    law: &(impl Constitutive + ?Sized),
    case_id: usize,
    drive: &BoundaryDrive,
    failure_ratio: f64,
    l_rse: f64,
) -> HistoryRecord {
    let mut state = law.virgin_state();
    let mut record = HistoryRecord {
        case_id,
        direction: drive.eps,
        steps: Vec::with_capacity(drive.steps + 1),
        l_rse,
        status: CaseStatus::AmplitudeCap,
    };
    let mut peak: f64 = 0.0;
    for t in drive.schedule() {
        let strain = drive.eps * t;
        let (stress, next) = law.integrate(strain, &state);
        state = next;
        record.steps.push(HistoryStep { t, strain, stress });
        peak = peak.max(stress.norm());
        if stress.norm() < failure_ratio * peak {
            record.status = CaseStatus::Failed;
            break;
        }
    }
    record
}

/// Material-point campaign over the listed cases (1-based ids), as used for
/// synthetic data and replays.
pub fn run_point_campaign(
    law: &(impl Constitutive + Sync + ?Sized),
    config: &CampaignConfig,
    cases: &[usize],
    l_rse: f64,
) -> Result<Vec<HistoryRecord>> {
    let directions = strain_directions();
    if let Some(&bad) = cases.iter().find(|&&c| c == 0 || c > directions.len()) {
        return Err(Error::InvalidParams(format!("case {bad} outside 1..={}", directions.len())));
    }
    cases
        .par_iter()
        .map(|&c| {
            let drive = config.drive(c, directions[c - 1])?;
            Ok(run_point_experiment(law, c, &drive, config.failure_ratio, l_rse))
        })
        .collect()
}

/// Provenance of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMeta {
    pub mesh_hash: String,
    pub materials: MasonryMaterials,
    pub config: CampaignConfig,
    pub l_rse: f64,
}

/// A set of experiments sharing one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub meta: CampaignMeta,
    pub records: Vec<HistoryRecord>,
}

/// Run the listed cases (1-based ids) in a pool of at most `jobs` workers.
/// Records come back in case order regardless of scheduling.
pub fn run_campaign(
    mesh: &Mesh,
    materials: &MasonryMaterials,
    config: &CampaignConfig,
    cases: &[usize],
    jobs: Option<usize>,
) -> Result<Campaign> {
    let directions = strain_directions();
    if let Some(&bad) = cases.iter().find(|&&c| c == 0 || c > directions.len()) {
        return Err(Error::InvalidParams(format!("case {bad} outside 1..={}", directions.len())));
    }
    let models = materials.models();
    let run = || -> Result<Vec<HistoryRecord>> {
        cases
            .par_iter()
            .map(|&c| {
                let drive = config.drive(c, directions[c - 1])?;
                run_experiment(mesh, &models, c, &drive, config)
            })
            .collect()
    };
    let records = with_pool(jobs, run)??;
    Ok(Campaign {
        meta: CampaignMeta {
            mesh_hash: mesh.hash(),
            materials: *materials,
            config: config.clone(),
            l_rse: characteristic_lengths(mesh).1,
        },
        records,
    })
}

/// Run `f` inside a dedicated pool of `jobs` threads, or the global pool.
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

const CSV_HEADER: [&str; 7] = ["t", "exx", "eyy", "gxy", "sxx", "syy", "sxy"];

/// CSV text of a record: `t,exx,eyy,gxy,sxx,syy,sxy`.
pub fn record_to_csv(h: &HistoryRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for s in &h.steps {
        let row = [
            s.t,
            s.strain.exx,
            s.strain.eyy,
            s.strain.gxy,
            s.stress.sxx,
            s.stress.syy,
            s.stress.sxy,
        ];
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse {
        what: "csv".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        what: "csv".into(),
        message: e.to_string(),
    }
}

/// Read a numeric CSV table, returning the requested columns by name.
pub fn read_columns(text: &str, what: &str, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_error)?.clone();
    let idx = columns
        .iter()
        .map(|c| {
            header.iter().position(|h| h == *c).ok_or_else(|| Error::Parse {
                what: what.into(),
                message: format!("missing column `{c}`"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let row = idx
            .iter()
            .zip(columns)
            .map(|(&i, c)| {
                rec.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                    what: what.into(),
                    message: format!("row {}: column `{c}` is not a number", line + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Parse a record CSV written by [`record_to_csv`].
pub fn record_from_csv(
    text: &str,
    case_id: usize,
    direction: StrainV,
    l_rse: f64,
    status: CaseStatus,
) -> Result<HistoryRecord> {
    let rows = read_columns(text, &case_file_name(case_id), &CSV_HEADER)?;
    Ok(HistoryRecord {
        case_id,
        direction,
        steps: rows
            .iter()
            .map(|r| HistoryStep {
                t: r[0],
                strain: StrainV::new(r[1], r[2], r[3]),
                stress: StressV::new(r[4], r[5], r[6]),
            })
            .collect(),
        l_rse,
        status,
    })
}

/// SHA-256 of a byte string, hex encoded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Manifest entry of one stored case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub case_id: usize,
    pub direction: [f64; 3],
    pub file: String,
    pub sha256: String,
    pub rows: usize,
    pub status: CaseStatus,
}

/// JSON manifest of a campaign directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub meta: CampaignMeta,
    pub directions: Vec<[f64; 3]>,
    pub cases: Vec<CaseEntry>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn case_file_name(case_id: usize) -> String {
    format!("case_{case_id:02}.csv")
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST), text)?;
        Ok(())
    }

    /// Cases whose CSV on disk still matches the recorded hash.
    pub fn intact_cases(&self, dir: &Path) -> BTreeMap<usize, CaseEntry> {
        self.cases
            .iter()
            .filter(|c| fs::read(dir.join(&c.file)).is_ok_and(|b| sha256_hex(&b) == c.sha256))
            .map(|c| (c.case_id, c.clone()))
            .collect()
    }
}

/// Write case CSVs and the manifest. Existing intact entries for other cases
/// are kept so that partial runs accumulate.
pub fn write_campaign(dir: &Path, campaign: &Campaign) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut entries: BTreeMap<usize, CaseEntry> = match Manifest::read(dir) {
        Ok(m) if m.meta == campaign.meta => m.intact_cases(dir),
        _ => BTreeMap::new(),
    };
    for r in &campaign.records {
        let text = record_to_csv(r)?;
        let file = case_file_name(r.case_id);
        fs::write(dir.join(&file), &text)?;
        entries.insert(
            r.case_id,
            CaseEntry {
                case_id: r.case_id,
                direction: r.direction.to_array(),
                file,
                sha256: sha256_hex(text.as_bytes()),
                rows: r.steps.len(),
                status: r.status,
            },
        );
    }
    let manifest = Manifest {
        meta: campaign.meta.clone(),
        directions: strain_directions().iter().map(|d| d.to_array()).collect(),
        cases: entries.into_values().collect(),
    };
    manifest.write(dir)?;
    Ok(manifest)
}

/// Load every case listed in the manifest, verifying hashes.
pub fn read_campaign(dir: &Path) -> Result<Campaign> {
    let manifest = Manifest::read(dir)?;
    let mut records = Vec::with_capacity(manifest.cases.len());
    for c in &manifest.cases {
        let bytes = fs::read(dir.join(&c.file))?;
        if sha256_hex(&bytes) != c.sha256 {
            return Err(Error::Parse {
                what: c.file.clone(),
                message: "content hash differs from manifest".into(),
            });
        }
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
            what: c.file.clone(),
            message: e.to_string(),
        })?;
        records.push(record_from_csv(
            &text,
            c.case_id,
            StrainV::from_array(c.direction),
            manifest.meta.l_rse,
            c.status,
        )?);
    }
    Ok(Campaign {
        meta: manifest.meta,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_and_match_rounded_values() {
        let d = strain_directions();
        assert_eq!(d.len(), 26);
        for v in &d {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(d[0], StrainV::new(-1.0, 0.0, 0.0));
        assert_eq!(d[12], StrainV::new(0.0, 0.0, -1.0));
        assert_eq!(d[13], StrainV::new(0.0, 0.0, 1.0));
        let c24 = d[23].to_array();
        for (a, b) in c24.iter().zip([0.53, 0.38, 0.76]) {
            assert!((a - b).abs() < 0.005 + 1e-12);
        }
    }

    #[test]
    fn work_examples() {
        let rec = |pairs: &[(StrainV, StressV)]| HistoryRecord {
            case_id: 1,
            direction: StrainV::new(1.0, 0.0, 0.0),
            steps: pairs
                .iter()
                .enumerate()
                .map(|(i, &(strain, stress))| HistoryStep {
                    t: i as f64 + 1.0,
                    strain,
                    stress,
                })
                .collect(),
            l_rse: 0.01,
            status: CaseStatus::AmplitudeCap,
        };
        let e = StrainV::new(1e-3, -2e-4, 5e-4);
        let s = StressV::new(3e6, 1e6, -2e5);
        let w = internal_work(&rec(&[(e * 0.5, s * 0.5), (e, s)]));
        assert!((w[1] - 0.5 * s.dot(e)).abs() < 1e-12 * s.dot(e).abs());
        let zero = internal_work(&rec(&[(e, StressV::ZERO), (e * 2.0, StressV::ZERO)]));
        assert_eq!(zero, vec![0.0, 0.0]);
        // Piecewise-linear path: fine trapezoid sampling of the same segments.
        let pts = [(StrainV::ZERO, StressV::ZERO), (e, s), (e * 1.5, s * 0.2)];
        let w = internal_work(&rec(&pts[1..]));
        let mut fine = 0.0;
        for seg in pts.windows(2) {
            let n = 1000;
            for k in 0..n {
                let a = k as f64 / n as f64;
                let b = (k + 1) as f64 / n as f64;
                let ea = seg[0].0 + (seg[1].0 - seg[0].0) * a;
                let eb = seg[0].0 + (seg[1].0 - seg[0].0) * b;
                let sa = seg[0].1 + (seg[1].1 - seg[0].1) * a;
                let sb = seg[0].1 + (seg[1].1 - seg[0].1) * b;
                fine += 0.5 * (sa + sb).dot(eb - ea);
            }
        }
        assert!((w[1] - fine).abs() < 1e-9 * fine.abs());
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify_stress(StressV::new(-1.0, -0.2, 0.0)), StressState::CompressionCompression);
        assert_eq!(classify_stress(StressV::new(1.0, 0.2, 0.0)), StressState::TensionTension);
        assert_eq!(classify_stress(StressV::new(0.0, 0.0, 1.0)), StressState::TensionCompression);
        let table = reference_stress_states();
        assert_eq!(table.iter().filter(|s| **s == StressState::CompressionCompression).count(), 5);
        assert_eq!(table.iter().filter(|s| **s == StressState::TensionTension).count(), 5);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let h = HistoryRecord {
            case_id: 3,
            direction: strain_directions()[2],
            steps: vec![HistoryStep {
                t: 0.1 + 0.2,
                strain: StrainV::new(1.0 / 3.0, -2e-9, 7.0e-300),
                stress: StressV::new(1e10 / 7.0, -0.0, 5e-324),
            }],
            l_rse: 0.0093,
            status: CaseStatus::Failed,
        };
        let text = record_to_csv(&h).unwrap();
        let back = record_from_csv(&text, 3, h.direction, 0.0093, CaseStatus::Failed).unwrap();
        assert_eq!(back, h);
        let err = read_columns("t,exx\n1,2\n", "x", &["t", "sxx"]).unwrap_err();
        assert!(err.to_string().contains("sxx"));
    }
}
