//! Pipeline stages. Every stage reads its inputs from and writes its
//! artifacts under the `--out` directory:
//!
//! ```text
//! rve/mesh.txt, rve/summary.json          homog rve
//! campaign/manifest.json, case_NN.csv     homog vlab
//! fit.json                                homog isotropize
//! law.json, calibration.json, trace.csv   homog calibrate
//! validation/<program>/<model>/...        homog validate
//! plots/*.svg + *.csv                     homog plot
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use homog_core::calibrate::{calibrate as run_calibration, CostFunction};
use homog_core::fem::{characteristic_lengths, generate_flemish_rve, MaterialModel, Mesh, BRICK, MORTAR};
use homog_core::isotropize::{fit_elasticity, map_history, ElasticityFit};
use homog_core::validation::{macro_wall_mesh, micro_wall_mesh, run_wall, WallResult};
use homog_core::vlab::{
    case_file_name, internal_work, read_campaign, read_columns, record_from_csv, run_campaign, sha256_hex,
    strain_directions, with_pool, CampaignMeta, CaseStatus, HistoryRecord, Manifest, MANIFEST,
};
use homog_core::{Constitutive, Error, MacroLaw, Mat3, Result, StrainV};

use crate::config::{NamedProgram, PipelineConfig};
use crate::plot::{Chart, Series};
use crate::{Common, Failure};

const SEED_VAR: &str = "HOMOG_SEED";

fn load(c: &Common) -> Result<PipelineConfig> {
    PipelineConfig::load(&c.config)
}

/// Value of `HOMOG_SEED`, if set. The pipeline has no stochastic step, so
/// the seed is only validated and recorded as provenance.
fn seed() -> Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidParams(format!("{SEED_VAR} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse {
        what: path.display().to_string(),
        message: e.to_string(),
    })
}

fn rve_dir(c: &Common) -> PathBuf {
    c.out.join("rve")
}

fn campaign_dir(c: &Common) -> PathBuf {
    c.out.join("campaign")
}

fn all_cases() -> Vec<usize> {
    (1..=strain_directions().len()).collect()
}

pub fn rve(c: &Common) -> std::result::Result<(), Failure> {
    let config = load(c)?;
    let mesh = generate_flemish_rve(&config.geometry)?;
    let dir = rve_dir(c);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("mesh.txt"), mesh.to_text())?;
    let (_, l_rse) = characteristic_lengths(&mesh);
    let summary = json!({
        "elements": mesh.element_count(),
        "nodes": mesh.node_count(),
        "volume_fractions": {
            "brick": mesh.volume_fraction(BRICK),
            "mortar": mesh.volume_fraction(MORTAR),
        },
        "l_rse": l_rse,
        "mesh_hash": mesh.hash(),
    });
    write_json(&dir.join("summary.json"), &summary)?;
    println!("{summary}");
    Ok(())
}

pub fn vlab(c: &Common) -> std::result::Result<(), Failure> {
    let config = load(c)?;
    let mesh_path = rve_dir(c).join("mesh.txt");
    let mesh = Mesh::from_text(&read_input(&mesh_path)?, config.geometry.thickness)?;
    mesh.validate(config.materials.models().len())?;
    let requested = c.cases.as_ref().map_or_else(all_cases, |k| k.0.clone());
    let dir = campaign_dir(c);
    let meta = CampaignMeta {
        mesh_hash: mesh.hash(),
        materials: config.materials,
        config: config.campaign.clone(),
        l_rse: characteristic_lengths(&mesh).1,
    };
    let done = match Manifest::read(&dir) {
        Ok(m) if m.meta == meta => m.intact_cases(&dir),
        _ => Default::default(),
    };
    let pending: Vec<usize> = requested.iter().copied().filter(|k| !done.contains_key(k)).collect();
    for k in requested.iter().filter(|k| done.contains_key(k)) {
        println!("case {k:2}: intact, skipped");
    }
    let campaign = run_campaign(&mesh, &config.materials, &config.campaign, &pending, c.jobs)?;
    homog_core::vlab::write_campaign(&dir, &campaign)?;
    for r in &campaign.records {
        let state = r.stress_state().map_or("-", |s| s.label());
        println!("case {:2}: {} steps, {state}, {:?}", r.case_id, r.steps.len(), r.status);
    }
    if let Some(r) = campaign.records.iter().find(|r| r.diverged() && r.steps.is_empty()) {
        let t = match r.status {
            CaseStatus::Diverged { t } => t,
            _ => 0.0,
        };
        return Err(Failure {
            code: 3,
            error: Error::Diverged { t, bisections: 0 },
        });
    }
    Ok(())
}

fn print_matrix(name: &str, m: &Mat3) {
    println!("{name}:");
    for row in m.0 {
        println!("  [{:>14.6e} {:>14.6e} {:>14.6e}]", row[0], row[1], row[2]);
    }
}

pub fn isotropize(c: &Common) -> std::result::Result<(), Failure> {
    load(c)?;
    let campaign = read_campaign(&campaign_dir(c))?;
    let fit = fit_elasticity(&campaign.records)?;
    fs::write(c.out.join("fit.json"), fit.to_json()? + "\n")?;
    print_matrix("C_raw", &fit.c_raw);
    print_matrix("C_ortho", &fit.c_ortho);
    print_matrix("C_iso", &fit.c_iso);
    print_matrix("T", &fit.t);
    println!("E = {:.6e} Pa, nu = {:.6}", fit.e_iso, fit.nu_iso);
    Ok(())
}

pub fn calibrate(c: &Common) -> std::result::Result<(), Failure> {
    let config = load(c)?;
    let section = &config.calibration;
    let dir = campaign_dir(c);
    let campaign = read_campaign(&dir)?;
    let fit_text = read_input(&c.out.join("fit.json"))?;
    let fit = ElasticityFit::from_json(&fit_text)?;
    let mapped = campaign
        .records
        .iter()
        .map(|r| map_history(r, &fit.t))
        .collect::<Result<Vec<_>>>()?;
    let mut cost = CostFunction::new(&mapped, fit.e_iso, fit.nu_iso, campaign.meta.l_rse, section.cost);
    if section.admissible_at_wall {
        let v = &config.validation;
        let wall = macro_wall_mesh(v.width, v.height, v.macro_nx, v.macro_ny, config.geometry.thickness)?;
        cost.deploy_lengths.push(characteristic_lengths(&wall).1);
    }
    let cal = with_pool(c.jobs, || run_calibration(&cost, &section.theta0, &section.bounds, &section.optimizer))??;

    let mut law = MacroLaw::new(cal.theta_star, fit.e_iso, fit.nu_iso, fit.t, campaign.meta.l_rse)?;
    let manifest = fs::read(dir.join(MANIFEST))?;
    let config_bytes = fs::read(&c.config)?;
    law.provenance.insert("campaign_manifest_sha256".into(), sha256_hex(&manifest));
    law.provenance.insert("fit_sha256".into(), sha256_hex(fit_text.as_bytes()));
    law.provenance.insert("config_sha256".into(), sha256_hex(&config_bytes));
    if let Some(s) = seed()? {
        law.provenance.insert(SEED_VAR.into(), s.to_string());
    }
    fs::write(c.out.join("law.json"), law.to_json()? + "\n")?;
    write_json(&c.out.join("calibration.json"), &cal)?;
    fs::write(c.out.join("trace.csv"), cal.trace_csv())?;
    println!(
        "cost {:.6e} -> {:.6e} ({:.4}% of work scale) after {} epochs, {:?}",
        cal.initial.total,
        cal.report.total,
        100.0 * cal.relative_cost(),
        cal.minimum.epochs,
        cal.minimum.termination
    );
    println!("{}", serde_json::to_string(&cal.theta_star)?);
    Ok(())
}

#[derive(Serialize)]
struct WallSummary {
    program: String,
    model: &'static str,
    elements: usize,
    characteristic_length: f64,
    steps: usize,
    status: homog_core::validation::WallStatus,
    initial_stiffness: Option<f64>,
    peak_reaction: f64,
}

fn write_wall(dir: &Path, result: &WallResult) -> Result<()> {
    let snapshots = dir.join("snapshots");
    fs::create_dir_all(&snapshots)?;
    fs::write(dir.join("curve.csv"), result.curve_csv())?;
    for &step in result.snapshots.keys() {
        if let Some(text) = result.snapshot_csv(step) {
            fs::write(snapshots.join(format!("step_{step:04}.csv")), text)?;
        }
    }
    Ok(())
}

pub fn validate(c: &Common) -> std::result::Result<(), Failure> {
    use rayon::prelude::*;

    let config = load(c)?;
    let v = &config.validation;
    let law = MacroLaw::from_json(&read_input(&c.out.join("law.json"))?)?;
    let geometry = homog_core::fem::FlemishGeometry {
        max_brick_element: Some(v.micro_brick_element),
        ..config.geometry
    };
    let micro = micro_wall_mesh(&geometry, v.width, v.height)?;
    let macro_mesh = macro_wall_mesh(v.width, v.height, v.macro_nx, v.macro_ny, config.geometry.thickness)?;
    let micro_models = config.materials.models();
    let macro_models = [MaterialModel::Macro(law)];
    let jobs: Vec<(&NamedProgram, &'static str)> =
        v.programs.iter().flat_map(|p| [(p, "micro"), (p, "macro")]).collect();
    let results = with_pool(c.jobs, || {
        jobs.par_iter()
            .map(|&(p, model)| {
                let (mesh, models) = match model {
                    "micro" => (micro.clone(), &micro_models[..]),
                    _ => (macro_mesh.clone(), &macro_models[..]),
                };
                run_wall(mesh, models, &p.program, &v.run)
            })
            .collect::<Vec<Result<WallResult>>>()
    })?;
    let root = c.out.join("validation");
    let mut summary = Vec::new();
    for (&(p, model), result) in jobs.iter().zip(results) {
        let result = result.map_err(|e| match e {
            Error::Diverged { .. } => Failure { code: 6, error: e },
            other => Failure::from(other),
        })?;
        write_wall(&root.join(&p.name).join(model), &result)?;
        let s = WallSummary {
            program: p.name.clone(),
            model,
            elements: result.elements,
            characteristic_length: result.characteristic_length,
            steps: result.curve.len(),
            status: result.status,
            initial_stiffness: result.initial_stiffness(&p.program),
            peak_reaction: result.peak_reaction(&p.program),
        };
        println!(
            "{} {}: {} elements, k0 {:.4e} N/m, peak {:.4e} N, {:?}",
            s.program,
            s.model,
            s.elements,
            s.initial_stiffness.unwrap_or(f64::NAN),
            s.peak_reaction,
            s.status
        );
        summary.push(s);
    }
    write_json(&root.join("summary.json"), &summary)?;
    Ok(())
}

fn csv_text(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<String> {
    let parse = |e: csv::Error| Error::Parse {
        what: "csv".into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(parse)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string)).map_err(parse)?;
    }
    let bytes = w.into_inner().map_err(|e| parse(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn series(label: &str, points: Vec<(f64, f64)>, dashed: bool, color: usize) -> Series {
    Series {
        label: label.into(),
        points,
        dashed,
        color,
    }
}

fn replay(law: &impl Constitutive, record: &HistoryRecord) -> HistoryRecord {
    let mut state = law.virgin_state();
    let mut out = record.clone();
    for s in &mut out.steps {
        let (stress, next) = law.integrate(s.strain, &state);
        state = next;
        s.stress = stress;
    }
    out
}

fn plot_case(dir: &Path, micro: &HistoryRecord, model: Option<&HistoryRecord>) -> Result<()> {
    let id = micro.case_id;
    let t: Vec<f64> = micro.steps.iter().map(|s| s.t).collect();
    let stress = |r: &HistoryRecord, k: usize| -> Vec<(f64, f64)> {
        r.steps.iter().map(|s| (s.t, s.stress.to_array()[k])).collect()
    };
    let mut chart = Chart {
        title: format!("case {id}: upscaled stress"),
        x_label: "load factor".into(),
        y_label: "stress [Pa]".into(),
        series: Vec::new(),
    };
    for (k, name) in ["sxx", "syy", "sxy"].into_iter().enumerate() {
        chart.series.push(series(&format!("{name} micro"), stress(micro, k), false, k));
        if let Some(m) = model {
            chart.series.push(series(&format!("{name} macro"), stress(m, k), true, k));
        }
    }
    let stem = format!("case_{id:02}");
    fs::write(dir.join(format!("{stem}_stress.svg")), chart.to_svg())?;
    let mut header = vec!["t", "exx", "eyy", "gxy", "sxx_micro", "syy_micro", "sxy_micro"];
    if model.is_some() {
        header.extend(["sxx_macro", "syy_macro", "sxy_macro"]);
    }
    let rows = micro.steps.iter().enumerate().map(|(i, s)| {
        let mut row = vec![s.t];
        row.extend(s.strain.to_array());
        row.extend(s.stress.to_array());
        if let Some(m) = model {
            row.extend(m.steps[i].stress.to_array());
        }
        row
    });
    fs::write(dir.join(format!("{stem}_stress.csv")), csv_text(&header, rows)?)?;

    let w_micro = internal_work(micro);
    let w_model = model.map(internal_work);
    let mut chart = Chart {
        title: format!("case {id}: internal work"),
        x_label: "load factor".into(),
        y_label: "work [J/m3]".into(),
        series: vec![series("micro", t.iter().copied().zip(w_micro.iter().copied()).collect(), false, 0)],
    };
    if let Some(w) = &w_model {
        chart.series.push(series("macro", t.iter().copied().zip(w.iter().copied()).collect(), true, 0));
    }
    fs::write(dir.join(format!("{stem}_work.svg")), chart.to_svg())?;
    let header: &[&str] = if model.is_some() { &["t", "w_micro", "w_macro"] } else { &["t", "w_micro"] };
    let rows = t.iter().enumerate().map(|(i, &ti)| {
        let mut row = vec![ti, w_micro[i]];
        if let Some(w) = &w_model {
            row.push(w[i]);
        }
        row
    });
    fs::write(dir.join(format!("{stem}_work.csv")), csv_text(header, rows)?)?;
    Ok(())
}

fn plot_wall(dir: &Path, root: &Path, p: &NamedProgram) -> Result<()> {
    let k = p.program.measured_component();
    let (d_col, f_col) = [("dx", "fx"), ("dy", "fy")][k];
    let mut chart = Chart {
        title: format!("{}: top reaction", p.name),
        x_label: format!("|{d_col}| [m]"),
        y_label: format!("|{f_col}| [N]"),
        series: Vec::new(),
    };
    let mut columns = Vec::new();
    for (i, model) in ["micro", "macro"].into_iter().enumerate() {
        let path = root.join(&p.name).join(model).join("curve.csv");
        let Ok(text) = fs::read_to_string(&path) else {
            continue;
        };
        let rows = read_columns(&text, &path.display().to_string(), &[d_col, f_col])?;
        let points: Vec<(f64, f64)> = std::iter::once((0.0, 0.0))
            .chain(rows.iter().map(|r| (r[0].abs(), r[1].abs())))
            .collect();
        chart.series.push(series(model, points.clone(), i == 1, 0));
        columns.push((model, points));
    }
    if columns.is_empty() {
        return Ok(());
    }
    let stem = format!("wall_{}", p.name);
    fs::write(dir.join(format!("{stem}.svg")), chart.to_svg())?;
    let header: Vec<String> = columns
        .iter()
        .flat_map(|(m, _)| [format!("d_{m}"), format!("f_{m}")])
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let n = columns.iter().map(|(_, p)| p.len()).max().unwrap_or(0);
    let rows = (0..n).map(|i| {
        columns
            .iter()
            .flat_map(|(_, p)| p.get(i).map_or([f64::NAN, f64::NAN], |&(d, f)| [d, f]))
            .collect()
    });
    fs::write(dir.join(format!("{stem}.csv")), csv_text(&header, rows)?)?;
    Ok(())
}

pub fn plot(c: &Common) -> std::result::Result<(), Failure> {
    let config = load(c)?;
    let dir = c.out.join("plots");
    fs::create_dir_all(&dir)?;
    let cdir = campaign_dir(c);
    let law_path = c.out.join("law.json");
    let law = if law_path.exists() {
        Some(MacroLaw::from_json(&read_input(&law_path)?)?)
    } else {
        None
    };
    let requested = c.cases.as_ref().map(|k| k.0.clone());
    let wanted = requested.clone().unwrap_or_else(all_cases);
    if !wanted.is_empty() {
        let manifest = Manifest::read(&cdir)?;
        let point = law.as_ref().map(|l| l.bind(manifest.meta.l_rse)).transpose()?;
        for entry in manifest.cases.iter().filter(|e| wanted.contains(&e.case_id)) {
            let file = cdir.join(&entry.file);
            let text = fs::read_to_string(&file).map_err(|e| Error::Parse {
                what: case_file_name(entry.case_id),
                message: e.to_string(),
            })?;
            let micro = record_from_csv(
                &text,
                entry.case_id,
                StrainV::from_array(entry.direction),
                manifest.meta.l_rse,
                entry.status,
            )?;
            let model = point.as_ref().map(|p| replay(p, &micro));
            plot_case(&dir, &micro, model.as_ref())?;
        }
    }
    if requested.is_none() {
        let root = c.out.join("validation");
        for p in &config.validation.programs {
            plot_wall(&dir, &root, p)?;
        }
    }
    Ok(())
}
