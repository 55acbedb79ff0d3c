use super::*;
use crate::damage::plane_stress_elasticity;
use crate::vlab::{strain_directions, CaseStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GPA: f64 = 1e9;

/// Reference orthotropic matrix, including its tiny normal-shear couplings.
fn reference_ortho() -> Mat3 {
    Mat3([
        [5.442 * GPA, 0.83 * GPA, 4.99e-7 * GPA],
        [0.83 * GPA, 4.291 * GPA, 6.70e-7 * GPA],
        [4.99e-7 * GPA, 6.70e-7 * GPA, 1.707 * GPA],
    ])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn mat_rel(a: &Mat3, b: &Mat3) -> f64 {
    a.sub(b).frobenius() / b.frobenius()
}

fn record(case_id: usize, pairs: &[(StrainV, StressV)]) -> HistoryRecord {
    HistoryRecord {
        case_id,
        direction: pairs[0].0 * (1.0 / pairs[0].0.norm()),
        steps: pairs
            .iter()
            .enumerate()
            .map(|(k, &(strain, stress))| HistoryStep {
                t: (k + 1) as f64,
                strain,
                stress,
            })
            .collect(),
        l_rse: 0.01,
        status: CaseStatus::AmplitudeCap,
    }
}

fn elastic_records(c: &Mat3, scale: f64) -> Vec<HistoryRecord> {
    strain_directions()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let e = d * scale;
            record(i + 1, &[(e, c.stress_from(e))])
        })
        .collect()
}

#[test]
fn reference_isotropic_matrix_and_constants() {
    let iso = closest_isotropic(&reference_ortho()).unwrap();
    let c = iso.c_iso;
    assert!(rel(c.0[0][0], 4.686 * GPA) < 0.02);
    assert!(rel(c.0[0][1], 1.014 * GPA) < 0.02);
    assert!(rel(c.0[2][2], 1.836 * GPA) < 0.02);
    let (e, nu) = identify_e_nu(&c);
    assert!(rel(e, 4.46701076e9) < 5e-3, "{e}");
    assert!(rel(nu, 0.21639363) < 5e-3, "{nu}");
}

#[test]
fn reference_transformation_matrix() {
    let ortho = reference_ortho();
    let iso = closest_isotropic(&ortho).unwrap().c_iso;
    let t = transformation_matrix(&ortho, &iso).unwrap();
    let expect = [[1.084, -1.686e-2], [-3.036e-2, 9.604e-1]];
    for i in 0..2 {
        for j in 0..2 {
            assert!(rel(t.0[i][j], expect[i][j]) < 0.02, "T[{i}][{j}] = {}", t.0[i][j]);
        }
    }
    assert!(rel(t.0[2][2], (1.707f64 / 1.836).sqrt()) < 0.02);
    assert!(rel(t.0[2][2], 0.9641) < 0.02);
    let back = t.transpose().matmul(&iso).matmul(&t);
    assert!(mat_rel(&back, &ortho) < 1e-10);
}

#[test]
fn isotropic_input_is_a_fixed_point() {
    let c = plane_stress_elasticity(4.467e9, 0.2164).unwrap();
    let iso = closest_isotropic(&c).unwrap();
    assert!(mat_rel(&iso.c_iso, &c) < 1e-14);
    let again = closest_isotropic(&iso.c_iso).unwrap();
    assert!(mat_rel(&again.c_iso, &iso.c_iso) < 1e-14);
    let ortho_iso = closest_isotropic(&reference_ortho()).unwrap().c_iso;
    let twice = closest_isotropic(&ortho_iso).unwrap().c_iso;
    assert!(mat_rel(&twice, &ortho_iso) < 1e-14);
}

#[test]
fn grid_search_confirms_projection() {
    let c = reference_ortho();
    let iso = closest_isotropic(&c).unwrap();
    let best = projection_distance(&c, iso.kappa, iso.mu).unwrap();
    let n = 1000;
    let mut grid_best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..n {
        let kappa = iso.kappa * (0.9 + 0.2 * i as f64 / (n - 1) as f64);
        for j in 0..n {
            let mu = iso.mu * (0.9 + 0.2 * j as f64 / (n - 1) as f64);
            let d = projection_distance(&c, kappa, mu).unwrap();
            if d < grid_best.0 {
                grid_best = (d, kappa, mu);
            }
        }
    }
    assert!(best <= grid_best.0 * (1.0 + 1e-12));
    let step = 0.2 / (n - 1) as f64;
    assert!(rel(grid_best.1, iso.kappa) <= step);
    assert!(rel(grid_best.2, iso.mu) <= step);
}

#[test]
fn transformation_special_cases() {
    let c = plane_stress_elasticity(3e9, 0.25).unwrap();
    let t = transformation_matrix(&c, &c).unwrap();
    assert!(t.sub(&Mat3::IDENTITY).max_abs() < 1e-14);
    let (a, b, cc, d, e, f) = (4.0, 9.0, 2.0, 1.0, 4.0, 8.0);
    let t = transformation_matrix(&Mat3::diag(a, b, cc), &Mat3::diag(d, e, f)).unwrap();
    let expect = Mat3::diag((a / d).sqrt(), (b / e).sqrt(), (cc / f).sqrt());
    assert!(t.sub(&expect).max_abs() < 1e-14);
    let bad = Mat3::diag(1.0, -1.0, 1.0);
    assert!(matches!(transformation_matrix(&bad, &c), Err(Error::NotSpd(_))));
}

#[test]
fn mapping_preserves_work_and_elastic_pairs() {
    let ortho = reference_ortho();
    let fit = fit_from_ortho(ortho, ortho, 0.0).unwrap();
    let h = record(
        1,
        &[
            (StrainV::new(1e-4, -2e-5, 3e-5), StressV::new(4e5, -1e5, 5e4)),
            (StrainV::new(2e-4, -4e-5, 6e-5), StressV::new(6e5, -3e5, 8e4)),
        ],
    );
    let mapped = map_history(&h, &fit.t).unwrap();
    for (a, b) in h.steps.iter().zip(&mapped.steps) {
        let w = a.stress.dot(a.strain);
        assert!(rel(b.stress.dot(b.strain), w) < 1e-12);
    }
    let identity = map_history(&h, &Mat3::IDENTITY).unwrap();
    assert_eq!(identity, h);
    let inv = fit.t.inverse().unwrap();
    for (a, b) in h.steps.iter().zip(&mapped.steps) {
        let e = inv.mul_vec(b.strain.to_array());
        let s = fit.t.transpose().mul_vec(b.stress.to_array());
        for k in 0..3 {
            assert!((e[k] - a.strain.to_array()[k]).abs() <= 1e-12 * a.strain.norm());
            assert!((s[k] - a.stress.to_array()[k]).abs() <= 1e-12 * a.stress.norm());
        }
    }
    for d in strain_directions() {
        let e = d * 1e-4;
        let h = record(1, &[(e, ortho.stress_from(e))]);
        let m = &map_history(&h, &fit.t).unwrap().steps[0];
        let expect = fit.c_iso.stress_from(m.strain);
        assert!((m.stress - expect).norm() <= 1e-10 * expect.norm());
    }
    let singular = Mat3::diag(1.0, 0.0, 1.0);
    assert!(matches!(map_history(&h, &singular), Err(Error::Singular)));
}

#[test]
fn elastic_constants_round_trip() {
    let c = plane_stress_elasticity(4.467e9, 0.2164).unwrap();
    let (e, nu) = identify_e_nu(&c);
    assert!(rel(e, 4.467e9) < 1e-12 && rel(nu, 0.2164) < 1e-12);
    let (e, nu) = identify_e_nu(&plane_stress_elasticity(2e9, 0.0).unwrap());
    assert_eq!(nu, 0.0);
    assert_eq!(e, 2e9);
}

#[test]
fn linear_pairs_and_rank() {
    let c = reference_ortho();
    let records = elastic_records(&c, 1e-5);
    let (eps, sig) = extract_linear_pairs(&records).unwrap();
    assert_eq!(eps.shape(), (3, 26));
    assert_eq!(sig.shape(), (3, 26));
    let canonical: Vec<HistoryRecord> = (0..3)
        .map(|k| {
            let mut e = [0.0; 3];
            e[k] = 1.0;
            let e = StrainV::from_array(e);
            record(k + 1, &[(e, c.stress_from(e))])
        })
        .collect();
    let (eps, sig) = extract_linear_pairs(&canonical).unwrap();
    let raw = raw_elasticity(&eps, &sig).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((raw.0[i][j] - sig[(i, j)]).abs() <= 1e-12 * c.max_abs());
        }
    }
    let same: Vec<HistoryRecord> = (0..5).map(|i| canonical[0].clone_with_id(i + 1)).collect();
    assert!(matches!(extract_linear_pairs(&same), Err(Error::RankDeficient { rank: 1 })));
}

trait CloneWithId {
    fn clone_with_id(&self, id: usize) -> Self;
}

impl CloneWithId for HistoryRecord {
    fn clone_with_id(&self, id: usize) -> Self {
        HistoryRecord {
            case_id: id,
            ..self.clone()
        }
    }
}

#[test]
fn raw_elasticity_recovers_exact_and_noisy_data() {
    let c = Mat3([[5e9, 0.8e9, 1e7], [0.9e9, 4e9, -2e7], [3e7, 1e7, 1.7e9]]);
    let records = elastic_records(&c, 1e-4);
    let (eps, sig) = extract_linear_pairs(&records).unwrap();
    assert!(mat_rel(&raw_elasticity(&eps, &sig).unwrap(), &c) < 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noisy = sig.map(|v| v * (1.0 + 1e-6 * rng.gen_range(-1.0..1.0)));
    let fit = raw_elasticity(&eps, &noisy).unwrap();
    // Normal-equations oracle: C = σ·εᵀ·(ε·εᵀ)⁻¹.
    let gram = &eps * eps.transpose();
    let oracle = &noisy * eps.transpose() * gram.try_inverse().unwrap();
    let oracle = Mat3(std::array::from_fn(|i| std::array::from_fn(|j| oracle[(i, j)])));
    assert!(mat_rel(&fit, &oracle) < 1e-9);
    assert!(mat_rel(&fit, &c) < 1e-4);
}

#[test]
fn orthotropization() {
    let c = Mat3([[5e9, 0.8e9, 0.0], [0.8e9, 4e9, 0.0], [0.0, 0.0, 1.7e9]]);
    let (o, gap) = orthotropize(&c).unwrap();
    assert_eq!(o, c);
    assert_eq!(gap, 0.0);
    let (a, b) = (0.7e9, 0.9e9);
    let raw = Mat3([[5e9, a, 2e6], [b, 4e9, -3e6], [1e6, 4e6, 1.7e9]]);
    let (o, gap) = orthotropize(&raw).unwrap();
    assert_eq!(o.0[0][1], 0.5 * (a + b));
    assert_eq!(o.0[1][0], 0.5 * (a + b));
    assert!(o.0[0][2] == 0.0 && o.0[2][0] == 0.0 && o.0[1][2] == 0.0 && o.0[2][1] == 0.0);
    assert!(gap > 0.0);
    let (o, _) = orthotropize(&reference_ortho()).unwrap();
    assert_eq!(o.0[0][0], 5.442 * GPA);
    assert_eq!(o.0[0][1], 0.83 * GPA);
    assert_eq!(o.0[0][2], 0.0);
    let bad = Mat3([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    assert!(matches!(orthotropize(&bad), Err(Error::NotSpd(_))));
}

#[test]
fn fit_report_round_trip() {
    let records = elastic_records(&reference_ortho(), 1e-5);
    let fit = fit_elasticity(&records).unwrap();
    assert!(fit.reconstruction_error() < 1e-10);
    let couplings = (2.0 * (499.0f64.powi(2) + 670.0f64.powi(2))).sqrt();
    assert!(rel(fit.frobenius_gap, couplings) < 1e-3);
    let back = ElasticityFit::from_json(&fit.to_json().unwrap()).unwrap();
    assert_eq!(back, fit);
}
