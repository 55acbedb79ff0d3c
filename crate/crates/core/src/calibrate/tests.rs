use super::*;
use crate::error::Error;
use crate::isotropize::map_history;
use crate::macro_law::MacroLaw;
use crate::tensor::Mat3;
use crate::vlab::{run_point_campaign, CampaignConfig, HistoryRecord};

const E: f64 = 4.46701076e9;
const NU: f64 = 0.21639363;
const L_RSE: f64 = 0.0093;

fn reference_t() -> Mat3 {
    Mat3([
        [1.08385, -1.6945e-2, 5.009e-8],
        [-3.0412e-2, 0.96048, 8.362e-8],
        [9.400e-8, 1.4143e-7, 0.96388],
    ])
}

/// Converged parameter vector of the reference calibration.
fn reference_theta() -> Theta {
    Theta {
        f0t: 2.6e5,
        gt: 1.0e3,
        kb: 1.15,
        kappa: 2.765e-7,
        gc: 803.32,
        fpc: 1.0e7,
        epc: 6.1007e-3,
        f0c: 3.9874e6,
        frc: 1.0e4,
        c1: 0.49547,
        c2: 0.6,
        c3: 2.2,
    }
}

/// Campaign generated by the macro law at `theta`, mapped to the isotropic space.
fn synthetic(theta: Theta, config: &CampaignConfig, cases: &[usize]) -> Vec<HistoryRecord> {
    let law = MacroLaw::new(theta, E, NU, reference_t(), L_RSE).unwrap();
    let point = law.bind(L_RSE).unwrap();
    let raw = run_point_campaign(&point, config, cases, L_RSE).unwrap();
    raw.iter().map(|r| map_history(r, &law.t).unwrap()).collect()
}

fn all_cases() -> Vec<usize> {
    (1..=26).collect()
}

#[test]
fn self_consistent_campaign_has_zero_cost() {
    let records = synthetic(reference_theta(), &CampaignConfig::default(), &all_cases());
    let cost = CostFunction::new(&records, E, NU, L_RSE, CostConfig::default());
    let r = cost.evaluate(&reference_theta());
    assert!(r.feasible);
    assert_eq!(r.terms.len(), 26);
    assert!(r.total <= 1e-10 * cost.work_scale(), "{} vs {}", r.total, cost.work_scale());
    let all = CostFunction::new(&records, E, NU, L_RSE, CostConfig { all_steps: true });
    assert!(all.evaluate(&reference_theta()).total <= 1e-10 * all.work_scale() * 400.0);
}

#[test]
fn cost_is_the_sum_of_terms_and_order_free() {
    let records = synthetic(reference_theta(), &CampaignConfig::default(), &all_cases());
    let theta = Theta::starting_point();
    let a = CostFunction::new(&records, E, NU, L_RSE, CostConfig::default()).evaluate(&theta);
    let reversed: Vec<_> = records.iter().rev().cloned().collect();
    let b = CostFunction::new(&reversed, E, NU, L_RSE, CostConfig::default()).evaluate(&theta);
    assert!(a.total > 0.0);
    assert!((a.total - b.total).abs() <= 1e-12 * a.total);
    assert_eq!(a.total, a.terms.iter().map(|t| t.term).sum::<f64>());
}

#[test]
fn elastic_histories_ignore_nonlinear_parameters() {
    let config = CampaignConfig {
        tension_lambda: 1e-6,
        compression_lambda: 1e-6,
        tension_steps: 5,
        compression_steps: 5,
        ..CampaignConfig::default()
    };
    let records = synthetic(reference_theta(), &config, &all_cases());
    let cost = CostFunction::new(&records, E, NU, L_RSE, CostConfig::default());
    let base = cost.evaluate(&Theta::starting_point()).total;
    let b = Bounds::reference();
    for k in 0..20 {
        let xi: [f64; DIM] = std::array::from_fn(|i| ((k * 7 + i * 3) % 11) as f64 / 10.0);
        let mut theta = denormalize(&xi, &b);
        theta.c3 = theta.c3.max(1.5);
        theta.fpc = theta.fpc.max(1.2 * theta.f0c);
        theta.gc = b.hi[4];
        let r = cost.evaluate(&theta);
        if r.feasible {
            assert_eq!(r.total, base);
        }
    }
}

#[test]
fn larger_tensile_energy_increases_cost() {
    let tension: Vec<usize> = vec![4, 5, 6, 10, 11, 14, 15];
    let records = synthetic(reference_theta(), &CampaignConfig::default(), &tension);
    let cost = CostFunction::new(&records, E, NU, L_RSE, CostConfig::default());
    let mut last = cost.evaluate(&reference_theta()).total;
    for factor in [1.1, 1.2, 1.3] {
        let mut theta = reference_theta();
        theta.gt *= factor;
        let now = cost.evaluate(&theta).total;
        assert!(now > last, "gt x{factor}: {now} <= {last}");
        last = now;
    }
}

#[test]
fn infeasible_parameters_are_penalized() {
    let records = synthetic(reference_theta(), &CampaignConfig::default(), &[1, 4]);
    let cost = CostFunction::new(&records, E, NU, L_RSE, CostConfig::default());
    let mut theta = reference_theta();
    theta.fpc = theta.f0c;
    let r = cost.evaluate(&theta);
    assert!(!r.feasible && r.total == PENALTY);
    assert!(r.violated.contains(&"fpc > f0c".to_string()));
    let b = Bounds::reference();
    assert!(matches!(
        calibrate(&cost, &theta, &b, &TrustRegionConfig::default()),
        Err(Error::OutOfBounds { name: "fpc", .. })
    ));
    let mut theta = reference_theta();
    theta.c3 = 0.5;
    let err = calibrate(&cost, &theta, &b, &TrustRegionConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Infeasible(ref v) if v == &["compressive Bezier energy".to_string()]), "{err:?}");
}

#[test]
fn deployment_length_tightens_feasibility() {
    let records = synthetic(reference_theta(), &CampaignConfig::default(), &[1]);
    let mut cost = CostFunction::new(&records, E, NU, L_RSE, CostConfig::default());
    assert!(cost.evaluate(&reference_theta()).feasible);
    cost.deploy_lengths = vec![0.05];
    let r = cost.evaluate(&reference_theta());
    assert!(!r.feasible);
    assert!(r.violated.iter().any(|v| v.contains("l = 0.05")), "{:?}", r.violated);
}

#[test]
fn round_trip_from_starting_point() {
    let records = synthetic(reference_theta(), &CampaignConfig::default(), &all_cases());
    let cost = CostFunction::new(&records, E, NU, L_RSE, CostConfig::default());
    let b = Bounds::reference();
    let c = calibrate(&cost, &Theta::starting_point(), &b, &TrustRegionConfig::default()).unwrap();
    assert!(c.relative_cost() <= 0.01);
    assert_eq!(c.trace_csv().lines().count(), c.minimum.trace.len() + 1);
    let v = c.theta_star.to_array();
    assert!((0..DIM).all(|i| v[i] >= b.lo[i] && v[i] <= b.hi[i]));
    assert!(c.minimum.trace.windows(2).all(|w| w[1].cost <= w[0].cost));
}
