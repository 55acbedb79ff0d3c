use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use homog_core::calibrate::{CostConfig, CostFunction, Theta};
use homog_core::damage::plane_stress_elasticity;
use homog_core::fem::{generate_flemish_rve, Analysis, ElementKernel, FlemishGeometry, SolverConfig};
use homog_core::vlab::{run_point_campaign, strain_directions, CampaignConfig, MasonryMaterials};
use homog_core::{Constitutive, MaterialParams, PointLaw, StrainV};

fn damage_integration(c: &mut Criterion) {
    let law = PointLaw::new(&MaterialParams::mortar(), 0.01).unwrap();
    let path: Vec<StrainV> = (1..=200).map(|k| StrainV::new(2e-5, -1e-5, 1.5e-5) * f64::from(k)).collect();
    c.bench_function("damage/integrate_200_steps", |b| {
        b.iter(|| {
            let mut state = law.virgin_state();
            for &eps in &path {
                let (s, next) = law.integrate(black_box(eps), &state);
                black_box(s);
                state = next;
            }
            state
        })
    });
    let state = law.integrate(path[50], &law.virgin_state()).1;
    c.bench_function("damage/tangent", |b| b.iter(|| law.tangent(black_box(path[51]), &state, 1e-8)));
}

fn element_assembly(c: &mut Criterion) {
    let mesh = generate_flemish_rve(&FlemishGeometry::default()).unwrap();
    let d = plane_stress_elasticity(4.0e9, 0.2).unwrap();
    let kernels: Vec<ElementKernel> = (0..mesh.element_count())
        .map(|e| ElementKernel::new(mesh.element_coords(e), mesh.thickness).unwrap())
        .collect();
    c.bench_function("fem/element_stiffness_rve", |b| {
        b.iter(|| {
            let mut trace = 0.0;
            for kernel in &kernels {
                let mut k = [[0.0; 8]; 8];
                for g in 0..4 {
                    kernel.add_stiffness(g, &d, &mut k);
                }
                trace += (0..8).map(|i| k[i][i]).sum::<f64>();
            }
            trace
        })
    });
    let models = MasonryMaterials::default().models();
    let eps = StrainV::new(-1e-6, 0.0, 0.0);
    c.bench_function("fem/rve_elastic_increment", |b| {
        b.iter_batched(
            || Analysis::with_boundary_strain(mesh.clone(), &models, SolverConfig::default()).unwrap(),
            |mut a| {
                let drive = a.affine_drive(eps);
                a.advance(1.0, &drive).unwrap()
            },
            BatchSize::LargeInput,
        )
    });
}

fn cost_evaluation(c: &mut Criterion) {
    let l_rse = 0.0093;
    let theta = Theta::starting_point();
    let (e, nu) = (4.467e9, 0.2164);
    let law = PointLaw::new(&theta.to_params(e, nu), l_rse).unwrap();
    let cases: Vec<usize> = (1..=strain_directions().len()).collect();
    let records = run_point_campaign(&law, &CampaignConfig::default(), &cases, l_rse).unwrap();
    let cost = CostFunction::new(&records, e, nu, l_rse, CostConfig::default());
    let mut probe = theta;
    probe.gt *= 1.1;
    c.bench_function("calibrate/cost_26_cases", |b| b.iter(|| cost.evaluate(black_box(&probe)).total));
}

criterion_group!(benches, damage_integration, element_assembly, cost_evaluation);
criterion_main!(benches);
