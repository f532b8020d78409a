use std::f64::consts::PI;

use dropcap_core::equilibrium::equilibrium_measure_with;
use dropcap_core::instability::{
    fuglede_check, many_balls_family, perturbed_sphere, ManyBallsOptions,
};
use dropcap_core::{
    assemble_operator, discretize, equilibrium_measure, solve_entropic, solve_external,
    EquilibriumOptions, ExternalPotential, HarmonicCoefficient, KernelParams, Placement, Shape,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn box_shape(hx: f64, hy: f64, hz: f64) -> Shape {
    Shape::cuboid(vec![0.0; 3], vec![hx, hy, hz]).unwrap()
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn zero_sum_quadratic_form_is_positive(
        alpha in 0.8f64..3.0,
        hx in 0.4f64..1.5,
        hy in 0.4f64..1.5,
        seed in any::<u64>(),
    ) {
        let params = KernelParams::new(3, alpha).unwrap();
        let placement = if alpha >= 2.0 { Placement::Boundary } else { Placement::Volume };
        let op = assemble_operator(discretize(&box_shape(hx, hy, 0.5), 300, placement).unwrap(), params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let mut w: Vec<f64> = (0..op.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            w.iter_mut().for_each(|x| *x -= mean);
            prop_assert!(op.quadratic_form(&w) > 0.0);
        }
        for i in 0..op.len() {
            for j in 0..i {
                prop_assert_eq!(op.entry(i, j), op.entry(j, i));
                if alpha < 3.0 {
                    prop_assert!(op.entry(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn equilibrium_is_a_probability_measure_satisfying_kkt(
        alpha in 1.2f64..2.0,
        hx in 0.4f64..1.2,
        hz in 0.3f64..1.0,
    ) {
        let params = KernelParams::new(3, alpha).unwrap();
        let op = assemble_operator(discretize(&box_shape(hx, 0.6, hz), 400, Placement::Volume).unwrap(), params).unwrap();
        let res = equilibrium_measure(&op, 1e-10).unwrap();
        let w = res.measure.masses();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12 * w.len() as f64);
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((res.capacity * res.energy - 1.0).abs() < 1e-12);
        for (wi, vi) in w.iter().zip(&res.potential_on_nodes) {
            if *wi > 0.0 {
                prop_assert!((vi - res.energy).abs() <= res.kkt_residual + 1e-14);
            } else {
                prop_assert!(*vi >= res.energy - res.kkt_residual - 1e-14);
            }
        }
    }

    #[test]
    fn equilibrium_is_unique_across_initial_supports(hx in 0.5f64..1.5, start in 0usize..50) {
        let params = KernelParams::new(3, 1.5).unwrap();
        let op = assemble_operator(discretize(&box_shape(hx, 0.7, 0.5), 400, Placement::Volume).unwrap(), params).unwrap();
        let a = equilibrium_measure(&op, 1e-10).unwrap();
        let opts = EquilibriumOptions { initial_support: Some((start..start + 10).collect()), ..Default::default() };
        let b = equilibrium_measure_with(&op, &opts).unwrap();
        prop_assert!((a.energy - b.energy).abs() <= 1e-8 * a.energy);
        let l1: f64 = a.measure.masses().iter().zip(b.measure.masses()).map(|(x, y)| (x - y).abs()).sum();
        prop_assert!(l1 <= 1e-6);
    }

    #[test]
    fn ball_energy_is_homogeneous_and_monotone(alpha in 1.5f64..2.5, r in 0.3f64..3.0) {
        let params = KernelParams::new(3, alpha).unwrap();
        let energy = |radius: f64| {
            let shape = Shape::ball(vec![0.0; 3], radius).unwrap();
            let op = assemble_operator(discretize(&shape, 600, Placement::Boundary).unwrap(), params).unwrap();
            equilibrium_measure(&op, 1e-10).unwrap().energy
        };
        let (e1, er) = (energy(1.0), energy(r));
        let scaled = e1 * r.powf(-(3.0 - alpha));
        prop_assert!((er - scaled).abs() <= 1e-9 * scaled);
        if r > 1.05 {
            prop_assert!(er < e1);
        } else if r < 0.95 {
            prop_assert!(er > e1);
        }
    }

    #[test]
    fn log_energy_shifts_under_dilation(r in 0.3f64..3.0) {
        let params = KernelParams::coulomb(2).unwrap();
        let energy = |radius: f64| {
            let shape = Shape::ball(vec![0.4, -0.2], radius).unwrap();
            let op = assemble_operator(discretize(&shape, 400, Placement::Boundary).unwrap(), params).unwrap();
            equilibrium_measure(&op, 1e-10).unwrap()
        };
        let (a, b) = (energy(1.0), energy(r));
        prop_assert!((b.energy - (a.energy - r.ln())).abs() <= 1e-9);
        prop_assert!((b.capacity / a.capacity - r).abs() <= 1e-9 * r);
    }

    #[test]
    fn external_field_is_linear_and_shift_invariant(
        ex in -2.0f64..2.0,
        ey in -2.0f64..2.0,
        scale in 0.1f64..5.0,
        shift in -3.0f64..3.0,
    ) {
        let shape = Shape::cuboid(vec![0.0; 3], vec![1.0, 0.7, 0.5]).unwrap();
        let op = assemble_operator(discretize(&shape, 400, Placement::Boundary).unwrap(), KernelParams::coulomb(3).unwrap()).unwrap();
        let phi = ExternalPotential::linear(vec![ex, ey, 0.3]);
        let base = solve_external(&op, &phi).unwrap();
        prop_assert!(base.measure.masses().iter().sum::<f64>().abs() <= 1e-12);
        prop_assert!(base.el_residual <= 1e-9);

        let scaled = solve_external(&op, &ExternalPotential::linear(vec![scale * ex, scale * ey, scale * 0.3])).unwrap();
        let tol = 1e-10 * (1.0 + scale);
        for (a, b) in base.measure.masses().iter().zip(scaled.measure.masses()) {
            prop_assert!((scale * a - b).abs() <= tol);
        }
        prop_assert!((scaled.f_value - scale * scale * base.f_value).abs() <= 1e-9 * scaled.f_value.abs().max(1e-3));

        let moved = solve_external(&op, &phi.shifted(shift)).unwrap();
        prop_assert!((moved.lambda - base.lambda - shift / 2.0).abs() <= 1e-10);
        for (a, b) in base.measure.masses().iter().zip(moved.measure.masses()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn entropic_density_has_unit_mass_and_respects_bounds(hx in 0.4f64..1.2, hy in 0.4f64..1.2) {
        let shape = box_shape(hx, hy, 0.6);
        let cloud = discretize(&shape, 500, Placement::Volume).unwrap();
        let res = solve_entropic(cloud, KernelParams::coulomb(3).unwrap()).unwrap();
        let mass: f64 = res.density.iter().zip(res.cloud.weights()).map(|(r, v)| r * v).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
        prop_assert!(res.j_value > 0.0);
        prop_assert!(res.j_value <= res.uniform_bound * (1.0 + 1e-12));
        prop_assert!(res.el_residual <= 1e-8);
    }
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn perturbed_spheres_keep_the_ball_volume(
        a2 in -1.0f64..1.0,
        a3 in -1.0f64..1.0,
        m3 in -3i64..=3,
        t in 0.0f64..0.15,
    ) {
        let coeffs = vec![HarmonicCoefficient::new(2, 0, a2), HarmonicCoefficient::new(3, m3, a3)];
        let shape = perturbed_sphere(&coeffs, t).unwrap();
        prop_assert!((shape.volume().unwrap() - 4.0 * PI / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn perimeter_expansion_is_exact_at_zero_amplitude(a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let coeffs = [HarmonicCoefficient::new(1, 1, a), HarmonicCoefficient::new(4, -2, b)];
        let table = fuglede_check(&coeffs, &[0.0, 0.01]).unwrap();
        prop_assert!(table.rows[0].remainder.abs() <= 1e-12);
        prop_assert!(table.rows[0].ratio.is_none());
    }

    #[test]
    fn family_energy_is_the_sum_of_its_components(beta in 0.52f64..0.98, q in 0.1f64..3.0) {
        let opts = ManyBallsOptions { unit_ball_energy: Some(1.0), ..Default::default() };
        let points = many_balls_family(&[4, 16, 64], beta, q, KernelParams::coulomb(3).unwrap(), &opts).unwrap();
        for p in &points {
            let sum: f64 = p.components.iter().map(|c| c.value).sum();
            prop_assert!((p.analytic_energy - sum).abs() <= 1e-12 * sum.abs().max(1.0));
            prop_assert!((p.shape.volume().unwrap() - 4.0 * PI / 3.0).abs() <= 1e-12);
        }
    }
}
