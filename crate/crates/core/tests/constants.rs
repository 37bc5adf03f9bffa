mod common;

use common::{light_config, light_solution};
use gaplab::config::BoundaryData;
use gaplab::constants::{assemble_system, b_tilde, cramer3, extrapolate_limit, reconstruct_u, solve_constants, ConstantSystem};
use gaplab::elastic::ElasticTensor;
use gaplab::experiments::{solve_epsilon, traction_residuals, zero_pattern};
use gaplab::geometry::BoundaryTag;
use nalgebra::Vector3;
use proptest::prelude::*;

#[test]
fn matrix_entries_are_energy_products_and_tractions() {
    let sol = light_solution(1e-2);
    let sys = &sol.fields.system;
    let scale = sol.system.a_entry(1, 1, 1, 1);
    for i in 1..=2 {
        for j in 1..=2 {
            let tag = if j == 1 { BoundaryTag::Inc1 } else { BoundaryTag::Inc2 };
            for k in 1..=3 {
                for l in 1..=3 {
                    let a = sol.system.a_entry(i, j, k, l);
                    assert_eq!(a, sol.system.a[(ConstantSystem::idx(i, k), ConstantSystem::idx(j, l))]);
                    let e = sys.energy_product(&sol.fields.v[i - 1][k - 1], &sol.fields.v[j - 1][l - 1]).unwrap();
                    let t = -sys.traction_functional(&sol.fields.v[i - 1][k - 1], tag, l - 1).unwrap();
                    assert!((a - e).abs() <= 1e-10 * scale, "({i}{j}{k}{l}) {a} vs energy {e}");
                    assert!((a - t).abs() <= 1e-10 * scale, "({i}{j}{k}{l}) {a} vs traction {t}");
                }
            }
        }
    }
}

#[test]
fn symmetric_geometry_identities() {
    let sol = light_solution(1e-2);
    let s = &sol.system;
    let scale = s.a_entry(1, 1, 1, 1);
    assert!(zero_pattern(s) <= 1e-10);
    for k in 1..=3 {
        assert!(s.a_entry(1, 1, k, k) > 0.0 && s.a_entry(2, 2, k, k) > 0.0);
        assert!((s.a_entry(1, 1, k, k) - s.a_entry(2, 2, k, k)).abs() <= 1e-9 * scale);
    }
    for (k, l) in [(1, 1), (2, 2), (1, 2), (2, 1)] {
        assert!((s.a_entry(1, 2, k, l) - s.a_entry(2, 1, k, l)).abs() <= 1e-9 * scale);
    }
    let bn = s.b.norm();
    for (l, sign) in [(1, -1.0), (2, 1.0), (3, 1.0)] {
        assert!((s.b_entry(2, l) - sign * s.b_entry(1, l)).abs() <= 1e-9 * bn, "b l={l}");
    }
    let c = s.constants().unwrap();
    assert!((c[2] - c[5]).abs() <= 1e-8 * c[2].abs().max(1.0));
    assert!((c[0] + c[3]).abs() <= 1e-8 * c[0].abs().max(1.0));
}

/// `b~_j^l = b_j^l - sum_k C_2^k (a_1j^kl + a_2j^kl)`: the traction of the bounded part.
#[test]
fn bounded_part_functionals_match_their_expansion() {
    let sol = light_solution(1e-2);
    let s = &sol.system;
    let c = s.constants().unwrap();
    let scale = s.b.amax();
    for j in 1..=2 {
        for l in 1..=3 {
            let mut want = s.b_entry(j, l);
            for k in 1..=3 {
                want -= c[2 + k] * (s.a_entry(1, j, k, l) + s.a_entry(2, j, k, l));
            }
            let got = sol.b_tilde[3 * (j - 1) + l - 1];
            assert!((got - want).abs() <= 1e-9 * scale, "j {j} l {l}: {got} vs {want}");
        }
    }
}

#[test]
fn reconstructed_field_is_traction_free() {
    let sol = light_solution(5e-3);
    let tr = traction_residuals(&sol).unwrap();
    let bn = sol.system.b.norm();
    assert!(tr.iter().all(|t| t.abs() <= 1e-8 * bn), "{tr:?}");
}

#[test]
fn zero_data_gives_zero_constants() {
    let mut cfg = light_config(1.0);
    cfg.experiment.phi = BoundaryData::Zero;
    let sol = solve_epsilon(&cfg, 1e-2).unwrap();
    assert!(sol.system.b.iter().all(|v| *v == 0.0));
    assert!(sol.system.constants().unwrap().iter().all(|v| *v == 0.0));
    assert!(sol.b_tilde.iter().all(|v| *v == 0.0));
    assert!(sol.u.values.iter().all(|v| *v == 0.0));
}

#[test]
fn zero_constants_reconstruct_the_outer_field() {
    let sol = light_solution(1e-2);
    let mut sys = sol.system.clone();
    sys.c = Some(nalgebra::Vector6::zeros());
    let u = reconstruct_u(&sys, &sol.fields).unwrap();
    assert_eq!(u.values, sol.fields.v0.values);
}

/// `sum_k (C1^k - C2^k) a11^kl = b~_1^l` holds without symmetry; check it on a lopsided gap.
#[test]
fn reduced_system_matches_full_solve_on_asymmetric_geometry() {
    let mut cfg = light_config(1.0);
    cfg.geometry.kappa_bottom = Some(0.6);
    cfg.geometry.c2_bottom = Some(0.1);
    let sol = solve_epsilon(&cfg, 1e-2).unwrap();
    assert!(sol.mesh.symmetry_map.is_none());
    let raw = assemble_system(&sol.fields, true).unwrap();
    let (solved, report) = solve_constants(&raw).unwrap();
    assert!(report.residual <= 1e-12);
    let c = solved.constants().unwrap();
    let bt = b_tilde(&solved, &sol.fields).unwrap();
    let diff = cramer3(&solved.block11(), &Vector3::new(bt[0], bt[1], bt[2])).unwrap();
    for k in 0..3 {
        let want = c[k] - c[k + 3];
        assert!((diff[k] - want).abs() <= 1e-8 * c.amax(), "k {k}: {} vs {want}", diff[k]);
    }
}

proptest! {
    #[test]
    fn extrapolation_recovers_exact_models(b in -5.0f64..5.0, c in -3.0f64..3.0, gamma in 0.1f64..=1.0) {
        let rate = gamma / (1.0 + 2.0 * gamma);
        let samples: Vec<(f64, [f64; 3])> = [1e-2, 5e-3, 2.5e-3, 1.25e-3]
            .iter()
            .map(|&e: &f64| (e, [b + c * e.powf(rate), b, 0.0]))
            .collect();
        let t = ElasticTensor::new(1.0, 1.0).unwrap();
        let f = extrapolate_limit(&samples, gamma, &t).unwrap();
        prop_assert!((f.b_tilde_star[0] - b).abs() <= 1e-9 * (1.0 + b.abs() + c.abs()));
        prop_assert!((f.slopes[0] - c).abs() <= 1e-8 * (1.0 + c.abs()));
        prop_assert!((f.b_tilde_star[1] - b).abs() <= 1e-12 * (1.0 + b.abs()));
        prop_assert!(f.slopes[1].abs() <= 1e-10);
        prop_assert_eq!(f.matrix[(0, 1)], f.b_tilde_star[0] / t.mu);
        prop_assert_eq!(f.matrix[(1, 0)], 0.0);
    }
}
