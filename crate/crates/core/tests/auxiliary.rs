use gaplab::auxiliary::{
    grad_ubar, holder_seminorm, in_gap_strip, q_tilde, q_tilde_closed_form, ubar_formula, Auxiliary, HolderRegion,
};
use gaplab::experiments::fit_exponent;
use gaplab::geometry::{delta, BoundaryTag, DomainSpec, Side};
use proptest::prelude::*;

fn spec(eps: f64, gamma: f64) -> DomainSpec {
    DomainSpec::symmetric_default(eps, 1.0, gamma).unwrap()
}

proptest! {
    #[test]
    fn formula_traces_on_gap_boundaries(eps in 1e-5f64..5e-2, gamma in 0.1f64..=1.0, x in -0.25f64..0.25) {
        let s = spec(eps, gamma);
        let top = 0.5 * eps + s.profile.h(Side::Top, x).unwrap();
        let bottom = -0.5 * eps + s.profile.h(Side::Bottom, x).unwrap();
        prop_assert!((ubar_formula(&s, [x, top]).unwrap() - 1.0).abs() <= 1e-12);
        prop_assert!(ubar_formula(&s, [x, bottom]).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences(eps in 1e-3f64..5e-2, gamma in 0.3f64..=1.0, x in -0.2f64..0.2, t in 0.05f64..0.95) {
        let s = spec(eps, gamma);
        let lo = -0.5 * eps + s.profile.h(Side::Bottom, x).unwrap();
        let hi = 0.5 * eps + s.profile.h(Side::Top, x).unwrap();
        let p = [x, lo + t * (hi - lo)];
        let g = grad_ubar(&s, p).unwrap();
        let hstep = 1e-7;
        let f = |q: [f64; 2]| ubar_formula(&s, q).unwrap();
        let d1 = (f([p[0] + hstep, p[1]]) - f([p[0] - hstep, p[1]])) / (2.0 * hstep);
        let d2 = (f([p[0], p[1] + hstep]) - f([p[0], p[1] - hstep])) / (2.0 * hstep);
        let scale = 1.0 / delta(&s, x).unwrap();
        prop_assert!((d1 - g[0]).abs() <= 1e-6 * scale, "d1 {} vs {}", d1, g[0]);
        prop_assert!((d2 - g[1]).abs() <= 1e-6 * scale, "d2 {} vs {}", d2, g[1]);
    }

    #[test]
    fn quadrature_matches_closed_form(gamma in 0.05f64..=1.0) {
        prop_assert!((q_tilde(gamma).unwrap() - q_tilde_closed_form(gamma)).abs() <= 1e-10);
    }
}

/// Rigid traces are exact on the boundary nodes of the continuation mesh (up to point location)
/// and inside the gap strip; between nodes of a curved edge outside the strip they carry the
/// P2 geometry error.
#[test]
fn auxiliary_vectors_have_rigid_traces() {
    let s = spec(1e-2, 1.0);
    let aux = Auxiliary::new(s);
    let mesh = aux.extension().unwrap().mesh.clone();
    let curve = |tag| s.inclusion(tag).unwrap().polyline(64);
    let outer: Vec<[f64; 2]> = (0..64)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 64.0;
            [4.0 * t.cos(), 4.0 * t.sin()]
        })
        .collect();
    let cases = [
        (BoundaryTag::Inc1, [1.0, 0.0], curve(BoundaryTag::Inc1)),
        (BoundaryTag::Inc2, [0.0, 1.0], curve(BoundaryTag::Inc2)),
        (BoundaryTag::Outer, [0.0, 0.0], outer),
    ];
    for (tag, weights, samples) in cases {
        for l in 0..3 {
            let check = |p: [f64; 2], tol: f64| {
                let psi = gaplab::elastic::rigid_basis()[l].eval(p);
                for (i, w) in weights.iter().enumerate() {
                    let (v, _) = aux.aux_vector(i + 1, l, p).unwrap_or_else(|e| panic!("{p:?}: {e}"));
                    let err = (v[0] - w * psi[0]).abs().max((v[1] - w * psi[1]).abs());
                    assert!(err <= tol, "{tag:?} inclusion {} l {l} at {p:?}: error {err:e}", i + 1);
                }
            };
            for n in mesh.tagged_nodes(tag) {
                assert!((aux.extension().unwrap().values[n] - weights[0]).abs() <= 1e-15);
                check(mesh.nodes[n], 1e-9);
            }
            for &p in &samples {
                let tol = if in_gap_strip(&s, p, s.r1()) { 1e-12 } else { 1e-3 };
                check(p, tol);
            }
        }
    }
}

#[test]
fn extension_values_stay_in_unit_interval() {
    let s = spec(1e-2, 1.0);
    let aux = Auxiliary::new(s);
    let ext = aux.extension().unwrap();
    let tol = 1e-12;
    assert!(ext.values.iter().all(|v| *v >= -tol && *v <= 1.0 + tol));
    for &p in &[[0.0, 0.0], [0.3, 0.0], [1.0, 1.0], [-2.0, 0.5], [0.0, -1.0]] {
        let u = aux.ubar(p).unwrap();
        assert!((-tol..=1.0 + tol).contains(&u), "{p:?}: {u}");
    }
    assert!(aux.ubar([0.0, 0.3]).is_err());
}

/// The gradient of the gap function oscillates on cells of width delta(z1) at the rate
/// delta(z1)^(-1 - gamma^2/(1+gamma)) for small epsilon.
#[test]
fn holder_seminorm_scaling_on_gap_cells() {
    for gamma in [0.5, 1.0] {
        let s = spec(1e-7, gamma);
        let f = |x: [f64; 2]| grad_ubar(&s, x).map(|g| g.to_vec()).unwrap_or_else(|_| vec![0.0, 0.0]);
        let pairs: Vec<(f64, f64)> = [0.01, 0.02, 0.04, 0.08, 0.16]
            .iter()
            .map(|&z1: &f64| {
                let d = delta(&s, z1).unwrap();
                let est = holder_seminorm(&f, &HolderRegion::GapCell { spec: s, z1, s: d }, gamma, 4000, 7);
                (d, est)
            })
            .collect();
        let fit = fit_exponent(&pairs).unwrap();
        let predicted = -1.0 - gamma * gamma / (1.0 + gamma);
        assert!((fit.slope - predicted).abs() < 0.1, "gamma {gamma}: slope {} vs {predicted}", fit.slope);
    }
}
