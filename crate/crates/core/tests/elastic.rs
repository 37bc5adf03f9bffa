use gaplab::elastic::{rigid_basis, stiffness_contract, strain, ElasticTensor, SymMatrix2};
use nalgebra::Matrix2;
use proptest::prelude::*;

fn tensor() -> impl Strategy<Value = ElasticTensor> {
    (0.05f64..10.0, -0.9f64..10.0).prop_map(|(mu, t)| ElasticTensor::new(t * mu, mu).unwrap())
}

fn sym() -> impl Strategy<Value = SymMatrix2> {
    (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b, c)| SymMatrix2::new(a, b, c))
}

proptest! {
    #[test]
    fn energy_respects_ellipticity_bounds(t in tensor(), e in sym()) {
        let (lo, hi) = t.ellipticity_bounds();
        let energy = stiffness_contract(&t, &e).dot(&e);
        let n2 = e.dot(&e);
        prop_assert!(energy >= lo * n2 - 1e-12 * n2.max(1.0));
        prop_assert!(energy <= hi * n2 + 1e-12 * n2.max(1.0));
    }

    #[test]
    fn contraction_is_linear(t in tensor(), a in sym(), b in sym(), s in -3.0f64..3.0) {
        let sum = SymMatrix2::sym_part(&(a.matrix() * s + b.matrix()));
        let lhs = stiffness_contract(&t, &sum);
        let rhs = stiffness_contract(&t, &a).matrix() * s + stiffness_contract(&t, &b).matrix();
        prop_assert!((lhs.matrix() - rhs).amax() <= 1e-12 * (1.0 + rhs.amax()));
    }

    #[test]
    fn contraction_is_major_symmetric(t in tensor(), a in sym(), b in sym()) {
        let ab = stiffness_contract(&t, &a).dot(&b);
        let ba = stiffness_contract(&t, &b).dot(&a);
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
    }

    #[test]
    fn rigid_motions_are_strain_free(x in -4.0f64..4.0, y in -4.0f64..4.0) {
        for m in rigid_basis() {
            prop_assert_eq!(strain(&m.gradient()).norm(), 0.0);
            let h = 1e-3;
            let fd = Matrix2::from_fn(|i, j| {
                let mut p = [x, y];
                let mut q = [x, y];
                p[j] += h;
                q[j] -= h;
                (m.eval(p)[i] - m.eval(q)[i]) / (2.0 * h)
            });
            prop_assert!((fd - m.gradient()).amax() < 1e-12);
        }
    }

    #[test]
    fn weak_convexity_violations_rejected(mu in -5.0f64..0.0, l in -5.0f64..5.0) {
        prop_assert!(ElasticTensor::new(l, mu).is_err());
    }
}

#[test]
fn voigt_matches_contraction() {
    let t = ElasticTensor::new(1.3, 0.7).unwrap();
    let e = SymMatrix2::new(0.2, -0.4, 1.1);
    let s = stiffness_contract(&t, &e);
    let v = t.voigt() * nalgebra::Vector3::new(0.2, 1.1, -0.8);
    let m = s.matrix();
    assert!((v[0] - m[(0, 0)]).abs() < 1e-14);
    assert!((v[1] - m[(1, 1)]).abs() < 1e-14);
    assert!((v[2] - m[(0, 1)]).abs() < 1e-14);
}
