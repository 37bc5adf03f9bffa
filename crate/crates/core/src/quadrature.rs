//! Triangle quadrature rules and adaptive Gauss-Kronrod integration.

/// Point `(xi, eta)` on the reference triangle `{xi, eta >= 0, xi + eta <= 1}` and its weight.
/// Weights sum to 1/2, the reference area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub xi: f64,
    pub eta: f64,
    pub weight: f64,
}

fn orbit3(a: f64, b: f64, w: f64, out: &mut Vec<QuadPoint>) {
    // barycentric (a, b, b) and its rotations; xi = L1, eta = L2
    for (l1, l2) in [(b, b), (a, b), (b, a)] {
        out.push(QuadPoint { xi: l1, eta: l2, weight: 0.5 * w });
    }
}

fn orbit6(a: f64, b: f64, c: f64, w: f64, out: &mut Vec<QuadPoint>) {
    for (l1, l2) in [(a, b), (b, a), (b, c), (c, b), (a, c), (c, a)] {
        out.push(QuadPoint { xi: l1, eta: l2, weight: 0.5 * w });
    }
}

/// Six-point rule, exact for polynomials of degree 4.
pub fn triangle_degree4() -> Vec<QuadPoint> {
    let mut v = Vec::with_capacity(6);
    orbit3(0.108103018168070, 0.445948490915965, 0.223381589678011, &mut v);
    orbit3(0.816847572980459, 0.091576213509771, 0.109951743655322, &mut v);
    v
}

/// Twelve-point rule, exact for polynomials of degree 6.
pub fn triangle_degree6() -> Vec<QuadPoint> {
    let mut v = Vec::with_capacity(12);
    orbit3(0.501426509658179, 0.249286745170910, 0.116786275726379, &mut v);
    orbit3(0.873821971016996, 0.063089014491502, 0.050844906370207, &mut v);
    orbit6(0.053145049844817, 0.310352451033784, 0.636502499121399, 0.082851075618374, &mut v);
    v
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7-K15 panel: returns (Kronrod estimate, |K - G|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod integration on `[a, b]` to absolute tolerance `tol`.
/// Returns the estimate and the summed error indicator.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let mut stack = vec![(a, b, tol, 0usize)];
    let (mut total, mut err) = (0.0, 0.0);
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        if e <= t || depth >= 60 {
            total += v;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, 0.5 * t, depth + 1));
            stack.push((lo, mid, 0.5 * t, depth + 1));
        }
    }
    (total, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_monomial(p: u32, q: u32) -> f64 {
        // int over reference triangle of xi^p eta^q = p! q! / (p + q + 2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(p) * fact(q) / fact(p + q + 2)
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        for (rule, deg) in [(triangle_degree4(), 4), (triangle_degree6(), 6)] {
            for p in 0..=deg {
                for q in 0..=(deg - p) {
                    let s: f64 = rule.iter().map(|w| w.weight * w.xi.powi(p as i32) * w.eta.powi(q as i32)).sum();
                    assert!((s - exact_monomial(p, q)).abs() < 1e-14, "deg {deg} p {p} q {q}");
                }
            }
        }
    }

    #[test]
    fn gauss_kronrod_smooth_and_singular() {
        let (v, _) = integrate(|x| x.exp(), 0.0, 1.0, 1e-14);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
        let (w, _) = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-13);
        assert!((w - 2.0 / 3.0).abs() < 1e-12);
    }
}
