//! The scalar auxiliary function that interpolates linearly across the gap,
//! its vector versions, the constant `Q~_gamma` and a Holder semi-norm estimator.

use crate::elastic::rigid_basis;
use crate::error::{Error, Result};
use crate::fem::{eval_point, shape_values};
use crate::geometry::{delta, delta_deriv, BoundaryTag, DomainSpec, Side};
use crate::mesh::{generate, GradingParams, Mesh};
use crate::quadrature::{integrate, triangle_degree4};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side as FaerSide};
use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

/// True when `x` lies in the closed gap strip `|x1| <= r` between the two graphs.
pub fn in_gap_strip(spec: &DomainSpec, x: [f64; 2], r: f64) -> bool {
    if x[0].abs() > r || x[0].abs() > 2.0 * spec.r1() {
        return false;
    }
    let p = &spec.profile;
    let (Ok(h1), Ok(h2)) = (p.h(Side::Top, x[0]), p.h(Side::Bottom, x[0])) else { return false };
    let tol = 1e-12 * spec.outer_radius;
    x[1] >= -0.5 * spec.epsilon + h2 - tol && x[1] <= 0.5 * spec.epsilon + h1 + tol
}

/// Gap formula `(x2 - h2 + eps/2) / delta(x1)`.
pub fn ubar_formula(spec: &DomainSpec, x: [f64; 2]) -> Result<f64> {
    let h2 = spec.profile.h(Side::Bottom, x[0])?;
    Ok((x[1] - h2 + 0.5 * spec.epsilon) / delta(spec, x[0])?)
}

/// Gradient of the gap formula; only defined in the strip `|x1| <= R1`.
pub fn grad_ubar(spec: &DomainSpec, x: [f64; 2]) -> Result<[f64; 2]> {
    if !in_gap_strip(spec, x, spec.r1()) {
        return Err(Error::Domain(format!("point {x:?} is outside the gap strip |x1| <= R1")));
    }
    let p = &spec.profile;
    let d = delta(spec, x[0])?;
    let dd = delta_deriv(spec, x[0])?;
    let h2 = p.h(Side::Bottom, x[0])?;
    let h2d = p.h_deriv(Side::Bottom, x[0])?;
    let phi1 = -h2d / d;
    let phi2 = -x[1] * dd / (d * d);
    let phi3 = (h2 - 0.5 * spec.epsilon) * dd / (d * d);
    Ok([phi1 + phi2 + phi3, 1.0 / d])
}

fn strip_value(spec: &DomainSpec, target: BoundaryTag, x: [f64; 2]) -> Result<f64> {
    let u = ubar_formula(spec, x)?;
    Ok(if target == BoundaryTag::Inc1 { u } else { 1.0 - u })
}

fn strip_grad(spec: &DomainSpec, target: BoundaryTag, x: [f64; 2]) -> Result<[f64; 2]> {
    let g = grad_ubar(spec, x)?;
    Ok(if target == BoundaryTag::Inc1 { g } else { [-g[0], -g[1]] })
}

/// Harmonic continuation of the gap formula to the rest of the matrix region, on a P2 mesh.
pub struct Extension {
    /// The inclusion (`Inc1` or `Inc2`) on which the continued function equals 1.
    pub target: BoundaryTag,
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    /// Elements inside the gap strip use the formula, the others the discrete harmonic field.
    pub in_strip: Vec<bool>,
    locator: Locator,
}

impl Extension {
    /// Continuation of the gap formula (`target = Inc1`) or of its complement (`target = Inc2`).
    pub fn build(spec: &DomainSpec, mesh: Arc<Mesh>, target: BoundaryTag) -> Result<Self> {
        if target == BoundaryTag::Outer {
            return Err(Error::Domain("the continuation target must be an inclusion".into()));
        }
        let n = mesh.nodes.len();
        let r1 = spec.r1();
        let in_strip: Vec<bool> = mesh
            .elements
            .iter()
            .map(|el| {
                let c = [0, 1, 2].iter().fold([0.0, 0.0], |a, &k| {
                    let p = mesh.nodes[el[k]];
                    [a[0] + p[0] / 3.0, a[1] + p[1] / 3.0]
                });
                in_gap_strip(spec, c, r1)
            })
            .collect();
        let mut used_out = vec![false; n];
        let mut used_in = vec![false; n];
        for (el, s) in mesh.elements.iter().zip(&in_strip) {
            for &i in el {
                if *s {
                    used_in[i] = true;
                } else {
                    used_out[i] = true;
                }
            }
        }
        let mut fixed: Vec<Option<f64>> = vec![None; n];
        for b in &mesh.boundary_edges {
            let v = if b.tag == target { 1.0 } else { 0.0 };
            for &i in &b.nodes {
                fixed[i] = Some(v);
            }
        }
        let mut values = vec![0.0; n];
        for i in 0..n {
            if used_in[i] {
                let v = strip_value(spec, target, mesh.nodes[i])?;
                values[i] = v;
                if used_out[i] {
                    fixed[i] = Some(v);
                }
            }
        }
        let mut free_id = vec![usize::MAX; n];
        let mut nf = 0;
        for i in 0..n {
            if used_out[i] && fixed[i].is_none() {
                free_id[i] = nf;
                nf += 1;
            }
        }
        let rule = triangle_degree4();
        let mut trip = Vec::new();
        let mut rhs = Mat::<f64>::zeros(nf, 1);
        for (e, el) in mesh.elements.iter().enumerate() {
            if in_strip[e] {
                continue;
            }
            let mut k = [[0.0; 6]; 6];
            for q in &rule {
                let ev = eval_point(&mesh, e, q.xi, q.eta);
                let w = q.weight * ev.det;
                for a in 0..6 {
                    for b in 0..6 {
                        k[a][b] += w * (ev.dn[a][0] * ev.dn[b][0] + ev.dn[a][1] * ev.dn[b][1]);
                    }
                }
            }
            for a in 0..6 {
                let ia = el[a];
                if free_id[ia] == usize::MAX {
                    continue;
                }
                for b in 0..6 {
                    let ib = el[b];
                    match fixed[ib] {
                        Some(v) => rhs[(free_id[ia], 0)] -= k[a][b] * v,
                        None => {
                            if free_id[ib] <= free_id[ia] {
                                trip.push(Triplet::new(free_id[ia], free_id[ib], k[a][b]));
                            }
                        }
                    }
                }
            }
        }
        if nf > 0 {
            let a = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &trip)
                .map_err(|e| Error::Solver(format!("extension matrix: {e:?}")))?;
            let llt = a.sp_cholesky(FaerSide::Lower).map_err(|e| Error::Solver(format!("extension factorization: {e:?}")))?;
            llt.solve_in_place(rhs.as_mut());
        }
        for i in 0..n {
            if let Some(v) = fixed[i] {
                values[i] = v;
            } else if free_id[i] != usize::MAX {
                values[i] = rhs[(free_id[i], 0)];
            }
        }
        let locator = Locator::new(&mesh);
        Ok(Self { target, mesh, values, in_strip, locator })
    }

    /// Value and gradient at a reference point of element `e` (formula inside the strip).
    pub fn eval_element(&self, spec: &DomainSpec, e: usize, xi: f64, eta: f64) -> Result<(f64, [f64; 2])> {
        let ev = eval_point(&self.mesh, e, xi, eta);
        if self.in_strip[e] && in_gap_strip(spec, ev.x, spec.r1()) {
            return Ok((strip_value(spec, self.target, ev.x)?, strip_grad(spec, self.target, ev.x)?));
        }
        let el = &self.mesh.elements[e];
        let (mut v, mut g) = (0.0, [0.0, 0.0]);
        for a in 0..6 {
            let u = self.values[el[a]];
            v += ev.n[a] * u;
            g[0] += ev.dn[a][0] * u;
            g[1] += ev.dn[a][1] * u;
        }
        Ok((v, g))
    }

    fn eval_point(&self, spec: &DomainSpec, x: [f64; 2]) -> Result<(f64, [f64; 2])> {
        let (e, xi, eta) = self
            .locator
            .locate(&self.mesh, x)
            .ok_or_else(|| Error::Domain(format!("point {x:?} not covered by the extension mesh")))?;
        let el = &self.mesh.elements[e];
        if self.in_strip[e] {
            return self.eval_element(spec, e, xi, eta);
        }
        let n = shape_values(xi, eta);
        let v: f64 = (0..6).map(|a| n[a] * self.values[el[a]]).sum();
        let (_, g) = self.eval_element(spec, e, xi, eta)?;
        Ok((v, g))
    }
}

/// Uniform bucket grid over element bounding boxes, with Newton inversion of the quadratic map.
struct Locator {
    origin: [f64; 2],
    cell: f64,
    dims: (usize, usize),
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &mesh.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
        let m = 256usize;
        let cell = span / m as f64;
        let dims = (((hi[0] - lo[0]) / cell) as usize + 1, ((hi[1] - lo[1]) / cell) as usize + 1);
        let mut buckets = vec![Vec::new(); dims.0 * dims.1];
        for (e, el) in mesh.elements.iter().enumerate() {
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &i in el {
                for k in 0..2 {
                    a[k] = a[k].min(mesh.nodes[i][k]);
                    b[k] = b[k].max(mesh.nodes[i][k]);
                }
            }
            let pad = 0.05 * (b[0] - a[0]).max(b[1] - a[1]) + 1e-9 * span;
            let i0 = (((a[0] - pad - lo[0]) / cell).floor().max(0.0)) as usize;
            let i1 = (((b[0] + pad - lo[0]) / cell).floor() as usize).min(dims.0 - 1);
            let j0 = (((a[1] - pad - lo[1]) / cell).floor().max(0.0)) as usize;
            let j1 = (((b[1] + pad - lo[1]) / cell).floor() as usize).min(dims.1 - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * dims.0 + i].push(e);
                }
            }
        }
        Self { origin: lo, cell, dims, buckets }
    }

    fn locate(&self, mesh: &Mesh, x: [f64; 2]) -> Option<(usize, f64, f64)> {
        let i = ((x[0] - self.origin[0]) / self.cell).floor();
        let j = ((x[1] - self.origin[1]) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i as usize >= self.dims.0 || j as usize >= self.dims.1 {
            return None;
        }
        let tol = 1e-9;
        // closest miss, for points on a curved boundary just outside the P2 geometry
        let mut nearest: Option<(f64, usize, f64, f64)> = None;
        for &e in &self.buckets[j as usize * self.dims.0 + i as usize] {
            let v = mesh.vertices(e);
            let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
            let mut xi = ((x[0] - v[0][0]) * (v[2][1] - v[0][1]) - (x[1] - v[0][1]) * (v[2][0] - v[0][0])) / det;
            let mut eta = ((v[1][0] - v[0][0]) * (x[1] - v[0][1]) - (v[1][1] - v[0][1]) * (x[0] - v[0][0])) / det;
            if xi < -0.5 || eta < -0.5 || xi + eta > 1.5 {
                continue;
            }
            for _ in 0..20 {
                let el = &mesh.elements[e];
                let n = shape_values(xi, eta);
                let d = crate::fem::shape_derivs(xi, eta);
                let (mut px, mut py, mut j00, mut j01, mut j10, mut j11) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                for a in 0..6 {
                    let p = mesh.nodes[el[a]];
                    px += n[a] * p[0];
                    py += n[a] * p[1];
                    j00 += d[a][0] * p[0];
                    j01 += d[a][1] * p[0];
                    j10 += d[a][0] * p[1];
                    j11 += d[a][1] * p[1];
                }
                let (rx, ry) = (x[0] - px, x[1] - py);
                let dj = j00 * j11 - j01 * j10;
                let dxi = (j11 * rx - j01 * ry) / dj;
                let deta = (-j10 * rx + j00 * ry) / dj;
                xi += dxi;
                eta += deta;
                if dxi.abs() + deta.abs() < 1e-15 {
                    break;
                }
            }
            if xi >= -tol && eta >= -tol && xi + eta <= 1.0 + tol {
                return Some((e, xi.clamp(0.0, 1.0), eta.clamp(0.0, 1.0)));
            }
            if !(xi.is_finite() && eta.is_finite()) {
                continue;
            }
            let (cx, ce) = (xi.max(0.0), eta.max(0.0));
            let sum = (cx + ce).max(1.0);
            let (cx, ce) = (cx / sum, ce / sum);
            let q = eval_point(mesh, e, cx, ce).x;
            let dist = ((q[0] - x[0]).powi(2) + (q[1] - x[1]).powi(2)).sqrt();
            if nearest.is_none_or(|n| dist < n.0) {
                nearest = Some((dist, e, cx, ce));
            }
        }
        let v = nearest?;
        let size = mesh.vertices(v.1).iter().map(|p| ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)).sqrt()).fold(0.0, f64::max);
        (v.0 <= 1e-3 * size).then_some((v.1, v.2, v.3))
    }
}

/// Auxiliary functions for one geometry; the harmonic continuations are built on first use.
pub struct Auxiliary {
    pub spec: DomainSpec,
    mesh: Option<Arc<Mesh>>,
    ext: [OnceLock<std::result::Result<Extension, String>>; 2],
}

impl Auxiliary {
    /// The continuations are computed on a coarse mesh generated on demand.
    pub fn new(spec: DomainSpec) -> Self {
        Self { spec, mesh: None, ext: Default::default() }
    }

    /// The continuations are computed on `mesh`, so its elements can be evaluated directly.
    pub fn on_mesh(spec: DomainSpec, mesh: Arc<Mesh>) -> Self {
        Self { spec, mesh: Some(mesh), ext: Default::default() }
    }

    /// Continuation equal to 1 on the top inclusion.
    pub fn extension(&self) -> Result<&Extension> {
        self.extension_for(1)
    }

    /// Continuation equal to 1 on inclusion `inclusion` (1 or 2) and 0 on the other boundaries.
    pub fn extension_for(&self, inclusion: usize) -> Result<&Extension> {
        let target = match inclusion {
            1 => BoundaryTag::Inc1,
            2 => BoundaryTag::Inc2,
            _ => return Err(Error::Domain(format!("inclusion index {inclusion} must be 1 or 2"))),
        };
        self.ext[inclusion - 1]
            .get_or_init(|| {
                let mesh = match &self.mesh {
                    Some(m) => m.clone(),
                    None => {
                        let g = GradingParams {
                            theta: 0.5,
                            n_layers: 2,
                            ..GradingParams::defaults(self.spec.outer_radius)
                        };
                        Arc::new(generate(&self.spec, &g).map_err(|e| e.to_string())?)
                    }
                };
                Extension::build(&self.spec, mesh, target).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Solver(e.clone()))
    }

    fn check_domain(&self, x: [f64; 2]) -> Result<()> {
        if !self.spec.in_matrix(x, 1e-12 * self.spec.outer_radius) {
            return Err(Error::Domain(format!("point {x:?} lies outside the matrix region")));
        }
        Ok(())
    }

    fn weight_with_grad(&self, inclusion: usize, x: [f64; 2]) -> Result<(f64, [f64; 2])> {
        self.check_domain(x)?;
        if in_gap_strip(&self.spec, x, self.spec.r1()) {
            let (u, g) = (ubar_formula(&self.spec, x)?, grad_ubar(&self.spec, x)?);
            return match inclusion {
                1 => Ok((u, g)),
                2 => Ok((1.0 - u, [-g[0], -g[1]])),
                _ => Err(Error::Domain(format!("inclusion index {inclusion} must be 1 or 2"))),
            };
        }
        self.extension_for(inclusion)?.eval_point(&self.spec, x)
    }

    /// Value and gradient of the scalar auxiliary function (1 on the top inclusion, 0 elsewhere).
    pub fn ubar_with_grad(&self, x: [f64; 2]) -> Result<(f64, [f64; 2])> {
        self.weight_with_grad(1, x)
    }

    pub fn ubar(&self, x: [f64; 2]) -> Result<f64> {
        Ok(self.ubar_with_grad(x)?.0)
    }

    /// Bottom-inclusion counterpart of `ubar`: `1 - ubar` near the gap, 1 on the bottom
    /// inclusion and 0 on the other boundaries.
    pub fn ubar_bottom_with_grad(&self, x: [f64; 2]) -> Result<(f64, [f64; 2])> {
        self.weight_with_grad(2, x)
    }

    /// Auxiliary field for inclusion `inclusion` (1 or 2) and rigid motion `l` (0-based),
    /// with its gradient `d v_i / d x_j`.
    pub fn aux_vector(&self, inclusion: usize, l: usize, x: [f64; 2]) -> Result<([f64; 2], Matrix2<f64>)> {
        let (u, g) = self.weight_with_grad(inclusion, x)?;
        weighted_rigid(l, x, u, g)
    }
}

fn weighted_rigid(l: usize, x: [f64; 2], s: f64, gs: [f64; 2]) -> Result<([f64; 2], Matrix2<f64>)> {
    if l > 2 {
        return Err(Error::Domain(format!("rigid index {l} out of range")));
    }
    let psi = rigid_basis()[l];
    let p = psi.eval(x);
    let dp = psi.gradient();
    let mut grad = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            grad[(i, j)] = p[i] * gs[j] + s * dp[(i, j)];
        }
    }
    Ok(([s * p[0], s * p[1]], grad))
}

/// Vector auxiliary field near the gap from the value and gradient of the gap formula.
pub fn aux_from_scalar(inclusion: usize, l: usize, x: [f64; 2], u: f64, g: [f64; 2]) -> Result<([f64; 2], Matrix2<f64>)> {
    match inclusion {
        1 => weighted_rigid(l, x, u, g),
        2 => weighted_rigid(l, x, 1.0 - u, [-g[0], -g[1]]),
        _ => Err(Error::Domain(format!("inclusion index {inclusion} must be 1 or 2"))),
    }
}

/// `2 pi / ((1 + gamma) sin(pi / (1 + gamma)))`.
pub fn q_tilde_closed_form(gamma: f64) -> f64 {
    2.0 * PI / ((1.0 + gamma) * (PI / (1.0 + gamma)).sin())
}

/// `2 * int_0^inf dt / (1 + t^(1+gamma))` by adaptive Gauss-Kronrod; the tail is
/// mapped by `t = v^(-1/gamma)` onto `[0, 1]` where the integrand is smooth.
pub fn q_tilde(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let p = 1.0 + gamma;
    let (head, _) = integrate(|t| 1.0 / (1.0 + t.powf(p)), 0.0, 1.0, 1e-14);
    let (tail, _) = integrate(|v| 1.0 / (gamma * (1.0 + v.powf(p / gamma))), 0.0, 1.0, 1e-14);
    Ok(2.0 * (head + tail))
}

/// Region for the Holder estimator.
#[derive(Debug, Clone, Copy)]
pub enum HolderRegion {
    /// Axis-aligned box `[x0, x1] x [y0, y1]` (a segment when `y0 == y1`).
    Box { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// `{|x1 - z1| < s}` between the two graphs of the gap.
    GapCell { spec: DomainSpec, z1: f64, s: f64 },
}

impl HolderRegion {
    fn point(&self, u: f64, v: f64) -> [f64; 2] {
        match *self {
            HolderRegion::Box { x0, x1, y0, y1 } => [x0 + u * (x1 - x0), y0 + v * (y1 - y0)],
            HolderRegion::GapCell { spec, z1, s } => {
                let x = z1 - s + 2.0 * s * u;
                let p = &spec.profile;
                let lo = -0.5 * spec.epsilon + p.h(Side::Bottom, x).unwrap_or(0.0);
                let hi = 0.5 * spec.epsilon + p.h(Side::Top, x).unwrap_or(0.0);
                [x, lo + v * (hi - lo)]
            }
        }
    }
}

/// Lower estimate of `sup |f(x) - f(y)| / |x - y|^gamma` over `region`, from stratified
/// random pairs, neighbouring grid pairs and pairs with the region centre.
pub fn holder_seminorm(
    f: &dyn Fn([f64; 2]) -> Vec<f64>,
    region: &HolderRegion,
    gamma: f64,
    pair_budget: usize,
    seed: u64,
) -> f64 {
    let budget = pair_budget.max(1);
    let mut best: f64 = 0.0;
    let mut consider = |a: [f64; 2], b: [f64; 2], fa: &[f64], fb: &[f64]| {
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        if d > 0.0 {
            let df: f64 = fa.iter().zip(fb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            best = best.max(df / d.powf(gamma));
        }
    };
    let g = ((budget as f64 / 4.0).sqrt().floor() as usize).max(2);
    let grid: Vec<([f64; 2], Vec<f64>)> = (0..=g)
        .flat_map(|j| (0..=g).map(move |i| (i, j)))
        .map(|(i, j)| {
            let p = region.point(i as f64 / g as f64, j as f64 / g as f64);
            (p, f(p))
        })
        .collect();
    let centre = region.point(0.5, 0.5);
    let fc = f(centre);
    let idx = |i: usize, j: usize| j * (g + 1) + i;
    for j in 0..=g {
        for i in 0..=g {
            let (p, fp) = &grid[idx(i, j)];
            consider(*p, centre, fp, &fc);
            if i < g {
                let (q, fq) = &grid[idx(i + 1, j)];
                consider(*p, *q, fp, fq);
            }
            if j < g {
                let (q, fq) = &grid[idx(i, j + 1)];
                consider(*p, *q, fp, fq);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata = ((budget / 2) as f64).sqrt().ceil() as usize;
    for k in 0..budget / 2 {
        let (si, sj) = (k % strata, (k / strata) % strata);
        let u = (si as f64 + rng.random::<f64>()) / strata as f64;
        let v = (sj as f64 + rng.random::<f64>()) / strata as f64;
        let a = region.point(u, v);
        let b = region.point(rng.random::<f64>(), rng.random::<f64>());
        consider(a, b, &f(a), &f(b));
    }
    best
}
