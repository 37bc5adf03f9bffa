//! Epsilon sweeps and the measurements compared against the predicted rates.

use crate::auxiliary::{aux_from_scalar, grad_ubar, in_gap_strip, q_tilde, ubar_formula};
use crate::config::RunConfig;
use crate::constants::{
    assemble_system, b_tilde, reconstruct_u, solve_constants, solve_fields, BlowupFactor, ConstantSystem, FieldSet,
    SolveReport,
};
use crate::elastic::{rigid_basis, ElasticTensor};
use crate::error::{Error, Result};
use crate::fem::{
    assemble, assemble_general, error_norms, h1_distance, solve_dirichlet, solve_finite_contrast, BoundaryFn, FemField,
    StiffnessSystem,
};
use crate::geometry::{BoundaryTag, DomainSpec, Side};
use crate::mesh::{generate, generate_filled, GradingParams, Mesh, Region};
use crate::quadrature::triangle_degree4;
use nalgebra::Matrix2;
use rayon::prelude::*;
use std::sync::Arc;

/// Everything produced by one decomposition solve.
pub struct Solution {
    pub spec: DomainSpec,
    pub mesh: Arc<Mesh>,
    pub fields: FieldSet,
    pub system: ConstantSystem,
    pub report: SolveReport,
    pub u: FemField,
    pub b_tilde: [f64; 6],
}

/// Solve the seven auxiliary problems on `mesh`, then the constants, then rebuild `u`.
pub fn solve_on_mesh(
    spec: &DomainSpec,
    mesh: Arc<Mesh>,
    tensor: &ElasticTensor,
    phi: BoundaryFn,
    strict: bool,
) -> Result<Solution> {
    let sys = Arc::new(assemble(mesh.clone(), tensor));
    let fields = solve_fields(sys, phi)?;
    let raw = assemble_system(&fields, strict)?;
    let (system, report) = solve_constants(&raw)?;
    let u = reconstruct_u(&system, &fields)?;
    let b_tilde = b_tilde(&system, &fields)?;
    Ok(Solution { spec: *spec, mesh, fields, system, report, u, b_tilde })
}

/// Build geometry and mesh from the configuration for one epsilon and solve.
pub fn solve_epsilon(cfg: &RunConfig, epsilon: f64) -> Result<Solution> {
    let spec = cfg.spec_for(epsilon)?;
    let mesh = Arc::new(generate(&spec, &cfg.grading())?);
    let phi = cfg.experiment.phi;
    solve_on_mesh(&spec, mesh, &cfg.tensor(), &move |x| phi.eval(x), cfg.experiment.strict)
}

/// Degree-4 quadrature samples `(element, point, gradient)` of `field`, split by whether the
/// element lies in the gap strip `|x1| < R1`.
fn strip_samples(field: &FemField, spec: &DomainSpec) -> (Vec<(usize, [f64; 2], Matrix2<f64>)>, Vec<Matrix2<f64>>) {
    let mesh = &field.mesh;
    let rule = triangle_degree4();
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for e in 0..mesh.elements.len() {
        if mesh.regions[e] != Region::Matrix {
            continue;
        }
        let v = mesh.vertices(e);
        let c = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
        let strip = in_gap_strip(spec, c, spec.r1());
        for q in &rule {
            let (ev, g) = field.gradient_at(e, q.xi, q.eta);
            if strip {
                inside.push((e, ev.x, g));
            } else {
                outside.push(g);
            }
        }
    }
    (inside, outside)
}

/// Largest `|grad u|` over quadrature points of strip elements touching the segment `x1 = 0`
/// between the two inclusions, and the `x1` where the strip maximum of `|grad u|` sits.
pub fn max_grad_segment(u: &FemField, spec: &DomainSpec) -> (f64, f64) {
    let mesh = &u.mesh;
    let rule = triangle_degree4();
    let tol = 1e-12 * spec.outer_radius;
    let mut best: f64 = 0.0;
    for e in 0..mesh.elements.len() {
        let v = mesh.vertices(e);
        let touches = v.iter().any(|p| p[0].abs() <= tol && p[1].abs() <= 0.5 * spec.epsilon + tol);
        if !touches || mesh.regions[e] != Region::Matrix {
            continue;
        }
        for q in &rule {
            best = best.max(u.gradient_at(e, q.xi, q.eta).1.norm());
        }
    }
    let (inside, _) = strip_samples(u, spec);
    let arg = inside
        .iter()
        .max_by(|a, b| a.2.norm().total_cmp(&b.2.norm()))
        .map(|s| s.1[0])
        .unwrap_or(0.0);
    (best, arg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBound {
    /// `sup |grad u| (eps + |x1|^(1+gamma)) / eps^(gamma/(1+gamma))` over the gap strip.
    pub ratio: f64,
    pub argmax: [f64; 2],
    /// `sup |grad u|` outside the gap strip.
    pub outside_sup: f64,
}

pub fn check_upper_bound(u: &FemField, spec: &DomainSpec) -> UpperBound {
    let g = spec.gamma();
    let eps = spec.epsilon;
    let norm = eps.powf(g / (1.0 + g));
    let (inside, outside) = strip_samples(u, spec);
    let mut ratio = 0.0;
    let mut argmax = [0.0, 0.0];
    for (_, x, grad) in &inside {
        let r = grad.norm() * (eps + x[0].abs().powf(1.0 + g)) / norm;
        if r > ratio {
            ratio = r;
            argmax = *x;
        }
    }
    let outside_sup = outside.iter().map(|g| g.norm()).fold(0.0, f64::max);
    UpperBound { ratio, argmax, outside_sup }
}

/// For each `(i, l)`: with `w = v_i^l - u_bar_i^l` on the gap strip, the normalised sup
/// `|grad w| (eps + |x1|^(1+gamma))^(1/(1+gamma))` for translations and the raw sup for the rotation.
pub fn check_w_estimate(fields: &FieldSet, spec: &DomainSpec) -> [[f64; 3]; 2] {
    let g = spec.gamma();
    let mut out = [[0.0; 3]; 2];
    for i in 0..2 {
        for l in 0..3 {
            let (inside, _) = strip_samples(&fields.v[i][l], spec);
            let mut best: f64 = 0.0;
            for (_, x, grad) in &inside {
                let (Ok(u), Ok(du)) = (ubar_formula(spec, *x), grad_ubar(spec, *x)) else { continue };
                let Ok((_, ga)) = aux_from_scalar(i + 1, l, *x, u, du) else { continue };
                let w = (grad - ga).norm();
                let s = if l < 2 { w * (spec.epsilon + x[0].abs().powf(1.0 + g)).powf(1.0 / (1.0 + g)) } else { w };
                best = best.max(s);
            }
            out[i][l] = best;
        }
    }
    out
}

/// Scalar measurements for one epsilon on one mesh.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measures {
    pub max_grad_segment: f64,
    pub argmax_x1: f64,
    /// `C_1^k - C_2^k` for `k = 1, 2, 3`.
    pub c_diff: [f64; 3],
    /// `a_11^11, a_11^22, a_11^33`.
    pub a_diag: [f64; 3],
    /// `a_11^13`, `a_12^33`.
    pub a_cross: [f64; 2],
    pub b_tilde1: [f64; 3],
    pub bound_ratio: f64,
    pub outside_sup: f64,
    /// Normalised `w_1^1`, `w_1^2` ratios and the raw `w_1^3` sup.
    pub w_ratio: [f64; 3],
    /// Largest inclusion traction of `u` relative to `|B|`.
    pub traction_balance: f64,
    /// Largest relative entry in the symmetric zero pattern.
    pub zero_pattern: f64,
    pub defect: f64,
    pub solve_residual: f64,
}

/// Largest `|a_ij^kl| / a_11^11` over the entries forced to zero by mirror symmetry.
pub fn zero_pattern(system: &ConstantSystem) -> f64 {
    let scale = system.a_entry(1, 1, 1, 1).abs().max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for i in 1..=2 {
        for j in 1..=2 {
            for (k, l) in [(1, 2), (2, 1), (2, 3), (3, 2)] {
                worst = worst.max(system.a_entry(i, j, k, l).abs() / scale);
            }
        }
    }
    worst
}

/// Inclusion tractions of `u` against all six rigid motions.
pub fn traction_residuals(sol: &Solution) -> Result<[f64; 6]> {
    let mut out = [0.0; 6];
    for (j, tag) in [BoundaryTag::Inc1, BoundaryTag::Inc2].into_iter().enumerate() {
        for l in 0..3 {
            out[3 * j + l] = sol.fields.system.traction_functional(&sol.u, tag, l)?;
        }
    }
    Ok(out)
}

pub fn measure(sol: &Solution) -> Result<Measures> {
    let spec = &sol.spec;
    let c = sol.system.constants()?;
    let (mg, arg) = max_grad_segment(&sol.u, spec);
    let ub = check_upper_bound(&sol.u, spec);
    let w = check_w_estimate(&sol.fields, spec);
    let tr = traction_residuals(sol)?;
    let bn = sol.system.b.norm();
    let tb = tr.iter().fold(0.0f64, |m, t| m.max(t.abs())) / if bn > 0.0 { bn } else { 1.0 };
    let s = &sol.system;
    Ok(Measures {
        max_grad_segment: mg,
        argmax_x1: arg,
        c_diff: [c[0] - c[3], c[1] - c[4], c[2] - c[5]],
        a_diag: [s.a_entry(1, 1, 1, 1), s.a_entry(1, 1, 2, 2), s.a_entry(1, 1, 3, 3)],
        a_cross: [s.a_entry(1, 1, 1, 3), s.a_entry(1, 2, 3, 3)],
        b_tilde1: [sol.b_tilde[0], sol.b_tilde[1], sol.b_tilde[2]],
        bound_ratio: ub.ratio,
        outside_sup: ub.outside_sup,
        w_ratio: w[0],
        traction_balance: tb,
        zero_pattern: zero_pattern(s),
        defect: s.defect,
        solve_residual: sol.report.residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeshStats {
    pub nodes: usize,
    pub elements: usize,
    pub gap_layers: usize,
    pub min_angle: f64,
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub base: Measures,
    /// Same measurements after one uniform refinement of the mesh.
    pub refined: Option<Measures>,
    pub mesh_stats: MeshStats,
    pub a: [f64; 36],
    pub b: [f64; 6],
    pub c: [f64; 6],
    pub failure: Option<String>,
}

impl SweepRecord {
    fn failed(cfg: &RunConfig, epsilon: f64, msg: String) -> Self {
        Self {
            epsilon,
            gamma: cfg.geometry.gamma,
            kappa: cfg.geometry.kappa,
            base: Measures::default(),
            refined: None,
            mesh_stats: MeshStats::default(),
            a: [0.0; 36],
            b: [0.0; 6],
            c: [0.0; 6],
            failure: Some(msg),
        }
    }

    /// Absolute base/refined difference of a measured quantity, if a refined solve exists.
    pub fn error_bar(&self, f: impl Fn(&Measures) -> f64) -> Option<f64> {
        self.refined.as_ref().map(|r| (f(r) - f(&self.base)).abs())
    }
}

/// A sweep with the solved fields kept for later comparisons.
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
    /// Base-mesh solution per record (`None` when that epsilon failed).
    pub solutions: Vec<Option<Solution>>,
    pub refined_solutions: Vec<Option<Solution>>,
}

fn sweep_one(cfg: &RunConfig, eps: f64) -> (SweepRecord, Option<Solution>, Option<Solution>) {
    let run = || -> Result<(SweepRecord, Solution, Option<Solution>)> {
        let sol = solve_epsilon(cfg, eps)?;
        let base = measure(&sol)?;
        let q = sol.mesh.quality_report();
        let phi = cfg.experiment.phi;
        let refined_sol = if cfg.experiment.refine_check {
            let fine = Arc::new(sol.mesh.refine_uniform());
            Some(solve_on_mesh(&sol.spec, fine, &cfg.tensor(), &move |x| phi.eval(x), cfg.experiment.strict)?)
        } else {
            None
        };
        let refined = refined_sol.as_ref().map(measure).transpose()?;
        let c = sol.system.constants()?;
        let rec = SweepRecord {
            epsilon: eps,
            gamma: cfg.geometry.gamma,
            kappa: cfg.geometry.kappa,
            base,
            refined,
            mesh_stats: MeshStats {
                nodes: sol.mesh.nodes.len(),
                elements: q.element_count,
                gap_layers: q.gap_layer_count,
                min_angle: q.min_angle,
            },
            a: std::array::from_fn(|k| sol.system.a[(k / 6, k % 6)]),
            b: std::array::from_fn(|k| sol.system.b[k]),
            c: std::array::from_fn(|k| c[k]),
            failure: None,
        };
        Ok((rec, sol, refined_sol))
    };
    match run() {
        Ok((r, s, f)) => (r, Some(s), f),
        Err(e) => (SweepRecord::failed(cfg, eps, e.to_string()), None, None),
    }
}

/// Solve every epsilon of `epsilons` (strictly decreasing, at least 3) on up to
/// `experiment.workers` threads; records come back in input order.
pub fn run_sweep(cfg: &RunConfig, epsilons: &[f64]) -> Result<SweepResult> {
    if epsilons.len() < 3 {
        return Err(Error::Precondition(format!("a sweep needs at least 3 epsilons, got {}", epsilons.len())));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("sweep epsilons must be strictly decreasing".into()));
    }
    let floor = cfg.grading().eps_floor;
    if let Some(e) = epsilons.iter().find(|&&e| e < floor) {
        return Err(Error::Precondition(format!("epsilon {e:e} is below eps_floor {floor:e}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.experiment.workers.max(1))
        .build()
        .map_err(|e| Error::Solver(format!("thread pool: {e}")))?;
    let out: Vec<_> = pool.install(|| epsilons.par_iter().map(|&e| sweep_one(cfg, e)).collect());
    let mut result = SweepResult { records: Vec::new(), solutions: Vec::new(), refined_solutions: Vec::new() };
    for (r, s, f) in out {
        result.records.push(r);
        result.solutions.push(s);
        result.refined_solutions.push(f);
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares line through `(ln eps, ln value)`.
pub fn fit_exponent(pairs: &[(f64, f64)]) -> Result<Fit> {
    if pairs.len() < 2 {
        return Err(Error::Precondition(format!("need at least 2 points, got {}", pairs.len())));
    }
    if let Some(p) = pairs.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::Domain(format!("log fit needs positive data, got {p:?}")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(Fit { slope, intercept, r2 })
}

/// Slope over the last `window` successful records, plus the same slope on the refined
/// meshes when available.
pub fn fit_records(records: &[SweepRecord], window: usize, f: impl Fn(&Measures) -> f64) -> Result<(Fit, Option<Fit>)> {
    let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    let tail = &ok[ok.len().saturating_sub(window)..];
    let base = fit_exponent(&tail.iter().map(|r| (r.epsilon, f(&r.base))).collect::<Vec<_>>())?;
    let refined = if tail.iter().all(|r| r.refined.is_some()) {
        Some(fit_exponent(&tail.iter().map(|r| (r.epsilon, f(r.refined.as_ref().unwrap()))).collect::<Vec<_>>())?)
    } else {
        None
    };
    Ok((base, refined))
}

/// Extrapolated limit functionals from the `b~_1^l` of the successful records.
pub fn blowup_factor(records: &[SweepRecord], tensor: &ElasticTensor) -> Result<BlowupFactor> {
    let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    let gamma = ok.first().map(|r| r.gamma).ok_or_else(|| Error::Precondition("no successful records".into()))?;
    let samples: Vec<(f64, [f64; 3])> = ok.iter().map(|r| (r.epsilon, r.base.b_tilde1)).collect();
    crate::constants::extrapolate_limit(&samples, gamma, tensor)
}

/// The leading-order gradient near the origin: `eps^(g/(1+g)) / (eps + 2 h1(x1)) * kappa^(1/(1+g)) / Q~ * B1`.
pub fn asymptotic_gradient(spec: &DomainSpec, factor: &BlowupFactor, x1: f64) -> Result<Matrix2<f64>> {
    let g = spec.gamma();
    let h1 = spec.profile.h(Side::Top, x1)?;
    let scale = spec.epsilon.powf(g / (1.0 + g)) / (spec.epsilon + 2.0 * h1) * spec.kappa().powf(1.0 / (1.0 + g)) / q_tilde(g)?;
    Ok(factor.matrix * scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticComparison {
    pub epsilon: f64,
    pub points: usize,
    /// Entries `(row, col)` (0-based) compared, those with a nonzero predicted coefficient.
    pub entries: Vec<(usize, usize)>,
    pub median: f64,
    pub p90: f64,
    /// Largest off-column gradient entry relative to the largest column-2 entry near the origin.
    pub off_column_ratio: f64,
}

/// Pointwise comparison over quadrature points with `|x1| <= eps^(1/(1+gamma))` in the gap.
pub fn compare_asymptotic(u: &FemField, spec: &DomainSpec, factor: &BlowupFactor) -> Result<AsymptoticComparison> {
    if !spec.profile.symmetric {
        return Err(Error::Precondition("the asymptotic formula needs a symmetric configuration".into()));
    }
    let g = spec.gamma();
    let reach = spec.epsilon.powf(1.0 / (1.0 + g));
    // a limit functional at roundoff level relative to the other is a zero coefficient
    let big = factor.matrix[(0, 1)].abs().max(factor.matrix[(1, 1)].abs());
    let entries: Vec<(usize, usize)> = [(0, 1), (1, 1)]
        .into_iter()
        .filter(|&(r, c)| big > 0.0 && factor.matrix[(r, c)].abs() > 1e-8 * big)
        .collect();
    let (inside, _) = strip_samples(u, spec);
    let mut errs = Vec::new();
    let (mut off, mut col): (f64, f64) = (0.0, 0.0);
    let mut points = 0;
    for (_, x, grad) in &inside {
        if x[0].abs() > reach {
            continue;
        }
        points += 1;
        let pred = asymptotic_gradient(spec, factor, x[0])?;
        for &(r, c) in &entries {
            errs.push((grad[(r, c)] - pred[(r, c)]).abs() / pred[(r, c)].abs());
        }
        off = off.max(grad[(0, 0)].abs()).max(grad[(1, 0)].abs());
        col = col.max(grad[(0, 1)].abs()).max(grad[(1, 1)].abs());
    }
    errs.sort_by(f64::total_cmp);
    let pct = |p: f64| if errs.is_empty() { 0.0 } else { errs[((errs.len() - 1) as f64 * p).round() as usize] };
    Ok(AsymptoticComparison {
        epsilon: spec.epsilon,
        points,
        entries,
        median: pct(0.5),
        p90: pct(0.9),
        off_column_ratio: if col > 0.0 { off / col } else { 0.0 },
    })
}

/// Gradient profile along the segment `x1 = t, x2 = 0` for `t in [0, t_max]`, measured vs predicted `(1,2)` entry.
pub fn midline_profile(u: &FemField, spec: &DomainSpec, factor: &BlowupFactor) -> Result<Vec<(f64, f64, f64)>> {
    let (inside, _) = strip_samples(u, spec);
    let mut out = Vec::new();
    for (e, x, grad) in &inside {
        let v = u.mesh.vertices(*e);
        let ys = [v[0][1], v[1][1], v[2][1]];
        let (lo, hi) = (ys.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        if x[0] >= 0.0 && lo <= 0.0 && hi >= 0.0 {
            out.push((x[0], grad[(0, 1)], asymptotic_gradient(spec, factor, x[0])?[(0, 1)]));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Largest `|K psi|` over the rigid motions relative to `|K| |psi|`, unconstrained system.
pub fn kernel_residual(sys: &StiffnessSystem) -> f64 {
    let n = sys.mesh.nodes.len();
    let mut worst: f64 = 0.0;
    for m in rigid_basis() {
        let mut v = vec![0.0; 2 * n];
        for (i, p) in sys.mesh.nodes.iter().enumerate() {
            let w = m.eval(*p);
            v[2 * i] = w[0];
            v[2 * i + 1] = w[1];
        }
        let kv = sys.matvec(&v);
        let num = kv.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let den = sys.norm_inf() * v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        worst = worst.max(num / den);
    }
    worst
}

/// Impose an affine field on every boundary and return the largest nodal error relative to its size.
pub fn patch_test(sys: Arc<StiffnessSystem>) -> Result<f64> {
    let exact = |x: [f64; 2]| [0.3 + 1.1 * x[0] - 0.7 * x[1], -0.2 + 0.4 * x[0] + 0.9 * x[1]];
    let tags = [BoundaryTag::Outer, BoundaryTag::Inc1, BoundaryTag::Inc2];
    let data: Vec<(BoundaryTag, BoundaryFn)> = tags
        .iter()
        .filter(|t| !sys.mesh.tagged_nodes(**t).is_empty())
        .map(|t| (*t, &exact as BoundaryFn))
        .collect();
    let f = solve_dirichlet(sys.clone(), &data)?;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, p) in sys.mesh.nodes.iter().enumerate() {
        let e = exact(*p);
        err = err.max((f.values[2 * i] - e[0]).abs()).max((f.values[2 * i + 1] - e[1]).abs());
        scale = scale.max(e[0].abs()).max(e[1].abs());
    }
    Ok(err / scale)
}

/// Convergence study for a smooth manufactured solution with all boundaries clamped to it.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsReport {
    pub dofs: Vec<usize>,
    pub l2: Vec<f64>,
    pub h1: Vec<f64>,
    pub order_l2: Vec<f64>,
    pub order_h1: Vec<f64>,
}

/// `u = (sin(a x) cos(b y), cos(a x) sin(b y))` with the body force of the Lame operator.
pub fn manufactured_study(spec: &DomainSpec, tensor: &ElasticTensor, coarse: &GradingParams, refinements: usize) -> Result<MmsReport> {
    let (a, b) = (0.9, 0.6);
    let (lam, mu) = (tensor.lambda, tensor.mu);
    let exact = move |x: [f64; 2]| [(a * x[0]).sin() * (b * x[1]).cos(), (a * x[0]).cos() * (b * x[1]).sin()];
    let grad = move |x: [f64; 2]| {
        let (sa, ca, sb, cb) = ((a * x[0]).sin(), (a * x[0]).cos(), (b * x[1]).sin(), (b * x[1]).cos());
        Matrix2::new(a * ca * cb, -b * sa * sb, -a * sa * sb, b * ca * cb)
    };
    // f = -(mu lap u + (lambda + mu) grad div u), div u = (a + b) cos(ax) cos(by)
    let force = move |x: [f64; 2]| {
        let (sa, ca, sb, cb) = ((a * x[0]).sin(), (a * x[0]).cos(), (b * x[1]).sin(), (b * x[1]).cos());
        let k2 = a * a + b * b;
        let lap = [-k2 * sa * cb, -k2 * ca * sb];
        let gd = [-(a + b) * a * sa * cb, -(a + b) * b * ca * sb];
        [-(mu * lap[0] + (lam + mu) * gd[0]), -(mu * lap[1] + (lam + mu) * gd[1])]
    };
    let mut mesh = generate(spec, coarse)?;
    let mut rep = MmsReport { dofs: vec![], l2: vec![], h1: vec![], order_l2: vec![], order_h1: vec![] };
    for level in 0..=refinements {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let m = Arc::new(mesh.clone());
        let t = *tensor;
        let sys = Arc::new(assemble_general(m.clone(), &move |_| t, Some(&force)));
        let data: Vec<(BoundaryTag, BoundaryFn)> =
            [BoundaryTag::Outer, BoundaryTag::Inc1, BoundaryTag::Inc2].iter().map(|t| (*t, &exact as BoundaryFn)).collect();
        let u = solve_dirichlet(sys, &data)?;
        let (l2, h1) = error_norms(&u, &exact, &grad, None);
        rep.dofs.push(2 * m.nodes.len());
        rep.l2.push(l2);
        rep.h1.push(h1);
    }
    for k in 1..rep.l2.len() {
        rep.order_l2.push((rep.l2[k - 1] / rep.l2[k]).log2());
        rep.order_h1.push((rep.h1[k - 1] / rep.h1[k]).log2());
    }
    Ok(rep)
}

/// Relative `H1` distance over the matrix between the finite-contrast solution and the
/// rigid-inclusion solution, for each contrast.
pub fn finite_contrast_study(cfg: &RunConfig, epsilon: f64, contrasts: &[f64]) -> Result<Vec<(f64, f64)>> {
    let spec = cfg.spec_for(epsilon)?;
    let grading = cfg.grading();
    let filled = Arc::new(generate_filled(&spec, &grading)?);
    let matrix = Arc::new(generate(&spec, &grading)?);
    let phi = cfg.experiment.phi;
    let phi_fn = move |x: [f64; 2]| phi.eval(x);
    let tensor = cfg.tensor();
    let rigid = solve_on_mesh(&spec, matrix, &tensor, &phi_fn, cfg.experiment.strict)?;
    contrasts
        .iter()
        .map(|&m| {
            let (_, soft) = solve_finite_contrast(filled.clone(), &tensor, m, &phi_fn)?;
            let (d, n) = h1_distance(&rigid.u, &soft, &[Region::Matrix])?;
            Ok((m, d / n))
        })
        .collect()
}
