//! The 6x6 system for the rigid-motion constants of the two inclusions.

use crate::elastic::{rigid_basis, ElasticTensor};
use crate::error::{Error, Result};
use crate::fem::{BoundaryFn, DirichletSolver, FemField, StiffnessSystem};
use crate::geometry::BoundaryTag;
use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use std::sync::Arc;

const INC: [BoundaryTag; 2] = [BoundaryTag::Inc1, BoundaryTag::Inc2];

/// The six rigid-motion fields `v_i^l` (index `[i-1][l-1]`) and the field `v_0` carrying the outer data.
pub struct FieldSet {
    pub system: Arc<StiffnessSystem>,
    pub v: [[FemField; 3]; 2],
    pub v0: FemField,
}

/// Solve the seven Dirichlet problems with one factorization.
pub fn solve_fields(system: Arc<StiffnessSystem>, phi: BoundaryFn) -> Result<FieldSet> {
    let solver = DirichletSolver::new(system.clone(), &[BoundaryTag::Outer, BoundaryTag::Inc1, BoundaryTag::Inc2])?;
    let basis = rigid_basis();
    let psi: Vec<Box<dyn Fn([f64; 2]) -> [f64; 2] + Sync>> =
        basis.into_iter().map(|m| Box::new(move |x| m.eval(x)) as Box<dyn Fn([f64; 2]) -> [f64; 2] + Sync>).collect();
    let mut data: Vec<Vec<(BoundaryTag, BoundaryFn)>> = Vec::new();
    for tag in INC {
        for p in &psi {
            data.push(vec![(tag, p.as_ref())]);
        }
    }
    data.push(vec![(BoundaryTag::Outer, phi)]);
    let mut f = solver.solve_many(&data)?.into_iter();
    let mut next = || f.next().expect("seven solutions");
    let v = [[next(), next(), next()], [next(), next(), next()]];
    let v0 = next();
    Ok(FieldSet { system, v, v0 })
}

/// `A` with `a_ij^kl` at `(3(i-1)+k, 3(j-1)+l)`, loads `b_j^l`, and the solved constants
/// `(C_1^1, C_1^2, C_1^3, C_2^1, C_2^2, C_2^3)` once available.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSystem {
    pub a: Matrix6<f64>,
    pub b: Vector6<f64>,
    pub c: Option<Vector6<f64>>,
    /// `max |A - A^T| / max |A|` before symmetrization.
    pub defect: f64,
    pub mesh_hash: String,
}

/// Result of the solve together with its cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub residual: f64,
    /// `C_1^k - C_2^k` for `k = 1, 2, 3`.
    pub differences: [f64; 3],
    /// The same differences from the reduced 3x3 system by Cramer's rule.
    pub reduced: [f64; 3],
}

impl ConstantSystem {
    pub fn idx(i: usize, k: usize) -> usize {
        3 * (i - 1) + (k - 1)
    }

    /// `a_ij^kl` with 1-based indices.
    pub fn a_entry(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.a[(Self::idx(i, k), Self::idx(j, l))]
    }

    pub fn b_entry(&self, j: usize, l: usize) -> f64 {
        self.b[Self::idx(j, l)]
    }

    pub fn constants(&self) -> Result<&Vector6<f64>> {
        self.c.as_ref().ok_or_else(|| Error::Precondition("constant system has not been solved".into()))
    }

    /// The 3x3 block `a_11^kl`.
    pub fn block11(&self) -> Matrix3<f64> {
        self.a.fixed_view::<3, 3>(0, 0).into_owned()
    }
}

/// `a_ij^kl = -traction(v_i^k, D_j, psi^l)` and `b_j^l = traction(v_0, D_j, psi^l)`.
/// In strict mode a symmetry defect above `1e-6` is an error.
pub fn assemble_system(fields: &FieldSet, strict: bool) -> Result<ConstantSystem> {
    let sys = &fields.system;
    let mut a = Matrix6::zeros();
    let mut b = Vector6::zeros();
    for j in 1..=2 {
        for l in 1..=3 {
            let col = ConstantSystem::idx(j, l);
            for i in 1..=2 {
                for k in 1..=3 {
                    let v = &fields.v[i - 1][k - 1];
                    a[(ConstantSystem::idx(i, k), col)] = -sys.traction_functional(v, INC[j - 1], l - 1)?;
                }
            }
            b[col] = sys.traction_functional(&fields.v0, INC[j - 1], l - 1)?;
        }
    }
    let scale = a.amax();
    let defect = if scale > 0.0 { (a - a.transpose()).amax() / scale } else { 0.0 };
    if strict && defect > 1e-6 {
        return Err(Error::Solver(format!("symmetry defect {defect:e} of the constant matrix exceeds 1e-6")));
    }
    let a = 0.5 * (a + a.transpose());
    Ok(ConstantSystem { a, b, c: None, defect, mesh_hash: sys.mesh_hash.clone() })
}

/// Solve `A C = B` by Cholesky and cross-check the differences `C_1 - C_2` against the reduced system.
pub fn solve_constants(system: &ConstantSystem) -> Result<(ConstantSystem, SolveReport)> {
    let chol = system.a.cholesky().ok_or_else(|| {
        let min = system.a.symmetric_eigenvalues().min();
        Error::Solver(format!("constant matrix is not positive definite (smallest eigenvalue {min:e})"))
    })?;
    let c = chol.solve(&system.b);
    let r = system.a * c - system.b;
    let denom = system.a.amax() * c.amax() + system.b.amax();
    let residual = if denom > 0.0 { r.amax() / denom } else { 0.0 };
    let mut solved = system.clone();
    solved.c = Some(c);
    let bt = b_tilde_from(&solved)?;
    let differences = [c[0] - c[3], c[1] - c[4], c[2] - c[5]];
    let reduced = cramer3(&system.block11(), &Vector3::new(bt[0], bt[1], bt[2]))?;
    Ok((solved, SolveReport { residual, differences, reduced }))
}

/// Cramer's rule for a 3x3 system.
pub fn cramer3(m: &Matrix3<f64>, rhs: &Vector3<f64>) -> Result<[f64; 3]> {
    let det = m.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::Solver("singular 3x3 block".into()));
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = *m;
        mk.set_column(k, rhs);
        *o = mk.determinant() / det;
    }
    Ok(out)
}

/// `u = sum C_1^l v_1^l + sum C_2^l v_2^l + v_0`.
pub fn reconstruct_u(system: &ConstantSystem, fields: &FieldSet) -> Result<FemField> {
    let c = system.constants()?;
    let mut terms: Vec<(f64, &FemField)> = Vec::with_capacity(7);
    for i in 0..2 {
        for l in 0..3 {
            terms.push((c[3 * i + l], &fields.v[i][l]));
        }
    }
    terms.push((1.0, &fields.v0));
    FemField::combine(&terms)
}

/// Tractions of the bounded part `u_b = sum C_2^l (v_1^l + v_2^l) + v_0`,
/// computed from the matrix entries: `b~_j^l = b_j^l - sum_k C_2^k (a_1j^kl + a_2j^kl)`.
fn b_tilde_from(system: &ConstantSystem) -> Result<[f64; 6]> {
    let c = system.constants()?;
    let mut out = [0.0; 6];
    for j in 1..=2 {
        for l in 1..=3 {
            let s: f64 = (1..=3)
                .map(|k| c[ConstantSystem::idx(2, k)] * (system.a_entry(1, j, k, l) + system.a_entry(2, j, k, l)))
                .sum();
            out[ConstantSystem::idx(j, l)] = system.b_entry(j, l) - s;
        }
    }
    Ok(out)
}

/// `b~_j^l` as variational tractions of `u_b`, ordered `(b~_1^1, .., b~_2^3)`.
pub fn b_tilde(system: &ConstantSystem, fields: &FieldSet) -> Result<[f64; 6]> {
    let c = system.constants()?;
    let mut terms: Vec<(f64, &FemField)> = Vec::with_capacity(7);
    for l in 0..3 {
        terms.push((c[3 + l], &fields.v[0][l]));
        terms.push((c[3 + l], &fields.v[1][l]));
    }
    terms.push((1.0, &fields.v0));
    let ub = FemField::combine(&terms)?;
    let mut out = [0.0; 6];
    for j in 1..=2 {
        for l in 1..=3 {
            out[ConstantSystem::idx(j, l)] = fields.system.traction_functional(&ub, INC[j - 1], l - 1)?;
        }
    }
    Ok(out)
}

/// Limit functionals and the leading 2x2 matrix `b*^1/mu E_12 + b*^2/(lambda+2mu) E_22`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupFactor {
    pub b_tilde_star: [f64; 3],
    /// Slopes `c` of the fits `b(eps) = b* + c eps^r`.
    pub slopes: [f64; 3],
    /// `|r| / |b|` of each fit.
    pub fit_residual: [f64; 3],
    pub matrix: nalgebra::Matrix2<f64>,
    pub warnings: Vec<String>,
}

/// Least-squares fit of `b(eps) = b* + c eps^rate` with `rate = gamma/(1+2 gamma)` for each
/// of the three series `samples[..].1[l]`.
pub fn extrapolate_limit(samples: &[(f64, [f64; 3])], gamma: f64, tensor: &ElasticTensor) -> Result<BlowupFactor> {
    if samples.len() < 3 {
        return Err(Error::Precondition(format!("need at least 3 samples, got {}", samples.len())));
    }
    if samples.windows(2).any(|w| !(w[1].0 < w[0].0)) || samples.iter().any(|s| !(s.0 > 0.0)) {
        return Err(Error::Precondition("epsilons must be positive and strictly decreasing".into()));
    }
    let rate = gamma / (1.0 + 2.0 * gamma);
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.powf(rate)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let mut star = [0.0; 3];
    let mut slopes = [0.0; 3];
    let mut resid = [0.0; 3];
    let mut warnings = Vec::new();
    for l in 0..3 {
        let ys: Vec<f64> = samples.iter().map(|s| s.1[l]).collect();
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let b = my - c * mx;
        let r: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - b - c * x).collect();
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let yn = ys.iter().map(|v| v * v).sum::<f64>().sqrt();
        resid[l] = if yn > 0.0 { rn / yn } else { 0.0 };
        let incr: Vec<f64> = ys.windows(2).map(|w| w[1] - w[0]).collect();
        if incr.windows(2).any(|w| w[0] * w[1] < 0.0) {
            warnings.push(format!("series {} is not monotone in eps", l + 1));
        }
        star[l] = b;
        slopes[l] = c;
    }
    let mut m = nalgebra::Matrix2::zeros();
    m[(0, 1)] = star[0] / tensor.mu;
    m[(1, 1)] = star[1] / tensor.p_modulus();
    Ok(BlowupFactor { b_tilde_star: star, slopes, fit_residual: resid, matrix: m, warnings })
}
