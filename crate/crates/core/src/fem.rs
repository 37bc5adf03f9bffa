//! Quadratic-triangle assembly, Dirichlet solves, energy products, variational
//! tractions and gradient post-processing for the Lame operator.

use crate::elastic::{rigid_basis, ElasticTensor};
use crate::error::{Error, Result};
use crate::geometry::BoundaryTag;
use crate::mesh::{Mesh, Region};
use crate::quadrature::{triangle_degree4, triangle_degree6, QuadPoint};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;
use std::sync::Arc;

/// Quadratic shape functions at `(xi, eta)`.
pub fn shape_values(xi: f64, eta: f64) -> [f64; 6] {
    let (l0, l1, l2) = (1.0 - xi - eta, xi, eta);
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ]
}

/// Reference derivatives `[d/dxi, d/deta]` of the shape functions.
pub fn shape_derivs(xi: f64, eta: f64) -> [[f64; 2]; 6] {
    let (l0, l1, l2) = (1.0 - xi - eta, xi, eta);
    [
        [-(4.0 * l0 - 1.0), -(4.0 * l0 - 1.0)],
        [4.0 * l1 - 1.0, 0.0],
        [0.0, 4.0 * l2 - 1.0],
        [4.0 * (l0 - l1), -4.0 * l1],
        [4.0 * l2, 4.0 * l1],
        [-4.0 * l2, 4.0 * (l0 - l2)],
    ]
}

/// Physical point, shape values, physical shape gradients and `|J|` at a reference point.
pub struct PointEval {
    pub x: [f64; 2],
    pub n: [f64; 6],
    pub dn: [[f64; 2]; 6],
    pub det: f64,
}

pub fn eval_point(mesh: &Mesh, e: usize, xi: f64, eta: f64) -> PointEval {
    let el = &mesh.elements[e];
    let n = shape_values(xi, eta);
    let d = shape_derivs(xi, eta);
    let (mut j00, mut j01, mut j10, mut j11) = (0.0, 0.0, 0.0, 0.0);
    let mut x = [0.0, 0.0];
    for a in 0..6 {
        let p = mesh.nodes[el[a]];
        x[0] += n[a] * p[0];
        x[1] += n[a] * p[1];
        j00 += d[a][0] * p[0];
        j01 += d[a][1] * p[0];
        j10 += d[a][0] * p[1];
        j11 += d[a][1] * p[1];
    }
    let det = j00 * j11 - j01 * j10;
    let inv = 1.0 / det;
    let mut dn = [[0.0; 2]; 6];
    for a in 0..6 {
        // grad N = J^{-T} dN/dxi
        dn[a][0] = inv * (j11 * d[a][0] - j10 * d[a][1]);
        dn[a][1] = inv * (-j01 * d[a][0] + j00 * d[a][1]);
    }
    PointEval { x, n, dn, det }
}

fn element_stiffness(mesh: &Mesh, e: usize, tensor: &ElasticTensor, rule: &[QuadPoint]) -> [f64; 144] {
    let (l, m) = (tensor.lambda, tensor.mu);
    let p = l + 2.0 * m;
    let mut k = [0.0; 144];
    for q in rule {
        let ev = eval_point(mesh, e, q.xi, q.eta);
        let w = q.weight * ev.det;
        for a in 0..6 {
            let (ax, ay) = (ev.dn[a][0], ev.dn[a][1]);
            for b in 0..6 {
                let (bx, by) = (ev.dn[b][0], ev.dn[b][1]);
                let r0 = 2 * a;
                let c0 = 2 * b;
                k[r0 * 12 + c0] += w * (p * ax * bx + m * ay * by);
                k[r0 * 12 + c0 + 1] += w * (l * ax * by + m * ay * bx);
                k[(r0 + 1) * 12 + c0] += w * (l * ay * bx + m * ax * by);
                k[(r0 + 1) * 12 + c0 + 1] += w * (p * ay * by + m * ax * bx);
            }
        }
    }
    k
}

/// Block-sparse symmetric stiffness matrix with 2x2 node blocks and an optional load.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    pub mesh: Arc<Mesh>,
    pub mesh_hash: String,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    blocks: Vec<[f64; 4]>,
    pub load: Vec<f64>,
}

impl StiffnessSystem {
    pub fn n_dof(&self) -> usize {
        2 * self.mesh.nodes.len()
    }

    fn block_index(&self, i: usize, j: usize) -> usize {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        self.row_ptr[i] + row.binary_search(&j).expect("node pair not in sparsity pattern")
    }

    /// Entry `K[r][c]` (zero outside the pattern).
    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let (i, j) = (r / 2, c / 2);
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.blocks[self.row_ptr[i] + k][2 * (r % 2) + c % 2],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.mesh.nodes.len();
        let mut y = vec![0.0; 2 * n];
        for i in 0..n {
            let (mut y0, mut y1) = (0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let b = &self.blocks[k];
                y0 += b[0] * x[2 * j] + b[1] * x[2 * j + 1];
                y1 += b[2] * x[2 * j] + b[3] * x[2 * j + 1];
            }
            y[2 * i] = y0;
            y[2 * i + 1] = y1;
        }
        y
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.mesh.nodes.len();
        let mut best: f64 = 0.0;
        for i in 0..n {
            let (mut s0, mut s1) = (0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let b = &self.blocks[k];
                s0 += b[0].abs() + b[1].abs();
                s1 += b[2].abs() + b[3].abs();
            }
            best = best.max(s0).max(s1);
        }
        best
    }

    /// `max |K - K^T|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.mesh.nodes.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                let t = &self.blocks[self.block_index(j, i)];
                let b = &self.blocks[k];
                worst = worst.max((b[0] - t[0]).abs()).max((b[1] - t[2]).abs()).max((b[2] - t[1]).abs()).max((b[3] - t[3]).abs());
            }
        }
        worst
    }

    fn check_hash(&self, f: &FemField) -> Result<()> {
        if f.mesh_hash != self.mesh_hash {
            return Err(Error::Precondition("field and system live on different meshes".into()));
        }
        Ok(())
    }

    /// `a^T K b`.
    pub fn energy_product(&self, a: &FemField, b: &FemField) -> Result<f64> {
        self.check_hash(a)?;
        self.check_hash(b)?;
        let kb = self.matvec(&b.values);
        Ok(dot(&a.values, &kb))
    }

    /// Discrete lifting of rigid motion `l` (0-based) supported on the nodes of `tag`.
    pub fn lifting(&self, tag: BoundaryTag, l: usize) -> Result<Vec<f64>> {
        let nodes = self.mesh.tagged_nodes(tag);
        if nodes.is_empty() || l > 2 {
            return Err(Error::Domain(format!("no boundary `{}` or rigid index {l} out of range", tag.name())));
        }
        let psi = rigid_basis()[l];
        let mut v = vec![0.0; self.n_dof()];
        for i in nodes {
            let w = psi.eval(self.mesh.nodes[i]);
            v[2 * i] = w[0];
            v[2 * i + 1] = w[1];
        }
        Ok(v)
    }

    /// Boundary integral of the traction of `field` against rigid motion `l` on `tag`,
    /// with the normal pointing out of the inclusion (into the matrix), evaluated as the
    /// residual pairing `-(K u - f) . L`.
    pub fn traction_functional(&self, field: &FemField, tag: BoundaryTag, l: usize) -> Result<f64> {
        self.check_hash(field)?;
        let lift = self.lifting(tag, l)?;
        let mut r = self.matvec(&field.values);
        for (ri, fi) in r.iter_mut().zip(&self.load) {
            *ri -= fi;
        }
        let s = -dot(&r, &lift);
        Ok(if tag == BoundaryTag::Outer { -s } else { s })
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sparsity(mesh: &Mesh) -> (Vec<usize>, Vec<usize>) {
    let n = mesh.nodes.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for el in &mesh.elements {
        for &a in el {
            adj[a].extend_from_slice(el);
        }
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    row_ptr.push(0);
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
        cols.extend_from_slice(list);
        row_ptr.push(cols.len());
    }
    (row_ptr, cols)
}

/// Assemble with one tensor per region and an optional body force.
pub fn assemble_general(
    mesh: Arc<Mesh>,
    tensor_of: &(dyn Fn(Region) -> ElasticTensor + Sync),
    body_force: Option<&(dyn Fn([f64; 2]) -> [f64; 2] + Sync)>,
) -> StiffnessSystem {
    let (row_ptr, cols) = sparsity(&mesh);
    let mut sys = StiffnessSystem {
        mesh_hash: mesh.hash(),
        row_ptr,
        blocks: vec![[0.0; 4]; cols.len()],
        cols,
        load: vec![0.0; 2 * mesh.nodes.len()],
        mesh: mesh.clone(),
    };
    let rule = triangle_degree4();
    let ne = mesh.elements.len();
    let chunk = 4096;
    for start in (0..ne).step_by(chunk) {
        let end = (start + chunk).min(ne);
        let mats: Vec<[f64; 144]> = (start..end)
            .into_par_iter()
            .map(|e| element_stiffness(&mesh, e, &tensor_of(mesh.regions[e]), &rule))
            .collect();
        for (off, k) in mats.iter().enumerate() {
            let el = mesh.elements[start + off];
            for a in 0..6 {
                for b in 0..6 {
                    let idx = sys.block_index(el[a], el[b]);
                    let blk = &mut sys.blocks[idx];
                    blk[0] += k[(2 * a) * 12 + 2 * b];
                    blk[1] += k[(2 * a) * 12 + 2 * b + 1];
                    blk[2] += k[(2 * a + 1) * 12 + 2 * b];
                    blk[3] += k[(2 * a + 1) * 12 + 2 * b + 1];
                }
            }
        }
    }
    if let Some(f) = body_force {
        let rule6 = triangle_degree6();
        for e in 0..ne {
            let el = mesh.elements[e];
            for q in &rule6 {
                let ev = eval_point(&mesh, e, q.xi, q.eta);
                let fv = f(ev.x);
                let w = q.weight * ev.det;
                for a in 0..6 {
                    sys.load[2 * el[a]] += w * ev.n[a] * fv[0];
                    sys.load[2 * el[a] + 1] += w * ev.n[a] * fv[1];
                }
            }
        }
    }
    sys
}

/// Stiffness matrix of the homogeneous Lame operator on `mesh`.
pub fn assemble(mesh: Arc<Mesh>, tensor: &ElasticTensor) -> StiffnessSystem {
    let t = *tensor;
    assemble_general(mesh, &move |_| t, None)
}

/// Solved nodal displacement field with its Dirichlet mask.
#[derive(Debug, Clone)]
pub struct FemField {
    pub mesh: Arc<Mesh>,
    pub mesh_hash: String,
    /// Interleaved `(u1, u2)` per node.
    pub values: Vec<f64>,
    pub fixed: Vec<bool>,
}

impl FemField {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = 2 * mesh.nodes.len();
        Self { mesh_hash: mesh.hash(), mesh, values: vec![0.0; n], fixed: vec![false; n] }
    }

    /// Nodal interpolant of a vector function.
    pub fn interpolate(mesh: Arc<Mesh>, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut z = Self::zeros(mesh);
        for (i, p) in z.mesh.nodes.iter().enumerate() {
            let v = f(*p);
            z.values[2 * i] = v[0];
            z.values[2 * i + 1] = v[1];
        }
        z
    }

    pub fn node_value(&self, i: usize) -> [f64; 2] {
        [self.values[2 * i], self.values[2 * i + 1]]
    }

    /// Linear combination `sum c_k f_k` of fields on one mesh.
    pub fn combine(terms: &[(f64, &FemField)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::Precondition("empty combination".into()))?.1;
        let mut out = FemField::zeros(first.mesh.clone());
        for (c, f) in terms {
            if f.mesh_hash != first.mesh_hash {
                return Err(Error::Precondition("fields live on different meshes".into()));
            }
            for (o, v) in out.values.iter_mut().zip(&f.values) {
                *o += c * v;
            }
            for (o, v) in out.fixed.iter_mut().zip(&f.fixed) {
                *o |= v;
            }
        }
        Ok(out)
    }

    /// Gradient `d u_i / d x_j` at a reference point of element `e`.
    pub fn gradient_at(&self, e: usize, xi: f64, eta: f64) -> (PointEval, Matrix2<f64>) {
        let ev = eval_point(&self.mesh, e, xi, eta);
        let el = &self.mesh.elements[e];
        let mut g = Matrix2::zeros();
        for a in 0..6 {
            let u = self.node_value(el[a]);
            for i in 0..2 {
                for j in 0..2 {
                    g[(i, j)] += u[i] * ev.dn[a][j];
                }
            }
        }
        (ev, g)
    }

    pub fn value_at(&self, e: usize, xi: f64, eta: f64) -> [f64; 2] {
        let n = shape_values(xi, eta);
        let el = &self.mesh.elements[e];
        let mut u = [0.0; 2];
        for a in 0..6 {
            let v = self.node_value(el[a]);
            u[0] += n[a] * v[0];
            u[1] += n[a] * v[1];
        }
        u
    }

    /// Plain-text `gapfield v1`: header, mesh hash, node count, then `u1 u2` per node.
    pub fn to_gapfield(&self) -> String {
        use std::fmt::Write;
        let mut s = format!("gapfield v1\nmesh {}\nnodes {}\n", self.mesh_hash, self.mesh.nodes.len());
        for i in 0..self.mesh.nodes.len() {
            let v = self.node_value(i);
            let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
        }
        s
    }

    pub fn from_gapfield(mesh: Arc<Mesh>, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("gapfield v1") {
            return Err(Error::Format("expected header `gapfield v1`".into()));
        }
        let hash = lines
            .next()
            .and_then(|l| l.strip_prefix("mesh "))
            .ok_or_else(|| Error::Format("missing mesh hash".into()))?;
        let mut f = FemField::zeros(mesh);
        if hash.trim() != f.mesh_hash {
            return Err(Error::Format("field was written for a different mesh".into()));
        }
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("nodes "))
            .and_then(|x| x.trim().parse().ok())
            .ok_or_else(|| Error::Format("missing node count".into()))?;
        if n != f.mesh.nodes.len() {
            return Err(Error::Format("node count mismatch".into()));
        }
        for i in 0..n {
            let l = lines.next().ok_or_else(|| Error::Format("truncated field".into()))?;
            let v: Vec<f64> = l.split_whitespace().map(|x| x.parse()).collect::<std::result::Result<_, _>>().map_err(|_| Error::Format(format!("bad value on node {i}")))?;
            if v.len() != 2 {
                return Err(Error::Format(format!("expected 2 values on node {i}")));
            }
            f.values[2 * i] = v[0];
            f.values[2 * i + 1] = v[1];
        }
        Ok(f)
    }
}

/// Boundary data on one tag.
pub type BoundaryFn<'a> = &'a (dyn Fn([f64; 2]) -> [f64; 2] + Sync);

/// Factorization of the interior block for a fixed set of constrained tags.
pub struct DirichletSolver {
    system: Arc<StiffnessSystem>,
    tags: Vec<BoundaryTag>,
    free: Vec<usize>,
    node_tag: Vec<Option<BoundaryTag>>,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    norm: f64,
}

impl DirichletSolver {
    pub fn new(system: Arc<StiffnessSystem>, tags: &[BoundaryTag]) -> Result<Self> {
        let mesh = system.mesh.clone();
        let n = mesh.nodes.len();
        let mut node_tag = vec![None; n];
        for b in &mesh.boundary_edges {
            if tags.contains(&b.tag) {
                for &i in &b.nodes {
                    node_tag[i] = Some(b.tag);
                }
            }
        }
        if node_tag.iter().all(Option::is_none) {
            return Err(Error::Solver("no Dirichlet nodes: the system is singular on rigid motions".into()));
        }
        let mut free_index = vec![usize::MAX; 2 * n];
        let mut free = Vec::new();
        for i in 0..n {
            if node_tag[i].is_none() {
                for c in 0..2 {
                    free_index[2 * i + c] = free.len();
                    free.push(2 * i + c);
                }
            }
        }
        let nf = free.len();
        let mut trip = Vec::new();
        for i in 0..n {
            if node_tag[i].is_some() {
                continue;
            }
            for k in system.row_ptr[i]..system.row_ptr[i + 1] {
                let j = system.cols[k];
                if node_tag[j].is_some() || j > i {
                    continue;
                }
                let b = &system.blocks[k];
                for r in 0..2 {
                    for c in 0..2 {
                        let (fr, fc) = (free_index[2 * i + r], free_index[2 * j + c]);
                        if fr >= fc {
                            trip.push(Triplet::new(fr, fc, b[2 * r + c]));
                        }
                    }
                }
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &trip)
            .map_err(|e| Error::Solver(format!("sparse matrix construction failed: {e:?}")))?;
        let llt = a.sp_cholesky(Side::Lower).map_err(|e| {
            Error::Solver(format!(
                "Cholesky factorization failed ({e:?}); free dofs {nf}, nonzeros {}, |K|_inf {:e}",
                trip.len(),
                system.norm_inf()
            ))
        })?;
        let norm = system.norm_inf();
        Ok(Self { system, tags: tags.to_vec(), free, node_tag, llt, norm })
    }

    pub fn system(&self) -> &Arc<StiffnessSystem> {
        &self.system
    }

    /// Solve for each right-hand side given as per-tag boundary data.
    pub fn solve_many(&self, data: &[Vec<(BoundaryTag, BoundaryFn)>]) -> Result<Vec<FemField>> {
        let sys = &self.system;
        let mesh = &sys.mesh;
        let n = mesh.nodes.len();
        let nf = self.free.len();
        let mut fields = Vec::with_capacity(data.len());
        let mut rhs = Mat::<f64>::zeros(nf, data.len());
        for (col, d) in data.iter().enumerate() {
            for (t, _) in d {
                if !self.tags.contains(t) {
                    return Err(Error::Precondition(format!("data on unconstrained tag {}", t.name())));
                }
            }
            let mut f = FemField::zeros(mesh.clone());
            for i in 0..n {
                if let Some(t) = self.node_tag[i] {
                    let v = d.iter().find(|(tt, _)| *tt == t).map(|(_, g)| g(mesh.nodes[i])).unwrap_or([0.0, 0.0]);
                    f.values[2 * i] = v[0];
                    f.values[2 * i + 1] = v[1];
                    f.fixed[2 * i] = true;
                    f.fixed[2 * i + 1] = true;
                }
            }
            let ku = sys.matvec(&f.values);
            for (k, &dof) in self.free.iter().enumerate() {
                rhs[(k, col)] = sys.load[dof] - ku[dof];
            }
            fields.push(f);
        }
        let b = rhs.clone();
        let mut x = rhs;
        self.llt.solve_in_place(x.as_mut());
        // one step of iterative refinement, then the residual check
        for pass in 0..2 {
            let mut res = Mat::<f64>::zeros(nf, data.len());
            let mut worst: f64 = 0.0;
            for col in 0..data.len() {
                let mut full = vec![0.0; 2 * n];
                for (k, &dof) in self.free.iter().enumerate() {
                    full[dof] = x[(k, col)];
                }
                let kx = sys.matvec(&full);
                let (mut rn, mut xn, mut bn) = (0.0f64, 0.0f64, 0.0f64);
                for (k, &dof) in self.free.iter().enumerate() {
                    let r = b[(k, col)] - kx[dof];
                    res[(k, col)] = r;
                    rn = rn.max(r.abs());
                    xn = xn.max(x[(k, col)].abs());
                    bn = bn.max(b[(k, col)].abs());
                }
                let denom = self.norm * xn + bn;
                if denom > 0.0 {
                    worst = worst.max(rn / denom);
                }
            }
            if pass == 1 {
                if worst > 1e-10 {
                    return Err(Error::Solver(format!("relative residual {worst:e} exceeds 1e-10")));
                }
                break;
            }
            self.llt.solve_in_place(res.as_mut());
            for col in 0..data.len() {
                for k in 0..nf {
                    x[(k, col)] += res[(k, col)];
                }
            }
        }
        for (col, f) in fields.iter_mut().enumerate() {
            for (k, &dof) in self.free.iter().enumerate() {
                f.values[dof] = x[(k, col)];
            }
        }
        Ok(fields)
    }

    pub fn solve(&self, data: &[(BoundaryTag, BoundaryFn)]) -> Result<FemField> {
        Ok(self.solve_many(&[data.to_vec()])?.remove(0))
    }
}

/// Dirichlet solve constraining exactly the tags that carry data.
pub fn solve_dirichlet(system: Arc<StiffnessSystem>, data: &[(BoundaryTag, BoundaryFn)]) -> Result<FemField> {
    let tags: Vec<BoundaryTag> = data.iter().map(|(t, _)| *t).collect();
    DirichletSolver::new(system, &tags)?.solve(data)
}

/// Whole-disk solve with inclusions `m` times stiffer than the matrix and `phi` on the outer circle.
pub fn solve_finite_contrast(
    filled: Arc<Mesh>,
    tensor: &ElasticTensor,
    contrast: f64,
    phi: BoundaryFn,
) -> Result<(Arc<StiffnessSystem>, FemField)> {
    if !(contrast >= 1.0) {
        return Err(Error::Domain(format!("contrast must be >= 1, got {contrast}")));
    }
    if !filled.regions.iter().any(|r| *r != Region::Matrix) {
        return Err(Error::Precondition("finite-contrast solve needs inclusion-tagged elements".into()));
    }
    let stiff = tensor.scaled(contrast)?;
    let t = *tensor;
    let sys = Arc::new(assemble_general(
        filled,
        &move |r| if r == Region::Matrix { t } else { stiff },
        None,
    ));
    let f = solve_dirichlet(sys.clone(), &[(BoundaryTag::Outer, phi)])?;
    Ok((sys, f))
}

/// Gradient sample at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct GradSample {
    pub element: usize,
    pub x: [f64; 2],
    pub weight: f64,
    pub grad: Matrix2<f64>,
}

/// Gradients at the degree-4 quadrature points of every element.
pub fn element_gradients(field: &FemField) -> Vec<GradSample> {
    let rule = triangle_degree4();
    let mut out = Vec::with_capacity(rule.len() * field.mesh.elements.len());
    for e in 0..field.mesh.elements.len() {
        for q in &rule {
            let (ev, g) = field.gradient_at(e, q.xi, q.eta);
            out.push(GradSample { element: e, x: ev.x, weight: q.weight * ev.det, grad: g });
        }
    }
    out
}

/// Element gradients plus patch-recovered nodal gradients.
pub struct GradientField {
    pub samples: Vec<GradSample>,
    pub nodal: Vec<Matrix2<f64>>,
}

/// Least-squares patch recovery: each gradient component is fitted by a quadratic
/// (linear when the patch is too small) over the quadrature samples of the elements
/// touching the node, then evaluated at the node.
pub fn gradient_field(field: &FemField) -> GradientField {
    let samples = element_gradients(field);
    let mesh = &field.mesh;
    let per = triangle_degree4().len();
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); mesh.nodes.len()];
    for (e, el) in mesh.elements.iter().enumerate() {
        for &i in el {
            touching[i].push(e);
        }
    }
    let nodal = (0..mesh.nodes.len())
        .into_par_iter()
        .map(|i| {
            let c = mesh.nodes[i];
            let pts: Vec<&GradSample> = touching[i].iter().flat_map(|&e| &samples[e * per..(e + 1) * per]).collect();
            let h = pts
                .iter()
                .map(|s| ((s.x[0] - c[0]).powi(2) + (s.x[1] - c[1]).powi(2)).sqrt())
                .fold(0.0, f64::max)
                .max(f64::MIN_POSITIVE);
            let quadratic = pts.len() >= 12;
            let ncoef = if quadratic { 6 } else { 3 };
            let mut a = DMatrix::<f64>::zeros(pts.len(), ncoef);
            for (r, s) in pts.iter().enumerate() {
                let (dx, dy) = ((s.x[0] - c[0]) / h, (s.x[1] - c[1]) / h);
                let row = [1.0, dx, dy, dx * dx, dx * dy, dy * dy];
                for k in 0..ncoef {
                    a[(r, k)] = row[k];
                }
            }
            let svd = a.clone().svd(true, true);
            let mut g = Matrix2::zeros();
            for comp in 0..4 {
                let b = DVector::from_iterator(pts.len(), pts.iter().map(|s| s.grad[(comp / 2, comp % 2)]));
                let coef = svd.solve(&b, 1e-10).unwrap_or_else(|_| DVector::zeros(ncoef));
                g[(comp / 2, comp % 2)] = coef[0];
            }
            g
        })
        .collect();
    GradientField { samples, nodal }
}

/// `L2` and `H1`-seminorm errors of `field` against an exact solution (degree-6 quadrature).
pub fn error_norms(
    field: &FemField,
    exact: &dyn Fn([f64; 2]) -> [f64; 2],
    exact_grad: &dyn Fn([f64; 2]) -> Matrix2<f64>,
    regions: Option<&[Region]>,
) -> (f64, f64) {
    let rule = triangle_degree6();
    let (mut l2, mut h1) = (0.0, 0.0);
    for e in 0..field.mesh.elements.len() {
        if let Some(r) = regions {
            if !r.contains(&field.mesh.regions[e]) {
                continue;
            }
        }
        for q in &rule {
            let (ev, g) = field.gradient_at(e, q.xi, q.eta);
            let u = field.value_at(e, q.xi, q.eta);
            let w = q.weight * ev.det;
            let ue = exact(ev.x);
            l2 += w * ((u[0] - ue[0]).powi(2) + (u[1] - ue[1]).powi(2));
            h1 += w * (g - exact_grad(ev.x)).norm_squared();
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// `H1` norm (values and gradients) of `a - b` and of `b` over elements of `a` in `regions`.
/// The mesh of `b` must start with the nodes and elements of `a`'s mesh.
pub fn h1_distance(a: &FemField, b: &FemField, regions: &[Region]) -> Result<(f64, f64)> {
    let (ma, mb) = (&a.mesh, &b.mesh);
    if mb.nodes.len() < ma.nodes.len()
        || mb.elements.len() < ma.elements.len()
        || mb.nodes[..ma.nodes.len()] != ma.nodes[..]
        || mb.elements[..ma.elements.len()] != ma.elements[..]
    {
        return Err(Error::Precondition("meshes do not share their leading nodes and elements".into()));
    }
    let rule = triangle_degree6();
    let (mut d, mut nb) = (0.0, 0.0);
    for e in 0..ma.elements.len() {
        if !regions.contains(&ma.regions[e]) {
            continue;
        }
        for q in &rule {
            let (ev, ga) = a.gradient_at(e, q.xi, q.eta);
            let (_, gb) = b.gradient_at(e, q.xi, q.eta);
            let ua = a.value_at(e, q.xi, q.eta);
            let ub = b.value_at(e, q.xi, q.eta);
            let w = q.weight * ev.det;
            d += w * ((ga - gb).norm_squared() + (ua[0] - ub[0]).powi(2) + (ua[1] - ub[1]).powi(2));
            nb += w * (gb.norm_squared() + ub[0].powi(2) + ub[1].powi(2));
        }
    }
    Ok((d.sqrt(), nb.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryEdge, Mesh};

    fn single_triangle() -> Mesh {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        let b = |n: [usize; 3]| BoundaryEdge { nodes: n, tag: BoundaryTag::Outer };
        Mesh {
            nodes,
            elements: vec![[0, 1, 2, 3, 4, 5]],
            regions: vec![Region::Matrix],
            boundary_edges: vec![b([0, 1, 3]), b([1, 2, 4]), b([2, 0, 5])],
            symmetry_map: None,
            spec: None,
        }
    }

    #[test]
    fn shape_functions_partition_unity() {
        for (xi, eta) in [(0.1, 0.2), (0.3, 0.3), (0.0, 0.9)] {
            let n = shape_values(xi, eta);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let d = shape_derivs(xi, eta);
            assert!(d.iter().map(|x| x[0]).sum::<f64>().abs() < 1e-14);
            assert!(d.iter().map(|x| x[1]).sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn reference_triangle_kernel_and_symmetry() {
        let mesh = Arc::new(single_triangle());
        let t = ElasticTensor::new(1.3, 0.7).unwrap();
        let sys = assemble(mesh.clone(), &t);
        let norm = sys.norm_inf();
        for psi in rigid_basis() {
            let f = FemField::interpolate(mesh.clone(), &|x| psi.eval(x));
            let r = sys.matvec(&f.values);
            assert!(r.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-12 * norm);
        }
        assert!(sys.asymmetry() <= 1e-13 * norm);
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let mesh = Arc::new(crate::mesh::tests_support::unit_square(2));
        let sys = Arc::new(assemble(mesh, &ElasticTensor::new(1.0, 1.0).unwrap()));
        let zero = |_: [f64; 2]| [0.0, 0.0];
        let f = solve_dirichlet(sys.clone(), &[(BoundaryTag::Outer, &zero)]).unwrap();
        assert!(f.values.iter().all(|v| *v == 0.0));
        assert!(sys.traction_functional(&f, BoundaryTag::Outer, 0).unwrap() == 0.0);
    }

    #[test]
    fn unconstrained_is_an_error() {
        let mesh = Arc::new(crate::mesh::tests_support::unit_square(1));
        let sys = Arc::new(assemble(mesh, &ElasticTensor::new(1.0, 1.0).unwrap()));
        assert!(DirichletSolver::new(sys, &[BoundaryTag::Inc1]).is_err());
    }

    #[test]
    fn linear_field_gradients_exact() {
        let mesh = Arc::new(crate::mesh::tests_support::unit_square(2));
        let f = FemField::interpolate(mesh, &|x| [x[1], x[0]]);
        for s in element_gradients(&f) {
            assert!((s.grad - Matrix2::new(0.0, 1.0, 1.0, 0.0)).norm() < 1e-13);
        }
        let r = gradient_field(&f);
        for g in r.nodal {
            assert!((g - Matrix2::new(0.0, 1.0, 1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn gapfield_roundtrip() {
        let mesh = Arc::new(crate::mesh::tests_support::unit_square(1));
        let f = FemField::interpolate(mesh.clone(), &|x| [x[0].sin(), 0.1 * x[1]]);
        let back = FemField::from_gapfield(mesh, &f.to_gapfield()).unwrap();
        assert_eq!(back.values, f.values);
    }
}
