use super::{corner_angles, key_of, BoundaryEdge, Mesh, Region, EDGE_LOCAL};
use crate::error::{Error, Result};
use crate::geometry::{delta, BoundaryTag, DomainSpec, InclusionShape, Side};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradingParams {
    /// Target edge length in the gap as a fraction of the local gap width.
    pub theta: f64,
    /// Element layers across the full gap (rounded up to even).
    pub n_layers: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub angle_floor: f64,
    pub max_elements: usize,
    /// Growth rate of the target size with distance outside the gap.
    pub grade: f64,
    /// Smallest admissible epsilon.
    pub eps_floor: f64,
}

impl GradingParams {
    pub fn defaults(outer_radius: f64) -> Self {
        Self {
            theta: 0.25,
            n_layers: 4,
            h_min: 1e-9 * outer_radius,
            h_max: 0.125 * outer_radius,
            angle_floor: 15.0,
            max_elements: 2_000_000,
            grade: 0.25,
            eps_floor: 1e-6 * outer_radius,
        }
    }
}

/// Size field shared by both halves so the `x2 = 0` axis is discretised once.
struct SizeField {
    h_max: f64,
    h_min: f64,
    grade: f64,
    strip_end: Vec<([f64; 2], f64)>,
    inclusion_cap: f64,
    centers: Vec<[f64; 2]>,
    rho: f64,
}

impl SizeField {
    fn at(&self, p: [f64; 2]) -> f64 {
        let q = [p[0].abs(), p[1]];
        let mut l = self.h_max;
        for (c, s) in &self.strip_end {
            let d = ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2)).sqrt();
            l = l.min(s + self.grade * d);
        }
        for c in &self.centers {
            let d = ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2)).sqrt();
            l = l.min(self.inclusion_cap + self.grade * (d - self.rho).max(0.0));
        }
        l.max(self.h_min)
    }
}

/// Place points along `curve(t)`, `t in [t0, t1]`, spaced by `size`; the endpoints are kept exact.
fn distribute<C, S>(curve: C, t0: f64, t1: f64, size: S, first: [f64; 2], last: [f64; 2]) -> Vec<[f64; 2]>
where
    C: Fn(f64) -> [f64; 2],
    S: Fn([f64; 2]) -> f64,
{
    let dense = 4000;
    let mut ts = Vec::with_capacity(dense + 1);
    let mut acc = Vec::with_capacity(dense + 1);
    let mut prev = curve(t0);
    let mut f = 0.0;
    for k in 0..=dense {
        let t = t0 + (t1 - t0) * k as f64 / dense as f64;
        let p = curve(t);
        let len = ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
        let mid = [0.5 * (p[0] + prev[0]), 0.5 * (p[1] + prev[1])];
        f += len / size(mid);
        ts.push(t);
        acc.push(f);
        prev = p;
    }
    let n = (f.round() as usize).max(1);
    let mut out = vec![first];
    let mut j = 0;
    for k in 1..n {
        let target = f * k as f64 / n as f64;
        while j + 1 < dense && acc[j + 1] < target {
            j += 1;
        }
        let seg = acc[j + 1] - acc[j];
        let s = if seg > 0.0 { (target - acc[j]) / seg } else { 0.0 };
        out.push(curve(ts[j] + s * (ts[j + 1] - ts[j])));
    }
    out.push(last);
    out
}

/// Column positions `0 = X_0 < ... < X_N = R1` with spacing close to `clamp(theta delta, h_min, h_max)`.
fn strip_columns(spec: &DomainSpec, g: &GradingParams) -> Result<Vec<f64>> {
    let r1 = spec.r1();
    let ell = |x: f64| -> Result<f64> { Ok((g.theta * delta(spec, x)?).clamp(g.h_min, g.h_max)) };
    // march with sub-steps of a twentieth of the local size and integrate 1/ell
    let mut xs = vec![0.0];
    let mut fs = vec![0.0];
    let mut x = 0.0;
    let mut f = 0.0;
    while x < r1 {
        let step = (0.05 * ell(x)?).min(r1 - x);
        let xm = x + 0.5 * step;
        f += step / ell(xm)?;
        x += step;
        if r1 - x < 1e-14 * r1 {
            x = r1;
        }
        xs.push(x);
        fs.push(f);
    }
    let n = (f.round() as usize).max(1);
    let mut cols = vec![0.0];
    let mut j = 0;
    for k in 1..n {
        let target = f * k as f64 / n as f64;
        while j + 1 < fs.len() - 1 && fs[j + 1] < target {
            j += 1;
        }
        let s = (target - fs[j]) / (fs[j + 1] - fs[j]);
        cols.push(xs[j] + s * (xs[j + 1] - xs[j]));
    }
    cols.push(r1);
    Ok(cols)
}

/// Constrained edges cannot be split during refinement, so they are placed finer than the interior.
const BOUNDARY_FRACTION: f64 = 0.6;

/// Vertex triangulation of one quadrant plus its tagged edges, in upper form.
struct Quadrant {
    verts: Vec<[f64; 2]>,
    tris: Vec<[usize; 3]>,
    /// Edges on the inclusion curve and on the outer circle.
    curve_edges: Vec<(usize, usize, BoundaryTag)>,
    /// Inclusion curve vertices from the gap point to the top, in order.
    inclusion_chain: Vec<usize>,
    /// End points of the x1 = 0 axis inside the inclusion, from the gap point to the top.
    inner_axis: Vec<[f64; 2]>,
}

/// Strip rows on one side: half the layers, scaled by this side's share of the gap at `x1 = R1`
/// so unequal halves keep the symmetric row height, and never taller than the last column is wide.
fn side_rows(shape: &InclusionShape, spec: &DomainSpec, g: &GradingParams) -> Result<usize> {
    let n_half = g.n_layers.div_ceil(2).max(1);
    let r1 = spec.r1();
    let share = 2.0 * (shape.half_eps + shape.graph(r1)) / delta(spec, r1)?;
    let by_share = (n_half as f64 * share - 1e-9).ceil() as usize;
    let by_width = (share / (2.0 * g.theta) - 1e-9).ceil() as usize;
    Ok(n_half.max(by_share).max(by_width))
}

fn quadrant_vertices(
    shape: &InclusionShape,
    spec: &DomainSpec,
    g: &GradingParams,
    cols: &[f64],
    axis: &[[f64; 2]],
    size: &SizeField,
) -> Result<Quadrant> {
    let n_half = side_rows(shape, spec, g)?;
    let mut verts: Vec<[f64; 2]> = Vec::new();
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut add = |p: [f64; 2], verts: &mut Vec<[f64; 2]>| -> usize {
        let p = [p[0] + 0.0, p[1] + 0.0];
        *index.entry(key_of(p)).or_insert_with(|| {
            verts.push(p);
            verts.len() - 1
        })
    };
    // structured gap strip
    let ncol = cols.len();
    let mut grid = vec![0usize; ncol * (n_half + 1)];
    for (k, &x) in cols.iter().enumerate() {
        let top = shape.half_eps + shape.graph(x);
        for j in 0..=n_half {
            let y = if j == n_half { top } else { j as f64 / n_half as f64 * top };
            grid[k * (n_half + 1) + j] = add([x, y], &mut verts);
        }
    }
    let gid = |k: usize, j: usize| grid[k * (n_half + 1) + j];
    let mut tris = Vec::new();
    for k in 0..ncol - 1 {
        for j in 0..n_half {
            let (a, b, c, d) = (gid(k, j), gid(k + 1, j), gid(k + 1, j + 1), gid(k, j + 1));
            let worst = |t: [[usize; 3]; 2]| {
                t.iter()
                    .flat_map(|tri| corner_angles(tri.map(|i| verts[i])))
                    .fold(f64::INFINITY, f64::min)
            };
            let main = [[a, b, c], [a, c, d]];
            let cross = [[a, b, d], [b, c, d]];
            if worst(main) < g.angle_floor && worst(cross) > worst(main) {
                tris.extend(cross);
            } else {
                tris.extend(main);
            }
        }
    }
    let mut curve_edges = Vec::new();
    let mut inclusion_chain: Vec<usize> = (0..ncol).map(|k| gid(k, n_half)).collect();
    for k in 0..ncol - 1 {
        curve_edges.push((gid(k, n_half), gid(k + 1, n_half), BoundaryTag::Inc1));
    }

    // outer region boundary loop, counter-clockwise
    let r_out = spec.outer_radius;
    let s = |p: [f64; 2]| BOUNDARY_FRACTION * size.at(p);
    let y_top = shape.center_y() + shape.rho;
    let arc = distribute(|t| [r_out * t.cos(), r_out * t.sin()], 0.0, FRAC_PI_2, s, [r_out, 0.0], [0.0, r_out]);
    let upper_axis = distribute(|t| [0.0, t], r_out, y_top, s, [0.0, r_out], [0.0, y_top]);
    let start = [cols[ncol - 1], shape.half_eps + shape.graph(cols[ncol - 1])];
    let th0 = shape.angle_of(start);
    let curve = distribute(|t| shape.point_at_angle(t), FRAC_PI_2, th0, s, [0.0, y_top], start);
    let mut lp: Vec<[f64; 2]> = Vec::new();
    let mut tags: Vec<Option<BoundaryTag>> = Vec::new(); // tag of segment lp[i] -> lp[i+1]
    for p in axis.iter() {
        lp.push(*p);
        tags.push(None);
    }
    lp.pop();
    tags.pop();
    for p in &arc {
        lp.push(*p);
        tags.push(Some(BoundaryTag::Outer));
    }
    lp.pop();
    tags.pop();
    for p in &upper_axis {
        lp.push(*p);
        tags.push(None);
    }
    lp.pop();
    tags.pop();
    for p in &curve {
        lp.push(*p);
        tags.push(Some(BoundaryTag::Inc1));
    }
    lp.pop();
    tags.pop();
    for j in (1..=n_half).rev() {
        lp.push(verts[gid(ncol - 1, j)]);
        tags.push(None);
    }
    if lp[0] != verts[gid(ncol - 1, 0)] {
        return Err(Error::Mesh("axis discretisation does not start at the strip corner".into()));
    }
    let loop_ids: Vec<usize> = lp.iter().map(|p| add(*p, &mut verts)).collect();
    for (i, t) in tags.iter().enumerate() {
        if let Some(t) = t {
            curve_edges.push((loop_ids[i], loop_ids[(i + 1) % loop_ids.len()], *t));
        }
    }
    let mut rev: Vec<usize> = curve.iter().map(|p| add(*p, &mut verts)).collect();
    rev.reverse();
    inclusion_chain.extend(rev.into_iter().skip(1));

    let outer_tris = triangulate_loop(&lp, &|p| size.at(p), g)?;
    for (pts, t) in outer_tris {
        let ids = [add(pts[0], &mut verts), add(pts[1], &mut verts), add(pts[2], &mut verts)];
        let _ = t;
        tris.push(ids);
    }
    let inner_axis = vec![[0.0, shape.half_eps], [0.0, y_top]];
    Ok(Quadrant { verts, tris, curve_edges, inclusion_chain, inner_axis })
}

/// Constrained Delaunay refinement of a closed polygon, graded by `size`.
fn triangulate_loop(lp: &[[f64; 2]], size: &dyn Fn([f64; 2]) -> f64, g: &GradingParams) -> Result<Vec<([[f64; 2]; 3], ())>> {
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let mut handles = Vec::with_capacity(lp.len());
    for p in lp {
        let h = cdt.insert(Point2::new(p[0], p[1])).map_err(|e| Error::Mesh(format!("insertion failed: {e:?}")))?;
        handles.push(h);
    }
    for i in 0..handles.len() {
        cdt.add_constraint(handles[i], handles[(i + 1) % handles.len()]);
    }
    let max_area = 0.5 * g.h_max * g.h_max;
    let params = || {
        RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(28.0))
            .with_max_allowed_area(max_area)
            .with_max_additional_vertices(2_000_000)
            .keep_constraint_edges()
            .exclude_outer_faces(true)
    };
    let mut res = cdt.refine(params());
    for _ in 0..60 {
        let mut extra = Vec::new();
        for f in cdt.inner_faces() {
            if res.excluded_faces.contains(&f.fix()) {
                continue;
            }
            let v = f.vertices();
            let p: Vec<[f64; 2]> = v.iter().map(|h| [h.position().x, h.position().y]).collect();
            let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            let longest = (0..3)
                .map(|k| ((p[k][0] - p[(k + 1) % 3][0]).powi(2) + (p[k][1] - p[(k + 1) % 3][1]).powi(2)).sqrt())
                .fold(0.0, f64::max);
            if longest > 1.3 * size(c) {
                extra.push(c);
            }
        }
        if extra.is_empty() {
            break;
        }
        for c in extra {
            cdt.insert(Point2::new(c[0], c[1])).map_err(|e| Error::Mesh(format!("insertion failed: {e:?}")))?;
        }
        res = cdt.refine(params());
        if cdt.num_vertices() > 4 * g.max_elements {
            return Err(Error::Mesh(format!("outer region exceeds {} elements", g.max_elements)));
        }
    }
    if !res.refinement_complete {
        return Err(Error::Mesh("quality refinement did not complete".into()));
    }
    let mut out = Vec::new();
    for f in cdt.inner_faces() {
        if res.excluded_faces.contains(&f.fix()) {
            continue;
        }
        let v = f.vertices();
        let mut p: [[f64; 2]; 3] = [[0.0; 2]; 3];
        for k in 0..3 {
            p[k] = [v[k].position().x, v[k].position().y];
        }
        let area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        if area < 0.0 {
            p.swap(1, 2);
        }
        out.push((p, ()));
    }
    Ok(out)
}

/// Quadrant triangulation of the inclusion interior, sharing the curve vertices.
fn inclusion_quadrant(q: &Quadrant, size: &dyn Fn([f64; 2]) -> f64, g: &GradingParams) -> Result<Vec<[[f64; 2]; 3]>> {
    let chain: Vec<[f64; 2]> = q.inclusion_chain.iter().map(|&i| q.verts[i]).collect();
    // grade away from the fine curve spacing next to the gap point
    let seeds: Vec<([f64; 2], f64)> = chain
        .windows(2)
        .map(|w| {
            let len = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
            ([0.5 * (w[0][0] + w[1][0]), 0.5 * (w[0][1] + w[1][1])], len)
        })
        .collect();
    let graded = |p: [f64; 2]| {
        seeds.iter().fold(size(p), |l, (c, h)| {
            l.min(h + g.grade * ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
        })
    };
    // loop: up the x1 = 0 axis from the gap point, then down the curve back to it
    let (a, b) = (q.inner_axis[0], q.inner_axis[q.inner_axis.len() - 1]);
    let mut lp = distribute(|t| [0.0, t], a[1], b[1], |p| BOUNDARY_FRACTION * graded(p), a, b);
    lp.pop();
    for p in chain.iter().rev() {
        lp.push(*p);
    }
    lp.pop();
    Ok(triangulate_loop(&lp, &graded, g)?.into_iter().map(|(p, _)| p).collect())
}

/// Lift straight triangles to six-node elements; curve edges get projected mid-nodes.
fn lift_p2(
    verts: &[[f64; 2]],
    tris: &[[usize; 3]],
    curve_edges: &[(usize, usize, BoundaryTag)],
    shape: &InclusionShape,
    spec: &DomainSpec,
) -> (Vec<[f64; 2]>, Vec<[usize; 6]>, Vec<BoundaryEdge>) {
    let mut nodes = verts.to_vec();
    let tag: HashMap<(usize, usize), BoundaryTag> =
        curve_edges.iter().map(|&(a, b, t)| ((a.min(b), a.max(b)), t)).collect();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut elements = Vec::with_capacity(tris.len());
    let mut bedges = Vec::new();
    for t in tris {
        let mut el = [t[0], t[1], t[2], 0, 0, 0];
        for (a, b, m) in EDGE_LOCAL {
            let key = (el[a].min(el[b]), el[a].max(el[b]));
            el[m] = *mids.entry(key).or_insert_with(|| {
                let (p, q) = (nodes[key.0], nodes[key.1]);
                let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                let pos = match tag.get(&key) {
                    Some(BoundaryTag::Outer) => spec.project(BoundaryTag::Outer, mid),
                    Some(_) => shape.project(mid),
                    None => mid,
                };
                nodes.push(pos);
                let id = nodes.len() - 1;
                if let Some(tg) = tag.get(&key) {
                    bedges.push(BoundaryEdge { nodes: [key.0, key.1, id], tag: *tg });
                }
                id
            });
        }
        elements.push(el);
    }
    (nodes, elements, bedges)
}

struct Piece {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 6]>,
    bedges: Vec<BoundaryEdge>,
    region: Region,
}

fn reflect(piece: &Piece, fx: bool, fy: bool, tag_map: &dyn Fn(BoundaryTag) -> BoundaryTag) -> Piece {
    let nodes = piece
        .nodes
        .iter()
        .map(|p| [if fx { -p[0] } else { p[0] } + 0.0, if fy { -p[1] } else { p[1] } + 0.0])
        .collect();
    let flip = fx ^ fy;
    let elements = piece
        .elements
        .iter()
        .map(|e| if flip { [e[0], e[2], e[1], e[5], e[4], e[3]] } else { *e })
        .collect();
    let bedges = piece.bedges.iter().map(|b| BoundaryEdge { nodes: b.nodes, tag: tag_map(b.tag) }).collect();
    Piece { nodes, elements, bedges, region: piece.region }
}

#[derive(Default)]
struct Assembler {
    nodes: Vec<[f64; 2]>,
    index: HashMap<(u64, u64), usize>,
    elements: Vec<[usize; 6]>,
    regions: Vec<Region>,
    bedges: Vec<BoundaryEdge>,
}

impl Assembler {
    fn add(&mut self, piece: &Piece, keep_edges: bool) {
        let ids: Vec<usize> = piece
            .nodes
            .iter()
            .map(|p| {
                let k = key_of(*p);
                *self.index.entry(k).or_insert_with(|| {
                    self.nodes.push([p[0] + 0.0, p[1] + 0.0]);
                    self.nodes.len() - 1
                })
            })
            .collect();
        for e in &piece.elements {
            self.elements.push(e.map(|i| ids[i]));
            self.regions.push(piece.region);
        }
        if keep_edges {
            for b in &piece.bedges {
                self.bedges.push(BoundaryEdge { nodes: b.nodes.map(|i| ids[i]), tag: b.tag });
            }
        }
    }
}

struct HalfMeshes {
    matrix: Piece,
    inclusion: Option<Piece>,
}

fn half(
    spec: &DomainSpec,
    g: &GradingParams,
    side: Side,
    cols: &[f64],
    axis: &[[f64; 2]],
    size: &SizeField,
    filled: bool,
) -> Result<HalfMeshes> {
    let shape = spec.inclusion_shape(side);
    let q = quadrant_vertices(&shape, spec, g, cols, axis, size)?;
    let (nodes, elements, bedges) = lift_p2(&q.verts, &q.tris, &q.curve_edges, &shape, spec);
    let matrix = Piece { nodes, elements, bedges, region: Region::Matrix };
    let inclusion = if filled {
        let tris = inclusion_quadrant(&q, &|p| size.at(p), g)?;
        let mut verts = q.verts.clone();
        let mut index: HashMap<(u64, u64), usize> = verts.iter().enumerate().map(|(i, p)| (key_of(*p), i)).collect();
        let mut ids = Vec::new();
        for t in &tris {
            let mut tri = [0usize; 3];
            for k in 0..3 {
                tri[k] = *index.entry(key_of(t[k])).or_insert_with(|| {
                    verts.push(t[k]);
                    verts.len() - 1
                });
            }
            ids.push(tri);
        }
        let chain_edges: Vec<(usize, usize, BoundaryTag)> =
            q.curve_edges.iter().filter(|e| e.2 == BoundaryTag::Inc1).copied().collect();
        let (nodes, elements, bedges) = lift_p2(&verts, &ids, &chain_edges, &shape, spec);
        Some(Piece { nodes, elements, bedges, region: Region::Inclusion1 })
    } else {
        None
    };
    Ok(HalfMeshes { matrix, inclusion })
}

fn build(spec: &DomainSpec, g: &GradingParams, filled: bool) -> Result<Mesh> {
    if spec.epsilon < g.eps_floor {
        return Err(Error::Mesh(format!("refusing epsilon = {} below the floor eps_floor = {}", spec.epsilon, g.eps_floor)));
    }
    if spec.epsilon / spec.outer_radius < 1e-12 {
        return Err(Error::Mesh(format!(
            "refusing epsilon = {}: gap below 1e-12 of outer_radius, node coordinates would collapse",
            spec.epsilon
        )));
    }
    if g.theta <= 0.0 || g.n_layers == 0 || g.h_max <= 0.0 || g.h_min <= 0.0 || g.h_min > g.h_max {
        return Err(Error::Precondition("invalid grading parameters".into()));
    }
    let cols = strip_columns(spec, g)?;
    let n = cols.len();
    let last_w = cols[n - 1] - cols[n - 2];
    let r1 = spec.r1();
    let shapes = [spec.inclusion_shape(Side::Top), spec.inclusion_shape(Side::Bottom)];
    let size = SizeField {
        h_max: g.h_max,
        h_min: g.h_min,
        grade: g.grade,
        strip_end: shapes.iter().map(|s| ([r1, 0.5 * (s.half_eps + s.graph(r1))], last_w)).collect(),
        inclusion_cap: (0.15 * spec.closure_radius).min(g.h_max),
        centers: shapes.iter().map(|s| [0.0, s.center_y()]).collect(),
        rho: spec.closure_radius,
    };
    let axis = distribute(|t| [t, 0.0], r1, spec.outer_radius, |p| BOUNDARY_FRACTION * size.at(p), [r1, 0.0], [spec.outer_radius, 0.0]);
    let top = half(spec, g, Side::Top, &cols, &axis, &size, filled)?;
    let bottom = if spec.profile.symmetric {
        None
    } else {
        Some(half(spec, g, Side::Bottom, &cols, &axis, &size, filled)?)
    };
    let id = |t: BoundaryTag| t;
    let to2 = |t: BoundaryTag| if t == BoundaryTag::Inc1 { BoundaryTag::Inc2 } else { t };
    let lower = bottom.as_ref().unwrap_or(&top);
    let mut asm = Assembler::default();
    let quads = |p: &Piece, lowp: &Piece| {
        [
            reflect(p, false, false, &id),
            reflect(p, true, false, &id),
            reflect(lowp, false, true, &to2),
            reflect(lowp, true, true, &to2),
        ]
    };
    for piece in quads(&top.matrix, &lower.matrix) {
        asm.add(&piece, true);
    }
    if filled {
        let ti = top.inclusion.as_ref().unwrap();
        let li = lower.inclusion.as_ref().unwrap();
        let mut qs = quads(ti, li);
        qs[2].region = Region::Inclusion2;
        qs[3].region = Region::Inclusion2;
        for piece in qs {
            asm.add(&piece, false);
        }
    }
    let mut mesh = Mesh {
        nodes: asm.nodes,
        elements: asm.elements,
        regions: asm.regions,
        boundary_edges: asm.bedges,
        symmetry_map: None,
        spec: Some(*spec),
    };
    if mesh.elements.len() > g.max_elements {
        return Err(Error::Mesh(format!(
            "{} elements exceed max_elements = {}",
            mesh.elements.len(),
            g.max_elements
        )));
    }
    if spec.profile.symmetric {
        mesh.symmetry_map = mesh.snap_mirror_pairs();
        if mesh.symmetry_map.is_none() {
            return Err(Error::Mesh("symmetric spec produced a mesh without mirror partners".into()));
        }
    }
    mesh.validate(g.angle_floor)?;
    Ok(mesh)
}

/// Graded six-node mesh of the matrix region between the disk boundary and the inclusions.
pub fn generate(spec: &DomainSpec, grading: &GradingParams) -> Result<Mesh> {
    build(spec, grading, false)
}

/// Mesh of the whole disk: the matrix mesh (same node and element order) followed by
/// inclusion-interior elements. Inclusion boundary edges stay tagged as interfaces.
pub fn generate_filled(spec: &DomainSpec, grading: &GradingParams) -> Result<Mesh> {
    build(spec, grading, true)
}
