//! Quadratic triangle meshes of the perforated disk, with validation,
//! quality metrics and uniform refinement.

mod generate;
mod io;

pub use generate::{generate, generate_filled, GradingParams};
pub use io::{read_gapmesh, to_svg, write_gapmesh};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, DomainSpec};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Matrix,
    Inclusion1,
    Inclusion2,
}

impl Region {
    pub fn name(&self) -> &'static str {
        match self {
            Region::Matrix => "matrix",
            Region::Inclusion1 => "inc1",
            Region::Inclusion2 => "inc2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "matrix" => Some(Region::Matrix),
            "inc1" => Some(Region::Inclusion1),
            "inc2" => Some(Region::Inclusion2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 3],
    pub tag: BoundaryTag,
}

/// Six-node triangles: three counter-clockwise vertices, then mid-nodes of edges 01, 12, 20.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 6]>,
    pub regions: Vec<Region>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// `symmetry_map[i]` is the node at the mirror image of node `i` through `x2 = 0`.
    pub symmetry_map: Option<Vec<usize>>,
    pub spec: Option<DomainSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub min_angle: f64,
    pub max_aspect: f64,
    pub element_count: usize,
    pub gap_layer_count: usize,
}

pub(crate) const EDGE_LOCAL: [(usize, usize, usize); 3] = [(0, 1, 3), (1, 2, 4), (2, 0, 5)];

pub(crate) fn corner_angles(p: [[f64; 2]; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let a = p[k];
        let b = p[(k + 1) % 3];
        let c = p[(k + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let w = [c[0] - a[0], c[1] - a[1]];
        let cross = u[0] * w[1] - u[1] * w[0];
        let dot = u[0] * w[0] + u[1] * w[1];
        out[k] = cross.abs().atan2(dot).to_degrees();
    }
    out
}

fn signed_area(p: [[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

pub(crate) fn key_of(p: [f64; 2]) -> (u64, u64) {
    ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits())
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn vertices(&self, e: usize) -> [[f64; 2]; 3] {
        let el = &self.elements[e];
        [self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]]]
    }

    /// Jacobian determinant of the quadratic map at reference point `(xi, eta)`.
    pub fn jacobian_det(&self, e: usize, xi: f64, eta: f64) -> f64 {
        let el = &self.elements[e];
        let d = crate::fem::shape_derivs(xi, eta);
        let (mut j00, mut j01, mut j10, mut j11) = (0.0, 0.0, 0.0, 0.0);
        for a in 0..6 {
            let p = self.nodes[el[a]];
            j00 += d[a][0] * p[0];
            j01 += d[a][1] * p[0];
            j10 += d[a][0] * p[1];
            j11 += d[a][1] * p[1];
        }
        j00 * j11 - j01 * j10
    }

    /// Map from node to true when it is a triangle corner.
    pub fn vertex_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.nodes.len()];
        for el in &self.elements {
            for &v in &el[..3] {
                m[v] = true;
            }
        }
        m
    }

    /// Nodes on tagged edges, grouped per tag.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self.boundary_edges.iter().filter(|e| e.tag == tag).flat_map(|e| e.nodes).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Deterministic SHA-256 digest of node coordinates and connectivity.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for p in &self.nodes {
            h.update(p[0].to_le_bytes());
            h.update(p[1].to_le_bytes());
        }
        for (el, r) in self.elements.iter().zip(&self.regions) {
            for &n in el {
                h.update((n as u64).to_le_bytes());
            }
            h.update(r.name().as_bytes());
        }
        for b in &self.boundary_edges {
            for &n in &b.nodes {
                h.update((n as u64).to_le_bytes());
            }
            h.update(b.tag.name().as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Check conformity, orientation, curve fidelity and the angle floor.
    pub fn validate(&self, angle_floor_deg: f64) -> Result<()> {
        let n = self.nodes.len();
        if self.regions.len() != self.elements.len() {
            return Err(Error::Mesh("region list length differs from element count".into()));
        }
        let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (e, el) in self.elements.iter().enumerate() {
            if el.iter().any(|&i| i >= n) {
                return Err(Error::Mesh(format!("element {e} references a missing node")));
            }
            for (a, b, m) in EDGE_LOCAL {
                let key = (el[a].min(el[b]), el[a].max(el[b]));
                edges.entry(key).or_default().push((e, el[m]));
            }
        }
        let tagged: HashMap<(usize, usize), &BoundaryEdge> = self
            .boundary_edges
            .iter()
            .map(|b| ((b.nodes[0].min(b.nodes[1]), b.nodes[0].max(b.nodes[1])), b))
            .collect();
        for (key, owners) in &edges {
            if owners.len() > 2 {
                return Err(Error::Mesh(format!("edge {key:?} shared by {} elements", owners.len())));
            }
            if owners.len() == 2 && owners[0].1 != owners[1].1 {
                return Err(Error::Mesh(format!("edge {key:?} has inconsistent mid-nodes")));
            }
            match (owners.len(), tagged.get(key)) {
                (1, None) => {
                    return Err(Error::Mesh(format!(
                        "untagged boundary edge {key:?} from {:?} to {:?}",
                        self.nodes[key.0], self.nodes[key.1]
                    )))
                }
                (2, Some(_)) if self.regions[owners[0].0] == self.regions[owners[1].0] => {
                    return Err(Error::Mesh(format!("tagged edge {key:?} is interior to one region")))
                }
                (_, Some(b)) if b.nodes[2] != owners[0].1 => {
                    return Err(Error::Mesh(format!("tagged edge {key:?} mid-node mismatch")))
                }
                _ => {}
            }
        }
        if tagged.len() != self.boundary_edges.len() || tagged.keys().any(|k| !edges.contains_key(k)) {
            return Err(Error::Mesh("boundary edge list does not match element edges".into()));
        }
        let probe = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5), (1.0 / 3.0, 1.0 / 3.0)];
        let mut worst = (f64::INFINITY, 0usize);
        for e in 0..self.elements.len() {
            let v = self.vertices(e);
            if signed_area(v) <= 0.0 {
                return Err(Error::Mesh(format!("element {e} has non-positive area, vertices {v:?}")));
            }
            for (xi, eta) in probe {
                if self.jacobian_det(e, xi, eta) <= 0.0 {
                    return Err(Error::Mesh(format!("element {e} has a folded quadratic map, vertices {v:?}")));
                }
            }
            let a = corner_angles(v).into_iter().fold(f64::INFINITY, f64::min);
            if a < worst.0 {
                worst = (a, e);
            }
        }
        if worst.0 < angle_floor_deg {
            return Err(Error::Mesh(format!(
                "minimum angle {:.3} deg below floor {angle_floor_deg} at element {}, vertices {:?}",
                worst.0,
                worst.1,
                self.vertices(worst.1)
            )));
        }
        if let Some(spec) = &self.spec {
            let tol = 1e-12 * spec.outer_radius;
            for b in &self.boundary_edges {
                for &i in &b.nodes {
                    let r = spec.curve_residual(b.tag, self.nodes[i]);
                    if r > tol {
                        return Err(Error::Mesh(format!(
                            "node {i} at {:?} is {r:e} off its {} curve",
                            self.nodes[i],
                            b.tag.name()
                        )));
                    }
                }
            }
        }
        if let Some(map) = &self.symmetry_map {
            if map.len() != n {
                return Err(Error::Mesh("symmetry map has wrong length".into()));
            }
            for (i, &j) in map.iter().enumerate() {
                let (p, q) = (self.nodes[i], self.nodes[j]);
                if p[0] != q[0] || p[1] != -q[1] {
                    return Err(Error::Mesh(format!("symmetry map pairs {p:?} with {q:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn quality_report(&self) -> QualityReport {
        let mut min_angle = f64::INFINITY;
        let mut max_aspect: f64 = 0.0;
        for e in 0..self.elements.len() {
            let v = self.vertices(e);
            min_angle = min_angle.min(corner_angles(v).into_iter().fold(f64::INFINITY, f64::min));
            let l = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            let (a, b, c) = (l(v[0], v[1]), l(v[1], v[2]), l(v[2], v[0]));
            let area = signed_area(v).abs();
            let inradius = 2.0 * area / (a + b + c);
            // normalised so that the equilateral triangle has aspect 1
            let aspect = a.max(b).max(c) / (2.0 * 3f64.sqrt() * inradius);
            max_aspect = max_aspect.max(aspect);
        }
        QualityReport {
            min_angle,
            max_aspect,
            element_count: self.elements.len(),
            gap_layer_count: self.gap_layer_count(),
        }
    }

    /// Number of element layers crossed by the segment between the two gap points.
    pub fn gap_layer_count(&self) -> usize {
        let Some(spec) = &self.spec else { return 0 };
        let half = 0.5 * spec.epsilon;
        let tol = 1e-12 * spec.outer_radius;
        let mask = self.vertex_mask();
        let count = self
            .nodes
            .iter()
            .zip(&mask)
            .filter(|(p, &is_v)| is_v && p[0].abs() <= tol && p[1].abs() <= half + tol)
            .count();
        count.saturating_sub(1)
    }

    /// Split every triangle in four through its quadratic map; curve nodes are re-projected.
    pub fn refine_uniform(&self) -> Mesh {
        let mut nodes = self.nodes.clone();
        let tag_of: HashMap<(usize, usize), BoundaryTag> = self
            .boundary_edges
            .iter()
            .map(|b| ((b.nodes[0].min(b.nodes[1]), b.nodes[0].max(b.nodes[1])), b.tag))
            .collect();
        // per parent edge (lo, hi): new nodes near lo and near hi
        let mut edge_nodes: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut elements = Vec::with_capacity(4 * self.elements.len());
        let mut regions = Vec::with_capacity(4 * self.elements.len());
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        let project = |tag: Option<&BoundaryTag>, p: [f64; 2]| match (tag, &self.spec) {
            (Some(t), Some(s)) => s.project(*t, p),
            _ => p,
        };
        for (e, el) in self.elements.iter().enumerate() {
            let mut q = [0usize; 6];
            for (k, (a, b, m)) in EDGE_LOCAL.into_iter().enumerate() {
                let (ga, gb) = (el[a], el[b]);
                let key = (ga.min(gb), ga.max(gb));
                let (near_lo, near_hi) = *edge_nodes.entry(key).or_insert_with(|| {
                    let (pl, ph, pm) = (self.nodes[key.0], self.nodes[key.1], self.nodes[el[m]]);
                    let trace = |t: f64| {
                        let (c0, c1, c2) = ((1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0));
                        [c0 * pl[0] + c1 * pm[0] + c2 * ph[0], c0 * pl[1] + c1 * pm[1] + c2 * ph[1]]
                    };
                    let tag = tag_of.get(&key);
                    let i0 = nodes.len();
                    nodes.push(project(tag, trace(0.25)));
                    nodes.push(project(tag, trace(0.75)));
                    if let Some(t) = tag {
                        boundary_edges.push(BoundaryEdge { nodes: [key.0, el[m], i0], tag: *t });
                        boundary_edges.push(BoundaryEdge { nodes: [el[m], key.1, i0 + 1], tag: *t });
                    }
                    (i0, i0 + 1)
                });
                // q[2k] is the node near vertex a, q[2k+1] near vertex b
                if ga < gb {
                    q[2 * k] = near_lo;
                    q[2 * k + 1] = near_hi;
                } else {
                    q[2 * k] = near_hi;
                    q[2 * k + 1] = near_lo;
                }
            }
            // interior mid-nodes at reference points of the three inner edges
            let map = |xi: f64, eta: f64| {
                let n = crate::fem::shape_values(xi, eta);
                let mut p = [0.0, 0.0];
                for a in 0..6 {
                    p[0] += n[a] * self.nodes[el[a]][0];
                    p[1] += n[a] * self.nodes[el[a]][1];
                }
                p
            };
            let base = nodes.len();
            nodes.push(map(0.25, 0.25)); // between m01 and m20
            nodes.push(map(0.5, 0.25)); // between m01 and m12
            nodes.push(map(0.25, 0.5)); // between m12 and m20
            let (v0, v1, v2, m01, m12, m20) = (el[0], el[1], el[2], el[3], el[4], el[5]);
            let (i_a, i_b, i_c) = (base, base + 1, base + 2);
            // q: [01 near v0, 01 near v1, 12 near v1, 12 near v2, 20 near v2, 20 near v0]
            elements.push([v0, m01, m20, q[0], i_a, q[5]]);
            elements.push([m01, v1, m12, q[1], q[2], i_b]);
            elements.push([m20, m12, v2, i_c, q[3], q[4]]);
            elements.push([m01, m12, m20, i_b, i_c, i_a]);
            for _ in 0..4 {
                regions.push(self.regions[e]);
            }
        }
        let mut out = Mesh { nodes, elements, regions, boundary_edges, symmetry_map: None, spec: self.spec };
        if self.symmetry_map.is_some() {
            out.symmetry_map = out.snap_mirror_pairs();
        }
        out
    }

    /// Pair every node with its mirror image through `x2 = 0` (tolerance match),
    /// then make the pairs exact. Returns `None` if some node has no partner.
    pub(crate) fn snap_mirror_pairs(&mut self) -> Option<Vec<usize>> {
        let scale = self.spec.map(|s| s.outer_radius).unwrap_or(1.0);
        let tol = 1e-11 * scale;
        let cell = 1e-9 * scale;
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let cell_of = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
        for (i, p) in self.nodes.iter().enumerate() {
            grid.entry(cell_of(*p)).or_default().push(i);
        }
        let mut map = vec![usize::MAX; self.nodes.len()];
        for i in 0..self.nodes.len() {
            let p = self.nodes[i];
            let target = [p[0], -p[1]];
            let c = cell_of(target);
            let mut best = (f64::INFINITY, usize::MAX);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = grid.get(&(c.0 + dx, c.1 + dy)) {
                        for &j in list {
                            let q = self.nodes[j];
                            let d = (q[0] - target[0]).abs().max((q[1] - target[1]).abs());
                            if d < best.0 {
                                best = (d, j);
                            }
                        }
                    }
                }
            }
            if best.0 > tol {
                return None;
            }
            map[i] = best.1;
        }
        for i in 0..map.len() {
            let j = map[i];
            if map[j] != i {
                return None;
            }
            if i == j {
                self.nodes[i][1] = 0.0;
            } else if i < j {
                let p = self.nodes[i];
                self.nodes[j] = [p[0], -p[1] + 0.0];
            }
        }
        Some(map)
    }

    /// Node indices of elements in `region`, in order of first appearance.
    pub fn region_nodes(&self, region: Region) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        for (el, r) in self.elements.iter().zip(&self.regions) {
            if *r == region {
                for &i in el {
                    if !seen[i] {
                        seen[i] = true;
                        out.push(i);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    pub(crate) fn unit_square(n: usize) -> Mesh {
        // structured P2 mesh of [0,1]^2 with all outer edges tagged Outer
        let m = 2 * n + 1;
        let idx = |i: usize, j: usize| j * m + i;
        let mut nodes = Vec::new();
        for j in 0..m {
            for i in 0..m {
                nodes.push([i as f64 / (2 * n) as f64, j as f64 / (2 * n) as f64]);
            }
        }
        let mut elements = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let (i2, j2) = (2 * i, 2 * j);
                elements.push([
                    idx(i2, j2),
                    idx(i2 + 2, j2),
                    idx(i2 + 2, j2 + 2),
                    idx(i2 + 1, j2),
                    idx(i2 + 2, j2 + 1),
                    idx(i2 + 1, j2 + 1),
                ]);
                elements.push([
                    idx(i2, j2),
                    idx(i2 + 2, j2 + 2),
                    idx(i2, j2 + 2),
                    idx(i2 + 1, j2 + 1),
                    idx(i2 + 1, j2 + 2),
                    idx(i2, j2 + 1),
                ]);
            }
        }
        let mut boundary_edges = Vec::new();
        for k in 0..n {
            let k2 = 2 * k;
            for nodes3 in [
                [idx(k2, 0), idx(k2 + 2, 0), idx(k2 + 1, 0)],
                [idx(k2, 2 * n), idx(k2 + 2, 2 * n), idx(k2 + 1, 2 * n)],
                [idx(0, k2), idx(0, k2 + 2), idx(0, k2 + 1)],
                [idx(2 * n, k2), idx(2 * n, k2 + 2), idx(2 * n, k2 + 1)],
            ] {
                boundary_edges.push(BoundaryEdge { nodes: nodes3, tag: BoundaryTag::Outer });
            }
        }
        let regions = vec![Region::Matrix; elements.len()];
        Mesh { nodes, elements, regions, boundary_edges, symmetry_map: None, spec: None }
    }
}
