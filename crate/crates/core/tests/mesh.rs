use gaplab::auxiliary::in_gap_strip;
use gaplab::geometry::{BoundaryTag, DomainSpec};
use gaplab::mesh::{generate, read_gapmesh, write_gapmesh, GradingParams, Mesh};

fn default_mesh(eps: f64) -> (DomainSpec, Mesh) {
    let s = DomainSpec::symmetric_default(eps, 1.0, 1.0).unwrap();
    let m = generate(&s, &GradingParams::defaults(s.outer_radius)).unwrap();
    (s, m)
}

fn strip_elements(s: &DomainSpec, m: &Mesh) -> usize {
    (0..m.elements.len())
        .filter(|&e| {
            let v = m.vertices(e);
            let c = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
            in_gap_strip(s, c, s.r1())
        })
        .count()
}

#[test]
fn gap_is_resolved_by_several_layers() {
    for eps in [1e-2, 1e-3] {
        let (_, m) = default_mesh(eps);
        let q = m.quality_report();
        assert!(q.gap_layer_count >= 4, "eps {eps}: {} layers", q.gap_layer_count);
        assert!(q.min_angle >= 15.0);
        m.validate(15.0).unwrap();
    }
}

#[test]
fn symmetric_mesh_has_mirror_nodes() {
    let (_, m) = default_mesh(5e-3);
    let map = m.symmetry_map.as_ref().expect("symmetric spec yields a mirror map");
    for (i, &j) in map.iter().enumerate() {
        let (p, q) = (m.nodes[i], m.nodes[j]);
        assert!((p[0] - q[0]).abs() <= 1e-12 && (p[1] + q[1]).abs() <= 1e-12, "{p:?} vs {q:?}");
    }
}

/// Columns are spaced by a fixed fraction of the local gap width, so for gamma = 1 the strip
/// count follows `int dx / (eps + x^2) ~ eps^(-1/2)`: halving eps multiplies it by about 1.4-1.5.
#[test]
fn strip_elements_grow_when_eps_halves() {
    let mut prev: Option<usize> = None;
    for eps in [1e-2, 5e-3, 2.5e-3] {
        let (s, m) = default_mesh(eps);
        let n = strip_elements(&s, &m);
        if let Some(p) = prev {
            let r = n as f64 / p as f64;
            assert!((1.3..2.1).contains(&r), "eps {eps}: ratio {r}");
        }
        prev = Some(n);
    }
}

#[test]
fn uniform_refinement_splits_everything() {
    let (_, m) = default_mesh(1e-2);
    let r = m.refine_uniform();
    assert_eq!(r.elements.len(), 4 * m.elements.len());
    for tag in [BoundaryTag::Inc1, BoundaryTag::Inc2, BoundaryTag::Outer] {
        assert_eq!(r.tagged_nodes(tag).len(), 2 * m.tagged_nodes(tag).len(), "{tag:?}");
    }
    r.validate(15.0).unwrap();
    let (q0, q1) = (m.quality_report(), r.quality_report());
    assert!(q1.min_angle >= q0.min_angle - 1.0, "{} -> {}", q0.min_angle, q1.min_angle);
    assert_eq!(q1.gap_layer_count, 2 * q0.gap_layer_count);
    let s = m.spec.unwrap();
    for tag in [BoundaryTag::Inc1, BoundaryTag::Inc2] {
        for n in r.tagged_nodes(tag) {
            assert!(s.curve_residual(tag, r.nodes[n]) <= 1e-10);
        }
    }
}

#[test]
fn mesh_file_roundtrip_is_exact() {
    let (_, m) = default_mesh(1e-2);
    let text = write_gapmesh(&m);
    assert!(text.starts_with("gapmesh v1"));
    let back = read_gapmesh(&text).unwrap();
    assert_eq!(back.nodes, m.nodes);
    assert_eq!(back.elements, m.elements);
    assert_eq!(back.hash(), m.hash());
}

#[test]
fn generation_is_deterministic() {
    let (_, a) = default_mesh(2.5e-3);
    let (_, b) = default_mesh(2.5e-3);
    assert_eq!(a.hash(), b.hash());
}
