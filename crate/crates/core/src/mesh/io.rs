use super::{BoundaryEdge, Mesh, Region};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, DomainSpec};
use std::fmt::Write;

/// Plain-text `gapmesh v1` serialization.
///
/// ```text
/// gapmesh v1
/// geometry <k>        followed by k key=value lines (k = 0 when absent)
/// nodes <n>           followed by n lines `x y`
/// elements <m>        followed by m lines `n0 .. n5 region`
/// boundary <b>        followed by b lines `a b mid tag`
/// symmetry <s>        followed by s lines, one mirror index each (s = 0 when absent)
/// ```
pub fn write_gapmesh(mesh: &Mesh) -> String {
    let mut s = String::from("gapmesh v1\n");
    match &mesh.spec {
        Some(spec) => {
            let kv = spec.to_kv();
            let _ = writeln!(s, "geometry {}", kv.lines().count());
            s.push_str(&kv);
        }
        None => s.push_str("geometry 0\n"),
    }
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    let _ = writeln!(s, "elements {}", mesh.elements.len());
    for (e, r) in mesh.elements.iter().zip(&mesh.regions) {
        let _ = writeln!(s, "{} {} {} {} {} {} {}", e[0], e[1], e[2], e[3], e[4], e[5], r.name());
    }
    let _ = writeln!(s, "boundary {}", mesh.boundary_edges.len());
    for b in &mesh.boundary_edges {
        let _ = writeln!(s, "{} {} {} {}", b.nodes[0], b.nodes[1], b.nodes[2], b.tag.name());
    }
    match &mesh.symmetry_map {
        Some(m) => {
            let _ = writeln!(s, "symmetry {}", m.len());
            for j in m {
                let _ = writeln!(s, "{j}");
            }
        }
        None => s.push_str("symmetry 0\n"),
    }
    s
}

pub fn read_gapmesh(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: &str| Error::Format(format!("gapmesh line {}: {msg}", line + 1));
    let (i0, header) = lines.next().ok_or_else(|| bad(0, "empty file"))?;
    if header.trim() != "gapmesh v1" {
        return Err(bad(i0, "expected header `gapmesh v1`"));
    }
    let mut block = |name: &str| -> Result<Vec<(usize, String)>> {
        let (i, l) = lines.next().ok_or_else(|| bad(0, &format!("missing `{name}` block")))?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(name) {
            return Err(bad(i, &format!("expected `{name} <count>`")));
        }
        let n: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad(i, "bad count"))?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let (j, l) = lines.next().ok_or_else(|| bad(i, &format!("truncated `{name}` block")))?;
            out.push((j, l.to_string()));
        }
        Ok(out)
    };
    let geo = block("geometry")?;
    let spec = if geo.is_empty() {
        None
    } else {
        let kv: String = geo.iter().map(|(_, l)| format!("{l}\n")).collect();
        Some(DomainSpec::from_kv(&kv)?)
    };
    let nums = |i: usize, l: &str, n: usize| -> Result<Vec<String>> {
        let v: Vec<String> = l.split_whitespace().map(String::from).collect();
        if v.len() != n {
            return Err(bad(i, &format!("expected {n} fields")));
        }
        Ok(v)
    };
    let mut nodes = Vec::new();
    for (i, l) in block("nodes")? {
        let v = nums(i, &l, 2)?;
        let x: f64 = v[0].parse().map_err(|_| bad(i, "bad coordinate"))?;
        let y: f64 = v[1].parse().map_err(|_| bad(i, "bad coordinate"))?;
        nodes.push([x, y]);
    }
    let mut elements = Vec::new();
    let mut regions = Vec::new();
    for (i, l) in block("elements")? {
        let v = nums(i, &l, 7)?;
        let mut e = [0usize; 6];
        for k in 0..6 {
            e[k] = v[k].parse().map_err(|_| bad(i, "bad node index"))?;
        }
        elements.push(e);
        regions.push(Region::parse(&v[6]).ok_or_else(|| bad(i, "bad region"))?);
    }
    let mut boundary_edges = Vec::new();
    for (i, l) in block("boundary")? {
        let v = nums(i, &l, 4)?;
        let mut b = [0usize; 3];
        for k in 0..3 {
            b[k] = v[k].parse().map_err(|_| bad(i, "bad node index"))?;
        }
        let tag = BoundaryTag::parse(&v[3]).ok_or_else(|| bad(i, "bad tag"))?;
        boundary_edges.push(BoundaryEdge { nodes: b, tag });
    }
    let sym = block("symmetry")?;
    let symmetry_map = if sym.is_empty() {
        None
    } else {
        Some(
            sym.iter()
                .map(|(i, l)| l.trim().parse().map_err(|_| bad(*i, "bad symmetry index")))
                .collect::<Result<Vec<usize>>>()?,
        )
    };
    Ok(Mesh { nodes, elements, regions, boundary_edges, symmetry_map, spec })
}

/// SVG wireframe of the straight-edge skeleton within the window `[x0, x1] x [y0, y1]`.
pub fn to_svg(mesh: &Mesh, window: Option<[f64; 4]>) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &mesh.nodes {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    if let Some(w) = window {
        (x0, x1, y0, y1) = (w[0], w[1], w[2], w[3]);
    }
    let size = 800.0;
    let scale = size / (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let tx = |x: f64| (x - x0) * scale;
    let ty = |y: f64| size - (y - y0) * scale;
    let inside = |p: [f64; 2]| p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    );
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (el, r) in mesh.elements.iter().zip(&mesh.regions) {
        let p: Vec<[f64; 2]> = [el[0], el[3], el[1], el[4], el[2], el[5]].iter().map(|&i| mesh.nodes[i]).collect();
        if !p.iter().any(|q| inside(*q)) {
            continue;
        }
        let color = match r {
            Region::Matrix => "#1f4e79",
            _ => "#a33",
        };
        let pts: Vec<String> = p.iter().map(|q| format!("{:.3},{:.3}", tx(q[0]), ty(q[1]))).collect();
        let _ = writeln!(
            s,
            "<polygon points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"0.3\"/>",
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, GradingParams};

    #[test]
    fn gapmesh_roundtrip() {
        let spec = DomainSpec::symmetric_default(1e-2, 1.0, 0.5).unwrap();
        let g = GradingParams { theta: 0.5, h_max: 1.0, ..GradingParams::defaults(4.0) };
        let m = generate(&spec, &g).unwrap();
        let text = write_gapmesh(&m);
        let back = read_gapmesh(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash(), m.hash());
        assert!(read_gapmesh("gapmesh v2\n").is_err());
        let svg = to_svg(&m, None);
        assert!(svg.starts_with("<svg") && svg.contains("polygon"));
    }
}
