//! CSV records, SVG plots and atomic file output.

use crate::error::{Error, Result};
use crate::experiments::{Measures, MeshStats, SweepRecord};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Write `bytes` to a temporary sibling and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Format(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

const MEASURE_COLUMNS: [&str; 23] = [
    "max_grad_segment",
    "argmax_x1",
    "c_diff1",
    "c_diff2",
    "c_diff3",
    "a11_11",
    "a11_22",
    "a11_33",
    "a11_13",
    "a12_33",
    "b_tilde1_1",
    "b_tilde1_2",
    "b_tilde1_3",
    "bound_ratio",
    "outside_sup",
    "w11_ratio",
    "w12_ratio",
    "w13_sup",
    "traction_balance",
    "zero_pattern",
    "defect",
    "solve_residual",
    "has_refined",
];

fn measure_values(m: &Measures, present: bool) -> [f64; 23] {
    [
        m.max_grad_segment,
        m.argmax_x1,
        m.c_diff[0],
        m.c_diff[1],
        m.c_diff[2],
        m.a_diag[0],
        m.a_diag[1],
        m.a_diag[2],
        m.a_cross[0],
        m.a_cross[1],
        m.b_tilde1[0],
        m.b_tilde1[1],
        m.b_tilde1[2],
        m.bound_ratio,
        m.outside_sup,
        m.w_ratio[0],
        m.w_ratio[1],
        m.w_ratio[2],
        m.traction_balance,
        m.zero_pattern,
        m.defect,
        m.solve_residual,
        if present { 1.0 } else { 0.0 },
    ]
}

fn measure_from(v: &[f64]) -> Measures {
    Measures {
        max_grad_segment: v[0],
        argmax_x1: v[1],
        c_diff: [v[2], v[3], v[4]],
        a_diag: [v[5], v[6], v[7]],
        a_cross: [v[8], v[9]],
        b_tilde1: [v[10], v[11], v[12]],
        bound_ratio: v[13],
        outside_sup: v[14],
        w_ratio: [v[15], v[16], v[17]],
        traction_balance: v[18],
        zero_pattern: v[19],
        defect: v[20],
        solve_residual: v[21],
    }
}

/// Column names in output order; the set never depends on the configuration.
pub fn csv_columns() -> Vec<String> {
    let mut c: Vec<String> = ["epsilon", "gamma", "kappa", "nodes", "elements", "gap_layers", "min_angle"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    c.extend(MEASURE_COLUMNS.iter().map(|s| s.to_string()));
    c.extend(MEASURE_COLUMNS.iter().map(|s| format!("fine_{s}")));
    for r in 0..6 {
        for k in 0..6 {
            c.push(format!("A{r}{k}"));
        }
    }
    c.extend((0..6).map(|k| format!("B{k}")));
    c.extend((0..6).map(|k| format!("C{k}")));
    c.push("status".into());
    c
}

fn num(x: f64) -> String {
    format!("{x:.17e}")
}

/// Sweep records as CSV with a `#` header describing the columns.
pub fn write_csv(records: &[SweepRecord]) -> String {
    let cols = csv_columns();
    let mut s = String::new();
    s.push_str("# gaplab sweep v1\n");
    s.push_str("# one row per epsilon, in sweep order; fine_* columns repeat the measurements on one uniform refinement\n");
    s.push_str("# c_diffk = C_1^k - C_2^k; a11_kl and a12_33 are energy-matrix entries; A rc is the 6x6 matrix, B the loads, C the constants\n");
    s.push_str("# max_grad_segment is max |grad u| next to the segment x1 = 0 between the inclusions; status is ok or the failure message\n");
    s.push_str(&cols.join(","));
    s.push('\n');
    for r in records {
        let mut row: Vec<String> = vec![
            num(r.epsilon),
            num(r.gamma),
            num(r.kappa),
            r.mesh_stats.nodes.to_string(),
            r.mesh_stats.elements.to_string(),
            r.mesh_stats.gap_layers.to_string(),
            num(r.mesh_stats.min_angle),
        ];
        row.extend(measure_values(&r.base, true).iter().map(|v| num(*v)));
        let fine = r.refined.unwrap_or_default();
        row.extend(measure_values(&fine, r.refined.is_some()).iter().map(|v| num(*v)));
        row.extend(r.a.iter().map(|v| num(*v)));
        row.extend(r.b.iter().map(|v| num(*v)));
        row.extend(r.c.iter().map(|v| num(*v)));
        row.push(match &r.failure {
            None => "ok".into(),
            Some(m) => m.replace([',', '\n'], ";"),
        });
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Parse a CSV produced by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let cols = csv_columns();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
    if header.split(',').map(str::to_string).collect::<Vec<_>>() != cols {
        return Err(Error::Format("CSV columns do not match the sweep layout".into()));
    }
    let nm = MEASURE_COLUMNS.len();
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.splitn(cols.len(), ',').collect();
        if f.len() != cols.len() {
            return Err(Error::Format(format!("row {} has {} fields, expected {}", n + 1, f.len(), cols.len())));
        }
        let v = |i: usize| -> Result<f64> {
            f[i].parse::<f64>().map_err(|_| Error::Format(format!("row {}: bad number `{}` in {}", n + 1, f[i], cols[i])))
        };
        let u = |i: usize| -> Result<usize> {
            f[i].parse::<usize>().map_err(|_| Error::Format(format!("row {}: bad integer `{}` in {}", n + 1, f[i], cols[i])))
        };
        let base: Vec<f64> = (7..7 + nm).map(v).collect::<Result<_>>()?;
        let fine: Vec<f64> = (7 + nm..7 + 2 * nm).map(v).collect::<Result<_>>()?;
        let off = 7 + 2 * nm;
        let mut a = [0.0; 36];
        for (k, x) in a.iter_mut().enumerate() {
            *x = v(off + k)?;
        }
        let mut b = [0.0; 6];
        let mut c = [0.0; 6];
        for k in 0..6 {
            b[k] = v(off + 36 + k)?;
            c[k] = v(off + 42 + k)?;
        }
        let status = f[cols.len() - 1];
        out.push(SweepRecord {
            epsilon: v(0)?,
            gamma: v(1)?,
            kappa: v(2)?,
            base: measure_from(&base),
            refined: (fine[nm - 1] != 0.0).then(|| measure_from(&fine)),
            mesh_stats: MeshStats { nodes: u(3)?, elements: u(4)?, gap_layers: u(5)?, min_angle: v(6)? },
            a,
            b,
            c,
            failure: (status != "ok").then(|| status.to_string()),
        });
    }
    Ok(out)
}

/// One series of an x-y plot.
pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Draw as a line instead of markers.
    pub line: bool,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal SVG plot; `log` selects log10 axes on both sides.
pub fn svg_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log: bool) -> String {
    let (w, h, m) = (640.0, 440.0, 60.0);
    let tr = |v: f64| if log { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|p| !log || (p.0 > 0.0 && p.1 > 0.0))
        .map(|p| (tr(p.0), tr(p.1)))
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (tr(x) - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (tr(y) - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, w / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let px = m + (w - 2.0 * m) * k as f64 / 4.0;
        let py = h - m - (h - 2.0 * m) * k as f64 / 4.0;
        let lx = if log { format!("1e{fx:.2}") } else { format!("{fx:.3e}") };
        let ly = if log { format!("1e{fy:.2}") } else { format!("{fy:.3e}") };
        let _ = writeln!(s, r#"<text x="{px:.1}" y="{}" text-anchor="middle" font-size="11">{lx}</text>"#, h - m + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{py:.1}" text-anchor="end" font-size="11">{ly}</text>"#, m - 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, h - 16.0, esc(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        esc(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let col = PALETTE[i % PALETTE.len()];
        let good: Vec<(f64, f64)> =
            ser.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite() && (!log || (p.0 > 0.0 && p.1 > 0.0))).collect();
        if ser.line {
            let path: Vec<String> = good.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{col}" stroke-width="1.5"/>"#, path.join(" "));
        } else {
            for p in &good {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{col}"/>"#, sx(p.0), sy(p.1));
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{col}">{}</text>"#,
            m + 10.0,
            m + 16.0 + 15.0 * i as f64,
            esc(ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Colour map of scalar samples `(x, y, value)` drawn as small squares over `window`.
pub fn svg_heatmap(title: &str, samples: &[([f64; 2], f64)], window: [f64; 4]) -> String {
    let (w, h, m) = (640.0, 440.0, 40.0);
    let [xa, xb, ya, yb] = window;
    let vmax = samples.iter().map(|s| s.1).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{} (max {:.3e})</text>"#, w / 2.0, esc(title), vmax);
    for (p, v) in samples {
        if p[0] < xa || p[0] > xb || p[1] < ya || p[1] > yb {
            continue;
        }
        let px = m + (p[0] - xa) / (xb - xa) * (w - 2.0 * m);
        let py = h - m - (p[1] - ya) / (yb - ya) * (h - 2.0 * m);
        let t = (v / vmax).clamp(0.0, 1.0);
        let (r, g, b) = ((255.0 * t) as u8, (80.0 * (1.0 - t)) as u8, (255.0 * (1.0 - t)) as u8);
        let _ = writeln!(s, r#"<rect x="{:.2}" y="{:.2}" width="3" height="3" fill="rgb({r},{g},{b})"/>"#, px - 1.5, py - 1.5);
    }
    s.push_str("</svg>\n");
    s
}

/// Rate plots rendered from sweep records alone: `(file name, svg)`.
pub fn sweep_plots(records: &[SweepRecord]) -> Vec<(String, String)> {
    let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    let series = |f: &dyn Fn(&Measures) -> f64| -> Vec<(f64, f64)> { ok.iter().map(|r| (r.epsilon, f(&r.base).abs())).collect() };
    let fitted = |pts: &[(f64, f64)]| -> Vec<(f64, f64)> {
        match crate::experiments::fit_exponent(pts) {
            Ok(fit) => pts.iter().map(|p| (p.0, (fit.intercept + fit.slope * p.0.ln()).exp())).collect(),
            Err(_) => Vec::new(),
        }
    };
    let mut out = Vec::new();
    let g = series(&|m| m.max_grad_segment);
    out.push((
        "rate_max_grad.svg".to_string(),
        svg_plot(
            "max |grad u| next to the gap segment",
            "epsilon",
            "max |grad u|",
            &[Series { name: "measured", points: g.clone(), line: false }, Series { name: "log-log fit", points: fitted(&g), line: true }],
            true,
        ),
    ));
    let c = series(&|m| m.c_diff[0]);
    out.push((
        "rate_c_diff.svg".to_string(),
        svg_plot(
            "|C_1^1 - C_2^1|",
            "epsilon",
            "|C_1^1 - C_2^1|",
            &[Series { name: "measured", points: c.clone(), line: false }, Series { name: "log-log fit", points: fitted(&c), line: true }],
            true,
        ),
    ));
    let a: Vec<Series> = (0..3)
        .map(|k| Series {
            name: ["a_11^11", "a_11^22", "a_11^33"][k],
            points: ok.iter().map(|r| (r.epsilon, r.base.a_diag[k].abs())).collect(),
            line: false,
        })
        .collect();
    out.push(("energy_diagonal.svg".to_string(), svg_plot("diagonal energy entries", "epsilon", "a_11^kk", &a, true)));
    let b: Vec<Series> = (0..3)
        .map(|k| Series {
            name: ["b~_1^1", "b~_1^2", "b~_1^3"][k],
            points: ok.iter().map(|r| (r.epsilon, r.base.b_tilde1[k])).collect(),
            line: false,
        })
        .collect();
    out.push(("limit_functionals.svg".to_string(), svg_plot("bounded-part tractions", "epsilon", "b~_1^l", &b, false)));
    out
}

fn esc(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
