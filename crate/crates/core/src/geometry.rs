//! Gap profiles, gap width and the closed boundary curves of the disk and the two inclusions.

use crate::error::{Error, Result};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Outer,
    Inc1,
    Inc2,
}

impl BoundaryTag {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryTag::Outer => "Outer",
            BoundaryTag::Inc1 => "Inc1",
            BoundaryTag::Inc2 => "Inc2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Outer" => Some(BoundaryTag::Outer),
            "Inc1" => Some(BoundaryTag::Inc1),
            "Inc2" => Some(BoundaryTag::Inc2),
            _ => None,
        }
    }
}

/// Power-law gap profile `kappa/2 |x|^(1+gamma) + c2 |x|^(2+gamma)` on the top side.
/// In symmetric mode the bottom side is its negative; otherwise the bottom
/// uses its own `(kappa_bottom, c2_bottom)` with the same exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapProfile {
    pub kappa: f64,
    pub gamma: f64,
    pub c2: f64,
    pub r1: f64,
    pub symmetric: bool,
    pub kappa_bottom: f64,
    pub c2_bottom: f64,
}

impl GapProfile {
    pub fn symmetric(kappa: f64, gamma: f64, c2: f64, r1: f64) -> Result<Self> {
        let p = Self { kappa, gamma, c2, r1, symmetric: true, kappa_bottom: kappa, c2_bottom: c2 };
        p.check()?;
        Ok(p)
    }

    pub fn asymmetric(kappa: f64, gamma: f64, c2: f64, r1: f64, kappa_bottom: f64, c2_bottom: f64) -> Result<Self> {
        let p = Self { kappa, gamma, c2, r1, symmetric: false, kappa_bottom, c2_bottom };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Domain(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.kappa > 0.0) || !(self.kappa_bottom > 0.0) {
            return Err(Error::Domain("kappa must be positive".into()));
        }
        if !(self.r1 > 0.0) {
            return Err(Error::Domain(format!("R1 must be positive, got {}", self.r1)));
        }
        if !(self.c2.is_finite() && self.c2_bottom.is_finite()) {
            return Err(Error::Domain("c2 must be finite".into()));
        }
        Ok(())
    }

    /// `(kappa, c2)` of the distance of `side` from the axis.
    fn coefficients(&self, side: Side) -> (f64, f64) {
        match side {
            Side::Top => (self.kappa, self.c2),
            Side::Bottom if self.symmetric => (self.kappa, self.c2),
            Side::Bottom => (self.kappa_bottom, self.c2_bottom),
        }
    }

    /// Unsigned height `|h|` of one side (the value of `h1`, or `-h2`).
    pub fn magnitude(&self, side: Side, x1: f64) -> f64 {
        let (k, c2) = self.coefficients(side);
        let a = x1.abs();
        0.5 * k * a.powf(1.0 + self.gamma) + c2 * a.powf(2.0 + self.gamma)
    }

    pub fn magnitude_deriv(&self, side: Side, x1: f64) -> f64 {
        let (k, c2) = self.coefficients(side);
        let a = x1.abs();
        let d = 0.5 * k * (1.0 + self.gamma) * a.powf(self.gamma) + c2 * (2.0 + self.gamma) * a.powf(1.0 + self.gamma);
        d * x1.signum() * if a == 0.0 { 0.0 } else { 1.0 }
    }

    pub fn magnitude_second(&self, side: Side, x1: f64) -> f64 {
        let (k, c2) = self.coefficients(side);
        let a = x1.abs();
        let g = self.gamma;
        0.5 * k * (1.0 + g) * g * a.powf(g - 1.0) + c2 * (2.0 + g) * (1.0 + g) * a.powf(g)
    }

    fn sign(side: Side) -> f64 {
        match side {
            Side::Top => 1.0,
            Side::Bottom => -1.0,
        }
    }

    /// `h1(x1)` for `Top`, `h2(x1)` for `Bottom`.
    pub fn h(&self, side: Side, x1: f64) -> Result<f64> {
        self.in_range(x1)?;
        Ok(Self::sign(side) * self.magnitude(side, x1))
    }

    pub fn h_deriv(&self, side: Side, x1: f64) -> Result<f64> {
        self.in_range(x1)?;
        Ok(Self::sign(side) * self.magnitude_deriv(side, x1))
    }

    fn in_range(&self, x1: f64) -> Result<()> {
        if x1.is_finite() && x1.abs() <= 2.0 * self.r1 * (1.0 + 1e-14) {
            Ok(())
        } else {
            Err(Error::Domain(format!("|x1| = {} exceeds 2 R1 = {}", x1.abs(), 2.0 * self.r1)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub epsilon: f64,
    pub profile: GapProfile,
    pub outer_radius: f64,
    pub closure_radius: f64,
}

fn smoothstep5(t: f64) -> (f64, f64, f64) {
    let t = t.clamp(0.0, 1.0);
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    let dds = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    (s, ds, dds)
}

/// One inclusion written in "upper" form: its boundary near the gap is
/// `y = eps/2 + g(x)` above the axis, closed by a circular arc.
/// The bottom inclusion uses the same shape mirrored through `x2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionShape {
    pub side: Side,
    pub half_eps: f64,
    pub profile: GapProfile,
    pub rho: f64,
    /// Height of the arc center above `eps/2`.
    pub center_offset: f64,
}

impl InclusionShape {
    fn new(spec: &DomainSpec, side: Side) -> Self {
        let p = spec.profile;
        let rho = spec.closure_radius;
        let center_offset = p.magnitude(side, p.r1) + (rho * rho - p.r1 * p.r1).sqrt();
        Self { side, half_eps: 0.5 * spec.epsilon, profile: p, rho, center_offset }
    }

    pub fn r1(&self) -> f64 {
        self.profile.r1
    }

    /// Height of the arc center in upper form.
    pub fn center_y(&self) -> f64 {
        self.half_eps + self.center_offset
    }

    fn arc_low(&self, a: f64) -> f64 {
        self.center_offset - (self.rho * self.rho - a * a).max(0.0).sqrt()
    }

    /// Graph height above `eps/2` on `|x| <= 2 R1`, blended into the arc over `[R1, 2R1]`.
    pub fn graph(&self, x: f64) -> f64 {
        let r1 = self.r1();
        let a = x.abs().min(2.0 * r1);
        let h = self.profile.magnitude(self.side, a);
        if a <= r1 {
            return h;
        }
        let (s, _, _) = smoothstep5((a - r1) / r1);
        (1.0 - s) * h + s * self.arc_low(a)
    }

    /// Upper-form point on the graph part.
    pub fn graph_point(&self, x: f64) -> [f64; 2] {
        [x, self.half_eps + self.graph(x)]
    }

    /// Angle (about the arc center) where the graph meets the arc, in `[-pi/2, 0]`.
    pub fn junction_angle(&self) -> f64 {
        let r2 = 2.0 * self.r1();
        (-(self.rho * self.rho - r2 * r2).max(0.0).sqrt()).atan2(r2)
    }

    /// Upper-form boundary point seen from the arc center at angle `theta`.
    pub fn point_at_angle(&self, theta: f64) -> [f64; 2] {
        let th = wrap_angle(theta);
        let tj = self.junction_angle();
        let cy = self.center_y();
        if th >= tj && th <= PI - tj {
            return [self.rho * th.cos(), cy + self.rho * th.sin()];
        }
        // graph part: solve angle(x) = theta for x on the proper side
        let sgn = if th.cos() >= 0.0 { 1.0 } else { -1.0 };
        let target = if sgn > 0.0 { th } else { PI - th };
        let target = wrap_angle(target);
        if target <= -PI / 2.0 + 1e-15 {
            return self.graph_point(0.0);
        }
        let (mut lo, mut hi) = (0.0, 2.0 * self.r1());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let ang = (self.half_eps + self.graph(mid) - cy).atan2(mid);
            if ang < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * 2.0 * self.r1() {
                break;
            }
        }
        let x = 0.5 * (lo + hi);
        self.graph_point(sgn * x)
    }

    pub fn angle_of(&self, p: [f64; 2]) -> f64 {
        (p[1] - self.center_y()).atan2(p[0])
    }

    /// Snap a nearby upper-form point onto the curve: vertically inside the gap strip, radially elsewhere.
    pub fn project(&self, p: [f64; 2]) -> [f64; 2] {
        if p[0].abs() <= self.r1() && p[1] < self.center_y() {
            self.graph_point(p[0])
        } else {
            self.point_at_angle(self.angle_of(p))
        }
    }

    /// Distance-like residual of an upper-form point from the curve.
    pub fn residual(&self, p: [f64; 2]) -> f64 {
        if p[0].abs() <= 2.0 * self.r1() && p[1] < self.center_y() {
            (p[1] - self.half_eps - self.graph(p[0])).abs()
        } else {
            let dx = p[0];
            let dy = p[1] - self.center_y();
            ((dx * dx + dy * dy).sqrt() - self.rho).abs()
        }
    }
}

pub fn wrap_angle(t: f64) -> f64 {
    let mut t = t;
    while t > PI {
        t -= 2.0 * PI;
    }
    while t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// An inclusion in world coordinates: the upper-form shape, mirrored for the bottom one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inclusion {
    pub shape: InclusionShape,
    pub flip: bool,
}

impl Inclusion {
    fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        if self.flip { [p[0], -p[1]] } else { p }
    }

    pub fn project(&self, p: [f64; 2]) -> [f64; 2] {
        self.to_local(self.shape.project(self.to_local(p)))
    }

    pub fn residual(&self, p: [f64; 2]) -> f64 {
        self.shape.residual(self.to_local(p))
    }

    /// Positive inside the inclusion.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let q = self.to_local(p);
        let s = &self.shape;
        if q[0].abs() <= 2.0 * s.r1() && q[1] < s.center_y() {
            q[1] > s.half_eps + s.graph(q[0])
        } else {
            let dy = q[1] - s.center_y();
            q[0] * q[0] + dy * dy < s.rho * s.rho
        }
    }

    /// Counter-clockwise closed polyline starting and ending at the gap point.
    pub fn polyline(&self, samples: usize) -> Vec<[f64; 2]> {
        let n = samples.max(8);
        let dense = (64 * n).max(4096);
        let start = -PI / 2.0;
        let mut angles = Vec::with_capacity(dense + 1);
        let mut cum = Vec::with_capacity(dense + 1);
        let mut prev = self.shape.point_at_angle(start);
        let mut total = 0.0;
        for k in 0..=dense {
            let th = start + 2.0 * PI * k as f64 / dense as f64;
            let p = self.shape.point_at_angle(th);
            total += ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt();
            angles.push(th);
            cum.push(total);
            prev = p;
        }
        let mut out = Vec::with_capacity(n + 1);
        let mut j = 0;
        for k in 0..n {
            let s = total * k as f64 / n as f64;
            while j + 1 < dense && cum[j + 1] < s {
                j += 1;
            }
            let seg = cum[j + 1] - cum[j];
            let t = if seg > 0.0 { (s - cum[j]) / seg } else { 0.0 };
            let th = angles[j] + t * (angles[j + 1] - angles[j]);
            out.push(self.shape.point_at_angle(th));
        }
        out.push(out[0]);
        let mut out: Vec<[f64; 2]> = out.into_iter().map(|p| self.to_local(p)).collect();
        if self.flip {
            out.reverse();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedCurve {
    pub tag: BoundaryTag,
    pub points: Vec<[f64; 2]>,
}

impl DomainSpec {
    pub fn new(epsilon: f64, profile: GapProfile, outer_radius: f64, closure_radius: f64) -> Result<Self> {
        let spec = Self { epsilon, profile, outer_radius, closure_radius };
        spec.check()?;
        Ok(spec)
    }

    /// Symmetric spec with the default radii (`R1 = 0.25`, closure 0.5, outer 4).
    pub fn symmetric_default(epsilon: f64, kappa: f64, gamma: f64) -> Result<Self> {
        let p = GapProfile::symmetric(kappa, gamma, 0.0, 0.25)?;
        Self::new(epsilon, p, 4.0, 0.5)
    }

    fn check(&self) -> Result<()> {
        self.profile.check()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.outer_radius > 0.0) || !(self.closure_radius > 0.0) {
            return Err(Error::Domain("radii must be positive".into()));
        }
        if 2.0 * self.profile.r1 > self.closure_radius {
            return Err(Error::InvalidGeometry(format!(
                "blend band end 2 R1 = {} exceeds closure_radius = {}",
                2.0 * self.profile.r1,
                self.closure_radius
            )));
        }
        for side in [Side::Top, Side::Bottom] {
            let s = InclusionShape::new(self, side);
            let top = s.center_y() + s.rho;
            let reach = top.max(s.rho);
            if reach > 0.5 * self.outer_radius {
                return Err(Error::InvalidGeometry(format!(
                    "inclusion closure reaches {reach}, beyond outer_radius/2 = {}",
                    0.5 * self.outer_radius
                )));
            }
        }
        let n = 400;
        for k in 0..=n {
            let x = 2.0 * self.profile.r1 * k as f64 / n as f64;
            delta(self, x)?;
        }
        self.check_convexity()
    }

    pub fn gamma(&self) -> f64 {
        self.profile.gamma
    }

    pub fn kappa(&self) -> f64 {
        self.profile.kappa
    }

    pub fn r1(&self) -> f64 {
        self.profile.r1
    }

    pub fn inclusion_shape(&self, side: Side) -> InclusionShape {
        InclusionShape::new(self, side)
    }

    pub fn inclusion(&self, tag: BoundaryTag) -> Option<Inclusion> {
        match tag {
            BoundaryTag::Inc1 => Some(Inclusion { shape: InclusionShape::new(self, Side::Top), flip: false }),
            BoundaryTag::Inc2 => Some(Inclusion { shape: InclusionShape::new(self, Side::Bottom), flip: true }),
            BoundaryTag::Outer => None,
        }
    }

    /// Residual of a point with respect to the analytic curve of `tag`.
    pub fn curve_residual(&self, tag: BoundaryTag, p: [f64; 2]) -> f64 {
        match self.inclusion(tag) {
            Some(inc) => inc.residual(p),
            None => ((p[0] * p[0] + p[1] * p[1]).sqrt() - self.outer_radius).abs(),
        }
    }

    /// Snap a point onto the analytic curve of `tag`.
    pub fn project(&self, tag: BoundaryTag, p: [f64; 2]) -> [f64; 2] {
        match self.inclusion(tag) {
            Some(inc) => inc.project(p),
            None => {
                let t = p[1].atan2(p[0]);
                [self.outer_radius * t.cos(), self.outer_radius * t.sin()]
            }
        }
    }

    /// True when `p` lies in the closure of the matrix region.
    pub fn in_matrix(&self, p: [f64; 2], tol: f64) -> bool {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if r > self.outer_radius + tol {
            return false;
        }
        for tag in [BoundaryTag::Inc1, BoundaryTag::Inc2] {
            let inc = self.inclusion(tag).unwrap();
            if inc.contains(p) && inc.residual(p) > tol {
                return false;
            }
        }
        true
    }

    fn check_convexity(&self) -> Result<()> {
        let n = 2048;
        for tag in [BoundaryTag::Inc1, BoundaryTag::Inc2] {
            let inc = self.inclusion(tag).unwrap();
            let pts: Vec<[f64; 2]> =
                (0..n).map(|k| inc.shape.point_at_angle(-PI / 2.0 + 2.0 * PI * k as f64 / n as f64)).collect();
            let scale = self.closure_radius;
            for k in 0..n {
                let a = pts[(k + n - 1) % n];
                let b = pts[k];
                let c = pts[(k + 1) % n];
                let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                if cross < -1e-12 * scale * scale {
                    return Err(Error::InvalidGeometry(format!(
                        "{} closure is not convex near ({:.6}, {:.6})",
                        tag.name(),
                        b[0],
                        b[1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Key=value serialization of the geometry.
    pub fn to_kv(&self) -> String {
        let p = &self.profile;
        let mut s = format!(
            "epsilon={}\nkappa={}\ngamma={}\nc2={}\nR1={}\nouter_radius={}\nclosure_radius={}\n",
            self.epsilon, p.kappa, p.gamma, p.c2, p.r1, self.outer_radius, self.closure_radius
        );
        if !p.symmetric {
            s.push_str(&format!("kappa_bottom={}\nc2_bottom={}\n", p.kappa_bottom, p.c2_bottom));
        }
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut vals: std::collections::BTreeMap<&str, f64> = Default::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                line: i + 1,
                msg: "expected key=value".into(),
            })?;
            let k = k.trim();
            const KEYS: [&str; 9] =
                ["epsilon", "kappa", "gamma", "c2", "R1", "outer_radius", "closure_radius", "kappa_bottom", "c2_bottom"];
            let Some(key) = KEYS.iter().find(|x| **x == k) else {
                return Err(Error::Config { key: k.into(), line: i + 1, msg: "unknown key".into() });
            };
            let x: f64 = v.trim().parse().map_err(|_| Error::Config {
                key: k.into(),
                line: i + 1,
                msg: format!("not a number: {}", v.trim()),
            })?;
            vals.insert(key, x);
        }
        let get = |k: &str, d: f64| vals.get(k).copied().unwrap_or(d);
        let eps = *vals.get("epsilon").ok_or_else(|| Error::Config {
            key: "epsilon".into(),
            line: 0,
            msg: "missing".into(),
        })?;
        let (kappa, gamma, c2, r1) = (get("kappa", 1.0), get("gamma", 1.0), get("c2", 0.0), get("R1", 0.25));
        let profile = if vals.contains_key("kappa_bottom") || vals.contains_key("c2_bottom") {
            GapProfile::asymmetric(kappa, gamma, c2, r1, get("kappa_bottom", kappa), get("c2_bottom", c2))?
        } else {
            GapProfile::symmetric(kappa, gamma, c2, r1)?
        };
        Self::new(eps, profile, get("outer_radius", 4.0), get("closure_radius", 0.5))
    }
}

/// Height `h1` or `h2` of the profile at `x1`.
pub fn h(profile: &GapProfile, side: Side, x1: f64) -> Result<f64> {
    profile.h(side, x1)
}

/// Gap width `eps + h1 - h2`.
pub fn delta(spec: &DomainSpec, x1: f64) -> Result<f64> {
    let p = &spec.profile;
    let d = spec.epsilon + p.h(Side::Top, x1)? - p.h(Side::Bottom, x1)?;
    if d <= 0.0 {
        return Err(Error::InvalidGeometry(format!("gap width {d} <= 0 at x1 = {x1}: inclusions overlap")));
    }
    Ok(d)
}

/// `d delta / d x1`.
pub fn delta_deriv(spec: &DomainSpec, x1: f64) -> Result<f64> {
    let p = &spec.profile;
    Ok(p.h_deriv(Side::Top, x1)? - p.h_deriv(Side::Bottom, x1)?)
}

/// Closed polylines of the outer circle and both inclusions, counter-clockwise.
pub fn boundary_curves(spec: &DomainSpec, samples_per_curve: usize) -> Result<Vec<TaggedCurve>> {
    spec.check_convexity()?;
    let n = samples_per_curve.max(8);
    let mut outer: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            [spec.outer_radius * t.cos(), spec.outer_radius * t.sin()]
        })
        .collect();
    outer.push(outer[0]);
    Ok(vec![
        TaggedCurve { tag: BoundaryTag::Outer, points: outer },
        TaggedCurve { tag: BoundaryTag::Inc1, points: spec.inclusion(BoundaryTag::Inc1).unwrap().polyline(n) },
        TaggedCurve { tag: BoundaryTag::Inc2, points: spec.inclusion(BoundaryTag::Inc2).unwrap().polyline(n) },
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub passed: bool,
    /// Witnessed `min |h'| / |x|^gamma` over both sides.
    pub kappa0: f64,
    /// Witnessed `max |h'| / |x|^gamma` over both sides.
    pub kappa1: f64,
    /// Witnessed `max |h''| / |x|^(gamma-1)`, the Holder-type bound of the derivative.
    pub kappa2: f64,
    /// Range of `delta(x) / (eps + |x|^(1+gamma))`.
    pub delta_ratio: (f64, f64),
    pub violations: Vec<String>,
}

/// Evaluate the profile hypotheses on a grid of `|x1| <= 2 R1` and report witnessed constants.
pub fn validate_assumptions(spec: &DomainSpec, grid: usize) -> AssumptionReport {
    let p = &spec.profile;
    let g = p.gamma;
    let grid = grid.max(4);
    let mut violations = Vec::new();
    let (mut k0, mut k1, mut k2) = (f64::INFINITY, 0.0f64, 0.0f64);
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for side in [Side::Top, Side::Bottom] {
        if p.magnitude(side, 0.0) != 0.0 || p.magnitude_deriv(side, 0.0) != 0.0 {
            violations.push(format!("{side:?}: h(0) or h'(0) nonzero"));
        }
    }
    for k in 1..=grid {
        for sgn in [1.0, -1.0] {
            let x = sgn * 2.0 * p.r1 * k as f64 / grid as f64;
            let ax = x.abs();
            for side in [Side::Top, Side::Bottom] {
                let d1 = p.magnitude_deriv(side, x);
                let r = d1.abs() / ax.powf(g);
                if d1 * x <= 0.0 {
                    violations.push(format!("{side:?}: |h'| not increasing away from 0 at x1 = {x:.6e}"));
                }
                k0 = k0.min(r);
                k1 = k1.max(r);
                if g < 1.0 || p.c2 != 0.0 || p.c2_bottom != 0.0 {
                    k2 = k2.max(p.magnitude_second(side, x).abs() / ax.powf(g - 1.0));
                } else {
                    k2 = k2.max(p.magnitude_second(side, x).abs());
                }
            }
            let up = spec.epsilon / 2.0 + p.h(Side::Top, x).unwrap_or(f64::NAN);
            let lo = -spec.epsilon / 2.0 + p.h(Side::Bottom, x).unwrap_or(f64::NAN);
            if !(lo < up) {
                violations.push(format!("inclusions overlap at x1 = {x:.6e}"));
            }
            let d = up - lo;
            let ratio = d / (spec.epsilon + ax.powf(1.0 + g));
            dmin = dmin.min(ratio);
            dmax = dmax.max(ratio);
        }
    }
    let ratio0 = 1.0;
    dmin = dmin.min(ratio0);
    dmax = dmax.max(ratio0);
    if !(k0 > 0.0) {
        violations.push("witnessed kappa0 is not positive".into());
    }
    if let Err(e) = spec.check_convexity() {
        violations.push(e.to_string());
    }
    violations.dedup();
    AssumptionReport {
        passed: violations.is_empty(),
        kappa0: k0,
        kappa1: k1,
        kappa2: k2,
        delta_ratio: (dmin, dmax),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(eps: f64, kappa: f64, gamma: f64) -> DomainSpec {
        DomainSpec::symmetric_default(eps, kappa, gamma).unwrap()
    }

    #[test]
    fn h_examples() {
        let p = GapProfile::symmetric(1.0, 1.0, 0.0, 0.25).unwrap();
        assert!((p.h(Side::Top, 0.2).unwrap() - 0.02).abs() < 1e-15);
        assert_eq!(p.h(Side::Top, 0.0).unwrap(), 0.0);
        assert_eq!(p.h(Side::Bottom, 0.0).unwrap(), 0.0);
        let q = GapProfile::symmetric(2.0, 0.5, 0.0, 0.25).unwrap();
        assert!((q.h(Side::Top, 0.01).unwrap() - 0.001).abs() < 1e-15);
        assert!(p.h(Side::Top, 0.6).is_err());
    }

    #[test]
    fn delta_examples() {
        let s = sym(1e-3, 1.0, 1.0);
        assert!((delta(&s, 0.1).unwrap() - 0.011).abs() < 1e-15);
        assert_eq!(delta(&s, 0.0).unwrap(), 1e-3);
        let s2 = sym(1e-4, 1.0, 0.5);
        assert!((delta(&s2, 0.01).unwrap() - 0.0011).abs() < 1e-15);
    }

    #[test]
    fn curves_pass_through_gap_points_and_mirror() {
        let s = sym(1e-2, 1.0, 1.0);
        let c = boundary_curves(&s, 400).unwrap();
        assert_eq!(c[1].points[0], [0.0, 5e-3]);
        for cur in &c {
            assert_eq!(cur.points.first(), cur.points.last());
        }
        let inc2: Vec<[f64; 2]> = c[2].points.iter().map(|p| [p[0], -p[1]]).collect();
        let mut a = c[1].points.clone();
        let mut b = inc2;
        let key = |p: &[f64; 2]| (p[0].to_bits(), p[1].to_bits());
        a.sort_by_key(key);
        b.sort_by_key(key);
        for (p, q) in a.iter().zip(&b) {
            assert!((p[0] - q[0]).abs() < 1e-15 && (p[1] - q[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn curves_are_counter_clockwise() {
        let s = sym(1e-2, 1.0, 0.5);
        for c in boundary_curves(&s, 300).unwrap() {
            let area: f64 = c.points.windows(2).map(|w| w[0][0] * w[1][1] - w[1][0] * w[0][1]).sum();
            assert!(area > 0.0, "{:?}", c.tag);
        }
    }

    #[test]
    fn brute_force_min_distance_is_eps() {
        let s = sym(1e-2, 1.0, 1.0);
        let c = boundary_curves(&s, 2000).unwrap();
        let mut dmin = f64::INFINITY;
        for p in &c[1].points {
            for q in &c[2].points {
                dmin = dmin.min(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
            }
        }
        assert!((dmin - 1e-2).abs() < 1e-12, "{dmin}");
    }

    #[test]
    fn validate_quadratic_profile() {
        let r = validate_assumptions(&sym(1e-3, 1.0, 1.0), 200);
        assert!(r.passed, "{:?}", r.violations);
        assert!((r.kappa0 - 1.0).abs() < 1e-12 && (r.kappa1 - 1.0).abs() < 1e-12);
        assert!((r.delta_ratio.0 - 1.0).abs() < 1e-12 && (r.delta_ratio.1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validate_reports_non_monotone_profile() {
        // h'(x) = x - 6 c |x|^2 changes sign at x = 1/(6*4) for c2 = -4 (gamma = 1)
        let p = GapProfile { kappa: 1.0, gamma: 1.0, c2: -4.0, r1: 0.25, symmetric: true, kappa_bottom: 1.0, c2_bottom: -4.0 };
        let s = DomainSpec { epsilon: 1e-2, profile: p, outer_radius: 4.0, closure_radius: 0.5 };
        let r = validate_assumptions(&s, 200);
        assert!(!r.passed);
        let brute = (1..=200).any(|k| {
            let x = 0.5 * k as f64 / 200.0;
            p.magnitude_deriv(Side::Top, x) <= 0.0
        });
        assert!(brute);
    }

    #[test]
    fn projection_and_residual_agree() {
        let s = sym(5e-3, 1.0, 0.5);
        for tag in [BoundaryTag::Inc1, BoundaryTag::Inc2, BoundaryTag::Outer] {
            for k in 0..97 {
                let t = 2.0 * PI * k as f64 / 97.0;
                let raw = [0.3 * t.cos() * 1.1, 0.5 * t.sin() + if tag == BoundaryTag::Inc2 { -0.5 } else { 0.5 }];
                let q = s.project(tag, raw);
                assert!(s.curve_residual(tag, q) < 1e-12 * s.outer_radius, "{tag:?} {q:?}");
            }
        }
    }

    #[test]
    fn kv_roundtrip() {
        let s = sym(1e-3, 1.5, 0.5);
        let t = DomainSpec::from_kv(&s.to_kv()).unwrap();
        assert_eq!(s, t);
        assert!(DomainSpec::from_kv("epsilon=1e-3\nfoo=1\n").is_err());
    }

    #[test]
    fn rejects_overlap_and_bad_gamma() {
        assert!(GapProfile::symmetric(1.0, 1.5, 0.0, 0.25).is_err());
        let p = GapProfile::asymmetric(1.0, 1.0, 0.0, 0.25, 1.0, 0.0).unwrap();
        assert!(DomainSpec::new(-1e-3, p, 4.0, 0.5).is_err());
    }
}
