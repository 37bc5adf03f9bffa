//! Run configuration in `key = value` form with `[section]` headers.

use crate::elastic::ElasticTensor;
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, GapProfile};
use crate::mesh::GradingParams;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub epsilon: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub c2: f64,
    pub r1: f64,
    pub outer_radius: f64,
    pub closure_radius: f64,
    pub kappa_bottom: Option<f64>,
    pub c2_bottom: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            kappa: 1.0,
            gamma: 1.0,
            c2: 0.0,
            r1: 0.25,
            outer_radius: 4.0,
            closure_radius: 0.5,
            kappa_bottom: None,
            c2_bottom: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self { lambda: 1.0, mu: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub theta: f64,
    pub n_layers: usize,
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub angle_floor: f64,
    pub max_elements: usize,
    pub grade: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let g = GradingParams::defaults(4.0);
        Self {
            theta: g.theta,
            n_layers: g.n_layers,
            h_min: None,
            h_max: None,
            angle_floor: g.angle_floor,
            max_elements: g.max_elements,
            grade: g.grade,
        }
    }
}

/// Outer boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryData {
    /// `(x2, x1)`
    Shear,
    /// `(x1, -x2)`
    Stretch,
    Zero,
}

impl BoundaryData {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            BoundaryData::Shear => [x[1], x[0]],
            BoundaryData::Stretch => [x[0], -x[1]],
            BoundaryData::Zero => [0.0, 0.0],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BoundaryData::Shear => "shear",
            BoundaryData::Stretch => "stretch",
            BoundaryData::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sweep: Vec<f64>,
    pub fit_window: usize,
    pub workers: usize,
    pub strict: bool,
    pub phi: BoundaryData,
    /// Also solve on one uniform refinement of each mesh for error bars.
    pub refine_check: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sweep: vec![1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4],
            fit_window: 4,
            workers: 1,
            strict: false,
            phi: BoundaryData::Shear,
            refine_check: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("gaplab-out"), emit_svg: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub material: MaterialConfig,
    pub mesh: MeshConfig,
    pub experiment: ExperimentConfig,
    pub output: OutputConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line where `key` is assigned inside `[section]` (or at top level when `section` is empty).
fn key_line(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(s) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = s.trim().to_string();
            continue;
        }
        if current == section && line.split('=').next().map(str::trim) == Some(key) {
            return i + 1;
        }
    }
    0
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            let msg = e.message().to_string();
            let key = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| text.lines().nth(line.saturating_sub(1)).unwrap_or("").split('=').next().unwrap_or("").trim().to_string());
            Error::Config { key, line, msg }
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self, text: &str) -> Result<()> {
        let err = |section: &str, key: &str, msg: String| Error::Config {
            key: key.to_string(),
            line: key_line(text, section, key),
            msg,
        };
        let g = &self.geometry;
        if !(g.gamma > 0.0 && g.gamma <= 1.0) {
            return Err(err("geometry", "gamma", format!("gamma must lie in (0, 1], got {}", g.gamma)));
        }
        if !(g.kappa > 0.0) {
            return Err(err("geometry", "kappa", format!("kappa must be positive, got {}", g.kappa)));
        }
        if !(g.epsilon > 0.0) {
            return Err(err("geometry", "epsilon", format!("epsilon must be positive, got {}", g.epsilon)));
        }
        ElasticTensor::new(self.material.lambda, self.material.mu).map_err(|e| {
            let key = if self.material.mu <= 0.0 { "mu" } else { "lambda" };
            err("material", key, format!("strong convexity requires mu > 0 and 2 lambda + 2 mu > 0: {e}"))
        })?;
        self.spec_for(g.epsilon).map_err(|e| err("geometry", "epsilon", e.to_string()))?;
        let e = &self.experiment;
        if e.sweep.iter().any(|v| !(*v > 0.0)) || e.sweep.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(err("experiment", "sweep", "sweep must be positive and strictly decreasing".into()));
        }
        for &eps in &e.sweep {
            self.spec_for(eps).map_err(|x| err("experiment", "sweep", x.to_string()))?;
        }
        if e.fit_window < 2 {
            return Err(err("experiment", "fit_window", "fit_window must be at least 2".into()));
        }
        if e.workers == 0 {
            return Err(err("experiment", "workers", "workers must be at least 1".into()));
        }
        let m = &self.mesh;
        if !(m.theta > 0.0 && m.theta <= 1.0) {
            return Err(err("mesh", "theta", format!("theta must lie in (0, 1], got {}", m.theta)));
        }
        if m.n_layers < 2 {
            return Err(err("mesh", "n_layers", "n_layers must be at least 2".into()));
        }
        if !(m.angle_floor > 0.0 && m.angle_floor < 30.0) {
            return Err(err("mesh", "angle_floor", "angle_floor must lie in (0, 30) degrees".into()));
        }
        if !(m.grade > 0.0) {
            return Err(err("mesh", "grade", "grade must be positive".into()));
        }
        let gp = self.grading();
        if !(gp.h_min > 0.0 && gp.h_min < gp.h_max) {
            return Err(err("mesh", "h_min", "need 0 < h_min < h_max".into()));
        }
        Ok(())
    }

    pub fn tensor(&self) -> ElasticTensor {
        ElasticTensor::new(self.material.lambda, self.material.mu).expect("validated at load")
    }

    pub fn profile(&self) -> Result<GapProfile> {
        let g = &self.geometry;
        match (g.kappa_bottom, g.c2_bottom) {
            (None, None) => GapProfile::symmetric(g.kappa, g.gamma, g.c2, g.r1),
            (kb, cb) => GapProfile::asymmetric(g.kappa, g.gamma, g.c2, g.r1, kb.unwrap_or(g.kappa), cb.unwrap_or(g.c2)),
        }
    }

    pub fn spec_for(&self, epsilon: f64) -> Result<DomainSpec> {
        DomainSpec::new(epsilon, self.profile()?, self.geometry.outer_radius, self.geometry.closure_radius)
    }

    pub fn grading(&self) -> GradingParams {
        let m = &self.mesh;
        let d = GradingParams::defaults(self.geometry.outer_radius);
        GradingParams {
            theta: m.theta,
            n_layers: m.n_layers,
            h_min: m.h_min.unwrap_or(d.h_min),
            h_max: m.h_max.unwrap_or(d.h_max),
            angle_floor: m.angle_floor,
            max_elements: m.max_elements,
            grade: m.grade,
            eps_floor: d.eps_floor,
        }
    }

    /// Effective configuration with every default filled in.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = RunConfig::parse("[geometry]\nepsilon = 1e-3\n").unwrap();
        assert_eq!(c.geometry.epsilon, 1e-3);
        assert_eq!(c.material, MaterialConfig::default());
        assert_eq!(c.experiment.fit_window, 4);
        let again = RunConfig::parse(&c.echo()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_gamma_with_line() {
        match RunConfig::parse("[geometry]\nepsilon = 1e-3\ngamma = 1.5\n").unwrap_err() {
            Error::Config { key, line, .. } => assert_eq!((key.as_str(), line), ("gamma", 3)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rejects_negative_mu() {
        let e = RunConfig::parse("[material]\nmu = -1\n").unwrap_err();
        assert!(e.to_string().contains("strong convexity"), "{e}");
        assert!(matches!(e, Error::Config { ref key, line: 2, .. } if key == "mu"));
    }

    #[test]
    fn rejects_unknown_key() {
        match RunConfig::parse("seed = 3\n[mesh]\ntheta = 0.3\nbogus = 1\n").unwrap_err() {
            Error::Config { key, line, .. } => assert_eq!((key.as_str(), line), ("bogus", 4)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn rejects_type_mismatch() {
        let e = RunConfig::parse("[mesh]\nn_layers = \"many\"\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
    }
}
