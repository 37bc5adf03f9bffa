#![allow(dead_code)]

use gaplab::config::RunConfig;
use gaplab::experiments::{solve_epsilon, Solution};

/// Default configuration with a lighter mesh, for tests that only need a valid solve.
pub fn light_config(gamma: f64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.geometry.gamma = gamma;
    cfg.mesh.theta = 0.5;
    cfg.mesh.n_layers = 2;
    cfg.experiment.refine_check = false;
    cfg
}

pub fn light_solution(eps: f64) -> Solution {
    solve_epsilon(&light_config(1.0), eps).expect("solve")
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
