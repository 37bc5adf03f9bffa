mod common;

use common::light_config;
use gaplab::config::BoundaryData;
use gaplab::experiments::{fit_records, measure, run_sweep, solve_epsilon, SweepResult};
use gaplab::report::write_csv;

const SWEEP: [f64; 5] = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4];

fn light_sweep(gamma: f64, eps: &[f64]) -> SweepResult {
    let r = run_sweep(&light_config(gamma), eps).expect("sweep");
    for rec in &r.records {
        assert!(rec.failure.is_none(), "eps {}: {:?}", rec.epsilon, rec.failure);
    }
    r
}

#[test]
fn gradient_peak_grows_as_the_gap_closes() {
    let r = light_sweep(1.0, &SWEEP[..3]);
    let g: Vec<f64> = r.records.iter().map(|r| r.base.max_grad_segment).collect();
    assert!(g.windows(2).all(|w| w[1] > w[0]), "{g:?}");
}

#[test]
fn zero_boundary_data_gives_zero_solution() {
    let mut cfg = light_config(1.0);
    cfg.experiment.phi = BoundaryData::Zero;
    let sol = solve_epsilon(&cfg, 1e-2).unwrap();
    let m = measure(&sol).unwrap();
    assert_eq!(m.bound_ratio, 0.0);
    assert_eq!(m.max_grad_segment, 0.0);
    assert!(m.c_diff.iter().all(|c| *c == 0.0), "{:?}", m.c_diff);
}

#[test]
fn wide_gap_gives_finite_measurements() {
    let sol = solve_epsilon(&light_config(1.0), 0.1).unwrap();
    let m = measure(&sol).unwrap();
    for v in m.w_ratio.iter().chain(&m.c_diff).chain(&m.a_diag) {
        assert!(v.is_finite(), "{m:?}");
    }
    assert!(m.bound_ratio.is_finite() && m.bound_ratio > 0.0);
}

#[test]
fn gradient_peaks_inside_the_inner_gap() {
    let r = light_sweep(1.0, &SWEEP[..3]);
    for rec in &r.records {
        let reach = rec.epsilon.powf(1.0 / (1.0 + rec.gamma));
        assert!(rec.base.argmax_x1.abs() <= reach, "eps {}: argmax {} beyond {reach}", rec.epsilon, rec.base.argmax_x1);
    }
}

#[test]
fn sweep_measurements_are_stable() {
    let r = light_sweep(1.0, &SWEEP);
    let slopes: Vec<f64> = (3..=5)
        .map(|k| fit_records(&r.records, k, |m| m.max_grad_segment).unwrap().0.slope)
        .collect();
    let spread = slopes.iter().cloned().fold(f64::MIN, f64::max) - slopes.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 0.08, "slopes over windows 3..=5: {slopes:?}");

    let ratios: Vec<f64> = r.records.iter().map(|r| r.base.bound_ratio).collect();
    let (lo, hi) = (ratios.iter().cloned().fold(f64::MAX, f64::min), ratios.iter().cloned().fold(0.0, f64::max));
    assert!(hi < 3.0 * lo, "bound ratios {ratios:?}");

    let bt: Vec<f64> = r.records.iter().map(|r| r.base.b_tilde1[0]).collect();
    let (lo, hi) = (bt.iter().cloned().fold(f64::MAX, f64::min), bt.iter().cloned().fold(f64::MIN, f64::max));
    assert!(lo > 0.0 && hi < 1.5 * lo, "b~ values {bt:?}");
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let mut cfg = light_config(0.5);
    let eps = &SWEEP[..3];
    let first = write_csv(&run_sweep(&cfg, eps).unwrap().records);
    cfg.experiment.workers = 3;
    let second = write_csv(&run_sweep(&cfg, eps).unwrap().records);
    assert_eq!(first, second);
}

#[test]
fn sweep_preconditions() {
    let cfg = light_config(1.0);
    assert!(run_sweep(&cfg, &[1e-2, 5e-3]).is_err());
    assert!(run_sweep(&cfg, &[1e-2, 5e-3, 5e-3]).is_err());
    assert!(run_sweep(&cfg, &[1e-2, 5e-3, 1e-9]).is_err());
}
