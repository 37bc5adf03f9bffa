//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use gaplab::auxiliary::{q_tilde, q_tilde_closed_form};
use gaplab::config::RunConfig;
use gaplab::constants::extrapolate_limit;
use gaplab::experiments::{
    blowup_factor, compare_asymptotic, finite_contrast_study, fit_records, kernel_residual, manufactured_study, patch_test,
    run_sweep, Measures, SweepRecord, SweepResult,
};
use gaplab::fem::assemble;
use gaplab::mesh::generate;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

const BUDGET: Duration = Duration::from_secs(20 * 60);

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn config(gamma: f64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.geometry.gamma = gamma;
    cfg.geometry.kappa = 1.0;
    cfg
}

struct Sweep {
    gamma: f64,
    cfg: RunConfig,
    result: SweepResult,
}

impl Sweep {
    fn run(gamma: f64) -> Sweep {
        let cfg = config(gamma);
        let result = run_sweep(&cfg, &cfg.experiment.sweep).expect("sweep runs");
        Sweep { gamma, cfg, result }
    }

    fn records(&self) -> &[SweepRecord] {
        &self.result.records
    }

    fn failures(&self) -> Vec<String> {
        self.records().iter().filter_map(|r| r.failure.as_ref().map(|f| format!("eps={:e}: {f}", r.epsilon))).collect()
    }
}

/// Fitted slope with its two-mesh error bar, accepted only when the bar is under half the tolerance.
fn slope_check(s: &Sweep, target: f64, tol: f64, f: impl Fn(&Measures) -> f64 + Copy) -> (bool, String) {
    let window = s.cfg.experiment.fit_window;
    match fit_records(s.records(), window, f) {
        Ok((base, refined)) => {
            let bar = refined.map(|r| (r.slope - base.slope).abs()).unwrap_or(f64::INFINITY);
            let ok = (base.slope - target).abs() <= tol && bar < tol / 2.0 && s.failures().is_empty();
            (ok, format!("gamma={}: slope {:.4} (target {:.4} +- {}), error bar {:.2e}", s.gamma, base.slope, target, tol, bar))
        }
        Err(e) => (false, format!("gamma={}: fit failed: {e}", s.gamma)),
    }
}

fn criterion1(sweeps: &[Sweep], elapsed: Duration) -> Outcome {
    let mut pass = elapsed <= BUDGET;
    let mut parts = Vec::new();
    for s in sweeps {
        let tol = if s.gamma == 1.0 { 0.08 } else { 0.10 };
        let (ok, msg) = slope_check(s, -1.0 / (1.0 + s.gamma), tol, |m| m.max_grad_segment);
        pass &= ok;
        parts.push(msg);
    }
    parts.push(format!("sweeps took {:.1}s of {}s", elapsed.as_secs_f64(), BUDGET.as_secs()));
    Outcome { id: 1, pass, detail: parts.join("; ") }
}

fn criterion2(sweeps: &[Sweep]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in sweeps {
        let (ok, msg) = slope_check(s, s.gamma / (1.0 + s.gamma), 0.08, |m| m.c_diff[0].abs());
        pass &= ok;
        parts.push(msg);
    }
    Outcome { id: 2, pass, detail: parts.join("; ") }
}

fn criterion3(sweeps: &[Sweep]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in sweeps {
        let g = s.gamma;
        let t = s.cfg.tensor();
        let q = q_tilde(g).expect("q_tilde");
        for (entry, modulus, name) in [(0usize, t.mu, "a11^11"), (1, t.p_modulus(), "a11^22")] {
            let scale = |r: &SweepRecord, m: &Measures| {
                m.a_diag[entry] * r.epsilon.powf(g / (1.0 + g)) * s.cfg.geometry.kappa.powf(1.0 / (1.0 + g)) / (modulus * q)
            };
            let recs = s.records();
            let ratios: Vec<f64> = recs.iter().map(|r| scale(r, &r.base)).collect();
            let last = *ratios.last().unwrap();
            let dev: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
            let tail = &dev[dev.len() - 3..];
            let shrinking = tail.windows(2).all(|w| w[1] < w[0]);
            let rec = recs.last().unwrap();
            let bar = rec.refined.as_ref().map(|m| (scale(rec, m) - last).abs()).unwrap_or(f64::INFINITY);
            let ok = (0.85..=1.15).contains(&last) && shrinking && bar < 0.15 / 2.0;
            pass &= ok;
            parts.push(format!(
                "gamma={g} {name}: ratios [{}], error bar {:.1e}",
                ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", "),
                bar
            ));
        }
    }
    Outcome { id: 3, pass, detail: parts.join("; ") }
}

fn criterion4(sweeps: &[Sweep]) -> Outcome {
    let mut worst_zero: f64 = 0.0;
    let mut worst_c3: f64 = 0.0;
    for s in sweeps {
        for r in s.records() {
            for m in std::iter::once(&r.base).chain(r.refined.as_ref()) {
                worst_zero = worst_zero.max(m.zero_pattern);
            }
            worst_c3 = worst_c3.max((r.c[2] - r.c[5]).abs() / r.c[2].abs().max(1.0));
        }
    }
    let pass = worst_zero <= 1e-6 && worst_c3 <= 1e-8 && sweeps.iter().all(|s| s.failures().is_empty());
    Outcome { id: 4, pass, detail: format!("zero pattern {worst_zero:.2e} (<= 1e-6), |C1^3 - C2^3| {worst_c3:.2e} (<= 1e-8)") }
}

fn criterion5(sweeps: &[Sweep]) -> Outcome {
    let worst = sweeps
        .iter()
        .flat_map(|s| s.records())
        .flat_map(|r| std::iter::once(r.base.traction_balance).chain(r.refined.as_ref().map(|m| m.traction_balance)))
        .fold(0.0f64, f64::max);
    Outcome { id: 5, pass: worst <= 1e-8, detail: format!("worst traction residual {worst:.2e} relative to |B| (<= 1e-8)") }
}

fn criterion6() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 1..=10 {
        let g = k as f64 / 10.0;
        let q = q_tilde(g).expect("q_tilde");
        worst = worst.max((q - q_tilde_closed_form(g)).abs());
    }
    let pi_err = (q_tilde(1.0).expect("q_tilde") - PI).abs();
    Outcome {
        id: 6,
        pass: worst <= 1e-10 && pi_err <= 1e-10,
        detail: format!("max |quadrature - closed form| {worst:.2e}, |Q(1) - pi| {pi_err:.2e}"),
    }
}

fn criterion7(sweeps: &[Sweep]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in sweeps {
        let factor = match blowup_factor(s.records(), &s.cfg.tensor()) {
            Ok(f) => f,
            Err(e) => {
                pass = false;
                parts.push(format!("gamma={}: {e}", s.gamma));
                continue;
            }
        };
        let n = s.result.solutions.len();
        let mut medians = Vec::new();
        for sol in s.result.solutions[n - 3..].iter() {
            match sol.as_ref().map(|sol| compare_asymptotic(&sol.u, &sol.spec, &factor)) {
                Some(Ok(c)) => medians.push(c.median),
                Some(Err(e)) => parts.push(format!("gamma={}: {e}", s.gamma)),
                None => parts.push(format!("gamma={}: missing solution", s.gamma)),
            }
        }
        let ok = medians.len() == 3 && medians.windows(2).all(|w| w[1] < w[0]) && medians[2] <= 0.35;
        pass &= ok;
        parts.push(format!(
            "gamma={}: medians over last 3 eps [{}]",
            s.gamma,
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(", ")
        ));
    }
    Outcome { id: 7, pass, detail: parts.join("; ") }
}

fn criterion8() -> Outcome {
    let cfg = config(1.0);
    let spec = cfg.spec_for(1e-2).expect("spec");
    let mesh = Arc::new(generate(&spec, &cfg.grading()).expect("mesh"));
    let sys = Arc::new(assemble(mesh, &cfg.tensor()));
    let kernel = kernel_residual(&sys);
    let patch = patch_test(sys).expect("patch test");
    let mut coarse = cfg.grading();
    coarse.theta = 1.0;
    coarse.n_layers = 2;
    coarse.grade = 0.5;
    coarse.h_max = 1.0;
    let (mms_ok, mms) = match manufactured_study(&spec, &cfg.tensor(), &coarse, 3) {
        Ok(r) => (
            r.order_l2.iter().all(|o| *o >= 2.8) && r.order_h1.iter().all(|o| *o >= 1.8),
            format!(
                "dofs {:?}, L2 orders [{}], H1 orders [{}]",
                r.dofs,
                r.order_l2.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(", "),
                r.order_h1.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>().join(", ")
            ),
        ),
        Err(e) => (false, format!("manufactured study failed: {e}")),
    };
    Outcome {
        id: 8,
        pass: kernel <= 1e-11 && patch <= 1e-12 && mms_ok,
        detail: format!("kernel {kernel:.2e} (<= 1e-11), patch {patch:.2e} (<= 1e-12), {mms}"),
    }
}

fn criterion9() -> Outcome {
    let cfg = config(1.0);
    match finite_contrast_study(&cfg, 1e-2, &[1e2, 1e3, 1e4]) {
        Ok(d) => {
            let mono = d.windows(2).all(|w| w[1].1 < w[0].1);
            let last = d.last().map(|p| p.1).unwrap_or(f64::INFINITY);
            Outcome {
                id: 9,
                pass: mono && last < 0.05,
                detail: format!(
                    "relative H1 distance [{}]",
                    d.iter().map(|(m, v)| format!("m={m:e}: {v:.3e}")).collect::<Vec<_>>().join(", ")
                ),
            }
        }
        Err(e) => Outcome { id: 9, pass: false, detail: format!("study failed: {e}") },
    }
}

fn criterion10(sweeps: &[Sweep]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in sweeps {
        let t = s.cfg.tensor();
        let samples: Vec<(f64, [f64; 3])> =
            s.records().iter().filter(|r| r.failure.is_none()).map(|r| (r.epsilon, r.base.b_tilde1)).collect();
        let full = extrapolate_limit(&samples, s.gamma, &t);
        let dropped = extrapolate_limit(&samples[1..], s.gamma, &t);
        match (full, dropped) {
            (Ok(f), Ok(d)) => {
                let shift = (d.b_tilde_star[0] - f.b_tilde_star[0]).abs() / f.b_tilde_star[0].abs();
                let ok = f.fit_residual[0] <= 0.10 && shift <= 0.05;
                pass &= ok;
                parts.push(format!(
                    "gamma={}: b*={:.5}, relative residual {:.2e}, shift when dropping coarsest {:.2e}",
                    s.gamma, f.b_tilde_star[0], f.fit_residual[0], shift
                ));
            }
            (Err(e), _) | (_, Err(e)) => {
                pass = false;
                parts.push(format!("gamma={}: {e}", s.gamma));
            }
        }
    }
    Outcome { id: 10, pass, detail: parts.join("; ") }
}

fn main() {
    let start = Instant::now();
    let sweeps = vec![Sweep::run(1.0), Sweep::run(0.5)];
    let sweep_time = start.elapsed();
    let mut outcomes = vec![
        criterion1(&sweeps, sweep_time),
        criterion2(&sweeps),
        criterion3(&sweeps),
        criterion4(&sweeps),
        criterion5(&sweeps),
        criterion6(),
        criterion7(&sweeps),
        criterion8(),
        criterion9(),
        criterion10(&sweeps),
    ];
    outcomes.sort_by_key(|o| o.id);
    let mut failed = 0;
    for o in &outcomes {
        println!("{} criterion {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
        failed += usize::from(!o.pass);
    }
    let total = start.elapsed();
    println!("acceptance: {} passed, {} failed in {:.1}s", outcomes.len() - failed, failed, total.as_secs_f64());
    if failed > 0 || total > BUDGET {
        std::process::exit(1);
    }
}
