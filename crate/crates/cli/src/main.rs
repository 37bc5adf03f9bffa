use anyhow::Context;
use clap::{Parser, Subcommand};
use gaplab::auxiliary::{q_tilde, q_tilde_closed_form};
use gaplab::config::RunConfig;
use gaplab::constants::BlowupFactor;
use gaplab::experiments::{
    blowup_factor, compare_asymptotic, fit_records, midline_profile, run_sweep, solve_epsilon, Measures,
};
use gaplab::geometry::{validate_assumptions, DomainSpec, GapProfile};
use gaplab::mesh::{generate, to_svg, write_gapmesh};
use gaplab::report::{read_csv, svg_heatmap, svg_plot, sweep_plots, write_atomic, write_csv, Series};
use gaplab::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "gaplab", version, about = "Stress concentration between two nearly touching rigid inclusions")]
struct Cli {
    /// Run configuration (key = value lines under [section] headers)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; GAPLAB_OUT overrides it
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Treat symmetry defects of the constant matrix as errors
    #[arg(long, global = true)]
    strict: bool,
    /// Seed recorded in the effective config for randomized sampling; sweeps draw no random numbers
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the mesh for one epsilon and write it with an SVG preview
    Mesh {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Solve for one epsilon and write the displacement field and the constant system
    Solve {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run the configured epsilon sweep and write the CSV and plots
    Sweep,
    /// Print the constant Q~ and the leading-order gradient envelope
    Asymptotics {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Limit functional b*^1
        #[arg(long, default_value_t = 0.0)]
        b1: f64,
        /// Limit functional b*^2
        #[arg(long, default_value_t = 0.0)]
        b2: f64,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
    },
    /// Re-render plots from an existing sweep CSV
    Report {
        #[arg(long)]
        csv: PathBuf,
    },
    /// Check the geometric assumptions of the configured profile
    Validate,
}

/// Exit status 1 for invalid input, 2 for meshing or solver failures.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Solver(_) | Error::Mesh(_) | Error::Io(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(anyhow::Error::from).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.experiment.workers = w.max(1);
    }
    if cli.strict {
        cfg.experiment.strict = true;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Ok(o) = std::env::var("GAPLAB_OUT") {
        if !o.is_empty() {
            cfg.output.dir = PathBuf::from(o);
        }
    }
    Ok(cfg)
}

fn emit(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    write_atomic(&dir.join(name), text.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let cfg = load(&cli)?;
    let dir = cfg.output.dir.clone();
    match cli.command {
        Command::Mesh { epsilon } => {
            let spec = cfg.spec_for(epsilon.unwrap_or(cfg.geometry.epsilon))?;
            let mesh = generate(&spec, &cfg.grading())?;
            emit(&dir, "effective_config.toml", &cfg.echo())?;
            emit(&dir, "mesh.gapmesh", &write_gapmesh(&mesh))?;
            if cfg.output.emit_svg {
                let r = 4.0 * spec.epsilon.sqrt().max(spec.epsilon);
                emit(&dir, "mesh.svg", &to_svg(&mesh, None))?;
                emit(&dir, "mesh_gap.svg", &to_svg(&mesh, Some([-r, r, -r, r])))?;
            }
            let q = mesh.quality_report();
            println!(
                "nodes {} elements {} gap layers {} min angle {:.2} max aspect {:.2}",
                mesh.nodes.len(),
                q.element_count,
                q.gap_layer_count,
                q.min_angle,
                q.max_aspect
            );
        }
        Command::Solve { epsilon } => {
            let eps = epsilon.unwrap_or(cfg.geometry.epsilon);
            let sol = solve_epsilon(&cfg, eps)?;
            let m = gaplab::experiments::measure(&sol)?;
            let c = sol.system.constants()?;
            emit(&dir, "effective_config.toml", &cfg.echo())?;
            emit(&dir, "mesh.gapmesh", &write_gapmesh(&sol.mesh))?;
            emit(&dir, "u.gapfield", &sol.u.to_gapfield())?;
            let rec = gaplab::experiments::SweepRecord {
                epsilon: eps,
                gamma: cfg.geometry.gamma,
                kappa: cfg.geometry.kappa,
                base: m,
                refined: None,
                mesh_stats: gaplab::experiments::MeshStats {
                    nodes: sol.mesh.nodes.len(),
                    elements: sol.mesh.elements.len(),
                    gap_layers: sol.mesh.gap_layer_count(),
                    min_angle: sol.mesh.quality_report().min_angle,
                },
                a: std::array::from_fn(|k| sol.system.a[(k / 6, k % 6)]),
                b: std::array::from_fn(|k| sol.system.b[k]),
                c: std::array::from_fn(|k| c[k]),
                failure: None,
            };
            emit(&dir, "constants.csv", &write_csv(&[rec]))?;
            println!("epsilon {eps:e}: {} nodes, max |grad u| on the gap segment {:.6e}", sol.mesh.nodes.len(), m.max_grad_segment);
            println!("C = {:?}", c.as_slice());
            println!("symmetry defect {:.3e}, traction balance {:.3e}", m.defect, m.traction_balance);
        }
        Command::Sweep => {
            let res = run_sweep(&cfg, &cfg.experiment.sweep)?;
            emit(&dir, "effective_config.toml", &cfg.echo())?;
            emit(&dir, "sweep.csv", &write_csv(&res.records))?;
            let k = cfg.experiment.fit_window;
            for (name, f) in [
                ("max |grad u| on the gap segment", (|m: &Measures| m.max_grad_segment) as fn(&Measures) -> f64),
                ("|C_1^1 - C_2^1|", |m: &Measures| m.c_diff[0].abs()),
            ] {
                match fit_records(&res.records, k, f) {
                    Ok((b, r)) => println!(
                        "slope of {name}: {:.4} (r2 {:.4}){}",
                        b.slope,
                        b.r2,
                        r.map(|r| format!(", refined mesh {:.4}", r.slope)).unwrap_or_default()
                    ),
                    Err(e) => println!("slope of {name}: unavailable ({e})"),
                }
            }
            for r in &res.records {
                if let Some(f) = &r.failure {
                    println!("epsilon {:e} failed: {f}", r.epsilon);
                }
            }
            let factor = blowup_factor(&res.records, &cfg.tensor()).ok();
            if let Some(f) = &factor {
                println!("limit functionals b* = {:?}", f.b_tilde_star);
            }
            if cfg.output.emit_svg {
                for (name, svg) in sweep_plots(&res.records) {
                    emit(&dir, &name, &svg)?;
                }
                let last = res.solutions.iter().rposition(Option::is_some);
                if let (Some(i), Some(f)) = (last, &factor) {
                    let sol = res.solutions[i].as_ref().unwrap();
                    gap_plots(&dir, sol, f)?;
                }
            }
            if res.records.iter().any(|r| r.failure.is_some()) {
                return Ok(2);
            }
        }
        Command::Asymptotics { gamma, kappa, b1, b2, epsilon } => {
            let q = q_tilde(gamma)?;
            println!("Q~({gamma}) = {q:.12} (closed form {:.12})", q_tilde_closed_form(gamma));
            println!("gamma      Q~ quadrature        Q~ closed form");
            for k in 1..=10 {
                let g = k as f64 / 10.0;
                println!("{g:<10.1} {:<20.14} {:.14}", q_tilde(g)?, q_tilde_closed_form(g));
            }
            let profile = GapProfile::symmetric(kappa, gamma, 0.0, cfg.geometry.r1)?;
            let spec = DomainSpec::new(epsilon, profile, cfg.geometry.outer_radius, cfg.geometry.closure_radius)?;
            let t = cfg.tensor();
            let mut m = nalgebra::Matrix2::zeros();
            m[(0, 1)] = b1 / t.mu;
            m[(1, 1)] = b2 / t.p_modulus();
            let factor = BlowupFactor { b_tilde_star: [b1, b2, 0.0], slopes: [0.0; 3], fit_residual: [0.0; 3], matrix: m, warnings: vec![] };
            let reach = epsilon.powf(1.0 / (1.0 + gamma));
            println!("x1            (1,2) entry           (2,2) entry");
            for k in 0..=10 {
                let x = reach * k as f64 / 10.0;
                let g = gaplab::experiments::asymptotic_gradient(&spec, &factor, x)?;
                println!("{x:<13.6e} {:<21.12e} {:.12e}", g[(0, 1)], g[(1, 1)]);
            }
        }
        Command::Report { csv } => {
            let text = std::fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            let records = read_csv(&text)?;
            for (name, svg) in sweep_plots(&records) {
                emit(&dir, &name, &svg)?;
            }
            println!("rendered plots for {} records into {}", records.len(), dir.display());
        }
        Command::Validate => {
            let mut failed = false;
            for eps in std::iter::once(cfg.geometry.epsilon).chain(cfg.experiment.sweep.iter().copied()) {
                let spec = cfg.spec_for(eps)?;
                let rep = validate_assumptions(&spec, 2000);
                println!(
                    "epsilon {eps:e}: kappa0 {:.4} kappa1 {:.4} kappa2 {:.4} gap ratio [{:.4}, {:.4}] {}",
                    rep.kappa0,
                    rep.kappa1,
                    rep.kappa2,
                    rep.delta_ratio.0,
                    rep.delta_ratio.1,
                    if rep.passed { "ok" } else { "VIOLATED" }
                );
                for v in &rep.violations {
                    println!("  {v}");
                }
                failed |= !rep.passed;
            }
            return Ok(if failed { 1 } else { 0 });
        }
    }
    Ok(0)
}

/// Envelope along the midline and a heat map of `|grad u|` in the gap at the smallest epsilon.
fn gap_plots(dir: &Path, sol: &gaplab::experiments::Solution, factor: &BlowupFactor) -> anyhow::Result<()> {
    let prof = midline_profile(&sol.u, &sol.spec, factor)?;
    let svg = svg_plot(
        "gradient entry (1,2) along x2 = 0",
        "x1",
        "d u_1 / d x_2",
        &[
            Series { name: "measured", points: prof.iter().map(|p| (p.0, p.1)).collect(), line: false },
            Series { name: "leading-order formula", points: prof.iter().map(|p| (p.0, p.2)).collect(), line: true },
        ],
        false,
    );
    emit(dir, "envelope.svg", &svg)?;
    if let Ok(cmp) = compare_asymptotic(&sol.u, &sol.spec, factor) {
        println!(
            "asymptotic comparison at epsilon {:e}: median relative error {:.4}, p90 {:.4} over {} points",
            cmp.epsilon, cmp.median, cmp.p90, cmp.points
        );
    }
    let grads = gaplab::fem::element_gradients(&sol.u);
    let r = 3.0 * sol.spec.epsilon.sqrt();
    let samples: Vec<([f64; 2], f64)> = grads.iter().map(|g| (g.x, g.grad.norm())).collect();
    emit(dir, "gap_heatmap.svg", &svg_heatmap("|grad u| near the gap", &samples, [-r, r, -0.5 * r, 0.5 * r]))?;
    Ok(())
}
