//! `rflow`: command-line driver for the r-curvature flow laboratory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rflow_core::io::{curve_csv, kappa_csv, sigma_csv, xy_csv, StagedDir};
use rflow_core::rcurv::{kappa_f_with, kappa_sigma_profile, BallTester, SmoothingSpec};
use rflow_core::reproduce::{reproduce, Constants, Group};
use rflow_core::scenario::{run_scenario, Scenario};
use rflow_core::shapes::{calibrate_and_verify_barrier_f, calibrate_m, thin_eta0, verify_barrier_g, AnalyticSet};
use rflow_core::wave::{build_h_star_with, default_step, default_translation_window, graph_flow_translation_test, measure_wave};
use rflow_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rflow", version, about = "Nonlocal r-curvature flow of planar curves")]
struct Cli {
    /// Output directory (a file for make-shape).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenarios run concurrently by `run`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve one or more JSON scenarios.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Also write an SVG per snapshot.
        #[arg(long)]
        svg: bool,
    },
    /// Tabulate the r-curvature of every vertex of a curve file.
    Kappa {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        r: f64,
        /// Print the nested-ball profile of this vertex instead.
        #[arg(long)]
        sigma_profile: Option<usize>,
        /// Add the smoothed curvature with this transition width.
        #[arg(long)]
        f_delta: Option<f64>,
        #[arg(long, default_value_t = 32)]
        nodes: usize,
    },
    /// Sample an analytic set.
    MakeShape {
        #[arg(long)]
        kind: String,
        /// Remaining descriptor fields as a JSON object, e.g. '{"radius": 1.0}'.
        #[arg(long, default_value = "{}")]
        params: String,
        #[arg(long)]
        n: usize,
        /// Abscissa cut-off for the graph-type sets.
        #[arg(long)]
        window: Option<f64>,
    },
    /// Check the curvature lower bound of a barrier set.
    VerifyBarrier {
        which: Barrier,
        #[arg(long)]
        r: f64,
        /// Neck half-height of G (defaults to the thin-dumbbell value).
        #[arg(long)]
        eta: Option<f64>,
        /// Constant M of F (calibrated when absent).
        #[arg(long)]
        m: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Build the traveling wave and validate it.
    Wave {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        x_max: Option<f64>,
        /// Abscissa spacing of hstar.csv.
        #[arg(long, default_value_t = 1e-3)]
        dx: f64,
    },
    /// Run the acceptance experiments.
    Reproduce {
        /// Restrict to these groups: circle, predicates, barriers, neckpinch, convexity, wave.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Barrier {
    G,
    F,
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn input_err(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("rflow: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.cmd {
        Cmd::Run { scenarios, svg } => cmd_run(cli, scenarios, *svg),
        Cmd::Kappa { curve, r, sigma_profile, f_delta, nodes } => cmd_kappa(cli, curve, *r, *sigma_profile, *f_delta, *nodes),
        Cmd::MakeShape { kind, params, n, window } => cmd_make_shape(cli, kind, params, *n, *window),
        Cmd::VerifyBarrier { which, r, eta, m, samples } => cmd_verify(*which, *r, *eta, *m, *samples),
        Cmd::Wave { r, x_max, dx } => cmd_wave(cli, *r, *x_max, *dx),
        Cmd::Reproduce { only } => cmd_reproduce(cli, only),
    }
}

fn out_dir(cli: &Cli, default: &str) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn cmd_run(cli: &Cli, paths: &[PathBuf], svg: bool) -> Result<i32> {
    if cli.jobs == 0 {
        return Err(input_err("--jobs must be at least 1"));
    }
    let scenarios = paths.iter().map(|p| Scenario::load(p)).collect::<Result<Vec<_>>>()?;
    let root = out_dir(cli, "rflow_out");
    let targets: Vec<PathBuf> = if paths.len() == 1 {
        vec![root]
    } else {
        paths.iter().map(|p| root.join(p.file_stem().unwrap_or_default())).collect()
    };
    let next = AtomicUsize::new(0);
    let worst = Mutex::new(0);
    std::thread::scope(|s| {
        for _ in 0..cli.jobs.min(scenarios.len()) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(sc) = scenarios.get(k) else { break };
                let code = match run_scenario(sc, &targets[k], svg) {
                    Ok(rep) => {
                        let kinds: Vec<&str> = rep.events.iter().map(|e| e.kind.as_str()).collect();
                        say(
                            cli.quiet,
                            format!(
                                "{}: t = {:.6e} after {} steps, events [{}], {} files in {}",
                                paths[k].display(),
                                rep.final_time,
                                rep.steps,
                                kinds.join(", "),
                                rep.files.len() + 1,
                                targets[k].display()
                            ),
                        );
                        0
                    }
                    Err(e) => {
                        eprintln!("rflow: {}: {e}", paths[k].display());
                        e.exit_code()
                    }
                };
                let mut w = worst.lock().expect("exit code lock");
                *w = (*w).max(code);
            });
        }
    });
    Ok(worst.into_inner().expect("exit code lock"))
}

fn cmd_kappa(cli: &Cli, path: &Path, r: f64, sigma: Option<usize>, f_delta: Option<f64>, nodes: usize) -> Result<i32> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(input_err(format!("r must be positive, got {r}")));
    }
    let family = rflow_core::io::read_curve_csv(path)?;
    let [curve] = family.curves() else {
        return Err(input_err(format!("expected one curve, found {}", family.len())));
    };
    let text = if let Some(i) = sigma {
        sigma_csv(&kappa_sigma_profile(curve, i, r, 64)?)
    } else {
        let cs = std::slice::from_ref(curve);
        let tester = BallTester::new(cs);
        let samples = (0..curve.len()).map(|i| tester.sample(0, i, r)).collect::<Result<Vec<_>>>()?;
        let kf = match f_delta {
            Some(d) => {
                let spec = SmoothingSpec::new(r, d, nodes)?;
                Some((0..curve.len()).map(|i| kappa_f_with(&tester, 0, i, &spec)).collect::<Result<Vec<_>>>()?)
            }
            None => None,
        };
        kappa_csv(curve, &samples, kf.as_deref())
    };
    match &cli.out {
        Some(dir) => {
            let staged = StagedDir::new(dir)?;
            staged.write(if sigma.is_some() { "sigma_profile.csv" } else { "kappa.csv" }, &text)?;
            staged.commit()?;
        }
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_make_shape(cli: &Cli, kind: &str, params: &str, n: usize, window: Option<f64>) -> Result<i32> {
    let Some(out) = &cli.out else {
        return Err(input_err("make-shape needs --out FILE.csv"));
    };
    let mut obj: Value = serde_json::from_str(params).map_err(|e| Error::Schema(format!("--params: {e}")))?;
    let Some(map) = obj.as_object_mut() else {
        return Err(Error::Schema("--params must be a JSON object".into()));
    };
    map.insert("kind".into(), json!(kind));
    let set: AnalyticSet = serde_json::from_value(obj).map_err(|e| Error::Schema(e.to_string()))?;
    set.validate()?;
    let curve = set.discretize(n, window)?;
    std::fs::write(out, curve_csv(&curve))?;
    say(cli.quiet, format!("{} vertices, area {:.6e} -> {}", curve.len(), curve.area(), out.display()));
    Ok(0)
}

fn cmd_verify(which: Barrier, r: f64, eta: Option<f64>, m: Option<f64>, samples: usize) -> Result<i32> {
    let (min, bound, pass) = match which {
        Barrier::G => {
            let c = verify_barrier_g(r, eta.unwrap_or_else(|| thin_eta0(r)), samples)?;
            (c.min_kappa_r, c.bound, c.pass)
        }
        Barrier::F => {
            let m = match m {
                Some(m) => m,
                None => calibrate_m(r, samples)?,
            };
            let c = calibrate_and_verify_barrier_f(r, m, samples)?;
            (c.c0_observed, 0.0, c.pass)
        }
    };
    println!("{min:.12e},{bound:.12e},{pass}");
    Ok(0)
}

fn cmd_wave(cli: &Cli, r: f64, x_max: Option<f64>, dx: f64) -> Result<i32> {
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(input_err(format!("dx must be positive, got {dx}")));
    }
    let p = match x_max {
        Some(x) => build_h_star_with(r, x, default_step(r))?,
        None => rflow_core::wave::build_h_star(r)?,
    };
    let rep = measure_wave(&p, 2000)?;
    let speed = graph_flow_translation_test(&p, default_translation_window(&p), 0.2)?;
    let hd = p.half_domain();
    let steps = (2.0 * hd / dx).floor() as usize;
    let hstar = (0..steps).filter_map(|k| {
        let x = -hd + k as f64 * dx;
        p.h_star(x).map(|v| (x, v.0))
    });
    let report = json!({
        "r": rep.r,
        "ell": rep.ell,
        "x_r": rep.x_r,
        "x_tilde_r": rep.x_tilde_r,
        "slope_at_xr": rep.slope_at_xr,
        "c11_jump": rep.c11_jump,
        "max_branch_curvature": rep.max_branch_curvature,
        "vb1_residual": rep.vb1_residual,
        "translation_speed": speed,
    });
    let dir = out_dir(cli, "rflow_wave");
    let staged = StagedDir::new(&dir)?;
    staged.write("phi.csv", &xy_csv("x,phi", p.x_grid.iter().copied().zip(p.phi.iter().copied())))?;
    staged.write("hstar.csv", &xy_csv("x,h", hstar))?;
    staged.write("wave_report.json", &serde_json::to_string_pretty(&report).map_err(|e| Error::Schema(e.to_string()))?)?;
    staged.commit()?;
    say(cli.quiet, format!("x_r = {:.9}, slope {:.6}, speed {speed:.5} -> {}", rep.x_r, rep.slope_at_xr, dir.display()));
    rep.check(1e-3)?;
    if (speed - 1.0).abs() > 2e-2 {
        return Err(Error::ValidationFailed(format!("translation speed {speed}")));
    }
    Ok(0)
}

fn cmd_reproduce(cli: &Cli, only: &[String]) -> Result<i32> {
    let groups = only.iter().map(|s| Group::parse(s.trim())).collect::<Result<Vec<_>>>()?;
    let rows = reproduce(&groups, &Constants::default(), |r| {
        if !cli.quiet {
            println!("{r}");
        }
    });
    let failed = rows.iter().filter(|r| !r.pass).count();
    println!("{} of {} criteria passed", rows.len() - failed, rows.len());
    if let Some(dir) = &cli.out {
        let staged = StagedDir::new(dir)?;
        staged.write("reproduce.json", &serde_json::to_string_pretty(&rows).map_err(|e| Error::Schema(e.to_string()))?)?;
        staged.commit()?;
    }
    Ok(if failed == 0 { 0 } else { 3 })
}
