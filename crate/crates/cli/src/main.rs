mod config;
mod svg;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use spiraldim::damping::parse_real;
use spiraldim::pipeline::{analyze_trajectory, simulate};
use spiraldim::spiral_gen::DEFAULT_GRID_STEP;
use spiraldim::table::{predicted_dimension, reproduce_table, TABLE_TOLERANCE};
use spiraldim::theorems::{
    check_derivative_criterion, check_dimension_one_criterion, check_spiral_criterion,
    classify_rectifiability, predict_dimension, validate_lemma_f_bound, validate_polar_odes,
    ALPHA_ONE_TOL, DEFAULT_RESIDUAL_THRESHOLD,
};
use spiraldim::{
    generate, to_polar, AnalysisConfig, DampingSpec, Error, FitModel, Method, Sample, SpiralKind,
    SpiralSpec, SystemSpec, Tolerances, Trajectory, WindowPolicy,
};

#[derive(Parser, Debug)]
#[command(name = "spiraldim", version, about = "Box dimension of spirals and damped-oscillator curves")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate a solution and write its samples as CSV
    Simulate(SimulateArgs),
    /// Estimate the box dimension of a solution curve
    Dim(DimArgs),
    /// Classify whether solutions have finite length
    Rectifiability(RectArgs),
    /// Check the hypotheses of the dimension criteria on a solution curve
    VerifyCriteria(VerifyArgs),
    /// Rebuild the six-case table of predicted and measured dimensions
    ReproduceTable(TableArgs),
    /// Sample an analytic spiral as CSV
    Spiral(SpiralArgs),
}

fn real(s: &str) -> std::result::Result<f64, String> {
    parse_real(s).ok_or_else(|| format!("not a number: {s}"))
}

#[derive(Args, Debug, Clone)]
struct DampingArgs {
    /// Damping family: powerlaw, bessel or sampled
    #[arg(long, default_value = "powerlaw")]
    damping: String,
    #[arg(long, value_parser = real, default_value = "1")]
    lambda: f64,
    #[arg(long, value_parser = real, default_value = "1")]
    gamma: f64,
    #[arg(long, value_parser = real)]
    mu: Option<f64>,
    #[arg(long, value_parser = real, default_value = "0")]
    nu: f64,
    #[arg(long, value_parser = real, default_value = "1")]
    t0: f64,
    /// CSV of `t,h` knots for sampled damping
    #[arg(long)]
    knots: Option<PathBuf>,
    /// key=value file with defaults for any long flag
    #[arg(long)]
    config: Option<PathBuf>,
}

impl DampingArgs {
    fn spec(&self) -> Result<DampingSpec> {
        let mut map = BTreeMap::new();
        map.insert("kind".to_string(), self.damping.clone());
        map.insert("lambda".into(), self.lambda.to_string());
        map.insert("gamma".into(), self.gamma.to_string());
        if let Some(mu) = self.mu {
            map.insert("mu".into(), mu.to_string());
        }
        map.insert("nu".into(), self.nu.to_string());
        map.insert("t0".into(), self.t0.to_string());
        if let Some(k) = &self.knots {
            map.insert("knots".into(), k.to_string_lossy().into_owned());
        }
        let base = self.config.as_deref().and_then(Path::parent);
        Ok(DampingSpec::from_config(&map, base)?)
    }
}

#[derive(Args, Debug, Clone)]
struct SystemArgs {
    #[command(flatten)]
    damping: DampingArgs,
    /// Integrate the Bessel-type system `x'' + (2-mu)/t x' + (1 - nu²/t²) x = 0`
    #[arg(long)]
    bessel_system: bool,
    #[arg(long, value_parser = real, default_value = "1e5")]
    t_end: f64,
    #[arg(long, value_parser = real, default_value = "1")]
    x0: f64,
    #[arg(long, value_parser = real, default_value = "0")]
    y0: f64,
    #[arg(long, value_parser = real, default_value = "1e-9")]
    rtol: f64,
    #[arg(long, value_parser = real, default_value = "1e-12")]
    atol: f64,
}

impl SystemArgs {
    fn system(&self) -> Result<SystemSpec> {
        if self.bessel_system {
            let mu = self.damping.mu.context("--bessel-system needs --mu")?;
            return Ok(SystemSpec::bessel(mu, self.damping.nu, self.damping.t0)?);
        }
        Ok(SystemSpec::DampedOscillator(self.damping.spec()?))
    }

    fn analysis(&self, sys: &SystemSpec) -> AnalysisConfig {
        AnalysisConfig {
            t_end: self.t_end,
            init: Some(Sample {
                t: sys.domain_start(),
                x: self.x0,
                y: self.y0,
            }),
            tolerances: Tolerances {
                rel: self.rtol,
                abs: self.atol,
            },
            ..AnalysisConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Trajectory CSV; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DimArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Read the trajectory from this CSV instead of integrating
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long, value_parser = real, default_value = "0.1")]
    eps_max: f64,
    /// Defaults to twice the final radius, but not below 1e-4
    #[arg(long, value_parser = real)]
    eps_min: Option<f64>,
    /// sausage or box
    #[arg(long, default_value = "sausage")]
    method: Method,
    /// auto or full
    #[arg(long, default_value = "auto")]
    policy: WindowPolicy,
    /// head-corrected or power-law
    #[arg(long, default_value = "head-corrected")]
    model: FitModel,
    /// Grid spacing as a fraction of ε
    #[arg(long, value_parser = real, default_value = "1/8")]
    grid_factor: f64,
    /// Largest |estimate - prediction| reported as a match
    #[arg(long, value_parser = real, default_value = "0.05")]
    tolerance: f64,
    /// Profile CSV
    #[arg(long)]
    profile_out: Option<PathBuf>,
    /// Report JSON; standard output when absent
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RectArgs {
    #[command(flatten)]
    damping: DampingArgs,
    #[arg(long, value_parser = real, default_value = "1e6")]
    t_max: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Exponent for the curve checks; fitted from the damping when absent
    #[arg(long, value_parser = real)]
    alpha: Option<f64>,
    #[arg(long, value_parser = real, default_value_t = DEFAULT_RESIDUAL_THRESHOLD)]
    residual_threshold: f64,
    #[arg(long, default_value_t = 1000)]
    n_probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[arg(long, value_parser = real, default_value = "1e5")]
    t_end: f64,
    #[arg(long, value_parser = real, default_value = "0.1")]
    eps_max: f64,
    /// Table rows as JSON
    #[arg(long)]
    json: Option<PathBuf>,
    /// key=value file with defaults for any long flag
    #[arg(long)]
    #[allow(dead_code)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpiralArgs {
    /// power, scaled or exp
    #[arg(long, default_value = "power")]
    kind: String,
    #[arg(long, value_parser = real, default_value = "0.5")]
    alpha: f64,
    #[arg(long, value_parser = real, default_value = "1")]
    scale: f64,
    #[arg(long, value_parser = real, default_value = "0.1")]
    rate: f64,
    #[arg(long, value_parser = real, default_value_t = 2.0 * PI)]
    phi1: f64,
    #[arg(long, value_parser = real, default_value_t = 400.0 * PI)]
    phi2: f64,
    #[arg(long, value_parser = real, default_value_t = DEFAULT_GRID_STEP)]
    grid_step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// key=value file with defaults for any long flag
    #[arg(long)]
    #[allow(dead_code)]
    config: Option<PathBuf>,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: serde_json::Value) -> Result<()> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, &value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_svg(path: Option<&Path>, points: &[[f64; 2]]) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, svg::polyline(points)).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

fn trajectory_points(traj: &Trajectory) -> Vec<[f64; 2]> {
    traj.samples().iter().map(|s| [s.x, s.y]).collect()
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let sys = a.system.system()?;
    let traj = simulate(&sys, &a.system.analysis(&sys))?;
    let mut w = sink(a.out.as_deref())?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    write_svg(a.svg.as_deref(), &trajectory_points(&traj))
}

fn run_dim(a: &DimArgs) -> Result<()> {
    let sys = a.system.system()?;
    let cfg = AnalysisConfig {
        eps_max: a.eps_max,
        eps_min: a.eps_min,
        method: a.method,
        policy: a.policy,
        model: a.model,
        grid_factor: a.grid_factor,
        ..a.system.analysis(&sys)
    };
    let traj = match &a.trajectory {
        Some(p) => Trajectory::read_csv(File::open(p).with_context(|| format!("cannot open {}", p.display()))?)?,
        None => simulate(&sys, &cfg)?,
    };
    write_svg(a.svg.as_deref(), &trajectory_points(&traj))?;
    let t_end = traj.t_span().1;
    let analysis = analyze_trajectory(traj, &cfg)?;
    if let Some(p) = &a.profile_out {
        let mut w = sink(Some(p))?;
        analysis.profile.write_csv(&mut w)?;
        w.flush()?;
    }
    let predicted = predicted_dimension(&sys.damping()?, t_end);
    let report = analysis.report.with_prediction(predicted, a.tolerance);
    write_json(a.report_out.as_deref(), serde_json::to_value(report)?)
}

fn run_rectifiability(a: &RectArgs) -> Result<()> {
    let spec = a.damping.spec()?;
    if a.t_max.is_nan() || a.t_max <= spec.t0() {
        return Err(Error::Range(format!("t_max = {} must exceed t0 = {}", a.t_max, spec.t0())).into());
    }
    write_json(a.out.as_deref(), serde_json::to_value(classify_rectifiability(&spec, a.t_max))?)
}

fn run_verify(a: &VerifyArgs) -> Result<()> {
    let sys = a.system.system()?;
    let damping = sys.damping()?;
    let cfg = a.system.analysis(&sys);
    let t_end = cfg.t_end;
    let fit = damping.fit_alpha((t_end * 1e-3, t_end), 64)?;
    let prediction = predict_dimension(&damping, &fit, a.residual_threshold);
    let traj = simulate(&sys, &cfg)?;
    let curve = to_polar(&traj, cfg.mirror)?;
    let alpha = a.alpha.unwrap_or(fit.alpha);

    let mut reports = vec![prediction, classify_rectifiability(&damping, t_end)];
    let mut lemma = serde_json::Value::Null;
    if (alpha - 1.0).abs() <= ALPHA_ONE_TOL {
        reports.push(check_dimension_one_criterion(&curve)?);
        reports.push(check_derivative_criterion(&curve, 1.0)?);
    } else if alpha > 0.0 && alpha < 1.0 {
        let spiral = check_spiral_criterion(&curve, alpha)?;
        if let Some(a_bar) = spiral.hypothesis("decrement_bound").and_then(|h| h.witness) {
            let (m_bar, holds) = validate_lemma_f_bound(&curve, alpha, a_bar);
            lemma = json!({ "a_bar": a_bar, "m_bar": m_bar, "holds": holds });
        }
        reports.push(spiral);
        reports.push(check_derivative_criterion(&curve, alpha)?);
    }
    let (err_r, err_theta) = match &sys {
        SystemSpec::DampedOscillator(d) => validate_polar_odes(&traj, d, a.n_probes, a.seed),
        SystemSpec::BesselSystem { .. } => (f64::NAN, f64::NAN),
    };
    let out = json!({
        "damping": damping.describe(),
        "alpha_fit": fit,
        "alpha_used": alpha,
        "reports": reports,
        "upper_bound_from_decrement": lemma,
        "polar_odes": {
            "n_probes": a.n_probes,
            "seed": a.seed,
            "max_rel_err_r": err_r,
            "max_rel_err_theta": err_theta,
        },
    });
    write_json(a.out.as_deref(), out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.4}"))
}

fn run_table(a: &TableArgs) -> Result<bool> {
    let cfg = AnalysisConfig {
        t_end: a.t_end,
        eps_max: a.eps_max,
        ..AnalysisConfig::default()
    };
    let rows = reproduce_table(&cfg)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<12} {:>9} {:>9} {:>8} {:>10} {:>9}  {:<16} ok",
        "h(t)", "predicted", "estimated", "stderr", "power-law", "eps_min", "rectifiability"
    )?;
    for r in &rows {
        let rect = match r.rectifiability {
            Some(spiraldim::Rectifiability::Rectifiable) => "RECTIFIABLE",
            Some(spiraldim::Rectifiability::NonRectifiable) => "NON_RECTIFIABLE",
            None => "UNDETERMINED",
        };
        writeln!(
            out,
            "{:<12} {:>9} {:>9.4} {:>8.4} {:>10.4} {:>9.2e}  {:<16} {}",
            r.damping,
            fmt_opt(r.predicted),
            r.estimated,
            r.stderr,
            r.power_law_estimate,
            r.eps_min,
            rect,
            if r.ok { "yes" } else { "NO" }
        )?;
    }
    if let Some(p) = &a.json {
        write_json(Some(p), serde_json::to_value(&rows)?)?;
    }
    let ok = rows.iter().all(|r| r.ok);
    if !ok {
        eprintln!("some rows differ from the prediction by more than {TABLE_TOLERANCE}");
    }
    Ok(ok)
}

fn run_spiral(a: &SpiralArgs) -> Result<()> {
    let kind = match a.kind.to_ascii_lowercase().as_str() {
        "power" => SpiralKind::PowerSpiral { alpha: a.alpha },
        "scaled" => SpiralKind::ScaledPowerSpiral {
            scale: a.scale,
            alpha: a.alpha,
        },
        "exp" => SpiralKind::ExpSpiral { rate: a.rate },
        other => bail!(Error::Parse(format!("unknown spiral kind {other:?}"))),
    };
    let curve = generate(&SpiralSpec::new(kind, a.phi1, a.phi2)?, a.grid_step)?;
    let mut w = sink(a.out.as_deref())?;
    curve.write_csv(&mut w)?;
    w.flush()?;
    write_svg(a.svg.as_deref(), &curve.points())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SPIRALDIM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("SPIRALDIM_THREADS: not an integer: {v}")))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn is_parse_error(e: &anyhow::Error) -> bool {
    matches!(e.downcast_ref::<Error>(), Some(Error::Parse(_)))
}

fn run(cli: &Cli) -> Result<bool> {
    configure_threads()?;
    match &cli.command {
        Command::Simulate(a) => run_simulate(a)?,
        Command::Dim(a) => run_dim(a)?,
        Command::Rectifiability(a) => run_rectifiability(a)?,
        Command::VerifyCriteria(a) => run_verify(a)?,
        Command::ReproduceTable(a) => return run_table(a),
        Command::Spiral(a) => run_spiral(a)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args = match config::splice(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_parse_error(&e) { 2 } else { 1 })
        }
    }
}
