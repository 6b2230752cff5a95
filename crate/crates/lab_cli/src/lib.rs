//! Command-line driver: identity battery, probe ensembles, simulations,
//! certification and norm queries.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or configuration error, 3 runtime abort.

pub mod config;
pub mod output;

use axbl::battery::identity_battery;
use axbl::degiorgi::{certify_sup_bound, check_estimate, Branch, CertifyConfig, Exponents, SolutionTrace};
use axbl::dyadic::{besov_norm, DyadicPartition};
use axbl::lorentz::lorentz_norm;
use axbl::snapshot;
use axbl::{Error, Grid, ScalarField};
use clap::{Args, Parser, Subcommand};
use config::{ConfigError, RunConfig};
use output::Outputs;
use serde_json::json;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ABORT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "lab_cli", version, about = "Axisymmetric Euler-Boussinesq laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the identity battery.
    Verify(VerifyArgs),
    /// Run a simulation from a TOML config.
    Simulate(SimulateArgs),
    /// Evaluate the commutator probes over a seeded ensemble.
    Probe(ProbeArgs),
    /// Certify a sup bound on a density trace.
    Certify(CertifyArgs),
    /// Norms of a snapshot file.
    Norms(NormsArgs),
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long = "L", default_value_t = 4.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tolerance_scale: f64,
    #[arg(long, default_value = "lab_out/verify")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `mode`.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub ensemble: usize,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long = "L", default_value_t = 8.0)]
    pub half_width: f64,
    #[arg(long, default_value = "lab_out/probe")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value = "full")]
    pub branch: String,
    #[arg(long, default_value_t = f64::INFINITY)]
    pub p: f64,
    #[arg(long, default_value_t = 6.0)]
    pub q: f64,
    #[arg(long, default_value_t = f64::INFINITY)]
    pub p1: f64,
    #[arg(long, default_value_t = 3.0)]
    pub q1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub r: f64,
    #[arg(long, default_value = "lab_out/certify")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct NormsArgs {
    pub file: PathBuf,
    #[arg(long, num_args = 2, value_names = ["P", "Q"])]
    pub lorentz: Option<Vec<f64>>,
    #[arg(long, num_args = 3, value_names = ["S", "P", "R"])]
    pub besov: Option<Vec<f64>>,
    #[arg(long, value_name = "P")]
    pub lebesgue: Option<f64>,
}

/// Outcome of a command; the exit code and a message for stderr.
struct Failure(i32, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidGrid(_) | Error::InvalidArgument(_) | Error::Precondition(_) | Error::GridMismatch(_) => EXIT_USAGE,
            _ => EXIT_ABORT,
        };
        Failure(code, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure(EXIT_USAGE, e.0)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(EXIT_ABORT, e.to_string())
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("AXBL_THREADS") else {
        return Ok(());
    };
    let k: usize = v
        .parse()
        .ok()
        .filter(|&k| k > 0)
        .ok_or_else(|| Failure(EXIT_USAGE, format!("AXBL_THREADS = {v:?} must be a positive integer")))?;
    // a second call in the same process (tests) finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Verify(a) => verify(a),
        Command::Simulate(a) => simulate(a),
        Command::Probe(a) => probe(a),
        Command::Certify(a) => certify(a),
        Command::Norms(a) => norms(a),
    });
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn identity_criterion(name: &str) -> &'static str {
    if name.starts_with("partition") {
        "C1"
    } else if name.starts_with("dyadic") || name.starts_with("square") {
        "C2"
    } else if name.starts_with("riesz_vs") {
        "C3"
    } else if name.starts_with("moment_inv") || name.starts_with("riesz_moment") {
        "C4"
    } else if name.starts_with("biot") {
        "C5"
    } else if name.starts_with("moment_commutator") {
        "C6"
    } else {
        "C7"
    }
}

fn verify(a: VerifyArgs) -> Result<i32, Failure> {
    let grid = Grid::new(a.n, a.half_width)?;
    let checks = identity_battery(grid, a.tolerance_scale)?;
    let mut out = Outputs::new(&a.out, "verify", json!({"n": a.n, "L": a.half_width, "tolerance_scale": a.tolerance_scale}), None)?;
    for c in &checks {
        println!("{} {:<30} residual {:.3e} tol {:.1e} (n = {}, L = {}, {})", verdict(c.passed), c.identity, c.residual, c.tolerance, c.n, c.half_width, c.region);
        out.check(identity_criterion(&c.identity), &c.identity, c.passed);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.identity.as_str()).collect();
    out.write_json(
        "verify.json",
        &json!({"n": a.n, "L": a.half_width, "tolerance_scale": a.tolerance_scale, "passed": failed.is_empty(), "identities": checks}),
    )?;
    out.finish()?;
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed identities: {}", failed.join(", "));
        Ok(EXIT_CHECK)
    }
}

fn simulate(a: SimulateArgs) -> Result<i32, Failure> {
    let mut rc = RunConfig::load(&a.config)?;
    if let Some(m) = &a.mode {
        config::parse_mode(m)?;
        rc.mode = m.clone();
    }
    let mut sc = rc.sim_config()?;
    let init = rc.initial_state()?;
    let dir = a.out.clone().or_else(|| rc.output.dir.clone()).unwrap_or_else(|| PathBuf::from("lab_out/simulate"));
    let echo = serde_json::to_value(&rc).map_err(|e| Failure(EXIT_ABORT, e.to_string()))?;
    let mut out = Outputs::new(&dir, "simulate", echo, None)?;
    if rc.output.checkpoints {
        sc.checkpoint_dir = Some(dir.join("checkpoints"));
    }
    let res = axbl::solver::run(sc, init)?;
    out.write_text("series.csv", &res.series.to_csv())?;
    for p in &res.checkpoints {
        out.record(p.clone());
    }
    let abort = res.abort.as_ref().map(|e| e.to_string());
    out.write_json("summary.json", &json!({"summary": res.summary, "abort": abort}))?;
    for c in &res.summary.checks {
        let criterion = match c.name.as_str() {
            "zeta_l3_drift" => "C9",
            "heat_decay_exponent" => "C11",
            _ => "C10",
        };
        println!("{} {:<22} value {:.3e} threshold {:.1e}", verdict(c.passed), c.name, c.value, c.threshold);
        out.check(criterion, &c.name, c.passed);
    }
    for (k, v) in &res.summary.fits {
        println!("fit {k} = {v:.6e}");
    }
    out.finish()?;
    if let Some(msg) = abort {
        eprintln!("aborted: {msg}");
        return Ok(EXIT_ABORT);
    }
    Ok(if res.summary.passed() { EXIT_OK } else { EXIT_CHECK })
}

fn probe(a: ProbeArgs) -> Result<i32, Failure> {
    let grid = Grid::new(a.n, a.half_width)?;
    if a.ensemble == 0 {
        return Err(Failure(EXIT_USAGE, "ensemble size must be positive".into()));
    }
    let suite = axbl::commutator::run_probe_suite(a.seed, a.ensemble, grid)?;
    let mut out = Outputs::new(&a.out, "probe", json!({"n": a.n, "L": a.half_width, "ensemble": a.ensemble}), Some(a.seed))?;
    let mut ok = true;
    for r in &suite.reports {
        let finite = r.max_ratio.is_finite() && r.samples.iter().all(|s| s.ratio.is_finite());
        ok &= finite;
        println!("{} {:<10} max ratio {:.4e} over {} samples (n = {}, L = {})", verdict(finite), r.id, r.max_ratio, r.samples.len(), r.n, r.half_width);
        out.check("C8", &r.id, finite);
    }
    out.write_json("probe.json", &suite)?;
    out.finish()?;
    Ok(if ok { EXIT_OK } else { EXIT_CHECK })
}

fn certify(a: CertifyArgs) -> Result<i32, Failure> {
    let branch =
        Branch::parse(&a.branch).ok_or_else(|| Failure(EXIT_USAGE, format!("unknown branch {:?}; expected source, initial or full", a.branch)))?;
    let exponents = Exponents { p: a.p, q: a.q, p1: a.p1, q1: a.q1, r: a.r };
    let trace = SolutionTrace::load(&a.trace, exponents)?;
    let cert = certify_sup_bound(&trace, branch, &CertifyConfig::default())?;
    let estimate = check_estimate(&trace);
    let mut out = Outputs::new(
        &a.out,
        "certify",
        json!({"trace": a.trace, "branch": a.branch, "exponents": exponents}),
        None,
    )?;
    let ok = cert.sound && cert.bound.is_some();
    println!("{} {} (measured sup {:.6e}, n = {}, L = {})", verdict(ok), cert.verdict, cert.measured_sup, cert.n, cert.half_width);
    out.check("C14", "soundness", ok);
    out.write_json("certificate.json", &json!({"certificate": cert, "estimate": estimate}))?;
    out.finish()?;
    Ok(if ok { EXIT_OK } else { EXIT_CHECK })
}

fn load_scalar(path: &Path) -> Result<ScalarField, Failure> {
    let snap = snapshot::read(path)?;
    if snap.components.len() == 3 {
        return Ok(snap.into_vector()?.magnitude());
    }
    Ok(snap.into_scalar()?)
}

fn norms(a: NormsArgs) -> Result<i32, Failure> {
    let picked = a.lorentz.is_some() as usize + a.besov.is_some() as usize + a.lebesgue.is_some() as usize;
    if picked != 1 {
        return Err(Failure(EXIT_USAGE, "give exactly one of --lorentz P Q, --besov S P R, --lebesgue P".into()));
    }
    let u = load_scalar(&a.file)?;
    let value = if let Some(pq) = &a.lorentz {
        lorentz_norm(&u, pq[0], pq[1])?
    } else if let Some(spr) = &a.besov {
        besov_norm(&DyadicPartition::new(*u.grid())?, &u, spr[0], spr[1], spr[2])?
    } else {
        let p = a.lebesgue.unwrap_or(2.0);
        if !(p >= 1.0) {
            return Err(Failure(EXIT_USAGE, format!("Lebesgue exponent {p} must be at least 1")));
        }
        u.lebesgue_norm(p)
    };
    println!("{value:e}");
    Ok(EXIT_OK)
}
