//! `selab`: command-line front end for the singular elliptic lab.
//!
//! Exit codes: 0 success, 1 domain/model error, 2 convergence failure or
//! nonexistence indicated, 3 usage error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use selab_core::bifurcation::{estimate_lambda_star, lambda_sweep, SweepOptions};
use selab_core::comparison::{check_ordering, lemma_psi};
use selab_core::config::ProblemConfig;
use selab_core::constructions::{
    build_subsolution_convection, build_subsolution_eigen, build_supersolution,
};
use selab_core::hprofile::{build_h_profile, verify_h_bound};
use selab_core::solver::{self, Verdict};
use selab_core::spectral::{default_collar_width, first_eigenpair, hopf_collar};
use selab_core::verify::{self, VerifyOptions};
use selab_core::{Error, Grid, ProblemSpec, SingularTerm};

#[derive(Parser)]
#[command(name = "selab", version, about = "Finite-difference lab for -Δu + K g(u) + |∇u|^a = λ f(x,u), u = 0 on the boundary")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve with continuation in ε and write the field and a JSON report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        /// Comma-separated, strictly decreasing ε values.
        #[arg(long, value_delimiter = ',')]
        eps_schedule: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        /// Field CSV, or a directory that receives u.csv and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Continuation at several λ; writes lambda,verdict,max_u,min_u,mass_integral.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        /// Sequential ascending run, each λ warm-started from the last solution.
        #[arg(long)]
        warm_start: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bracket the existence threshold by bisection on solver verdicts.
    LambdaStar {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        min: f64,
        #[arg(long, default_value_t = 100.0)]
        max: f64,
        #[arg(long, default_value_t = 12)]
        iters: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// First Dirichlet eigenpair on the configured grid.
    Eigen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// CSV for φ₁.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate h'' = g(h), h(0) = h'(0) = 0 on [0, cap].
    Hode {
        /// Power exponent of g(s) = s^-alpha (overrides the config).
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        cap: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// CSV with columns t,h,dh.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a sub- or super-solution.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        lambda: Option<f64>,
        /// Collar width for sub-eigen (default four grid spacings).
        #[arg(long)]
        collar: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Check the comparison principle on two field CSVs.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        /// Candidate sub-solution v.
        #[arg(long)]
        sub: PathBuf,
        /// Candidate super-solution w.
        #[arg(long = "super")]
        sup: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance battery.
    Verify {
        /// Run only checks whose name contains this string.
        #[arg(long)]
        only: Option<String>,
        /// Replace every grid size in the battery by this node count.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Super,
    SubConv,
    SubEigen,
}

/// Failure classes mapped onto exit codes.
enum Fail {
    Model(String),
    Convergence(String),
    Usage(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(m) => Fail::Usage(m),
            e if e.is_convergence_failure() => Fail::Convergence(e.to_string()),
            e => Fail::Model(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail::Model(e.to_string())
    }
}

type Run = std::result::Result<u8, Fail>;

fn load(path: &Path, lambda: Option<f64>) -> Result<ProblemSpec, Fail> {
    let spec = ProblemConfig::load(path)?.to_spec()?;
    Ok(match lambda {
        Some(l) => spec.with_lambda(l)?,
        None => spec,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Fail> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Fail::Model(format!("{}: {e}", dir.display())))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Fail::Model(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Fail> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => {
            use std::io::Write;
            let mut w = create(p)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| Fail::Model(e.to_string()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn write_field(grid: &Grid, u: &[f64], path: &Path) -> Result<(), Fail> {
    grid.write_csv(u, create(path)?)?;
    Ok(())
}

/// `--out` names a CSV file when it ends in `.csv`, otherwise a directory.
fn outputs(out: Option<PathBuf>, report: Option<PathBuf>, field: &str, meta: &str) -> (Option<PathBuf>, Option<PathBuf>) {
    match out {
        Some(o) if o.extension().is_some_and(|e| e == "csv") => (Some(o), report),
        Some(dir) => {
            let r = report.unwrap_or_else(|| dir.join(meta));
            (Some(dir.join(field)), Some(r))
        }
        None => (None, report),
    }
}

fn solve(
    config: PathBuf,
    lambda: Option<f64>,
    schedule: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
    out: Option<PathBuf>,
    report: Option<PathBuf>,
) -> Run {
    let spec = load(&config, lambda)?;
    let schedule = schedule.unwrap_or_else(solver::default_schedule);
    let rep = solver::solve_with_continuation(&spec, &schedule, tol, max_iter)?;
    let (field, report) = outputs(out, report, "u.csv", "report.json");
    if let Some(f) = field {
        write_field(spec.grid(), &rep.solution, &f)?;
    }
    if let Some(r) = report {
        write_json(&rep, Some(&r))?;
    }
    println!(
        "solve: lambda={} verdict={} residual={:e} min={:e} max={:e}",
        spec.lambda(),
        rep.verdict.as_str(),
        rep.residual,
        rep.min_interior,
        rep.max_value
    );
    Ok(if rep.verdict == Verdict::Converged { 0 } else { 2 })
}

fn sweep(config: PathBuf, lambdas: Vec<f64>, warm_start: bool, tol: f64, out: Option<PathBuf>) -> Run {
    let spec = load(&config, None)?;
    let opts = SweepOptions {
        tol,
        warm_start,
        ..SweepOptions::default()
    };
    let res = lambda_sweep(&spec, &lambdas, &opts)?;
    match out {
        Some(p) => res.write_csv(create(&p)?)?,
        None => res.write_csv(std::io::stdout().lock())?,
    }
    let conv = res.entries.iter().filter(|e| e.verdict == Verdict::Converged).count();
    eprintln!(
        "sweep: {} lambdas, {conv} converged, mode {}, up-set {}",
        res.entries.len(),
        res.mode,
        res.is_up_set()
    );
    Ok(0)
}

fn lambda_star(config: PathBuf, min: f64, max: f64, iters: usize, out: Option<PathBuf>) -> Run {
    let spec = load(&config, None)?;
    let est = estimate_lambda_star(&spec, min, max, iters, &SweepOptions::default())?;
    write_json(&est, out.as_deref())?;
    eprintln!(
        "lambda-star: lo={:?} hi={:?}{}",
        est.lo,
        est.hi,
        est.sentinel.map(|s| format!(" ({s})")).unwrap_or_default()
    );
    Ok(0)
}

#[derive(Serialize)]
struct EigenJson {
    lambda1: f64,
    iterations: usize,
    residual: f64,
    grid_n: usize,
}

fn eigen(config: PathBuf, tol: f64, out: Option<PathBuf>) -> Run {
    let spec = load(&config, None)?;
    let e = first_eigenpair(spec.grid(), tol)?;
    if let Some(p) = out {
        write_field(spec.grid(), &e.phi, &p)?;
    }
    write_json(
        &EigenJson {
            lambda1: e.lambda1,
            iterations: e.iterations,
            residual: e.residual,
            grid_n: spec.grid().n_interior()[0],
        },
        None,
    )?;
    Ok(0)
}

fn hode(alpha: Option<f64>, config: Option<PathBuf>, cap: f64, tol: f64, out: Option<PathBuf>) -> Run {
    let g = match (alpha, config) {
        (Some(a), _) => SingularTerm::power(a)?,
        (None, Some(c)) => ProblemConfig::load(&c)?.singular()?,
        (None, None) => return Err(Fail::Usage("hode needs --alpha or --config".into())),
    };
    let p = build_h_profile(&g, cap, tol)?;
    if let Some(path) = out {
        let mut wr = csv::Writer::from_writer(create(&path)?);
        let io = |e: csv::Error| Fail::Model(e.to_string());
        wr.write_record(["t", "h", "dh"]).map_err(io)?;
        for i in 0..p.len() {
            wr.write_record([p.t()[i].to_string(), p.h()[i].to_string(), p.dh()[i].to_string()])
                .map_err(io)?;
        }
        wr.flush().map_err(|e| Fail::Model(e.to_string()))?;
    }
    write_json(&verify_h_bound(&p, tol), None)?;
    Ok(0)
}

fn construct(
    config: PathBuf,
    kind: Kind,
    lambda: Option<f64>,
    collar: Option<f64>,
    out: Option<PathBuf>,
    meta: Option<PathBuf>,
) -> Run {
    let spec = load(&config, lambda)?;
    let c = match kind {
        Kind::Super => build_supersolution(&spec)?,
        Kind::SubConv => build_subsolution_convection(&spec)?,
        Kind::SubEigen => {
            let grid = spec.grid();
            let eig = first_eigenpair(grid, 1e-10)?;
            let col = hopf_collar(grid, &eig, collar.unwrap_or_else(|| default_collar_width(grid)))?;
            let hp = build_h_profile(spec.singular(), eig.phi.max(), 1e-9)?;
            build_subsolution_eigen(&spec, &eig, &col, &hp)?
        }
    };
    let (field, meta) = outputs(out, meta, "field.csv", "meta.json");
    if let Some(f) = field {
        write_field(spec.grid(), &c.field, &f)?;
    }
    write_json(&c.meta, meta.as_deref())?;
    Ok(0)
}

fn compare(config: PathBuf, lambda: Option<f64>, sub: PathBuf, sup: PathBuf, tol: f64, out: Option<PathBuf>) -> Run {
    let spec = load(&config, lambda)?;
    let read = |p: &Path| -> Result<selab_core::Field, Fail> {
        let f = File::open(p).map_err(|e| Fail::Model(format!("{}: {e}", p.display())))?;
        Ok(spec.grid().read_csv(f)?)
    };
    let (v, w) = (read(&sub)?, read(&sup)?);
    let psi = lemma_psi(&spec);
    let rep = check_ordering(spec.grid(), &psi, &v, &w, tol)?;
    write_json(&rep, out.as_deref())?;
    Ok(0)
}

fn run_verify(only: Option<String>, n: Option<usize>, seed: u64) -> Run {
    if let Some(f) = &only {
        if !verify::CHECKS.iter().any(|c| c.contains(f.as_str())) {
            return Err(Fail::Usage(format!(
                "no check matches '{f}'; available: {}",
                verify::CHECKS.join(", ")
            )));
        }
    }
    let results = verify::run(&VerifyOptions {
        only,
        n_override: n,
        seed,
    });
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    println!(
        "verify: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    Ok(if failed.is_empty() { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Solve {
            config,
            lambda,
            eps_schedule,
            tol,
            max_iter,
            out,
            report,
        } => solve(config, lambda, eps_schedule, tol, max_iter, out, report),
        Cmd::Sweep {
            config,
            lambdas,
            warm_start,
            tol,
            out,
        } => sweep(config, lambdas, warm_start, tol, out),
        Cmd::LambdaStar {
            config,
            min,
            max,
            iters,
            out,
        } => lambda_star(config, min, max, iters, out),
        Cmd::Eigen { config, tol, out } => eigen(config, tol, out),
        Cmd::Hode {
            alpha,
            config,
            cap,
            tol,
            out,
        } => hode(alpha, config, cap, tol, out),
        Cmd::Construct {
            config,
            kind,
            lambda,
            collar,
            out,
            meta,
        } => construct(config, kind, lambda, collar, out, meta),
        Cmd::Compare {
            config,
            lambda,
            sub,
            sup,
            tol,
            out,
        } => compare(config, lambda, sub, sup, tol, out),
        Cmd::Verify { only, n, seed } => run_verify(only, n, seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Fail::Model(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Convergence(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(3)
        }
    }
}
