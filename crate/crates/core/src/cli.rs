//! Command-line front end. Every command prints a JSON report on stdout and,
//! with --out, also writes it and its CSV tables to that directory.
//!
//! Exit codes: 0 success, 2 cone condition lost, 3 input error, 4 a solve or
//! verification check failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cone::{ray_limit, subsolution_check, ConeReport, SamplerConfig};
use crate::dhym::{lambda_theta_h1, phase_in_range};
use crate::error::Error;
use crate::io::{load_problem, write_field_csv, write_steps_csv, ProblemSpec};
use crate::solver::{continuity_solve, solve_ray, SolveOptions, SolveOutput, SolveStatus};
use crate::variational::{functional, path_independence_check, segment_convexity, PotentialPath};
use crate::verify::{self, random_field, Suite};

pub const EXIT_OK: i32 = 0;
pub const CONE_EXIT: i32 = 2;
pub const INPUT_ERROR: i32 = 3;
pub const VERIFY_FAILURE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "formeq", version, about = "Cone audits, ray and torus solves for the form equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Problem file (JSON).
    #[arg(long, global = true)]
    pub problem: Option<PathBuf>,
    /// Seed for every sampler.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Residual tolerance of the torus solves.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Directory for the report and CSV tables.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (all cores when absent).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Audit the cone condition at the given points.
    CheckCone,
    /// Smallest t with F(A + tB) = kappa.
    SolveRay,
    /// Continuity solve on the torus grid.
    SolveTorus,
    /// Deformed Hermitian-Yang-Mills solve through the reduced equation.
    Dhym,
    /// Functional value, shift invariance, path independence and convexity.
    Functional,
    /// Run the acceptance checks.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::Properties)]
        suite: SuiteArg,
        /// Run a single criterion.
        #[arg(long)]
        criterion: Option<u32>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SuiteArg {
    Properties,
    Full,
}

/// Report and exit code of one command, plus the CSV tables to write.
struct Outcome {
    report: Value,
    code: i32,
    tables: Vec<(&'static str, Vec<u8>)>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ConeExit { .. } => CONE_EXIT,
        Error::Stagnation { .. } | Error::Domination { .. } => VERIFY_FAILURE,
        _ => INPUT_ERROR,
    }
}

fn diagnostic(err: &Error) -> Value {
    match err {
        Error::InputAt { pointer, message } => json!({ "error": message, "pointer": pointer }),
        other => json!({ "error": other.to_string() }),
    }
}

/// Parses the arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { INPUT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(k) = cli.common.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    match execute(&cli).and_then(|o| emit(&cli.common, o)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            exit_code(&e)
        }
    }
}

fn emit(common: &Common, o: Outcome) -> Result<i32, Error> {
    let text = serde_json::to_string_pretty(&o.report)?;
    // a closed pipe is not an error of the command
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), format!("{text}\n"))?;
        for (name, bytes) in &o.tables {
            std::fs::write(dir.join(name), bytes)?;
        }
    }
    Ok(o.code)
}

fn problem(common: &Common) -> Result<ProblemSpec, Error> {
    let path: &Path = common.problem.as_deref().ok_or_else(|| Error::Input("--problem is required".into()))?;
    load_problem(path)
}

fn to_value<T: Serialize>(x: &T) -> Result<Value, Error> {
    Ok(serde_json::to_value(x)?)
}

fn execute(cli: &Cli) -> Result<Outcome, Error> {
    let c = &cli.common;
    match &cli.command {
        Command::CheckCone => check_cone(c),
        Command::SolveRay => ray(c),
        Command::SolveTorus => torus(c),
        Command::Dhym => dhym(c),
        Command::Functional => functional_cmd(c),
        Command::Verify { suite, criterion } => verify_cmd(c, *suite, *criterion),
    }
}

fn check_cone(c: &Common) -> Result<Outcome, Error> {
    let spec = problem(c)?;
    let ctx = spec.context()?;
    let budget = SamplerConfig::with_seed(c.seed);
    let reports: Vec<ConeReport> = spec.cone_points()?.iter().map(|a| subsolution_check(a, &ctx, &budget)).collect::<Result<_, _>>()?;
    let pass = reports.iter().all(|r| r.pass);
    Ok(Outcome {
        report: json!({ "command": "check-cone", "seed": c.seed, "kappa": ctx.kappa, "pass": pass, "points": to_value(&reports)? }),
        code: if pass { EXIT_OK } else { CONE_EXIT },
        tables: Vec::new(),
    })
}

fn ray(c: &Common) -> Result<Outcome, Error> {
    let spec = problem(c)?;
    let ctx = spec.context()?;
    let (a, b) = spec.ray()?;
    let t = solve_ray(&a, &b, &ctx).map_err(|e| crate::io::at("/b", e))?;
    let value = t.map(|t| ctx.f(&a.axpy(t, &b))).transpose()?;
    let limit = ray_limit(&a, &b, &ctx).map_err(|e| crate::io::at("/a", e))?;
    Ok(Outcome {
        report: json!({
            "command": "solve-ray",
            "kappa": ctx.kappa,
            "f_at_base": ctx.f(&a)?,
            "ray_limit": limit,
            "t": t,
            "f_at_root": value,
        }),
        code: EXIT_OK,
        tables: Vec::new(),
    })
}

fn options(c: &Common) -> SolveOptions {
    SolveOptions { tol: c.tol, path_tol: c.tol, ..SolveOptions::default() }
}

fn status_code(out: &SolveOutput) -> i32 {
    match out.trace.status {
        SolveStatus::Converged => EXIT_OK,
        SolveStatus::ConeExit { .. } => CONE_EXIT,
        SolveStatus::Stagnation { .. } => VERIFY_FAILURE,
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<(), Error>) -> Result<Vec<u8>, Error> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn sup(v: impl Iterator<Item = f64>) -> f64 {
    v.map(f64::abs).fold(0.0, f64::max)
}

fn torus(c: &Common) -> Result<Outcome, Error> {
    let spec = problem(c)?;
    let p = spec.torus_problem()?;
    let start = spec.initial(&p.grid)?;
    let out = continuity_solve(&p, &options(c), start.as_deref())?;
    let error = match spec.u_star(&p.grid)? {
        Some(mut want) if out.converged() => {
            p.grid.remove_mean(&mut want);
            Some(sup(out.u.iter().zip(&want).map(|(a, b)| a - b)))
        }
        _ => None,
    };
    let report = json!({
        "command": "solve-torus",
        "n": p.dim(),
        "N": p.grid.size(),
        "kappa": p.kappa,
        "converged": out.converged(),
        "residual_sup": sup(p.residual(&out.u)?.into_iter()),
        "functional": functional(&out.u, &p)?,
        "sup_error_vs_u_star": error,
        "trace": to_value(&out.trace)?,
    });
    let tables = vec![
        ("steps.csv", csv_bytes(|b| write_steps_csv(b, &out.trace.steps))?),
        ("u.csv", csv_bytes(|b| write_field_csv(b, &p.grid, &[("u", &out.u)]))?),
    ];
    Ok(Outcome { report, code: status_code(&out), tables })
}

fn dhym(c: &Common) -> Result<Outcome, Error> {
    let spec = problem(c)?;
    let inst = spec.dhym_instance()?;
    let grid = spec.grid(8)?;
    let hat = inst.omega_hat().map_err(|e| crate::io::at("/omega0", e))?;
    let h1 = lambda_theta_h1(&inst.rho, &hat, inst.theta, 256, c.seed)?;
    let p = inst.torus_problem(grid.clone())?;
    let start = spec.initial(&grid)?;
    let out = continuity_solve(&p, &options(c), start.as_deref())?;
    let res = inst.residual_fields(&grid, &out.u)?;
    let direct: Vec<f64> = res.iter().map(|r| r.direct).collect();
    let angle: Vec<f64> = res.iter().map(|r| r.angle).collect();
    let reduced: Vec<f64> = res.iter().map(|r| r.reduced.unwrap_or(f64::NAN)).collect();
    let report = json!({
        "command": "dhym",
        "n": inst.dim(),
        "N": grid.size(),
        "theta": inst.theta,
        "cot_theta": inst.cot(),
        "phase_in_range": phase_in_range(inst.theta, inst.dim()),
        "h1": to_value(&h1)?,
        "converged": out.converged(),
        "residual_sup": { "direct": sup(direct.iter().copied()), "angle": sup(angle.iter().copied()), "reduced": sup(reduced.iter().copied()) },
        "trace": to_value(&out.trace)?,
    });
    let tables = vec![
        ("steps.csv", csv_bytes(|b| write_steps_csv(b, &out.trace.steps))?),
        ("u.csv", csv_bytes(|b| write_field_csv(b, &grid, &[("u", &out.u)]))?),
        ("residuals.csv", csv_bytes(|b| write_field_csv(b, &grid, &[("direct", &direct), ("angle", &angle), ("reduced", &reduced)]))?),
    ];
    Ok(Outcome { report, code: status_code(&out), tables })
}

fn functional_cmd(c: &Common) -> Result<Outcome, Error> {
    use rand::SeedableRng;
    let spec = problem(c)?;
    let p = spec.torus_problem()?;
    let phi = spec.potential(&p.grid)?;
    let value = functional(&phi, &p)?;
    let shifted: Vec<f64> = phi.iter().map(|x| x + 1.0).collect();
    let shift = (functional(&shifted, &p)? - value).abs();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(c.seed);
    let mid = random_field(&p.grid, &mut rng, 0.01);
    let path = path_independence_check(&phi, &PotentialPath::straight(&phi, 64), &PotentialPath::two_segment(&mid, &phi, 64), &p)?;
    let zero = vec![0.0; phi.len()];
    let convexity = segment_convexity(&zero, &phi, &p, &[0.0, 0.25, 0.5, 0.75, 1.0])?;
    let convex = convexity.iter().filter(|s| s.subsolution).all(|s| s.second_variation >= -1e-10);
    let pass = shift <= 1e-10 && path <= 1e-6 && convex;
    Ok(Outcome {
        report: json!({
            "command": "functional",
            "seed": c.seed,
            "value": value,
            "shift_change": shift,
            "path_independence": path,
            "convexity": to_value(&convexity)?,
            "pass": pass,
        }),
        code: if pass { EXIT_OK } else { VERIFY_FAILURE },
        tables: Vec::new(),
    })
}

fn verify_cmd(c: &Common, suite: SuiteArg, criterion: Option<u32>) -> Result<Outcome, Error> {
    let results = match criterion {
        Some(id) => vec![verify::run(id, c.seed)?],
        None => verify::run_suite(if matches!(suite, SuiteArg::Full) { Suite::Full } else { Suite::Properties }, c.seed)?,
    };
    let pass = results.iter().all(|r| r.pass);
    Ok(Outcome {
        report: json!({ "command": "verify", "seed": c.seed, "pass": pass, "criteria": to_value(&results)? }),
        code: if pass { EXIT_OK } else { VERIFY_FAILURE },
        tables: Vec::new(),
    })
}
