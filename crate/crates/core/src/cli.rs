//! The `pdcone` command line.
//!
//! Exit codes: 0 success, 1 failed check or unconverged projection, 2 domain
//! error in the inputs, 3 I/O or parse error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::convexity::{lts_check, lts_closure, ExponentialSet, HermSubspace};
use crate::error::{Error, Result};
use crate::geometry::{exp_a, finsler_norm, geodesic_distance, log_a, GeodesicSegment, TangentVec};
use crate::io::{self, CurveRecord, MatrixFile};
use crate::matcore::{HermMatrix, PParams, PosDefMatrix};
use crate::oracle::{self, CheckReport, Ensemble};
use crate::projection::{project_to_k, ProjectOptions};
use crate::sampling;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pdcone", version, about = "Finsler p-norm geometry of positive-definite matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Geodesic distance d_p(a, b)
    Distance(DistanceArgs),
    /// Sample the geodesic from a to b
    Geodesic(GeodesicArgs),
    /// Exp^a(x) = a^{1/2} exp(a^{-1/2} x a^{-1/2}) a^{1/2}
    Exp(ExpArgs),
    /// log_a(b), the inverse of Exp^a
    Log(LogArgs),
    /// Nearest point of K = exp(H) to a query matrix
    Project(ProjectArgs),
    /// Lie triple closure of a set of generators
    Closure(ClosureArgs),
    /// Run the randomized inequality checks
    Check(CheckArgs),
    /// Generate seeded random instances
    Gen(GenArgs),
}

#[derive(Debug, Args)]
struct DistanceArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(short, long, default_value = "2")]
    p: PParams,
}

#[derive(Debug, Args)]
struct GeodesicArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(short, long, default_value = "2")]
    p: PParams,
    /// Comma-separated, strictly increasing parameters
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "steps")]
    t: Option<Vec<f64>>,
    /// Number of equally spaced parameters in [0, 1]
    #[arg(long)]
    steps: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExpArgs {
    /// Base point a
    base: PathBuf,
    /// Tangent vector x
    tangent: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct LogArgs {
    /// Base point a
    base: PathBuf,
    /// Target point b
    point: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    query: PathBuf,
    subspace: PathBuf,
    #[arg(short, long, default_value = "2")]
    p: PParams,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Start from a random point of K
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClosureArgs {
    /// Generator matrix files
    generators: Vec<PathBuf>,
    /// Subspace file whose basis is added to the generators
    #[arg(long)]
    subspace: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 2)]
    n_min: usize,
    #[arg(long, default_value_t = 8)]
    n_max: usize,
    #[arg(long, default_value_t = 2.5)]
    norm_cap: f64,
    /// Exponent to test (repeatable; "inf" allowed)
    #[arg(short, long = "p")]
    p: Vec<PParams>,
    /// Restrict to the named check (repeatable)
    #[arg(long)]
    only: Vec<String>,
    /// Re-run the single trial with this seed (needs exactly one --only)
    #[arg(long)]
    replay: Option<u64>,
    /// Machine-readable JSON report
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Hermitian,
    Posdef,
    SubspaceLts,
}

impl GenKind {
    fn label(self) -> &'static str {
        match self {
            GenKind::Hermitian => "hermitian",
            GenKind::Posdef => "posdef",
            GenKind::SubspaceLts => "subspace-lts",
        }
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    kind: GenKind,
    #[arg(short, long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Bound on the operator norm of the sampled Hermitian (or its log)
    #[arg(long, default_value_t = 2.5)]
    cap: f64,
    /// Output directory; files are named `<kind>-<index>.json`
    #[arg(long)]
    out_dir: PathBuf,
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_DOMAIN
            }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Distance(a) => cmd_distance(a, out),
        Command::Geodesic(a) => cmd_geodesic(a, out),
        Command::Exp(a) => cmd_exp(a, out),
        Command::Log(a) => cmd_log(a, out),
        Command::Project(a) => cmd_project(a, out),
        Command::Closure(a) => cmd_closure(a, out),
        Command::Check(a) => cmd_check(a, out),
        Command::Gen(a) => cmd_gen(a, out),
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    out.write_all(io::to_json(value)?.as_bytes())?;
    Ok(())
}

/// Paths are checked before any file is parsed or anything computed.
fn require_files(paths: &[&Path]) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("input file not found: {}", p.display()),
            )));
        }
    }
    Ok(())
}

fn require_dir_for(path: &Path) -> Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() && !d.is_dir() => Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory not found: {}", d.display()),
        ))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct DistanceOut {
    distance: f64,
    /// `||a^{-1/2} log_a(b) a^{-1/2}||_p`, the Finsler norm of the log map.
    log_map_norm: f64,
    p: PParams,
    n: usize,
}

fn cmd_distance(args: DistanceArgs, out: &mut dyn Write) -> Result<i32> {
    require_files(&[&args.a, &args.b])?;
    let a = io::load_posdef(&args.a)?;
    let b = io::load_posdef(&args.b)?;
    let pp = args.p;
    // both orientations, so that swapping the inputs gives identical output
    let distance = 0.5 * (geodesic_distance(&a, &b, pp)? + geodesic_distance(&b, &a, pp)?);
    let cert = |x: &PosDefMatrix, y: &PosDefMatrix| -> Result<f64> {
        finsler_norm(&TangentVec::new(x.clone(), log_a(x, y)?)?, pp)
    };
    let log_map_norm = 0.5 * (cert(&a, &b)? + cert(&b, &a)?);
    emit(out, &DistanceOut { distance, log_map_norm, p: pp, n: a.dim() })?;
    Ok(EXIT_OK)
}

fn t_grid(t: Option<Vec<f64>>, steps: Option<usize>) -> Result<Vec<f64>> {
    let grid = match (t, steps) {
        (Some(t), _) => t,
        (None, Some(0)) => return Err(Error::InvalidInput("--steps must be positive".into())),
        (None, Some(1)) => vec![0.0],
        (None, Some(k)) => (0..k).map(|i| if i == k - 1 { 1.0 } else { i as f64 / (k - 1) as f64 }).collect(),
        (None, None) => return Err(Error::InvalidInput("give --t or --steps".into())),
    };
    if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("parameter grid must be non-empty and finite".into()));
    }
    if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotoneParameter { index: i + 1 });
    }
    Ok(grid)
}

#[derive(Serialize)]
struct GeodesicOut {
    samples: usize,
    length: f64,
    max_speed_deviation: f64,
    p: PParams,
    n: usize,
}

fn cmd_geodesic(args: GeodesicArgs, out: &mut dyn Write) -> Result<i32> {
    require_files(&[&args.a, &args.b])?;
    require_dir_for(&args.out)?;
    let grid = t_grid(args.t, args.steps)?;
    let a = io::load_posdef(&args.a)?;
    let b = io::load_posdef(&args.b)?;
    let seg = GeodesicSegment::new(&a, &b)?;
    let pp = args.p;
    let length = seg.length(pp);
    let mut recs = Vec::with_capacity(grid.len());
    let mut dev: f64 = 0.0;
    for &t in &grid {
        let speed = seg.speed(t, pp)?;
        dev = dev.max((speed - length).abs());
        recs.push(CurveRecord {
            t,
            matrix: MatrixFile::from(&seg.point(t)?),
            speed: Some(speed),
        });
    }
    io::write_json(&args.out, &recs)?;
    emit(
        out,
        &GeodesicOut {
            samples: recs.len(),
            length,
            max_speed_deviation: dev,
            p: pp,
            n: a.dim(),
        },
    )?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct MatrixOut {
    n: usize,
    out: String,
}

fn cmd_exp(args: ExpArgs, out: &mut dyn Write) -> Result<i32> {
    require_files(&[&args.base, &args.tangent])?;
    require_dir_for(&args.out)?;
    let a = io::load_posdef(&args.base)?;
    let x = io::load_herm(&args.tangent)?;
    let y = exp_a(&a, &x)?;
    io::save_matrix(&args.out, y.as_matrix())?;
    emit(out, &MatrixOut { n: y.dim(), out: args.out.display().to_string() })?;
    Ok(EXIT_OK)
}

fn cmd_log(args: LogArgs, out: &mut dyn Write) -> Result<i32> {
    require_files(&[&args.base, &args.point])?;
    require_dir_for(&args.out)?;
    let a = io::load_posdef(&args.base)?;
    let b = io::load_posdef(&args.point)?;
    let x = log_a(&a, &b)?;
    io::save_matrix(&args.out, x.as_matrix())?;
    emit(out, &MatrixOut { n: x.dim(), out: args.out.display().to_string() })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ProjectOut {
    distance: f64,
    argmin: MatrixFile,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn cmd_project(args: ProjectArgs, out: &mut dyn Write) -> Result<i32> {
    require_files(&[&args.query, &args.subspace])?;
    if let Some(o) = &args.out {
        require_dir_for(o)?;
    }
    let b = io::load_posdef(&args.query)?;
    let (h, _) = io::load_subspace(&args.subspace)?;
    let k = ExponentialSet::verified(h)?;
    let opts = ProjectOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        seed: args.seed,
    };
    let r = project_to_k(&b, &k, args.p, opts)?;
    let report = ProjectOut {
        distance: r.distance,
        argmin: MatrixFile::from(&r.argmin),
        residual: r.first_order_residual,
        iterations: r.iterations,
        converged: r.converged,
    };
    if let Some(o) = &args.out {
        io::write_json(o, &report)?;
    }
    emit(out, &report)?;
    Ok(if r.converged { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[derive(Serialize)]
struct ClosureOut {
    n: usize,
    generators: usize,
    dim: usize,
    lts_residual: f64,
}

fn cmd_closure(args: ClosureArgs, out: &mut dyn Write) -> Result<i32> {
    let mut inputs: Vec<&Path> = args.generators.iter().map(|p| p.as_path()).collect();
    if let Some(s) = &args.subspace {
        inputs.push(s);
    }
    require_files(&inputs)?;
    require_dir_for(&args.out)?;
    let mut gens: Vec<HermMatrix> = args.generators.iter().map(|p| io::load_herm(p)).collect::<Result<_>>()?;
    if let Some(s) = &args.subspace {
        gens.extend(io::load_subspace(s)?.0.basis().iter().cloned());
    }
    let h = lts_closure(&gens)?;
    io::save_subspace(&args.out, &h)?;
    emit(
        out,
        &ClosureOut {
            n: h.ambient_dim(),
            generators: gens.len(),
            dim: h.dim(),
            lts_residual: lts_check(&h).max_residual,
        },
    )?;
    Ok(EXIT_OK)
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn print_table(out: &mut dyn Write, reports: &[CheckReport]) -> Result<()> {
    writeln!(
        out,
        "{:<24} {:>7} {:>12} {:>10} {:>6} {:>22}  status",
        "check", "trials", "worst_slack", "tolerance", "p", "worst_seed"
    )?;
    for r in reports {
        writeln!(
            out,
            "{:<24} {:>7} {:>12.3e} {:>10.1e} {:>6} {:>22}  {}",
            r.name,
            r.trials,
            r.worst_slack,
            r.tolerance,
            fmt_opt(&r.worst_p),
            fmt_opt(&r.worst_seed),
            if r.passed { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(())
}

fn cmd_check(args: CheckArgs, out: &mut dyn Write) -> Result<i32> {
    if let Some(r) = &args.report {
        require_dir_for(r)?;
    }
    let mut e = Ensemble {
        seed: args.seed,
        n_min: args.n_min,
        n_max: args.n_max,
        norm_cap: args.norm_cap,
        trials: args.trials,
        ..Ensemble::default()
    };
    if !args.p.is_empty() {
        e.p_set = args.p.clone();
    }
    let reports = match args.replay {
        Some(seed) => {
            let [name] = args.only.as_slice() else {
                return Err(Error::InvalidInput("--replay needs exactly one --only".into()));
            };
            vec![oracle::replay(name, &e, seed)?]
        }
        None => oracle::run_all(&e, &args.only)?,
    };
    print_table(out, &reports)?;
    if let Some(r) = &args.report {
        io::save_report(r, &reports, &e)?;
    }
    Ok(if oracle::all_passed(&reports) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

/// Randomly rotated diagonal algebra `u D u*`, an abelian Lie triple system.
fn rotated_diagonals<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Result<HermSubspace> {
    let u = sampling::unitary(rng, n);
    let gens: Vec<HermMatrix> = HermSubspace::diagonals(n)
        .basis()
        .iter()
        .map(|d| d.congruence(&u.adjoint()))
        .collect();
    HermSubspace::from_spanning(n, &gens)
}

fn generate_lts<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, cap: f64) -> Result<HermSubspace> {
    let h = rotated_diagonals(rng, n)?;
    if lts_check(&h).is_lts {
        return Ok(h);
    }
    let gens = vec![sampling::hermitian(rng, n, cap)?, sampling::hermitian(rng, n, cap)?];
    lts_closure(&gens)
}

#[derive(Serialize)]
struct GenOut {
    kind: &'static str,
    files: Vec<String>,
}

fn cmd_gen(args: GenArgs, out: &mut dyn Write) -> Result<i32> {
    if !args.out_dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory not found: {}", args.out_dir.display()),
        )));
    }
    if args.n == 0 {
        return Err(Error::InvalidInput("--n must be positive".into()));
    }
    let mut files = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let mut rng = sampling::rng_for(args.seed, i as u64);
        let path = args.out_dir.join(format!("{}-{i}.json", args.kind.label()));
        match args.kind {
            GenKind::Hermitian => io::save_matrix(&path, sampling::hermitian(&mut rng, args.n, args.cap)?.as_matrix())?,
            GenKind::Posdef => io::save_matrix(&path, sampling::posdef(&mut rng, args.n, args.cap)?.as_matrix())?,
            GenKind::SubspaceLts => io::save_subspace(&path, &generate_lts(&mut rng, args.n, args.cap)?)?,
        }
        files.push(path.display().to_string());
    }
    emit(out, &GenOut { kind: args.kind.label(), files })?;
    Ok(EXIT_OK)
}
