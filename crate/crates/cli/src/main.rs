//! `specseq`: batch front end for weighted-sequence difference equations.
//!
//! Every subcommand reads JSON inputs, writes JSON (or CSV) to `--out` or
//! stdout, and on failure prints `{"error": {"code", "message"}}` to stderr
//! with a nonzero exit status.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use specseq_core::io::{
    from_json, write_profile_csv, write_sequence_csv, write_sweep_csv, ManifoldProblemJson, MatrixJson, StencilJson,
    VectorJson,
};
use specseq_core::manifold::{manifold_sweep, ManifoldProblem};
use specseq_core::operator::{is_hyperbolic, riesz_split, spectral_radius, BoundedOperator};
use specseq_core::resolvent::{apply_resolvent_frequency, ResolventMode, ResolventPlan};
use specseq_core::sequence::{l2_norm, WindowedSequence};
use specseq_core::solver::{
    max_relative_deviation, solve_contraction, solve_ivp, solve_ivp_impulse, stability_classify, ImpulseSettings,
    IvpMethod,
};
use specseq_core::transform::{inverse_ztransform, multiplication_equiv_check, parseval_check, ztransform};
use specseq_core::{CVector, Error, FP_TOL, MAX_ITER, SUPP_TOL};

#[derive(Parser)]
#[command(name = "specseq", version, about = "Difference equations on exponentially weighted sequence spaces")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral radius, eigenvalues and hyperbolicity of A.
    Spectrum {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Riesz projections for the circle of radius gamma.
    Riesz {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 256)]
        quad_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Applies (tau - A)^{-1} to a sequence in l_{2,rho}.
    Resolve {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long, value_enum, default_value_t = Mode::Split)]
        mode: Mode,
        /// Circle samples for frequency mode.
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the solution as `n,component,re,im` rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Parseval, shift-multiplication and round-trip checks of the Z-transform.
    ZtransformCheck {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write `theta,abs` rows of the transform magnitude.
        #[arg(long)]
        profile_csv: Option<PathBuf>,
    },
    /// Solves u_{n+1} = A u_n + F(u)_n, u_0 = x by one or all methods.
    SolveIvp {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long = "F")]
        f: PathBuf,
        #[arg(long)]
        x: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::All)]
        method: Method,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solves tau u = F(u) on a window by contraction.
    SolveContraction {
        #[arg(long = "F")]
        f: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long, allow_negative_numbers = true)]
        lo: i64,
        #[arg(long, allow_negative_numbers = true)]
        hi: i64,
        #[arg(long, default_value_t = FP_TOL)]
        fp_tol: f64,
        #[arg(long, default_value_t = MAX_ITER)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exponential stability verdict for u_{n+1} = A u_n with random probes.
    Stability {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value_t = 8)]
        probes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stable-manifold graph over a grid of stable vectors, as CSV.
    StableManifold {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Causal,
    Split,
    Frequency,
}

impl From<Mode> for ResolventMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Causal => ResolventMode::Causal,
            Mode::Split => ResolventMode::Split,
            Mode::Frequency => ResolventMode::Frequency,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    All,
    Recursion,
    Voc,
    Impulse,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io { path: PathBuf, message: String },
    Config(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Io { .. } => "io_error",
            CliError::Config(_) => "invalid_config",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Io { path, message } => format!("{}: {message}", path.display()),
            CliError::Config(m) => m.clone(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    Ok(from_json(&read_text(path)?, what)?)
}

fn read_operator(path: &Path) -> CliResult<BoundedOperator> {
    let m: MatrixJson = read_json(path, "matrix")?;
    Ok(BoundedOperator::new(m.to_matrix()?)?)
}

fn read_vector(path: &Path) -> CliResult<CVector> {
    let v: VectorJson = read_json(path, "vector")?;
    Ok(v.to_vector()?)
}

fn create(path: &Path) -> CliResult<fs::File> {
    fs::File::create(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn emit_bytes(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::Io {
            path: PathBuf::from("<stdout>"),
            message: e.to_string(),
        }),
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    emit_bytes(out, text.as_bytes())
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("SPECSEQ_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("SPECSEQ_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn spectrum(a: &Path, out: Option<&Path>) -> CliResult<()> {
    let a = read_operator(a)?;
    let mut eigs: Vec<_> = a.eigenvalues()?.to_vec();
    eigs.sort_by(|x, y| x.norm().total_cmp(&y.norm()).then(x.arg().total_cmp(&y.arg())));
    let (hyperbolic, indeterminate) = match is_hyperbolic(&a) {
        Ok(h) => (h, false),
        Err(Error::Indeterminate { .. }) => (false, true),
        Err(e) => return Err(e.into()),
    };
    let eigenvalues: Vec<_> = eigs
        .iter()
        .map(|z| json!({"re": z.re, "im": z.im, "modulus": z.norm()}))
        .collect();
    emit_json(
        out,
        &json!({
            "r": spectral_radius(&a)?,
            "hyperbolic": hyperbolic,
            "indeterminate": indeterminate,
            "eigenvalues": eigenvalues,
        }),
    )
}

fn riesz(a: &Path, gamma: f64, quad_points: usize, out: Option<&Path>) -> CliResult<()> {
    let a = read_operator(a)?;
    let split = riesz_split(&a, gamma, quad_points)?;
    emit_json(
        out,
        &json!({
            "gamma": gamma,
            "rank_stable": split.rank_stable,
            "quad_points": split.quad_points,
            "defects": split.defects(&a),
            "P": MatrixJson::from_matrix(&split.proj_stable),
            "Q": MatrixJson::from_matrix(&split.proj_unstable),
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn resolve(
    a: &Path,
    f: &Path,
    rho: f64,
    mode: Mode,
    n: Option<usize>,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> CliResult<()> {
    let a = read_operator(a)?;
    let f: WindowedSequence = read_json(f, "sequence")?;
    let plan = ResolventPlan::for_mode(a, rho, mode.into())?;
    let u = match mode {
        Mode::Frequency => apply_resolvent_frequency(&plan, &f, n)?,
        _ => plan.apply(&f)?,
    };
    let residual = plan.residual(&u, &f)?;
    if let Some(path) = csv {
        write_sequence_csv(&u, create(path)?)?;
    }
    emit_json(
        out,
        &json!({
            "mode": plan.mode(),
            "rho": rho,
            "forward_tail_cut": plan.forward_tail_cut(),
            "backward_tail_cut": plan.backward_tail_cut(),
            "residual": residual,
            "input_norm": l2_norm(&f, rho)?,
            "solution": u,
        }),
    )
}

fn ztransform_check(u: &Path, rho: f64, n: usize, out: Option<&Path>, profile_csv: Option<&Path>) -> CliResult<()> {
    let u: WindowedSequence = read_json(u, "sequence")?;
    let (lhs, rhs) = parseval_check(&u, rho, n)?;
    let mult = multiplication_equiv_check(&u, rho, n)?;
    let zu = ztransform(&u, rho, n)?;
    let round_trip = if u.is_zero() {
        0.0
    } else {
        inverse_ztransform(&zu, u.lo(), u.hi())?.sub(&u)?.sup_norm()
    };
    if let Some(path) = profile_csv {
        write_profile_csv(&zu.magnitude_profile(), create(path)?)?;
    }
    let defect = if rhs == 0.0 { (lhs - rhs).abs() } else { (lhs - rhs).abs() / rhs };
    emit_json(
        out,
        &json!({
            "rho": rho,
            "N": n,
            "parseval": {"lhs": lhs, "rhs": rhs, "relative_defect": defect},
            "multiplication_defect": mult,
            "round_trip_error": round_trip,
        }),
    )
}

#[derive(Serialize)]
struct MethodSolution {
    method: &'static str,
    solution: WindowedSequence,
}

#[derive(Serialize)]
struct Deviation {
    a: &'static str,
    b: &'static str,
    max_relative_deviation: f64,
}

fn solve_ivp_cmd(a: &Path, f: &Path, x: &Path, method: Method, horizon: usize, out: Option<&Path>) -> CliResult<()> {
    let a = read_operator(a)?;
    let f = read_json::<StencilJson>(f, "stencil")?.to_stencil()?;
    let x = read_vector(x)?;
    let methods: Vec<IvpMethod> = match method {
        Method::All => IvpMethod::ALL.to_vec(),
        Method::Recursion => vec![IvpMethod::Recursion],
        Method::Voc => vec![IvpMethod::VariationOfConstants],
        Method::Impulse => vec![IvpMethod::Impulse],
    };
    let mut sols = Vec::with_capacity(methods.len());
    let mut impulse = None;
    for m in methods {
        let u = if m == IvpMethod::Impulse {
            let s = solve_ivp_impulse(&a, &f, &x, horizon, &ImpulseSettings::default())?;
            let u = s.report.solution.clone();
            impulse = Some(json!({
                "rho": s.rho,
                "m_rho": s.m_rho,
                "lip": s.lip,
                "iterations": s.report.iterations,
                "contraction_estimate": s.report.contraction_estimate,
                "support_in_nonnegative_indices": u.support_subset_geq(0, SUPP_TOL),
            }));
            u
        } else {
            solve_ivp(&a, &f, &x, horizon, m)?
        };
        sols.push(MethodSolution {
            method: m.name(),
            solution: u,
        });
    }
    let mut deviations = Vec::new();
    for i in 0..sols.len() {
        for j in i + 1..sols.len() {
            deviations.push(Deviation {
                a: sols[i].method,
                b: sols[j].method,
                max_relative_deviation: max_relative_deviation(&sols[i].solution, &sols[j].solution, 0, horizon as i64),
            });
        }
    }
    emit_json(
        out,
        &json!({
            "horizon": horizon,
            "solutions": sols,
            "deviations": deviations,
            "impulse": impulse,
        }),
    )
}

fn solve_contraction_cmd(
    f: &Path,
    rho: f64,
    lo: i64,
    hi: i64,
    fp_tol: f64,
    max_iter: usize,
    out: Option<&Path>,
) -> CliResult<()> {
    let f = read_json::<StencilJson>(f, "stencil")?.to_stencil()?;
    let w = specseq_core::sequence::Weight::l2(rho)?;
    let report = solve_contraction(&f, w, lo, hi, fp_tol, max_iter)?;
    emit_json(
        out,
        &json!({
            "rho": rho,
            "lip_bound": f.lip_bound(rho),
            "theoretical_factor": f.lip_bound(rho) / rho,
            "report": report,
        }),
    )
}

fn stability(a: &Path, horizon: usize, probes: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let a = read_operator(a)?;
    emit_json(out, &stability_classify(&a, horizon, probes, seed)?)
}

fn stable_manifold(problem: &Path, grid: &Path, out: Option<&Path>) -> CliResult<()> {
    let pj: ManifoldProblemJson = read_json(problem, "manifold problem")?;
    let a = BoundedOperator::new(pj.a.to_matrix()?)?;
    let f = pj.f.to_stencil()?;
    let prob = ManifoldProblem::new(a, f, &pj.settings())?;
    let grid: Vec<VectorJson> = read_json(grid, "grid")?;
    let grid = grid.iter().map(VectorJson::to_vector).collect::<Result<Vec<_>, _>>()?;
    let rows = manifold_sweep(&prob, &grid);
    let mut buf = Vec::new();
    write_sweep_csv(&rows, prob.op().dim(), &mut buf)?;
    emit_bytes(out, &buf)
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Spectrum { a, out } => spectrum(&a, out.as_deref()),
        Command::Riesz {
            a,
            gamma,
            quad_points,
            out,
        } => riesz(&a, gamma, quad_points, out.as_deref()),
        Command::Resolve {
            a,
            f,
            rho,
            mode,
            n,
            out,
            csv,
        } => resolve(&a, &f, rho, mode, n, out.as_deref(), csv.as_deref()),
        Command::ZtransformCheck {
            u,
            rho,
            n,
            out,
            profile_csv,
        } => ztransform_check(&u, rho, n, out.as_deref(), profile_csv.as_deref()),
        Command::SolveIvp {
            a,
            f,
            x,
            method,
            horizon,
            out,
        } => solve_ivp_cmd(&a, &f, &x, method, horizon, out.as_deref()),
        Command::SolveContraction {
            f,
            rho,
            lo,
            hi,
            fp_tol,
            max_iter,
            out,
        } => solve_contraction_cmd(&f, rho, lo, hi, fp_tol, max_iter, out.as_deref()),
        Command::Stability {
            a,
            horizon,
            probes,
            out,
        } => stability(&a, horizon, probes, cli.seed, out.as_deref()),
        Command::StableManifold { problem, grid, out } => stable_manifold(&problem, &grid, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({"error": {"code": e.code(), "message": e.message()}});
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
