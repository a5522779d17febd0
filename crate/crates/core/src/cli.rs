//! The `curvlab` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or numerical failure, 2 malformed spec,
//! 3 unmet precondition, 4 a contraction inequality was violated.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{compare_bounds, BoundComparison, CompareOptions, SectionalMode, Violation, BOUND_TOL};
use crate::chain::{adjoint, semigroup_at, ProbabilityVector, StochasticMatrix};
use crate::coupling_sim::{
    simulate_bdp_pair, simulate_interchange_pair, simulate_zrp_pair, CouplingEstimate, TailPoint, ZrpCoupling,
};
use crate::entropy::{estimate_alpha, AlphaOptions};
use crate::error::Error;
use crate::models::{zrp_states, ContinuousModel};
use crate::spec::{Chain, ChainSpec};
use crate::transport::{ollivier_curvature, sectional_feasible};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

/// Grid used by `analyze` for its curve file.
pub const ANALYZE_TIMES: [f64; 6] = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0];

#[derive(Parser, Debug)]
#[command(name = "curvlab", version, about = "Curvature and entropy contraction of finite Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Curvature, sectional certificate, entropy contraction estimate and λ₂.
    Analyze {
        spec: PathBuf,
        /// Number of starts for the contraction-ratio ascent.
        #[arg(long, default_value_t = AlphaOptions::default().starts)]
        alpha_starts: usize,
        /// First-order tolerance of the ascent.
        #[arg(long, default_value_t = AlphaOptions::default().tol)]
        tol: f64,
        /// Seed for the random ascent starts.
        #[arg(long, default_value_t = AlphaOptions::default().seed)]
        seed: u64,
        /// For generators, analyze the kernel `e^{tL}` at this time.
        #[arg(long, default_value_t = 1.0)]
        time: f64,
        /// Directory receiving report.json, spec.json and curves.csv.
        #[arg(long, default_value = "curvlab-out")]
        out: PathBuf,
    },
    /// Exact entropy decay against every applicable bound, as CSV.
    Curves {
        spec: PathBuf,
        /// Comma-separated, non-decreasing times.
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        /// `dirac:LABEL`, `uniform`, or comma-separated weights.
        #[arg(long, default_value = "uniform")]
        mu0: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Sectional::Certify)]
        sectional: Sectional,
    },
    /// Monte-Carlo coalescence tails of the model's coupling, as CSV.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = CouplingChoice::Independent)]
        coupling: CouplingChoice,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Sectional {
    Certify,
    Assume,
    Skip,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CouplingChoice {
    Independent,
    Synchronized,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

/// Exit code for a library error raised while building or analyzing a spec.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::EmptySpace
        | Error::DuplicateLabel(_)
        | Error::UnknownLabel(_)
        | Error::DimensionMismatch { .. }
        | Error::BadEntry { .. }
        | Error::BadRowSum { .. }
        | Error::NotProbability(_)
        | Error::BadRates(_)
        | Error::InvalidMetric(_)
        | Error::InvalidPair(..)
        | Error::NonpositiveWeight(_)
        | Error::AsymmetricInteraction(_)
        | Error::EmptyGeneratingSet
        | Error::InvalidArgument(_)
        | Error::NonFiniteTime(_)
        | Error::BadEpsilon(_) => EXIT_SCHEMA,
        Error::NotIrreducible
        | Error::NotConnected
        | Error::DisconnectedSupport
        | Error::NotGenerating
        | Error::MonotonicityViolated(_)
        | Error::SingularLaplacian(_)
        | Error::TooLarge { .. }
        | Error::TooFewSamples { .. }
        | Error::SupportViolation(_)
        | Error::AtStationarity => EXIT_PRECONDITION,
        Error::StationaryMismatch(_) | Error::BoundOutOfRange { .. } | Error::Numerical(_) => EXIT_FAILURE,
    }
}

/// Where in the input document a build error points.
fn locate(spec: &ChainSpec, err: &Error) -> String {
    let field = match (spec, err) {
        (ChainSpec::Explicit(e), Error::BadRowSum { row, .. }) => {
            let name = if e.matrix.is_some() { "matrix" } else { "generator" };
            format!("{name}[{row}]")
        }
        (ChainSpec::Explicit(e), Error::BadEntry { row, col, .. }) => {
            let name = if e.matrix.is_some() { "matrix" } else { "generator" };
            format!("{name}[{row}][{col}]")
        }
        (ChainSpec::Explicit(_), Error::DuplicateLabel(_) | Error::UnknownLabel(_)) => "labels".into(),
        (ChainSpec::Explicit(_), Error::InvalidMetric(_)) => "distances".into(),
        (ChainSpec::Explicit(_), Error::NotGenerating | Error::InvalidPair(..)) => "generating_pairs".into(),
        (ChainSpec::Bdp(_), _) => "q_plus/q_minus".into(),
        (ChainSpec::Zrp(_), Error::BadRowSum { row, .. } | Error::BadEntry { row, .. }) => format!("g[{row}]"),
        (ChainSpec::Zrp(_), _) => "rates".into(),
        (ChainSpec::Cep(_), _) => "c/r/nu".into(),
        (ChainSpec::Interchange(_), _) => "blocks".into(),
        (ChainSpec::Spin(_), _) => "interactions".into(),
        (ChainSpec::Glauber(_), _) => "weights".into(),
        _ => "spec".into(),
    };
    format!("field `{field}`: {err}")
}

fn lib_failure(err: Error) -> Failure {
    Failure::new(exit_code(&err), err.to_string())
}

fn load_spec(path: &Path) -> Result<(ChainSpec, Chain), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_FAILURE, format!("cannot read {}: {e}", path.display())))?;
    let spec = ChainSpec::from_json(&text).map_err(|e| {
        Failure::new(
            EXIT_SCHEMA,
            format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()),
        )
    })?;
    let chain = spec
        .build()
        .map_err(|e| Failure::new(exit_code(&e), format!("{}: {}", path.display(), locate(&spec, &e))))?;
    Ok((spec, chain))
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::new(EXIT_FAILURE, format!("cannot write {}: {e}", path.display()));
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_mu0(text: &str, chain: &Chain) -> Result<ProbabilityVector, Failure> {
    let space = chain.space().clone();
    let bad = |m: String| Failure::new(EXIT_SCHEMA, format!("--mu0: {m}"));
    if text == "uniform" {
        return Ok(ProbabilityVector::uniform(space));
    }
    if let Some(label) = text.strip_prefix("dirac:") {
        let i = space.index_of(label).map_err(|e| bad(e.to_string()))?;
        return ProbabilityVector::dirac(space, i).map_err(|e| bad(e.to_string()));
    }
    let weights = text
        .split(',')
        .map(|w| w.trim().parse::<f64>().map_err(|e| bad(format!("`{w}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    ProbabilityVector::new(space, weights).map_err(|e| bad(e.to_string()))
}

fn curves_csv(cmp: &BoundComparison) -> String {
    let mut out = String::from("t,H_exact,bound_kappa_t,bound_mlsi,bound_dbar,bound_model\n");
    for r in &cmp.rows {
        let model = r.model.map(|m| fmt_float(m * cmp.h0)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(r.t),
            fmt_float(r.exact),
            fmt_float(r.kappa_t * cmp.h0),
            fmt_float(r.mlsi * cmp.h0),
            fmt_float(r.dbar * cmp.h0),
            model
        );
    }
    out
}

fn run_curves(
    spec: &ChainSpec,
    chain: &Chain,
    mu0: &ProbabilityVector,
    times: &[f64],
    mode: SectionalMode,
) -> Result<BoundComparison, Failure> {
    let l = chain.generator();
    let opts = CompareOptions {
        sectional: mode,
        mlsi_rate: None,
    };
    let mut cmp =
        compare_bounds(&l, chain.metric(), chain.generating_set(), mu0, times, &opts).map_err(lib_failure)?;
    if let Some((curve, _)) = spec.model_bound(times).map_err(lib_failure)? {
        cmp = cmp.with_model(&curve).map_err(lib_failure)?;
    }
    Ok(cmp)
}

#[derive(Serialize)]
struct PairLabels {
    x: String,
    y: String,
}

/// Machine-readable output of `analyze`.
#[derive(Serialize)]
struct Report {
    spec: ChainSpec,
    kind: &'static str,
    states: usize,
    /// `None` for kernels; the time `t` of `e^{tL}` for generators.
    kernel_time: Option<f64>,
    kappa: f64,
    worst_pair: Option<PairLabels>,
    mlsi_rate: Option<f64>,
    sectional: bool,
    sectional_failing: Vec<PairLabels>,
    alpha_hat: f64,
    best_ratio: f64,
    lambda2: f64,
    alpha_converged: bool,
    model_bound: Option<String>,
    curve_files: Vec<String>,
    violations: Vec<Violation>,
}

fn analyze(
    path: &Path,
    opts: AlphaOptions,
    time: f64,
    out: &Path,
) -> Result<(String, bool), Failure> {
    let (spec, chain) = load_spec(path)?;
    let space = chain.space().clone();
    let labels = |x: usize, y: usize| PairLabels {
        x: space.label(x).to_string(),
        y: space.label(y).to_string(),
    };
    let (kernel, pi, kernel_time): (StochasticMatrix, ProbabilityVector, Option<f64>) = match &chain {
        Chain::Discrete(m) => (m.kernel.clone(), m.pi.clone(), None),
        Chain::Continuous(ContinuousModel { generator, pi, .. }) => {
            if !time.is_finite() || time < 0.0 {
                return Err(lib_failure(Error::NonFiniteTime(time)));
            }
            (semigroup_at(generator, time).map_err(lib_failure)?, pi.clone(), Some(time))
        }
    };
    let (d, s) = (chain.metric(), chain.generating_set());
    let curvature = ollivier_curvature(&kernel, d, s).map_err(lib_failure)?;
    let star = adjoint(&kernel, &pi).map_err(lib_failure)?;
    let cert = sectional_feasible(&star, d, s).map_err(lib_failure)?;
    let alpha = estimate_alpha(&kernel, &opts).map_err(lib_failure)?;
    let mlsi_rate = match &chain {
        Chain::Continuous(m) => {
            Some(crate::bounds::generator_curvature(&m.generator, d, s).map_err(lib_failure)?)
        }
        Chain::Discrete(_) => None,
    };

    let mut violations = Vec::new();
    // α ≥ κ under the sectional hypothesis, and α̂ never undershoots α
    if cert.holds && curvature.kappa >= 0.0 && alpha.alpha_hat < curvature.kappa - BOUND_TOL {
        violations.push(Violation {
            t: kernel_time.unwrap_or(1.0),
            bound: "alpha_vs_kappa".into(),
            exact: 1.0 - alpha.alpha_hat,
            limit: 1.0 - curvature.kappa + BOUND_TOL,
        });
    }

    let mu0 = ProbabilityVector::dirac(space.clone(), 0).map_err(lib_failure)?;
    let cmp = run_curves(&spec, &chain, &mu0, &ANALYZE_TIMES, SectionalMode::Certify)?;
    let model_bound = spec.model_bound(&[0.0]).map_err(lib_failure)?.map(|(_, name)| name);
    violations.extend(cmp.violations.iter().cloned());

    let curves_path = out.join("curves.csv");
    write_atomic(&curves_path, curves_csv(&cmp).as_bytes())?;
    write_atomic(&out.join("spec.json"), spec.to_json().as_bytes())?;

    let report = Report {
        kind: spec.kind(),
        states: space.len(),
        kernel_time,
        kappa: curvature.kappa,
        worst_pair: curvature.worst_pair().map(|p| labels(p.x, p.y)),
        mlsi_rate,
        sectional: cert.holds,
        sectional_failing: cert.failing.iter().map(|&(x, y)| labels(x, y)).collect(),
        alpha_hat: alpha.alpha_hat,
        best_ratio: alpha.best_ratio,
        lambda2: alpha.lambda2,
        alpha_converged: alpha.converged,
        model_bound,
        curve_files: vec![curves_path.display().to_string()],
        violations,
        spec,
    };
    let json = serde_json::to_string_pretty(&report).expect("reports always serialize");
    write_atomic(&out.join("report.json"), json.as_bytes())?;

    let mut text = String::new();
    let _ = writeln!(text, "chain: {} with {} states", report.kind, report.states);
    if let Some(t) = kernel_time {
        let _ = writeln!(text, "kernel: exp({t} L)");
    }
    let _ = writeln!(text, "kappa: {}", report.kappa);
    if let Some(w) = &report.worst_pair {
        let _ = writeln!(text, "worst pair: ({}) -> ({})", w.x, w.y);
    }
    if let Some(r) = mlsi_rate {
        let _ = writeln!(text, "generator curvature rate: {r}");
    }
    let _ = writeln!(
        text,
        "sectional curvature of the adjoint: {}",
        if report.sectional { "non-negative (certified)" } else { "negative" }
    );
    let _ = writeln!(
        text,
        "alpha estimate: {} (best ratio {}, {})",
        report.alpha_hat,
        report.best_ratio,
        if report.alpha_converged { "converged" } else { "not converged" }
    );
    let _ = writeln!(text, "lambda2(P P*): {}", report.lambda2);
    if let Some(m) = &report.model_bound {
        let _ = writeln!(text, "model bound: {m}");
    }
    let _ = writeln!(text, "curves: {}", curves_path.display());
    let _ = writeln!(text, "violations: {}", report.violations.len());
    for v in &report.violations {
        let _ = writeln!(text, "  {} at t={}: {} > {}", v.bound, v.t, v.exact, v.limit);
    }
    Ok((text, report.violations.is_empty()))
}

fn max_tails(estimates: &[CouplingEstimate]) -> Vec<TailPoint> {
    let len = estimates[0].tail.len();
    (0..len)
        .map(|k| {
            estimates
                .iter()
                .map(|e| e.tail[k])
                .max_by(|a, b| a.mean.total_cmp(&b.mean).then(a.ci95.total_cmp(&b.ci95)))
                .expect("at least one start")
        })
        .collect()
}

fn simulate(
    spec: &ChainSpec,
    times: &[f64],
    samples: usize,
    seed: u64,
    coupling: CouplingChoice,
) -> Result<(Vec<TailPoint>, &'static str), Failure> {
    let zrp_coupling = match coupling {
        CouplingChoice::Independent => ZrpCoupling::Independent,
        CouplingChoice::Synchronized => ZrpCoupling::SynchronizedRefresh,
    };
    let estimates = match spec {
        ChainSpec::Bdp(s) => (0..s.n().saturating_sub(1))
            .map(|x| simulate_bdp_pair(s, x, times, samples, seed))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| (v, "order-preserving")),
        ChainSpec::Interchange(s) => (0..s.n)
            .flat_map(|i| (i + 1..s.n).map(move |j| (i, j)))
            .map(|pair| simulate_interchange_pair(s, pair, times, samples, seed))
            .collect::<Result<Vec<_>, _>>()
            .map(|v| (v, "synchronized-shuffle")),
        ChainSpec::Zrp(s) => {
            let n = s.n();
            let mut all = Vec::new();
            for z in zrp_states(n, s.m - 1) {
                for i in 0..n {
                    for j in i + 1..n {
                        all.push(simulate_zrp_pair(s, &z, i, j, zrp_coupling, times, samples, seed));
                    }
                }
            }
            let name = match zrp_coupling {
                ZrpCoupling::Independent => "tagged-walk-independent",
                ZrpCoupling::SynchronizedRefresh => "tagged-walk-synchronized",
            };
            all.into_iter().collect::<Result<Vec<_>, _>>().map(|v| (v, name))
        }
        other => {
            return Err(Failure::new(
                EXIT_PRECONDITION,
                format!("no coupling simulator for `{}` chains", other.kind()),
            ))
        }
    };
    let (estimates, name) = estimates.map_err(lib_failure)?;
    if estimates.is_empty() {
        return Err(Failure::new(EXIT_PRECONDITION, "the chain has no pair of distinct starts"));
    }
    Ok((max_tails(&estimates), name))
}

fn simulate_csv(times: &[f64], tails: &[TailPoint], seed: u64, samples: usize, coupling: &str) -> String {
    let mut out = format!("# seed={seed} samples={samples} coupling={coupling}\nt,tail_mean,ci95\n");
    for (t, p) in times.iter().zip(tails) {
        let _ = writeln!(out, "{},{},{}", fmt_float(*t), fmt_float(p.mean), fmt_float(p.ci95));
    }
    out
}

/// Runs a parsed command; returns the text for stdout and the exit code.
pub fn execute(cli: Cli) -> Result<(String, i32), Failure> {
    match cli.command {
        Command::Analyze {
            spec,
            alpha_starts,
            tol,
            seed,
            time,
            out,
        } => {
            let opts = AlphaOptions {
                starts: alpha_starts,
                tol,
                seed,
            };
            let (text, clean) = analyze(&spec, opts, time, &out)?;
            Ok((text, if clean { EXIT_OK } else { EXIT_VIOLATION }))
        }
        Command::Curves {
            spec: path,
            times,
            mu0,
            out,
            sectional,
        } => {
            let (spec, chain) = load_spec(&path)?;
            let mu0 = parse_mu0(&mu0, &chain)?;
            let mode = match sectional {
                Sectional::Certify => SectionalMode::Certify,
                Sectional::Assume => SectionalMode::Assume,
                Sectional::Skip => SectionalMode::Skip,
            };
            let cmp = run_curves(&spec, &chain, &mu0, &times, mode)?;
            let file = out.join("curves.csv");
            write_atomic(&file, curves_csv(&cmp).as_bytes())?;
            let mut text = format!("wrote {} ({} rows, H0 = {})\n", file.display(), cmp.rows.len(), cmp.h0);
            for v in &cmp.violations {
                let _ = writeln!(text, "violation: {} at t={}: {} > {}", v.bound, v.t, v.exact, v.limit);
            }
            let code = if cmp.violations.is_empty() { EXIT_OK } else { EXIT_VIOLATION };
            Ok((text, code))
        }
        Command::Simulate {
            spec: path,
            samples,
            seed,
            times,
            out,
            coupling,
        } => {
            let (spec, _) = load_spec(&path)?;
            let (tails, name) = simulate(&spec, &times, samples, seed, coupling)?;
            let file = out.join("simulate.csv");
            write_atomic(&file, simulate_csv(&times, &tails, seed, samples, name).as_bytes())?;
            Ok((format!("wrote {} (seed {seed}, {samples} samples per start)\n", file.display()), EXIT_OK))
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok((text, code)) => {
            print!("{text}");
            code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
