//! Command-line entry points. The binary is a thin wrapper: every
//! subcommand here delegates to the library and writes plain CSV/JSON.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::analysis;
use crate::experiment::{CampaignError, CampaignOptions, ExperimentSpec, SolverSpec};
use crate::metrics::{self, IterationTrace, TraceRow};
use crate::problem::{InstanceFile, ProblemInstance};
use crate::solvers::{self, Algorithm, SolverError};

/// Exit-code contract: 0 success, 1 usage error, 2 numerical divergence,
/// 3 empirical violation of a certificate that claimed to hold.
pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;
pub const EXIT_CERTIFICATE_VIOLATED: u8 = 3;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "ISTAKIT_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error("solver diverged: {0}")]
    Diverged(SolverError),
    #[error("certificate claimed contraction but a step ratio of {max_ratio} exceeded {bound}")]
    CertificateViolated { max_ratio: f64, bound: f64 },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    BadFile { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Diverged(_) => EXIT_DIVERGED,
            CliError::CertificateViolated { .. } => EXIT_CERTIFICATE_VIOLATED,
            _ => EXIT_USAGE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "istakit", version, about = "Sparse least-squares solvers and benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Experiment spec JSON; protocol defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of measurements m (protocol alphas exist for 210 and 150).
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of random runs.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed for the per-run substreams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dotted-path overrides into the spec JSON, e.g. `--set sparsity=5`
    /// or `--set solvers.0.ki=0.002`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate problem instances as JSON files.
    Generate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one solver on one instance file; write trace and summary.
    Solve {
        /// Instance JSON produced by `generate`.
        instance: PathBuf,
        #[arg(long)]
        algo: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-path overrides into the solver spec, e.g. `--set ki=0.002`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a full multi-seed campaign and write traces plus aggregate.json.
    Bench {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Overwrite an existing aggregate.json.
        #[arg(long)]
        force: bool,
        /// Also persist every generated instance.
        #[arg(long)]
        save_instances: bool,
    },
    /// Check the contraction certificate and equilibrium on one instance.
    Verify {
        /// `engineered` for the built-in diagonal instance, or an instance
        /// JSON path.
        #[arg(default_value = "engineered")]
        target: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the engineered instance.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Dimension of the engineered instance.
        #[arg(long, default_value_t = 32)]
        n: usize,
        /// Tolerance for the equilibrium report.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Emit plot-ready CSVs from a campaign directory.
    Figures {
        campaign: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Resolves the output directory: explicit flag, then $ISTAKIT_OUT/<sub>,
/// then ./runs/<sub>.
fn resolve_out(explicit: Option<PathBuf>, sub: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p;
    }
    match std::env::var_os(OUT_ENV) {
        Some(root) => PathBuf::from(root).join(sub),
        None => PathBuf::from("runs").join(sub),
    }
}

/// Applies `key.path=value` overrides onto a JSON value. Values parse as
/// JSON scalars when possible and fall back to strings.
fn apply_overrides(mut root: Value, overrides: &[String]) -> Result<Value, CliError> {
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set needs KEY=VALUE, got {item:?}")))?;
        let value: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut cursor = &mut root;
        let segments: Vec<&str> = path.split('.').collect();
        for (i, seg) in segments.iter().enumerate() {
            let last = i + 1 == segments.len();
            if let Ok(index) = seg.parse::<usize>() {
                match cursor {
                    Value::Array(arr) => {
                        if index >= arr.len() {
                            return Err(CliError::Usage(format!(
                                "--set {path}: index {index} out of bounds ({} elements)",
                                arr.len()
                            )));
                        }
                        if last {
                            arr[index] = value.clone();
                            break;
                        }
                        cursor = &mut arr[index];
                    }
                    _ => {
                        return Err(CliError::Usage(format!(
                            "--set {path}: {seg} indexes a non-array"
                        )))
                    }
                }
            } else {
                match cursor {
                    Value::Object(map) => {
                        if last {
                            map.insert(seg.to_string(), value.clone());
                            break;
                        }
                        cursor = map
                            .entry(seg.to_string())
                            .or_insert_with(|| Value::Object(Default::default()));
                    }
                    _ => {
                        return Err(CliError::Usage(format!(
                            "--set {path}: {seg} indexes a non-object"
                        )))
                    }
                }
            }
        }
    }
    Ok(root)
}

fn load_spec(args: &SpecArgs) -> Result<ExperimentSpec, CliError> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            serde_json::from_str(&text).map_err(|e| CliError::BadFile {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        None => ExperimentSpec::protocol(210, 100, 0),
    };
    if let Some(m) = args.m {
        spec.m = m;
    }
    if let Some(runs) = args.runs {
        spec.num_runs = runs;
    }
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if !args.overrides.is_empty() {
        let value = serde_json::to_value(&spec).expect("spec serializes");
        let value = apply_overrides(value, &args.overrides)?;
        spec = serde_json::from_value(value)
            .map_err(|e| CliError::Usage(format!("override produced an invalid spec: {e}")))?;
    }
    spec.validate()?;
    Ok(spec)
}

fn load_instance(path: &Path) -> Result<ProblemInstance, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(|e| CliError::BadFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    file.into_instance().map_err(|e| CliError::BadFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn cmd_generate(spec: &ExperimentSpec, out: &Path) -> Result<(), CliError> {
    let dir = out.join("instances");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    for i in 0..spec.num_runs {
        let p = crate::experiment::generate_instance(spec, i)?;
        let path = dir.join(format!("run_{i}.json"));
        write_json(&path, &InstanceFile::from_instance(&p))?;
    }
    println!("wrote {} instance files under {}", spec.num_runs, dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct SolveSummaryFile {
    algorithm: String,
    converged: bool,
    iterations: usize,
    convergence_iter: Option<usize>,
    support_stab_iter: Option<usize>,
    final_row: Option<TraceRow>,
    warnings: Vec<String>,
}

fn cmd_solve(
    instance_path: &Path,
    algo: &str,
    overrides: &[String],
    out: &Path,
) -> Result<(), CliError> {
    let algorithm: Algorithm = algo.parse().map_err(CliError::Usage)?;
    let p = load_instance(instance_path)?;
    let mut solver_spec = SolverSpec::new(algorithm);
    if !overrides.is_empty() {
        let value = serde_json::to_value(&solver_spec).expect("serializes");
        let value = apply_overrides(value, overrides)?;
        solver_spec = serde_json::from_value(value)
            .map_err(|e| CliError::Usage(format!("override produced an invalid solver spec: {e}")))?;
    }
    let config = solver_spec.resolve(&p).map_err(CampaignError::from)?;
    let warnings: Vec<String> = config
        .validate()
        .map_err(CampaignError::from)?
        .iter()
        .map(|w| w.to_string())
        .collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let result = solvers::solve(&p, &config).map_err(|e| match e {
        SolverError::Diverged { .. } => CliError::Diverged(e),
        other => CliError::Campaign(other.into()),
    })?;
    let summary = metrics::summarize(&result.trace, config.stop_tol);

    fs::create_dir_all(out).map_err(io_err(out))?;
    let trace_path = out.join("trace.csv");
    let file = fs::File::create(&trace_path).map_err(io_err(&trace_path))?;
    metrics::write_trace(&result.trace, std::io::BufWriter::new(file))
        .map_err(CampaignError::from)?;
    write_json(
        &out.join("summary.json"),
        &SolveSummaryFile {
            algorithm: algorithm.name().to_string(),
            converged: result.converged,
            iterations: result.iterations,
            convergence_iter: summary.convergence_iter,
            support_stab_iter: summary.support_stab_iter,
            final_row: summary.final_row.clone(),
            warnings,
        },
    )?;
    let rel = summary
        .final_row
        .as_ref()
        .and_then(|r| r.rel_error)
        .map(|r| format!("{r:.3e}"))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "{}: converged={} iterations={} final_rel_error={} -> {}",
        algorithm.name(),
        result.converged,
        result.iterations,
        rel,
        out.display()
    );
    Ok(())
}

fn cmd_bench(
    spec: &ExperimentSpec,
    out: PathBuf,
    threads: Option<usize>,
    force: bool,
    save_instances: bool,
) -> Result<(), CliError> {
    let options = CampaignOptions { out_dir: Some(out.clone()), threads, save_instances, force };
    let report = crate::experiment::run_campaign(spec, &options)?;
    println!(
        "campaign: m={} n={} runs={} -> {}",
        spec.m,
        spec.n,
        spec.num_runs,
        out.display()
    );
    println!(
        "{:<10} {:>12} {:>14} {:>12} {:>12} {:>10}",
        "algorithm", "conv_mean", "conv_capped", "supp_stab", "rel_error", "diverged"
    );
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "--".into());
    let fmte = |v: Option<f64>| v.map(|x| format!("{x:.2e}")).unwrap_or_else(|| "--".into());
    for (name, agg) in &report.algorithms {
        println!(
            "{:<10} {:>12} {:>14} {:>12} {:>12} {:>10}",
            name,
            fmt(agg.conv_mean),
            fmt(agg.conv_mean_capped),
            fmt(agg.supp_stab_mean),
            fmte(agg.final_rel_error_mean),
            agg.defined_counts.diverged
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct VerifyFile {
    certificate: analysis::ContractionCertificate,
    equilibrium: analysis::EquilibriumReport,
    max_ratio: Option<f64>,
    ratios_checked: usize,
    converged: bool,
    iterations: usize,
    warnings: Vec<String>,
}

fn cmd_verify(
    target: &str,
    seed: u64,
    n: usize,
    tol: f64,
    overrides: &[String],
    out: &Path,
) -> Result<(), CliError> {
    let (p, mut config) = if target == "engineered" {
        analysis::engineered_contraction_instance(n, 3.min(n), seed)
            .map_err(|e| CliError::Usage(e.to_string()))?
    } else {
        let p = load_instance(Path::new(target))?;
        let config = SolverSpec::new(Algorithm::IIsta)
            .resolve(&p)
            .map_err(CampaignError::from)?;
        (p, config)
    };
    if !overrides.is_empty() {
        let value = serde_json::to_value(&config).expect("serializes");
        let value = apply_overrides(value, overrides)?;
        config = serde_json::from_value(value)
            .map_err(|e| CliError::Usage(format!("override produced an invalid config: {e}")))?;
    }
    let warnings: Vec<String> = config
        .validate()
        .map_err(CampaignError::from)?
        .iter()
        .map(|w| w.to_string())
        .collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let certificate = analysis::certificate(&p, &config)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let diverged = |e: SolverError| match e {
        SolverError::Diverged { .. } => CliError::Diverged(e),
        other => CliError::Campaign(other.into()),
    };
    let fixed = analysis::fixed_point(&p, &config).map_err(diverged)?;
    let x0 = crate::linalg::DenseVector::zeros(p.dim());
    let (result, states) =
        analysis::run_with_states(&p, &config, &x0, &config.lambda0.clone()).map_err(diverged)?;
    let monitor = analysis::monitor_contraction(&states, &fixed);
    let equilibrium = analysis::equilibrium_report(&p, &result, tol)
        .map_err(|e| CliError::Usage(e.to_string()))?;

    fs::create_dir_all(out).map_err(io_err(out))?;
    write_json(
        &out.join("verify.json"),
        &VerifyFile {
            certificate: certificate.clone(),
            equilibrium: equilibrium.clone(),
            max_ratio: monitor.max_ratio,
            ratios_checked: monitor.ratios.len(),
            converged: result.converged,
            iterations: result.iterations,
            warnings,
        },
    )?;

    println!(
        "certificate: sigma^2={:.6} xi^2={:.6} holds={} (factor 2xi^2={:.6})",
        certificate.sigma_sq,
        certificate.xi_sq,
        certificate.sufficient_condition_holds,
        certificate.contraction_factor
    );
    println!(
        "equilibrium: |grad|_inf={:.3e} |lambda|_inf={:.3e} unbiased={} support_match={:?}",
        equilibrium.grad_inf_norm,
        equilibrium.lambda_inf_norm,
        equilibrium.is_unbiased,
        equilibrium.support_matches_truth
    );
    match monitor.max_ratio {
        Some(r) => println!("contraction monitor: max ratio {:.6} over {} steps", r, monitor.ratios.len()),
        None => println!("contraction monitor: trajectory started at the fixed point"),
    }
    if certificate.sufficient_condition_holds {
        let bound = certificate.contraction_factor + 1e-9;
        if let Some(max_ratio) = monitor.max_ratio {
            if max_ratio > bound {
                return Err(CliError::CertificateViolated { max_ratio, bound });
            }
        }
        println!("verdict: certified contraction observed empirically");
    } else {
        println!("verdict: sufficient condition does not hold (bound is conservative)");
    }
    Ok(())
}

fn read_campaign_traces(
    campaign: &Path,
) -> Result<Vec<(String, Vec<IterationTrace>)>, CliError> {
    let spec_path = campaign.join("spec.json");
    let text = fs::read_to_string(&spec_path).map_err(io_err(&spec_path))?;
    let spec: ExperimentSpec = serde_json::from_str(&text).map_err(|e| CliError::BadFile {
        path: spec_path.clone(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for solver in &spec.solvers {
        let mut traces = Vec::new();
        for run in 0..spec.num_runs {
            let path = campaign
                .join("traces")
                .join(solver.algorithm.name())
                .join(format!("run_{run}.csv"));
            if !path.exists() {
                continue;
            }
            let file = fs::File::open(&path).map_err(io_err(&path))?;
            traces.push(metrics::read_trace(BufReader::new(file)).map_err(CampaignError::from)?);
        }
        if !traces.is_empty() {
            out.push((solver.algorithm.name().to_string(), traces));
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!(
            "no traces found under {}",
            campaign.display()
        )));
    }
    Ok(out)
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pointwise mean over runs of `field`, with shorter traces extended by
/// their final value (a converged solver holds its fixed point).
fn padded_mean(traces: &[IterationTrace], len: usize, field: impl Fn(&TraceRow) -> Option<f64>) -> Vec<Option<f64>> {
    (0..len)
        .map(|i| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for t in traces {
                if t.rows.is_empty() {
                    continue;
                }
                let row = &t.rows[i.min(t.rows.len() - 1)];
                if let Some(v) = field(row) {
                    sum += v;
                    count += 1;
                }
            }
            if count == 0 {
                None
            } else {
                Some(sum / count as f64)
            }
        })
        .collect()
}

fn cmd_figures(campaign: &Path, out: &Path) -> Result<(), CliError> {
    let traces = read_campaign_traces(campaign)?;
    fs::create_dir_all(out).map_err(io_err(out))?;

    // Single-run trajectory in the (l1, residual) plane, parametrized by k.
    for (name, runs) in &traces {
        let path = out.join(format!("res_vs_l1_{name}.csv"));
        let mut text = String::from("k,l1,residual\n");
        for row in &runs[0].rows {
            text.push_str(&format!("{},{},{}\n", row.k, fmt_real(row.l1), fmt_real(row.residual)));
        }
        fs::write(&path, text).map_err(io_err(&path))?;
    }

    let max_len = traces
        .iter()
        .flat_map(|(_, runs)| runs.iter().map(|t| t.rows.len()))
        .max()
        .unwrap_or(0);
    type FieldExtractor = Box<dyn Fn(&TraceRow) -> Option<f64>>;
    let figures: [(&str, FieldExtractor); 4] = [
        ("mean_rel_error.csv", Box::new(|r: &TraceRow| r.rel_error)),
        ("mean_residual.csv", Box::new(|r: &TraceRow| Some(r.residual))),
        ("mean_support_error.csv", Box::new(|r: &TraceRow| r.support_error.map(|v| v as f64))),
        ("mean_l0.csv", Box::new(|r: &TraceRow| Some(r.l0 as f64))),
    ];
    for (file, field) in figures {
        let mut text = String::from("k");
        for (name, _) in &traces {
            text.push(',');
            text.push_str(name);
        }
        text.push('\n');
        let columns: Vec<Vec<Option<f64>>> = traces
            .iter()
            .map(|(_, runs)| padded_mean(runs, max_len, &field))
            .collect();
        for i in 0..max_len {
            text.push_str(&(i + 1).to_string());
            for col in &columns {
                text.push(',');
                if let Some(v) = col[i] {
                    text.push_str(&fmt_real(v));
                }
            }
            text.push('\n');
        }
        let path = out.join(file);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    println!("wrote figure data for {} algorithms to {}", traces.len(), out.display());
    Ok(())
}

/// Parses argv and runs the subcommand, returning the process exit code.
pub fn main_entry<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_command(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run_command(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate { spec, out } => {
            let out = resolve_out(out, "generate");
            let spec = load_spec(&spec)?;
            cmd_generate(&spec, &out)
        }
        Command::Solve { instance, algo, out, overrides } => {
            let out = resolve_out(out, "solve");
            cmd_solve(&instance, &algo, &overrides, &out)
        }
        Command::Bench { spec, out, threads, force, save_instances } => {
            let out = resolve_out(out, "bench");
            let spec = load_spec(&spec)?;
            cmd_bench(&spec, out, threads, force, save_instances)
        }
        Command::Verify { target, out, seed, n, tol, overrides } => {
            let out = resolve_out(out, "verify");
            cmd_verify(&target, seed, n, tol, &overrides, &out)
        }
        Command::Figures { campaign, out } => {
            let out = resolve_out(out, "figures");
            cmd_figures(&campaign, &out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_to_nested_paths() {
        let spec = ExperimentSpec::protocol(210, 2, 1);
        let value = serde_json::to_value(&spec).unwrap();
        let value = apply_overrides(
            value,
            &["sparsity=5".into(), "solvers.0.ki=0.002".into()],
        )
        .unwrap();
        let spec: ExperimentSpec = serde_json::from_value(value).unwrap();
        assert_eq!(spec.sparsity, 5);
        assert_eq!(spec.solvers[0].ki, Some(0.002));
    }

    #[test]
    fn override_rejects_missing_equals() {
        let value = serde_json::to_value(ExperimentSpec::protocol(210, 1, 1)).unwrap();
        assert!(apply_overrides(value, &["sparsity".into()]).is_err());
    }

    #[test]
    fn bad_algorithm_is_usage_error() {
        let code = main_entry(["istakit", "solve", "/nonexistent.json", "--algo", "sgd"]);
        assert_eq!(code, EXIT_USAGE);
    }
}
