//! End-to-end checks of the command-line surface: file layouts, resume
//! behavior, overwrite protection, and the equivalences the file formats
//! promise.

use std::fs;
use std::path::Path;

use istakit::cli::{run_command, Command, SpecArgs};
use istakit::experiment::{ExperimentSpec, SolverSpec};
use istakit::solvers::Algorithm;

fn smoke_spec(num_runs: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        n: 60,
        m: 70,
        sparsity: 5,
        magnitude_range: (1.0, 2.0),
        num_runs,
        base_seed: seed,
        signed_magnitudes: true,
        solvers: vec![
            SolverSpec { max_iters: Some(4000), ..SolverSpec::new(Algorithm::Ista) },
            SolverSpec {
                alpha: Some(0.05),
                max_iters: Some(4000),
                ..SolverSpec::new(Algorithm::IIsta)
            },
        ],
    }
}

fn write_spec(dir: &Path, spec: &ExperimentSpec) -> std::path::PathBuf {
    let path = dir.join("spec.json");
    fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

fn spec_args(config: std::path::PathBuf) -> SpecArgs {
    SpecArgs { config: Some(config), m: None, runs: None, seed: None, overrides: vec![] }
}

#[test]
fn generate_writes_reproducible_instances() {
    let dir = tempfile::tempdir().unwrap();
    let spec = smoke_spec(2, 31);
    let config = write_spec(dir.path(), &spec);
    for sub in ["a", "b"] {
        run_command(Command::Generate {
            spec: spec_args(config.clone()),
            out: Some(dir.path().join(sub)),
        })
        .unwrap();
    }
    for i in 0..2 {
        let a = fs::read(dir.path().join("a/instances").join(format!("run_{i}.json"))).unwrap();
        let b = fs::read(dir.path().join("b/instances").join(format!("run_{i}.json"))).unwrap();
        assert_eq!(a, b, "instance files must be bit-reproducible");
    }
}

#[test]
fn generate_rejects_bad_sparsity_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = smoke_spec(1, 1);
    spec.sparsity = 500;
    let config = write_spec(dir.path(), &spec);
    let err = run_command(Command::Generate {
        spec: spec_args(config),
        out: Some(dir.path().join("out")),
    })
    .unwrap_err();
    assert!(err.to_string().contains("sparsity"), "error should name the field: {err}");
}

#[test]
fn solve_matches_single_run_bench_trace() {
    let dir = tempfile::tempdir().unwrap();
    let spec = smoke_spec(1, 77);
    let config = write_spec(dir.path(), &spec);

    run_command(Command::Generate {
        spec: spec_args(config.clone()),
        out: Some(dir.path().join("gen")),
    })
    .unwrap();
    run_command(Command::Solve {
        instance: dir.path().join("gen/instances/run_0.json"),
        algo: "i-ista".into(),
        out: Some(dir.path().join("solve")),
        overrides: vec!["alpha=0.05".into(), "max_iters=4000".into()],
    })
    .unwrap();
    run_command(Command::Bench {
        spec: spec_args(config),
        out: Some(dir.path().join("bench")),
        threads: Some(1),
        force: false,
        save_instances: false,
    })
    .unwrap();

    let solo = fs::read(dir.path().join("solve/trace.csv")).unwrap();
    let campaign = fs::read(dir.path().join("bench/traces/i-ista/run_0.csv")).unwrap();
    assert_eq!(solo, campaign, "solve and single-run bench must produce the same trace");

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("solve/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["algorithm"], "i-ista");
    assert!(summary["converged"].as_bool().unwrap());
    let rel = summary["final_row"]["rel_error"].as_f64().unwrap();
    assert!(rel <= 1e-6, "summary rel error {rel:.3e} above the recovery floor");
}

#[test]
fn ista_with_zero_weights_reproduces_grad_trace() {
    let dir = tempfile::tempdir().unwrap();
    let spec = smoke_spec(1, 78);
    let config = write_spec(dir.path(), &spec);
    run_command(Command::Generate {
        spec: spec_args(config),
        out: Some(dir.path().join("gen")),
    })
    .unwrap();
    let instance = dir.path().join("gen/instances/run_0.json");
    // equalize the support threshold: the metric defaults differ by design
    run_command(Command::Solve {
        instance: instance.clone(),
        algo: "ista".into(),
        out: Some(dir.path().join("ista0")),
        overrides: vec!["lambda0=0.0".into(), "support_threshold=1e-6".into()],
    })
    .unwrap();
    run_command(Command::Solve {
        instance,
        algo: "grad".into(),
        out: Some(dir.path().join("grad")),
        overrides: vec![],
    })
    .unwrap();
    let a = fs::read(dir.path().join("ista0/trace.csv")).unwrap();
    let b = fs::read(dir.path().join("grad/trace.csv")).unwrap();
    assert_eq!(a, b, "zero-weight ista must reduce to gradient descent");
}

#[test]
fn bench_refuses_overwrite_without_force_and_resumes_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = smoke_spec(3, 79);
    let config = write_spec(dir.path(), &spec);
    let out = dir.path().join("campaign");
    let bench = |force: bool| {
        run_command(Command::Bench {
            spec: spec_args(config.clone()),
            out: Some(out.clone()),
            threads: Some(2),
            force,
            save_instances: false,
        })
    };
    bench(false).unwrap();
    let aggregate = fs::read(out.join("aggregate.json")).unwrap();

    // a second run into the same directory must refuse to clobber
    let err = bench(false).unwrap_err();
    assert!(err.to_string().contains("aggregate.json"), "unexpected error: {err}");

    // simulate an interrupted campaign: drop the aggregate, one trace, and
    // its manifest entry, then rerun without force
    fs::remove_file(out.join("aggregate.json")).unwrap();
    fs::remove_file(out.join("traces/i-ista/run_1.csv")).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let completed: Vec<serde_json::Value> = manifest["completed"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| !(e[0] == "i-ista" && e[1] == 1))
        .cloned()
        .collect();
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string(&serde_json::json!({ "completed": completed })).unwrap(),
    )
    .unwrap();

    bench(false).unwrap();
    assert_eq!(
        fs::read(out.join("aggregate.json")).unwrap(),
        aggregate,
        "resumed campaign must reproduce the aggregate"
    );
    assert!(out.join("traces/i-ista/run_1.csv").exists());
}

#[test]
fn figures_reduce_single_run_campaign_to_its_trace() {
    let dir = tempfile::tempdir().unwrap();
    let spec = smoke_spec(1, 80);
    let config = write_spec(dir.path(), &spec);
    let out = dir.path().join("campaign");
    run_command(Command::Bench {
        spec: spec_args(config),
        out: Some(out.clone()),
        threads: Some(1),
        force: false,
        save_instances: false,
    })
    .unwrap();
    let fig = dir.path().join("figures");
    run_command(Command::Figures { campaign: out.clone(), out: Some(fig.clone()) }).unwrap();

    for file in [
        "mean_rel_error.csv",
        "mean_residual.csv",
        "mean_support_error.csv",
        "mean_l0.csv",
        "res_vs_l1_ista.csv",
        "res_vs_l1_i-ista.csv",
    ] {
        assert!(fig.join(file).exists(), "missing figure file {file}");
    }

    // row count equals the longest trace, and single-run means equal the
    // run's own values (here: the residual column of the ista trace)
    let traces: Vec<istakit::metrics::IterationTrace> = ["ista", "i-ista"]
        .iter()
        .map(|a| {
            let f = fs::File::open(out.join(format!("traces/{a}/run_0.csv"))).unwrap();
            istakit::metrics::read_trace(std::io::BufReader::new(f)).unwrap()
        })
        .collect();
    let max_len = traces.iter().map(|t| t.rows.len()).max().unwrap();
    let mean_res = fs::read_to_string(fig.join("mean_residual.csv")).unwrap();
    let lines: Vec<&str> = mean_res.trim_end().lines().collect();
    assert_eq!(lines[0], "k,ista,i-ista");
    assert_eq!(lines.len() - 1, max_len, "figure rows must match the longest trace");
    // spot-check: first data row carries both traces' first residuals
    let first: Vec<&str> = lines[1].split(',').collect();
    let r0: f64 = first[1].parse().unwrap();
    assert_eq!(r0, traces[0].rows[0].residual);
}

#[test]
fn verify_engineered_reports_certified_contraction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify");
    run_command(Command::Verify {
        target: "engineered".into(),
        out: Some(out.clone()),
        seed: 7,
        n: 24,
        tol: 1e-6,
        overrides: vec![],
    })
    .unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["certificate"]["sufficient_condition_holds"], true);
    assert_eq!(report["equilibrium"]["is_unbiased"], true);
    assert_eq!(report["equilibrium"]["support_matches_truth"], true);
    let max_ratio = report["max_ratio"].as_f64().unwrap();
    let bound = report["certificate"]["contraction_factor"].as_f64().unwrap() + 1e-9;
    assert!(max_ratio <= bound);
    assert!(report["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn verify_surfaces_equilibrium_hypothesis_warning() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify");
    // alpha below |ki| voids the unbiased-equilibrium hypothesis
    run_command(Command::Verify {
        target: "engineered".into(),
        out: Some(out.clone()),
        seed: 7,
        n: 16,
        tol: 1e-6,
        overrides: vec!["alpha=0.005".into()],
    })
    .unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    let warnings = report["warnings"].as_array().unwrap();
    assert_eq!(warnings.len(), 1, "expected the hypothesis warning, got {warnings:?}");
}
