use std::path::{Path, PathBuf};
use std::process::Command;

use fksim::exec::with_workers;
use fksim::harness::{self, box_trace_series, criterion, ExperimentConfig, Level, SuiteOptions};
use fksim::paths::Truncation;
use fksim::Error;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs().join(name)).unwrap()
}

fn fksim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fksim"))
}

// zero on the oracle grid, large between its nodes
fn under_resolved_oracle() -> String {
    let grid: Vec<String> = (0..=32).map(|j| format!("{}", j as f64 / 32.0)).collect();
    let values: Vec<&str> = (0..=32).map(|j| if j % 2 == 0 { "0.0" } else { "40.0" }).collect();
    format!(
        r#"operation = "oracle_equivalence"
seed = 5
times = [0.5]

[domain]
case = "interval"
b = 1.0
bc0 = "dirichlet"
bcb = "dirichlet"

[potential]
kind = "tabulated"
grid = [{}]
values = [{}]

[budget]
n_noise = 1
paths_per_node = 200
quadrature_nodes = 16
grid_intervals = 16
eigenpairs = 4
"#,
        grid.join(", "),
        values.join(", ")
    )
}

#[test]
fn shipped_configs_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(
                c.field_errors().is_empty(),
                "{}: {:?}",
                path.display(),
                c.field_errors()
            );
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn box_trace_run_matches_series() {
    let c = load("box_trace.toml");
    let r = harness::run(&c).unwrap();
    assert_eq!(r.payload.records.len(), c.times.len());
    for (rec, &t) in r.payload.records.iter().zip(&c.times) {
        let want = box_trace_series(t);
        assert!(
            (rec.mean - want).abs() <= 4.0 * rec.stderr,
            "t={t}: {} +- {} vs {want}",
            rec.mean,
            rec.stderr
        );
        assert_eq!(rec.seed, c.seed);
        assert_eq!(rec.inputs_digest, r.config_digest);
    }
}

#[test]
fn payload_is_independent_of_worker_count() {
    let mut c = load("robin_white_kernel.toml");
    c.budget.paths = 600;
    let one = with_workers(1, || harness::run(&c)).unwrap();
    let three = with_workers(3, || harness::run(&c)).unwrap();
    assert_eq!(one.payload, three.payload);
    assert_eq!(one.payload_digest, three.payload_digest);
    let mut other = c.clone();
    other.seed += 1;
    assert_ne!(harness::run(&other).unwrap().payload_digest, one.payload_digest);
}

#[test]
fn digest_tracks_config_content() {
    let a = load("box_kernel.toml");
    let round = ExperimentConfig::from_toml(&a.to_toml().unwrap()).unwrap();
    assert_eq!(a.digest().unwrap(), round.digest().unwrap());
    let mut b = a.clone();
    b.times[0] *= 2.0;
    assert_ne!(a.digest().unwrap(), b.digest().unwrap());
}

#[test]
fn invalid_fields_are_reported_by_path() {
    let text = std::fs::read_to_string(configs().join("box_kernel.toml"))
        .unwrap()
        .replace("b = 1.0", "b = -1.0");
    let c = ExperimentConfig::from_toml(&text).unwrap();
    let errs = c.field_errors();
    assert!(errs.iter().any(|e| e.path == "domain.b"), "{errs:?}");
    match harness::run(&c) {
        Err(Error::Validation(v)) => assert!(v.iter().any(|e| e.path == "domain.b")),
        other => panic!("expected a validation error, got {other:?}"),
    }

    let mut c = load("box_kernel.toml");
    c.times = vec![];
    assert!(c.field_errors().iter().any(|e| e.path.starts_with("times")));

    assert!(ExperimentConfig::from_toml("operation = \"kernel\"\nbogus = 1\n").is_err());
}

#[test]
fn sweep_over_step_count() {
    let mut c = load("box_kernel.toml");
    c.budget.paths = 300;
    let values = [128.0, 256.0];
    let reports = harness::sweep(&c, "resolution.n_steps", &values).unwrap();
    assert_eq!(reports.len(), 2);
    for (r, &n) in reports.iter().zip(&values) {
        let res = r.payload.records[0].resolution.unwrap();
        assert_eq!(res.n_steps, n as usize);
        assert_ne!(r.seed, c.seed);
    }
    assert_ne!(reports[0].seed, reports[1].seed);
    let csv = harness::sweep_csv("resolution.n_steps", &values, &reports);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(
        rows.len(),
        1 + reports.iter().map(|r| r.payload.records.len()).sum::<usize>()
    );
    assert!(rows[1].starts_with("128,kernel,"));

    assert!(harness::sweep(&c, "resolution.n_steps", &[]).is_err());
    assert!(harness::with_axis(&c, "budget.nonexistent", 1.0).is_err());
    assert!(harness::with_axis(&c, "domain.case", 1.0).is_err());
    assert_eq!(harness::with_axis(&c, "times.0", 0.25).unwrap().times[0], 0.25);
}

#[test]
fn broken_kernel_is_detected() {
    let good = criterion(7, Level::Fast, &SuiteOptions::default()).unwrap();
    assert!(
        good.iter().all(|v| v.pass),
        "{:#?}",
        good.iter().filter(|v| !v.pass).collect::<Vec<_>>()
    );
    let opts = SuiteOptions {
        truncation: Truncation::broken(),
        ..SuiteOptions::default()
    };
    let bad = criterion(7, Level::Fast, &opts).unwrap();
    assert!(bad.iter().any(|v| !v.pass && v.name.contains("Chapman")), "{bad:#?}");
}

#[test]
fn under_resolved_oracle_fails() {
    let c = ExperimentConfig::from_toml(&under_resolved_oracle()).unwrap();
    let r = harness::run(&c).unwrap();
    assert!(!r.passed());
}

#[test]
fn cli_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kernel");
    let status = fksim()
        .args(["kernel", "--config"])
        .arg(configs().join("box_kernel.toml"))
        .args(["--workers", "1", "--seed", "11", "--out"])
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 11);
    assert_eq!(report["operation"], "kernel");
    let csv = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(csv.starts_with("operation,label,mean,stderr,replicates,n_steps,bin_width,seed\n"));
    assert!(csv.lines().count() >= 2);

    let sweep = dir.path().join("sweep");
    let status = fksim()
        .args(["sweep", "--config"])
        .arg(configs().join("box_kernel.toml"))
        .args(["--axis", "points.y", "--values", "0.3,0.7", "--out"])
        .arg(&sweep)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    assert!(sweep.join("000/report.json").exists());
    assert!(sweep.join("001/records.csv").exists());
    assert_eq!(
        std::fs::read_to_string(sweep.join("sweep.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        std::fs::read_to_string(configs().join("box_kernel.toml"))
            .unwrap()
            .replace("b = 1.0", "b = -1.0"),
    )
    .unwrap();
    let o = fksim().args(["kernel", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain.b"));

    // an operation the subcommand does not run
    let o = fksim()
        .args(["spectrum", "--config"])
        .arg(configs().join("box_kernel.toml"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = fksim()
        .args(["kernel", "--config"])
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_ne!(o.status.code(), Some(0));

    let failing = dir.path().join("fail.toml");
    std::fs::write(&failing, under_resolved_oracle()).unwrap();
    let o = fksim()
        .args(["check", "--config"])
        .arg(&failing)
        .arg("--out")
        .arg(dir.path().join("fail"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
    assert!(dir.path().join("fail/equivalence.csv").exists());
}
