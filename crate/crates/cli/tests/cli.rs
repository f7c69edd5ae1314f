use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prising_cli::{AuditRow, ResultRow, SummaryRow};
use tempfile::TempDir;

const SWEEP: &str = "n_grid = [20, 30]\np = 0.4\nbeta_grid = [0.0, 1.0]\n\
                     epsilon_grid = [2.0]\nreplicates = 3\nsweeps = 30\nseed = 4\n";

fn prising(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prising"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    prising(&args)
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn beta_sweep_writes_every_result_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(&dir, "c.toml", SWEEP);
    let out = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.csv");
    let status = run("beta-sweep", &config, &out, &["--summary", summary.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    let header = text.lines().next().unwrap();
    for field in [
        "study", "n", "p", "beta_true", "epsilon", "delta", "replicate",
        "beta_hat_nonprivate", "beta_hat_private", "noise_draw", "wall_time",
    ] {
        assert!(header.split(',').any(|h| h == field), "missing {field}");
    }
    let width = header.split(',').count();
    assert!(text.lines().all(|l| l.split(',').count() == width));

    let rows: Vec<ResultRow> = read_rows(&out);
    assert_eq!(rows.len(), 2 * 2 * 3);
    assert!(rows.iter().all(|r| r.delta == 1.0 / r.n as f64));
    let summary: Vec<SummaryRow> = read_rows(&summary);
    assert_eq!(summary.len(), 4);
    assert!(summary.iter().all(|s| s.mse_private >= 0.0 && s.mse_nonprivate >= 0.0));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(&dir, "c.toml", SWEEP);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(run("beta-sweep", &config, &a, &["--seed", "4"]).status.success());
    assert!(run("beta-sweep", &config, &b, &["--seed", "5"]).status.success());
    let default = dir.path().join("c.csv");
    assert!(run("beta-sweep", &config, &default, &[]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&default).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn mse_n_emits_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(&dir, "c.toml", SWEEP);
    let out = dir.path().join("mse.csv");
    let raw = dir.path().join("raw.csv");
    let o = run("mse-n", &config, &out, &["--rows", raw.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: Vec<SummaryRow> = read_rows(&out);
    assert_eq!(summary.len(), 4);
    assert!(summary.iter().all(|s| s.replicates == 3 && s.study == "mse_n"));
    assert_eq!(read_rows::<ResultRow>(&raw).len(), 12);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let bad = write(&dir, "bad.toml", "n_grid = [10]\nepsilon_grid = []\nbeta_grid = [1.0]\np = 0.5");
    assert_eq!(run("beta-sweep", &bad, &out, &[]).status.code(), Some(1));
    let missing = dir.path().join("nope.toml");
    assert_eq!(run("beta-sweep", &missing, &out, &[]).status.code(), Some(1));
    let single_n = write(&dir, "one.toml", SWEEP.replace("[20, 30]", "[20]").as_str());
    assert_eq!(run("mse-n", &single_n, &out, &[]).status.code(), Some(1));
    assert_eq!(prising(&["beta-sweep"]).status.code(), Some(1));
    assert_eq!(prising(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    write(&dir, "g.txt", "0 1\n1 1\n");
    write(&dir, "s.txt", "1\n-1\n");
    let config = write(
        &dir,
        "real.toml",
        "edge_list = \"g.txt\"\noutcomes = \"s.txt\"\nepsilon_grid = [1.0]\nreplicates = 5",
    );
    let o = run("real-data", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: data error"));
}

#[test]
fn real_data_flags_override_config_paths() {
    let dir = tempfile::tempdir().unwrap();
    let edges = write(&dir, "g.txt", "0 1\n1 2\n2 3\n3 0\n");
    let outcomes = write(&dir, "s.txt", "1\n1\n1\n-1\n");
    let config = write(
        &dir,
        "real.toml",
        "edge_list = \"missing.txt\"\noutcomes = \"missing.txt\"\n\
         coupling = \"normalized_laplacian\"\nepsilon_grid = [1.0, 10.0]\nreplicates = 50",
    );
    let out = dir.path().join("real.csv");
    let o = run(
        "real-data",
        &config,
        &out,
        &["--edges", edges.to_str().unwrap(), "--outcomes", outcomes.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<prising_cli::RealDataRow> = read_rows(&out);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.n == 4 && r.replicates == 50));
    assert!(String::from_utf8_lossy(&o.stderr).contains("non-private estimate"));
}

#[test]
fn audit_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let base = "epsilon_grid = [1.0]\naudit_instances = 3\naudit_n = 6\naudit_p = 0.8\n\
                audit_grid = [0.0, 1.0, 2.0]\ninclude_zero_coupling = true\n";
    let good = write(&dir, "good.toml", base);
    let out = dir.path().join("audit.csv");
    let o = run("audit", &good, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<AuditRow> = read_rows(&out);
    assert_eq!(rows.len(), 4 * 3);
    let zero: Vec<_> = rows.iter().filter(|r| r.instance == 3).collect();
    assert!(zero.iter().all(|r| r.pass));
    assert_eq!(zero[0].worst_gap, 0.0);

    let bad = write(&dir, "bad.toml", &format!("{base}audit_delta_cap = 1e-4\n"));
    let o = run("audit", &bad, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let rows: Vec<AuditRow> = read_rows(&out);
    assert!(rows.iter().any(|r| r.audit_name == "jacobian_ratio" && !r.pass));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}
