use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_secrsma"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"
[scenario]
kind = "random"
users = 2
antennas = 2
csit = ["perfect", "imperfect"]
samples = 10
trials = 2
seed = 3

[sweep]
snr_db = [10.0]
thresholds = [0.0, 0.2]
"#;

#[test]
fn sweep_writes_table_timings_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let status = bin().arg("sweep").arg(&cfg).arg("--out-dir").arg(&out).arg("--jobs").arg("1").status().unwrap();
    assert!(status.success());
    let table = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = table.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("scenario,instance,seed,scheme,csit,snr_db,threshold,theta,gamma,wsr,common_rate_1,common_rate_2"));
    assert!(header.ends_with("iterations,converged,feasible,status"));
    // 2 trials × 2 CSIT modes × 2 schemes × 2 thresholds, plus 8 mean rows
    assert_eq!(lines.clone().count(), 24);
    assert_eq!(lines.filter(|l| l.contains(",mean,")).count(), 8);
    assert!(out.join("timings.csv").exists());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);

    let again = dir.path().join("again");
    assert!(bin().arg("sweep").arg(&cfg).arg("--out-dir").arg(&again).status().unwrap().success());
    assert_eq!(table, std::fs::read_to_string(again.join("results.csv")).unwrap());
}

#[test]
fn seed_override_changes_the_instances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("csit = [\"perfect\", \"imperfect\"]", "csit = [\"perfect\"]"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(bin().arg("sweep").arg(&cfg).arg("--out-dir").arg(&a).status().unwrap().success());
    assert!(bin().args(["--seed", "99", "sweep"]).arg(&cfg).arg("--out-dir").arg(&b).status().unwrap().success());
    assert_ne!(
        std::fs::read_to_string(a.join("results.csv")).unwrap(),
        std::fs::read_to_string(b.join("results.csv")).unwrap()
    );
}

#[test]
fn trace_records_every_kappa_and_stays_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[scenario]
kind = "specific"
thetas = [0.6981317007977318]
csit = ["perfect", "imperfect"]
samples = 20

[algorithm]
trace_kappas = [0.1, 0.5, 0.8]

[sweep]
snr_db = [15.0, 30.0]
thresholds = [0.5]
"#,
    );
    let out = dir.path().join("out");
    assert!(bin().arg("trace").arg(&cfg).arg("--out-dir").arg(&out).status().unwrap().success());
    let text = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let mut runs = std::collections::BTreeMap::<String, (bool, Vec<f64>)>::new();
    for r in &records {
        let key = format!("{} {} {} {}", r["snr_db"], r["csit"], r["scheme"], r["kappa"]);
        let run = runs.entry(key).or_insert((r["feasible"].as_bool().unwrap(), Vec::new()));
        run.1.push(r["objective"].as_f64().unwrap());
    }
    // 2 SNRs × 2 CSIT modes × 2 schemes × 3 κ
    assert_eq!(runs.len(), 24);
    // monotonicity is a property of runs that keep the secrecy rows satisfiable
    let feasible: Vec<_> = runs.iter().filter(|(_, (ok, _))| *ok).collect();
    assert!(feasible.len() >= 12, "only {} feasible runs", feasible.len());
    for (key, (_, obj)) in feasible {
        let ascending = key.contains("perfect") && !key.contains("imperfect");
        for w in obj.windows(2) {
            let step = if ascending { w[0] - w[1] } else { w[1] - w[0] };
            assert!(step <= 1e-7, "{key}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn single_iteration_trace_has_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[scenario]
kind = "specific"
thetas = [2.792526803190927]

[algorithm]
schemes = ["RS"]
trace_kappas = [0.5]
max_iterations = 1

[sweep]
snr_db = [20.0]
thresholds = [0.1]
"#,
    );
    let out = dir.path().join("out");
    assert!(bin().arg("trace").arg(&cfg).arg("--out-dir").arg(&out).status().unwrap().success());
    let text = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn validate_reports_pass_lines() {
    let out = bin().args(["validate", "--oracle-instances", "0"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("[PASS]")).count() >= 3, "{text}");
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("trials = 2", "trials = 0"));
    let out = bin().arg("sweep").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));
}
