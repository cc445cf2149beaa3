use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn spiraldim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spiraldim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
#[allow(clippy::approx_constant)] // 6.2832 is the rounded input, not 2π
fn spiral_first_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = spiraldim(&["spiral", "--alpha", "0.5", "--phi1", "6.2832", "--phi2", "1256.6"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("phi,f"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[0] - 6.2832).abs() < 1e-12);
    assert!((row[1] - 0.3989).abs() < 1e-4);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 1256.6).abs() < 1e-9);
}

#[test]
fn dim_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let profile = format!("p{tag}.csv");
        let report = format!("r{tag}.json");
        let o = spiraldim(
            &[
                "dim", "--lambda", "4/3", "--t-end", "2e4", "--eps-min", "2e-3",
                "--profile-out", &profile, "--report-out", &report,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(dir.path().join(profile)).unwrap(), fs::read(dir.path().join(report)).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_slice(&a.1).unwrap();
    assert!((report["predicted"].as_f64().unwrap() - 1.2).abs() < 1e-12);
    let est = report["dim_estimate"].as_f64().unwrap();
    assert!((est - 1.2).abs() < 0.1, "{est}");
    assert!(String::from_utf8(a.0).unwrap().starts_with("epsilon,area,method\n"));
}

#[test]
fn single_thread_matches_default() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["dim", "--lambda", "1", "--t-end", "1e4", "--eps-min", "4e-3", "--method", "box"];
    let a = spiraldim(&args, dir.path());
    let b = Command::new(env!("CARGO_BIN_EXE_spiraldim"))
        .args(args)
        .env("SPIRALDIM_THREADS", "1")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_criteria_with_seed_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify-criteria", "--lambda", "1", "--t-end", "5e3", "--n-probes", "200", "--seed", "9"];
    let a = spiraldim(&args, dir.path());
    let b = spiraldim(&args, dir.path());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports[0]["criterion"], "log_damping_dimension");
    assert_eq!(reports[2]["criterion"], "spiral_criterion");
    assert!((reports[2]["conclusion"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    assert!(v["polar_odes"]["max_rel_err_r"].as_f64().unwrap() < 1e-5);
    assert_eq!(v["upper_bound_from_decrement"]["holds"], true);
}

#[test]
fn rectifiability_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = spiraldim(&["rectifiability", "--lambda", "3", "--gamma", "1"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["conclusion"], "RECTIFIABLE");
    let o = spiraldim(&["rectifiability", "--lambda", "5/3", "--gamma", "1"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["conclusion"], "NON_RECTIFIABLE");
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# table case\nlambda = 3\ngamma = 3/4\nt_max = 1e5\n").unwrap();
    let o = spiraldim(&["rectifiability", "--config", "run.cfg"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["conclusion"], "RECTIFIABLE");
    assert!((v["hypotheses"][0]["witness"].as_f64().unwrap() - 0.75).abs() < 1e-6);
    // explicit flags win over the file
    let o = spiraldim(&["rectifiability", "--config", "run.cfg", "--gamma", "1", "--lambda", "1"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["conclusion"], "NON_RECTIFIABLE");
}

#[test]
fn sampled_damping_resolves_knots_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("case");
    fs::create_dir(&sub).unwrap();
    let knots: String = (0..=60)
        .map(|k| {
            let t = 10f64.powf(k as f64 / 10.0);
            format!("{t},{}\n", 3.0 / t)
        })
        .collect();
    fs::write(sub.join("h.csv"), format!("t,h\n{knots}")).unwrap();
    fs::write(sub.join("run.cfg"), "damping = sampled\nknots = h.csv\nt_max = 1e6\n").unwrap();
    let o = spiraldim(&["rectifiability", "--config", "case/run.cfg"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["conclusion"], "RECTIFIABLE");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spiraldim(&["dim", "--lambda", "abc"], dir.path()).status.code(), Some(2));
    assert_eq!(spiraldim(&["frobnicate"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.cfg"), "lambda 3\n").unwrap();
    assert_eq!(spiraldim(&["dim", "--config", "bad.cfg"], dir.path()).status.code(), Some(2));
    assert_eq!(spiraldim(&["dim", "--config", "missing.cfg"], dir.path()).status.code(), Some(2));
    let o = spiraldim(&["spiral", "--alpha", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
    let o = spiraldim(&["dim", "--t-end", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_then_dim_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = spiraldim(
        &["simulate", "--lambda", "1", "--t-end", "1e4", "--out", "traj.csv", "--svg", "traj.svg"],
        dir.path(),
    );
    assert!(o.status.success());
    let svg = fs::read_to_string(dir.path().join("traj.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    let from_file = spiraldim(
        &["dim", "--trajectory", "traj.csv", "--eps-min", "4e-3", "--lambda", "1"],
        dir.path(),
    );
    let direct = spiraldim(&["dim", "--lambda", "1", "--t-end", "1e4", "--eps-min", "4e-3"], dir.path());
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let a: serde_json::Value = serde_json::from_slice(&from_file.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&direct.stdout).unwrap();
    let (x, y) = (a["dim_estimate"].as_f64().unwrap(), b["dim_estimate"].as_f64().unwrap());
    assert!((x - y).abs() < 1e-6, "{x} vs {y}");
}

#[test]
fn reproduce_table_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = spiraldim(&["reproduce-table", "--json", "table.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("table.json")).unwrap()).unwrap();
    let predicted: Vec<f64> = rows.as_array().unwrap().iter().map(|r| r["predicted"].as_f64().unwrap()).collect();
    let want = [1.0, 1.0, 1.0, 12.0 / 11.0, 6.0 / 5.0, 4.0 / 3.0];
    for (p, w) in predicted.iter().zip(want) {
        assert!((p - w).abs() < 1e-9);
    }
}
