use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sparse-game"));
    cmd.env_remove("SPARSE_GAME_THREADS");
    cmd
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL_LQ: &str = r#"{
  "graph": {"generator": "chain", "n": 9, "cyclic": true},
  "game": {"kind": "lq", "horizon": 1, "kappa": {"uniform": 1}, "coupling": [[1]], "mu": 0.3,
           "terminal": {"uniform": [[0]]}, "sigma": {"uniform": [[1]]},
           "init": {"cycle": [{"mean": [-1], "cov": [[1]]}, {"mean": [0], "cov": [[1]]},
                              {"mean": [1], "cov": [[1]]}]}},
  "radii": [1, 2, 3],
  "solver": {"steps": 400}
}"#;

#[test]
fn malformed_json_exits_2_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(dir.path(), "bad.json", "{\"graph\": ");
    let o = run(&["reduce-ol"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("configuration error"));
}

#[test]
fn unknown_keys_and_mismatches_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let extra = SMALL_LQ.replacen("\"radii\"", "\"radius\": 3, \"radii\"", 1);
    let cfg = write(dir.path(), "extra.json", &extra);
    assert_eq!(run(&["reduce-ol"], &cfg, &out).status.code(), Some(2));
    let cfg = write(dir.path(), "small.json", SMALL_LQ);
    assert_eq!(run(&["reduce-det"], &cfg, &out).status.code(), Some(2));
    assert_eq!(run(&["reduce-ol", "--inject-theta", "0.5"], &cfg, &out).status.code(), Some(2));
    let tagged = SMALL_LQ.replacen('{', "{\"kind\": \"decay-v\",", 1);
    let cfg = write(dir.path(), "tagged.json", &tagged);
    assert_eq!(run(&["reduce-ol"], &cfg, &out).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn constants_follow_the_cycle_recursion() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["constants"], &config("chain_constants.json"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("constants.json")).unwrap()).unwrap();
    let last = json["reports"].as_array().unwrap().last().unwrap();
    let theta = last["theta"].as_f64().unwrap();
    // Closed form on a cycle, far from the antipode.
    let mut expected = vec![theta, theta / (1.0 - 2.0 * theta * theta)];
    while expected.len() < 10 {
        let prev = *expected.last().unwrap();
        expected.push(theta / (1.0 - theta * prev));
    }
    let mut reader = csv::Reader::from_path(dir.path().join("constants.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["h", "sup_count", "gamma_h", "gamma_prod"]);
    let mut prod = 1.0;
    let mut rows = 0;
    for (h, rec) in reader.records().enumerate() {
        let rec = rec.unwrap();
        let g: f64 = rec[2].parse().unwrap();
        let p: f64 = rec[3].parse().unwrap();
        prod *= expected[h];
        assert!((g - expected[h]).abs() <= 1e-12, "h = {h}: {g} vs {}", expected[h]);
        assert!((p - prod).abs() <= 1e-12 * prod.max(1e-300) + 1e-300);
        rows += 1;
    }
    assert_eq!(rows, 10);
}

#[test]
fn reduce_ol_writes_one_row_per_radius_identically_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL_LQ);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = bin()
            .env("SPARSE_GAME_THREADS", threads)
            .args(["reduce-ol", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            std::fs::read(out.join("reduce_ol.csv")).unwrap(),
            std::fs::read(out.join("reduce_ol.json")).unwrap(),
            o.stdout,
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,avg_w2_sq,sup_w2_sq,gamma_r,rhs,theta,theta_star");
    assert_eq!(lines.len(), 4);
    assert!(!text.contains('\r'));
    for (k, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 7);
        assert_eq!(cells[0], (k + 1).to_string());
        let avg: f64 = cells[1].parse().unwrap();
        let rhs: f64 = cells[4].parse().unwrap();
        assert!(avg > 0.0 && avg <= rhs);
    }
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.json", SMALL_LQ);
    let o = bin()
        .env("SPARSE_GAME_THREADS", "zero")
        .args(["constants", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn strict_mode_aborts_beyond_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "lattice.json",
        r#"{"graph": {"generator": "lattice", "radius": 4, "orientation": "undirected"},
            "game": {"kind": "lq", "horizon": 1, "kappa": {"uniform": 1}, "coupling": [[1]], "mu": 0.9,
                     "terminal": {"uniform": [[0]]}, "sigma": {"uniform": [[1]]},
                     "init": {"uniform": {"mean": [0], "cov": [[1]]}}},
            "radii": [3]}"#,
    );
    let lenient = dir.path().join("lenient");
    let o = run(&["constants"], &cfg, &lenient);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds theta*"));
    let strict = dir.path().join("strict");
    let o = run(&["constants", "--strict"], &cfg, &strict);
    assert_eq!(o.status.code(), Some(3));
    assert!(!strict.exists());
}

#[test]
fn picard_non_convergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL_LQ.replacen("\"steps\": 400", "\"steps\": 200, \"max_iter\": 3", 1);
    let cfg = write(dir.path(), "nc.json", &text);
    let out = dir.path().join("out");
    let o = run(&["reduce-dist"], &cfg, &out);
    assert_eq!(o.status.code(), Some(4));
    assert!(!out.exists());
}

#[test]
fn every_example_config_parses_and_the_fast_ones_run() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["chain_constants.json", "lattice_constants.json"] {
        let o = run(&["constants"], &config(name), dir.path());
        assert!(o.status.success(), "{name}");
    }
    for (kind, name) in [
        ("reduce-ol", "chain_reduce_ol.json"),
        ("reduce-dist", "chain_reduce_dist.json"),
        ("reduce-det", "chain_reduce_det.json"),
        ("decay-v", "chain_decay_v.json"),
        ("perturb", "chain_perturb.json"),
    ] {
        let o = run(&[kind, "--steps", "100"], &config(name), &dir.path().join(kind));
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let perturb = std::fs::read_to_string(dir.path().join("perturb/perturb.csv")).unwrap();
    let row: Vec<f64> = perturb.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    // lhs > 0 and lhs <= bound.
    assert!(row[4] > 0.0 && row[4] <= row[10]);
}

#[test]
fn validate_subset_is_deterministic_and_flags_injected_theta() {
    let dir = tempfile::tempdir().unwrap();
    let a = bin().args(["validate", "--criteria", "1,2,3,12"]).output().unwrap();
    let b = bin()
        .args(["validate", "--criteria", "1,2,3,12", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(dir.path().join("validate.txt")).unwrap(), a.stdout);

    let o = bin()
        .args(["validate", "--criteria", "4", "--inject-theta", "0.9"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]  4"));

    let o = bin().args(["validate", "--criteria", "13"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
