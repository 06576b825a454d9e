use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symapprox::model::Model;
use symapprox::Configuration;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symapprox"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("process exited normally")
}

const SYM_D1: &str = r#"
kind = "sym"
d = 1
n = 2
delta = 0.5
samples = 2000
[target]
name = "sum-coords"
"#;

fn build(dir: &Path, config: &str) -> PathBuf {
    let cfg = write_config(dir, config);
    let out = dir.join("out");
    let o = run(&[
        "build",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.join("model.txt")
}

#[test]
fn build_reports_wedge_and_feature_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYM_D1);
    let out = dir.path().join("out");
    let o = run(&[
        "build",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("wedge_count: 3\n"), "{text}");
    assert!(text.contains("M: 12\n"), "{text}");
    assert!(text.contains("cells_per_dim: 2\n"), "{text}");
    assert!(out.join("model.txt").exists());
}

#[test]
fn epsilon_outside_hypothesis_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SYM_D1.replace("delta = 0.5", "epsilon = 5.0"));
    let o = run(&[
        "build",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unreachable_separation_is_capacity_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
kind = "antisym-c2"
d = 2
n = 3
delta = 0.25
tau = 0.99
samples = 100
[target]
name = "vandermonde-antisym"
"#,
    );
    let o = run(&[
        "build",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn small_cap_is_capacity_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SYM_D1);
    let o = run(&[
        "build",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--cap",
        "2",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SYM_D1}\nbogus = 1\n"));
    let o = run(&["build", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_at_nodes_and_permuted_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = build(dir.path(), SYM_D1);
    let m = model.to_str().unwrap();
    // Corner node (0, 0.5) stores f = 0.5.
    let a = run(&["eval", m, "--x", "0.0;0.5"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a).trim().parse::<f64>().unwrap(), 0.5);
    let b = run(&["eval", m, "--x", "0.7;0.2"]);
    let c = run(&["eval", m, "--x", "0.2;0.7"]);
    assert_eq!(stdout(&b), stdout(&c));
    assert_eq!(stdout(&b).trim().parse::<f64>().unwrap(), 0.5);
}

#[test]
fn eval_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = build(dir.path(), SYM_D1);
    let m = model.to_str().unwrap();
    assert_eq!(code(&run(&["eval", m, "--x", "1.5;0.2"])), 2);
    assert_eq!(code(&run(&["eval", m, "--x", "0.1,0.2;0.3,0.4"])), 2);
    assert_eq!(code(&run(&["eval", m, "--x", "0.1;0.2;0.3"])), 2);
    let bogus = dir.path().join("bogus.txt");
    std::fs::write(&bogus, "not a model\n").unwrap();
    assert_eq!(
        code(&run(&["eval", bogus.to_str().unwrap(), "--x", "0.1;0.2"])),
        2
    );
}

#[test]
fn verify_passes_and_creates_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SYM_D1.replace("delta = 0.5", "delta = 0.25"));
    let out = dir.path().join("deep/nested/out");
    let o = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        code(&o),
        0,
        "{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["bound_satisfied"], true);
    assert_eq!(report["passed"], true);
    assert_eq!(report["M"], 10 * 4);
    assert!(report["sup_error"]["hex"]
        .as_str()
        .unwrap()
        .starts_with("0x"));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("metric,value,hex\n"));
    assert!(csv.contains("check_error_bound,pass,"));
}

#[test]
fn verify_antisym_runs_cauchy_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
kind = "antisym-c1"
d = 1
n = 3
delta = 0.125
samples = 2000
[target]
name = "vandermonde-gauss-antisym"
"#,
    );
    let o = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS cauchy_factor"));
}

#[test]
fn verify_flags_mutated_target() {
    let dir = tempfile::tempdir().unwrap();
    let body =
        SYM_D1.replace("delta = 0.5", "delta = 0.25") + "[target.params]\nbreak_symmetry = 0.5\n";
    let cfg = write_config(dir.path(), &body);
    let o = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL target_invariance"));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn sweep_writes_table_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
kind = "sym"
d = 1
n = 2
deltas = [0.5, 0.25, 0.125]
samples = 2000
[target]
name = "sum-coords"
"#,
    );
    let out = dir.path().join("s");
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("delta,sup_error,bound,wedge_count,M,wall_time_s")
    );
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
    let slope: f64 = csv
        .lines()
        .last()
        .unwrap()
        .strip_prefix("# slope=")
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.8..=1.2).contains(&slope), "slope {slope}");
}

#[test]
fn sweep_rejects_increasing_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "kind = \"sym\"\nd = 1\nn = 2\ndeltas = [0.125, 0.25, 0.5]\n[target]\nname = \"sum-coords\"\n",
    );
    let o = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
kind = "antisym-c2"
d = 2
n = 2
delta = 0.25
samples = 1000
seed = 7
[target]
name = "vandermonde-gauss-antisym"
"#,
    );
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let o = run(&[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--no-timing",
        ]);
        assert!(matches!(code(&o), 0 | 1));
        let files: Vec<Vec<u8>> = ["report.json", "report.csv"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .collect();
        reports.push(files);
        let b = run(&[
            "build",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&b), 0);
        reports
            .last_mut()
            .unwrap()
            .push(std::fs::read(out.join("model.txt")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn eval_matches_in_process_model_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = build(
        dir.path(),
        r#"
kind = "sym"
d = 2
n = 2
delta = 0.25
smooth_width = 0.05
samples = 200
[target]
name = "gaussian-pair-sym"
"#,
    );
    let model = Model::from_text(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let configs: Vec<Configuration> = (0..100)
        .map(|_| {
            Configuration::from_rows(&[
                [rng.random::<f64>(), rng.random::<f64>()],
                [rng.random::<f64>(), rng.random::<f64>()],
            ])
            .unwrap()
        })
        .collect();
    // `{:e}` of an f64 round-trips exactly.
    let lines: String = configs
        .iter()
        .map(|x| {
            x.points
                .iter()
                .map(|p| {
                    p.coords
                        .iter()
                        .map(|c| format!("{c:e}"))
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join(";")
                + "\n"
        })
        .collect();
    let input = dir.path().join("inputs.txt");
    std::fs::write(&input, lines).unwrap();
    let o = run(&[
        "eval",
        model_path.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let got: Vec<f64> = stdout(&o).lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(got.len(), 100);
    for (x, g) in configs.iter().zip(got) {
        let want = model.eval(x).unwrap();
        // Printed with 17 significant digits, which is exact for f64.
        assert_eq!(g.to_bits(), want.to_bits());
    }
}
