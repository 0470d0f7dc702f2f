use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cvt_elites_cli::commands::{self, SweepAxis};
use cvt_elites_cli::config::{ExperimentConfig, TaskKind};

fn maze_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/open_maze.txt")
}

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvt-elites"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cli(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = cli(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|row| row.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

const SYNTHETIC: &[&str] = &[
    "--task",
    "synthetic",
    "--set",
    "cvt_samples=2000",
    "--set",
    "initial_count=100",
    "--set",
    "offspring_per_generation=50",
    "--evaluations",
    "1000",
];

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn args(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn synthetic_pipeline_writes_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let a = with(SYNTHETIC, &["--k", "40", "--runs", "2", "-o", "out"]);
    let mut gen = vec!["generate-centroids".to_string()];
    gen.extend(a.clone());
    ok(dir, &args(&gen));
    let centroids = std::fs::read_to_string(dir.join("out/centroids.txt")).unwrap();
    assert_eq!(centroids.lines().filter(|l| !l.trim().is_empty()).count(), 40);

    let mut run = vec!["run".to_string()];
    run.extend(a);
    let stdout = ok(dir, &args(&run));
    assert!(stdout.contains("run 1: seed 1, 1000 evaluations"), "{stdout}");
    assert!(dir.join("out/config.toml").is_file());

    let (header, rows) = read_csv(&dir.join("out/run_0/log.csv"));
    assert_eq!(header, ["generation", "evaluations", "best_performance", "coverage"]);
    // initialization plus 18 generations of 50
    assert_eq!(rows.len(), 19);
    assert_eq!(rows.last().unwrap()[1], "1000");

    let (header, rows) = read_csv(&dir.join("out/run_1/archive.csv"));
    assert_eq!(&header[..4], ["niche_id", "performance", "b0", "b1"]);
    assert!(!rows.is_empty() && rows.len() <= 40);

    ok(dir, &["evaluate", "--run-dir", "out"]);
    let (header, rows) = read_csv(&dir.join("out/best.csv"));
    assert_eq!(header, ["scenario", "run", "best"]);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[0] == "base"));
    let (header, rows) = read_csv(&dir.join("out/distribution.csv"));
    assert_eq!(header, ["x", "median_ratio"]);
    assert_eq!(rows.len(), 101);
    let ratios: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(ratios.windows(2).all(|w| w[0] >= w[1]), "CCDF must not increase");
    let (_, rows) = read_csv(&dir.join("out/expected_best.csv"));
    assert_eq!(rows.len(), 1);

    let stdout = ok(dir, &["metrics", "--run-dir", "out"]);
    assert!(stdout.contains("run 0:"), "{stdout}");
    let (header, rows) = read_csv(&dir.join("out/metrics.csv"));
    assert_eq!(header, ["run", "elites", "coverage", "spread", "best"]);
    assert_eq!(rows.len(), 2);
}

#[test]
fn single_elite_archive_evaluates_to_its_own_fitness() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let a = with(SYNTHETIC, &["--k", "1", "--runs", "1", "-o", "one"]);
    for cmd in ["generate-centroids", "run"] {
        let mut v = vec![cmd.to_string()];
        v.extend(a.clone());
        ok(dir, &args(&v));
    }
    ok(dir, &["evaluate", "--run-dir", "one"]);
    let (_, archive) = read_csv(&dir.join("one/run_0/archive.csv"));
    assert_eq!(archive.len(), 1);
    let (_, best) = read_csv(&dir.join("one/best.csv"));
    assert_eq!(best, vec![vec!["base".to_string(), "0".into(), archive[0][1].clone()]]);
}

#[test]
fn maze_evaluation_covers_every_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let maze = format!("maze_file=\"{}\"", maze_file().display());
    let a = [
        "--set",
        &maze,
        "--k",
        "20",
        "--set",
        "cvt_samples=500",
        "--set",
        "initial_count=40",
        "--set",
        "offspring_per_generation=20",
        "--evaluations",
        "100",
        "--runs",
        "1",
        "-o",
        "m",
    ];
    for cmd in ["generate-centroids", "run"] {
        ok(dir, &args(&with(&[cmd], &a)));
    }
    ok(dir, &["evaluate", "--run-dir", "m", "--include-base"]);
    let (_, rows) = read_csv(&dir.join("m/best.csv"));
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[0][0], "base");
    assert_eq!(rows[1][0], "outer-south/inner-south");
    // the archive's own best is its best in the unmodified maze
    let (_, archive) = read_csv(&dir.join("m/run_0/archive.csv"));
    let stored = archive
        .iter()
        .map(|r| r[1].parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), stored);
    let (_, dist) = read_csv(&dir.join("m/distribution.csv"));
    assert_eq!(dist.len(), 401);
    let ratios: Vec<f64> = dist.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(ratios.windows(2).all(|w| w[0] <= w[1]), "CDF must not decrease");
    assert_eq!(*ratios.last().unwrap(), 1.0);
}

#[test]
fn oversized_grid_is_refused_with_an_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    let maze = format!("maze_file=\"{}\"", maze_file().display());
    let err = fails(
        tmp.path(),
        &[
            "run",
            "--set",
            &maze,
            "--algorithm",
            "grid",
            "--set",
            "discretizations=[2]",
            "--samples",
            "25",
        ],
    );
    assert!(err.contains("4096 TB"), "{err}");
    assert!(!tmp.path().join("results").exists());
}

#[test]
fn helpful_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let err = fails(dir, &args(&with(&["run"], SYNTHETIC)));
    assert!(err.contains("generate-centroids"), "{err}");
    let err = fails(dir, &["run", "--task", "synthetic", "--set", "mutation_rte=0.2"]);
    assert!(err.contains("mutation_rte"), "{err}");
    let err = fails(dir, &["evaluate", "--run-dir", "nowhere"]);
    assert!(err.contains("config.toml"), "{err}");
    let err = fails(dir, &["run", "--task", "synthetic", "--evaluations", "100"]);
    assert!(err.contains("budget"), "{err}");
    fails(dir, &["sweep", "--task", "synthetic", "--axis", "k"]);
}

#[test]
fn sweep_needs_values_and_writes_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        task: TaskKind::Synthetic,
        k: 20,
        cvt_samples: 1000,
        initial_count: 50,
        offspring_per_generation: 50,
        total_evaluations: 500,
        runs: 2,
        output_dir: tmp.path().join("sweep"),
        ..ExperimentConfig::default()
    };
    assert!(commands::sweep(&config, SweepAxis::K, &[]).is_err());
    assert!(commands::sweep(&config, SweepAxis::K, &[2.5]).is_err());

    let dirs = commands::sweep(&config, SweepAxis::P, &[0.5, 2.0]).unwrap();
    assert_eq!(dirs, [tmp.path().join("sweep/p_0.5"), tmp.path().join("sweep/p_2")]);
    let saved = commands::load_run_config(&dirs[0]).unwrap();
    assert_eq!(saved.norm_order, 0.5);
    let (header, rows) = read_csv(&tmp.path().join("sweep/sweep.csv"));
    assert_eq!(header, ["axis", "value", "run", "elites", "coverage", "spread", "best"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][..3], ["p", "0.5", "0"]);
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("exp.toml"),
        "task = \"synthetic\"\nk = 30\ncvt_samples = 600\ninitial_count = 60\noffspring_per_generation = 20\ntotal_evaluations = 200\nruns = 1\n",
    )
    .unwrap();
    // flags override the file
    ok(dir, &["generate-centroids", "-c", "exp.toml", "--k", "25", "-o", "a"]);
    ok(dir, &["run", "-c", "exp.toml", "--k", "25", "-o", "a", "--seed", "7"]);
    let saved = commands::load_run_config(&dir.join("a")).unwrap();
    assert_eq!((saved.k, saved.seed, saved.cvt_samples), (25, 7, 600));
    assert!(saved.output_dir.is_absolute());
}
