//! End-to-end checks of the compiled binary: exit codes, output-directory
//! resolution, override precedence, and bitwise reproducibility of the
//! emitted CSV files.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lpmrl");

/// Overrides that shrink the bandit suite to a fraction of a second.
const TINY_BANDIT: &[&str] = &[
    "--override",
    "schedule.total_episodes=300",
    "--override",
    "schedule.cadence=50",
    "--override",
    "schedule.snapshot_every=50",
];

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("LPMRL_OUT_DIR")
        .output()
        .expect("binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("expected output at {}: {e}", path.display()))
}

#[test]
fn bandit_reruns_are_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = dir.path().to_str().unwrap();
        let mut args = vec!["bandit", "--seed", "7", "--trials", "2", "--out", out];
        args.extend_from_slice(TINY_BANDIT);
        let result = run(&args);
        assert_eq!(result.status.code(), Some(0), "stderr: {}", stderr(&result));
    }
    let a = std::fs::read(dir_a.path().join("bandit.csv")).unwrap();
    let b = std::fs::read(dir_b.path().join("bandit.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "same seed and settings must reproduce the same bytes");
}

#[test]
fn csv_is_named_after_the_experiment_with_expected_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["bandit", "--seed", "3", "--trials", "1", "--out", out];
    args.extend_from_slice(TINY_BANDIT);
    let result = run(&args);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", stderr(&result));
    let text = read(&dir.path().join("bandit.csv"));
    assert!(text.starts_with("objective,pulls,p_a,p_b,p_c\n"));
    // Three objectives share one pull axis: 300 episodes at snapshot
    // stride 50 gives six checkpoints each.
    assert_eq!(text.lines().count(), 1 + 3 * 6);
}

#[test]
fn cli_override_beats_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "experiment = \"bandit\"\n\
         trials = 1\n\
         base_seed = 5\n\
         [schedule]\n\
         total_episodes = 200\n\
         cadence = 50\n\
         snapshot_every = 50\n",
    )
    .unwrap();
    let out = dir.path().to_str().unwrap();
    let result = run(&[
        "bandit",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out,
        "--override",
        "schedule.total_episodes=100",
    ]);
    assert_eq!(result.status.code(), Some(0), "stderr: {}", stderr(&result));
    // 100 episodes at stride 50 leaves two checkpoints, not the file's four.
    assert!(
        stdout(&result).contains("1 trials, 2 checkpoints"),
        "stdout: {}",
        stdout(&result)
    );
}

#[test]
fn env_var_supplies_the_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let result = Command::new(BIN)
        .args([
            "landscape",
            "--override",
            "landscape.resolution=3",
            "--override",
            "landscape.rollouts=16",
        ])
        .env("LPMRL_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(0), "stderr: {}", stderr(&result));
    let text = read(&dir.path().join("landscape.csv"));
    assert!(text.starts_with("theta1,theta2,"));
}

#[test]
fn out_flag_beats_the_env_var() {
    let flagged = tempfile::tempdir().unwrap();
    let from_env = tempfile::tempdir().unwrap();
    let result = Command::new(BIN)
        .args([
            "landscape",
            "--out",
            flagged.path().to_str().unwrap(),
            "--override",
            "landscape.resolution=3",
            "--override",
            "landscape.rollouts=16",
        ])
        .env("LPMRL_OUT_DIR", from_env.path())
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(0), "stderr: {}", stderr(&result));
    assert!(flagged.path().join("landscape.csv").exists());
    assert!(!from_env.path().join("landscape.csv").exists());
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, "experiment = \"bandit\"\ntrails = 3\n").unwrap();
    let result = run(&["validate-config", "--config", broken.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
    let message = stderr(&result);
    assert!(message.contains("error"), "{message}");
    // The offending key is named and anchored to its line in the file.
    assert!(message.contains("trails"), "{message}");
    assert!(message.contains("line 2"), "{message}");

    // The same file must also stop an actual run before any training.
    let result = run(&["bandit", "--config", broken.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
}

#[test]
fn out_of_range_value_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let result = run(&[
        "bandit",
        "--out",
        out,
        "--override",
        "critic.step_size=-0.5",
    ]);
    assert_eq!(result.status.code(), Some(1), "stderr: {}", stderr(&result));
}

#[test]
fn training_divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // An absurd critic step blows the value weights up within a few
    // update windows; the run must stop with the dedicated exit code.
    let result = run(&[
        "consumption",
        "--out",
        out,
        "--trials",
        "1",
        "--override",
        "sweep.nu_values=[\"inf\"]",
        "--override",
        "critic.step_size=1e6",
        "--override",
        "schedule.total_episodes=3000",
        "--override",
        "schedule.cadence=200",
        "--override",
        "schedule.eval_every=1000",
        "--override",
        "schedule.eval_rollouts=10",
    ]);
    assert_eq!(result.status.code(), Some(2), "stderr: {}", stderr(&result));
    assert!(stderr(&result).contains("non-finite"));
}

#[test]
fn validate_config_accepts_each_checked_in_recipe() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut checked = 0;
    for entry in std::fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let result = run(&["validate-config", "--config", path.to_str().unwrap()]);
        assert_eq!(
            result.status.code(),
            Some(0),
            "{} should validate: {}",
            path.display(),
            stderr(&result)
        );
        checked += 1;
    }
    assert!(checked >= 2, "expected checked-in recipes under configs/");
}
