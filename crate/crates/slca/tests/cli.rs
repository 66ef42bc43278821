//! End-to-end exercises of the command-line binary: exit codes, artifact
//! layout, the output-directory precedence rules, and byte-level
//! reproducibility of the canned experiments.

use std::path::Path;
use std::process::{Command, Output};

fn slca() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_slca"));
    // Isolate from any ambient setting; individual tests opt back in.
    cmd.env_remove("SLCA_OUT");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary launches")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit {code}\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_dir_sorted(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn gen_writes_a_problem_the_solvers_can_reload() {
    let dir = tempfile::tempdir().unwrap();
    let gen_dir = dir.path().join("problem");
    let out = run(slca()
        .args(["gen", "--m", "12", "--n", "30", "--seed", "4"])
        .arg("--out")
        .arg(&gen_dir));
    assert_exit(&out, 0);
    for f in ["dictionary.csv", "signal.csv", "problem.json", "truth.csv", "gen.json"] {
        assert!(gen_dir.join(f).is_file(), "gen must write {f}");
    }

    let solve_dir = dir.path().join("solution");
    let out = run(slca()
        .args(["solve-cd", "--problem"])
        .arg(gen_dir.join("problem.json"))
        .arg("--out")
        .arg(&solve_dir));
    assert_exit(&out, 0);
    assert!(solve_dir.join("cd.json").is_file());
    assert!(solve_dir.join("cd_trace.csv").is_file());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("objective"), "summary line missing:\n{text}");
}

#[test]
fn fig1_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = (dir.path().join("one"), dir.path().join("two"));
    for d in [&d1, &d2] {
        let out = run(slca().args(["fig1", "--t-end", "20"]).arg("--out").arg(d));
        assert_exit(&out, 0);
        let text = String::from_utf8_lossy(&out.stdout).into_owned();
        assert!(text.contains("PASS"), "fig1 must report its checks:\n{text}");
    }
    let names = read_dir_sorted(&d1);
    assert_eq!(names, read_dir_sorted(&d2));
    assert!(names.contains(&"fig1.json".to_string()));
    for name in &names {
        assert_eq!(
            std::fs::read(d1.join(name)).unwrap(),
            std::fs::read(d2.join(name)).unwrap(),
            "{name} differs between identical invocations"
        );
    }
}

#[test]
fn bench_is_deterministic_apart_from_wall_clock() {
    let dir = tempfile::tempdir().unwrap();
    let (d1, d2) = (dir.path().join("one"), dir.path().join("two"));
    for d in [&d1, &d2] {
        let out = run(slca()
            .args([
                "bench", "--m", "16", "--n", "64", "--density", "1.0", "--seed", "2", "--step",
                "0.01", "--t-end", "5",
            ])
            .arg("--out")
            .arg(d));
        assert_exit(&out, 0);
    }
    for name in ["bench.csv", "bench.json"] {
        assert_eq!(
            std::fs::read(d1.join(name)).unwrap(),
            std::fs::read(d2.join(name)).unwrap(),
            "{name} must not depend on wall-clock time"
        );
    }
    // Wall-clock readings live apart so everything else can be diffed.
    assert!(d1.join("timings.json").is_file());
    assert!(d2.join("timings.json").is_file());
}

#[test]
fn compare_reports_agreement_through_its_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(slca()
        .args(["compare", "--spiking-t-end", "100"])
        .arg("--out")
        .arg(dir.path().join("pass")));
    assert_exit(&ok, 0);
    let text = String::from_utf8_lossy(&ok.stdout).into_owned();
    assert!(text.contains("PASS"), "agreement lines missing:\n{text}");
    assert!(dir.path().join("pass").join("compare.json").is_file());

    // An impossible gap bound must flip the exit code without crashing.
    let fail = run(slca()
        .args(["compare", "--spiking-t-end", "100", "--max-fista-gap", "1e-30"])
        .arg("--out")
        .arg(dir.path().join("fail")));
    assert_exit(&fail, 1);
    let text = String::from_utf8_lossy(&fail.stdout).into_owned();
    assert!(text.contains("FAIL"), "failed assertion line missing:\n{text}");

    // ... unless the caller explicitly asked for a report instead of a gate.
    let waived = run(slca()
        .args(["compare", "--spiking-t-end", "100", "--max-fista-gap", "1e-30", "--no-assert"])
        .arg("--out")
        .arg(dir.path().join("waived")));
    assert_exit(&waived, 0);
}

#[test]
fn operational_errors_use_a_distinct_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("does-not-exist.json");
    let out = run(slca()
        .args(["solve-cd", "--problem"])
        .arg(&missing)
        .arg("--out")
        .arg(dir.path().join("out")));
    assert_exit(&out, 2);
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("error"), "stderr should explain the failure:\n{err}");
}

#[test]
fn readout_decodes_a_previously_saved_log() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = run(slca()
        .args(["solve-spiking", "--t-end", "30"])
        .arg("--out")
        .arg(&out_dir));
    assert_exit(&out, 0);
    assert!(out_dir.join("log.json").is_file());

    let out = run(slca()
        .args(["readout", "--t0", "3", "--t", "30"])
        .arg("--out")
        .arg(&out_dir));
    assert_exit(&out, 0);
    assert!(out_dir.join("readout.csv").is_file());
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("thresh_current"), "readout table missing:\n{text}");

    // The same log decoded against a problem of the wrong size must be
    // rejected as an operational error.
    let out = run(slca()
        .args(["readout", "--m", "12", "--n", "30", "--t0", "3", "--t", "30"])
        .arg("--out")
        .arg(&out_dir));
    assert_exit(&out, 2);
}

#[cfg(unix)]
#[test]
fn closing_stdout_early_never_panics() {
    use std::io::Read;
    let dir = tempfile::tempdir().unwrap();
    let mut child = slca()
        .args(["solve-cd", "--m", "12", "--n", "30"])
        .arg("--out")
        .arg(dir.path())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .expect("binary launches");
    // Read one byte, then hang up like `head -1` would.
    let mut stdout = child.stdout.take().unwrap();
    let mut byte = [0u8; 1];
    let _ = stdout.read(&mut byte);
    drop(stdout);
    let status = child.wait().unwrap();
    let mut err = String::new();
    child.stderr.take().unwrap().read_to_string(&mut err).unwrap();
    assert!(!err.contains("panic"), "broken pipe must not panic:\n{err}");
    // Either the whole output fit in the pipe buffer (clean exit) or the
    // process died on the pipe signal; both are pipeline-friendly.
    assert!(
        status.code() == Some(0) || status.code().is_none(),
        "unexpected status {status:?}"
    );
}

#[test]
fn output_directory_precedence_is_flag_then_env() {
    let dir = tempfile::tempdir().unwrap();
    let env_dir = dir.path().join("from-env");
    let out = run(slca()
        .args(["gen", "--m", "8", "--n", "16"])
        .env("SLCA_OUT", &env_dir));
    assert_exit(&out, 0);
    assert!(env_dir.join("problem.json").is_file(), "SLCA_OUT must be honored");

    let flag_dir = dir.path().join("from-flag");
    let unused_env = dir.path().join("unused-env");
    let out = run(slca()
        .args(["gen", "--m", "8", "--n", "16"])
        .env("SLCA_OUT", &unused_env)
        .arg("--out")
        .arg(&flag_dir));
    assert_exit(&out, 0);
    assert!(flag_dir.join("problem.json").is_file(), "--out must win over SLCA_OUT");
    assert!(!unused_env.exists(), "the losing SLCA_OUT directory must stay untouched");
}
