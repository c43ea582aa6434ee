//! End-to-end checks of the command-line binary: exit codes, config file
//! handling, override precedence, and the emitted CSV/sidecar pair.

use std::process::Command;

fn cmpsim(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cmpsim")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn data_rows(csv: &str) -> Vec<String> {
    csv.lines().skip(1).filter(|l| !l.is_empty()).map(str::to_string).collect()
}

#[test]
fn success_writes_csv_and_reproducibility_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let (code, stdout, _) = cmpsim(&[
        "g2-vs-temperature",
        "--solver",
        "analytic",
        "--set",
        "sweep.temperature_k=1:300:4",
        "--set",
        "sweep.omega_0_hz=7.875e9",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "stdout: {stdout}");

    let csv = std::fs::read_to_string(&path).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "omega_0_hz,drive_hz,temperature_k,n_pho,n_mag,g2_pho,g2_mag,error"
    );
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 4);

    // hotter bath means a larger thermal fraction at fixed drive
    let g2: Vec<f64> =
        rows.iter().map(|r| r.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert!(g2.windows(2).all(|w| w[1] >= w[0]), "g2 not monotone in T: {g2:?}");
    assert!(g2.iter().all(|&v| (1.0..=2.0).contains(&v)));

    let sidecar = path.with_extension("meta.json");
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&sidecar).unwrap()).unwrap();
    assert_eq!(meta["scenario"], "g2_vs_temperature");
    assert_eq!(meta["config"]["solver"], "analytic");
    assert_eq!(meta["config"]["sweep.temperature_k"], "1:300:4");
}

#[test]
fn usage_errors_exit_1() {
    let (code, _, _) = cmpsim(&["no-such-scenario"]);
    assert_eq!(code, 1);

    let (code, _, stderr) = cmpsim(&["pulse", "--set", "bogus.key=1"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("bogus.key"), "stderr: {stderr}");

    // the field and the magnon frequency are two spellings of one knob
    let (code, _, stderr) = cmpsim(&[
        "pulse",
        "--set",
        "params.b_mt=281.25",
        "--set",
        "params.omega_m_hz=7.875e9",
    ]);
    assert_eq!(code, 1);
    assert!(stderr.contains("exclusive"), "stderr: {stderr}");
}

#[test]
fn solver_failures_exit_2() {
    // a coupling far above the sampling rate makes the explicit scheme blow
    // up; the run must report the divergence, not emit garbage
    let (code, _, stderr) = cmpsim(&[
        "pulse",
        "--solver",
        "trajectories",
        "--n-traj",
        "10",
        "--n-times",
        "3",
        "--dt",
        "1e-10",
        "--t-end",
        "2e-8",
        "--set",
        "params.g_hz=1e12",
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("non-finite"), "stderr: {stderr}");
}

#[test]
fn overrides_stack_file_then_set_then_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(
        &config,
        "# pulse reproduction setup\nscenario = pulse\npulse.n_times = 3\npulse.n_inject = 1e6\n",
    )
    .unwrap();
    let csv_path = dir.path().join("pulse.csv");
    let run = |extra: &[&str]| -> usize {
        let mut args = vec![
            "pulse",
            "--solver",
            "analytic",
            "--config",
            config.to_str().unwrap(),
            "--out",
            csv_path.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let (code, stdout, stderr) = cmpsim(&args);
        assert_eq!(code, 0, "stdout: {stdout}\nstderr: {stderr}");
        data_rows(&std::fs::read_to_string(&csv_path).unwrap()).len()
    };
    assert_eq!(run(&[]), 3);
    assert_eq!(run(&["--set", "pulse.n_times=4"]), 4);
    assert_eq!(run(&["--set", "pulse.n_times=4", "--n-times", "5"]), 5);
}

#[test]
fn config_file_rejects_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("broken.conf");
    std::fs::write(&config, "pulse.n_times 3\n").unwrap();
    let (code, _, stderr) = cmpsim(&["pulse", "--config", config.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("broken.conf:1"), "stderr: {stderr}");
}
