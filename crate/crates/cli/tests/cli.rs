use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iongate-sim"))
}

#[test]
fn modes_prints_csv_with_a_metadata_header() {
    let out = bin().arg("modes").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# iongate "));
    assert!(text.contains("mode,frequency_hz,omega_over_omega_x"));
}

#[test]
fn tables_are_written_to_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["jeff", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(listed.lines().count(), 2);
    assert!(dir.path().join("jeff_pairs.csv").exists());
}

#[test]
fn signed_detuning_override_changes_the_gate_time() {
    let out = bin().args(["jeff", "--delta-l-hz", "-800000"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let tg: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# t_gate_s = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(tg > 1.4e-3 && tg < 1.5e-3, "{tg}");
}

#[test]
fn a_config_for_another_experiment_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "experiment = \"modes\"\n[lab]\n").unwrap();
    let out = bin().args(["jeff", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("modes"));
    let ok = bin().args(["modes", "--config"]).arg(&path).output().unwrap();
    assert!(ok.status.success());
}

#[test]
fn bad_arguments_fail() {
    assert_eq!(bin().args(["force-demo", "--force", "z"]).output().unwrap().status.code(), Some(1));
    assert!(!bin().arg("nonsense").output().unwrap().status.success());
}

#[test]
fn invariant_violations_give_exit_code_two() {
    let out = bin().args(["polaron-check", "--headroom", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invariant violated"));
}
