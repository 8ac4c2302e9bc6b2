use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_udrl-lab"))
}

#[test]
fn unknown_domain_is_a_usage_error() {
    let out = bin().args(["domains", "export", "nowhere"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown domain"));
}

#[test]
fn unknown_domain_in_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"domain": "nowhere", "grid": {"delta": [0.01]}}"#).unwrap();
    let out = bin()
        .args(["iterate", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown domain"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = bin().args(["reproduce", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn domains_list_names_every_domain() {
    let out = bin().args(["domains", "list"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["bandit", "z3-walk", "grid", "odt-grid-22", "example1-a"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn export_is_loadable_json() {
    let out = bin().args(["domains", "export", "bandit"]).output().unwrap();
    assert!(out.status.success());
    let ce = udrl_lab::ce::CommandExtension::from_json(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(ce.num_states(), 2);
}

#[test]
fn iterate_and_bounds_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"domain": "bandit", "grid": {"delta": [0.01, 0.02]}, "n_steps": 5, "bounds": ["supp_mu", "unique_opt"]}"#,
    )
    .unwrap();
    for cmd in ["iterate", "bounds"] {
        let out = bin()
            .args([cmd, "--config", cfg.to_str().unwrap(), "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(dir.path().join(format!("{cmd}.csv"))).unwrap();
        assert!(text.starts_with("# tool: udrl-lab"));
        assert!(dir.path().join(format!("{cmd}.json")).exists());
    }
    let iterate = fs::read_to_string(dir.path().join("iterate.csv")).unwrap();
    assert_eq!(iterate.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 6);
}

#[test]
fn reproduce_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = bin()
            .args(["reproduce", "fig3", "exb1", "--seed", "11", "--jobs", "2", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    for f in ["fig3.csv", "exb1.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn validate_passes() {
    let out = bin().arg("validate").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
