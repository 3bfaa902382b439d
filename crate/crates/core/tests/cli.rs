use std::path::{Path, PathBuf};

use qedbohm::cli::{main_with_args, verify_manifest};
use qedbohm::plot::Table;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn qedbohm(args: &[&str]) -> (i32, String, String) {
    let mut out = vec![];
    let mut err = vec![];
    let mut argv = vec!["qedbohm"];
    argv.extend_from_slice(args);
    let code = main_with_args(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const SHORT: [&str; 4] = ["--set", "sim_duration=30", "--set", "n_trajectories=24"];

fn short_run(dir: &Path) -> (i32, String, String) {
    let scn = scenario("unmeasured.scn");
    let mut args = vec!["run", scn.to_str().unwrap(), dir.to_str().unwrap()];
    args.extend_from_slice(&SHORT);
    qedbohm(&args)
}

#[test]
fn shipped_scenarios_parse() {
    for name in ["measured.scn", "unmeasured.scn"] {
        let cfg = qedbohm::config::ScenarioConfig::from_file(scenario(name)).unwrap();
        cfg.validated().unwrap();
    }
}

#[test]
fn run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = short_run(dir.path());
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("config_hash"));
    for f in [
        "populations.csv",
        "energies.csv",
        "trajectories.csv",
        "equivariance.csv",
        "summary.txt",
        "scenario.scn",
        "manifest.txt",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(verify_manifest(dir.path()).unwrap().is_empty());

    let pops = Table::read(&dir.path().join("populations.csv")).unwrap();
    let total = pops.column("total").unwrap();
    assert!(total.iter().all(|p| (p - 1.0).abs() < 1e-8));

    std::fs::write(dir.path().join("populations.csv"), "t,total\n0,1\n").unwrap();
    assert_eq!(verify_manifest(dir.path()).unwrap(), vec!["populations.csv".to_string()]);
}

#[test]
fn rerun_is_bitwise_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(short_run(a.path()).0, 0);
    assert_eq!(short_run(b.path()).0, 0);
    for f in ["trajectories.csv", "populations.csv", "equivariance.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
}

#[test]
fn effective_scenario_reproduces_hash() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(short_run(dir.path()).0, 0);
    let cfg = qedbohm::config::ScenarioConfig::from_file(dir.path().join("scenario.scn")).unwrap();
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains(&format!("config_hash = {}", cfg.hash())));
}

#[test]
fn plot_renders_svgs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(short_run(dir.path()).0, 0);
    let (code, _, err) = qedbohm(&["plot", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    for f in ["populations.svg", "energies.svg", "equivariance_x1.svg"] {
        let svg = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"), "{f}");
    }
}

#[test]
fn plot_on_empty_directory_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = qedbohm(&["plot", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("missing input"), "{err}");
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let scn = scenario("unmeasured.scn");
    let s = scn.to_str().unwrap();
    assert_eq!(qedbohm(&["run", s, d, "--set", "well_lenght=3"]).0, 1);
    assert_eq!(qedbohm(&["run", s, d, "--set", "dt_coeff=-1"]).0, 1);
    assert_eq!(qedbohm(&["run", "/nonexistent/x.scn", d]).0, 1);
    assert_eq!(qedbohm(&["run"]).0, 1);
    assert_eq!(qedbohm(&["frobnicate"]).0, 1);
}

#[test]
fn positional_overrides_match_set_flags() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scn = scenario("unmeasured.scn");
    let s = scn.to_str().unwrap();
    let extra = ["--coefficients-only"];
    let (c1, o1, _) = qedbohm(&[&["run", s, a.path().to_str().unwrap(), "sim_duration=20"][..], &extra].concat());
    let (c2, o2, _) = qedbohm(
        &[
            &["run", s, "--out", b.path().to_str().unwrap(), "--set", "sim_duration=20"][..],
            &extra,
        ]
        .concat(),
    );
    assert_eq!((c1, c2), (0, 0));
    let hash = |o: &str| o.lines().next().unwrap().to_string();
    assert_eq!(hash(&o1), hash(&o2));
}

#[test]
fn verify_passes_and_catches_injected_fault() {
    let (code, out, _) = qedbohm(&["verify"]);
    assert_eq!(code, 0, "{out}");
    assert!(!out.contains("FAIL"));
    let (code, out, _) = qedbohm(&["verify", "--inject-fault", "coupling-sign"]);
    assert_eq!(code, 2);
    assert!(out.contains("FAIL"));
}

#[test]
fn measured_run_exit_code_tracks_both_pointer_events() {
    let dir = tempfile::tempdir().unwrap();
    let scn = scenario("measured.scn");
    let (code, _, err) = qedbohm(&[
        "run",
        scn.to_str().unwrap(),
        dir.path().to_str().unwrap(),
        "pointer_truncation=4",
        "n_trajectories=60",
    ]);
    let summary = std::fs::read_to_string(dir.path().join("branch_summary.txt")).unwrap();
    let both: usize = summary.lines().find_map(|l| l.strip_prefix("n_both = ")).unwrap().parse().unwrap();
    assert_eq!(code, if both > 0 { 2 } else { 0 }, "{err}");
    assert!(dir.path().join("manifest.txt").exists());
}
