use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tclsim::harness::{load_scenario, parse_scenario};

fn tclsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tclsim"))
        .args(args)
        .env_remove("TCLSIM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_scenario(dir: &Path) -> String {
    let p = dir.join("small.cfg");
    fs::write(
        &p,
        "[mc]\nunits = 500\nburn_in = 0.0\nhorizon = 1200.0\nstart = \"fvm-stationary\"\n[fvm]\ncells_per_band = 60\n",
    )
    .unwrap();
    p.to_string_lossy().into_owned()
}

fn scenarios_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn oracle_prints_limit_cycle() {
    let o = tclsim(&["oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap_or_else(|| panic!("{key} missing in {text}"))
            .trim()
            .parse()
            .unwrap()
    };
    assert!((value("t_off_s") - 9615.0).abs() < 1.0);
    assert!((value("t_on_s") - 1131.0).abs() < 1.0);
    assert!((value("duty") - 0.105).abs() < 5e-4);
}

#[test]
fn assemble_writes_operators() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ops");
    let fridge = scenarios_dir().join("fridge.cfg");
    let o = tclsim(&["assemble", "--scenario", fridge.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["A.csv", "B0.csv", "B1.csv", "grid.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let grid: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("grid.json")).unwrap()).unwrap();
    let n = grid["states"].as_u64().unwrap() as usize;
    let a = tclsim::fvm::export::read_coo(&out.join("A.csv"), n).unwrap();
    let sums = tclsim::fvm::max_column_sum(&a, true);
    assert!(sums < 1e-12, "{sums}");
}

#[test]
fn compare_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small_scenario(dir.path());
    let out = dir.path().join("cmp");
    let o = tclsim(&["compare", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["densities"].as_array().unwrap().len(), 21);
    assert!(report["power"]["noise_floor"].as_f64().unwrap() > 0.0);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn seed_determines_mc_output() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small_scenario(dir.path());
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate-mc", "--scenario", sc.as_str(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = tclsim(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("power_mc.csv")).unwrap()
    };
    let a = run("a", &["--seed", "5", "--threads", "1"]);
    let b = run("b", &["--seed", "5", "--threads", "3"]);
    let c = run("c", &["--seed", "6"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(dir.path().join("a/mc_t001200.csv").exists());
    let hist = fs::read_to_string(dir.path().join("a/mc_t000000.csv")).unwrap();
    assert!(hist.starts_with("cell_center,f0,f1\n"));
}

#[test]
fn simulate_pde_uses_histogram_layout() {
    let dir = tempfile::tempdir().unwrap();
    let sc = small_scenario(dir.path());
    let out = dir.path().join("pde");
    let o = tclsim(&["simulate-pde", "--scenario", &sc, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let hist = fs::read_to_string(out.join("pde_t000060.csv")).unwrap();
    assert!(hist.starts_with("cell_center,f0,f1\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest_pde.json")).unwrap()).unwrap();
    assert!(manifest["max_mass_drift"].as_f64().unwrap() < 1e-12);
}

#[test]
fn env_var_sets_default_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_tclsim"))
        .args(["assemble", "--cells", "30"])
        .env("TCLSIM_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("grid.json").exists());
}

#[test]
fn error_categories_and_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "[params]\nt_min = 6.0\n").unwrap();
    let o = tclsim(&["oracle", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).lines().any(|l| l.starts_with("error[scenario]: params.t_min")), "{}", stderr(&o));

    let o = tclsim(&["oracle", "--scenario", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    let o = tclsim(&["assemble", "--cells", "100"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("try 102"), "{}", stderr(&o));

    let o = tclsim(&["oracle", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).lines().any(|l| l.starts_with("error[usage]")));

    let o = tclsim(&[]);
    assert_eq!(o.status.code(), Some(2));
    let o = tclsim(&["simulate-mc", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_subcommand_documents_its_flags() {
    for cmd in ["simulate-mc", "simulate-pde", "assemble", "compare", "oracle"] {
        let o = tclsim(&[cmd, "--help"]);
        assert!(o.status.success());
        let text = stdout(&o);
        for flag in ["--scenario", "--out", "--seed", "--cells", "--threads", "--help"] {
            assert!(text.contains(flag), "{cmd} help lacks {flag}");
        }
    }
    let text = stdout(&tclsim(&["verify", "--help"]));
    assert!(text.contains("--seed") && text.contains("--threads"));
}

#[test]
fn shipped_scenarios_load() {
    let defaults = parse_scenario("").unwrap();
    let fridge = load_scenario(&scenarios_dir().join("fridge.cfg")).unwrap();
    assert_eq!(fridge.file.params, defaults.file.params);
    assert_eq!(fridge.file.signal, defaults.file.signal);
    assert_eq!(fridge.file.mc, defaults.file.mc);
    assert_eq!(fridge.file.fvm, defaults.file.fvm);
    assert_eq!(fridge.file.compare, defaults.file.compare);
    for f in ["zero.cfg", "pulse-train.cfg"] {
        load_scenario(&scenarios_dir().join(f)).unwrap();
    }
}
