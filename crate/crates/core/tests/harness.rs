use std::fs;

use tclsim::harness::compare::build_report;
use tclsim::harness::{export_results, parse_scenario, run_comparison, Scenario};

fn scenario(extra: &str) -> Scenario {
    parse_scenario(&format!(
        "[mc]\nunits = 2000\nburn_in = 0.0\nstart = \"fvm-stationary\"\nhorizon = 3600.0\n{extra}"
    ))
    .unwrap()
}

#[test]
fn zero_signal_error_sits_at_noise_floor() {
    let s = parse_scenario(
        "[signal]\nkind = \"zero\"\n[mc]\nunits = 10000\nburn_in = 3600.0\nstart = \"fvm-stationary\"\n",
    )
    .unwrap();
    let cmp = run_comparison(&s).unwrap();
    let p = &cmp.report.power;
    assert!((p.noise_floor - 0.00307).abs() < 5e-5, "{}", p.noise_floor);
    assert!(
        p.relative_rmse <= 3.0 * p.noise_floor_relative,
        "{} vs floor {}",
        p.relative_rmse,
        p.noise_floor_relative
    );
}

#[test]
fn pulse_rises_and_relaxes_in_both_backends() {
    let s = scenario("");
    let cmp = run_comparison(&s).unwrap();
    let base_pde = cmp.pde.power[0].power_w;
    let peak_pde = cmp.pde.power.iter().map(|p| p.power_w).fold(0.0, f64::max);
    let peak_t = cmp.pde.power.iter().find(|p| p.power_w == peak_pde).unwrap().time;
    assert!(peak_t > 600.0 && peak_t <= 1260.0, "peak at {peak_t}");
    assert!(peak_pde > 2.0 * base_pde);
    let n = s.file.mc.units as f64;
    let mc_at = |t: f64| cmp.mc.power[t as usize].power_w / n;
    let mc_pulse = (900..1200).map(|t| mc_at(t as f64)).sum::<f64>() / 300.0;
    let mc_before = (0..600).map(|t| mc_at(t as f64)).sum::<f64>() / 600.0;
    assert!(mc_pulse > 2.0 * mc_before, "{mc_before} -> {mc_pulse}");
    assert!(cmp.pde.power.last().unwrap().power_w < 0.5 * peak_pde);
}

#[test]
fn power_error_scales_with_inverse_sqrt_n() {
    // on-fraction noise is correlated over ~1000 s, so pool several seeds
    let pooled = |units: usize| {
        let ms: f64 = (1..=3)
            .map(|seed| {
                let s = parse_scenario(&format!(
                    "[signal]\nkind = \"zero\"\n[mc]\nunits = {units}\nburn_in = 0.0\nstart = \"fvm-stationary\"\nseed = {seed}\n"
                ))
                .unwrap();
                run_comparison(&s).unwrap().report.power.rmse_w.powi(2)
            })
            .sum();
        (ms / 3.0).sqrt()
    };
    let ratio = pooled(2500) / pooled(10_000);
    println!("rmse ratio N=2500/N=10000: {ratio:.3}");
    assert!((1.5..=2.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn reports_are_reproducible_and_thread_invariant() {
    let a = run_comparison(&scenario("threads = 1\n")).unwrap();
    let b = run_comparison(&scenario("threads = 2\n")).unwrap();
    assert_eq!(a.report.power.rmse_w, b.report.power.rmse_w);
    assert_eq!(a.report.densities, b.report.densities);
    assert_eq!(a.mc.power, b.mc.power);
}

#[test]
fn export_layout_and_determinism() {
    let s = scenario("[signal]\nkind = \"pulse-train\"\n");
    let cmp = run_comparison(&s).unwrap();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let files = export_results(&cmp, &s, d1.path()).unwrap();
    export_results(&cmp, &s, d2.path()).unwrap();
    let names: Vec<String> =
        files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for family in ["density_mc_off.csv", "density_mc_on.csv", "density_pde_off.csv", "density_pde_on.csv"] {
        assert!(names.iter().any(|n| n == family), "{family} missing from {names:?}");
    }
    for f in &files {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(f).unwrap(), fs::read(d2.path().join(name)).unwrap(), "{name:?}");
    }
    let power = fs::read_to_string(d1.path().join("power_pde.csv")).unwrap();
    assert!(power.starts_with("time,power_W,on_fraction\n0.000,"));
    let dens = fs::read_to_string(d1.path().join("density_mc_on.csv")).unwrap();
    assert!(dens.starts_with("time,cell_center,density\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d1.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["signal"]["checksum_mc"], manifest["signal"]["checksum_pde"]);
    assert_eq!(manifest["seed"], 1);
    assert!(manifest["scenario"].as_str().unwrap().contains("pulse-train"));
    let again = parse_scenario(manifest["scenario"].as_str().unwrap()).unwrap();
    assert_eq!(again, s);
}

#[test]
fn missing_snapshots_are_noted_not_hidden() {
    let s = scenario("");
    let mut cmp = run_comparison(&s).unwrap();
    cmp.mc.snapshots.clear();
    cmp.pde.snapshots.clear();
    let report =
        build_report(&s, &cmp.model, &cmp.stationary, &cmp.mc, &cmp.pde, 0.0, 0.0).unwrap();
    assert!(report.densities.is_empty());
    assert!(report.notes.iter().any(|n| n.contains("snapshot")));
    cmp.report = report;
    let dir = tempfile::tempdir().unwrap();
    let files = export_results(&cmp, &s, dir.path()).unwrap();
    assert!(files.iter().all(|f| !f.to_string_lossy().contains("density_")));

    let mut partial = run_comparison(&s).unwrap();
    partial.mc.snapshots.pop();
    assert!(build_report(&s, &partial.model, &partial.stationary, &partial.mc, &partial.pde, 0.0, 0.0).is_err());
}
