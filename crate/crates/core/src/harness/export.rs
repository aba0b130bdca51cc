//! Result files.
//!
//! | file | columns |
//! |------|---------|
//! | `power_mc.csv`, `power_pde.csv` | `time,power_W,on_fraction` |
//! | `density_{mc,pde}_{off,on}.csv` | `time,cell_center,density` |
//! | `report.json` | comparison summary |
//! | `manifest.json` | versions, seed, scenario echo, signal checksums |
//!
//! Power is population-normalized (W per unit). Times in s with 3 decimals,
//! power with 6, fractions with 8; densities [1/K] in 9-digit scientific form.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::compare::Comparison;
use super::scenario::Scenario;
use crate::mc::PowerSample;

pub const RESULTS_FORMAT: &str = "tclsim-results/1";

/// One density family: per-snapshot values on shared cell centers.
pub struct DensitySeries<'a> {
    pub name: &'a str,
    pub edges: &'a [f64],
    pub frames: Vec<(f64, &'a [f64])>,
}

fn create(path: &Path) -> io::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn write_power_csv(path: &Path, series: &[PowerSample], per_unit: f64) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "time,power_W,on_fraction")?;
    for s in series {
        writeln!(w, "{:.3},{:.6},{:.8}", s.time, s.power_w / per_unit, s.on_fraction)?;
    }
    w.flush()
}

pub fn write_density_csv(path: &Path, series: &DensitySeries) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "time,cell_center,density")?;
    for (t, values) in &series.frames {
        for (k, v) in values.iter().enumerate() {
            let c = 0.5 * (series.edges[k] + series.edges[k + 1]);
            writeln!(w, "{t:.3},{c:.6},{v:.9e}")?;
        }
    }
    w.flush()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

#[derive(Serialize)]
struct SignalInfo<'a> {
    period: f64,
    samples: usize,
    clamped: bool,
    checksum_mc: &'a str,
    checksum_pde: &'a str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    tool: &'static str,
    version: &'static str,
    seed: u64,
    units: usize,
    fvm_states: usize,
    signal: SignalInfo<'a>,
    scenario: String,
    files: Vec<String>,
}

/// Write every result file of `cmp` into `dir`. Identical inputs give
/// identical bytes.
pub fn export_results(cmp: &Comparison, scenario: &Scenario, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let n = cmp.report.units as f64;

    let p = dir.join("power_mc.csv");
    write_power_csv(&p, &cmp.mc.power, n)?;
    files.push(p);
    let p = dir.join("power_pde.csv");
    write_power_csv(&p, &cmp.pde.power, 1.0)?;
    files.push(p);

    if !cmp.mc.snapshots.is_empty() {
        let grid = &cmp.model.grid;
        let edges = grid.full_edges();
        let pde_full: Vec<(f64, [Vec<f64>; 2])> =
            cmp.pde.snapshots.iter().map(|s| (s.time, grid.to_full_axis(&s.values))).collect();
        for (m, mode) in ["off", "on"].iter().enumerate() {
            let mc = DensitySeries {
                name: "mc",
                edges: &cmp.mc.snapshots[0].edges,
                frames: cmp
                    .mc
                    .snapshots
                    .iter()
                    .map(|s| (s.time, if m == 0 { &s.f0[..] } else { &s.f1[..] }))
                    .collect(),
            };
            let pde = DensitySeries {
                name: "pde",
                edges: &edges,
                frames: pde_full.iter().map(|(t, f)| (*t, &f[m][..])).collect(),
            };
            for s in [mc, pde] {
                let p = dir.join(format!("density_{}_{mode}.csv", s.name));
                write_density_csv(&p, &s)?;
                files.push(p);
            }
        }
    }

    let p = dir.join("report.json");
    write_json(&p, &cmp.report)?;
    files.push(p);

    let p = dir.join("manifest.json");
    let mut names: Vec<String> = files
        .iter()
        .filter_map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    names.push("manifest.json".into());
    let manifest = Manifest {
        format: RESULTS_FORMAT,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: cmp.report.seed,
        units: cmp.report.units,
        fvm_states: cmp.model.grid.len(),
        signal: SignalInfo {
            period: scenario.signal.period(),
            samples: scenario.signal.samples().len(),
            clamped: scenario.signal_clamped,
            checksum_mc: &cmp.mc.signal_checksum,
            checksum_pde: &cmp.pde.signal_checksum,
        },
        scenario: scenario.to_toml(),
        files: names,
    };
    write_json(&p, &manifest)?;
    files.push(p);
    Ok(files)
}
