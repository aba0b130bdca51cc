//! `tclsim` command-line entry point.
//!
//! Exit status: 0 success, 1 acceptance failure, 2 usage, 3 scenario,
//! 4 numerical, 5 I/O. Failures print one `error[category]: message` line
//! on stderr.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tclsim::fvm::export::{export_operators, write_density, write_histogram};
use tclsim::fvm::FvmError;
use tclsim::harness::acceptance::{self, AcceptanceOptions};
use tclsim::harness::compare::{build_model, run_mc, run_pde};
use tclsim::harness::export::write_power_csv;
use tclsim::harness::{export_results, load_scenario, parse_scenario, run_comparison, HarnessError, Scenario};
use tclsim::{analytic_limit_cycle, TclParams};

#[derive(Parser)]
#[command(name = "tclsim", version, about = "Monte Carlo and finite volume simulation of TCL populations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo ensemble and write power and histogram files.
    SimulateMc(Common),
    /// Run the finite volume model and write power and density files.
    SimulatePde(Common),
    /// Write A, B0, B1 as coordinate files plus grid.json.
    Assemble(Common),
    /// Run both backends and write the comparison report.
    Compare(Common),
    /// Print the noise-free limit cycle of the scenario parameters.
    Oracle(Common),
    /// Run the acceptance suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Output directory [default: the scenario's output.dir, else "results"].
    #[arg(long, value_name = "DIR", env = "TCLSIM_OUT_DIR")]
    out: Option<PathBuf>,
    /// Monte Carlo master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Finite volume cells per dead-band.
    #[arg(long, value_name = "N")]
    cells: Option<usize>,
    /// Worker threads for the Monte Carlo backend [default: all cores].
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Monte Carlo master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads for the Monte Carlo backend [default: all cores].
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

enum Failure {
    Acceptance(String),
    Scenario(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn category(&self) -> (&'static str, u8, &str) {
        match self {
            Failure::Acceptance(m) => ("acceptance", 1, m),
            Failure::Scenario(m) => ("scenario", 3, m),
            Failure::Numerical(m) => ("numerical", 4, m),
            Failure::Io(m) => ("io", 5, m),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Scenario(_)
            | HarnessError::Fvm(FvmError::Alignment { .. } | FvmError::InvalidGrid(_)) => {
                Failure::Scenario(e.to_string())
            }
            HarnessError::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if e.use_stderr() {
                let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
                eprintln!("error[usage]: {first}");
            }
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (cat, code, msg) = f.category();
            eprintln!("error[{cat}]: {msg}");
            ExitCode::from(code)
        }
    }
}

fn scenario_of(c: &Common) -> Result<Scenario, Failure> {
    let base = match &c.scenario {
        Some(p) => load_scenario(p),
        None => parse_scenario(""),
    }
    .map_err(|e| Failure::Scenario(e.to_string()))?;
    base.with(|f| {
        if let Some(s) = c.seed {
            f.mc.seed = s;
        }
        if let Some(n) = c.cells {
            f.fvm.cells_per_band = n;
        }
        if let Some(t) = c.threads {
            f.mc.threads = Some(t as usize);
        }
    })
    .map_err(|e| Failure::Scenario(e.to_string()))
}

fn out_dir(c: &Common, s: &Scenario) -> PathBuf {
    c.out
        .clone()
        .or_else(|| s.file.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn write_json(path: &Path, value: &serde_json::Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Oracle(c) => {
            let s = scenario_of(&c)?;
            let quiet = TclParams { sigma: 0.0, ..*s.params() };
            let lc = analytic_limit_cycle(&quiet).map_err(|e| Failure::Scenario(e.to_string()))?;
            writeln!(out, "t_off_s {:.3}", lc.t_off)?;
            writeln!(out, "t_on_s {:.3}", lc.t_on)?;
            writeln!(out, "period_s {:.3}", lc.period())?;
            writeln!(out, "duty {:.6}", lc.duty_cycle)?;
            writeln!(out, "mean_power_W {:.6}", lc.duty_cycle * quiet.rated_power)?;
        }
        Command::Assemble(c) => {
            let s = scenario_of(&c)?;
            let model = build_model(&s)?;
            let dir = out_dir(&c, &s);
            let files = export_operators(&model, &dir)?;
            writeln!(out, "states {}", model.len())?;
            writeln!(out, "nnz A {} B0 {} B1 {}", model.a.nnz(), model.b0.nnz(), model.b1.nnz())?;
            for f in files {
                writeln!(out, "wrote {}", f.display())?;
            }
        }
        Command::SimulateMc(c) => {
            let s = scenario_of(&c)?;
            let dir = out_dir(&c, &s);
            let model = build_model(&s)?;
            let stationary = model.stationary().map_err(HarnessError::from)?;
            let sim = run_mc(&s, &model, &stationary)?;
            fs::create_dir_all(&dir)?;
            write_power_csv(&dir.join("power_mc.csv"), &sim.power, s.file.mc.units as f64)?;
            for snap in &sim.snapshots {
                let p = dir.join(format!("mc_t{:06}.csv", snap.time.round() as i64));
                write_histogram(&p, &snap.edges, &snap.f0, &snap.f1)?;
            }
            if s.file.mc.record_events {
                let mut text = String::from("time,unit,kind,from,dwell_before,temp\n");
                for e in &sim.events {
                    let _ = writeln!(
                        text,
                        "{:.3},{},{:?},{:?},{:.3},{:.6}",
                        e.time, e.unit, e.kind, e.from, e.dwell_before, e.temp
                    );
                }
                fs::write(dir.join("events_mc.csv"), text)?;
            }
            write_json(
                &dir.join("manifest_mc.json"),
                &serde_json::json!({
                    "format": tclsim::harness::export::RESULTS_FORMAT,
                    "version": env!("CARGO_PKG_VERSION"),
                    "seed": s.file.mc.seed,
                    "units": s.file.mc.units,
                    "signal_checksum": sim.signal_checksum,
                    "signal_clamped": s.signal_clamped,
                    "stats": sim.stats,
                    "scenario": s.to_toml(),
                }),
            )?;
            let last = sim.power.last().expect("at least one sample");
            writeln!(out, "final on_fraction {:.6} power_W {:.6}", last.on_fraction, last.power_w / s.file.mc.units as f64)?;
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::SimulatePde(c) => {
            let s = scenario_of(&c)?;
            let dir = out_dir(&c, &s);
            let model = build_model(&s)?;
            let stationary = model.stationary().map_err(HarnessError::from)?;
            let run = run_pde(&s, &model, &stationary)?;
            fs::create_dir_all(&dir)?;
            write_power_csv(&dir.join("power_pde.csv"), &run.power, 1.0)?;
            for snap in &run.snapshots {
                let p = dir.join(format!("pde_t{:06}.csv", snap.time.round() as i64));
                write_density(&p, &model.grid, snap)?;
            }
            write_json(
                &dir.join("manifest_pde.json"),
                &serde_json::json!({
                    "format": tclsim::harness::export::RESULTS_FORMAT,
                    "version": env!("CARGO_PKG_VERSION"),
                    "states": model.len(),
                    "dx": model.grid.dx,
                    "substeps": run.substeps,
                    "max_mass_drift": run.max_mass_drift,
                    "min_value": run.min_value,
                    "signal_checksum": run.signal_checksum,
                    "signal_clamped": s.signal_clamped,
                    "scenario": s.to_toml(),
                }),
            )?;
            let last = run.power.last().expect("at least one sample");
            writeln!(out, "final on_fraction {:.6} power_W {:.6}", last.on_fraction, last.power_w)?;
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::Compare(c) => {
            let s = scenario_of(&c)?;
            let dir = out_dir(&c, &s);
            let cmp = run_comparison(&s)?;
            export_results(&cmp, &s, &dir)?;
            let r = &cmp.report;
            writeln!(out, "power relative_rmse {:.6} rmse_W {:.6} noise_floor {:.6}", r.power.relative_rmse, r.power.rmse_w, r.power.noise_floor)?;
            writeln!(out, "density max_l1 off {:.6} on {:.6}", r.max_l1[0], r.max_l1[1])?;
            writeln!(out, "mass max_drift {:.3e}", r.mass.max_mass_drift)?;
            writeln!(out, "wrote {}", dir.display())?;
        }
        Command::Verify(v) => {
            let opts = AcceptanceOptions { seed: v.seed, threads: v.threads.map(|t| t as usize) };
            let results = acceptance::run_all(opts)?;
            for r in &results {
                writeln!(out, "{r}")?;
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            writeln!(out, "{} of {} criteria passed", results.len() - failed, results.len())?;
            if failed > 0 {
                return Err(Failure::Acceptance(format!("{failed} of {} criteria failed", results.len())));
            }
        }
    }
    Ok(())
}
