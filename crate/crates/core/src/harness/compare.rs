//! Co-simulation of both backends on one scenario.

use std::time::Instant;

use serde::Serialize;

use super::metrics::{binomial_std_error, coarsen_edges, l1_distance, mean, rebin, rmse};
use super::scenario::{McStart, Scenario};
use super::HarnessError;
use crate::cycle::analytic_limit_cycle;
use crate::fvm::{build_grid, max_column_sum, power_from_state, BilinearModel, PdeTrajectory, PdfState};
use crate::mc::{simulate_population, InitialCondition, SimOutput};
use crate::model::{Mode, TclParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerMetrics {
    /// Samples on the broadcast grid, including `t = 0`.
    pub samples: usize,
    pub rmse_w: f64,
    /// `rmse_w` over the mean Monte Carlo power.
    pub relative_rmse: f64,
    pub mean_mc_w: f64,
    pub mean_pde_w: f64,
    /// Stationary on-fraction `p` of the finite volume model.
    pub stationary_on_fraction: f64,
    /// `sqrt(p (1-p) / N)`, absolute on-fraction.
    pub noise_floor: f64,
    /// Noise floor over `p`.
    pub noise_floor_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotDistance {
    pub time: f64,
    /// L1 per mode (off, on) on the comparison bins.
    pub l1: [f64; 2],
    /// L1 per mode on the finite volume cells.
    pub l1_native: [f64; 2],
    pub mc_mass: [f64; 2],
    pub pde_mass: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassAudit {
    pub max_mass_drift: f64,
    pub min_density: f64,
    /// `max |column sum| / column magnitude` of `A`.
    pub column_sum_a: f64,
    pub column_sum_b0: f64,
    pub column_sum_b1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub t_off: f64,
    pub t_on: f64,
    pub duty_cycle: f64,
    pub duty_power_w: f64,
    pub pde_stationary_power_w: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Runtime {
    pub mc_seconds: f64,
    pub pde_seconds: f64,
    pub unit_steps: u64,
    pub fvm_substeps: usize,
    pub fvm_states: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub seed: u64,
    pub units: usize,
    pub signal_checksum: String,
    pub signal_clamped: bool,
    pub power: PowerMetrics,
    pub densities: Vec<SnapshotDistance>,
    /// Largest per-mode L1 over all snapshots (comparison bins).
    pub max_l1: [f64; 2],
    pub max_l1_native: [f64; 2],
    pub comparison_bin_width: f64,
    pub mass: MassAudit,
    pub oracle: Option<OracleCheck>,
    pub runtime: Runtime,
    pub notes: Vec<String>,
}

/// Report plus the raw backend outputs it was computed from.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: ComparisonReport,
    pub mc: SimOutput,
    pub pde: PdeTrajectory,
    pub model: BilinearModel,
    pub stationary: PdfState,
}

pub fn build_model(scenario: &Scenario) -> Result<BilinearModel, HarnessError> {
    let f = &scenario.file.fvm;
    let grid = build_grid(scenario.params(), f.left_pad, f.right_pad, f.cells_per_band)?;
    let mut model = BilinearModel::assemble(&grid, scenario.params())?;
    model.integrator.safety = f.substep_safety;
    Ok(model)
}

pub fn mc_initial(
    scenario: &Scenario,
    model: &BilinearModel,
    stationary: &PdfState,
) -> Result<InitialCondition, HarnessError> {
    Ok(match scenario.file.mc.start {
        McStart::LimitCycle => {
            let quiet = TclParams { sigma: 0.0, ..*scenario.params() };
            InitialCondition::LimitCycle(analytic_limit_cycle(&quiet)?)
        }
        McStart::FvmStationary => {
            let [f0, f1] = model.grid.to_full_axis(&stationary.values);
            InitialCondition::Histogram {
                edges: model.grid.full_edges(),
                f0: f0.into_iter().map(|v| v.max(0.0)).collect(),
                f1: f1.into_iter().map(|v| v.max(0.0)).collect(),
            }
        }
    })
}

pub fn run_mc(
    scenario: &Scenario,
    model: &BilinearModel,
    stationary: &PdfState,
) -> Result<SimOutput, HarnessError> {
    let initial = mc_initial(scenario, model, stationary)?;
    Ok(simulate_population(
        &scenario.sim_config(),
        scenario.params(),
        &scenario.signal,
        &model.grid.full_edges(),
        &initial,
    )?)
}

pub fn run_pde(
    scenario: &Scenario,
    model: &BilinearModel,
    stationary: &PdfState,
) -> Result<PdeTrajectory, HarnessError> {
    let mc = &scenario.file.mc;
    Ok(model.simulate(stationary, &scenario.signal, mc.horizon, mc.snapshot_every)?)
}

fn oracle_check(scenario: &Scenario, pde_power: f64) -> Option<OracleCheck> {
    let p = scenario.params();
    let quiet = TclParams { sigma: 0.0, ..*p };
    let lc = analytic_limit_cycle(&quiet).ok()?;
    let duty_power = lc.duty_cycle * p.rated_power;
    Some(OracleCheck {
        t_off: lc.t_off,
        t_on: lc.t_on,
        duty_cycle: lc.duty_cycle,
        duty_power_w: duty_power,
        pde_stationary_power_w: pde_power,
        relative_gap: (pde_power - duty_power).abs() / duty_power,
    })
}

/// Run both backends from the stationary state, align them on the broadcast
/// grid and compute the report.
pub fn run_comparison(scenario: &Scenario) -> Result<Comparison, HarnessError> {
    let model = build_model(scenario)?;
    let stationary = model.stationary()?;
    let ((mc, mc_seconds), (pde, pde_seconds)) = rayon::join(
        || {
            let t = Instant::now();
            (run_mc(scenario, &model, &stationary), t.elapsed().as_secs_f64())
        },
        || {
            let t = Instant::now();
            (run_pde(scenario, &model, &stationary), t.elapsed().as_secs_f64())
        },
    );
    let (mc, pde) = (mc?, pde?);
    if mc.signal_checksum != pde.signal_checksum {
        return Err(HarnessError::Incomplete("backends saw different signals".into()));
    }
    let report = build_report(scenario, &model, &stationary, &mc, &pde, mc_seconds, pde_seconds)?;
    Ok(Comparison { report, mc, pde, model, stationary })
}

pub fn build_report(
    scenario: &Scenario,
    model: &BilinearModel,
    stationary: &PdfState,
    mc: &SimOutput,
    pde: &PdeTrajectory,
    mc_seconds: f64,
    pde_seconds: f64,
) -> Result<ComparisonReport, HarnessError> {
    let cfg = scenario.sim_config();
    let period = scenario.signal.period();
    let stride = (period / cfg.dt).round() as usize;
    let mut mc_w = Vec::with_capacity(pde.power.len());
    for s in &pde.power {
        let k = (s.time / period).round() as usize * stride;
        let m = mc.power.get(k).ok_or_else(|| {
            HarnessError::Incomplete(format!("Monte Carlo series ends before t = {}", s.time))
        })?;
        if (m.time - s.time).abs() > 1e-6 {
            return Err(HarnessError::Incomplete(format!(
                "power samples misaligned: {} vs {}",
                m.time, s.time
            )));
        }
        mc_w.push(m.power_w / cfg.n_units as f64);
    }
    let pde_w: Vec<f64> = pde.power.iter().map(|s| s.power_w).collect();
    let p = stationary.mode_mass(&model.grid, Mode::On);
    let err = rmse(&mc_w, &pde_w);
    let mean_mc = mean(&mc_w);
    let floor = binomial_std_error(p, cfg.n_units);
    let power = PowerMetrics {
        samples: mc_w.len(),
        rmse_w: err,
        relative_rmse: if mean_mc > 0.0 { err / mean_mc } else { f64::INFINITY },
        mean_mc_w: mean_mc,
        mean_pde_w: mean(&pde_w),
        stationary_on_fraction: p,
        noise_floor: floor,
        noise_floor_relative: if p > 0.0 { floor / p } else { f64::INFINITY },
    };

    if mc.snapshots.len() != pde.snapshots.len() {
        return Err(HarnessError::Incomplete(format!(
            "{} Monte Carlo snapshots vs {} finite volume snapshots",
            mc.snapshots.len(),
            pde.snapshots.len()
        )));
    }
    let grid = &model.grid;
    let edges = grid.full_edges();
    let coarse = coarsen_edges(&edges, scenario.file.compare.density_bin_factor);
    let mut densities = Vec::with_capacity(mc.snapshots.len());
    for (h, f) in mc.snapshots.iter().zip(&pde.snapshots) {
        if (h.time - f.time).abs() > 1e-6 {
            return Err(HarnessError::Incomplete(format!(
                "snapshot times differ: {} vs {}",
                h.time, f.time
            )));
        }
        let fv = grid.to_full_axis(&f.values);
        let mut d = SnapshotDistance {
            time: h.time,
            l1: [0.0; 2],
            l1_native: [0.0; 2],
            mc_mass: [h.mode_mass(Mode::Off), h.mode_mass(Mode::On)],
            pde_mass: [f.mode_mass(grid, Mode::Off), f.mode_mass(grid, Mode::On)],
        };
        for (m, (hm, fm)) in [(&h.f0, &fv[0]), (&h.f1, &fv[1])].into_iter().enumerate() {
            let hb = rebin(&h.edges, hm, &edges);
            d.l1_native[m] = l1_distance(&edges, &hb, fm);
            d.l1[m] = l1_distance(&coarse, &rebin(&edges, &hb, &coarse), &rebin(&edges, fm, &coarse));
        }
        densities.push(d);
    }
    let fold = |pick: fn(&SnapshotDistance) -> [f64; 2]| {
        densities.iter().map(pick).fold([0.0f64; 2], |a, b| [a[0].max(b[0]), a[1].max(b[1])])
    };
    let max_l1 = fold(|d| d.l1);
    let max_l1_native = fold(|d| d.l1_native);

    let mut notes = Vec::new();
    if densities.is_empty() {
        notes.push("no density snapshots were taken".to_string());
    }
    if scenario.signal_clamped {
        notes.push("signal shorter than the horizon; last sample held".to_string());
    }
    let mass = MassAudit {
        max_mass_drift: pde.max_mass_drift,
        min_density: pde.min_value,
        column_sum_a: max_column_sum(&model.a, true),
        column_sum_b0: max_column_sum(&model.b0, false),
        column_sum_b1: max_column_sum(&model.b1, false),
    };
    Ok(ComparisonReport {
        scenario: scenario.name().to_string(),
        seed: cfg.master_seed,
        units: cfg.n_units,
        signal_checksum: mc.signal_checksum.clone(),
        signal_clamped: scenario.signal_clamped,
        power,
        densities,
        max_l1,
        max_l1_native,
        comparison_bin_width: grid.dx * scenario.file.compare.density_bin_factor as f64,
        mass,
        oracle: oracle_check(scenario, power_from_state(stationary, grid, scenario.params())),
        runtime: Runtime {
            mc_seconds,
            pde_seconds,
            unit_steps: (cfg.n_units as u64) * ((cfg.burn_in_steps() + cfg.steps()) as u64),
            fvm_substeps: pde.substeps,
            fvm_states: grid.len(),
        },
        notes,
    })
}
