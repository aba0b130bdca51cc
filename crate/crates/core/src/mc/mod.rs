//! Time-discretized Monte Carlo simulation of a TCL ensemble.
//!
//! Every unit owns a ChaCha8 stream (`stream = unit index`) keyed by the
//! master seed. Each step consumes exactly one standard normal and one
//! uniform from that stream, whether or not the uniform is needed, so a
//! unit's trajectory depends only on its own stream and the broadcast
//! signal. Work is split across threads by unit blocks and reduced in block
//! order with integer counters, which keeps results independent of the
//! worker count.

mod estimators;

pub use estimators::{
    empirical_locked_density, empirical_pdf, EmpiricalDensity, LockedDensityEstimate, LockedGrid,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle::LimitCycle;
use crate::model::{
    diffusion, drift, masked_rate, power_output, thermostat_transition, ActuationSignal, EpsPair,
    HybridState, Mode, ModelError, TclParams,
};

pub type UnitRng = ChaCha8Rng;

const INIT_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const BLOCK: usize = 256;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(
        "{count} unit(s) outside the histogram grid ({lo}, {hi}]; observed range [{min}, {max}], extend the pads"
    )]
    OutOfGrid {
        count: usize,
        lo: f64,
        hi: f64,
        min: f64,
        max: f64,
    },
    #[error("locked density requested but the minimum-dwell feature is disabled")]
    DwellDisabled,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// How units are placed at the start of the burn-in.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Every unit in the same state.
    Fixed(HybridState),
    /// Explicit per-unit states; length must match `n_units`.
    States(Vec<HybridState>),
    /// Uniform random phase along the noise-free limit cycle.
    LimitCycle(LimitCycle),
    /// Draw from per-mode cell densities on `edges`; dwell starts unlocked.
    Histogram {
        edges: Vec<f64>,
        f0: Vec<f64>,
        f1: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// SDE sample period [s].
    pub dt: f64,
    /// Simulated time after burn-in [s].
    pub horizon: f64,
    pub n_units: usize,
    pub master_seed: u64,
    pub dwell_enabled: bool,
    /// `false` builds the unactuated simulator: no rate trials at all.
    pub actuation_enabled: bool,
    /// Unactuated warm-up before `t = 0` [s].
    pub burn_in: f64,
    /// Density snapshot cadence [s]; must be a multiple of `dt`.
    pub snapshot_every: f64,
    pub record_events: bool,
    /// Dwell bins per mode for locked-density snapshots; 0 disables them.
    pub locked_dwell_bins: usize,
    /// Worker threads; `None` uses all available cores.
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            horizon: 7200.0,
            n_units: 10_000,
            master_seed: 1,
            dwell_enabled: false,
            actuation_enabled: true,
            burn_in: 0.0,
            snapshot_every: 60.0,
            record_events: false,
            locked_dwell_bins: 0,
            threads: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= self.dt) {
            return bad(format!("horizon {} must be at least dt {}", self.horizon, self.dt));
        }
        if self.n_units == 0 {
            return bad("n_units must be at least 1".into());
        }
        if self.n_units > u32::MAX as usize {
            return bad("n_units exceeds u32 range".into());
        }
        if !(self.burn_in >= 0.0) {
            return bad(format!("burn_in must be >= 0, got {}", self.burn_in));
        }
        if steps_for(self.snapshot_every, self.dt).is_none() {
            return bad(format!(
                "snapshot_every {} must be a positive multiple of dt {}",
                self.snapshot_every, self.dt
            ));
        }
        if self.locked_dwell_bins > 0 && !self.dwell_enabled {
            return Err(SimError::DwellDisabled);
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn burn_in_steps(&self) -> usize {
        (self.burn_in / self.dt).round() as usize
    }
}

/// Integer step count for `span` if it is a whole multiple of `dt`.
pub(crate) fn steps_for(span: f64, dt: f64) -> Option<usize> {
    if !(span > 0.0) {
        return None;
    }
    let k = (span / dt).round();
    if k < 1.0 || ((k * dt - span).abs() > 1e-9 * span.max(1.0)) {
        None
    } else {
        Some(k as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchKind {
    ThermostatOn,
    ThermostatOff,
    RateOn,
    RateOff,
}

impl SwitchKind {
    pub fn is_rate(self) -> bool {
        matches!(self, SwitchKind::RateOn | SwitchKind::RateOff)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchEvent {
    /// End of the step in which the switch fired [s].
    pub time: f64,
    pub unit: u32,
    pub kind: SwitchKind,
    pub from: Mode,
    /// Dwell clock at the moment of the switch, before the reset.
    pub dwell_before: f64,
    pub temp: f64,
}

/// Event counters over the recorded horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SwitchStats {
    pub thermostat_on: u64,
    pub thermostat_off: u64,
    pub rate_on: u64,
    pub rate_off: u64,
    /// Unit-steps that passed the safe-zone and dwell gates for an off->on trial.
    pub on_trials: u64,
    pub off_trials: u64,
}

impl SwitchStats {
    fn merge(&mut self, o: &SwitchStats) {
        self.thermostat_on += o.thermostat_on;
        self.thermostat_off += o.thermostat_off;
        self.rate_on += o.rate_on;
        self.rate_off += o.rate_off;
        self.on_trials += o.on_trials;
        self.off_trials += o.off_trials;
    }
}

/// Euler-Maruyama update of temperature (mode held fixed) plus the dwell clock.
pub fn em_step(state: &HybridState, params: &TclParams, dt: f64, time: f64, gaussian: f64) -> HybridState {
    let u = drift(params, state.mode, state.temp, time);
    let s = diffusion(params, state.mode, state.temp, time);
    HybridState {
        temp: state.temp + u * dt + s * dt.sqrt() * gaussian,
        mode: state.mode,
        dwell: state.dwell + dt,
    }
}

/// Does this unit pass the safe-zone and dwell gates for a rate switch?
pub fn rate_trial_eligible(state: &HybridState, params: &TclParams, dwell_enabled: bool) -> bool {
    if dwell_enabled && state.dwell < params.min_dwell(state.mode) {
        return false;
    }
    params.in_safe_zone(state.temp, state.mode.exit_direction())
}

/// Bernoulli realization of the rate law with success `1 - exp(-lambda_bar * dt)`.
pub fn rate_switch_trial(
    state: &HybridState,
    eps: EpsPair,
    params: &TclParams,
    dt: f64,
    uniform: f64,
    dwell_enabled: bool,
) -> Result<bool, ModelError> {
    let direction = state.mode.exit_direction();
    let rate = masked_rate(eps.for_direction(direction), state.temp, direction, params)?;
    if dwell_enabled && state.dwell < params.min_dwell(state.mode) {
        return Ok(false);
    }
    Ok(uniform < switch_probability(rate, dt))
}

pub fn switch_probability(rate: f64, dt: f64) -> f64 {
    -(-rate * dt).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub dt: f64,
    pub dwell_enabled: bool,
    pub actuation_enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: HybridState,
    pub switch: Option<SwitchKind>,
    /// Whether a rate trial passed its gates this step.
    pub trial: bool,
    /// Dwell clock right before any reset.
    pub dwell_before: f64,
}

/// One full unit step given explicit draws: EM, thermostat, then (only if the
/// thermostat stayed quiet) the rate trial.
pub fn step_unit_with_draws(
    state: &HybridState,
    params: &TclParams,
    eps: EpsPair,
    opts: StepOptions,
    time: f64,
    gaussian: f64,
    uniform: f64,
) -> StepOutcome {
    let moved = em_step(state, params, opts.dt, time, gaussian);
    let dwell_before = moved.dwell;
    let thermo = thermostat_transition(&moved, params);
    if thermo != moved.mode {
        let kind = match thermo {
            Mode::On => SwitchKind::ThermostatOn,
            Mode::Off => SwitchKind::ThermostatOff,
        };
        return StepOutcome {
            state: HybridState::new(moved.temp, thermo, 0.0),
            switch: Some(kind),
            trial: false,
            dwell_before,
        };
    }
    if !opts.actuation_enabled {
        return StepOutcome { state: moved, switch: None, trial: false, dwell_before };
    }
    let trial = rate_trial_eligible(&moved, params, opts.dwell_enabled);
    // eps was validated when the signal was built
    let fires = trial
        && rate_switch_trial(&moved, eps, params, opts.dt, uniform, opts.dwell_enabled)
            .unwrap_or(false);
    if fires {
        let kind = match moved.mode {
            Mode::Off => SwitchKind::RateOn,
            Mode::On => SwitchKind::RateOff,
        };
        StepOutcome {
            state: HybridState::new(moved.temp, moved.mode.flipped(), 0.0),
            switch: Some(kind),
            trial,
            dwell_before,
        }
    } else {
        StepOutcome { state: moved, switch: None, trial, dwell_before }
    }
}

/// One full unit step drawing from the unit's own stream.
pub fn step_unit<R: Rng + ?Sized>(
    state: &HybridState,
    params: &TclParams,
    eps: EpsPair,
    opts: StepOptions,
    time: f64,
    rng: &mut R,
) -> StepOutcome {
    let gaussian: f64 = rng.sample(StandardNormal);
    let uniform: f64 = rng.random();
    step_unit_with_draws(state, params, eps, opts, time, gaussian, uniform)
}

/// Per-unit stream for the stepping draws.
pub fn unit_stream(master_seed: u64, unit: u64) -> UnitRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(unit);
    rng
}

fn init_stream(master_seed: u64, unit: u64) -> UnitRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ INIT_SALT);
    rng.set_stream(unit);
    rng
}

/// Population power: total watts and the fraction of units on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSample {
    pub time: f64,
    pub power_w: f64,
    pub on_fraction: f64,
}

pub fn aggregate_power(units: &[HybridState], params: &TclParams) -> (f64, f64) {
    let total: f64 = units.iter().map(|u| power_output(u, params)).sum();
    let on = units.iter().filter(|u| u.mode == Mode::On).count();
    (total, on as f64 / units.len().max(1) as f64)
}

/// Result of advancing the ensemble over a run of steps.
#[derive(Debug, Clone, Default)]
pub struct ChunkResult {
    /// Units on after each step.
    pub on_counts: Vec<u64>,
    pub events: Vec<SwitchEvent>,
    pub stats: SwitchStats,
}

/// The simulated population.
#[derive(Debug, Clone)]
pub struct Ensemble {
    units: Vec<HybridState>,
    streams: Vec<UnitRng>,
    unit_seeds: Vec<u64>,
    params: TclParams,
    clock: f64,
}

impl Ensemble {
    pub fn new(
        params: TclParams,
        n_units: usize,
        master_seed: u64,
        initial: &InitialCondition,
        start_time: f64,
    ) -> Result<Self, SimError> {
        params.validate()?;
        let units = initial_states(&params, n_units, master_seed, initial)?;
        let unit_seeds: Vec<u64> = (0..n_units as u64).collect();
        let streams = unit_seeds.iter().map(|&s| unit_stream(master_seed, s)).collect();
        Ok(Self { units, streams, unit_seeds, params, clock: start_time })
    }

    pub fn units(&self) -> &[HybridState] {
        &self.units
    }

    pub fn unit_seeds(&self) -> &[u64] {
        &self.unit_seeds
    }

    pub fn params(&self) -> &TclParams {
        &self.params
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn aggregate_power(&self) -> (f64, f64) {
        aggregate_power(&self.units, &self.params)
    }

    /// Advance all units through `eps.len()` steps; `eps[k]` is held during step k.
    pub fn advance(&mut self, eps: &[EpsPair], opts: StepOptions, record_events: bool) -> ChunkResult {
        let params = self.params;
        let t0 = self.clock;
        let n_steps = eps.len();
        let blocks: Vec<ChunkResult> = self
            .units
            .par_chunks_mut(BLOCK)
            .zip(self.streams.par_chunks_mut(BLOCK))
            .enumerate()
            .map(|(b, (units, streams))| {
                let mut out = ChunkResult { on_counts: vec![0; n_steps], ..Default::default() };
                for (i, (unit, rng)) in units.iter_mut().zip(streams.iter_mut()).enumerate() {
                    let id = (b * BLOCK + i) as u32;
                    for (k, &pair) in eps.iter().enumerate() {
                        let time = t0 + k as f64 * opts.dt;
                        let step = step_unit(unit, &params, pair, opts, time, rng);
                        if step.trial {
                            match unit.mode {
                                Mode::Off => out.stats.on_trials += 1,
                                Mode::On => out.stats.off_trials += 1,
                            }
                        }
                        if let Some(kind) = step.switch {
                            match kind {
                                SwitchKind::ThermostatOn => out.stats.thermostat_on += 1,
                                SwitchKind::ThermostatOff => out.stats.thermostat_off += 1,
                                SwitchKind::RateOn => out.stats.rate_on += 1,
                                SwitchKind::RateOff => out.stats.rate_off += 1,
                            }
                            if record_events {
                                out.events.push(SwitchEvent {
                                    time: time + opts.dt,
                                    unit: id,
                                    kind,
                                    from: unit.mode,
                                    dwell_before: step.dwell_before,
                                    temp: step.state.temp,
                                });
                            }
                        }
                        *unit = step.state;
                        if unit.mode == Mode::On {
                            out.on_counts[k] += 1;
                        }
                    }
                }
                out
            })
            .collect();

        let mut total = ChunkResult { on_counts: vec![0; n_steps], ..Default::default() };
        for block in blocks {
            for (acc, c) in total.on_counts.iter_mut().zip(&block.on_counts) {
                *acc += c;
            }
            total.stats.merge(&block.stats);
            total.events.extend(block.events);
        }
        total
            .events
            .sort_by(|a, b| a.time.total_cmp(&b.time).then(a.unit.cmp(&b.unit)));
        // accumulate from the chunk start so long runs do not drift
        self.clock = t0 + n_steps as f64 * opts.dt;
        total
    }
}

fn initial_states(
    params: &TclParams,
    n: usize,
    seed: u64,
    initial: &InitialCondition,
) -> Result<Vec<HybridState>, SimError> {
    match initial {
        InitialCondition::Fixed(s) => Ok(vec![*s; n]),
        InitialCondition::States(v) => {
            if v.len() != n {
                return Err(SimError::InvalidConfig(format!(
                    "{} explicit initial states for {n} units",
                    v.len()
                )));
            }
            Ok(v.clone())
        }
        InitialCondition::LimitCycle(cycle) => Ok((0..n as u64)
            .map(|i| {
                let mut rng = init_stream(seed, i);
                let phase = rng.random::<f64>() * cycle.period();
                cycle.state_at_phase(params, phase)
            })
            .collect()),
        InitialCondition::Histogram { edges, f0, f1 } => {
            let cells = edges.len().saturating_sub(1);
            if cells == 0 || f0.len() != cells || f1.len() != cells {
                return Err(SimError::InvalidConfig(
                    "histogram initial condition needs one density per cell and mode".into(),
                ));
            }
            // cumulative mass over (mode, cell), off mode first
            let mut cdf = Vec::with_capacity(2 * cells);
            let mut acc = 0.0;
            for f in [f0, f1] {
                for j in 0..cells {
                    acc += f[j].max(0.0) * (edges[j + 1] - edges[j]);
                    cdf.push(acc);
                }
            }
            if !(acc > 0.0) {
                return Err(SimError::InvalidConfig("histogram has no mass".into()));
            }
            let unlocked = params.m0.max(params.m1);
            Ok((0..n as u64)
                .map(|i| {
                    let mut rng = init_stream(seed, i);
                    let target = rng.random::<f64>() * acc;
                    let slot = cdf.partition_point(|&c| c <= target).min(2 * cells - 1);
                    let (mode, j) = (Mode::from_index(slot / cells), slot % cells);
                    let temp = edges[j] + rng.random::<f64>() * (edges[j + 1] - edges[j]);
                    let mut s = HybridState::new(temp, mode, unlocked);
                    // keep the thermostat invariant at the cell edge of the band
                    s.mode = thermostat_transition(&s, params);
                    s
                })
                .collect())
        }
    }
}

/// Output of [`simulate_population`].
#[derive(Debug, Clone)]
pub struct SimOutput {
    /// Power at `t = 0` and after every step.
    pub power: Vec<PowerSample>,
    pub snapshots: Vec<EmpiricalDensity>,
    pub locked: Vec<LockedDensityEstimate>,
    pub events: Vec<SwitchEvent>,
    pub stats: SwitchStats,
    pub final_units: Vec<HybridState>,
    pub signal_checksum: String,
}

/// Run the ensemble: `burn_in` seconds unactuated, then `horizon` seconds
/// under `signal`. Step k of the horizon holds `signal.actuation_at(k * dt)`.
/// Histograms are taken on `edges` every `snapshot_every` seconds, starting at
/// `t = 0`.
pub fn simulate_population(
    config: &SimConfig,
    params: &TclParams,
    signal: &ActuationSignal,
    edges: &[f64],
    initial: &InitialCondition,
) -> Result<SimOutput, SimError> {
    config.validate()?;
    params.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = config.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| SimError::ThreadPool(e.to_string()))?;
    pool.install(|| run(config, params, signal, edges, initial))
}

fn run(
    config: &SimConfig,
    params: &TclParams,
    signal: &ActuationSignal,
    edges: &[f64],
    initial: &InitialCondition,
) -> Result<SimOutput, SimError> {
    let opts = StepOptions {
        dt: config.dt,
        dwell_enabled: config.dwell_enabled,
        actuation_enabled: config.actuation_enabled,
    };
    let burn = config.burn_in_steps();
    let mut ens = Ensemble::new(
        *params,
        config.n_units,
        config.master_seed,
        initial,
        -(burn as f64) * config.dt,
    )?;
    // chunked to bound the per-block count buffers
    let mut left = burn;
    while left > 0 {
        let k = left.min(4096);
        ens.advance(&vec![EpsPair::ZERO; k], opts, false);
        left -= k;
    }
    ens.clock = 0.0;

    let locked_grid = if config.locked_dwell_bins > 0 {
        Some(LockedGrid::new(edges.to_vec(), params, config.locked_dwell_bins)?)
    } else {
        None
    };
    let snap_steps = steps_for(config.snapshot_every, config.dt).expect("validated");
    let n_steps = config.steps();
    let n = config.n_units as f64;

    let mut out = SimOutput {
        power: Vec::with_capacity(n_steps + 1),
        snapshots: Vec::new(),
        locked: Vec::new(),
        events: Vec::new(),
        stats: SwitchStats::default(),
        final_units: Vec::new(),
        signal_checksum: signal.checksum(),
    };
    let (p0, f0) = ens.aggregate_power();
    out.power.push(PowerSample { time: 0.0, power_w: p0, on_fraction: f0 });
    let take_snapshot = |ens: &Ensemble, out: &mut SimOutput| -> Result<(), SimError> {
        let mut d = empirical_pdf(ens.units(), edges)?;
        d.time = ens.clock();
        out.snapshots.push(d);
        if let Some(g) = &locked_grid {
            let mut l = empirical_locked_density(ens.units(), g, params)?;
            l.time = ens.clock();
            out.locked.push(l);
        }
        Ok(())
    };
    take_snapshot(&ens, &mut out)?;

    let mut done = 0;
    while done < n_steps {
        let k = snap_steps.min(n_steps - done);
        let eps: Vec<EpsPair> = (done..done + k)
            .map(|s| signal.actuation_at(s as f64 * config.dt))
            .collect();
        let chunk = ens.advance(&eps, opts, config.record_events);
        for (i, &c) in chunk.on_counts.iter().enumerate() {
            out.power.push(PowerSample {
                time: (done + i + 1) as f64 * config.dt,
                power_w: c as f64 * params.rated_power,
                on_fraction: c as f64 / n,
            });
        }
        out.stats.merge(&chunk.stats);
        out.events.extend(chunk.events);
        done += k;
        ens.clock = done as f64 * config.dt;
        if k == snap_steps {
            take_snapshot(&ens, &mut out)?;
        }
    }
    out.final_units = ens.units;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: TclParams = TclParams::refrigerator();

    fn opts() -> StepOptions {
        StepOptions { dt: 1.0, dwell_enabled: false, actuation_enabled: true }
    }

    #[test]
    fn em_step_examples() {
        let quiet = TclParams { sigma: 0.0, ..P };
        let t_eq = -P.b0 / P.a;
        let s = em_step(&HybridState::new(t_eq, Mode::Off, 0.0), &quiet, 7.0, 0.0, 1.3);
        assert!((s.temp - t_eq).abs() < 1e-12);
        assert_eq!(s.dwell, 7.0);

        let s = em_step(&HybridState::new(5.0, Mode::On, 0.0), &P, 1.0, 0.0, 0.0);
        assert!((s.temp - (5.0 - 2.676235e-3)).abs() < 1e-15);

        let s = em_step(&HybridState::new(3.0, Mode::Off, 2.0), &P, 1.0, 0.0, 2.0);
        let expect = 3.0 + (P.a * 3.0 + P.b0) + 0.013;
        assert!((s.temp - expect).abs() < 1e-15);
        assert_eq!(s.dwell, 3.0);
    }

    #[test]
    fn rate_trial_examples() {
        let s = HybridState::new(3.5, Mode::Off, 1000.0);
        for u in [0.0, 0.5, 1e-12] {
            assert!(!rate_switch_trial(&s, EpsPair::ZERO, &P, 1.0, u, false).unwrap());
        }
        let p = switch_probability(0.01, 1.0);
        assert!((p - 0.00995017).abs() < 1e-8);
        let eps = EpsPair::new(0.0, 0.01);
        assert!(rate_switch_trial(&s, eps, &P, 1.0, p * 0.999, false).unwrap());
        assert!(!rate_switch_trial(&s, eps, &P, 1.0, p * 1.001, false).unwrap());
        // unsafe zone just above t_min
        let cold = HybridState::new(2.2, Mode::Off, 1000.0);
        assert!(!rate_switch_trial(&cold, EpsPair::new(1.0, 1.0), &P, 1.0, 0.0, false).unwrap());
        // locked by dwell
        let fresh = HybridState::new(3.5, Mode::Off, 10.0);
        assert!(!rate_switch_trial(&fresh, eps, &P, 1.0, 0.0, true).unwrap());
        assert!(rate_switch_trial(&fresh, eps, &P, 1.0, 0.0, false).unwrap());
        // rate relevant to the mode only
        let on = HybridState::new(3.5, Mode::On, 1000.0);
        assert!(!rate_switch_trial(&on, eps, &P, 1.0, 0.0, false).unwrap());
    }

    #[test]
    fn step_unit_examples() {
        let quiet = TclParams { sigma: 0.0, ..P };
        let s = HybridState::new(3.0, Mode::Off, 5.0);
        let out = step_unit_with_draws(&s, &quiet, EpsPair::ZERO, opts(), 0.0, 0.7, 0.0);
        assert_eq!(out.state.mode, Mode::Off);
        assert!((out.state.temp - (3.0 + P.a * 3.0 + P.b0)).abs() < 1e-15);

        let near = HybridState::new(4.9999, Mode::Off, 5.0);
        let out = step_unit_with_draws(&near, &quiet, EpsPair::ZERO, opts(), 0.0, 0.0, 0.9);
        assert_eq!(out.state.mode, Mode::On);
        assert_eq!(out.state.dwell, 0.0);
        assert_eq!(out.switch, Some(SwitchKind::ThermostatOn));

        let out = step_unit_with_draws(&s, &quiet, EpsPair::new(0.0, 0.05), opts(), 0.0, 0.0, 0.0);
        assert_eq!(out.state.mode, Mode::On);
        assert_eq!(out.state.dwell, 0.0);
        assert_eq!(out.switch, Some(SwitchKind::RateOn));
    }

    #[test]
    fn thermostat_wins_over_rate_trial() {
        let s = HybridState::new(4.9999, Mode::Off, 500.0);
        let out = step_unit_with_draws(&s, &P, EpsPair::new(5.0, 5.0), opts(), 0.0, 0.0, 0.0);
        assert_eq!(out.switch, Some(SwitchKind::ThermostatOn));
        assert!(!out.trial);
    }

    #[test]
    fn aggregate_power_examples() {
        let off = vec![HybridState::new(3.0, Mode::Off, 0.0); 10_000];
        assert_eq!(aggregate_power(&off, &P), (0.0, 0.0));
        let on = vec![HybridState::new(3.0, Mode::On, 0.0); 10_000];
        assert_eq!(aggregate_power(&on, &P), (1e6, 1.0));
        let mut half = off.clone();
        half[..5000].copy_from_slice(&on[..5000]);
        assert_eq!(aggregate_power(&half, &P), (5e5, 0.5));
    }

    #[test]
    fn single_unit_first_switch_on() {
        let quiet = TclParams { sigma: 0.0, ..P };
        let cfg = SimConfig {
            n_units: 1,
            horizon: 10_000.0,
            record_events: true,
            ..Default::default()
        };
        let signal = ActuationSignal::constant(60.0, EpsPair::ZERO, 1).unwrap();
        let init = InitialCondition::Fixed(HybridState::new(2.0, Mode::Off, 0.0));
        let out = simulate_population(&cfg, &quiet, &signal, &[0.0, 10.0], &init).unwrap();
        let first = out.events[0];
        assert_eq!(first.kind, SwitchKind::ThermostatOn);
        // closed form 9615.4 s, detected at the next sample instant
        assert_eq!(first.time, 9616.0);
    }

    #[test]
    fn determinism_and_thread_invariance() {
        let cfg = SimConfig {
            n_units: 700,
            horizon: 600.0,
            burn_in: 120.0,
            master_seed: 42,
            record_events: true,
            threads: Some(1),
            ..Default::default()
        };
        let cycle = crate::cycle::analytic_limit_cycle(&P).unwrap();
        let signal = ActuationSignal::constant(60.0, EpsPair::new(0.01, 0.01), 10).unwrap();
        let edges: Vec<f64> = (0..=80).map(|i| 1.0 + 0.075 * i as f64).collect();
        let init = InitialCondition::LimitCycle(cycle);
        let a = simulate_population(&cfg, &P, &signal, &edges, &init).unwrap();
        let b = simulate_population(&cfg, &P, &signal, &edges, &init).unwrap();
        let c = simulate_population(&SimConfig { threads: Some(3), ..cfg.clone() }, &P, &signal, &edges, &init)
            .unwrap();
        for other in [&b, &c] {
            assert_eq!(a.power, other.power);
            assert_eq!(a.final_units, other.final_units);
            assert_eq!(a.events, other.events);
            assert_eq!(a.stats, other.stats);
            assert_eq!(a.snapshots, other.snapshots);
        }
        assert!(a.stats.rate_on > 0 && a.stats.rate_off > 0);
        let d = simulate_population(&SimConfig { master_seed: 43, ..cfg }, &P, &signal, &edges, &init)
            .unwrap();
        assert_ne!(a.final_units, d.final_units);
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SimConfig { dt: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { horizon: 0.5, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { n_units: 0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { snapshot_every: 1.5, ..ok.clone() }.validate().is_err());
        assert!(matches!(
            SimConfig { locked_dwell_bins: 10, ..ok }.validate(),
            Err(SimError::DwellDisabled)
        ));
    }

    #[test]
    fn histogram_initial_condition_respects_masses() {
        let edges = vec![1.0, 2.0, 3.0, 4.0];
        let init = InitialCondition::Histogram {
            edges,
            f0: vec![0.0, 0.25, 0.0],
            f1: vec![0.0, 0.0, 0.75],
        };
        let ens = Ensemble::new(P, 4000, 3, &init, 0.0).unwrap();
        let on = ens.units().iter().filter(|u| u.mode == Mode::On).count() as f64 / 4000.0;
        assert!((on - 0.75).abs() < 0.03, "{on}");
        assert!(ens.units().iter().all(|u| match u.mode {
            Mode::Off => (2.0..3.0).contains(&u.temp),
            Mode::On => (3.0..4.0).contains(&u.temp),
        }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn containment_after_every_step(
            temp in 1.5f64..5.5,
            on in any::<bool>(),
            dwell in 0.0f64..600.0,
            g in -4.0f64..4.0,
            u in 0.0f64..1.0,
            e0 in 0.0f64..0.5,
            e1 in 0.0f64..0.5,
            dwell_enabled in any::<bool>(),
        ) {
            let mode = if on { Mode::On } else { Mode::Off };
            let s = HybridState::new(temp, mode, dwell);
            let o = StepOptions { dt: 1.0, dwell_enabled, actuation_enabled: true };
            let out = step_unit_with_draws(&s, &P, EpsPair::new(e0, e1), o, 0.0, g, u);
            prop_assert!(out.state.is_contained(&P));
            prop_assert!(out.state.dwell >= 0.0);
            if let Some(kind) = out.switch {
                prop_assert_eq!(out.state.dwell, 0.0);
                if kind.is_rate() && dwell_enabled {
                    prop_assert!(out.dwell_before >= P.min_dwell(mode));
                }
            }
        }

        #[test]
        fn zero_eps_matches_unactuated(temp in 1.5f64..5.5, on in any::<bool>(), g in -4.0f64..4.0, u in 0.0f64..1.0) {
            let mode = if on { Mode::On } else { Mode::Off };
            let s = HybridState::new(temp, mode, 400.0);
            let act = step_unit_with_draws(&s, &P, EpsPair::ZERO, opts(), 0.0, g, u);
            let off = StepOptions { actuation_enabled: false, ..opts() };
            let un = step_unit_with_draws(&s, &P, EpsPair::ZERO, off, 0.0, g, u);
            prop_assert_eq!(act.state, un.state);
            prop_assert_eq!(act.switch, un.switch);
        }
    }
}
