//! Scenario files: TOML tables `[params]`, `[signal]`, `[mc]`, `[fvm]`,
//! `[compare]` and `[output]`, every field optional. See
//! `scenarios/fridge.cfg` for the full schema with defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mc::SimConfig;
use crate::model::{ActuationSignal, EpsPair, ModelError, SwitchDirection, TclParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), reason: reason.into() }
}

/// Test broadcast signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    /// `eps = (0, 0)` throughout.
    Zero {
        #[serde(default = "default_period")]
        period: f64,
    },
    /// One rectangular pulse on the rate of `direction`.
    Pulse {
        #[serde(default = "default_period")]
        period: f64,
        #[serde(default = "default_direction")]
        direction: SwitchDirection,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_start")]
        start: f64,
        #[serde(default = "default_width")]
        duration: f64,
    },
    /// `count` pulses of `width` seconds every `spacing` seconds, alternating
    /// on-rate and off-rate, beginning with the on-rate.
    PulseTrain {
        #[serde(default = "default_period")]
        period: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_start")]
        start: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_spacing")]
        spacing: f64,
        #[serde(default = "default_count")]
        count: usize,
    },
    /// Sample-by-sample values; shorter lists are held at their last value.
    Explicit {
        #[serde(default = "default_period")]
        period: f64,
        eps0: Vec<f64>,
        eps1: Vec<f64>,
    },
}

fn default_period() -> f64 {
    60.0
}
fn default_direction() -> SwitchDirection {
    SwitchDirection::On
}
fn default_amplitude() -> f64 {
    0.01
}
fn default_start() -> f64 {
    600.0
}
fn default_width() -> f64 {
    600.0
}
fn default_spacing() -> f64 {
    1800.0
}
fn default_count() -> usize {
    4
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec::Pulse {
            period: default_period(),
            direction: default_direction(),
            amplitude: default_amplitude(),
            start: default_start(),
            duration: default_width(),
        }
    }
}

impl SignalSpec {
    pub fn period(&self) -> f64 {
        match self {
            SignalSpec::Zero { period }
            | SignalSpec::Pulse { period, .. }
            | SignalSpec::PulseTrain { period, .. }
            | SignalSpec::Explicit { period, .. } => *period,
        }
    }

    /// Sampled signal covering `horizon`. The flag is set when an explicit
    /// signal is shorter than the horizon and gets clamped.
    pub fn build(&self, horizon: f64) -> Result<(ActuationSignal, bool), ScenarioError> {
        let period = self.period();
        if !(period > 0.0 && period.is_finite()) {
            return Err(invalid("signal.period", format!("must be positive, got {period}")));
        }
        let n = ((horizon / period) - 1e-9).ceil().max(1.0) as usize;
        let at = |k: usize| k as f64 * period;
        let within = |t: f64, start: f64, len: f64| t >= start - 1e-9 && t < start + len - 1e-9;
        let (samples, clamped) = match self {
            SignalSpec::Zero { .. } => (vec![EpsPair::ZERO; n], false),
            SignalSpec::Pulse { direction, amplitude, start, duration, .. } => {
                let s = (0..n)
                    .map(|k| {
                        let e = if within(at(k), *start, *duration) { *amplitude } else { 0.0 };
                        match direction {
                            SwitchDirection::On => EpsPair::new(0.0, e),
                            SwitchDirection::Off => EpsPair::new(e, 0.0),
                        }
                    })
                    .collect();
                (s, false)
            }
            SignalSpec::PulseTrain { amplitude, start, width, spacing, count, .. } => {
                if *spacing < *width {
                    return Err(invalid("signal.spacing", "must be at least the pulse width"));
                }
                let s = (0..n)
                    .map(|k| {
                        let t = at(k);
                        (0..*count)
                            .find(|&j| within(t, start + j as f64 * spacing, *width))
                            .map(|j| {
                                if j % 2 == 0 {
                                    EpsPair::new(0.0, *amplitude)
                                } else {
                                    EpsPair::new(*amplitude, 0.0)
                                }
                            })
                            .unwrap_or(EpsPair::ZERO)
                    })
                    .collect();
                (s, false)
            }
            SignalSpec::Explicit { eps0, eps1, .. } => {
                if eps0.len() != eps1.len() || eps0.is_empty() {
                    return Err(invalid(
                        "signal.eps0",
                        format!("eps0 and eps1 need the same non-zero length, got {} and {}", eps0.len(), eps1.len()),
                    ));
                }
                let s: Vec<EpsPair> = eps0.iter().zip(eps1).map(|(&a, &b)| EpsPair::new(a, b)).collect();
                let clamped = s.len() < n;
                (s, clamped)
            }
        };
        let signal = ActuationSignal::new(period, samples).map_err(|e| match e {
            ModelError::InvalidSignal(m) => invalid("signal", m),
            other => invalid("signal", other.to_string()),
        })?;
        Ok((signal, clamped))
    }
}

/// How Monte Carlo units are placed before the burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McStart {
    /// Uniform phase on the noise-free limit cycle.
    LimitCycle,
    /// Sampled from the stationary finite volume solution.
    FvmStationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub units: usize,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
    pub snapshot_every: f64,
    pub dwell_enabled: bool,
    pub record_events: bool,
    pub locked_dwell_bins: usize,
    pub start: McStart,
    pub threads: Option<usize>,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            units: 10_000,
            seed: 1,
            dt: 1.0,
            horizon: 7200.0,
            burn_in: 36_000.0,
            snapshot_every: 60.0,
            dwell_enabled: false,
            record_events: false,
            locked_dwell_bins: 0,
            start: McStart::LimitCycle,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FvmSettings {
    pub cells_per_band: usize,
    pub left_pad: f64,
    pub right_pad: f64,
    /// RK4 substep as a fraction of the advective/diffusive/rate scales.
    pub substep_safety: f64,
}

impl Default for FvmSettings {
    fn default() -> Self {
        Self { cells_per_band: 120, left_pad: 1.0, right_pad: 1.0, substep_safety: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSettings {
    /// FVM cells merged into one bin for density distances.
    pub density_bin_factor: usize,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self { density_bin_factor: 2 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub params: TclParams,
    pub signal: SignalSpec,
    pub mc: McSection,
    pub fvm: FvmSettings,
    pub compare: CompareSettings,
    pub output: OutputSettings,
}

/// Validated scenario with the sampled signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub signal: ActuationSignal,
    pub signal_clamped: bool,
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        file.params.validate().map_err(|e| match e {
            ModelError::InvalidParam { field, reason } => invalid(&format!("params.{field}"), reason),
            other => invalid("params", other.to_string()),
        })?;
        let mc = &file.mc;
        if mc.units == 0 {
            return Err(invalid("mc.units", "must be at least 1"));
        }
        let sim = sim_config_of(&file);
        sim.validate().map_err(|e| invalid("mc", e.to_string()))?;
        let f = &file.fvm;
        if f.cells_per_band < 3 {
            return Err(invalid("fvm.cells_per_band", "must be at least 3"));
        }
        if !(f.left_pad > 0.0 && f.right_pad > 0.0) {
            return Err(invalid("fvm.left_pad", "pads must be positive"));
        }
        if !(f.substep_safety > 0.0 && f.substep_safety <= 1.0) {
            return Err(invalid("fvm.substep_safety", "must lie in (0, 1]"));
        }
        if file.compare.density_bin_factor == 0 || !f.cells_per_band.is_multiple_of(file.compare.density_bin_factor) {
            return Err(invalid(
                "compare.density_bin_factor",
                format!("must divide fvm.cells_per_band = {}", f.cells_per_band),
            ));
        }
        let (signal, signal_clamped) = file.signal.build(mc.horizon)?;
        let period = signal.period();
        let whole = |x: f64| ((x / period) - (x / period).round()).abs() < 1e-9;
        if !whole(mc.horizon) {
            return Err(invalid("mc.horizon", format!("must be a multiple of signal.period = {period}")));
        }
        if !whole(mc.snapshot_every) {
            return Err(invalid("mc.snapshot_every", format!("must be a multiple of signal.period = {period}")));
        }
        if ((period / mc.dt) - (period / mc.dt).round()).abs() >= 1e-9 {
            return Err(invalid("signal.period", format!("must be a multiple of mc.dt = {}", mc.dt)));
        }
        Ok(Self { file, signal, signal_clamped })
    }

    pub fn params(&self) -> &TclParams {
        &self.file.params
    }

    pub fn sim_config(&self) -> SimConfig {
        sim_config_of(&self.file)
    }

    pub fn name(&self) -> &str {
        self.file.name.as_deref().unwrap_or("scenario")
    }

    /// Re-validate after changing the file section.
    pub fn with(self, edit: impl FnOnce(&mut ScenarioFile)) -> Result<Self, ScenarioError> {
        let mut file = self.file;
        edit(&mut file);
        Self::from_file(file)
    }

    /// Defaults echoed as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("scenario serializes")
    }
}

fn sim_config_of(file: &ScenarioFile) -> SimConfig {
    let mc = &file.mc;
    SimConfig {
        dt: mc.dt,
        horizon: mc.horizon,
        n_units: mc.units,
        master_seed: mc.seed,
        dwell_enabled: mc.dwell_enabled,
        actuation_enabled: true,
        burn_in: mc.burn_in,
        snapshot_every: mc.snapshot_every,
        record_events: mc.record_events,
        locked_dwell_bins: mc.locked_dwell_bins,
        threads: mc.threads,
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    Scenario::from_file(file)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text).map_err(|e| match e {
        ScenarioError::Parse(m) => ScenarioError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let s = parse_scenario("").unwrap();
        assert_eq!(*s.params(), TclParams::refrigerator());
        assert_eq!(s.file.mc.units, 10_000);
        assert_eq!(s.signal.samples().len(), 120);
        assert_eq!(s.signal.actuation_at(600.0), EpsPair::new(0.0, 0.01));
        assert_eq!(s.signal.actuation_at(1199.0), EpsPair::new(0.0, 0.01));
        assert_eq!(s.signal.actuation_at(1200.0), EpsPair::ZERO);
        assert!(!s.signal_clamped);
    }

    #[test]
    fn echo_round_trips() {
        let s = parse_scenario("[params]\nsigma = 0.0\n").unwrap();
        let again = parse_scenario(&s.to_toml()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejects_inverted_band() {
        let e = parse_scenario("[params]\nt_min = 5.0\nt_max = 2.0\n").unwrap_err();
        assert!(e.to_string().starts_with("params."), "{e}");
    }

    #[test]
    fn rejects_negative_eps() {
        let e = parse_scenario("[signal]\nkind = \"explicit\"\neps0 = [0.0, -0.1]\neps1 = [0.0, 0.0]\n").unwrap_err();
        assert!(e.to_string().starts_with("signal"), "{e}");
        let e = parse_scenario("[signal]\nkind = \"pulse\"\namplitude = -0.01\n").unwrap_err();
        assert!(e.to_string().starts_with("signal"), "{e}");
    }

    #[test]
    fn rejects_unknown_fields() {
        let e = parse_scenario("[params]\nsigmaa = 0.1\n").unwrap_err();
        assert!(matches!(e, ScenarioError::Parse(_)));
        assert!(e.to_string().contains("sigmaa"), "{e}");
        assert!(parse_scenario("[signal]\nkind = \"zero\"\nwidth = 3.0\n").is_err());
    }

    #[test]
    fn pulse_train_alternates() {
        let s = parse_scenario("[signal]\nkind = \"pulse-train\"\n").unwrap();
        assert_eq!(s.signal.actuation_at(600.0), EpsPair::new(0.0, 0.01));
        assert_eq!(s.signal.actuation_at(2400.0), EpsPair::new(0.01, 0.0));
        assert_eq!(s.signal.actuation_at(1500.0), EpsPair::ZERO);
    }

    #[test]
    fn short_explicit_signal_is_flagged() {
        let s = parse_scenario("[signal]\nkind = \"explicit\"\neps0 = [0.0]\neps1 = [0.01]\n").unwrap();
        assert!(s.signal_clamped);
    }

    #[test]
    fn bin_factor_must_divide_cells() {
        assert!(parse_scenario("[compare]\ndensity_bin_factor = 7\n").is_err());
    }
}
