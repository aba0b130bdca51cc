//! TCL model definitions shared by the Monte Carlo and finite volume backends.
//!
//! A cooling unit is assumed throughout: the "on" mode pulls the temperature
//! down towards `t_min`, the "off" mode lets it drift up towards `t_max`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error("rate control must be non-negative, got {0}")]
    NegativeRate(f64),
    #[error("invalid actuation signal: {0}")]
    InvalidSignal(String),
}

/// Discrete power mode of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Off,
    On,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::Off => 0,
            Mode::On => 1,
        }
    }

    pub fn from_index(i: usize) -> Mode {
        if i == 0 {
            Mode::Off
        } else {
            Mode::On
        }
    }

    pub fn flipped(self) -> Mode {
        match self {
            Mode::Off => Mode::On,
            Mode::On => Mode::Off,
        }
    }

    /// The rate-switch direction that can leave this mode.
    pub fn exit_direction(self) -> SwitchDirection {
        match self {
            Mode::Off => SwitchDirection::On,
            Mode::On => SwitchDirection::Off,
        }
    }
}

/// Direction of a forced (rate) switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchDirection {
    /// off -> on, driven by `eps1`
    On,
    /// on -> off, driven by `eps0`
    Off,
}

/// Physical and control constants of one TCL class.
///
/// Defaults reproduce a small refrigerator: affine drift `a*T + b_mode`,
/// constant diffusion `sigma`, dead-band `[2, 5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TclParams {
    /// Thermal drift coefficient [1/s].
    pub a: f64,
    /// Off-mode drift offset [K/s].
    pub b0: f64,
    /// On-mode drift offset [K/s].
    pub b1: f64,
    /// Diffusion coefficient [K/sqrt(s)].
    pub sigma: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Switch-off safe distance from `t_max` [K].
    pub delta_t0: f64,
    /// Switch-on safe distance from `t_min` [K].
    pub delta_t1: f64,
    /// Minimum off-dwell [s].
    pub m0: f64,
    /// Minimum on-dwell [s].
    pub m1: f64,
    /// Rated power `r` [W].
    pub rated_power: f64,
}

impl Default for TclParams {
    fn default() -> Self {
        Self::refrigerator()
    }
}

impl TclParams {
    pub const fn refrigerator() -> Self {
        Self {
            a: -1.5247e-5,
            b0: 3.6593e-4,
            b1: -0.0026,
            sigma: 0.0065,
            t_min: 2.0,
            t_max: 5.0,
            delta_t0: 0.5,
            delta_t1: 0.5,
            m0: 300.0,
            m1: 300.0,
            rated_power: 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [
            ("a", self.a),
            ("b0", self.b0),
            ("b1", self.b1),
            ("sigma", self.sigma),
            ("t_min", self.t_min),
            ("t_max", self.t_max),
            ("delta_t0", self.delta_t0),
            ("delta_t1", self.delta_t1),
            ("m0", self.m0),
            ("m1", self.m1),
            ("rated_power", self.rated_power),
        ];
        for (field, v) in all {
            if !v.is_finite() {
                return Err(invalid(field, format!("must be finite, got {v}")));
            }
        }
        if self.t_min >= self.t_max {
            return Err(invalid(
                "t_min",
                format!("t_min ({}) must be below t_max ({})", self.t_min, self.t_max),
            ));
        }
        if self.delta_t0 < 0.0 {
            return Err(invalid("delta_t0", "must be >= 0".into()));
        }
        if self.delta_t1 < 0.0 {
            return Err(invalid("delta_t1", "must be >= 0".into()));
        }
        if self.delta_t0 + self.delta_t1 >= self.band_width() {
            return Err(invalid(
                "delta_t0",
                format!(
                    "safe distances {} + {} leave no actuatable band inside width {}",
                    self.delta_t0,
                    self.delta_t1,
                    self.band_width()
                ),
            ));
        }
        if self.sigma < 0.0 {
            return Err(invalid("sigma", "must be >= 0".into()));
        }
        if self.rated_power <= 0.0 {
            return Err(invalid("rated_power", "must be > 0".into()));
        }
        if self.m0 < 0.0 {
            return Err(invalid("m0", "must be >= 0".into()));
        }
        if self.m1 < 0.0 {
            return Err(invalid("m1", "must be >= 0".into()));
        }
        Ok(())
    }

    pub fn band_width(&self) -> f64 {
        self.t_max - self.t_min
    }

    pub fn min_dwell(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Off => self.m0,
            Mode::On => self.m1,
        }
    }

    /// Lower edge of the switch-on safe zone, `t_min + delta_t1`.
    pub fn switch_on_floor(&self) -> f64 {
        self.t_min + self.delta_t1
    }

    /// Upper edge of the switch-off safe zone, `t_max - delta_t0`.
    pub fn switch_off_ceiling(&self) -> f64 {
        self.t_max - self.delta_t0
    }

    /// True when `temp` lies in the safe zone for `direction`.
    pub fn in_safe_zone(&self, temp: f64, direction: SwitchDirection) -> bool {
        match direction {
            SwitchDirection::On => temp >= self.switch_on_floor() && temp < self.t_max,
            SwitchDirection::Off => temp > self.t_min && temp <= self.switch_off_ceiling(),
        }
    }
}

fn invalid(field: &'static str, reason: String) -> ModelError {
    ModelError::InvalidParam { field, reason }
}

/// State of one unit: temperature, mode and time since the last switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub temp: f64,
    pub mode: Mode,
    pub dwell: f64,
}

impl HybridState {
    pub fn new(temp: f64, mode: Mode, dwell: f64) -> Self {
        Self { temp, mode, dwell }
    }

    /// Thermostat containment for the cooling convention.
    pub fn is_contained(&self, params: &TclParams) -> bool {
        match self.mode {
            Mode::Off => self.temp < params.t_max,
            Mode::On => self.temp > params.t_min,
        }
    }
}

/// Drift `u_mode(T, t)` [K/s].
pub fn drift(params: &TclParams, mode: Mode, temp: f64, _time: f64) -> f64 {
    let offset = match mode {
        Mode::Off => params.b0,
        Mode::On => params.b1,
    };
    params.a * temp + offset
}

/// Diffusion coefficient `sigma_mode(T, t)` [K/sqrt(s)].
pub fn diffusion(params: &TclParams, _mode: Mode, _temp: f64, _time: f64) -> f64 {
    params.sigma
}

/// Deterministic thermostat rule. The caller resets the dwell clock when the
/// returned mode differs from `state.mode`.
pub fn thermostat_transition(state: &HybridState, params: &TclParams) -> Mode {
    match state.mode {
        Mode::Off if state.temp >= params.t_max => Mode::On,
        Mode::On if state.temp <= params.t_min => Mode::Off,
        m => m,
    }
}

/// Rate function `lambda(eps, T)`; the temperature-independent choice `lambda = eps`.
pub fn rate_function(eps: f64, _temp: f64) -> Result<f64, ModelError> {
    if eps < 0.0 || eps.is_nan() {
        return Err(ModelError::NegativeRate(eps));
    }
    Ok(eps)
}

/// Rate function extended with zeros outside the safe zone of `direction`.
pub fn masked_rate(
    eps: f64,
    temp: f64,
    direction: SwitchDirection,
    params: &TclParams,
) -> Result<f64, ModelError> {
    let rate = rate_function(eps, temp)?;
    Ok(if params.in_safe_zone(temp, direction) {
        rate
    } else {
        0.0
    })
}

/// Instantaneous power `r * m` [W].
pub fn power_output(state: &HybridState, params: &TclParams) -> f64 {
    match state.mode {
        Mode::Off => 0.0,
        Mode::On => params.rated_power,
    }
}

/// One broadcast value: switch-off rate `eps0` and switch-on rate `eps1` [1/s].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpsPair {
    pub eps0: f64,
    pub eps1: f64,
}

impl EpsPair {
    pub const ZERO: EpsPair = EpsPair { eps0: 0.0, eps1: 0.0 };

    pub fn new(eps0: f64, eps1: f64) -> Self {
        Self { eps0, eps1 }
    }

    /// Rate control relevant for a switch in `direction`.
    pub fn for_direction(&self, direction: SwitchDirection) -> f64 {
        match direction {
            SwitchDirection::On => self.eps1,
            SwitchDirection::Off => self.eps0,
        }
    }
}

/// Piecewise-constant broadcast sequence with sample period `period`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuationSignal {
    period: f64,
    samples: Vec<EpsPair>,
}

impl ActuationSignal {
    pub fn new(period: f64, samples: Vec<EpsPair>) -> Result<Self, ModelError> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(ModelError::InvalidSignal(format!(
                "period must be positive, got {period}"
            )));
        }
        if samples.is_empty() {
            return Err(ModelError::InvalidSignal("signal has no samples".into()));
        }
        for (k, s) in samples.iter().enumerate() {
            if !(s.eps0 >= 0.0 && s.eps1 >= 0.0 && s.eps0.is_finite() && s.eps1.is_finite()) {
                return Err(ModelError::InvalidSignal(format!(
                    "sample {k} = ({}, {}) has a negative or non-finite rate",
                    s.eps0, s.eps1
                )));
            }
        }
        Ok(Self { period, samples })
    }

    /// Constant signal holding `pair` for `len` samples.
    pub fn constant(period: f64, pair: EpsPair, len: usize) -> Result<Self, ModelError> {
        Self::new(period, vec![pair; len.max(1)])
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> &[EpsPair] {
        &self.samples
    }

    /// Time covered before clamping to the last sample kicks in.
    pub fn duration(&self) -> f64 {
        self.period * self.samples.len() as f64
    }

    pub fn index_at(&self, time: f64) -> usize {
        let k = (time.max(0.0) / self.period).floor();
        // division can round across an exact boundary; settle on k*period <= time
        let mut k = if k.is_finite() { k as usize } else { usize::MAX };
        if k < usize::MAX && (k as f64 + 1.0) * self.period <= time {
            k += 1;
        } else if k > 0 && k < usize::MAX && k as f64 * self.period > time {
            k -= 1;
        }
        k.min(self.samples.len() - 1)
    }

    /// Broadcast value in force at `time`; the last sample holds beyond the end.
    pub fn actuation_at(&self, time: f64) -> EpsPair {
        self.samples[self.index_at(time)]
    }

    pub fn max_rate(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.eps0.max(s.eps1))
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|s| s.eps0 == 0.0 && s.eps1 == 0.0)
    }

    /// SHA-256 over the period and the sample bit patterns, hex encoded.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.period.to_bits().to_le_bytes());
        h.update((self.samples.len() as u64).to_le_bytes());
        for s in &self.samples {
            h.update(s.eps0.to_bits().to_le_bytes());
            h.update(s.eps1.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const P: TclParams = TclParams::refrigerator();

    #[test]
    fn drift_examples() {
        assert_relative_eq!(drift(&P, Mode::Off, 5.0, 0.0), 2.89695e-4, max_relative = 1e-12);
        assert_relative_eq!(drift(&P, Mode::On, 5.0, 0.0), -2.676235e-3, max_relative = 1e-12);
        assert!((drift(&P, Mode::On, 5.0, 0.0) - -2.6762e-3).abs() < 5e-8);
        let t_eq = -P.b0 / P.a;
        assert!((t_eq - 24.0009).abs() < 1e-3);
        assert!(drift(&P, Mode::Off, t_eq, 0.0).abs() < 1e-18);
    }

    #[test]
    fn diffusion_is_constant() {
        assert_eq!(diffusion(&P, Mode::Off, 1.0, 0.0), 0.0065);
        assert_eq!(diffusion(&P, Mode::On, 3.2, 10.0), 0.0065);
        let quiet = TclParams { sigma: 0.0, ..P };
        assert_eq!(diffusion(&quiet, Mode::On, 3.2, 0.0), 0.0);
    }

    #[test]
    fn thermostat_examples() {
        assert_eq!(thermostat_transition(&HybridState::new(5.0, Mode::Off, 0.0), &P), Mode::On);
        assert_eq!(thermostat_transition(&HybridState::new(3.5, Mode::On, 0.0), &P), Mode::On);
        assert_eq!(thermostat_transition(&HybridState::new(1.99, Mode::On, 0.0), &P), Mode::Off);
        assert_eq!(thermostat_transition(&HybridState::new(2.0, Mode::On, 0.0), &P), Mode::Off);
        assert_eq!(thermostat_transition(&HybridState::new(4.99, Mode::Off, 0.0), &P), Mode::Off);
    }

    #[test]
    fn rate_function_examples() {
        assert_eq!(rate_function(0.01, 4.1).unwrap(), 0.01);
        assert_eq!(rate_function(0.0, -3.0).unwrap(), 0.0);
        assert_eq!(rate_function(0.2, 2.5).unwrap(), 0.2);
        assert_eq!(rate_function(-0.1, 2.5), Err(ModelError::NegativeRate(-0.1)));
    }

    #[test]
    fn masked_rate_examples() {
        let on = SwitchDirection::On;
        let off = SwitchDirection::Off;
        assert_eq!(masked_rate(0.05, P.t_min + P.delta_t1 / 2.0, on, &P).unwrap(), 0.0);
        assert_eq!(masked_rate(0.05, P.t_max - P.delta_t0 / 2.0, off, &P).unwrap(), 0.0);
        let mid = 0.5 * (P.t_min + P.t_max);
        assert_eq!(masked_rate(0.05, mid, on, &P).unwrap(), 0.05);
        assert_eq!(masked_rate(0.05, mid, off, &P).unwrap(), 0.05);
        // closed on the safe side, open at the thermostat bound
        assert_eq!(masked_rate(0.05, 2.5, on, &P).unwrap(), 0.05);
        assert_eq!(masked_rate(0.05, 5.0, on, &P).unwrap(), 0.0);
        assert_eq!(masked_rate(0.05, 4.5, off, &P).unwrap(), 0.05);
        assert_eq!(masked_rate(0.05, 2.0, off, &P).unwrap(), 0.0);
        assert!(masked_rate(-1.0, mid, on, &P).is_err());
    }

    #[test]
    fn power_examples() {
        assert_eq!(power_output(&HybridState::new(3.0, Mode::Off, 0.0), &P), 0.0);
        assert_eq!(power_output(&HybridState::new(3.0, Mode::On, 0.0), &P), 100.0);
        let unit = TclParams { rated_power: 1.0, ..P };
        assert_eq!(power_output(&HybridState::new(3.0, Mode::On, 0.0), &unit), 1.0);
    }

    #[test]
    fn actuation_examples() {
        let s = ActuationSignal::new(60.0, vec![EpsPair::ZERO, EpsPair::new(0.1, 0.0)]).unwrap();
        assert_eq!(s.actuation_at(59.9), EpsPair::ZERO);
        assert_eq!(s.actuation_at(60.0), EpsPair::new(0.1, 0.0));
        assert_eq!(s.actuation_at(1e6), EpsPair::new(0.1, 0.0));
        assert!(ActuationSignal::new(60.0, vec![]).is_err());
        assert!(ActuationSignal::new(0.0, vec![EpsPair::ZERO]).is_err());
        assert!(ActuationSignal::new(60.0, vec![EpsPair::new(-1.0, 0.0)]).is_err());
    }

    #[test]
    fn checksum_tracks_content() {
        let a = ActuationSignal::constant(60.0, EpsPair::ZERO, 3).unwrap();
        let b = ActuationSignal::constant(60.0, EpsPair::new(0.0, 1e-3), 3).unwrap();
        assert_eq!(a.checksum(), a.clone().checksum());
        assert_ne!(a.checksum(), b.checksum());
        assert_eq!(a.checksum().len(), 64);
    }

    #[test]
    fn param_validation() {
        assert!(P.validate().is_ok());
        assert!(TclParams { t_min: 5.0, ..P }.validate().is_err());
        assert!(TclParams { delta_t0: 1.5, delta_t1: 1.5, ..P }.validate().is_err());
        assert!(TclParams { delta_t1: -0.1, ..P }.validate().is_err());
        assert!(TclParams { sigma: -1.0, ..P }.validate().is_err());
        assert!(TclParams { rated_power: 0.0, ..P }.validate().is_err());
        assert!(TclParams { m1: -1.0, ..P }.validate().is_err());
    }

    proptest! {
        #[test]
        fn masked_rate_zero_outside_zone(eps in 0.0f64..1.0, temp in -5.0f64..12.0) {
            let on = masked_rate(eps, temp, SwitchDirection::On, &P).unwrap();
            let off = masked_rate(eps, temp, SwitchDirection::Off, &P).unwrap();
            if temp <= P.t_min || temp >= P.t_max {
                prop_assert_eq!(on, 0.0);
                prop_assert_eq!(off, 0.0);
            }
            if temp < P.t_min + P.delta_t1 {
                prop_assert_eq!(on, 0.0);
            }
            if temp > P.t_max - P.delta_t0 {
                prop_assert_eq!(off, 0.0);
            }
        }

        #[test]
        fn thermostat_is_idempotent(temp in -1.0f64..8.0, on in any::<bool>()) {
            let mode = if on { Mode::On } else { Mode::Off };
            let s = HybridState::new(temp, mode, 1.0);
            let once = thermostat_transition(&s, &P);
            let twice = thermostat_transition(&HybridState { mode: once, ..s }, &P);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn drift_is_affine(t1 in -10.0f64..30.0, t2 in -10.0f64..30.0, on in any::<bool>()) {
            let mode = if on { Mode::On } else { Mode::Off };
            let lhs = drift(&P, mode, t1, 0.0) + drift(&P, mode, t2, 0.0);
            let rhs = 2.0 * drift(&P, mode, 0.5 * (t1 + t2), 0.0);
            prop_assert!((lhs - rhs).abs() < 1e-15);
        }

        #[test]
        fn actuation_right_continuous(period in 0.5f64..120.0, n in 1usize..50, k in 0usize..60) {
            let samples: Vec<_> = (0..n).map(|i| EpsPair::new(i as f64, 0.0)).collect();
            let s = ActuationSignal::new(period, samples.clone()).unwrap();
            let expect = samples[k.min(n - 1)];
            prop_assert_eq!(s.actuation_at(k as f64 * period), expect);
        }
    }
}
