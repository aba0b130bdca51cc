//! Closed-form thermostat limit cycle of the noise-free model.
//!
//! With `sigma = 0` and no actuation each leg is a transit of the affine ODE
//! `dT/dt = a*T + b` between the thermostat bounds:
//!
//! ```text
//! t_leg = (1/a) * ln((T_end - T_eq) / (T_start - T_eq)),   T_eq = -b/a
//! ```

use serde::Serialize;
use thiserror::Error;

use crate::model::{drift, HybridState, Mode, TclParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycleError {
    #[error("{mode:?} mode never crosses the dead-band: drift at T={temp} is {rate:e} K/s")]
    NoCrossing { mode: Mode, temp: f64, rate: f64 },
}

/// Leg durations of the deterministic limit cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCycle {
    pub t_off: f64,
    pub t_on: f64,
    pub duty_cycle: f64,
}

impl LimitCycle {
    pub fn period(&self) -> f64 {
        self.t_off + self.t_on
    }

    /// State reached `phase` seconds after the unit switched off at `t_min`.
    /// The phase wraps around the cycle period.
    pub fn state_at_phase(&self, params: &TclParams, phase: f64) -> HybridState {
        let phase = phase.rem_euclid(self.period());
        if phase < self.t_off {
            HybridState::new(affine_flow(params.a, params.b0, params.t_min, phase), Mode::Off, phase)
        } else {
            let elapsed = phase - self.t_off;
            HybridState::new(affine_flow(params.a, params.b1, params.t_max, elapsed), Mode::On, elapsed)
        }
    }
}

/// Solution of `dT/dt = a*T + b` from `start` after `t` seconds.
fn affine_flow(a: f64, b: f64, start: f64, t: f64) -> f64 {
    if a == 0.0 {
        start + b * t
    } else {
        let eq = -b / a;
        eq + (start - eq) * (a * t).exp()
    }
}

fn transit_time(a: f64, b: f64, start: f64, end: f64) -> f64 {
    if a == 0.0 {
        (end - start) / b
    } else {
        let eq = -b / a;
        ((end - eq) / (start - eq)).ln() / a
    }
}

/// Leg durations and duty cycle with `sigma` treated as zero.
pub fn analytic_limit_cycle(params: &TclParams) -> Result<LimitCycle, CycleError> {
    // affine drift: the sign on the closed band is fixed by its endpoint values
    for temp in [params.t_min, params.t_max] {
        let up = drift(params, Mode::Off, temp, 0.0);
        if up <= 0.0 {
            return Err(CycleError::NoCrossing { mode: Mode::Off, temp, rate: up });
        }
        let down = drift(params, Mode::On, temp, 0.0);
        if down >= 0.0 {
            return Err(CycleError::NoCrossing { mode: Mode::On, temp, rate: down });
        }
    }
    let t_off = transit_time(params.a, params.b0, params.t_min, params.t_max);
    let t_on = transit_time(params.a, params.b1, params.t_max, params.t_min);
    Ok(LimitCycle {
        t_off,
        t_on,
        duty_cycle: t_on / (t_on + t_off),
    })
}
