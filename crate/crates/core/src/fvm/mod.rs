//! Finite volume discretization of the actuated Fokker-Planck system and the
//! resulting bilinear model `dF/dt = (A + B0*eps0 + B1*eps1) F`.

pub mod assemble;
mod diagnostics;
pub mod export;
pub mod grid;
mod integrate;
pub mod reconstruct;

pub use assemble::{assemble_a, assemble_b, column_sums, max_column_sum, LineBoundary};
pub use diagnostics::{flux_diagnostics, net_axis_flux, FluxField, ThermostatFlows};
pub use grid::{build_grid, HybridGrid, Segment};
pub use integrate::{rk4_advance, spmv};
pub use reconstruct::reconstruct_face;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::Serialize;
use thiserror::Error;

use crate::model::{ActuationSignal, EpsPair, Mode, ModelError, SwitchDirection, TclParams};

#[derive(Debug, Error)]
pub enum FvmError {
    #[error(
        "{cells_per_band} cells per band do not put the safe-zone edges (delta_t0={delta_t0}, delta_t1={delta_t1}) on cell faces{}",
        match suggested { Some(c) => format!("; try {c} cells per band"), None => String::new() }
    )]
    Alignment {
        cells_per_band: usize,
        delta_t0: f64,
        delta_t1: f64,
        suggested: Option<usize>,
    },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("state has {got} entries, grid has {want}")]
    Dimension { got: usize, want: usize },
    #[error("explicit integration needs {needed} substeps for dt={dt_macro} s, limit is {limit}")]
    Stability {
        needed: usize,
        limit: usize,
        dt_macro: f64,
    },
    #[error("stationary system is singular")]
    Singular,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Cell-average densities [probability/K] over the flat grid index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdfState {
    pub values: Vec<f64>,
    pub time: f64,
}

impl PdfState {
    pub fn mass(&self, grid: &HybridGrid) -> f64 {
        self.values.iter().sum::<f64>() * grid.dx
    }

    pub fn mode_mass(&self, grid: &HybridGrid, mode: Mode) -> f64 {
        let off = grid.line_offset(mode);
        self.values[off..off + grid.line_len(mode)].iter().sum::<f64>() * grid.dx
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn segment<'a>(&'a self, grid: &HybridGrid, seg: Segment) -> &'a [f64] {
        let off = grid.segment_offset(seg);
        &self.values[off..off + grid.segment_len(seg)]
    }
}

/// Population-normalized power `r * (mass of 1b + mass of 1c)` [W per unit].
pub fn power_from_state(state: &PdfState, grid: &HybridGrid, params: &TclParams) -> f64 {
    params.rated_power * state.mode_mass(grid, Mode::On)
}

/// Explicit integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integrator {
    /// Fraction of the advective/diffusive/rate time scales used as substep.
    pub safety: f64,
    pub max_substeps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { safety: 0.5, max_substeps: 10_000_000 }
    }
}

/// Sparse operators of the bilinear model on one grid.
#[derive(Debug, Clone)]
pub struct BilinearModel {
    pub a: CsrMatrix<f64>,
    pub b0: CsrMatrix<f64>,
    pub b1: CsrMatrix<f64>,
    pub grid: HybridGrid,
    pub params: TclParams,
    pub integrator: Integrator,
    max_speed: f64,
    max_sigma: f64,
}

impl BilinearModel {
    pub fn assemble(grid: &HybridGrid, params: &TclParams) -> Result<Self, FvmError> {
        params.validate()?;
        if (grid.t_min, grid.t_max) != (params.t_min, params.t_max) {
            return Err(FvmError::InvalidGrid("grid was built for a different dead-band".into()));
        }
        let lines = [Mode::Off, Mode::On].map(|m| assemble::mode_line(grid, params, m));
        Ok(Self {
            a: assemble_a(grid, params),
            b0: assemble_b(grid, params, SwitchDirection::Off),
            b1: assemble_b(grid, params, SwitchDirection::On),
            grid: grid.clone(),
            params: *params,
            integrator: Integrator::default(),
            max_speed: lines.iter().map(|l| l.max_speed()).fold(0.0, f64::max),
            max_sigma: lines.iter().map(|l| l.max_sigma()).fold(0.0, f64::max),
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `A + B0*eps0 + B1*eps1`.
    pub fn operator(&self, eps: EpsPair) -> CsrMatrix<f64> {
        let n = self.len();
        let mut coo = CooMatrix::new(n, n);
        for (r, c, &v) in self.a.triplet_iter() {
            coo.push(r, c, v);
        }
        for (m, e) in [(&self.b0, eps.eps0), (&self.b1, eps.eps1)] {
            if e != 0.0 {
                for (r, c, &v) in m.triplet_iter() {
                    coo.push(r, c, v * e);
                }
            }
        }
        CsrMatrix::from(&coo)
    }

    /// Largest stable substep `safety * min(dx/|u|, dx^2/sigma^2, 1/(eps0+eps1))`.
    pub fn stable_dt(&self, eps: EpsPair) -> f64 {
        let dx = self.grid.dx;
        let mut scale = f64::INFINITY;
        if self.max_speed > 0.0 {
            scale = scale.min(dx / self.max_speed);
        }
        if self.max_sigma > 0.0 {
            scale = scale.min(dx * dx / (self.max_sigma * self.max_sigma));
        }
        let rate = eps.eps0 + eps.eps1;
        if rate > 0.0 {
            scale = scale.min(1.0 / rate);
        }
        self.integrator.safety * scale
    }

    /// Substep count for one macro step.
    pub fn substeps(&self, eps: EpsPair, dt_macro: f64) -> Result<usize, FvmError> {
        let h = self.stable_dt(eps);
        let needed = if h.is_finite() { (dt_macro / h).ceil().max(1.0) as usize } else { 1 };
        if needed > self.integrator.max_substeps {
            return Err(FvmError::Stability {
                needed,
                limit: self.integrator.max_substeps,
                dt_macro,
            });
        }
        Ok(needed)
    }

    /// Advance `state` by `dt_macro` with `eps` held constant (RK4 substeps).
    pub fn step(&self, state: &PdfState, eps: EpsPair, dt_macro: f64) -> Result<PdfState, FvmError> {
        let op = self.operator(eps);
        self.step_with(&op, state, eps, dt_macro)
    }

    /// As [`Self::step`], reusing an operator from [`Self::operator`].
    pub fn step_with(
        &self,
        op: &CsrMatrix<f64>,
        state: &PdfState,
        eps: EpsPair,
        dt_macro: f64,
    ) -> Result<PdfState, FvmError> {
        if state.values.len() != self.len() {
            return Err(FvmError::Dimension { got: state.values.len(), want: self.len() });
        }
        if eps.eps0 < 0.0 || eps.eps1 < 0.0 {
            return Err(ModelError::NegativeRate(eps.eps0.min(eps.eps1)).into());
        }
        let n = self.substeps(eps, dt_macro)?;
        let mut values = state.values.clone();
        rk4_advance(op, &mut values, dt_macro / n as f64, n);
        Ok(PdfState { values, time: state.time + dt_macro })
    }

    /// Normalized null vector of `A` (unit mass).
    pub fn stationary(&self) -> Result<PdfState, FvmError> {
        stationary_of(&self.a, &self.grid)
    }

    /// Normalized null vector of `A + B0*eps0 + B1*eps1`.
    pub fn stationary_with(&self, eps: EpsPair) -> Result<PdfState, FvmError> {
        stationary_of(&self.operator(eps), &self.grid)
    }
}

/// Output of [`BilinearModel::simulate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdeTrajectory {
    /// Power after every macro step, starting at `t = 0`.
    pub power: Vec<crate::mc::PowerSample>,
    pub snapshots: Vec<PdfState>,
    /// Largest `|mass - initial mass|` seen at any macro step.
    pub max_mass_drift: f64,
    /// Smallest cell value seen at any macro step.
    pub min_value: f64,
    pub substeps: usize,
    pub signal_checksum: String,
    pub final_state: PdfState,
}

impl BilinearModel {
    /// Step through `horizon` seconds in macro steps of the signal period,
    /// holding each broadcast sample for one period. Snapshots are taken at
    /// `t = 0` and every `snapshot_every` seconds (a multiple of the period).
    pub fn simulate(
        &self,
        initial: &PdfState,
        signal: &ActuationSignal,
        horizon: f64,
        snapshot_every: f64,
    ) -> Result<PdeTrajectory, FvmError> {
        let period = signal.period();
        let steps = crate::mc::steps_for(horizon, period).ok_or_else(|| {
            FvmError::InvalidGrid(format!("horizon {horizon} is not a multiple of the signal period {period}"))
        })?;
        let snap = crate::mc::steps_for(snapshot_every, period).ok_or_else(|| {
            FvmError::InvalidGrid(format!(
                "snapshot_every {snapshot_every} is not a multiple of the signal period {period}"
            ))
        })?;
        let m0 = initial.mass(&self.grid);
        let sample = |s: &PdfState| crate::mc::PowerSample {
            time: s.time,
            power_w: power_from_state(s, &self.grid, &self.params),
            on_fraction: s.mode_mass(&self.grid, Mode::On),
        };
        let mut state = PdfState { values: initial.values.clone(), time: 0.0 };
        let mut out = PdeTrajectory {
            power: vec![sample(&state)],
            snapshots: vec![state.clone()],
            max_mass_drift: 0.0,
            min_value: state.min(),
            substeps: 0,
            signal_checksum: signal.checksum(),
            final_state: state.clone(),
        };
        let mut cache: Option<(EpsPair, CsrMatrix<f64>)> = None;
        for k in 0..steps {
            let eps = signal.actuation_at(k as f64 * period);
            if cache.as_ref().map(|(e, _)| *e != eps).unwrap_or(true) {
                cache = Some((eps, self.operator(eps)));
            }
            let op = &cache.as_ref().expect("set above").1;
            out.substeps += self.substeps(eps, period)?;
            let mut next = self.step_with(op, &state, eps, period)?;
            next.time = (k + 1) as f64 * period;
            state = next;
            out.max_mass_drift = out.max_mass_drift.max((state.mass(&self.grid) - m0).abs());
            out.min_value = out.min_value.min(state.min());
            out.power.push(sample(&state));
            if (k + 1) % snap == 0 {
                out.snapshots.push(state.clone());
            }
        }
        out.final_state = state;
        Ok(out)
    }
}

/// Solve `M F = 0` with `sum F dx = 1` by replacing one balance row with the
/// mass constraint; one round of iterative refinement.
fn stationary_of(m: &CsrMatrix<f64>, grid: &HybridGrid) -> Result<PdfState, FvmError> {
    let n = m.nrows();
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for (r, c, &v) in m.triplet_iter() {
        dense[(r, c)] += v;
    }
    let pinned = 0;
    for c in 0..n {
        dense[(pinned, c)] = grid.dx;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[pinned] = 1.0;
    let lu = dense.clone().lu();
    let mut x = lu.solve(&rhs).ok_or(FvmError::Singular)?;
    let residual = &rhs - &dense * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FvmError::Singular);
    }
    Ok(PdfState { values: x.iter().copied().collect(), time: 0.0 })
}
