//! Histogram estimators of the hybrid-state density and the locked densities.

use serde::Serialize;

use super::SimError;
use crate::model::{HybridState, Mode, TclParams};

/// Per-mode histogram density [probability/K] on temperature cells `(x, x+dx]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDensity {
    pub edges: Vec<f64>,
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub time: f64,
}

impl EmpiricalDensity {
    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn width(&self, j: usize) -> f64 {
        self.edges[j + 1] - self.edges[j]
    }

    pub fn mode(&self, mode: Mode) -> &[f64] {
        match mode {
            Mode::Off => &self.f0,
            Mode::On => &self.f1,
        }
    }

    pub fn mode_mass(&self, mode: Mode) -> f64 {
        self.mode(mode)
            .iter()
            .enumerate()
            .map(|(j, f)| f * self.width(j))
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.mode_mass(Mode::Off) + self.mode_mass(Mode::On)
    }
}

/// Cell index for `temp` in `(edges[j], edges[j+1]]`.
fn cell_of(edges: &[f64], temp: f64) -> Option<usize> {
    let n = edges.len();
    if n < 2 || !(temp > edges[0] && temp <= edges[n - 1]) {
        return None;
    }
    Some(edges.partition_point(|&e| e < temp) - 1)
}

fn out_of_grid(units: &[HybridState], edges: &[f64]) -> SimError {
    let outside: Vec<f64> = units
        .iter()
        .map(|u| u.temp)
        .filter(|&t| cell_of(edges, t).is_none())
        .collect();
    let (min, max) = units
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| (lo.min(u.temp), hi.max(u.temp)));
    SimError::OutOfGrid {
        count: outside.len(),
        lo: edges.first().copied().unwrap_or(f64::NAN),
        hi: edges.last().copied().unwrap_or(f64::NAN),
        min,
        max,
    }
}

fn check_edges(edges: &[f64]) -> Result<(), SimError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SimError::InvalidConfig(
            "histogram edges must be strictly increasing with at least one cell".into(),
        ));
    }
    Ok(())
}

/// Normalized per-mode histogram of the ensemble; every unit must fall on the grid.
pub fn empirical_pdf(units: &[HybridState], edges: &[f64]) -> Result<EmpiricalDensity, SimError> {
    check_edges(edges)?;
    let cells = edges.len() - 1;
    let mut counts = [vec![0u64; cells], vec![0u64; cells]];
    for u in units {
        match cell_of(edges, u.temp) {
            Some(j) => counts[u.mode.index()][j] += 1,
            None => return Err(out_of_grid(units, edges)),
        }
    }
    let n = units.len().max(1) as f64;
    let density = |c: &[u64]| -> Vec<f64> {
        c.iter()
            .enumerate()
            .map(|(j, &k)| k as f64 / (n * (edges[j + 1] - edges[j])))
            .collect()
    };
    Ok(EmpiricalDensity {
        edges: edges.to_vec(),
        f0: density(&counts[0]),
        f1: density(&counts[1]),
        time: 0.0,
    })
}

/// Temperature x dwell grid for the locked densities; dwell cells `[y, y+dy)`
/// cover `[0, M_mode)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockedGrid {
    pub temp_edges: Vec<f64>,
    pub dwell_edges: [Vec<f64>; 2],
}

impl LockedGrid {
    pub fn new(temp_edges: Vec<f64>, params: &TclParams, dwell_bins: usize) -> Result<Self, SimError> {
        check_edges(&temp_edges)?;
        if dwell_bins == 0 {
            return Err(SimError::InvalidConfig("locked grid needs at least one dwell bin".into()));
        }
        let axis = |m: f64| -> Vec<f64> {
            if m > 0.0 {
                (0..=dwell_bins).map(|k| m * k as f64 / dwell_bins as f64).collect()
            } else {
                Vec::new()
            }
        };
        Ok(Self {
            temp_edges,
            dwell_edges: [axis(params.m0), axis(params.m1)],
        })
    }

    pub fn dwell_cells(&self, mode: Mode) -> usize {
        self.dwell_edges[mode.index()].len().saturating_sub(1)
    }
}

/// Histogram estimate of `L_i(x, y)` [probability/(K s)], row-major in
/// (temperature cell, dwell cell).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockedDensityEstimate {
    pub grid: LockedGrid,
    pub masses: [Vec<f64>; 2],
    /// Unit fraction per mode that is not locked.
    pub unlocked_fraction: [f64; 2],
    pub time: f64,
}

impl LockedDensityEstimate {
    /// `integral L_i dy` per temperature cell [probability/K].
    pub fn temperature_marginal(&self, mode: Mode) -> Vec<f64> {
        let i = mode.index();
        let nd = self.grid.dwell_cells(mode);
        let cells = self.grid.temp_edges.len() - 1;
        if nd == 0 {
            return vec![0.0; cells];
        }
        let dy = self.grid.dwell_edges[i][1] - self.grid.dwell_edges[i][0];
        (0..cells)
            .map(|j| self.masses[i][j * nd..(j + 1) * nd].iter().sum::<f64>() * dy)
            .collect()
    }

    /// `double integral L_i dx dy`.
    pub fn locked_mass(&self, mode: Mode) -> f64 {
        let e = &self.grid.temp_edges;
        self.temperature_marginal(mode)
            .iter()
            .enumerate()
            .map(|(j, m)| m * (e[j + 1] - e[j]))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.iter().all(|m| m.iter().all(|&v| v == 0.0))
    }
}

/// Histogram of the units still inside their minimum dwell, `dwell < M_mode`.
pub fn empirical_locked_density(
    units: &[HybridState],
    grid: &LockedGrid,
    params: &TclParams,
) -> Result<LockedDensityEstimate, SimError> {
    let cells = grid.temp_edges.len() - 1;
    let mut counts = [
        vec![0u64; cells * grid.dwell_cells(Mode::Off)],
        vec![0u64; cells * grid.dwell_cells(Mode::On)],
    ];
    let mut unlocked = [0u64; 2];
    for u in units {
        let i = u.mode.index();
        let m = params.min_dwell(u.mode);
        if !(u.dwell < m) {
            unlocked[i] += 1;
            continue;
        }
        let nd = grid.dwell_cells(u.mode);
        let dy = m / nd as f64;
        let k = ((u.dwell / dy).floor() as usize).min(nd - 1);
        let j = cell_of(&grid.temp_edges, u.temp).ok_or_else(|| out_of_grid(units, &grid.temp_edges))?;
        counts[i][j * nd + k] += 1;
    }
    let n = units.len().max(1) as f64;
    let masses = [Mode::Off, Mode::On].map(|mode| {
        let i = mode.index();
        let nd = grid.dwell_cells(mode);
        if nd == 0 {
            return Vec::new();
        }
        let dy = grid.dwell_edges[i][1] - grid.dwell_edges[i][0];
        counts[i]
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let j = idx / nd;
                let dx = grid.temp_edges[j + 1] - grid.temp_edges[j];
                c as f64 / (n * dx * dy)
            })
            .collect()
    });
    Ok(LockedDensityEstimate {
        grid: grid.clone(),
        masses,
        unlocked_fraction: [unlocked[0] as f64 / n, unlocked[1] as f64 / n],
        time: 0.0,
    })
}
