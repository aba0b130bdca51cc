//! Operator assembly for the coupled Fokker-Planck system.
//!
//! Each mode is a line of uniform cells carrying the probability flux
//! `J = u f - d/dx (sigma^2/2 f)`. Advective face values come from the
//! upstream quadratic reconstruction, the diffusive part from a two-point
//! difference of `D f` with `D = sigma^2/2` at cell centers.
//!
//! Thermostat faces are absorbing (`f = 0` on the face): the outflow there is
//! the upwind advective flux plus the diffusive flux to a zero ghost half a
//! cell away. Whatever leaves 0b at `t_max` is injected into the first cell
//! of 1c; whatever leaves 1b at `t_min` is injected into the last cell of 0a.
//! Outer truncation faces carry no flux.

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::grid::{HybridGrid, Segment};
use super::reconstruct::upwind_stencil;
use crate::model::{diffusion, drift, masked_rate, Mode, SwitchDirection, TclParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineBoundary {
    ZeroFlux,
    Absorbing,
    Periodic,
}

/// Flux through one face as a linear form over the line's cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaceFlux {
    pub advective: Vec<(usize, f64)>,
    pub diffusive: Vec<(usize, f64)>,
}

impl FaceFlux {
    pub fn terms(&self) -> impl Iterator<Item = &(usize, f64)> {
        self.advective.iter().chain(self.diffusive.iter())
    }

    pub fn eval(&self, cells: &[f64]) -> f64 {
        self.terms().map(|&(i, c)| c * cells[i]).sum()
    }
}

/// A line of `n` uniform cells starting at `x0` for one mode.
#[derive(Debug, Clone, Copy)]
pub struct LineSpec<'a> {
    pub params: &'a TclParams,
    pub mode: Mode,
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
    pub left: LineBoundary,
    pub right: LineBoundary,
}

impl LineSpec<'_> {
    fn periodic(&self) -> bool {
        self.left == LineBoundary::Periodic || self.right == LineBoundary::Periodic
    }

    pub fn face_x(&self, f: usize) -> f64 {
        self.x0 + f as f64 * self.dx
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    fn half_sigma_sq(&self, i: usize) -> f64 {
        let s = diffusion(self.params, self.mode, self.center(i), 0.0);
        0.5 * s * s
    }

    pub fn velocity(&self, f: usize) -> f64 {
        drift(self.params, self.mode, self.face_x(f), 0.0)
    }

    /// Fluxes through faces `0..=n`. On a periodic line face `n` repeats face 0.
    pub fn faces(&self) -> Vec<FaceFlux> {
        (0..=self.n).map(|f| self.face(f)).collect()
    }

    fn face(&self, f: usize) -> FaceFlux {
        let n = self.n;
        if self.periodic() {
            return self.interior_face(f % n);
        }
        if f == 0 || f == n {
            let bc = if f == 0 { self.left } else { self.right };
            return match bc {
                LineBoundary::ZeroFlux | LineBoundary::Periodic => FaceFlux::default(),
                LineBoundary::Absorbing => self.absorbing_face(f),
            };
        }
        self.interior_face(f)
    }

    /// Face `f` between cells `f-1` and `f` (wrapping on a periodic line).
    fn interior_face(&self, f: usize) -> FaceFlux {
        let n = self.n as isize;
        let periodic = self.periodic();
        let u = self.velocity(f);
        let (left_avail, right_avail) = if periodic {
            (self.n, self.n)
        } else {
            (f, self.n - f)
        };
        let cell = |off: isize| -> usize { (f as isize + off).rem_euclid(n) as usize };
        let advective = if u == 0.0 {
            Vec::new()
        } else {
            upwind_stencil(left_avail, right_avail, u)
                .into_iter()
                .map(|(off, w)| (cell(off), u * w))
                .collect()
        };
        let (l, r) = (cell(-1), cell(0));
        let mut diffusive = Vec::new();
        let (dl, dr) = (self.half_sigma_sq(l), self.half_sigma_sq(r));
        if dl != 0.0 || dr != 0.0 {
            diffusive.push((r, -dr / self.dx));
            diffusive.push((l, dl / self.dx));
        }
        FaceFlux { advective, diffusive }
    }

    fn absorbing_face(&self, f: usize) -> FaceFlux {
        let u = self.velocity(f);
        let (cell, outward) = if f == 0 { (0, -1.0) } else { (self.n - 1, 1.0) };
        let d = self.half_sigma_sq(cell);
        // upwind: only an outward flow carries the interior value
        let adv = if u * outward > 0.0 { u } else { 0.0 };
        let mut out = FaceFlux::default();
        if adv != 0.0 {
            out.advective.push((cell, adv));
        }
        if d != 0.0 {
            out.diffusive.push((cell, outward * 2.0 * d / self.dx));
        }
        out
    }

    /// Cell-update triplets `(row, col, value)` in local indices.
    pub fn triplets(&self, faces: &[FaceFlux]) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        let n = self.n;
        let inv = 1.0 / self.dx;
        for (f, flux) in faces.iter().enumerate() {
            let (left, right) = if self.periodic() {
                if f == n {
                    continue;
                }
                (Some((f + n - 1) % n), Some(f))
            } else {
                ((f >= 1).then(|| f - 1), (f < n).then_some(f))
            };
            for &(i, c) in flux.terms() {
                if let Some(l) = left {
                    t.push((l, i, -c * inv));
                }
                if let Some(r) = right {
                    t.push((r, i, c * inv));
                }
            }
        }
        t
    }

    pub fn max_speed(&self) -> f64 {
        (0..=self.n).map(|f| self.velocity(f).abs()).fold(0.0, f64::max)
    }

    pub fn max_sigma(&self) -> f64 {
        (0..self.n)
            .map(|i| diffusion(self.params, self.mode, self.center(i), 0.0).abs())
            .fold(0.0, f64::max)
    }
}

/// The two mode lines of a hybrid grid.
pub fn mode_line<'a>(grid: &HybridGrid, params: &'a TclParams, mode: Mode) -> LineSpec<'a> {
    let (left, right) = match mode {
        Mode::Off => (LineBoundary::ZeroFlux, LineBoundary::Absorbing),
        Mode::On => (LineBoundary::Absorbing, LineBoundary::ZeroFlux),
    };
    LineSpec {
        params,
        mode,
        x0: grid.line_start(mode),
        dx: grid.dx,
        n: grid.line_len(mode),
        left,
        right,
    }
}

/// Flat index receiving the mass absorbed at the thermostat face of `mode`.
pub fn injection_cell(grid: &HybridGrid, mode: Mode) -> usize {
    match mode {
        Mode::Off => grid.index(Segment::OnC, 0),
        Mode::On => grid.index(Segment::OffA, grid.pad_cells_left - 1),
    }
}

/// Outflow rate at the thermostat face of `mode` as a linear form over
/// that line's local cells (non-negative coefficients).
pub fn absorbed_outflow(line: &LineSpec, faces: &[FaceFlux]) -> Vec<(usize, f64)> {
    match line.mode {
        Mode::Off => faces[line.n].terms().copied().collect(),
        Mode::On => faces[0].terms().map(|&(i, c)| (i, -c)).collect(),
    }
}

pub fn to_csr(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for &(r, c, v) in triplets {
        coo.push(r, c, v);
    }
    CsrMatrix::from(&coo)
}

/// Unactuated operator `A`.
pub fn assemble_a(grid: &HybridGrid, params: &TclParams) -> CsrMatrix<f64> {
    let mut t = Vec::new();
    for mode in [Mode::Off, Mode::On] {
        let line = mode_line(grid, params, mode);
        let faces = line.faces();
        let off = grid.line_offset(mode);
        t.extend(line.triplets(&faces).into_iter().map(|(r, c, v)| (r + off, c + off, v)));
        let inject = injection_cell(grid, mode);
        for (i, c) in absorbed_outflow(&line, &faces) {
            t.push((inject, i + off, c / grid.dx));
        }
    }
    to_csr(grid.len(), &t)
}

/// Rate-switch operator for unit rate control: `B1` for `SwitchDirection::On`
/// (0b -> 1b), `B0` for `SwitchDirection::Off` (1b -> 0b). Only safe-zone
/// cells appear.
pub fn assemble_b(grid: &HybridGrid, params: &TclParams, direction: SwitchDirection) -> CsrMatrix<f64> {
    let (from, to) = match direction {
        SwitchDirection::On => (Segment::OffB, Segment::OnB),
        SwitchDirection::Off => (Segment::OnB, Segment::OffB),
    };
    let mut t = Vec::new();
    for k in 0..grid.cells_per_band {
        let x = grid.cell_center(from, k);
        // faces align with the zone edges, so the center decides for the whole cell
        let rate = masked_rate(1.0, x, direction, params).unwrap_or(0.0);
        if rate > 0.0 {
            let (j, m) = (grid.index(from, k), grid.index(to, k));
            t.push((j, j, -rate));
            t.push((m, j, rate));
        }
    }
    to_csr(grid.len(), &t)
}

/// Per-column `(sum, sum of magnitudes)`.
pub fn column_sums(m: &CsrMatrix<f64>) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); m.ncols()];
    for (_, c, &v) in m.triplet_iter() {
        out[c].0 += v;
        out[c].1 += v.abs();
    }
    out
}

/// Largest `|column sum|`, optionally relative to the column's magnitude sum.
pub fn max_column_sum(m: &CsrMatrix<f64>, relative: bool) -> f64 {
    column_sums(m)
        .into_iter()
        .map(|(s, norm)| {
            if relative && norm > 0.0 {
                s.abs() / norm
            } else {
                s.abs()
            }
        })
        .fold(0.0, f64::max)
}
