use serde::Serialize;

use super::FvmError;
use crate::model::{Mode, TclParams};

/// One of the four hybrid subdomains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Segment {
    /// off, below `t_min`
    OffA,
    /// off, inside the dead-band
    OffB,
    /// on, inside the dead-band
    OnB,
    /// on, above `t_max`
    OnC,
}

impl Segment {
    pub const ALL: [Segment; 4] = [Segment::OffA, Segment::OffB, Segment::OnB, Segment::OnC];

    pub fn mode(self) -> Mode {
        match self {
            Segment::OffA | Segment::OffB => Mode::Off,
            Segment::OnB | Segment::OnC => Mode::On,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Segment::OffA => "0a",
            Segment::OffB => "0b",
            Segment::OnB => "1b",
            Segment::OnC => "1c",
        }
    }
}

/// Uniform cell grid over the truncated hybrid state space.
///
/// All cells share one width `dx`. The off line runs `(left, t_max)` as the
/// cells of 0a then 0b; the on line runs `(t_min, right)` as 1b then 1c.
/// Flat state indices follow the order 0a, 0b, 1b, 1c.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub dx: f64,
    pub cells_per_band: usize,
    pub pad_cells_left: usize,
    pub pad_cells_right: usize,
    /// Achieved truncation bounds.
    pub left: f64,
    pub right: f64,
}

const ALIGN_TOL: f64 = 1e-9;

fn is_whole(x: f64) -> bool {
    (x - x.round()).abs() <= ALIGN_TOL * x.abs().max(1.0)
}

fn aligned(params: &TclParams, cells: usize) -> bool {
    let dx = params.band_width() / cells as f64;
    is_whole(params.delta_t0 / dx) && is_whole(params.delta_t1 / dx)
}

/// Uniform grid with masking boundaries on cell faces. Pads are rounded up to
/// whole cells.
pub fn build_grid(
    params: &TclParams,
    left_pad: f64,
    right_pad: f64,
    cells_per_band: usize,
) -> Result<HybridGrid, FvmError> {
    params.validate()?;
    if !(left_pad > 0.0 && right_pad > 0.0 && left_pad.is_finite() && right_pad.is_finite()) {
        return Err(FvmError::InvalidGrid(format!(
            "pads must be positive, got left={left_pad} right={right_pad}"
        )));
    }
    if cells_per_band < 3 {
        return Err(FvmError::InvalidGrid(format!(
            "need at least 3 cells per band, got {cells_per_band}"
        )));
    }
    if !aligned(params, cells_per_band) {
        let hint = (cells_per_band + 1..=cells_per_band * 100).find(|&c| aligned(params, c));
        return Err(FvmError::Alignment {
            cells_per_band,
            delta_t0: params.delta_t0,
            delta_t1: params.delta_t1,
            suggested: hint,
        });
    }
    let dx = params.band_width() / cells_per_band as f64;
    let pad_cells = |pad: f64| -> usize {
        let k = pad / dx;
        if is_whole(k) {
            k.round() as usize
        } else {
            k.ceil() as usize
        }
    };
    let pad_cells_left = pad_cells(left_pad);
    let pad_cells_right = pad_cells(right_pad);
    Ok(HybridGrid {
        t_min: params.t_min,
        t_max: params.t_max,
        dx,
        cells_per_band,
        pad_cells_left,
        pad_cells_right,
        left: params.t_min - pad_cells_left as f64 * dx,
        right: params.t_max + pad_cells_right as f64 * dx,
    })
}

impl HybridGrid {
    /// Same truncation bounds with `factor` times more cells per band.
    pub fn refined(&self, params: &TclParams, factor: usize) -> Result<HybridGrid, FvmError> {
        build_grid(
            params,
            self.t_min - self.left,
            self.right - self.t_max,
            self.cells_per_band * factor,
        )
    }

    pub fn segment_len(&self, seg: Segment) -> usize {
        match seg {
            Segment::OffA => self.pad_cells_left,
            Segment::OffB | Segment::OnB => self.cells_per_band,
            Segment::OnC => self.pad_cells_right,
        }
    }

    pub fn segment_offset(&self, seg: Segment) -> usize {
        let (a, b) = (self.pad_cells_left, self.cells_per_band);
        match seg {
            Segment::OffA => 0,
            Segment::OffB => a,
            Segment::OnB => a + b,
            Segment::OnC => a + 2 * b,
        }
    }

    /// Number of state entries.
    pub fn len(&self) -> usize {
        self.pad_cells_left + 2 * self.cells_per_band + self.pad_cells_right
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, seg: Segment, cell: usize) -> usize {
        debug_assert!(cell < self.segment_len(seg));
        self.segment_offset(seg) + cell
    }

    pub fn locate(&self, flat: usize) -> (Segment, usize) {
        for seg in Segment::ALL.iter().rev() {
            let off = self.segment_offset(*seg);
            if flat >= off && self.segment_len(*seg) > 0 {
                return (*seg, flat - off);
            }
        }
        unreachable!("flat index {flat} out of range")
    }

    /// Left edge of segment `seg` [K].
    pub fn segment_start(&self, seg: Segment) -> f64 {
        match seg {
            Segment::OffA => self.left,
            Segment::OffB | Segment::OnB => self.t_min,
            Segment::OnC => self.t_max,
        }
    }

    pub fn cell_center(&self, seg: Segment, cell: usize) -> f64 {
        self.segment_start(seg) + (cell as f64 + 0.5) * self.dx
    }

    /// Cells of one mode line, from its lower edge upwards.
    pub fn line_len(&self, mode: Mode) -> usize {
        match mode {
            Mode::Off => self.pad_cells_left + self.cells_per_band,
            Mode::On => self.cells_per_band + self.pad_cells_right,
        }
    }

    /// Flat index of the first cell of a mode line.
    pub fn line_offset(&self, mode: Mode) -> usize {
        match mode {
            Mode::Off => 0,
            Mode::On => self.segment_offset(Segment::OnB),
        }
    }

    pub fn line_start(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Off => self.left,
            Mode::On => self.t_min,
        }
    }

    /// Cells of the full temperature axis `(left, right)`.
    pub fn full_cells(&self) -> usize {
        self.pad_cells_left + self.cells_per_band + self.pad_cells_right
    }

    /// Edges of the full temperature axis; `t_min` and `t_max` are exact.
    pub fn full_edges(&self) -> Vec<f64> {
        let (a, b) = (self.pad_cells_left, self.cells_per_band);
        (0..=self.full_cells())
            .map(|k| {
                if k == a {
                    self.t_min
                } else if k == a + b {
                    self.t_max
                } else if k < a + b {
                    self.t_min + (k as f64 - a as f64) * self.dx
                } else {
                    self.t_max + (k - a - b) as f64 * self.dx
                }
            })
            .collect()
    }

    /// Full-axis cell offset of a mode line's first cell.
    pub fn line_full_offset(&self, mode: Mode) -> usize {
        match mode {
            Mode::Off => 0,
            Mode::On => self.pad_cells_left,
        }
    }

    /// Split a flat state into per-mode densities on the full axis, zero where
    /// a mode has no cells.
    pub fn to_full_axis(&self, values: &[f64]) -> [Vec<f64>; 2] {
        [Mode::Off, Mode::On].map(|mode| {
            let mut out = vec![0.0; self.full_cells()];
            let off = self.line_offset(mode);
            let full = self.line_full_offset(mode);
            let n = self.line_len(mode);
            out[full..full + n].copy_from_slice(&values[off..off + n]);
            out
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(dt: f64) -> TclParams {
        TclParams { delta_t0: dt, delta_t1: dt, ..TclParams::refrigerator() }
    }

    #[test]
    fn uniform_band_grid() {
        let g = build_grid(&params(0.6), 1.0, 1.0, 100).unwrap();
        assert!((g.dx - 0.03).abs() < 1e-15);
        let e = g.full_edges();
        assert_eq!(e[g.pad_cells_left], 2.0);
        assert_eq!(e[g.pad_cells_left + 100], 5.0);
        // pads of 1 K rounded up to whole cells
        assert_eq!(g.pad_cells_left, 34);
        assert!(g.left <= 1.0 && g.left > 1.0 - g.dx);
        assert!(g.right >= 6.0 && g.right < 6.0 + g.dx);
    }

    #[test]
    fn alignment_rule() {
        let p = params(0.5);
        match build_grid(&p, 1.0, 1.0, 100) {
            Err(FvmError::Alignment { suggested, .. }) => assert_eq!(suggested, Some(102)),
            other => panic!("expected alignment error, got {other:?}"),
        }
        let g = build_grid(&p, 1.0, 1.0, 120).unwrap();
        assert!((g.dx - 0.025).abs() < 1e-15);
        assert_eq!(g.pad_cells_left, 40);
        assert_eq!(g.left, 1.0);
        assert!((g.right - 6.0).abs() < 1e-12);
    }

    #[test]
    fn flat_indexing_is_bijective() {
        let g = build_grid(&params(0.5), 0.3, 0.7, 12).unwrap();
        let mut seen = vec![false; g.len()];
        for seg in Segment::ALL {
            for c in 0..g.segment_len(seg) {
                let i = g.index(seg, c);
                assert!(!seen[i]);
                seen[i] = true;
                assert_eq!(g.locate(i), (seg, c));
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn masking_boundaries_fall_on_faces() {
        let p = params(0.5);
        let g = build_grid(&p, 1.0, 1.0, 120).unwrap();
        let e = g.full_edges();
        for x in [p.t_min + p.delta_t1, p.t_max - p.delta_t0] {
            assert!(e.iter().any(|&f| (f - x).abs() < 1e-12), "{x} not on a face");
        }
    }

    #[test]
    fn rejects_bad_pads() {
        assert!(build_grid(&params(0.5), 0.0, 1.0, 120).is_err());
        assert!(build_grid(&params(0.5), 1.0, -1.0, 120).is_err());
    }

    #[test]
    fn refined_keeps_bounds() {
        let g = build_grid(&params(0.6), 1.0, 1.0, 100).unwrap();
        let f = g.refined(&params(0.6), 2).unwrap();
        assert_eq!(f.pad_cells_left, 2 * g.pad_cells_left);
        assert!((f.left - g.left).abs() < 1e-12);
        assert!((f.right - g.right).abs() < 1e-12);
    }
}
