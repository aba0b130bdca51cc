//! Coordinate-format operator files and grid manifest.
//!
//! Each operator is written as `row,col,value` lines after a header, indices
//! zero-based in the flat 0a, 0b, 1b, 1c order described by `grid.json`.
//! Values use the shortest round-trip decimal representation.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::Serialize;

use super::grid::{HybridGrid, Segment};
use super::{BilinearModel, PdfState};
use crate::model::{Mode, TclParams};

pub const FORMAT_VERSION: &str = "tclsim-coo/1";

#[derive(Debug, Serialize)]
struct SegmentInfo {
    name: &'static str,
    mode: Mode,
    offset: usize,
    cells: usize,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Serialize)]
struct GridManifest<'a> {
    format: &'static str,
    states: usize,
    dx: f64,
    cells_per_band: usize,
    left: f64,
    right: f64,
    segments: Vec<SegmentInfo>,
    params: &'a TclParams,
    operators: [&'static str; 3],
    equation: &'static str,
}

pub fn write_coo(path: &Path, m: &CsrMatrix<f64>) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "row,col,value")?;
    for (r, c, v) in m.triplet_iter() {
        writeln!(w, "{r},{c},{v:e}")?;
    }
    w.flush()
}

/// Read a file written by [`write_coo`] into an `n x n` matrix.
pub fn read_coo(path: &Path, n: usize) -> io::Result<CsrMatrix<f64>> {
    let bad = |line: usize, what: &str| {
        io::Error::new(io::ErrorKind::InvalidData, format!("{}:{line}: {what}", path.display()))
    };
    let reader = BufReader::new(fs::File::open(path)?);
    let mut coo = CooMatrix::new(n, n);
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if k == 0 {
            if line.trim() != "row,col,value" {
                return Err(bad(1, "missing header"));
            }
            continue;
        }
        let mut parts = line.split(',');
        let (Some(r), Some(c), Some(v), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad(k + 1, "expected three fields"));
        };
        let r: usize = r.trim().parse().map_err(|_| bad(k + 1, "bad row"))?;
        let c: usize = c.trim().parse().map_err(|_| bad(k + 1, "bad col"))?;
        let v: f64 = v.trim().parse().map_err(|_| bad(k + 1, "bad value"))?;
        if r >= n || c >= n {
            return Err(bad(k + 1, "index out of range"));
        }
        coo.push(r, c, v);
    }
    Ok(CsrMatrix::from(&coo))
}

pub fn write_grid_manifest(path: &Path, grid: &HybridGrid, params: &TclParams) -> io::Result<()> {
    let segments = Segment::ALL
        .iter()
        .map(|&s| {
            let lower = grid.segment_start(s);
            SegmentInfo {
                name: s.label(),
                mode: s.mode(),
                offset: grid.segment_offset(s),
                cells: grid.segment_len(s),
                lower,
                upper: lower + grid.segment_len(s) as f64 * grid.dx,
            }
        })
        .collect();
    let manifest = GridManifest {
        format: FORMAT_VERSION,
        states: grid.len(),
        dx: grid.dx,
        cells_per_band: grid.cells_per_band,
        left: grid.left,
        right: grid.right,
        segments,
        params,
        operators: ["A.csv", "B0.csv", "B1.csv"],
        equation: "dF/dt = (A + B0*eps0 + B1*eps1) F, F in probability per kelvin",
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Write `A.csv`, `B0.csv`, `B1.csv` and `grid.json` into `dir`.
pub fn export_operators(model: &BilinearModel, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (name, m) in [("A.csv", &model.a), ("B0.csv", &model.b0), ("B1.csv", &model.b1)] {
        let p = dir.join(name);
        write_coo(&p, m)?;
        out.push(p);
    }
    let p = dir.join("grid.json");
    write_grid_manifest(&p, &model.grid, &model.params)?;
    out.push(p);
    Ok(out)
}

/// Density snapshot as `cell_center,f0,f1` on the full temperature axis.
pub fn write_density(path: &Path, grid: &HybridGrid, state: &PdfState) -> io::Result<()> {
    let [f0, f1] = grid.to_full_axis(&state.values);
    let edges = grid.full_edges();
    write_histogram(path, &edges, &f0, &f1)
}

/// Shared histogram layout for both backends.
pub fn write_histogram(path: &Path, edges: &[f64], f0: &[f64], f1: &[f64]) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "cell_center,f0,f1")?;
    for k in 0..f0.len() {
        let c = 0.5 * (edges[k] + edges[k + 1]);
        writeln!(w, "{c:.6},{:.9e},{:.9e}", f0[k], f1[k])?;
    }
    w.flush()
}
