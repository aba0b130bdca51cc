//! Face fluxes and thermostat transfer rates of a discrete state.

use serde::Serialize;

use super::assemble::{absorbed_outflow, mode_line};
use super::{BilinearModel, FvmError, PdfState};
use crate::model::Mode;

/// Flux through each face of one mode line [1/s].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxField {
    pub mode: Mode,
    pub faces: Vec<f64>,
    pub advective: Vec<f64>,
    pub diffusive: Vec<f64>,
}

/// Thermostat transfer rates of a state [1/s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermostatFlows {
    /// Mass per second leaving 0b at `t_max`.
    pub absorbed_off: f64,
    /// Mass per second leaving 1b at `t_min`.
    pub absorbed_on: f64,
    /// Rate of change of the injection cells due to the thermostat coupling.
    pub injected_on: f64,
    pub injected_off: f64,
}

pub fn flux_diagnostics(
    model: &BilinearModel,
    state: &PdfState,
) -> Result<([FluxField; 2], ThermostatFlows), FvmError> {
    let grid = &model.grid;
    if state.values.len() != grid.len() {
        return Err(FvmError::Dimension { got: state.values.len(), want: grid.len() });
    }
    let mut absorbed = [0.0; 2];
    let fields = [Mode::Off, Mode::On].map(|mode| {
        let line = mode_line(grid, &model.params, mode);
        let off = grid.line_offset(mode);
        let cells = &state.values[off..off + line.n];
        let faces = line.faces();
        absorbed[mode.index()] = absorbed_outflow(&line, &faces)
            .into_iter()
            .map(|(i, c)| c * cells[i])
            .sum();
        let part = |terms: &[(usize, f64)]| terms.iter().map(|&(i, c)| c * cells[i]).sum::<f64>();
        let advective: Vec<f64> = faces.iter().map(|f| part(&f.advective)).collect();
        let diffusive: Vec<f64> = faces.iter().map(|f| part(&f.diffusive)).collect();
        FluxField {
            mode,
            faces: advective.iter().zip(&diffusive).map(|(a, d)| a + d).collect(),
            advective,
            diffusive,
        }
    });
    let inj_on = super::assemble::injection_cell(grid, Mode::Off);
    let inj_off = super::assemble::injection_cell(grid, Mode::On);
    let coupling = |row: usize, mode: Mode| -> f64 {
        let lo = grid.line_offset(mode);
        let hi = lo + grid.line_len(mode);
        let r = model.a.row(row);
        r.col_indices()
            .iter()
            .zip(r.values())
            .filter(|(&c, _)| c >= lo && c < hi)
            .map(|(&c, &v)| v * state.values[c])
            .sum::<f64>()
            * grid.dx
    };
    Ok((
        fields,
        ThermostatFlows {
            absorbed_off: absorbed[0],
            absorbed_on: absorbed[1],
            injected_on: coupling(inj_on, Mode::Off),
            injected_off: coupling(inj_off, Mode::On),
        },
    ))
}

/// Net flux through each face of the full temperature axis, both modes
/// summed. Thermostat transfers count as crossing the face they leave by.
pub fn net_axis_flux(grid: &super::HybridGrid, fields: &[FluxField; 2]) -> Vec<f64> {
    let mut net = vec![0.0; grid.full_cells() + 1];
    for field in fields {
        let off = grid.line_full_offset(field.mode);
        for (f, &j) in field.faces.iter().enumerate() {
            net[off + f] += j;
        }
    }
    net
}
