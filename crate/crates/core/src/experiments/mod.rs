//! Canned scenarios: grid-convergence study, single-pipe transients and the
//! five-node network, plus the error and mass bookkeeping they report.

pub mod convergence;
pub mod five_node;
pub mod single_pipe;
pub mod traveling_wave;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::NeumaierSum;

pub use convergence::{run_convergence_study, ComparisonTime, ConvergenceConfig, ConvergenceReport};
pub use five_node::{
    five_node_network, network_step_plan, run_five_node_network, run_network, run_network_observed, FiveNodeConfig,
    FiveNodeReport, NetworkRun, NetworkSeries,
};
pub use single_pipe::{
    run_fast_transient, run_slow_transient, run_temperature_effect, EosChoice, FastTransientConfig, PipeSeries,
    Resolution, SlowTransientConfig, SlowTransientReport, TemperatureConfig,
};
pub use traveling_wave::{run_at_courant, run_traveling_wave, TravelingWaveConfig, TravelingWaveReport, WaveError};

/// Where the samples of a field sit on the pipe grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    /// `N` cell centres at `(i + 1/2) dx`.
    Centers,
    /// `N + 1` faces at `j dx`, ends included.
    Faces,
}

/// Samples of `fine` that coincide with the points of a coarser grid nested
/// by an odd refinement ratio (3, 9, 27, ...), or the field itself when the
/// grids match.
pub fn restrict(fine: &[f64], coarse_len: usize, loc: Location) -> Result<Vec<f64>> {
    if fine.len() == coarse_len {
        return Ok(fine.to_vec());
    }
    let incompatible = || {
        Error::IncompatibleGrids(format!(
            "cannot restrict {} {:?} samples to {}",
            fine.len(),
            loc,
            coarse_len
        ))
    };
    let (fine_cells, coarse_cells) = match loc {
        Location::Centers => (fine.len(), coarse_len),
        Location::Faces => (fine.len().saturating_sub(1), coarse_len.saturating_sub(1)),
    };
    if coarse_cells == 0 || fine_cells % coarse_cells != 0 {
        return Err(incompatible());
    }
    let ratio = fine_cells / coarse_cells;
    if ratio % 2 == 0 {
        return Err(incompatible());
    }
    Ok(match loc {
        Location::Centers => (0..coarse_len).map(|i| fine[ratio * i + ratio / 2]).collect(),
        Location::Faces => (0..coarse_len).map(|j| fine[ratio * j]).collect(),
    })
}

/// `integral (a - b)^2 dx` by the grid quadrature of the coarser field.
///
/// `dx` is the spacing of the coarser field. When the lengths differ the
/// finer field is restricted to the coincident points first.
/// Face samples use the trapezoid rule; cell-centre samples the midpoint rule,
/// which is the trapezoid rule on the staggered cells.
pub fn l2_error(a: &[f64], b: &[f64], dx: f64, loc: Location) -> Result<f64> {
    let (coarse, fine) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if coarse.is_empty() {
        return Err(Error::IncompatibleGrids("empty field".into()));
    }
    let fine = restrict(fine, coarse.len(), loc)?;
    let d2 = coarse.iter().zip(&fine).map(|(x, y)| (x - y) * (x - y));
    let n = coarse.len();
    let sum: f64 = match loc {
        Location::Centers => d2.sum(),
        Location::Faces => d2
            .enumerate()
            .map(|(j, v)| if j == 0 || j + 1 == n { 0.5 * v } else { v })
            .sum(),
    };
    Ok(sum * dx)
}

/// Observed order `log(e_coarse / e_fine) / log(ratio^steps)`.
pub fn observed_rate(e_coarse: f64, e_fine: f64, ratio: f64, steps: usize) -> f64 {
    (e_coarse / e_fine).ln() / (steps as f64 * ratio.ln())
}

/// One row of a mass ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub t: f64,
    /// kg in all pipes.
    pub mass: f64,
    /// kg that entered through pipe ends since the start.
    pub throughput: f64,
    /// `mass - mass(0) - throughput`, kg.
    pub discrepancy: f64,
}

/// Running account of stored mass against boundary throughput.
#[derive(Debug, Clone, Default, Serialize)]
pub struct MassLedger {
    pub entries: Vec<LedgerEntry>,
    #[serde(skip)]
    initial: f64,
    #[serde(skip)]
    inflow: NeumaierSum,
}

impl MassLedger {
    pub fn new(t0: f64, mass0: f64) -> Self {
        MassLedger {
            entries: vec![LedgerEntry {
                t: t0,
                mass: mass0,
                throughput: 0.0,
                discrepancy: 0.0,
            }],
            initial: mass0,
            inflow: NeumaierSum::default(),
        }
    }

    /// Adds `dt * inflow_rate` (kg/s) to the throughput.
    pub fn accumulate(&mut self, dt: f64, inflow_rate: f64) {
        self.inflow.add(dt * inflow_rate);
    }

    pub fn discrepancy(&self, mass: f64) -> f64 {
        mass - self.initial - self.inflow.value()
    }

    pub fn record(&mut self, t: f64, mass: f64) -> LedgerEntry {
        let entry = LedgerEntry {
            t,
            mass,
            throughput: self.inflow.value(),
            discrepancy: self.discrepancy(mass),
        };
        self.entries.push(entry);
        entry
    }

    pub fn max_abs_discrepancy(&self) -> f64 {
        self.entries.iter().map(|e| e.discrepancy.abs()).fold(0.0, f64::max)
    }

    /// Largest `|discrepancy| / mass` over the entries.
    pub fn max_relative_discrepancy(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.discrepancy.abs() / e.mass)
            .fold(0.0, f64::max)
    }
}

/// Root-mean-square of `a - b`.
pub fn rms_difference(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64).sqrt()
}
