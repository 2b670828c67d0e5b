//! A frictionless ideal-gas pipe carrying a right-moving wave, where the
//! exact solution is the initial profile shifted by `c t`.

use serde::Serialize;

use super::{l2_error, ConvergenceConfig, Location};
use crate::eos::EosModel;
use crate::error::{Error, Result};
use crate::pipe::{BoundaryValue, Pipe, PipeGeometry, PipeGrid, PipeState};

#[derive(Debug, Clone, PartialEq)]
pub struct TravelingWaveConfig {
    /// Pipe, initial profile and wave speed; the EoS is the ideal gas at `c_ref`.
    pub wave: ConvergenceConfig,
    /// Distance the wave travels, m.
    pub advance: f64,
    /// Cells on the coarse grid.
    pub cells: usize,
    pub cfl_safety: f64,
}

impl Default for TravelingWaveConfig {
    fn default() -> Self {
        let mut wave = ConvergenceConfig::default();
        wave.eos = EosModel::ideal(wave.c_ref);
        TravelingWaveConfig {
            wave,
            advance: 1000.0,
            cells: 100,
            cfl_safety: 0.9,
        }
    }
}

impl TravelingWaveConfig {
    pub fn travel_time(&self) -> f64 {
        self.advance / self.wave.c_ref
    }

    /// Steps and step size on a grid refined `refine` times; the coarse step
    /// count is the smallest one meeting `cfl_safety`.
    pub fn plan(&self, refine: usize) -> (usize, u64, f64) {
        let cells = self.cells * refine;
        let dx0 = self.wave.length / self.cells as f64;
        let steps0 = (self.travel_time() * self.wave.c_ref / (self.cfl_safety * dx0)).ceil() as u64;
        let steps = steps0 * refine as u64;
        (cells, steps, self.travel_time() / steps as f64)
    }

    pub fn pipe(&self, cells: usize, dt: f64) -> Result<Pipe> {
        let w = &self.wave;
        let geometry = PipeGeometry::new(w.length, w.diameter, 0.0)?;
        let grid = PipeGrid::new(w.length, cells)?;
        let rho = (0..cells).map(|i| w.density_ic(grid.cell_center(i))).collect();
        let phi = (0..=cells).map(|j| w.flux_wave(0.5 * dt, grid.face(j))).collect();
        Pipe::new("wave", geometry, grid, &w.eos, PipeState::new(rho, phi)?)
    }

    /// One step with the exact wave flux on both ends.
    pub fn step(&self, pipe: &mut Pipe, dt: f64, guarded: bool) -> Result<()> {
        if guarded {
            pipe.check_cfl(dt)?;
        }
        let t_half = (pipe.state.step as f64 + 0.5) * dt;
        let w = &self.wave;
        pipe.step(
            BoundaryValue::Flux(w.flux_wave(t_half, 0.0)),
            BoundaryValue::Flux(w.flux_wave(t_half, w.length)),
            dt,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveError {
    pub cells: usize,
    pub steps: u64,
    pub dt: f64,
    /// `sqrt(int (u - u_exact)^2 dx)` after the wave has travelled.
    pub rho: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TravelingWaveReport {
    pub coarse: WaveError,
    pub fine: WaveError,
    pub rho_ratio: f64,
    pub phi_ratio: f64,
}

pub fn wave_error(cfg: &TravelingWaveConfig, refine: usize) -> Result<WaveError> {
    let (cells, steps, dt) = cfg.plan(refine);
    let mut pipe = cfg.pipe(cells, dt)?;
    for _ in 0..steps {
        cfg.step(&mut pipe, dt, true)?;
    }
    let t = cfg.travel_time();
    let w = &cfg.wave;
    let g = &pipe.grid;
    let rho_exact: Vec<f64> = (0..cells)
        .map(|i| w.density_ic(g.cell_center(i) - w.c_ref * t))
        .collect();
    // the flux layer trails by half a step
    let phi_exact: Vec<f64> = (0..=cells).map(|j| w.flux_wave(t - 0.5 * dt, g.face(j))).collect();
    Ok(WaveError {
        cells,
        steps,
        dt,
        rho: l2_error(&pipe.state.rho, &rho_exact, g.dx, Location::Centers)?.sqrt(),
        phi: l2_error(&pipe.state.phi, &phi_exact, g.dx, Location::Faces)?.sqrt(),
    })
}

/// Errors on the coarse grid and on the grid refined by `refine` in both
/// `dx` and `dt`.
pub fn run_traveling_wave(cfg: &TravelingWaveConfig, refine: usize) -> Result<TravelingWaveReport> {
    if refine < 2 {
        return Err(Error::domain("refinement factor must be at least 2"));
    }
    let coarse = wave_error(cfg, 1)?;
    let fine = wave_error(cfg, refine)?;
    Ok(TravelingWaveReport {
        rho_ratio: coarse.rho / fine.rho,
        phi_ratio: coarse.phi / fine.phi,
        coarse,
        fine,
    })
}

/// Runs the coarse wave at `courant * dx / sqrt(P'(rho_max))` for up to
/// `max_steps` steps and returns how many completed.
pub fn run_at_courant(cfg: &TravelingWaveConfig, courant: f64, guarded: bool, max_steps: u64) -> Result<u64> {
    let (cells, _, _) = cfg.plan(1);
    let probe = cfg.pipe(cells, 0.0)?;
    let rho_max = probe.state.rho.iter().copied().fold(0.0, f64::max);
    let c2 = (0..cells)
        .map(|i| probe.eos.at(i).wave_speed_sq(rho_max))
        .fold(0.0, f64::max);
    let dt = courant * probe.grid.dx / c2.sqrt();
    let mut pipe = cfg.pipe(cells, dt)?;
    for n in 0..max_steps {
        if let Err(e) = cfg.step(&mut pipe, dt, guarded) {
            log::debug!("stopped after {n} steps: {e}");
            return Err(e);
        }
    }
    Ok(max_steps)
}
