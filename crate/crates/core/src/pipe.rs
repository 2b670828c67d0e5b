//! Single-pipe staggered-grid solver.
//!
//! Layout: the pipe `[0, L]` is split into `N` cells of width `dx`. Densities
//! live at cell centres `x_i = (i + 1/2) dx`, `i = 0..N`, on integer time
//! layers `t_n`. Mass fluxes live on the `N + 1` faces `x_j = j dx`, `j = 0..=N`,
//! on half layers `t_{n+1/2}`; faces `0` and `N` are the pipe ends.
//!
//! One step advances `(rho^n, phi^{n-1/2})` to `(rho^{n+1}, phi^{n+1/2})` in
//! three sub-steps:
//!
//! 1. [`interior_flux_update`]: momentum balance on faces `1..N`, with the
//!    Darcy-Weisbach term treated by the exact pointwise inverse
//!    [`friction_invert`];
//! 2. boundary faces, either assigned (flux BC) or back-solved from the
//!    continuity equation so that the end cell lands on a target density
//!    ([`boundary_flux_from_density`]);
//! 3. [`density_update`]: the discrete continuity equation, which conserves
//!    `sum(rho) dx` up to the boundary fluxes exactly.

use std::f64::consts::PI;

use crate::eos::{EosModel, LocalEos};
use crate::error::{Error, Result};
use crate::profiles::TimeProfile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeGeometry {
    pub length: f64,
    pub diameter: f64,
    /// Darcy friction factor.
    pub friction: f64,
}

impl PipeGeometry {
    pub fn new(length: f64, diameter: f64, friction: f64) -> Result<Self> {
        if !(length > 0.0) || !(diameter > 0.0) || !(friction >= 0.0) {
            return Err(Error::domain(format!(
                "pipe needs positive length and diameter and non-negative friction \
                 (L = {length}, D = {diameter}, lambda = {friction})"
            )));
        }
        Ok(PipeGeometry {
            length,
            diameter,
            friction,
        })
    }

    pub fn area(&self) -> f64 {
        PI * self.diameter * self.diameter / 4.0
    }

    /// `lambda / (2 D)`, 1/m.
    pub fn beta(&self) -> f64 {
        self.friction / (2.0 * self.diameter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeGrid {
    pub cells: usize,
    pub dx: f64,
}

impl PipeGrid {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::domain(format!("a pipe needs at least 2 cells, got {cells}")));
        }
        Ok(PipeGrid {
            cells,
            dx: length / cells as f64,
        })
    }

    /// Grid whose spacing is as close as possible to `dx_target` while
    /// matching `length` exactly.
    pub fn from_target(length: f64, dx_target: f64) -> Result<Self> {
        if !(dx_target > 0.0) {
            return Err(Error::domain(format!("dx target must be positive, got {dx_target}")));
        }
        let cells = ((length / dx_target).round() as usize).max(2);
        Self::new(length, cells)
    }

    pub fn length(&self) -> f64 {
        self.dx * self.cells as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn face(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }
}

/// The equation of state sampled at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub enum CellEos {
    Uniform(LocalEos),
    PerCell(Vec<LocalEos>),
}

impl CellEos {
    pub fn sample(model: &EosModel, grid: &PipeGrid) -> Result<Self> {
        if model.is_isothermal() {
            Ok(CellEos::Uniform(model.local_at(0.0)?))
        } else {
            (0..grid.cells)
                .map(|i| model.local_at(grid.cell_center(i)))
                .collect::<Result<Vec<_>>>()
                .map(CellEos::PerCell)
        }
    }

    #[inline]
    pub fn at(&self, i: usize) -> &LocalEos {
        match self {
            CellEos::Uniform(e) => e,
            CellEos::PerCell(v) => &v[i],
        }
    }
}

/// Staggered unknowns of one pipe.
#[derive(Debug, Clone, PartialEq)]
pub struct PipeState {
    /// Cell densities at `time`, kg/m^3.
    pub rho: Vec<f64>,
    /// Face fluxes, kg/(m^2 s): at `time - dt/2` after a completed step, or at
    /// `time + dt/2` while `primed`.
    pub phi: Vec<f64>,
    pub step: u64,
    pub time: f64,
    /// Interior fluxes already sit on the next half layer (initial data); the
    /// next step skips the interior flux update.
    pub primed: bool,
}

impl PipeState {
    /// Initial data: densities at `t = 0`, fluxes at `t = dt/2`.
    pub fn new(rho: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if rho.len() < 2 || phi.len() != rho.len() + 1 {
            return Err(Error::domain(format!(
                "state needs N >= 2 densities and N + 1 fluxes (got {} and {})",
                rho.len(),
                phi.len()
            )));
        }
        if let Some((i, &r)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::PositivityLoss {
                pipe: String::new(),
                cell: i,
                step: 0,
                value: r,
            });
        }
        Ok(PipeState {
            rho,
            phi,
            step: 0,
            time: 0.0,
            primed: true,
        })
    }

    pub fn uniform(cells: usize, rho: f64, phi: f64) -> Result<Self> {
        Self::new(vec![rho; cells], vec![phi; cells + 1])
    }

    pub fn cells(&self) -> usize {
        self.rho.len()
    }
}

/// Exact inverse of `F(x) = x (1 + a |x|)` for `a >= 0`.
pub fn friction_invert(y: f64, a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::domain(format!("friction coefficient must be >= 0, got {a}")));
    }
    Ok(invert_friction(y, a))
}

/// `sign(y) 2|y| / (1 + sqrt(1 + 4 a |y|))`: the positive root of the
/// quadratic, rationalized so that `a = 0` and tiny `a|y|` are exact.
#[inline]
pub(crate) fn invert_friction(y: f64, a: f64) -> f64 {
    2.0 * y / (1.0 + (1.0 + 4.0 * a * y.abs()).sqrt())
}

/// Momentum update on faces `1..N` (sub-step 1).
pub fn interior_flux_update(
    state: &mut PipeState,
    geom: &PipeGeometry,
    grid: &PipeGrid,
    eos: &CellEos,
    dt: f64,
) -> Result<()> {
    if state.primed {
        state.primed = false;
        return Ok(());
    }
    let ratio = dt / grid.dx;
    let beta_dt = geom.beta() * dt;
    let rho = &state.rho;
    let phi = &mut state.phi;
    let mut p_left = eos.at(0).pressure(rho[0]);
    for j in 1..rho.len() {
        let p_right = eos.at(j).pressure(rho[j]);
        let a = beta_dt / (rho[j - 1] + rho[j]);
        let f = phi[j];
        let y = f - ratio * (p_right - p_left) - a * f * f.abs();
        let x = invert_friction(y, a);
        if !x.is_finite() {
            return Err(Error::Unstable {
                pipe: String::new(),
                face: j,
                step: state.step,
            });
        }
        phi[j] = x;
        p_left = p_right;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

/// Boundary-face flux that makes the end cell reach `rho_target` after the
/// density update, given the adjacent interior face flux.
#[inline]
pub fn boundary_flux_value(side: Side, phi_adjacent: f64, rho_target: f64, rho_now: f64, dx: f64, dt: f64) -> f64 {
    let jump = dx / dt * (rho_target - rho_now);
    match side {
        Side::Left => phi_adjacent + jump,
        Side::Right => phi_adjacent - jump,
    }
}

/// Sets and returns the boundary face flux for a density target (sub-step 2).
pub fn boundary_flux_from_density(state: &mut PipeState, grid: &PipeGrid, side: Side, rho_target: f64, dt: f64) -> f64 {
    let n = state.cells();
    let (face, adjacent, cell) = match side {
        Side::Left => (0, 1, 0),
        Side::Right => (n, n - 1, n - 1),
    };
    let value = boundary_flux_value(side, state.phi[adjacent], rho_target, state.rho[cell], grid.dx, dt);
    state.phi[face] = value;
    value
}

/// Continuity update on all cells (sub-step 3); advances the step counter.
pub fn density_update(state: &mut PipeState, grid: &PipeGrid, dt: f64) -> Result<()> {
    let ratio = dt / grid.dx;
    let phi = &state.phi;
    for (i, rho) in state.rho.iter_mut().enumerate() {
        let next = *rho - ratio * (phi[i + 1] - phi[i]);
        if !(next > 0.0) || !next.is_finite() {
            return Err(Error::PositivityLoss {
                pipe: String::new(),
                cell: i,
                step: state.step + 1,
                value: next,
            });
        }
        *rho = next;
    }
    state.step += 1;
    state.time = state.step as f64 * dt;
    Ok(())
}

/// Largest stable step `safety dx / max_i sqrt(P'(rho_i))`.
pub fn cfl_max_dt(state: &PipeState, grid: &PipeGrid, eos: &CellEos, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::domain(format!("CFL safety must lie in (0, 1], got {safety}")));
    }
    // every supported map has P' non-increasing in rho, so a uniform map
    // attains its maximum at the smallest density
    let c2 = match eos {
        CellEos::Uniform(e) => e.wave_speed_sq(state.rho.iter().copied().fold(f64::INFINITY, f64::min)),
        CellEos::PerCell(v) => state
            .rho
            .iter()
            .zip(v)
            .map(|(&r, e)| e.wave_speed_sq(r))
            .fold(0.0f64, f64::max),
    };
    Ok(safety * grid.dx / c2.sqrt())
}

/// Mass held in the pipe, kg.
pub fn total_mass(state: &PipeState, geom: &PipeGeometry, grid: &PipeGrid) -> f64 {
    geom.area() * grid.dx * state.rho.iter().sum::<f64>()
}

/// Boundary value for one pipe end, already evaluated at the right time
/// (half layer for fluxes, next integer layer for densities and pressures).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryValue {
    Flux(f64),
    Density(f64),
    Pressure(f64),
}

impl BoundaryValue {
    pub fn value(&self) -> f64 {
        match *self {
            BoundaryValue::Flux(v) | BoundaryValue::Density(v) | BoundaryValue::Pressure(v) => v,
        }
    }
}

/// Time-dependent boundary data for one pipe end.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    /// Mass flux, kg/(m^2 s), evaluated on half layers.
    Flux(TimeProfile),
    /// Density, kg/m^3, evaluated on integer layers.
    Density(TimeProfile),
    /// Pressure, Pa, evaluated on integer layers.
    Pressure(TimeProfile),
}

impl BoundaryCondition {
    /// Value for the step that advances layer `step` to `step + 1`.
    pub fn at_step(&self, step: u64, dt: f64) -> BoundaryValue {
        let n = step as f64;
        match self {
            BoundaryCondition::Flux(p) => BoundaryValue::Flux(p.evaluate((n + 0.5) * dt)),
            BoundaryCondition::Density(p) => BoundaryValue::Density(p.evaluate((n + 1.0) * dt)),
            BoundaryCondition::Pressure(p) => BoundaryValue::Pressure(p.evaluate((n + 1.0) * dt)),
        }
    }
}

/// A pipe: geometry, grid, sampled equation of state and state.
#[derive(Debug, Clone)]
pub struct Pipe {
    pub label: String,
    pub geometry: PipeGeometry,
    pub grid: PipeGrid,
    pub eos: CellEos,
    pub state: PipeState,
}

impl Pipe {
    pub fn new(
        label: impl Into<String>,
        geometry: PipeGeometry,
        grid: PipeGrid,
        model: &EosModel,
        state: PipeState,
    ) -> Result<Self> {
        if state.cells() != grid.cells {
            return Err(Error::domain(format!(
                "state has {} cells but the grid has {}",
                state.cells(),
                grid.cells
            )));
        }
        let eos = CellEos::sample(model, &grid)?;
        Ok(Pipe {
            label: label.into(),
            geometry,
            grid,
            eos,
            state,
        })
    }

    /// Uniform pipe at pressure `p` with uniform flux `phi`; densities come
    /// from the local equation of state of each cell.
    pub fn at_pressure(
        label: impl Into<String>,
        geometry: PipeGeometry,
        grid: PipeGrid,
        model: &EosModel,
        p: f64,
        phi: f64,
    ) -> Result<Self> {
        let eos = CellEos::sample(model, &grid)?;
        let rho = (0..grid.cells).map(|i| eos.at(i).density(p)).collect();
        let state = PipeState::new(rho, vec![phi; grid.cells + 1])?;
        Ok(Pipe {
            label: label.into(),
            geometry,
            grid,
            eos,
            state,
        })
    }

    pub fn end_eos(&self, side: Side) -> &LocalEos {
        match side {
            Side::Left => self.eos.at(0),
            Side::Right => self.eos.at(self.grid.cells - 1),
        }
    }

    pub fn end_density(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.state.rho[0],
            Side::Right => self.state.rho[self.grid.cells - 1],
        }
    }

    pub fn end_pressure(&self, side: Side) -> f64 {
        self.end_eos(side).pressure(self.end_density(side))
    }

    pub fn end_flux(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.state.phi[0],
            Side::Right => self.state.phi[self.grid.cells],
        }
    }

    /// Flux on the interior face next to the given end.
    pub fn adjacent_flux(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.state.phi[1],
            Side::Right => self.state.phi[self.grid.cells - 1],
        }
    }

    /// Mass flow through an end, kg/s (positive left to right).
    pub fn end_mass_flow(&self, side: Side) -> f64 {
        self.geometry.area() * self.end_flux(side)
    }

    /// `v = phi / rho` at an end, using the end cell density.
    pub fn end_velocity(&self, side: Side) -> f64 {
        self.end_flux(side) / self.end_density(side)
    }

    /// Velocity on every face; interior faces average the adjacent densities.
    pub fn velocities(&self) -> Vec<f64> {
        let n = self.grid.cells;
        let rho = &self.state.rho;
        (0..=n)
            .map(|j| {
                let r = match j {
                    0 => rho[0],
                    j if j == n => rho[n - 1],
                    j => 0.5 * (rho[j - 1] + rho[j]),
                };
                self.state.phi[j] / r
            })
            .collect()
    }

    pub fn pressures(&self) -> Vec<f64> {
        self.state
            .rho
            .iter()
            .enumerate()
            .map(|(i, &r)| self.eos.at(i).pressure(r))
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        total_mass(&self.state, &self.geometry, &self.grid)
    }

    pub fn cfl_max_dt(&self, safety: f64) -> Result<f64> {
        cfl_max_dt(&self.state, &self.grid, &self.eos, safety)
    }

    /// Hard stability guard: errors when `dt` exceeds the frozen-coefficient
    /// bound for the current densities.
    pub fn check_cfl(&self, dt: f64) -> Result<()> {
        let dt_max = self.cfl_max_dt(1.0)?;
        if dt > dt_max {
            return Err(Error::CflViolation {
                pipe: self.label.clone(),
                dt,
                dt_max,
            });
        }
        Ok(())
    }

    pub fn interior_flux_update(&mut self, dt: f64) -> Result<()> {
        interior_flux_update(&mut self.state, &self.geometry, &self.grid, &self.eos, dt)
            .map_err(|e| e.with_pipe(&self.label))
    }

    pub fn apply_boundary(&mut self, side: Side, bc: BoundaryValue, dt: f64) {
        match bc {
            BoundaryValue::Flux(f) => {
                let face = match side {
                    Side::Left => 0,
                    Side::Right => self.grid.cells,
                };
                self.state.phi[face] = f;
            }
            BoundaryValue::Density(rho) => {
                boundary_flux_from_density(&mut self.state, &self.grid, side, rho, dt);
            }
            BoundaryValue::Pressure(p) => {
                let rho = self.end_eos(side).density(p);
                boundary_flux_from_density(&mut self.state, &self.grid, side, rho, dt);
            }
        }
    }

    pub fn density_update(&mut self, dt: f64) -> Result<()> {
        density_update(&mut self.state, &self.grid, dt).map_err(|e| e.with_pipe(&self.label))
    }

    /// One step with profile boundary data, guarded by the CFL bound.
    pub fn advance(&mut self, left: &BoundaryCondition, right: &BoundaryCondition, dt: f64) -> Result<()> {
        self.check_cfl(dt)?;
        let n = self.state.step;
        self.step(left.at_step(n, dt), right.at_step(n, dt), dt)
    }

    /// One full step with boundary values for both ends.
    pub fn step(&mut self, left: BoundaryValue, right: BoundaryValue, dt: f64) -> Result<()> {
        self.interior_flux_update(dt)?;
        self.apply_boundary(Side::Left, left, dt);
        self.apply_boundary(Side::Right, right, dt);
        self.density_update(dt)
    }
}
