//! Single-pipe transients: a flux step at the outlet, a slow harmonic inlet
//! pressure, and the effect of a warm inlet section.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{rms_difference, MassLedger};
use crate::eos::{EosModel, TemperatureProfile, REFERENCE_GRAVITY, REFERENCE_RT, REFERENCE_TEMPERATURE};
use crate::error::{Error, Result};
use crate::pipe::{BoundaryCondition, Pipe, PipeGeometry, PipeGrid, Side};
use crate::profiles::TimeProfile;

/// Ideal-gas wave speed that reproduces the CNGA density at 6.5 MPa.
pub const MATCHED_IDEAL_SPEED: f64 = 338.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EosChoice {
    Ideal,
    Cnga,
}

impl EosChoice {
    pub fn model(self) -> EosModel {
        match self {
            EosChoice::Ideal => EosModel::ideal(MATCHED_IDEAL_SPEED),
            EosChoice::Cnga => EosModel::reference_cnga(),
        }
    }
}

impl FromStr for EosChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ideal" => Ok(EosChoice::Ideal),
            "cnga" => Ok(EosChoice::Cnga),
            other => Err(Error::domain(format!("unknown eos `{other}`, expected ideal or cnga"))),
        }
    }
}

impl fmt::Display for EosChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EosChoice::Ideal => "ideal",
            EosChoice::Cnga => "cnga",
        })
    }
}

/// Grid spacing, step control and sampling shared by the transients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolution {
    /// Target cell size, m.
    pub dx: f64,
    /// Fraction of the largest wave-speed bound used for the step.
    pub cfl_safety: f64,
    /// Sampling interval, s. The step is shrunk so it divides this exactly.
    pub cadence: f64,
    /// Fixed step, s. Overrides `cfl_safety` when set.
    pub dt: Option<f64>,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            dx: 200.0,
            cfl_safety: 0.9,
            cadence: 10.0,
            dt: None,
        }
    }
}

impl Resolution {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("dx", self.dx), ("cadence", self.cadence)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::domain(format!(
                "CFL safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::domain(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    /// `(dt, steps per sample)`. Without a fixed step the bound uses the
    /// largest wave speed the gas can reach (the low-density limit), so it
    /// holds for the whole run.
    fn step_plan(&self, pipe: &Pipe) -> Result<(f64, u64)> {
        let dt_max = match self.dt {
            Some(dt) => dt,
            None => {
                let c2 = (0..pipe.grid.cells)
                    .map(|i| pipe.eos.at(i).wave_speed_sq(0.0))
                    .fold(0.0f64, f64::max);
                self.cfl_safety * pipe.grid.dx / c2.sqrt()
            }
        };
        let every = (self.cadence / dt_max).ceil().max(1.0);
        let dt = if self.dt.is_some() && every == 1.0 {
            dt_max
        } else {
            self.cadence / every
        };
        Ok((dt, every as u64))
    }
}

/// Boundary values sampled over time at one pipe end.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EndSeries {
    pub p: Vec<f64>,
    pub rho: Vec<f64>,
    /// Boundary face flux, half a step behind `rho`.
    pub phi: Vec<f64>,
    pub v: Vec<f64>,
}

impl EndSeries {
    fn push(&mut self, pipe: &Pipe, side: Side) {
        self.p.push(pipe.end_pressure(side));
        self.rho.push(pipe.end_density(side));
        self.phi.push(pipe.end_flux(side));
        self.v.push(pipe.end_velocity(side));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipeSeries {
    pub t: Vec<f64>,
    pub left: EndSeries,
    pub right: EndSeries,
    pub dt: f64,
    pub dx: f64,
    pub steps: u64,
    pub ledger: MassLedger,
}

impl PipeSeries {
    fn sample(&mut self, t: f64, pipe: &Pipe) {
        self.t.push(t);
        self.left.push(pipe, Side::Left);
        self.right.push(pipe, Side::Right);
    }

    pub fn max_abs(values: &[f64]) -> f64 {
        values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Steps `pipe` to `t_end`, sampling every `every` steps.
fn run_pipe(
    pipe: &mut Pipe,
    left: &BoundaryCondition,
    right: &BoundaryCondition,
    t_end: f64,
    dt: f64,
    every: u64,
) -> Result<PipeSeries> {
    if !(t_end >= 0.0) {
        return Err(Error::domain(format!("t_end must be non-negative, got {t_end}")));
    }
    let total = (t_end / dt).round() as u64;
    let area = pipe.geometry.area();
    let mut series = PipeSeries {
        t: Vec::new(),
        left: EndSeries::default(),
        right: EndSeries::default(),
        dt,
        dx: pipe.grid.dx,
        steps: 0,
        ledger: MassLedger::new(0.0, pipe.total_mass()),
    };
    series.sample(0.0, pipe);
    for n in 1..=total {
        pipe.advance(left, right, dt)?;
        let phi = &pipe.state.phi;
        series.ledger.accumulate(dt, area * (phi[0] - phi[pipe.grid.cells]));
        if n % every == 0 || n == total {
            let t = n as f64 * dt;
            series.sample(t, pipe);
            series.ledger.record(t, pipe.total_mass());
        }
    }
    series.steps = total;
    Ok(series)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FastTransientConfig {
    pub eos: EosChoice,
    pub length: f64,
    pub diameter: f64,
    pub friction: f64,
    pub pressure: f64,
    /// `(end time, flux)` intervals for the outlet, kg/(m^2 s).
    pub outlet_flux: Vec<(f64, f64)>,
    pub t_end: f64,
    pub resolution: Resolution,
}

impl Default for FastTransientConfig {
    fn default() -> Self {
        FastTransientConfig {
            eos: EosChoice::Cnga,
            length: 20e3,
            diameter: 0.9144,
            friction: 0.01,
            pressure: 6.5e6,
            outlet_flux: vec![(600.0, 0.0), (1800.0, 1200.0), (f64::INFINITY, 120.0)],
            t_end: 3600.0,
            resolution: Resolution {
                cadence: 1.0,
                ..Resolution::default()
            },
        }
    }
}

/// Gas at rest under constant inlet pressure while the outlet draw steps up
/// and back down.
pub fn run_fast_transient(cfg: &FastTransientConfig) -> Result<PipeSeries> {
    cfg.resolution.validate()?;
    let geometry = PipeGeometry::new(cfg.length, cfg.diameter, cfg.friction)?;
    let grid = PipeGrid::from_target(cfg.length, cfg.resolution.dx)?;
    let mut pipe = Pipe::at_pressure("pipe", geometry, grid, &cfg.eos.model(), cfg.pressure, 0.0)?;
    let left = BoundaryCondition::Pressure(TimeProfile::constant(cfg.pressure));
    let right = BoundaryCondition::Flux(TimeProfile::step_sequence(cfg.outlet_flux.clone())?);
    let (dt, every) = cfg.resolution.step_plan(&pipe)?;
    run_pipe(&mut pipe, &left, &right, cfg.t_end, dt, every)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlowTransientConfig {
    pub eos: EosChoice,
    pub length: f64,
    pub diameter: f64,
    pub friction: f64,
    pub pressure: f64,
    /// Relative amplitude of the inlet pressure swing.
    pub amplitude: f64,
    /// Half period of the inlet swing, s.
    pub t_scale: f64,
    pub flux: f64,
    pub periods: u32,
    pub resolution: Resolution,
}

impl Default for SlowTransientConfig {
    fn default() -> Self {
        SlowTransientConfig {
            eos: EosChoice::Cnga,
            length: 50e3,
            diameter: 0.9144,
            friction: 0.01,
            pressure: 6.5e6,
            amplitude: 0.25,
            t_scale: 6.0 * 3600.0,
            flux: 240.0,
            periods: 50,
            resolution: Resolution {
                cadence: 60.0,
                ..Resolution::default()
            },
        }
    }
}

impl SlowTransientConfig {
    pub fn period(&self) -> f64 {
        2.0 * self.t_scale
    }

    pub fn inlet_pressure(&self) -> TimeProfile {
        TimeProfile::harmonic(self.pressure, self.amplitude, PI / self.t_scale, 0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SlowTransientReport {
    pub series: PipeSeries,
    /// RMS difference of the inlet flux over the last two periods, relative
    /// to its RMS over the last period.
    pub limit_cycle_rms: f64,
}

/// Harmonic inlet pressure against a constant outlet draw, run until the
/// response settles into a cycle.
pub fn run_slow_transient(cfg: &SlowTransientConfig) -> Result<SlowTransientReport> {
    cfg.resolution.validate()?;
    if cfg.periods == 0 {
        return Err(Error::domain("at least one period is required"));
    }
    let samples_per_period = cfg.period() / cfg.resolution.cadence;
    if (samples_per_period - samples_per_period.round()).abs() > 1e-9 {
        return Err(Error::domain("sampling cadence must divide the forcing period"));
    }
    let geometry = PipeGeometry::new(cfg.length, cfg.diameter, cfg.friction)?;
    let grid = PipeGrid::from_target(cfg.length, cfg.resolution.dx)?;
    let mut pipe = Pipe::at_pressure("pipe", geometry, grid, &cfg.eos.model(), cfg.pressure, cfg.flux)?;
    let left = BoundaryCondition::Pressure(cfg.inlet_pressure());
    let right = BoundaryCondition::Flux(TimeProfile::constant(cfg.flux));
    let (dt, every) = cfg.resolution.step_plan(&pipe)?;
    let series = run_pipe(&mut pipe, &left, &right, cfg.periods as f64 * cfg.period(), dt, every)?;

    let m = samples_per_period.round() as usize;
    let phi = &series.left.phi;
    let limit_cycle_rms = if cfg.periods >= 2 && phi.len() > 2 * m {
        let n = phi.len();
        let (prev, last) = (&phi[n - 1 - 2 * m..n - 1 - m], &phi[n - 1 - m..n - 1]);
        rms_difference(last, prev) / rms_difference(last, &vec![0.0; m])
    } else {
        f64::NAN
    };
    Ok(SlowTransientReport {
        series,
        limit_cycle_rms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemperatureConfig {
    /// Decay rate of the inlet temperature excess, 1/m.
    pub decay_rate: f64,
    pub length: f64,
    pub diameter: f64,
    pub friction: f64,
    pub pressure: f64,
    pub flux: f64,
    pub t_ambient: f64,
    pub t_jump: f64,
    /// Settling time with constant boundary data, s.
    pub t_settle: f64,
    pub t_scale: f64,
    pub amplitude: f64,
    pub t_end: f64,
    pub resolution: Resolution,
}

impl Default for TemperatureConfig {
    fn default() -> Self {
        TemperatureConfig {
            decay_rate: 1e-3,
            length: 100e3,
            diameter: 0.5,
            friction: 0.011,
            pressure: 6.5e6,
            flux: 289.0,
            t_ambient: REFERENCE_TEMPERATURE,
            t_jump: 40.0,
            t_settle: 4.0 * 3600.0,
            t_scale: 12.0 * 3600.0,
            amplitude: 0.1,
            t_end: 16.0 * 3600.0,
            resolution: Resolution {
                cadence: 60.0,
                ..Resolution::default()
            },
        }
    }
}

impl TemperatureConfig {
    /// Non-isothermal CNGA; the gas constant is the one behind the reference
    /// `RT`, so the far field matches the isothermal runs.
    pub fn eos(&self) -> EosModel {
        EosModel::NonIsothermal {
            profile: TemperatureProfile {
                ambient: self.t_ambient,
                jump: self.t_jump,
                decay_rate: self.decay_rate,
            },
            gas_gravity: REFERENCE_GRAVITY,
            gas_constant: Some(REFERENCE_RT / REFERENCE_TEMPERATURE),
        }
    }

    pub fn inlet_pressure(&self) -> TimeProfile {
        TimeProfile::harmonic(self.pressure, self.amplitude, 6.0 * PI / self.t_scale, self.t_settle)
            .with_start(self.t_settle)
    }

    pub fn outlet_flux(&self) -> TimeProfile {
        TimeProfile::harmonic(self.flux, self.amplitude, 4.0 * PI / self.t_scale, self.t_settle)
            .with_start(self.t_settle)
    }
}

/// Pipe with a warm inlet section: settles under constant data, then both
/// ends oscillate.
pub fn run_temperature_effect(cfg: &TemperatureConfig) -> Result<PipeSeries> {
    cfg.resolution.validate()?;
    if !(cfg.decay_rate >= 0.0) {
        return Err(Error::domain(format!(
            "decay rate must be non-negative, got {}",
            cfg.decay_rate
        )));
    }
    let geometry = PipeGeometry::new(cfg.length, cfg.diameter, cfg.friction)?;
    let grid = PipeGrid::from_target(cfg.length, cfg.resolution.dx)?;
    let mut pipe = Pipe::at_pressure("pipe", geometry, grid, &cfg.eos(), cfg.pressure, cfg.flux)?;
    let left = BoundaryCondition::Pressure(cfg.inlet_pressure());
    let right = BoundaryCondition::Flux(cfg.outlet_flux());
    let (dt, every) = cfg.resolution.step_plan(&pipe)?;
    run_pipe(&mut pipe, &left, &right, cfg.t_end, dt, every)
}
