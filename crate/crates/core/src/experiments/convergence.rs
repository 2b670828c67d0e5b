//! Self-convergence study on one pipe under 3x refinement at a fixed
//! `dx / dt`, measured against a finer reference run.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use serde::Serialize;

use super::{l2_error, observed_rate, restrict, Location};
use crate::eos::EosModel;
use crate::error::{Error, Result};
use crate::pipe::{BoundaryValue, Pipe, PipeGeometry, PipeGrid, PipeState};

/// When the coarse runs are compared with the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonTime {
    /// Every level at the end of the coarsest step.
    CoarsestStep,
    /// Each level after one step of its own size.
    OwnStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub length: f64,
    /// `dx / dt`, m/s.
    pub grid_speed: f64,
    pub rho_bar: f64,
    /// Speed of the initial flux wave, m/s.
    pub c_ref: f64,
    pub eos: EosModel,
    pub diameter: f64,
    pub friction: f64,
    /// Coarsest step, s.
    pub dt0: f64,
    /// Levels `0..levels` are compared; steps shrink by 3 per level.
    pub levels: u32,
    /// Level of the reference run.
    pub reference_level: u32,
    pub compare: ComparisonTime,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            length: 1e4,
            grid_speed: 454.55,
            rho_bar: 56.817,
            c_ref: 377.9683,
            eos: EosModel::reference_cnga(),
            diameter: 0.9144,
            friction: 0.0,
            dt0: 1.0,
            levels: 6,
            reference_level: 6,
            compare: ComparisonTime::CoarsestStep,
        }
    }
}

impl ConvergenceConfig {
    pub fn density_ic(&self, x: f64) -> f64 {
        self.rho_bar * (1.0 - 0.2 / PI * (10.0 * (x - 0.5 * self.length) / self.length).atan())
    }

    /// Flux of the right-moving wave with speed `c_ref`.
    pub fn flux_wave(&self, t: f64, x: f64) -> f64 {
        self.c_ref * self.density_ic(x - self.c_ref * t)
    }

    fn cells(&self, level: u32) -> usize {
        let base = (self.length / (self.grid_speed * self.dt0)).round() as usize;
        base * 3usize.pow(level)
    }

    fn dt(&self, level: u32) -> f64 {
        self.dt0 / 3f64.powi(level as i32)
    }

    /// Steps a level takes before it is compared.
    fn compare_steps(&self, level: u32) -> u64 {
        match self.compare {
            ComparisonTime::CoarsestStep => 3u64.pow(level),
            ComparisonTime::OwnStep => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.reference_level < self.levels - 1 {
            return Err(Error::domain(
                "reference level must be at least the finest compared level",
            ));
        }
        if self.cells(0) < 2 {
            return Err(Error::domain("coarsest grid needs at least 2 cells"));
        }
        self.eos.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTable {
    /// Orders for rho, p, phi.
    pub last_two: [f64; 3],
    pub first_last: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub resolutions: Vec<f64>,
    pub cells: Vec<usize>,
    /// Integrated squared differences against the reference, `int (u - u_ref)^2 dx`.
    /// `phi` compares the leading flux layer each run holds at the comparison
    /// time, half of its own step ahead of `rho`.
    pub errors_rho: Vec<f64>,
    pub errors_p: Vec<f64>,
    pub errors_phi: Vec<f64>,
    pub rates: RateTable,
}

struct Snapshot {
    rho: Vec<f64>,
    phi: Vec<f64>,
}

fn make_pipe(cfg: &ConvergenceConfig, level: u32, phi_half: Vec<f64>) -> Result<Pipe> {
    let geometry = PipeGeometry::new(cfg.length, cfg.diameter, cfg.friction)?;
    let grid = PipeGrid::new(cfg.length, cfg.cells(level))?;
    let rho = (0..grid.cells).map(|i| cfg.density_ic(grid.cell_center(i))).collect();
    Pipe::new(
        format!("level{level}"),
        geometry,
        grid,
        &cfg.eos,
        PipeState::new(rho, phi_half)?,
    )
}

/// Advances `pipe` one step with the wave flux on both ends.
fn wave_step(cfg: &ConvergenceConfig, pipe: &mut Pipe, dt: f64) -> Result<()> {
    pipe.check_cfl(dt)?;
    let t_half = (pipe.state.step as f64 + 0.5) * dt;
    pipe.step(
        BoundaryValue::Flux(cfg.flux_wave(t_half, 0.0)),
        BoundaryValue::Flux(cfg.flux_wave(t_half, cfg.length)),
        dt,
    )
}

/// Runs `pipe` and snapshots it after each requested step count.
fn run_with_snapshots(
    cfg: &ConvergenceConfig,
    pipe: &mut Pipe,
    dt: f64,
    wanted: &BTreeSet<u64>,
) -> Result<BTreeMap<u64, Snapshot>> {
    let mut out = BTreeMap::new();
    let last = wanted.iter().next_back().copied().unwrap_or(0);
    for n in 0..=last {
        if n > 0 {
            wave_step(cfg, pipe, dt)?;
        }
        if wanted.contains(&n) {
            out.insert(
                n,
                Snapshot {
                    rho: pipe.state.rho.clone(),
                    phi: pipe.state.phi.clone(),
                },
            );
        }
    }
    Ok(out)
}

/// Runs the reference and every compared level; see [`ConvergenceConfig`].
pub fn run_convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let r = cfg.reference_level;
    let dt_ref = cfg.dt(r);

    // reference flux starts on its first half layer
    let ref_grid = PipeGrid::new(cfg.length, cfg.cells(r))?;
    let phi0: Vec<f64> = (0..=ref_grid.cells)
        .map(|j| cfg.flux_wave(0.5 * dt_ref, ref_grid.face(j)))
        .collect();
    let mut reference = make_pipe(cfg, r, phi0)?;

    // reference step counts for every level: start flux, rho and phi checks
    let mut wanted = BTreeSet::new();
    let mut plan = Vec::new();
    for s in 0..cfg.levels {
        let m = 3u64.pow(r - s);
        let start = m.div_ceil(2);
        let ref_rho = cfg.compare_steps(s) * m;
        // the step that completes the rho layer also fills the next flux layer
        let ref_phi = ref_rho + 1;
        wanted.extend([start, ref_rho, ref_phi]);
        plan.push((s, start, ref_rho, ref_phi));
    }
    let snaps = run_with_snapshots(cfg, &mut reference, dt_ref, &wanted)?;

    let mut report = ConvergenceReport {
        resolutions: Vec::new(),
        cells: Vec::new(),
        errors_rho: Vec::new(),
        errors_p: Vec::new(),
        errors_phi: Vec::new(),
        rates: RateTable {
            last_two: [0.0; 3],
            first_last: [0.0; 3],
        },
    };
    for (s, start, ref_rho, ref_phi) in plan {
        let dt = cfg.dt(s);
        let n = cfg.cells(s);
        let phi_half = restrict(&snaps[&start].phi, n + 1, Location::Faces)?;
        let mut pipe = make_pipe(cfg, s, phi_half)?;
        let k_rho = cfg.compare_steps(s);
        let k_phi = k_rho + 1;
        let own = run_with_snapshots(cfg, &mut pipe, dt, &BTreeSet::from([k_rho, k_phi]))?;
        let dx = pipe.grid.dx;
        let p_of = |pipe: &Pipe, rho: &[f64]| -> Vec<f64> {
            rho.iter()
                .enumerate()
                .map(|(i, &v)| pipe.eos.at(i).pressure(v))
                .collect()
        };
        let ref_p = p_of(&reference, &snaps[&ref_rho].rho);
        report.resolutions.push(dt);
        report.cells.push(n);
        report
            .errors_rho
            .push(l2_error(&own[&k_rho].rho, &snaps[&ref_rho].rho, dx, Location::Centers)?);
        report
            .errors_p
            .push(l2_error(&p_of(&pipe, &own[&k_rho].rho), &ref_p, dx, Location::Centers)?);
        report
            .errors_phi
            .push(l2_error(&own[&k_phi].phi, &snaps[&ref_phi].phi, dx, Location::Faces)?);
    }
    let k = report.resolutions.len();
    if k >= 2 {
        let fields = [&report.errors_rho, &report.errors_p, &report.errors_phi];
        for (v, e) in fields.iter().enumerate() {
            report.rates.last_two[v] = observed_rate(e[k - 2], e[k - 1], 3.0, 1);
            report.rates.first_last[v] = observed_rate(e[0], e[k - 1], 3.0, k - 1);
        }
    }
    Ok(report)
}
