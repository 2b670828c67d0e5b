//! The five-node test network: three compressors, two varying withdrawals,
//! one day of operation from a steady start.

use std::time::Instant;

use serde::Serialize;

use super::{LedgerEntry, MassLedger};
use crate::eos::EosModel;
use crate::error::{Error, Result};
use crate::network::{CompressorSide, Network, NetworkBuilder, NodeKind, SteadyState};
use crate::pipe::{PipeGeometry, Side};
use crate::profiles::{five_node as sched, TimeProfile};

/// Slack pressure at node 1, Pa.
pub const SLACK_PRESSURE: f64 = 3447378.645;

/// `(id, from, to, length m, diameter m, friction)`.
pub const PIPES: [(&str, &str, &str, f64, f64, f64); 5] = [
    ("1", "1", "2", 20e3, 0.9144, 0.01),
    ("2", "2", "3", 70e3, 0.9144, 0.01),
    ("3", "3", "4", 10e3, 0.9144, 0.01),
    ("4", "2", "4", 60e3, 0.635, 0.015),
    ("5", "4", "5", 80e3, 0.9144, 0.01),
];

/// Builds the network on cells of about `dx_target` metres. Pipes start at
/// rest; see [`Network::initialize_steady`].
pub fn five_node_network(eos: EosModel, dx_target: f64) -> Result<Network> {
    let mut b = NetworkBuilder::new(eos)
        .slack("1", TimeProfile::constant(SLACK_PRESSURE))
        .demand("2", TimeProfile::constant(0.0))
        .demand("3", sched::d3())
        .demand("4", TimeProfile::constant(0.0))
        .demand("5", sched::d5());
    for (id, from, to, length, diameter, friction) in PIPES {
        b = b.pipe(id, from, to, PipeGeometry::new(length, diameter, friction)?);
    }
    b.compressor("1", "1", CompressorSide::Inlet, sched::c1())
        .compressor("2", "2", CompressorSide::Inlet, sched::c2())
        .compressor("3", "5", CompressorSide::Inlet, sched::c3())
        .build(dx_target)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiveNodeConfig {
    #[serde(skip)]
    pub eos: EosModel,
    pub dx: f64,
    /// Fixed step, s; `None` picks the largest step under `cfl_safety` that
    /// divides the cadence.
    pub dt: Option<f64>,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub cadence: f64,
    pub parallel: bool,
}

impl Default for FiveNodeConfig {
    fn default() -> Self {
        FiveNodeConfig {
            eos: EosModel::reference_cnga(),
            dx: 62.5,
            dt: Some(0.125),
            cfl_safety: 0.9,
            t_end: sched::DAY,
            cadence: 60.0,
            parallel: false,
        }
    }
}

/// Sampled node and pipe-end quantities.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NetworkSeries {
    pub t: Vec<f64>,
    pub node_ids: Vec<String>,
    pub pipe_ids: Vec<String>,
    /// `[sample][node]`, Pa.
    pub node_pressure: Vec<Vec<f64>>,
    /// `[sample][node]`, kg/s; negative where gas enters the network.
    pub node_outflow: Vec<Vec<f64>>,
    /// `[sample][pipe]`, kg/s at `x = 0` and `x = L`.
    pub inlet_flow: Vec<Vec<f64>>,
    pub outlet_flow: Vec<Vec<f64>>,
}

impl NetworkSeries {
    pub fn new(net: &Network) -> Self {
        NetworkSeries {
            node_ids: net.nodes.iter().map(|n| n.id.clone()).collect(),
            pipe_ids: net.pipes.iter().map(|p| p.label.clone()).collect(),
            ..Default::default()
        }
    }

    pub fn sample(&mut self, t: f64, net: &Network) {
        self.t.push(t);
        self.node_pressure.push(net.node_pressure.clone());
        self.node_outflow.push(net.node_outflow.clone());
        self.inlet_flow
            .push(net.pipes.iter().map(|p| p.end_mass_flow(Side::Left)).collect());
        self.outlet_flow
            .push(net.pipes.iter().map(|p| p.end_mass_flow(Side::Right)).collect());
    }

    pub fn node_column(&self, data: &[Vec<f64>], node: usize) -> Vec<f64> {
        data.iter().map(|row| row[node]).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkRun {
    pub series: NetworkSeries,
    pub ledger: MassLedger,
    pub dt: f64,
    pub steps: u64,
    /// Largest nodal `|residual| / max incident S|phi|` over all steps.
    pub max_balance_ratio: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiveNodeReport {
    pub run: NetworkRun,
    #[serde(skip)]
    pub steady: SteadyState,
    /// Inflow at the slack node, kg/s.
    pub node1_inflow: Vec<f64>,
    pub node5_pressure: Vec<f64>,
}

/// Step size and steps per sample for a network run.
pub fn network_step_plan(net: &Network, dt: Option<f64>, cfl_safety: f64, cadence: f64) -> Result<(f64, u64)> {
    if !(cadence > 0.0) {
        return Err(Error::domain(format!("cadence must be positive, got {cadence}")));
    }
    if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
        return Err(Error::domain(format!(
            "CFL safety must lie in (0, 1], got {cfl_safety}"
        )));
    }
    if let Some(dt) = dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("dt must be positive, got {dt}")));
        }
        return Ok((dt, (cadence / dt).round().max(1.0) as u64));
    }
    // bound from the low-density limit of every cell's wave speed
    let dt_max = net
        .pipes
        .iter()
        .map(|p| {
            let c2 = (0..p.grid.cells)
                .map(|i| p.eos.at(i).wave_speed_sq(0.0))
                .fold(0.0f64, f64::max);
            cfl_safety * p.grid.dx / c2.sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    let every = (cadence / dt_max).ceil().max(1.0);
    Ok((cadence / every, every as u64))
}

/// Steps `net` from its current state to `t_end`, sampling every `every`
/// steps and keeping the mass ledger.
pub fn run_network(net: &mut Network, dt: f64, every: u64, t_end: f64) -> Result<NetworkRun> {
    run_network_observed(net, dt, every, t_end, |_, _, _| Ok(()))
}

/// Like [`run_network`], calling `observe` at every sample (including
/// `t = 0`). A zero-length run takes no samples.
pub fn run_network_observed<F>(net: &mut Network, dt: f64, every: u64, t_end: f64, mut observe: F) -> Result<NetworkRun>
where
    F: FnMut(f64, &Network, &LedgerEntry) -> Result<()>,
{
    if !(t_end >= 0.0) {
        return Err(Error::domain(format!("t_end must be non-negative, got {t_end}")));
    }
    if !(dt > 0.0) || every == 0 {
        return Err(Error::domain("dt and the sampling interval must be positive"));
    }
    let start = Instant::now();
    let total = (t_end / dt).round() as u64;
    let mut series = NetworkSeries::new(net);
    let mut ledger = MassLedger::new(0.0, net.total_mass());
    if total > 0 {
        series.sample(0.0, net);
        observe(0.0, net, &ledger.entries[0])?;
    }
    let mut max_balance_ratio = 0.0f64;
    for n in 1..=total {
        net.step(dt)?;
        ledger.accumulate(dt, net.net_boundary_inflow());
        let (residual, scale) = net.worst_balance();
        if scale > 0.0 {
            max_balance_ratio = max_balance_ratio.max(residual / scale);
        }
        if n % every == 0 || n == total {
            let t = n as f64 * dt;
            series.sample(t, net);
            let entry = ledger.record(t, net.total_mass());
            observe(t, net, &entry)?;
        }
    }
    Ok(NetworkRun {
        series,
        ledger,
        dt,
        steps: total,
        max_balance_ratio,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Steady start from the data at `t = 0`, then the daily schedules.
pub fn run_five_node_network(cfg: &FiveNodeConfig) -> Result<FiveNodeReport> {
    let mut net = five_node_network(cfg.eos, cfg.dx)?;
    net.set_parallel(cfg.parallel);
    let steady = net.initialize_steady(0.0)?;
    let (dt, every) = network_step_plan(&net, cfg.dt, cfg.cfl_safety, cfg.cadence)?;
    let run = run_network(&mut net, dt, every, cfg.t_end)?;
    let slack = net
        .nodes
        .iter()
        .position(|n| matches!(n.kind, NodeKind::Slack(_)))
        .expect("network has a slack node");
    let sink = net.node_index("5").expect("node 5 exists");
    let node1_inflow = run
        .series
        .node_column(&run.series.node_outflow, slack)
        .into_iter()
        .map(|q| -q)
        .collect();
    let node5_pressure = run.series.node_column(&run.series.node_pressure, sink);
    Ok(FiveNodeReport {
        run,
        steady,
        node1_inflow,
        node5_pressure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_coarse_run_conserves_mass() {
        let cfg = FiveNodeConfig {
            dx: 2000.0,
            dt: None,
            t_end: 600.0,
            ..FiveNodeConfig::default()
        };
        let r = run_five_node_network(&cfg).unwrap();
        assert_eq!(r.run.series.t.len(), 11);
        let mass = r.run.ledger.entries[0].mass;
        assert!(r.run.ledger.max_abs_discrepancy() <= 1e-9 * mass);
        assert!(r.run.max_balance_ratio <= 1e-12);
        // the slack node feeds the network
        assert!(r.node1_inflow.iter().all(|&q| q > 0.0));
    }
}
