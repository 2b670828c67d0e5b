//! Pipe networks: nodes with pressure or withdrawal data, pipes on a directed
//! graph, and compressors at pipe ends.
//!
//! A pipe runs from its `from` node (left end, `x = 0`) to its `to` node
//! (right end, `x = L`); positive flux points from `from` to `to`.

pub mod nodal;
pub mod steady;

use std::collections::{HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eos::EosModel;
use crate::error::{Error, Result};
use crate::pipe::{Pipe, PipeGeometry, PipeGrid, PipeState, Side};
use crate::profiles::TimeProfile;

pub use nodal::{
    flow_balance_residual, junction_boundary_fluxes, nodal_pressure_bisect, nodal_pressure_solve, EndData,
};
pub use steady::{steady_state_solve, SteadyState};

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    /// Prescribed pressure, Pa; injection is free.
    Slack(TimeProfile),
    /// Prescribed withdrawal, kg/s (negative values inject).
    Demand(TimeProfile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_slack(&self) -> bool {
        matches!(self.kind, NodeKind::Slack(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompressorSide {
    /// At the `from` node, boosting into the pipe's left end.
    Inlet,
    /// At the `to` node, boosting into the pipe's right end.
    Outlet,
}

impl CompressorSide {
    pub fn pipe_side(self) -> Side {
        match self {
            CompressorSide::Inlet => Side::Left,
            CompressorSide::Outlet => Side::Right,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compressor {
    pub id: String,
    pub pipe: usize,
    pub side: CompressorSide,
    /// Boost ratio `alpha(t) >= 1`.
    pub ratio: TimeProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub from: usize,
    pub to: usize,
}

/// A pipe end attached to a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub pipe: usize,
    pub side: Side,
}

impl Incidence {
    pub fn sgn(&self) -> f64 {
        match self.side {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
struct PipeSpec {
    id: String,
    from: String,
    to: String,
    geometry: PipeGeometry,
    cells: Option<usize>,
}

#[derive(Debug, Clone)]
struct CompressorSpec {
    id: String,
    pipe: String,
    side: CompressorSide,
    ratio: TimeProfile,
}

/// Collects nodes, pipes and compressors and checks them as a whole.
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    eos: EosModel,
    nodes: Vec<Node>,
    pipes: Vec<PipeSpec>,
    compressors: Vec<CompressorSpec>,
}

impl NetworkBuilder {
    pub fn new(eos: EosModel) -> Self {
        NetworkBuilder {
            eos,
            nodes: Vec::new(),
            pipes: Vec::new(),
            compressors: Vec::new(),
        }
    }

    pub fn slack(mut self, id: impl Into<String>, pressure: TimeProfile) -> Self {
        self.nodes.push(Node {
            id: id.into(),
            kind: NodeKind::Slack(pressure),
        });
        self
    }

    pub fn demand(mut self, id: impl Into<String>, withdrawal: TimeProfile) -> Self {
        self.nodes.push(Node {
            id: id.into(),
            kind: NodeKind::Demand(withdrawal),
        });
        self
    }

    pub fn pipe(
        mut self,
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        geometry: PipeGeometry,
    ) -> Self {
        self.pipes.push(PipeSpec {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            geometry,
            cells: None,
        });
        self
    }

    /// A pipe with an explicit cell count instead of the global target.
    pub fn pipe_with_cells(
        mut self,
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        geometry: PipeGeometry,
        cells: usize,
    ) -> Self {
        self.pipes.push(PipeSpec {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            geometry,
            cells: Some(cells),
        });
        self
    }

    pub fn compressor(
        mut self,
        id: impl Into<String>,
        pipe: impl Into<String>,
        side: CompressorSide,
        ratio: TimeProfile,
    ) -> Self {
        self.compressors.push(CompressorSpec {
            id: id.into(),
            pipe: pipe.into(),
            side,
            ratio,
        });
        self
    }

    /// Builds the network with `L / round(L / dx_target)` cells per pipe.
    ///
    /// Pipes start at rest at the highest slack pressure at `t = 0`; call
    /// [`Network::initialize_steady`] for a steady start.
    pub fn build(self, dx_target: f64) -> Result<Network> {
        let mut issues = Vec::new();
        if let Err(e) = self.eos.validate() {
            issues.push(e.to_string());
        }
        let mut node_index = HashMap::new();
        for (k, n) in self.nodes.iter().enumerate() {
            if node_index.insert(n.id.clone(), k).is_some() {
                issues.push(format!("duplicate node id '{}'", n.id));
            }
            let (profile, what) = match &n.kind {
                NodeKind::Slack(p) => (p, "pressure"),
                NodeKind::Demand(p) => (p, "withdrawal"),
            };
            if let Err(e) = profile.validate() {
                issues.push(format!("node '{}' {what}: {e}", n.id));
            } else if n.is_slack() && profile.range().0 <= 0.0 {
                issues.push(format!("slack node '{}' pressure must stay positive", n.id));
            }
        }
        if !self.nodes.iter().any(Node::is_slack) {
            issues.push("network needs at least one slack (pressure) node".into());
        }
        let mut pipe_index = HashMap::new();
        let mut links = Vec::new();
        for (k, p) in self.pipes.iter().enumerate() {
            if pipe_index.insert(p.id.clone(), k).is_some() {
                issues.push(format!("duplicate pipe id '{}'", p.id));
            }
            let from = node_index.get(&p.from).copied();
            let to = node_index.get(&p.to).copied();
            if from.is_none() {
                issues.push(format!("pipe '{}' starts at unknown node '{}'", p.id, p.from));
            }
            if to.is_none() {
                issues.push(format!("pipe '{}' ends at unknown node '{}'", p.id, p.to));
            }
            if p.from == p.to {
                issues.push(format!("pipe '{}' connects node '{}' to itself", p.id, p.from));
            }
            if let (Some(from), Some(to)) = (from, to) {
                links.push(Link { from, to });
            }
        }
        let mut compressors = Vec::new();
        let mut ends_taken = HashSet::new();
        let mut comp_ids = HashSet::new();
        for c in &self.compressors {
            if !comp_ids.insert(c.id.clone()) {
                issues.push(format!("duplicate compressor id '{}'", c.id));
            }
            if let Err(e) = c.ratio.validate() {
                issues.push(format!("compressor '{}' ratio: {e}", c.id));
            } else if c.ratio.range().0 < 1.0 {
                issues.push(format!("compressor '{}' ratio must be >= 1", c.id));
            }
            match pipe_index.get(&c.pipe) {
                None => issues.push(format!("compressor '{}' sits on unknown pipe '{}'", c.id, c.pipe)),
                Some(&pipe) => {
                    if !ends_taken.insert((pipe, c.side)) {
                        issues.push(format!(
                            "pipe '{}' has more than one compressor at its {:?} end",
                            c.pipe, c.side
                        ));
                    }
                    compressors.push(Compressor {
                        id: c.id.clone(),
                        pipe,
                        side: c.side,
                        ratio: c.ratio.clone(),
                    });
                }
            }
        }
        if issues.is_empty() && links.len() == self.pipes.len() && !self.nodes.is_empty() {
            if let Some(orphan) = disconnected_node(self.nodes.len(), &links) {
                issues.push(format!(
                    "network is not connected (node '{}' is unreachable)",
                    self.nodes[orphan].id
                ));
            }
        }
        if !issues.is_empty() {
            return Err(Error::InvalidNetwork(issues.join("; ")));
        }

        let p_init = self
            .nodes
            .iter()
            .filter_map(|n| match &n.kind {
                NodeKind::Slack(p) => Some(p.evaluate(0.0)),
                NodeKind::Demand(_) => None,
            })
            .fold(0.0, f64::max);
        let mut pipes = Vec::with_capacity(self.pipes.len());
        for spec in &self.pipes {
            let grid = match spec.cells {
                Some(n) => PipeGrid::new(spec.geometry.length, n)?,
                None => PipeGrid::from_target(spec.geometry.length, dx_target)?,
            };
            pipes.push(Pipe::at_pressure(
                spec.id.clone(),
                spec.geometry,
                grid,
                &self.eos,
                p_init,
                0.0,
            )?);
        }
        Network::assemble(self.eos, self.nodes, pipes, links, compressors)
    }
}

fn disconnected_node(n: usize, links: &[Link]) -> Option<usize> {
    let mut adj = vec![Vec::new(); n];
    for l in links {
        adj[l.from].push(l.to);
        adj[l.to].push(l.from);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(k) = queue.pop_front() {
        for &m in &adj[k] {
            if !seen[m] {
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    seen.iter().position(|s| !s)
}

/// Pipes, nodes and compressors with the current simulation state.
#[derive(Debug, Clone)]
pub struct Network {
    pub eos: EosModel,
    pub nodes: Vec<Node>,
    pub pipes: Vec<Pipe>,
    pub links: Vec<Link>,
    pub compressors: Vec<Compressor>,
    incidence: Vec<Vec<Incidence>>,
    end_compressor: Vec<[Option<usize>; 2]>,
    /// Node pressures on the current density layer, Pa.
    pub node_pressure: Vec<f64>,
    /// `sum sgn S phi` per node over the last half layer, kg/s: the
    /// withdrawal actually taken (negative for injection).
    pub node_outflow: Vec<f64>,
    step: u64,
    parallel: bool,
}

struct NodeUpdate {
    pressure: f64,
    fluxes: Vec<f64>,
    outflow: f64,
}

impl Network {
    fn assemble(
        eos: EosModel,
        nodes: Vec<Node>,
        pipes: Vec<Pipe>,
        links: Vec<Link>,
        compressors: Vec<Compressor>,
    ) -> Result<Self> {
        let mut incidence = vec![Vec::new(); nodes.len()];
        for (k, l) in links.iter().enumerate() {
            incidence[l.from].push(Incidence {
                pipe: k,
                side: Side::Left,
            });
            incidence[l.to].push(Incidence {
                pipe: k,
                side: Side::Right,
            });
        }
        let mut end_compressor = vec![[None, None]; pipes.len()];
        for (c, comp) in compressors.iter().enumerate() {
            end_compressor[comp.pipe][side_slot(comp.side.pipe_side())] = Some(c);
        }
        let mut net = Network {
            eos,
            nodes,
            pipes,
            links,
            compressors,
            incidence,
            end_compressor,
            node_pressure: Vec::new(),
            node_outflow: Vec::new(),
            step: 0,
            parallel: false,
        };
        net.node_pressure = (0..net.nodes.len())
            .map(|k| net.implied_node_pressure(k, 0.0))
            .collect();
        net.node_outflow = vec![0.0; net.nodes.len()];
        Ok(net)
    }

    /// Runs the per-pipe and per-node phases on the rayon pool. Results are
    /// identical to serial execution.
    pub fn set_parallel(&mut self, parallel: bool) {
        self.parallel = parallel;
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn pipe_index(&self, id: &str) -> Option<usize> {
        self.pipes.iter().position(|p| p.label == id)
    }

    pub fn incidence(&self, node: usize) -> &[Incidence] {
        &self.incidence[node]
    }

    /// Node at one end of a pipe.
    pub fn end_node(&self, pipe: usize, side: Side) -> usize {
        match side {
            Side::Left => self.links[pipe].from,
            Side::Right => self.links[pipe].to,
        }
    }

    /// Boost ratio between a pipe end and its node at time `t`.
    pub fn alpha(&self, pipe: usize, side: Side, t: f64) -> f64 {
        match self.end_compressor[pipe][side_slot(side)] {
            Some(c) => self.compressors[c].ratio.evaluate(t),
            None => 1.0,
        }
    }

    /// Errors when both compressors of some pipe boost at time `t`.
    pub fn check_compressors(&self, t: f64) -> Result<()> {
        for (k, pipe) in self.pipes.iter().enumerate() {
            if self.alpha(k, Side::Left, t) > 1.0 && self.alpha(k, Side::Right, t) > 1.0 {
                return Err(Error::CompressorConflict {
                    pipe: pipe.label.clone(),
                    t,
                });
            }
        }
        Ok(())
    }

    /// Node pressure implied by the first adjoining pipe end.
    fn implied_node_pressure(&self, node: usize, t: f64) -> f64 {
        match &self.nodes[node].kind {
            NodeKind::Slack(p) => p.evaluate(t),
            NodeKind::Demand(_) => match self.incidence[node].first() {
                Some(inc) => self.pipes[inc.pipe].end_pressure(inc.side) / self.alpha(inc.pipe, inc.side, t),
                None => 0.0,
            },
        }
    }

    /// Smallest stable step over all pipes.
    pub fn cfl_max_dt(&self, safety: f64) -> Result<f64> {
        self.pipes
            .iter()
            .map(|p| p.cfl_max_dt(safety))
            .try_fold(f64::INFINITY, |acc, dt| dt.map(|d| acc.min(d)))
    }

    pub fn total_mass(&self) -> f64 {
        self.pipes.iter().map(Pipe::total_mass).sum()
    }

    /// Net mass flow into the pipes through all pipe ends over the last half
    /// layer, kg/s.
    pub fn net_boundary_inflow(&self) -> f64 {
        self.pipes
            .iter()
            .map(|p| p.end_mass_flow(Side::Left) - p.end_mass_flow(Side::Right))
            .sum()
    }

    /// Largest `|flow_balance_residual|` over nodes, with the largest incident
    /// `S |phi|` at that node, for the current boundary fluxes.
    pub fn worst_balance(&self) -> (f64, f64) {
        let t_half = (self.step as f64 - 0.5) * self.time_step_hint();
        let mut worst = (0.0f64, 0.0f64);
        for (k, node) in self.nodes.iter().enumerate() {
            let q = match &node.kind {
                NodeKind::Slack(_) => self.node_outflow[k],
                NodeKind::Demand(w) => w.evaluate(t_half.max(0.0)),
            };
            let (sum, scale) = self.incidence[k].iter().fold((0.0, 0.0f64), |(s, m), inc| {
                let flow = self.pipes[inc.pipe].end_mass_flow(inc.side);
                (s + inc.sgn() * flow, m.max(flow.abs()))
            });
            let r = (sum - q).abs();
            if r > worst.0 {
                worst = (r, scale);
            }
        }
        worst
    }

    fn time_step_hint(&self) -> f64 {
        self.pipes
            .first()
            .filter(|p| p.state.step > 0)
            .map(|p| p.state.time / p.state.step as f64)
            .unwrap_or(0.0)
    }

    fn end_data(&self, node: usize, t: f64) -> Vec<EndData> {
        self.incidence[node]
            .iter()
            .map(|inc| {
                let pipe = &self.pipes[inc.pipe];
                EndData {
                    side: inc.side,
                    area: pipe.geometry.area(),
                    dx: pipe.grid.dx,
                    rho_end: pipe.end_density(inc.side),
                    phi_adjacent: pipe.adjacent_flux(inc.side),
                    alpha: self.alpha(inc.pipe, inc.side, t),
                    eos: *pipe.end_eos(inc.side),
                }
            })
            .collect()
    }

    fn node_update(&self, node: usize, dt: f64) -> Result<NodeUpdate> {
        let n = self.step as f64;
        let t_next = (n + 1.0) * dt;
        let ends = self.end_data(node, t_next);
        let label = |e: Error| match e {
            Error::InfeasibleNode { detail, .. } => Error::InfeasibleNode {
                node: self.nodes[node].id.clone(),
                detail,
            },
            other => other,
        };
        let (pressure, fluxes) = match &self.nodes[node].kind {
            NodeKind::Slack(p) => {
                let p = p.evaluate(t_next);
                (p, junction_boundary_fluxes(&ends, p, dt))
            }
            NodeKind::Demand(w) => {
                let q = w.evaluate((n + 0.5) * dt);
                if let [e] = ends.as_slice() {
                    let phi = q / (e.sgn() * e.area);
                    let rho = e.rho_end - e.sgn() * dt / e.dx * (phi - e.phi_adjacent);
                    (e.eos.pressure(rho) / e.alpha, vec![phi])
                } else {
                    let p = nodal_pressure_solve(&ends, q, dt).map_err(label)?;
                    (p, junction_boundary_fluxes(&ends, p, dt))
                }
            }
        };
        let outflow = flow_balance_residual(&ends, &fluxes, 0.0);
        Ok(NodeUpdate {
            pressure,
            fluxes,
            outflow,
        })
    }

    /// Advances every pipe and node by one step of length `dt`.
    ///
    /// Flux updates on all pipes, then junction solves at all nodes, then
    /// density updates on all pipes. Withdrawals are taken on the half layer;
    /// slack pressures and compressor ratios on the next integer layer.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        for pipe in &self.pipes {
            pipe.check_cfl(dt)?;
        }
        let t_next = (self.step as f64 + 1.0) * dt;
        self.check_compressors(t_next)?;

        let parallel = self.parallel;
        for_each_pipe(&mut self.pipes, parallel, |p| p.interior_flux_update(dt))?;

        let updates: Vec<Result<NodeUpdate>> = if parallel {
            (0..self.nodes.len())
                .into_par_iter()
                .map(|k| self.node_update(k, dt))
                .collect()
        } else {
            (0..self.nodes.len()).map(|k| self.node_update(k, dt)).collect()
        };
        let updates = updates.into_iter().collect::<Result<Vec<_>>>()?;
        for (k, u) in updates.into_iter().enumerate() {
            for (inc, phi) in self.incidence[k].iter().zip(&u.fluxes) {
                let pipe = &mut self.pipes[inc.pipe];
                let face = match inc.side {
                    Side::Left => 0,
                    Side::Right => pipe.grid.cells,
                };
                pipe.state.phi[face] = *phi;
            }
            self.node_pressure[k] = u.pressure;
            self.node_outflow[k] = u.outflow;
        }

        for_each_pipe(&mut self.pipes, parallel, |p| p.density_update(dt))?;
        self.step += 1;
        Ok(())
    }

    /// Replaces every pipe state; the step counter restarts at zero.
    pub fn reset_states(&mut self, states: Vec<PipeState>) -> Result<()> {
        if states.len() != self.pipes.len() {
            return Err(Error::domain("one state per pipe is required"));
        }
        for (pipe, s) in self.pipes.iter_mut().zip(states) {
            if s.cells() != pipe.grid.cells {
                return Err(Error::domain(format!(
                    "state for pipe '{}' has {} cells, grid has {}",
                    pipe.label,
                    s.cells(),
                    pipe.grid.cells
                )));
            }
            pipe.state = s;
        }
        self.step = 0;
        self.node_pressure = (0..self.nodes.len())
            .map(|k| self.implied_node_pressure(k, 0.0))
            .collect();
        self.node_outflow = vec![0.0; self.nodes.len()];
        Ok(())
    }

    /// Solves the steady state for the data at `t0` and loads it as the
    /// initial condition.
    pub fn initialize_steady(&mut self, t0: f64) -> Result<SteadyState> {
        let steady = steady_state_solve(self, t0)?;
        let states = steady.pipe_states(self)?;
        self.reset_states(states)?;
        self.node_pressure = steady.node_pressures.clone();
        for (k, out) in self.node_outflow.iter_mut().enumerate() {
            *out = self.incidence[k]
                .iter()
                .map(|inc| inc.sgn() * self.pipes[inc.pipe].geometry.area() * steady.pipe_fluxes[inc.pipe])
                .sum();
        }
        Ok(steady)
    }
}

fn side_slot(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
    }
}

fn for_each_pipe<F>(pipes: &mut [Pipe], parallel: bool, f: F) -> Result<()>
where
    F: Fn(&mut Pipe) -> Result<()> + Sync + Send,
{
    if parallel {
        let results: Vec<Result<()>> = pipes.par_iter_mut().map(&f).collect();
        results.into_iter().collect()
    } else {
        pipes.iter_mut().try_for_each(f)
    }
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
