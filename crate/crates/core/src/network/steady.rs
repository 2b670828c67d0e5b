//! Steady network flow used as the initial condition.
//!
//! Along a pipe carrying constant flux `phi`, the momentum balance reduces to
//! `dp/dx = -beta phi |phi| / rho(p, x)`. For given end pressures the flux
//! node pressures and pipe fluxes come from a damped Newton iteration on the
//! nodal flow balances and the pipe end pressures.

use nalgebra::{DMatrix, DVector};

use crate::eos::{EosModel, LocalEos};
use crate::error::{Error, Result};
use crate::pipe::{Pipe, PipeState, Side};

use super::{Network, NodeKind};

const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-6;
const BALANCE_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 100;

/// Converged steady flow.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Pa, per node.
    pub node_pressures: Vec<f64>,
    /// kg/(m^2 s), per pipe.
    pub pipe_fluxes: Vec<f64>,
    /// Pressure at `x = 0` and `x = L` of each pipe, Pa.
    pub inlet_pressures: Vec<f64>,
    pub outlet_pressures: Vec<f64>,
    pub iterations: usize,
    /// Largest nodal balance residual, kg/s.
    pub residual: f64,
}

impl SteadyState {
    /// Mass flow through pipe `k`, kg/s.
    pub fn mass_flow(&self, net: &Network, k: usize) -> f64 {
        self.pipe_fluxes[k] * net.pipes[k].geometry.area()
    }

    /// Pipe states sampled from the steady pressure profiles.
    pub fn pipe_states(&self, net: &Network) -> Result<Vec<PipeState>> {
        net.pipes
            .iter()
            .enumerate()
            .map(|(k, pipe)| {
                let centers: Vec<f64> = (0..pipe.grid.cells).map(|i| pipe.grid.cell_center(i)).collect();
                let profile = PressureProfile::new(pipe, &net.eos)?;
                let (_, samples) = profile
                    .integrate(self.inlet_pressures[k], self.pipe_fluxes[k], &centers)
                    .ok_or_else(|| {
                        Error::InfeasibleSteadyState(format!("pressure in pipe '{}' drops to zero", pipe.label))
                    })?;
                let rho = samples
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| pipe.eos.at(i).density(p))
                    .collect();
                PipeState::new(rho, vec![self.pipe_fluxes[k]; pipe.grid.cells + 1])
            })
            .collect()
    }
}

/// `dp/dx` along one pipe.
pub(crate) struct PressureProfile<'a> {
    beta: f64,
    length: f64,
    eos: EosField<'a>,
}

enum EosField<'a> {
    Uniform(LocalEos),
    Varying(&'a EosModel),
}

impl<'a> PressureProfile<'a> {
    pub(crate) fn new(pipe: &Pipe, model: &'a EosModel) -> Result<Self> {
        Self::from_parts(pipe.geometry.beta(), pipe.geometry.length, model)
    }

    pub(crate) fn from_parts(beta: f64, length: f64, model: &'a EosModel) -> Result<Self> {
        let eos = if model.is_isothermal() {
            EosField::Uniform(model.local_at(0.0)?)
        } else {
            model.local_at(0.0)?;
            EosField::Varying(model)
        };
        Ok(PressureProfile { beta, length, eos })
    }

    fn density(&self, p: f64, x: f64) -> f64 {
        match &self.eos {
            EosField::Uniform(e) => e.density(p),
            EosField::Varying(m) => m.local_at(x).map(|e| e.density(p)).unwrap_or(f64::NAN),
        }
    }

    /// Integrates from `x = 0` at pressure `p0` to `x = L`, recording the
    /// pressure at each of `stops` (ascending, inside `[0, L]`). `None` when
    /// the pressure collapses before the outlet.
    pub(crate) fn integrate(&self, p0: f64, phi: f64, stops: &[f64]) -> Option<(f64, Vec<f64>)> {
        let k = -self.beta * phi * phi.abs();
        let rhs = |x: f64, p: f64| {
            if p <= 0.0 {
                f64::NAN
            } else {
                k / self.density(p, x)
            }
        };
        let mut samples = Vec::with_capacity(stops.len());
        let mut x = 0.0;
        let mut p = p0;
        let mut h = self.length / 64.0;
        for &target in stops.iter().chain(std::iter::once(&self.length)) {
            if target > x {
                (p, h) = dopri_segment(&rhs, x, p, target, h)?;
                x = target;
            }
            samples.push(p);
        }
        samples.pop();
        Some((p, samples))
    }

    /// Outlet pressure for inlet `p0` and flux `phi`; zero on collapse.
    fn outlet(&self, p0: f64, phi: f64) -> f64 {
        self.integrate(p0, phi, &[]).map_or(0.0, |(p, _)| p.max(0.0))
    }
}

/// One Dormand-Prince 5(4) integration from `x0` to `x1`.
fn dopri_segment<F: Fn(f64, f64) -> f64>(f: &F, x0: f64, y0: f64, x1: f64, mut h: f64) -> Option<(f64, f64)> {
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A2: [f64; 1] = [1.0 / 5.0];
    const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
    const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
    const A6: [f64; 5] = [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ];
    const B: [f64; 6] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ];
    const E: [f64; 7] = [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ];
    let span = x1 - x0;
    let (mut x, mut y) = (x0, y0);
    let mut k1 = f(x, y);
    let mut steps = 0usize;
    while x < x1 {
        if !k1.is_finite() {
            return None;
        }
        steps += 1;
        if steps > 1_000_000 || h < 1e-12 * span {
            return None;
        }
        let last = x + h >= x1;
        let hs = if last { x1 - x } else { h };
        let k2 = f(x + C[0] * hs, y + hs * A2[0] * k1);
        let k3 = f(x + C[1] * hs, y + hs * (A3[0] * k1 + A3[1] * k2));
        let k4 = f(x + C[2] * hs, y + hs * (A4[0] * k1 + A4[1] * k2 + A4[2] * k3));
        let k5 = f(
            x + C[3] * hs,
            y + hs * (A5[0] * k1 + A5[1] * k2 + A5[2] * k3 + A5[3] * k4),
        );
        let k6 = f(
            x + C[4] * hs,
            y + hs * (A6[0] * k1 + A6[1] * k2 + A6[2] * k3 + A6[3] * k4 + A6[4] * k5),
        );
        let y_new = y + hs * (B[0] * k1 + B[2] * k3 + B[3] * k4 + B[4] * k5 + B[5] * k6);
        let k7 = f(x + hs, y_new);
        let err = hs * (E[0] * k1 + E[2] * k3 + E[3] * k4 + E[4] * k5 + E[5] * k6 + E[6] * k7);
        let scale = ATOL + RTOL * y.abs().max(y_new.abs());
        let ratio = if y_new.is_finite() && k7.is_finite() {
            (err / scale).abs()
        } else {
            f64::INFINITY
        };
        if ratio <= 1.0 {
            x = if last { x1 } else { x + hs };
            y = y_new;
            k1 = k7;
            if !last {
                h = hs * (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0);
            }
        } else {
            h = hs
                * if ratio.is_finite() {
                    (0.9 * ratio.powf(-0.2)).max(0.1)
                } else {
                    0.1
                };
        }
    }
    Some((y, h))
}

struct Problem<'a> {
    net: &'a Network,
    profiles: Vec<PressureProfile<'a>>,
    /// Boost at (inlet, outlet) of each pipe.
    alpha: Vec<(f64, f64)>,
    unknown: Vec<usize>,
    fixed: Vec<Option<f64>>,
    withdrawal: Vec<f64>,
    /// kg/s; converts relative pressure mismatches into flow units.
    flow_scale: f64,
}

impl Problem<'_> {
    /// Node pressures and pipe fluxes packed in `z`.
    fn split<'z>(&self, z: &'z DVector<f64>) -> (Vec<f64>, &'z [f64]) {
        let m = self.unknown.len();
        let mut p: Vec<f64> = self.fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (k, &node) in self.unknown.iter().enumerate() {
            p[node] = z[k];
        }
        (p, &z.as_slice()[m..])
    }

    fn area(&self, k: usize) -> f64 {
        self.net.pipes[k].geometry.area()
    }

    /// Nodal balances (kg/s) followed by the outlet-pressure mismatch of each
    /// pipe, scaled to kg/s.
    fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        let (p, phi) = self.split(z);
        let balances = self.unknown.iter().map(|&node| {
            self.net
                .incidence(node)
                .iter()
                .map(|inc| inc.sgn() * self.area(inc.pipe) * phi[inc.pipe])
                .sum::<f64>()
                - self.withdrawal[node]
        });
        let mismatches = self.net.links.iter().enumerate().map(|(k, l)| {
            let (ai, ao) = self.alpha[k];
            let target = ao * p[l.to];
            (self.profiles[k].outlet(ai * p[l.from], phi[k]) - target) / target * self.flow_scale
        });
        DVector::from_iterator(self.unknown.len() + phi.len(), balances.chain(mismatches))
    }

    /// Balanced flows split by hydraulic conductance (minimising
    /// `sum f_k^2 / g_k`), then pressures carried out from the slack nodes
    /// along a spanning tree.
    fn initial_guess(&self) -> Result<DVector<f64>> {
        let (m, np) = (self.unknown.len(), self.net.pipes.len());
        let mut flows: DVector<f64> = DVector::zeros(np);
        if m > 0 {
            let g = DVector::from_iterator(
                np,
                self.net.pipes.iter().map(|p| {
                    let geo = &p.geometry;
                    geo.area() * (geo.diameter / (geo.friction.max(1e-6) * geo.length)).sqrt()
                }),
            );
            let mut a: DMatrix<f64> = DMatrix::zeros(m, np);
            for (row, &node) in self.unknown.iter().enumerate() {
                for inc in self.net.incidence(node) {
                    a[(row, inc.pipe)] += inc.sgn();
                }
            }
            let q = DVector::from_iterator(m, self.unknown.iter().map(|&n| self.withdrawal[n]));
            let ag = &a * DMatrix::from_diagonal(&g);
            let y = (&ag * a.transpose())
                .lu()
                .solve(&q)
                .ok_or_else(|| Error::InfeasibleSteadyState("demand nodes are not connected to a slack node".into()))?;
            flows = ag.transpose() * y.column(0);
        }
        let phi: Vec<f64> = (0..np).map(|k| flows[k] / self.area(k)).collect();

        let mut p: Vec<Option<f64>> = self.fixed.clone();
        let mut queue: std::collections::VecDeque<usize> = (0..p.len()).filter(|&n| p[n].is_some()).collect();
        while let Some(node) = queue.pop_front() {
            let here = p[node].expect("queued nodes are known");
            for inc in self.net.incidence(node) {
                let k = inc.pipe;
                let (ai, ao) = self.alpha[k];
                let link = self.net.links[k];
                let (other, value) = match inc.side {
                    Side::Left => (link.to, self.profiles[k].outlet(ai * here, phi[k]) / ao),
                    // retrace with reversed flux; exact for a uniform law, a guess otherwise
                    Side::Right => (link.from, self.profiles[k].outlet(ao * here, -phi[k]) / ai),
                };
                if p[other].is_none() {
                    p[other] = Some(value.max(0.1 * here));
                    queue.push_back(other);
                }
            }
        }
        let mut z = DVector::zeros(m + np);
        for (k, &node) in self.unknown.iter().enumerate() {
            z[k] = p[node].ok_or_else(|| {
                Error::InfeasibleSteadyState(format!(
                    "node '{}' is not reachable from a slack node",
                    self.net.nodes[node].id
                ))
            })?;
        }
        for (k, v) in phi.into_iter().enumerate() {
            z[m + k] = v;
        }
        Ok(z)
    }
}

/// Solves the steady network for the boundary data frozen at `t0`.
///
/// Newton on node pressures and pipe fluxes together: nodal balances plus,
/// per pipe, the mismatch between the integrated outlet pressure and the
/// downstream node. Unlike a pressure-only iteration this stays smooth when
/// a pipe carries little flow.
pub fn steady_state_solve(net: &Network, t0: f64) -> Result<SteadyState> {
    net.check_compressors(t0)?;
    let profiles = net
        .pipes
        .iter()
        .map(|p| PressureProfile::new(p, &net.eos))
        .collect::<Result<Vec<_>>>()?;
    let alpha = (0..net.pipes.len())
        .map(|k| (net.alpha(k, Side::Left, t0), net.alpha(k, Side::Right, t0)))
        .collect();
    let mut fixed = Vec::with_capacity(net.nodes.len());
    let mut withdrawal = Vec::with_capacity(net.nodes.len());
    let mut unknown = Vec::new();
    for (k, node) in net.nodes.iter().enumerate() {
        match &node.kind {
            NodeKind::Slack(p) => {
                fixed.push(Some(p.evaluate(t0)));
                withdrawal.push(0.0);
            }
            NodeKind::Demand(q) => {
                fixed.push(None);
                withdrawal.push(q.evaluate(t0));
                unknown.push(k);
            }
        }
    }
    let flow_scale = withdrawal.iter().fold(1.0f64, |m, q| m.max(q.abs()));
    let problem = Problem {
        net,
        profiles,
        alpha,
        unknown,
        fixed,
        withdrawal,
        flow_scale,
    };

    let m = problem.unknown.len();
    let mut z = problem.initial_guess()?;
    let mut r = problem.residual(&z);
    let worst_node = |r: &DVector<f64>| {
        let k = r.iamax();
        if k < m {
            net.nodes[problem.unknown[k]].id.clone()
        } else {
            let l = net.links[k - m];
            net.nodes[l.to].id.clone()
        }
    };
    let mut iterations = 0;
    while r.amax() > BALANCE_TOL {
        if iterations == MAX_NEWTON {
            return Err(Error::SteadyNonConvergence {
                iterations,
                residual: r.amax(),
                node: worst_node(&r),
            });
        }
        iterations += 1;
        let n = z.len();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * if j < m { z[j] } else { z[j].abs().max(1.0) };
            let mut zh = z.clone();
            zh[j] += h;
            jac.set_column(j, &((problem.residual(&zh) - &r) / h));
        }
        let step = jac
            .lu()
            .solve(&(-&r))
            .ok_or_else(|| Error::InfeasibleSteadyState("singular Jacobian in the nodal balance".into()))?;
        let mut lambda = 1.0;
        let current = r.amax();
        loop {
            let trial = &z + lambda * &step;
            if trial.rows(0, m).iter().all(|&p| p > 0.0) {
                let rt = problem.residual(&trial);
                if rt.amax() < current || lambda < 1e-6 {
                    z = trial;
                    r = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::SteadyNonConvergence {
                    iterations,
                    residual: current,
                    node: worst_node(&r),
                });
            }
        }
    }

    let (node_pressures, phi) = problem.split(&z);
    let pipe_fluxes = phi.to_vec();
    let mut inlet_pressures = Vec::with_capacity(net.pipes.len());
    let mut outlet_pressures = Vec::with_capacity(net.pipes.len());
    for (k, l) in net.links.iter().enumerate() {
        let p_in = problem.alpha[k].0 * node_pressures[l.from];
        let (p_out, _) = problem.profiles[k]
            .integrate(p_in, pipe_fluxes[k], &[])
            .ok_or_else(|| {
                Error::InfeasibleSteadyState(format!("pressure in pipe '{}' drops to zero", net.pipes[k].label))
            })?;
        inlet_pressures.push(p_in);
        outlet_pressures.push(p_out);
    }
    Ok(SteadyState {
        node_pressures,
        pipe_fluxes,
        inlet_pressures,
        outlet_pressures,
        iterations,
        residual: r.rows(0, m).amax(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CompressorSide, NetworkBuilder};
    use crate::pipe::PipeGeometry;
    use crate::profiles::TimeProfile;
    use approx::assert_relative_eq;

    #[test]
    fn ideal_gas_pressure_squared_is_linear() {
        let c = 350.0;
        let model = EosModel::ideal(c);
        let (beta, length, phi, p0) = (0.01 / (2.0 * 0.9144), 50_000.0, 250.0, 6.0e6);
        let prof = PressureProfile::from_parts(beta, length, &model).unwrap();
        let stops: Vec<f64> = (0..10).map(|i| 5000.0 * i as f64 + 2500.0).collect();
        let (p_end, samples) = prof.integrate(p0, phi, &stops).unwrap();
        let exact = |x: f64| (p0 * p0 - 2.0 * beta * c * c * phi * phi * x).sqrt();
        assert_relative_eq!(p_end, exact(length), max_relative = 1e-8);
        for (x, p) in stops.iter().zip(samples) {
            assert_relative_eq!(p, exact(*x), max_relative = 1e-8);
        }
    }

    #[test]
    fn cnga_profile_matches_closed_form() {
        // b1/RT p^2/2 + b2/RT p^3/3 falls linearly in x
        let model = EosModel::reference_cnga();
        let LocalEos::Quadratic { b1, b2, rt } = model.local_at(0.0).unwrap() else {
            unreachable!()
        };
        let beta = 0.01 / (2.0 * 0.9144);
        let prof = PressureProfile::from_parts(beta, 70_000.0, &model).unwrap();
        let (p_end, _) = prof.integrate(5.13e6, 350.0, &[]).unwrap();
        let h = |p: f64| b1 / rt * p * p / 2.0 + b2 / rt * p * p * p / 3.0;
        assert_relative_eq!(
            h(5.13e6) - h(p_end),
            beta * 350.0 * 350.0 * 70_000.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn reversed_flux_retraces_the_profile() {
        let model = EosModel::reference_cnga();
        let prof = PressureProfile::from_parts(0.015 / (2.0 * 0.635), 60_000.0, &model).unwrap();
        for phi in [-300.0, -20.0, 5.0, 210.0] {
            let p_out = prof.outlet(4.6e6, phi);
            assert_relative_eq!(prof.outlet(p_out, -phi), 4.6e6, max_relative = 1e-10);
        }
    }

    #[test]
    fn collapse_is_detected() {
        let model = EosModel::reference_cnga();
        let prof = PressureProfile::from_parts(0.01, 100_000.0, &model).unwrap();
        assert!(prof.integrate(1e6, 2000.0, &[]).is_none());
    }

    #[test]
    fn no_withdrawal_means_uniform_pressure() {
        let net = NetworkBuilder::new(EosModel::reference_cnga())
            .slack("a", TimeProfile::constant(5e6))
            .demand("b", TimeProfile::constant(0.0))
            .demand("c", TimeProfile::constant(0.0))
            .pipe("p", "a", "b", PipeGeometry::new(10_000.0, 0.9, 0.01).unwrap())
            .pipe("q", "b", "c", PipeGeometry::new(20_000.0, 0.6, 0.01).unwrap())
            .build(1000.0)
            .unwrap();
        let s = steady_state_solve(&net, 0.0).unwrap();
        assert!(s.node_pressures.iter().all(|&p| p == 5e6));
        assert!(s.pipe_fluxes.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn loop_with_compressor_balances() {
        let geom = PipeGeometry::new(30_000.0, 0.9144, 0.01).unwrap();
        let net = NetworkBuilder::new(EosModel::reference_cnga())
            .slack("s", TimeProfile::constant(4e6))
            .demand("a", TimeProfile::constant(50.0))
            .demand("b", TimeProfile::constant(120.0))
            .pipe("p1", "s", "a", geom)
            .pipe("p2", "a", "b", geom)
            .pipe("p3", "s", "b", geom)
            .compressor("c", "p1", CompressorSide::Inlet, TimeProfile::constant(1.3))
            .build(1000.0)
            .unwrap();
        let s = steady_state_solve(&net, 0.0).unwrap();
        assert!(s.residual <= BALANCE_TOL);
        let area = geom.area();
        let f: Vec<f64> = s.pipe_fluxes.iter().map(|p| p * area).collect();
        assert_relative_eq!(f[0] + f[2], 170.0, max_relative = 1e-9);
        assert_relative_eq!(f[0] - f[1], 50.0, max_relative = 1e-9);
        assert_relative_eq!(s.inlet_pressures[0], 1.3 * 4e6, max_relative = 1e-15);
    }
}
