//! Junction coupling: nodal pressure solve and boundary fluxes.

use crate::eos::LocalEos;
use crate::error::{Error, Result};
use crate::pipe::{boundary_flux_value, Side};

/// What a node needs to know about one adjoining pipe end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndData {
    pub side: Side,
    pub area: f64,
    pub dx: f64,
    /// End-cell density on the current layer.
    pub rho_end: f64,
    /// Freshly updated flux on the interior face next to the end.
    pub phi_adjacent: f64,
    /// Boost between the node and the pipe end (1 without compressor).
    pub alpha: f64,
    pub eos: LocalEos,
}

impl EndData {
    /// `+1` when the pipe enters the node (its right end), `-1` when it leaves.
    #[inline]
    pub fn sgn(&self) -> f64 {
        match self.side {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    #[inline]
    pub fn target_density(&self, p_node: f64) -> f64 {
        self.eos.density(self.alpha * p_node)
    }
}

/// Right-hand side `sum w rho_end + sum sgn S phi_adj - q`, `w = S dx / dt`.
fn nodal_rhs(ends: &[EndData], q: f64, dt: f64) -> f64 {
    ends.iter()
        .map(|e| e.area * e.dx / dt * e.rho_end + e.sgn() * e.area * e.phi_adjacent)
        .sum::<f64>()
        - q
}

/// `sum w rho(alpha p)`, the stored mass the node pressure implies.
fn nodal_lhs(ends: &[EndData], p: f64, dt: f64) -> f64 {
    ends.iter().map(|e| e.area * e.dx / dt * e.target_density(p)).sum()
}

fn infeasible(rhs: f64) -> Error {
    Error::InfeasibleNode {
        node: String::new(),
        detail: format!("withdrawal drains the node below vacuum (mass balance {rhs:.6e} kg/s)"),
    }
}

/// Node pressure on the next layer for a withdrawal `q` (kg/s).
///
/// Every supported map is `rho = lin p + quad p^2`, so the balance is the
/// quadratic `A p^2 + B p = RHS` and its positive root is taken in closed
/// form. Falls back to bisection if the closed form is not finite.
pub fn nodal_pressure_solve(ends: &[EndData], q: f64, dt: f64) -> Result<f64> {
    if ends.is_empty() {
        return Err(Error::InvalidNetwork("node has no adjoining pipes".into()));
    }
    let rhs = nodal_rhs(ends, q, dt);
    if !(rhs > 0.0) {
        return Err(infeasible(rhs));
    }
    let (mut a, mut b) = (0.0, 0.0);
    for e in ends {
        let w = e.area * e.dx / dt;
        let (lin, quad) = e.eos.density_coefficients();
        a += w * quad * e.alpha * e.alpha;
        b += w * lin * e.alpha;
    }
    let mut p = 2.0 * rhs / (b + (b * b + 4.0 * a * rhs).sqrt());
    if !(p.is_finite() && p > 0.0) {
        return nodal_pressure_bisect(ends, q, dt);
    }
    // one Newton polish against the per-end evaluation
    let f = nodal_lhs(ends, p, dt) - rhs;
    let df = b + 2.0 * a * p;
    let polished = p - f / df;
    if polished > 0.0 && (nodal_lhs(ends, polished, dt) - rhs).abs() < f.abs() {
        p = polished;
    }
    Ok(p)
}

/// Bracketed bisection on the nodal balance; valid for any increasing map.
pub fn nodal_pressure_bisect(ends: &[EndData], q: f64, dt: f64) -> Result<f64> {
    let rhs = nodal_rhs(ends, q, dt);
    if !(rhs > 0.0) {
        return Err(infeasible(rhs));
    }
    let f = |p: f64| nodal_lhs(ends, p, dt) - rhs;
    let mut lo = 0.0;
    let mut hi = ends
        .iter()
        .map(|e| e.eos.pressure(e.rho_end) / e.alpha)
        .fold(1.0, f64::max)
        * 10.0;
    let mut expansions = 0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 10.0;
        expansions += 1;
        if expansions > 60 {
            return Err(infeasible(rhs));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Boundary face flux of every adjoining end for the node pressure `p_node`.
pub fn junction_boundary_fluxes(ends: &[EndData], p_node: f64, dt: f64) -> Vec<f64> {
    ends.iter()
        .map(|e| boundary_flux_value(e.side, e.phi_adjacent, e.target_density(p_node), e.rho_end, e.dx, dt))
        .collect()
}

/// `sum sgn S phi - q`, kg/s.
pub fn flow_balance_residual(ends: &[EndData], fluxes: &[f64], q: f64) -> f64 {
    ends.iter().zip(fluxes).map(|(e, &f)| e.sgn() * e.area * f).sum::<f64>() - q
}
