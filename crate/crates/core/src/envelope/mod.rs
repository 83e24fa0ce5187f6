//! Equilibrium weights.
//!
//! `V_φ = sup{u ω_FS-psh : u ≤ φ}` is computed on the grid as the solution
//! of a discrete obstacle problem for the chart-local potential
//! `v = u + ρ_c`. For radial weights the exact envelope is also available
//! through [`radial_envelope`].

mod obstacle;
mod operator;
pub mod radial;
pub mod weight;

use std::f64::consts::PI;

pub use radial::{radial_envelope, RadialWeight, SupportingLines, DEFAULT_SLOPE_SAMPLES};
pub use weight::{field_hash, local_from_global, NodalWeight, RadialFamily, WeightField};

use crate::error::{Error, Result};
use crate::geometry::QuadratureGrid;
use crate::measure::EmpiricalMeasure;
use operator::SphereOperator;

/// Default sup-norm tolerance of the obstacle solver.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Nodal masses below this are an error rather than rounding noise.
pub const NEGATIVE_MASS_CLAMP: f64 = 1e-8;

/// Default iteration cap, `200·N_r`.
pub fn default_max_iter(grid: &QuadratureGrid) -> usize {
    200 * grid.n_r()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeMethod {
    /// Discrete obstacle problem on the grid.
    Obstacle,
    /// Exact radial envelope sampled at the nodes.
    Radial,
}

/// Envelope of a weight on one grid. All fields are in grid node order.
#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub dims: (usize, usize),
    pub weight_hash: String,
    /// `φ`.
    pub phi: Vec<f64>,
    /// `V_φ = φ_eq`.
    pub phi_eq: Vec<f64>,
    /// Chart-local `ψ = ρ_c + φ`.
    pub psi: Vec<f64>,
    /// Chart-local `ψ_eq = ρ_c + φ_eq`.
    pub psi_eq: Vec<f64>,
    pub contact_mask: Vec<bool>,
    /// Discrete `dd^c ψ_eq` per node (unclamped).
    pub node_mass: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: EnvelopeMethod,
}

impl EnvelopeResult {
    pub fn psi_h(&self) -> Vec<f64> {
        psi_h(self)
    }
}

fn assemble(
    grid: &QuadratureGrid,
    weight_hash: String,
    phi: Vec<f64>,
    phi_eq: Vec<f64>,
    mu: Vec<f64>,
    tol: f64,
    stats: (f64, usize, bool, EnvelopeMethod),
) -> EnvelopeResult {
    let psi = local_from_global(grid, &phi);
    let psi_eq = local_from_global(grid, &phi_eq);
    let contact_mask = phi.iter().zip(&phi_eq).map(|(p, v)| p - v <= 10.0 * tol).collect();
    let node_mass = mu.iter().map(|m| m / (2.0 * PI)).collect();
    let (residual, iterations, converged, method) = stats;
    EnvelopeResult {
        dims: grid.dims(),
        weight_hash,
        phi,
        phi_eq,
        psi,
        psi_eq,
        contact_mask,
        node_mass,
        residual,
        iterations,
        converged,
        method,
    }
}

/// Envelope by the grid obstacle solver. A non-converged result is returned
/// with `converged = false`.
pub fn psh_envelope(
    phi: &WeightField,
    grid: &QuadratureGrid,
    tol: f64,
    max_iter: usize,
) -> Result<EnvelopeResult> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("envelope tolerance must be positive, got {tol}")));
    }
    let values = phi.sample_phi(grid)?;
    let hash = field_hash(grid.dims(), &values);
    let out = solve_multilevel(grid, &values, tol, max_iter)?;
    if !out.converged {
        log::warn!(
            "envelope solver stopped after {} iterations with residual {:.3e} (tol {tol:.1e})",
            out.iterations,
            out.residual
        );
    }
    Ok(assemble(
        grid,
        hash,
        values,
        out.v,
        out.mu,
        tol,
        (out.residual, out.iterations, out.converged, EnvelopeMethod::Obstacle),
    ))
}

/// Grids below this size are solved from scratch.
const COARSEST: usize = 32;

/// Solves on a grid of half the resolution first and starts from the
/// interpolated coarse envelope.
fn solve_multilevel(
    grid: &QuadratureGrid,
    phi: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<obstacle::ObstacleOutcome> {
    let (n_r, n_theta) = grid.dims();
    let start = if n_r >= 2 * COARSEST && n_theta >= 2 * COARSEST {
        let coarse = crate::geometry::build_grid(n_r / 2, n_theta / 2)?;
        let coarse_phi = operator::transfer(grid, phi, &coarse);
        let sol = solve_multilevel(&coarse, &coarse_phi, tol, max_iter)?;
        Some(operator::transfer(&coarse, &sol.v, grid))
    } else {
        None
    };
    let op = SphereOperator::new(grid);
    Ok(obstacle::solve_obstacle(&op, phi, start, tol, max_iter))
}

/// Envelope of a radial weight from its exact radial envelope.
pub fn radial_equilibrium(
    phi: &WeightField,
    grid: &QuadratureGrid,
    slope_samples: usize,
) -> Result<EnvelopeResult> {
    let profile = phi
        .radial_profile()
        .ok_or_else(|| Error::Usage("radial envelope requested for a non-radial weight".into()))?;
    let lines = SupportingLines::of(&profile, slope_samples)?;
    let values = phi.sample_phi(grid)?;
    let hash = field_hash(grid.dims(), &values);
    let phi_eq: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(&values)
        .map(|(pt, &p)| {
            let t = pt.log_modulus();
            let rho = crate::geometry::fs_potential(t);
            (lines.eval(t) - rho).min(p)
        })
        .collect();
    let op = SphereOperator::new(grid);
    let mut mu = vec![0.0; values.len()];
    op.apply(&phi_eq, &mut mu);
    for (m, b) in mu.iter_mut().zip(op.source()) {
        *m = b - *m;
    }
    Ok(assemble(grid, hash, values, phi_eq, mu, DEFAULT_TOL, (0.0, 0, true, EnvelopeMethod::Radial)))
}

/// Discrete `dd^c(ρ_c + f)` of a global field `f`, as node masses.
pub fn ddc_masses(grid: &QuadratureGrid, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != grid.len() {
        return Err(Error::InvalidField(format!("{} samples for {} nodes", f.len(), grid.len())));
    }
    let op = SphereOperator::new(grid);
    let mut mu = vec![0.0; f.len()];
    op.apply(f, &mut mu);
    Ok(mu.iter().zip(op.source()).map(|(m, b)| (b - m) / (2.0 * PI)).collect())
}

/// `Ψ_h = φ_eq − φ ≤ 0`.
pub fn psi_h(env: &EnvelopeResult) -> Vec<f64> {
    env.phi_eq.iter().zip(&env.phi).map(|(e, p)| e - p).collect()
}

/// Discrete `dd^c ψ_eq` as an atomic measure on the grid nodes.
pub fn equilibrium_measure(env: &EnvelopeResult, grid: &QuadratureGrid) -> Result<EmpiricalMeasure> {
    if env.dims != grid.dims() {
        return Err(Error::Usage("envelope was computed on a different grid".into()));
    }
    if !env.converged {
        return Err(Error::SolverQuality(format!(
            "envelope did not converge (residual {:.3e})",
            env.residual
        )));
    }
    let mut atoms = Vec::with_capacity(grid.len());
    for (i, (&m, pt)) in env.node_mass.iter().zip(grid.nodes()).enumerate() {
        if m < -NEGATIVE_MASS_CLAMP {
            return Err(Error::SolverQuality(format!("negative mass {m:.3e} at node {i}")));
        }
        if m > 0.0 {
            atoms.push((*pt, m));
        }
    }
    Ok(EmpiricalMeasure::new(atoms))
}
