//! Discrete obstacle problem `V ≤ φ`, `μ = b − M V ≥ 0`, `(φ − V)·μ = 0`.
//!
//! Solved by a primal–dual active set iteration. Each step fixes `V = φ` on
//! the predicted contact set and solves the Dirichlet problem on the rest
//! by conjugate gradients, preconditioned with the exact ring solver in
//! which fully active rings are frozen (slightly shifted when none are). A few projected SOR sweeps finish the job, and
//! take over completely if the active set iteration stalls.

use rayon::prelude::*;

use super::operator::{RingSolver, SphereOperator};
use crate::stats::NeumaierSum;

/// Relative shift `M + ε·diag(b)` of the preconditioner when no ring is frozen.
const PRECOND_SHIFT: f64 = 1e-3;
const CG_REL_TOL: f64 = 1e-13;
const CG_MAX_ITER: usize = 2000;
const SOR_OMEGA: f64 = 1.5;
const POLISH_SWEEPS: usize = 4;
const CHUNK: usize = 4096;

#[derive(Debug, Clone)]
pub(crate) struct ObstacleOutcome {
    pub v: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Deterministic parallel dot product: fixed chunks, compensated total.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    let mut s = NeumaierSum::default();
    for p in parts {
        s.add(p);
    }
    s.total()
}

struct Problem<'a> {
    op: &'a SphereOperator,
    phi: &'a [f64],
    b: Vec<f64>,
    d: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(op: &'a SphereOperator, phi: &'a [f64]) -> Self {
        Self { op, phi, b: op.source(), d: op.diagonal() }
    }

    fn preconditioner(&self, inactive: &[bool]) -> RingSolver {
        let nt = self.op.n_theta();
        let frozen: Vec<bool> = (0..self.op.n_rings())
            .map(|q| {
                let s = self.op.ring_start(q);
                inactive[s..s + nt].iter().all(|i| !i)
            })
            .collect();
        let eps = if frozen.iter().any(|&f| f) { 0.0 } else { PRECOND_SHIFT };
        let shift: Vec<f64> =
            (0..self.op.n_rings()).map(|q| eps * self.op.source_of_ring(q)).collect();
        RingSolver::new(self.op, &shift, &frozen)
    }

    fn measure(&self, v: &[f64]) -> Vec<f64> {
        let mut mu = vec![0.0; v.len()];
        self.op.apply(v, &mut mu);
        mu.par_iter_mut().zip(&self.b).for_each(|(m, b)| *m = b - *m);
        mu
    }

    /// Sup norm of one projected Jacobi update.
    fn residual(&self, v: &[f64], mu: &[f64]) -> f64 {
        v.par_iter()
            .zip(mu)
            .zip(self.phi)
            .zip(&self.d)
            .map(|(((v, m), p), d)| (p - v).min(m / d).abs())
            .reduce(|| 0.0, f64::max)
    }

    /// Solves `M_II x_I = b_I − M_IA φ_A` starting from `v` restricted to the
    /// inactive set, with `v = φ` on the active set.
    fn restricted_solve(&self, v: &mut [f64], inactive: &[bool]) -> usize {
        let n = v.len();
        let mask = |x: &mut [f64]| {
            x.par_iter_mut().zip(inactive).for_each(|(x, &i)| {
                if !i {
                    *x = 0.0;
                }
            })
        };
        let precond = self.preconditioner(inactive);
        let mut r = self.measure(v);
        mask(&mut r);
        let rhs_norm = dot(&self.b, &self.b).sqrt();
        let mut z = vec![0.0; n];
        precond.solve(&r, &mut z);
        mask(&mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        for it in 1..=CG_MAX_ITER {
            if dot(&r, &r).sqrt() <= CG_REL_TOL * rhs_norm {
                return it - 1;
            }
            self.op.apply(&p, &mut ap);
            mask(&mut ap);
            let alpha = rz / dot(&p, &ap);
            if !alpha.is_finite() {
                return it;
            }
            v.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.par_iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
            precond.solve(&r, &mut z);
            mask(&mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        CG_MAX_ITER
    }

    /// Projected SOR sweeps in natural order, returning the last update size.
    fn psor(&self, v: &mut [f64], sweeps: usize) -> f64 {
        let op = self.op;
        let nt = op.n_theta();
        let mut last = 0.0;
        for _ in 0..sweeps {
            last = 0.0f64;
            for q in 0..op.n_rings() {
                let s = op.ring_start(q);
                let d = op.diag(q);
                let b = op.source_of_ring(q);
                for k in 0..nt {
                    let i = s + k;
                    let gs = (b + op.neighbour_sum(q, k, v)) / d;
                    let new = (v[i] + SOR_OMEGA * (gs - v[i])).min(self.phi[i]);
                    last = last.max((new - v[i]).abs());
                    v[i] = new;
                }
            }
        }
        last
    }
}

pub(crate) fn solve_obstacle(
    op: &SphereOperator,
    phi: &[f64],
    start: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
) -> ObstacleOutcome {
    let pb = Problem::new(op, phi);
    let n = phi.len();
    let mut v = match start {
        Some(mut v) => {
            v.iter_mut().zip(phi).for_each(|(v, p)| *v = v.min(*p));
            v
        }
        None => phi.to_vec(),
    };
    let mut mu = pb.measure(&v);
    let mut active_prev: Option<Vec<bool>> = None;
    let mut iterations = 0;
    let mut residual = pb.residual(&v, &mu);

    while residual > tol && iterations < max_iter {
        iterations += 1;
        let active: Vec<bool> = (0..n)
            .into_par_iter()
            .map(|i| mu[i] + pb.d[i] * (v[i] - phi[i]) > 0.0)
            .collect();
        let repeated = active_prev.as_ref().is_some_and(|a| *a == active);
        let inactive: Vec<bool> = active.iter().map(|a| !a).collect();
        v.par_iter_mut().zip(phi).zip(&active).for_each(|((v, p), &a)| {
            if a {
                *v = *p;
            }
        });
        let cg = pb.restricted_solve(&mut v, &inactive);
        v.par_iter_mut().zip(phi).for_each(|(v, p)| *v = v.min(*p));
        mu = pb.measure(&v);
        residual = pb.residual(&v, &mu);
        log::debug!("active set step {iterations}: {} active, {cg} cg steps, residual {residual:.3e}",
            active.iter().filter(|&&a| a).count());
        if repeated && residual > tol {
            // The active set has settled; the rest is local cleanup.
            pb.psor(&mut v, POLISH_SWEEPS);
            mu = pb.measure(&v);
            residual = pb.residual(&v, &mu);
            if residual > tol {
                break;
            }
        }
        active_prev = Some(active);
    }
    while residual > tol && iterations < max_iter {
        iterations += 1;
        pb.psor(&mut v, 1);
        mu = pb.measure(&v);
        residual = pb.residual(&v, &mu);
    }
    ObstacleOutcome { v, mu, iterations, residual, converged: residual <= tol }
}
