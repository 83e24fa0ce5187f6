//! Finite-volume Laplacian on the two-chart polar grid.
//!
//! Rings are ordered along the sphere from `ζ = 0` to `ζ = ∞`: the rings of
//! chart `Zero` in ascending radius, then the rings of chart `Infinity` in
//! descending radius. Cell faces sit at geometric means of neighbouring
//! radii, so the radial conductances are `Δθ/Δt` in `t = log|ζ|` and
//! functions linear in `t` are discretely harmonic away from the poles.
//! The outer rings of the two charts share a face on `|ζ| = 1`.
//!
//! With `M = −Δ_h` and the chart-local FS potential `ρ_c`, the discrete
//! measure of a global weight `V` is `μ = b − M V`, `b = Δ_h ρ_c`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::geometry::{fs_potential, Chart, QuadratureGrid};

#[derive(Clone)]
pub(crate) struct SphereOperator {
    n_rings: usize,
    n_theta: usize,
    /// First node index of each sphere-ordered ring.
    ring_start: Vec<usize>,
    /// Conductance between ring `q` and ring `q + 1`.
    up: Vec<f64>,
    /// Angular conductance within ring `q`.
    ang: Vec<f64>,
    /// `Δ_h ρ_c` per ring.
    source: Vec<f64>,
}

impl SphereOperator {
    pub fn new(grid: &QuadratureGrid) -> Self {
        let n_r = grid.n_r();
        let n_theta = grid.n_theta();
        let dtheta = 2.0 * PI / n_theta as f64;
        let n_rings = 2 * n_r;
        let radii = grid.radii();

        let ring = |q: usize| -> (Chart, usize) {
            if q < n_r {
                (Chart::Zero, q)
            } else {
                (Chart::Infinity, n_rings - 1 - q)
            }
        };
        let t: Vec<f64> = (0..n_rings)
            .map(|q| {
                let (c, i) = ring(q);
                grid.ring_log_modulus(c, i)
            })
            .collect();
        let ring_start = (0..n_rings)
            .map(|q| {
                let (c, i) = ring(q);
                grid.index(c, i, 0)
            })
            .collect();
        let up: Vec<f64> = (0..n_rings - 1).map(|q| dtheta / (t[q + 1] - t[q])).collect();

        // Chart-local cell extents in the radial direction.
        let extent: Vec<f64> = (0..n_r)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { (radii[i - 1] * radii[i]).sqrt() };
                let hi = if i + 1 == n_r { 1.0 } else { (radii[i] * radii[i + 1]).sqrt() };
                hi - lo
            })
            .collect();
        let ang = (0..n_rings)
            .map(|q| {
                let (_, i) = ring(q);
                extent[i] / (radii[i] * dtheta)
            })
            .collect();

        let rho_local = |q: usize, tt: f64| -> f64 {
            match ring(q).0 {
                Chart::Zero => fs_potential(tt),
                Chart::Infinity => fs_potential(-tt),
            }
        };
        let source = (0..n_rings)
            .map(|q| {
                let mut b = 0.0;
                if q > 0 {
                    b += up[q - 1] * (rho_local(q, t[q - 1]) - rho_local(q, t[q]));
                }
                if q + 1 < n_rings {
                    b += up[q] * (rho_local(q, t[q + 1]) - rho_local(q, t[q]));
                }
                b
            })
            .collect();

        Self { n_rings, n_theta, ring_start, up, ang, source }
    }

    pub fn n_rings(&self) -> usize {
        self.n_rings
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn len(&self) -> usize {
        self.n_rings * self.n_theta
    }

    pub fn ring_start(&self, q: usize) -> usize {
        self.ring_start[q]
    }

    pub fn source_of_ring(&self, q: usize) -> f64 {
        self.source[q]
    }

    /// Diagonal of `M` in ring `q`.
    pub fn diag(&self, q: usize) -> f64 {
        let mut d = 2.0 * self.ang[q];
        if q > 0 {
            d += self.up[q - 1];
        }
        if q + 1 < self.n_rings {
            d += self.up[q];
        }
        d
    }

    /// `b` expanded to grid order.
    pub fn source(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for q in 0..self.n_rings {
            let s = self.ring_start[q];
            out[s..s + self.n_theta].fill(self.source[q]);
        }
        out
    }

    /// Diagonal of `M` in grid order.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for q in 0..self.n_rings {
            let s = self.ring_start[q];
            out[s..s + self.n_theta].fill(self.diag(q));
        }
        out
    }

    /// `y = M x`, computed ring by ring in parallel.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nt = self.n_theta;
        let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(self.n_rings);
        // Hand out each ring's output slice, keyed by sphere order.
        let mut slices: Vec<Option<&mut [f64]>> = y.chunks_mut(nt).map(Some).collect();
        for q in 0..self.n_rings {
            let chunk = slices[self.ring_start[q] / nt].take().expect("ring visited twice");
            rows.push((q, chunk));
        }
        rows.into_par_iter().for_each(|(q, out)| {
            let s = self.ring_start[q];
            let xs = &x[s..s + nt];
            let below = (q > 0).then(|| &x[self.ring_start[q - 1]..self.ring_start[q - 1] + nt]);
            let above = (q + 1 < self.n_rings)
                .then(|| &x[self.ring_start[q + 1]..self.ring_start[q + 1] + nt]);
            let d = self.diag(q);
            let a = self.ang[q];
            for k in 0..nt {
                let left = xs[(k + nt - 1) % nt];
                let right = xs[(k + 1) % nt];
                let mut v = d * xs[k] - a * (left + right);
                if let Some(b) = below {
                    v -= self.up[q - 1] * b[k];
                }
                if let Some(b) = above {
                    v -= self.up[q] * b[k];
                }
                out[k] = v;
            }
        });
    }

    /// Neighbour sum `Σ_nb c·x_nb` at one node, for relaxation sweeps.
    #[inline]
    pub fn neighbour_sum(&self, q: usize, k: usize, x: &[f64]) -> f64 {
        let nt = self.n_theta;
        let s = self.ring_start[q];
        let mut acc = self.ang[q] * (x[s + (k + nt - 1) % nt] + x[s + (k + 1) % nt]);
        if q > 0 {
            acc += self.up[q - 1] * x[self.ring_start[q - 1] + k];
        }
        if q + 1 < self.n_rings {
            acc += self.up[q] * x[self.ring_start[q + 1] + k];
        }
        acc
    }
}

/// Exact solver for `M + diag(s)` where `s` is constant on rings, with an
/// optional set of frozen rings replaced by identity rows (Dirichlet data).
/// Fourier in angle, then one tridiagonal solve per angular mode.
pub(crate) struct RingSolver {
    n_rings: usize,
    n_theta: usize,
    ring_start: Vec<usize>,
    /// Coupling of ring `q` to ring `q − 1`.
    lower: Vec<f64>,
    /// Thomas factors per mode: modified super-diagonal and inverse pivots.
    c_prime: Vec<f64>,
    inv_pivot: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl RingSolver {
    pub fn new(op: &SphereOperator, shift: &[f64], frozen: &[bool]) -> Self {
        let nr = op.n_rings;
        let nt = op.n_theta;
        let coupling = |q: usize| -> f64 {
            if frozen[q] || frozen[q + 1] {
                0.0
            } else {
                -op.up[q]
            }
        };
        let lower: Vec<f64> = (0..nr).map(|q| if q == 0 { 0.0 } else { coupling(q - 1) }).collect();
        let upper: Vec<f64> = (0..nr).map(|q| if q + 1 == nr { 0.0 } else { coupling(q) }).collect();
        let mut c_prime = vec![0.0; nt * nr];
        let mut inv_pivot = vec![0.0; nt * nr];
        c_prime.par_chunks_mut(nr).zip(inv_pivot.par_chunks_mut(nr)).enumerate().for_each(
            |(m, (cp, ip))| {
                let eig = 2.0 * (1.0 - (2.0 * PI * m as f64 / nt as f64).cos());
                let mut prev_c = 0.0;
                for q in 0..nr {
                    let diag = if frozen[q] {
                        1.0
                    } else {
                        op.diag(q) - 2.0 * op.ang[q] + op.ang[q] * eig + shift[q]
                    };
                    let pivot = diag - lower[q] * prev_c;
                    ip[q] = 1.0 / pivot;
                    prev_c = upper[q] / pivot;
                    cp[q] = prev_c;
                }
            },
        );
        let mut planner = FftPlanner::new();
        Self {
            n_rings: nr,
            n_theta: nt,
            ring_start: op.ring_start.clone(),
            lower,
            c_prime,
            inv_pivot,
            forward: planner.plan_fft_forward(nt),
            inverse: planner.plan_fft_inverse(nt),
        }
    }

    /// Solves in place for a right-hand side in grid order.
    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let nr = self.n_rings;
        let nt = self.n_theta;
        // Ring-major spectrum.
        let mut spec = vec![Complex64::new(0.0, 0.0); nr * nt];
        spec.par_chunks_mut(nt).enumerate().for_each(|(q, row)| {
            let s = self.ring_start[q];
            for (c, &v) in row.iter_mut().zip(&rhs[s..s + nt]) {
                *c = Complex64::new(v, 0.0);
            }
            self.forward.process(row);
        });
        // Mode-major copy for the tridiagonal sweeps.
        let mut modes = vec![Complex64::new(0.0, 0.0); nr * nt];
        modes.par_chunks_mut(nr).enumerate().for_each(|(m, col)| {
            for q in 0..nr {
                col[q] = spec[q * nt + m];
            }
            let cp = &self.c_prime[m * nr..(m + 1) * nr];
            let ip = &self.inv_pivot[m * nr..(m + 1) * nr];
            col[0] *= ip[0];
            for q in 1..nr {
                col[q] = (col[q] - self.lower[q] * col[q - 1]) * ip[q];
            }
            for q in (0..nr - 1).rev() {
                col[q] -= cp[q] * col[q + 1];
            }
        });
        spec.par_chunks_mut(nt).enumerate().for_each(|(q, row)| {
            for (m, c) in row.iter_mut().enumerate() {
                *c = modes[m * nr + q];
            }
            self.inverse.process(row);
        });
        let scale = 1.0 / nt as f64;
        for q in 0..nr {
            let s = self.ring_start[q];
            for k in 0..nt {
                out[s + k] = spec[q * nt + k].re * scale;
            }
        }
    }
}

/// `log|ζ|` of the rings of `grid` in sphere order.
fn sphere_ring_t(grid: &QuadratureGrid) -> Vec<(f64, usize)> {
    let n_r = grid.n_r();
    (0..2 * n_r)
        .map(|q| {
            let (c, i) = if q < n_r { (Chart::Zero, q) } else { (Chart::Infinity, 2 * n_r - 1 - q) };
            (grid.ring_log_modulus(c, i), grid.index(c, i, 0))
        })
        .collect()
}

/// Interpolates a field between grids: linear in `log|ζ|` and periodic
/// linear in angle, constant beyond the outermost rings.
pub(crate) fn transfer(from: &QuadratureGrid, values: &[f64], to: &QuadratureGrid) -> Vec<f64> {
    let src = sphere_ring_t(from);
    let nt_from = from.n_theta();
    let nt_to = to.n_theta();
    let mut out = vec![0.0; to.len()];
    for (t, start) in sphere_ring_t(to) {
        let j = src.partition_point(|&(ts, _)| ts < t);
        let (lo, hi, f) = if j == 0 {
            (0, 0, 0.0)
        } else if j == src.len() {
            (j - 1, j - 1, 0.0)
        } else {
            (j - 1, j, (t - src[j - 1].0) / (src[j].0 - src[j - 1].0))
        };
        for k in 0..nt_to {
            let x = k as f64 * nt_from as f64 / nt_to as f64;
            let k0 = x.floor() as usize % nt_from;
            let k1 = (k0 + 1) % nt_from;
            let g = x - x.floor();
            let ring = |q: usize| {
                let s = src[q].1;
                values[s + k0] * (1.0 - g) + values[s + k1] * g
            };
            out[start + k] = ring(lo) * (1.0 - f) + ring(hi) * f;
        }
    }
    out
}
