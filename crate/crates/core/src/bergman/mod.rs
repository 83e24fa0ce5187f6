//! Weighted Bergman spaces of polynomials of degree at most `p`.
//!
//! A polynomial `f` of degree `≤ p` is a section of 𝒪(p) with pointwise
//! norm `|f|² e^{−2pψ}`. Inner products, orthonormal bases and the kernel
//! function are computed on the quadrature grid. To stay in range, every
//! weight factor is taken relative to `m = min φ`: the stored Gram matrix
//! is `e^{2pm}` times the true one and stored coefficients are `e^{−pm}`
//! times the true ones (`log_scale = p·m`). Kernel values need no rescaling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{field_hash, local_from_global, EnvelopeResult, WeightField};
use crate::error::{Error, Result};
use crate::geometry::{fs_integral, Chart, QuadratureGrid};
use crate::poly::RingEvaluator;

/// Largest equilibrated Gram condition number accepted.
pub const MAX_GRAM_COND: f64 = 1e14;

/// Smallest angular resolution for degree `p`.
pub fn min_n_theta(p: usize) -> usize {
    4 * p + 8
}

/// Gram matrix of the monomials `1, ζ, …, ζ^p`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub p: usize,
    pub matrix: DMatrix<Complex64>,
    pub log_scale: f64,
    pub weight_hash: String,
    pub dims: (usize, usize),
}

impl GramMatrix {
    /// Wraps an explicit Hermitian matrix (unit scale, no lineage).
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::Usage("Gram matrix must be square and nonempty".into()));
        }
        Ok(Self { p: matrix.nrows() - 1, matrix, log_scale: 0.0, weight_hash: String::new(), dims: (0, 0) })
    }

    /// `max |G − Gᴴ|` relative to the largest diagonal entry.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.matrix;
        let d = g.nrows();
        let scale = (0..d).map(|i| g[(i, i)].re.abs()).fold(0.0, f64::max);
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((g[(i, j)] - g[(j, i)].conj()).norm());
            }
        }
        worst / scale
    }
}

/// `φ` at the nodes together with the chart-local weights relative to
/// `min φ`.
struct ScaledWeight {
    phi: Vec<f64>,
    shift: f64,
    /// `ψ_c − min φ ≥ 0`.
    local: Vec<f64>,
}

fn scaled_weight(w: &WeightField, grid: &QuadratureGrid) -> Result<ScaledWeight> {
    let phi = w.sample_phi(grid)?;
    let shift = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = phi.iter().map(|v| v - shift).collect();
    let local = local_from_global(grid, &shifted);
    Ok(ScaledWeight { phi, shift, local })
}

/// All rings of the grid as `(chart, ring index)`.
fn rings(grid: &QuadratureGrid) -> Vec<(Chart, usize)> {
    [Chart::Zero, Chart::Infinity]
        .into_iter()
        .flat_map(|c| (0..grid.n_r()).map(move |i| (c, i)))
        .collect()
}

/// `G_jk = ∫ ζ^j ζ̄^k e^{−2pψ} ω_FS`, assembled over both charts.
pub fn gram_matrix(p: usize, w: &WeightField, grid: &QuadratureGrid) -> Result<GramMatrix> {
    if grid.n_theta() < min_n_theta(p) {
        return Err(Error::Config(format!(
            "degree {p} needs at least {} angular nodes, grid has {}",
            min_n_theta(p),
            grid.n_theta()
        )));
    }
    let sw = scaled_weight(w, grid)?;
    let nt = grid.n_theta();
    let d = p + 1;
    let two_p = 2.0 * p as f64;
    let rings = rings(grid);

    // Angular moments F(m) = Σ_k g_k e^{imθ_k}, m = −p..=p, and radial powers per ring.
    let fft = rustfft::FftPlanner::new().plan_fft_inverse(nt);
    let moments: Vec<(Vec<Complex64>, Vec<f64>)> = rings
        .par_iter()
        .map(|&(chart, i)| {
            let range = grid.ring_range(chart, i);
            let mut buf: Vec<Complex64> = range
                .clone()
                .map(|n| Complex64::new(grid.fs_weights()[n] * (-two_p * sw.local[n]).exp(), 0.0))
                .collect();
            fft.process(&mut buf);
            let f: Vec<Complex64> = (0..=2 * p).map(|e| buf[(e + nt - p) % nt]).collect();
            let r = grid.radii()[i];
            let mut pw = Vec::with_capacity(2 * p + 1);
            let mut x = 1.0;
            for _ in 0..=2 * p {
                pw.push(x);
                x *= r;
            }
            (f, pw)
        })
        .collect();

    let entries: Vec<Complex64> = (0..d * d)
        .into_par_iter()
        .map(|idx| {
            let (j, k) = (idx / d, idx % d);
            if k > j {
                return Complex64::new(0.0, 0.0);
            }
            let m = j - k;
            let mut acc = Complex64::new(0.0, 0.0);
            for (&(chart, _), (f, pw)) in rings.iter().zip(&moments) {
                let e = match chart {
                    Chart::Zero => j + k,
                    Chart::Infinity => 2 * p - j - k,
                };
                acc += f[m + p] * pw[e];
            }
            acc
        })
        .collect();
    let mut g = DMatrix::from_row_slice(d, d, &entries);
    for j in 0..d {
        g[(j, j)] = Complex64::new(g[(j, j)].re, 0.0);
        for k in 0..j {
            g[(k, j)] = g[(j, k)].conj();
        }
    }
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric { location: "gram_matrix".into(), detail: "non-finite entry".into() });
    }
    Ok(GramMatrix {
        p,
        matrix: g,
        log_scale: p as f64 * sw.shift,
        weight_hash: field_hash(grid.dims(), &sw.phi),
        dims: grid.dims(),
    })
}

/// Orthonormal basis `S_j = Σ_l C_jl ζ^l`, `C` lower triangular with positive
/// diagonal. `coeffs` holds `C·e^{−log_scale}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BergmanBasis {
    pub p: usize,
    pub coeffs: DMatrix<Complex64>,
    pub log_scale: f64,
    /// Condition number of the diagonally equilibrated Gram matrix.
    pub gram_cond: f64,
    pub weight_hash: String,
    pub dims: (usize, usize),
}

impl BergmanBasis {
    pub fn dim(&self) -> usize {
        self.p + 1
    }

    /// Monomial coefficients (scaled) of `Σ a_j S_j`.
    pub fn combine(&self, a: &[Complex64]) -> Vec<Complex64> {
        let d = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); d];
        for (j, &aj) in a.iter().enumerate() {
            for (l, o) in out.iter_mut().enumerate().take(j + 1) {
                *o += aj * self.coeffs[(j, l)];
            }
        }
        out
    }
}

/// Cholesky-based orthonormalization of a Gram matrix.
pub fn orthonormal_basis(gram: &GramMatrix) -> Result<BergmanBasis> {
    let g = &gram.matrix;
    let d = g.nrows();
    let diag: Vec<f64> = (0..d).map(|i| g[(i, i)].re).collect();
    if let Some(i) = diag.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        log::warn!("Gram diagonal entry {i} is {}", diag[i]);
        return Err(Error::Conditioning { cond: f64::INFINITY });
    }
    let scale = DVector::from_iterator(d, diag.iter().map(|x| x.sqrt().recip()));
    let mut gs = g.clone();
    for i in 0..d {
        for j in 0..d {
            gs[(i, j)] *= scale[i] * scale[j];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(gs.clone()).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_GRAM_COND) {
        return Err(Error::Conditioning { cond });
    }
    let chol = gs.cholesky().ok_or(Error::Conditioning { cond })?;
    let l = chol.l();
    let identity = DMatrix::<Complex64>::identity(d, d);
    let linv = l
        .solve_lower_triangular(&identity)
        .ok_or_else(|| Error::Numeric { location: "orthonormal_basis".into(), detail: "singular factor".into() })?;
    let mut coeffs = linv;
    for j in 0..d {
        for k in 0..d {
            coeffs[(j, k)] *= scale[k];
            if k > j {
                coeffs[(j, k)] = Complex64::new(0.0, 0.0);
            }
        }
        coeffs[(j, j)] = Complex64::new(coeffs[(j, j)].re, 0.0);
    }
    Ok(BergmanBasis {
        p: gram.p,
        coeffs,
        log_scale: gram.log_scale,
        gram_cond: cond,
        weight_hash: gram.weight_hash.clone(),
        dims: gram.dims,
    })
}

/// Gram matrix and orthonormal basis in one step.
pub fn build_basis(p: usize, w: &WeightField, grid: &QuadratureGrid) -> Result<BergmanBasis> {
    orthonormal_basis(&gram_matrix(p, w, grid)?)
}

/// Bergman kernel function on the grid.
#[derive(Debug, Clone)]
pub struct KernelField {
    pub p: usize,
    pub dims: (usize, usize),
    pub weight_hash: String,
    /// `P_p > 0`.
    pub values: Vec<f64>,
    /// `(1/2p) log P_p`, zero for `p = 0`.
    pub log_half_p: Vec<f64>,
    /// `φ_p = φ + (1/2p) log P_p`.
    pub fs_potential: Vec<f64>,
}

/// `P_p = Σ_j |S_j|² e^{−2pψ}` at every node.
pub fn bergman_kernel(basis: &BergmanBasis, w: &WeightField, grid: &QuadratureGrid) -> Result<KernelField> {
    let sw = scaled_weight(w, grid)?;
    let hash = field_hash(grid.dims(), &sw.phi);
    if basis.weight_hash != hash || basis.dims != grid.dims() {
        return Err(Error::Usage("basis was built for a different weight or grid".into()));
    }
    let p = basis.p;
    let d = basis.dim();
    let nt = grid.n_theta();
    let evaluator = RingEvaluator::new(nt);
    let two_p = 2.0 * p as f64;
    let rows: Vec<Vec<Complex64>> =
        (0..d).map(|j| (0..d).map(|l| basis.coeffs[(j, l)]).collect()).collect();
    let ring_values: Vec<Vec<f64>> = rings(grid)
        .par_iter()
        .map(|&(chart, i)| {
            let r = grid.radii()[i];
            let mut acc = vec![0.0; nt];
            let mut buf = vec![Complex64::new(0.0, 0.0); nt];
            for row in &rows {
                evaluator.eval_ring(row, r, chart, &mut buf);
                for (a, v) in acc.iter_mut().zip(&buf) {
                    *a += v.norm_sqr();
                }
            }
            let range = grid.ring_range(chart, i);
            for (a, n) in acc.iter_mut().zip(range) {
                *a *= (-two_p * sw.local[n]).exp();
            }
            acc
        })
        .collect();
    let values: Vec<f64> = ring_values.into_iter().flatten().collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        let (chart, ring, k) = grid.locate(i);
        return Err(Error::Numeric {
            location: format!("bergman_kernel node (chart {}, ring {ring}, angle {k})", chart.as_str()),
            detail: format!("kernel value {}", values[i]),
        });
    }
    let log_half_p: Vec<f64> =
        values.iter().map(|v| if p == 0 { 0.0 } else { v.ln() / two_p }).collect();
    let fs_potential = log_half_p.iter().zip(&sw.phi).map(|(l, f)| l + f).collect();
    Ok(KernelField { p, dims: grid.dims(), weight_hash: hash, values, log_half_p, fs_potential })
}

/// `∫ |(1/2p) log P_p − Ψ_h| ω_FS`.
pub fn kernel_vs_envelope(kf: &KernelField, env: &EnvelopeResult, grid: &QuadratureGrid) -> Result<f64> {
    if kf.dims != grid.dims() || env.dims != grid.dims() {
        return Err(Error::Usage("kernel and envelope live on different grids".into()));
    }
    if kf.weight_hash != env.weight_hash {
        return Err(Error::Usage("kernel and envelope were computed for different weights".into()));
    }
    let psi_h = env.psi_h();
    let diff: Vec<f64> = kf.log_half_p.iter().zip(&psi_h).map(|(a, b)| (a - b).abs()).collect();
    fs_integral(grid, &diff)
}

/// Empirical constant of the bound `error ≤ C·log p / p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub c_hat: f64,
    pub max_violation: f64,
    /// `error·p / log p` per degree.
    pub constants: Vec<(usize, f64)>,
}

impl RateFit {
    /// Ratio of the largest to the smallest positive constant.
    pub fn spread(&self) -> f64 {
        let lo = self.constants.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        self.c_hat / lo
    }
}

pub fn rate_fit(errors: &[(usize, f64)]) -> Result<RateFit> {
    if errors.len() < 4 {
        return Err(Error::Usage(format!("rate fit needs at least 4 degrees, got {}", errors.len())));
    }
    if let Some(&(p, _)) = errors.iter().find(|e| e.0 < 5) {
        return Err(Error::Usage(format!("rate fit needs p ≥ 5, got {p}")));
    }
    let constants: Vec<(usize, f64)> =
        errors.iter().map(|&(p, e)| (p, e * p as f64 / (p as f64).ln())).collect();
    let c_hat = constants.iter().map(|c| c.1).fold(0.0, f64::max);
    let max_violation = errors
        .iter()
        .map(|&(p, e)| e - c_hat * (p as f64).ln() / p as f64)
        .fold(0.0, f64::max);
    Ok(RateFit { c_hat, max_violation, constants })
}

#[cfg(test)]
mod tests;
