//! Random sections `s_p = Σ a_j S_j`, their zero divisors, and statistics
//! comparing them with the equilibrium measure and envelope.

mod roots;

pub use roots::{roots_of, ZeroSet, MAX_ROOT_RESIDUAL, STRIP_THRESHOLD};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bergman::BergmanBasis;
use crate::envelope::{field_hash, WeightField};
use crate::error::{Error, Result};
use crate::geometry::{Chart, QuadratureGrid, SpherePoint};
use crate::measure::{EmpiricalMeasure, Region};
use crate::poly::RingEvaluator;
use crate::randsec::{sample, MeasureSpec};
use crate::rng::StreamKey;
use crate::stats::{mean_ci, NeumaierSum};

/// One random section in monomial form.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSample {
    pub p: usize,
    /// Coefficients of `f = Σ a_j S_j` for the shifted weight the basis
    /// was built with; the true section is `e^{log_scale}·f`.
    pub monomial_coeffs: Vec<Complex64>,
    /// The draw `a ∈ ℂ^{p+1}`.
    pub basis_coeffs: Vec<Complex64>,
    pub log_scale: f64,
    pub spec: MeasureSpec,
    pub seed: u64,
    pub trial: u64,
    pub weight_hash: String,
    pub dims: (usize, usize),
}

/// Section with prescribed coefficients in the orthonormal basis.
pub fn section_from_coefficients(basis: &BergmanBasis, a: &[Complex64]) -> Result<SectionSample> {
    if a.len() != basis.dim() {
        return Err(Error::Usage(format!("{} coefficients for a basis of dimension {}", a.len(), basis.dim())));
    }
    if a.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::Usage("the zero section has no divisor".into()));
    }
    Ok(SectionSample {
        p: basis.p,
        monomial_coeffs: basis.combine(a),
        basis_coeffs: a.to_vec(),
        log_scale: basis.log_scale,
        spec: MeasureSpec::GaussianComplex,
        seed: 0,
        trial: 0,
        weight_hash: basis.weight_hash.clone(),
        dims: basis.dims,
    })
}

/// Stream of the section draws of degree `p` under `seed`.
pub fn section_stream(seed: u64, p: usize) -> StreamKey {
    StreamKey::new(seed, &format!("sections/{p}"))
}

/// Draws `a ~ σ_{p+1}` on the stream of `(seed, p, trial)`.
pub fn sample_section(basis: &BergmanBasis, spec: &MeasureSpec, seed: u64, trial: u64) -> Result<SectionSample> {
    spec.validate()?;
    let mut rng = section_stream(seed, basis.p).trial(trial);
    loop {
        let a = sample(spec, basis.dim(), &mut rng);
        if a.iter().any(|z| z.norm_sqr() > 0.0) {
            let mut s = section_from_coefficients(basis, &a)?;
            s.spec = *spec;
            s.seed = seed;
            s.trial = trial;
            return Ok(s);
        }
        log::info!("zero coefficient draw at trial {trial}, redrawing");
    }
}

pub fn find_roots(s: &SectionSample) -> Result<ZeroSet> {
    roots_of(&s.monomial_coeffs)
}

/// `(1/p)[s = 0]`: mass `1/p` per finite root and the deficit at `∞`.
pub fn empirical_zero_measure(z: &ZeroSet) -> EmpiricalMeasure {
    let m = 1.0 / z.p as f64;
    let mut atoms: Vec<(SpherePoint, f64)> = z.finite_roots.iter().map(|&r| (SpherePoint::from_affine(r), m)).collect();
    if z.mult_at_infinity > 0 {
        atoms.push((SpherePoint::infinity(), z.mult_at_infinity as f64 * m));
    }
    EmpiricalMeasure::new(atoms)
}

/// Nodes whose relative backward distance to the zero set is below this
/// are masked.
pub const ROOT_MASK: f64 = 1e-9;
/// Largest tolerated fraction of masked nodes.
pub const MAX_MASKED_FRACTION: f64 = 0.01;

/// `(1/p) log|s|_{h^p}` on the grid.
#[derive(Debug, Clone)]
pub struct LogNormField {
    pub p: usize,
    pub dims: (usize, usize),
    pub values: Vec<f64>,
    /// Nodes too close to a zero; their value is meaningless.
    pub mask: Vec<bool>,
}

impl LogNormField {
    pub fn masked(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `∫ |field − target| ω_FS` with the weight of masked nodes spread
    /// proportionally over the rest.
    pub fn l1_distance(&self, target: &[f64], grid: &QuadratureGrid) -> Result<f64> {
        if self.dims != grid.dims() || target.len() != grid.len() {
            return Err(Error::Usage("field and target live on different grids".into()));
        }
        let mut kept = NeumaierSum::default();
        let mut total = NeumaierSum::default();
        let mut acc = NeumaierSum::default();
        for (i, w) in grid.fs_weights().iter().enumerate() {
            total.add(*w);
            if !self.mask[i] {
                kept.add(*w);
                acc.add(w * (self.values[i] - target[i]).abs());
            }
        }
        Ok(acc.total() * total.total() / kept.total())
    }
}

pub fn lognorm_field(s: &SectionSample, w: &WeightField, grid: &QuadratureGrid) -> Result<LogNormField> {
    if s.p == 0 {
        return Err(Error::Usage("log-norm field needs p ≥ 1".into()));
    }
    let phi = w.sample_phi(grid)?;
    if s.dims != grid.dims() || s.weight_hash != field_hash(grid.dims(), &phi) {
        return Err(Error::Usage("section was drawn for a different weight or grid".into()));
    }
    let psi = w.sample_psi_local(grid)?;
    let p = s.p as f64;
    let nt = grid.n_theta();
    let evaluator = RingEvaluator::new(nt);
    let abs: Vec<f64> = s.monomial_coeffs.iter().map(|c| c.norm()).collect();
    let rings: Vec<(Chart, usize)> =
        [Chart::Zero, Chart::Infinity].into_iter().flat_map(|c| (0..grid.n_r()).map(move |i| (c, i))).collect();
    let per_ring: Vec<Vec<(f64, bool)>> = rings
        .par_iter()
        .map(|&(chart, i)| {
            let r = grid.radii()[i];
            let mut buf = vec![Complex64::new(0.0, 0.0); nt];
            evaluator.eval_ring(&s.monomial_coeffs, r, chart, &mut buf);
            // Σ|c_l||x|^l in the frame of this chart.
            let scale = match chart {
                Chart::Zero => abs.iter().rev().fold(0.0, |a, &c| a * r + c),
                Chart::Infinity => abs.iter().fold(0.0, |a, &c| a * r + c),
            };
            grid.ring_range(chart, i)
                .zip(&buf)
                .map(|(n, f)| {
                    let m = f.norm();
                    let v = (m.ln() + s.log_scale) / p - psi[n];
                    let near = !(m > ROOT_MASK * scale) || !v.is_finite();
                    (if near { 0.0 } else { v }, near)
                })
                .collect()
        })
        .collect();
    let (values, mask): (Vec<f64>, Vec<bool>) = per_ring.into_iter().flatten().unzip();
    let field = LogNormField { p: s.p, dims: grid.dims(), values, mask };
    let masked = field.masked();
    if masked as f64 > MAX_MASKED_FRACTION * grid.len() as f64 {
        return Err(Error::Numeric {
            location: "lognorm_field".into(),
            detail: format!("{masked} of {} nodes lie on zeros; the grid is too coarse for degree {}", grid.len(), s.p),
        });
    }
    Ok(field)
}

/// Monte Carlo mass of one region under `(1/p)[s_p = 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMass {
    pub region: Region,
    pub mean: f64,
    pub ci_halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationReport {
    pub p: usize,
    pub accepted: usize,
    /// Samples discarded as ill conditioned.
    pub rejected: usize,
    pub regions: Vec<RegionMass>,
}

pub const MIN_EXPECTATION_TRIALS: usize = 100;

pub fn expectation_current(
    basis: &BergmanBasis,
    spec: &MeasureSpec,
    trials: usize,
    regions: &[Region],
    seed: u64,
) -> Result<ExpectationReport> {
    if trials < MIN_EXPECTATION_TRIALS {
        return Err(Error::Usage(format!("at least {MIN_EXPECTATION_TRIALS} trials are needed, got {trials}")));
    }
    let outcomes: Vec<Result<Option<Vec<f64>>>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = sample_section(basis, spec, seed, t)?;
            match find_roots(&s) {
                Ok(z) => {
                    let em = empirical_zero_measure(&z);
                    Ok(Some(regions.iter().map(|r| em.mass_of(r)).collect()))
                }
                Err(Error::IllConditionedSample { residual, .. }) => {
                    log::warn!("trial {t} discarded: root residual {residual:.3e}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(trials);
    for o in outcomes {
        if let Some(r) = o? {
            rows.push(r);
        }
    }
    if rows.is_empty() {
        return Err(Error::Numeric { location: "expectation_current".into(), detail: "every sample was rejected".into() });
    }
    let regions = regions
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let masses: Vec<f64> = rows.iter().map(|row| row[j]).collect();
            let (mean, ci_halfwidth) = mean_ci(&masses);
            RegionMass { region: *r, mean, ci_halfwidth }
        })
        .collect();
    Ok(ExpectationReport { p: basis.p, accepted: rows.len(), rejected: trials - rows.len(), regions })
}

/// Edges `2^{-7}, …, 2^7` of the dyadic shells of the test family.
const SHELL_EXPONENTS: std::ops::RangeInclusive<i32> = -7..=7;
/// Centres in `t = log|ζ|` of the unit-width bumps of the test family.
const BUMP_CENTRES: [f64; 8] = [-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5];

/// The 16 dyadic shells covering P¹.
pub fn dyadic_shells() -> Vec<Region> {
    let mut edges = vec![0.0];
    edges.extend(SHELL_EXPONENTS.map(|e| 2f64.powi(e)));
    edges.push(f64::INFINITY);
    edges.windows(2).map(|w| Region::Shell { inner: w[0], outer: w[1] }).collect()
}

fn radial_bump(pt: &SpherePoint, centre: f64) -> f64 {
    let x = pt.log_modulus() - centre;
    if x.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// Largest discrepancy of two measures over a fixed family of 16 dyadic
/// shells and 8 smooth radial bumps.
pub fn weak_convergence_stat(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> f64 {
    let shells = dyadic_shells().into_iter().map(|r| (a.mass_of(&r) - b.mass_of(&r)).abs());
    let bumps = BUMP_CENTRES
        .iter()
        .map(|&c| (a.integrate(|pt| radial_bump(pt, c)) - b.integrate(|pt| radial_bump(pt, c))).abs());
    shells.chain(bumps).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests;
