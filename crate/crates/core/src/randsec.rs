//! Probability measures on coefficient vectors and the moment condition
//! `∫ |log|⟨a,u⟩||^ν dσ_k(a) ≤ C_k`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::stats::{ls_slope, mean_ci};

/// Law of a single i.i.d. coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TailSpec {
    /// Uniform on the disk (or interval) of the given radius.
    UniformDisk { radius: f64 },
    /// `P(|a| > e^R) = min(1, c R^{−ρ})` above the knee `R₀ = c^{1/ρ}`.
    ParetoLog { rho: f64, c: f64 },
}

impl TailSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TailSpec::UniformDisk { radius } if !(radius > 0.0 && radius.is_finite()) => {
                Err(Error::Config(format!("uniform disk radius must be positive, got {radius}")))
            }
            TailSpec::ParetoLog { rho, c } if !(rho > 1.0 && rho.is_finite() && c > 0.0 && c.is_finite()) => {
                Err(Error::Config(format!("pareto-log tail needs rho > 1 and c > 0, got rho={rho}, c={c}")))
            }
            _ => Ok(()),
        }
    }

    /// Modulus of one draw. Below the knee the law has bounded density, above
    /// it `log|a|` is Pareto.
    fn modulus<R: Rng + ?Sized>(&self, rng: &mut R, complex: bool) -> f64 {
        match *self {
            TailSpec::UniformDisk { radius } => {
                let u: f64 = rng.random();
                if complex {
                    radius * u.sqrt()
                } else {
                    radius * u
                }
            }
            TailSpec::ParetoLog { rho, c } => {
                let knee = c.powf(1.0 / rho);
                let u: f64 = rng.random();
                if rng.random::<bool>() {
                    let r = knee.exp();
                    if complex {
                        r * u.sqrt()
                    } else {
                        r * u
                    }
                } else {
                    // P(T > R) = (R₀/R)^ρ for R ≥ R₀.
                    let t = knee * (1.0 - u).powf(-1.0 / rho);
                    t.exp()
                }
            }
        }
    }

    fn label(&self) -> String {
        match self {
            TailSpec::UniformDisk { radius } => format!("uniform-disk({radius})"),
            TailSpec::ParetoLog { rho, c } => format!("pareto-log({rho},{c})"),
        }
    }
}

/// Probability measure `σ_k` on `ℂ^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum MeasureSpec {
    /// Density `π^{−k} e^{−‖a‖²}`.
    GaussianComplex,
    /// Density `π^{−k/2} e^{−‖a‖²}` on `ℝ^k`.
    GaussianReal,
    /// Density `Γ(k+α)/(Γ(α)π^k) (1+‖a‖²)^{−k−α}`.
    FubiniStudy { alpha: f64 },
    /// Normalized surface measure of `S^{2k−1}`.
    SphereComplex,
    /// Normalized surface measure of `S^{k−1} ⊂ ℝ^k`.
    SphereReal,
    IidComplex { tail: TailSpec },
    IidReal { tail: TailSpec },
}

impl MeasureSpec {
    pub fn fubini_study(alpha: f64) -> Result<Self> {
        let s = MeasureSpec::FubiniStudy { alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn iid_complex(tail: TailSpec) -> Result<Self> {
        tail.validate()?;
        Ok(MeasureSpec::IidComplex { tail })
    }

    pub fn iid_real(tail: TailSpec) -> Result<Self> {
        tail.validate()?;
        Ok(MeasureSpec::IidReal { tail })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MeasureSpec::FubiniStudy { alpha } if !(*alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::Config(format!("Fubini-Study exponent must be positive, got {alpha}")))
            }
            MeasureSpec::IidComplex { tail } | MeasureSpec::IidReal { tail } => tail.validate(),
            _ => Ok(()),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, MeasureSpec::GaussianReal | MeasureSpec::SphereReal | MeasureSpec::IidReal { .. })
    }

    /// Invariant under the unitary group of `ℂ^k`.
    pub fn is_unitarily_invariant(&self) -> bool {
        matches!(
            self,
            MeasureSpec::GaussianComplex | MeasureSpec::FubiniStudy { .. } | MeasureSpec::SphereComplex
        )
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::GaussianComplex => write!(f, "gaussian-complex"),
            MeasureSpec::GaussianReal => write!(f, "gaussian-real"),
            MeasureSpec::FubiniStudy { alpha } => write!(f, "fubini-study({alpha})"),
            MeasureSpec::SphereComplex => write!(f, "sphere-complex"),
            MeasureSpec::SphereReal => write!(f, "sphere-real"),
            MeasureSpec::IidComplex { tail } => write!(f, "iid-complex[{}]", tail.label()),
            MeasureSpec::IidReal { tail } => write!(f, "iid-real[{}]", tail.label()),
        }
    }
}

/// `N(0, 1/2)`, the real part of a standard complex Gaussian.
fn half_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian<R: Rng + ?Sized>(k: usize, real: bool, rng: &mut R) -> Vec<Complex64> {
    (0..k)
        .map(|_| {
            let re = half_normal(rng);
            let im = if real { 0.0 } else { half_normal(rng) };
            Complex64::new(re, im)
        })
        .collect()
}

fn normalize(a: &mut [Complex64]) {
    let n = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    a.iter_mut().for_each(|z| *z /= n);
}

fn unit_vector<R: Rng + ?Sized>(k: usize, real: bool, rng: &mut R) -> Vec<Complex64> {
    loop {
        let mut a = gaussian(k, real, rng);
        if a.iter().any(|z| z.norm_sqr() > 0.0) {
            normalize(&mut a);
            return a;
        }
    }
}

/// One draw from `σ_k`. Assumes `spec` has been validated.
pub fn sample<R: Rng + ?Sized>(spec: &MeasureSpec, k: usize, rng: &mut R) -> Vec<Complex64> {
    assert!(k >= 1, "coefficient dimension must be positive");
    match *spec {
        MeasureSpec::GaussianComplex => gaussian(k, false, rng),
        MeasureSpec::GaussianReal => gaussian(k, true, rng),
        MeasureSpec::SphereComplex => unit_vector(k, false, rng),
        MeasureSpec::SphereReal => unit_vector(k, true, rng),
        MeasureSpec::FubiniStudy { alpha } => {
            // ‖a‖² is Beta-prime(k, α).
            let x = if k == 1 {
                let u: f64 = rng.random();
                (1.0 - u).powf(-1.0 / alpha) - 1.0
            } else {
                let g1 = Gamma::new(k as f64, 1.0).expect("valid shape").sample(rng);
                let g2 = Gamma::new(alpha, 1.0).expect("valid shape").sample(rng);
                g1 / g2
            };
            let mut a = unit_vector(k, false, rng);
            let r = x.sqrt();
            a.iter_mut().for_each(|z| *z *= r);
            a
        }
        MeasureSpec::IidComplex { tail } => (0..k)
            .map(|_| {
                let m = tail.modulus(rng, true);
                Complex64::from_polar(m, 2.0 * PI * rng.random::<f64>())
            })
            .collect(),
        MeasureSpec::IidReal { tail } => (0..k)
            .map(|_| {
                let m = tail.modulus(rng, false);
                Complex64::new(if rng.random::<bool>() { m } else { -m }, 0.0)
            })
            .collect(),
    }
}

/// Density of the Fubini-Study volume `σ_{k,α}` at a point with `‖a‖² = norm2`.
pub fn fubini_study_density(k: usize, alpha: f64, norm2: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let kf = k as f64;
    (ln_gamma(kf + alpha) - ln_gamma(alpha) - kf * PI.ln() - (kf + alpha) * norm2.ln_1p()).exp()
}

/// `s_m = 2π^{m/2}/Γ(m/2)`, the area of the unit sphere in `ℝ^m`, by the
/// recursion `s_{m+2} = 2π s_m / m` from `s_1 = 2`, `s_2 = 2π`.
pub fn sphere_area_constant(m: usize) -> f64 {
    assert!(m >= 1, "sphere dimension must be positive");
    let mut s = if m % 2 == 1 { 2.0 } else { 2.0 * PI };
    let mut j = if m % 2 == 1 { 1 } else { 2 };
    while j < m {
        s *= 2.0 * PI / j as f64;
        j += 2;
    }
    s
}

/// Monte Carlo estimate of `∫ |log|⟨a,u⟩||^ν dσ_k(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub family: String,
    pub k: usize,
    pub nu: f64,
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub trials: usize,
    pub seed: u64,
}

pub const MIN_MOMENT_TRIALS: usize = 1000;

fn inner(a: &[Complex64], u: &[Complex64]) -> Complex64 {
    a.iter().zip(u).map(|(a, u)| a * u.conj()).sum()
}

fn check_moment_args(k: usize, nu: f64, trials: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Usage("coefficient dimension must be positive".into()));
    }
    if !(nu >= 1.0 && nu.is_finite()) {
        return Err(Error::Usage(format!("moment order must be at least 1, got {nu}")));
    }
    if trials < MIN_MOMENT_TRIALS {
        return Err(Error::Usage(format!("at least {MIN_MOMENT_TRIALS} trials are needed, got {trials}")));
    }
    Ok(())
}

/// Per-trial values of `|log|⟨a,u⟩||^ν` for each probe `u`, on shared draws.
fn moment_samples(
    spec: &MeasureSpec,
    k: usize,
    nu: f64,
    probes: &[Vec<Complex64>],
    trials: usize,
    key: StreamKey,
) -> Vec<Vec<f64>> {
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = key.trial(t as u64);
            let a = sample(spec, k, &mut rng);
            probes.iter().map(|u| inner(&a, u).norm().ln().abs().powf(nu)).collect()
        })
        .collect();
    (0..probes.len()).map(|j| per_trial.iter().map(|row| row[j]).collect()).collect()
}

pub fn moment_estimate(
    spec: &MeasureSpec,
    k: usize,
    nu: f64,
    u: &[Complex64],
    trials: usize,
    seed: u64,
) -> Result<MomentReport> {
    spec.validate()?;
    check_moment_args(k, nu, trials)?;
    if u.len() != k {
        return Err(Error::Usage(format!("probe vector has length {}, expected {k}", u.len())));
    }
    let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Usage(format!("probe vector must have unit norm, got {norm}")));
    }
    let key = StreamKey::new(seed, &format!("moments/{k}"));
    let values = moment_samples(spec, k, nu, &[u.to_vec()], trials, key).remove(0);
    let (estimate, ci_halfwidth) = mean_ci(&values);
    Ok(MomentReport { family: spec.to_string(), k, nu, estimate, ci_halfwidth, trials, seed })
}

/// Number of Haar-random unit vectors in the probe set.
pub const HAAR_PROBES: usize = 8;
/// Cap on the coordinate vectors in the probe set.
pub const COORDINATE_PROBES: usize = 8;

/// Finite surrogate for the supremum over unit vectors: the first few
/// coordinate vectors, the flat vector and seeded Haar vectors.
pub fn probe_vectors(k: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let mut out: Vec<Vec<Complex64>> = (0..k.min(COORDINATE_PROBES))
        .map(|j| {
            let mut e = vec![zero; k];
            e[j] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();
    if k > 1 {
        out.push(vec![Complex64::new((k as f64).sqrt().recip(), 0.0); k]);
        let key = StreamKey::new(seed, &format!("probes/{k}"));
        out.extend((0..HAAR_PROBES).map(|i| unit_vector(k, false, &mut key.trial(i as u64))));
    }
    out
}

/// Worst probe estimate per dimension and the log-log slope against `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbe {
    /// `(k, estimate, ci_halfwidth)` of the worst probe.
    pub rows: Vec<(usize, f64, f64)>,
    pub slope: f64,
}

pub fn iid_scaling_probe(
    tail: TailSpec,
    real: bool,
    nu: f64,
    ks: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ScalingProbe> {
    tail.validate()?;
    if let TailSpec::ParetoLog { rho, .. } = tail {
        if nu >= rho {
            return Err(Error::Usage(format!("moment order {nu} must be below the tail exponent {rho}")));
        }
    }
    let spec = if real { MeasureSpec::IidReal { tail } } else { MeasureSpec::IidComplex { tail } };
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        check_moment_args(k, nu, trials)?;
        let probes = probe_vectors(k, seed);
        let key = StreamKey::new(seed, &format!("scaling/{k}"));
        let worst = moment_samples(&spec, k, nu, &probes, trials, key)
            .iter()
            .map(|v| mean_ci(v))
            .fold((f64::NEG_INFINITY, 0.0), |acc, m| if m.0 > acc.0 { m } else { acc });
        rows.push((k, worst.0, worst.1));
    }
    let slope = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| (r.0 as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
        ls_slope(&x, &y)
    } else {
        0.0
    };
    Ok(ScalingProbe { rows, slope })
}

/// Which part of the equidistribution theorem the growth of `C_p` supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BHypothesis {
    /// `Σ C_p p^{−ν} < ∞`: almost sure convergence.
    SummableHypothesis,
    /// Only `C_p p^{−ν} → 0`: convergence of expectations.
    CesaroOnly,
    Fails,
}

/// Margin on the fitted exponent before a boundary case is accepted.
pub const EXPONENT_MARGIN: f64 = 0.05;

/// Classifies `C_p ≈ p^β` by the least squares exponent `β`.
pub fn bhyp_check(nu: f64, table: &[(usize, f64)]) -> Result<BHypothesis> {
    if table.len() < 4 {
        return Err(Error::Usage(format!("growth check needs at least 4 degrees, got {}", table.len())));
    }
    if table.iter().any(|&(p, c)| p == 0 || !(c > 0.0) || !c.is_finite()) {
        return Err(Error::Usage("growth check needs p ≥ 1 and positive finite constants".into()));
    }
    let x: Vec<f64> = table.iter().map(|e| (e.0 as f64).ln()).collect();
    let y: Vec<f64> = table.iter().map(|e| e.1.ln()).collect();
    let beta = ls_slope(&x, &y);
    Ok(if beta < nu - 1.0 - EXPONENT_MARGIN {
        BHypothesis::SummableHypothesis
    } else if beta < nu - EXPONENT_MARGIN {
        BHypothesis::CesaroOnly
    } else {
        BHypothesis::Fails
    })
}
