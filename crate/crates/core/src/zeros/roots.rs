//! Roots of a degree-`p` polynomial viewed as a section of `O(p)`.
//!
//! Coefficients that are negligible against the Fubini-Study scale of their
//! monomial are dropped at both ends: dropped leading terms are zeros at
//! `∞`, dropped trailing terms zeros at `0`. The rest is solved by
//! Aberth–Ehrlich iteration started on the circles of the Newton polygon,
//! with balanced companion matrix eigenvalues as the fallback.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Relative size below which a coefficient counts as zero, measured against
/// `|c_j| / √binom(p, j)`.
pub const STRIP_THRESHOLD: f64 = 1e-13;

/// Largest accepted componentwise backward error of a root.
pub const MAX_ROOT_RESIDUAL: f64 = 1e-6;

const ABERTH_ROUNDS: usize = 200;
const POLISH_ROUNDS: usize = 8;

/// Zero divisor of a section on P¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub p: usize,
    /// Roots in `ℂ` with multiplicity, including exact zeros at the origin.
    pub finite_roots: Vec<Complex64>,
    pub mult_at_infinity: usize,
    /// Largest `|f(z)| / Σ|c_j||z|^j` over the finite roots.
    pub root_condition: f64,
    pub strip_threshold: f64,
}

impl ZeroSet {
    pub fn total_multiplicity(&self) -> usize {
        self.finite_roots.len() + self.mult_at_infinity
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Value and derivative by Horner's rule.
fn horner2(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut f = zero();
    let mut df = zero();
    for &a in c.iter().rev() {
        df = df * z + f;
        f = f * z + a;
    }
    (f, df)
}

/// Polynomial `q` stored both ways round so every evaluation happens with
/// `|z| ≤ 1` or `|1/z| < 1`.
struct Poly {
    c: Vec<Complex64>,
    rev: Vec<Complex64>,
    abs: Vec<f64>,
    abs_rev: Vec<f64>,
}

impl Poly {
    fn new(c: Vec<Complex64>) -> Self {
        let rev: Vec<Complex64> = c.iter().rev().copied().collect();
        let abs = c.iter().map(|z| z.norm()).collect();
        let abs_rev = rev.iter().map(|z| z.norm()).collect();
        Self { c, rev, abs, abs_rev }
    }

    fn degree(&self) -> usize {
        self.c.len() - 1
    }

    fn backward_error(&self, z: Complex64) -> f64 {
        let (c, a, x) = if z.norm() <= 1.0 { (&self.c, &self.abs, z) } else { (&self.rev, &self.abs_rev, z.inv()) };
        let r = x.norm();
        let scale = a.iter().rev().fold(0.0, |acc, &v| acc * r + v);
        horner2(c, x).0.norm() / scale
    }

    /// Newton step `q(z)/q'(z)`.
    fn newton(&self, z: Complex64) -> Complex64 {
        if z.norm() <= 1.0 {
            let (f, df) = horner2(&self.c, z);
            f / df
        } else {
            // q(z) = z^d g(1/z) gives q/q' = z g / (d g − w g').
            let w = z.inv();
            let (g, dg) = horner2(&self.rev, w);
            z * g / (self.degree() as f64 * g - w * dg)
        }
    }
}

/// One Aberth–Ehrlich sweep in Gauss–Seidel order over the roots not yet
/// settled. Returns the number still moving.
fn aberth_sweep(q: &Poly, roots: &mut [Complex64], settled: &mut [bool]) -> usize {
    let mut moving = 0;
    for i in 0..roots.len() {
        if settled[i] {
            continue;
        }
        let z = roots[i];
        let n = q.newton(z);
        if !n.re.is_finite() || !n.im.is_finite() {
            settled[i] = true;
            continue;
        }
        let s: Complex64 = roots.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &r)| (z - r).inv()).sum();
        let step = n / (Complex64::new(1.0, 0.0) - n * s);
        if step.re.is_finite() && step.im.is_finite() {
            roots[i] = z - step;
        }
        if !(step.norm() > 4.0 * f64::EPSILON * z.norm()) {
            settled[i] = true;
        } else {
            moving += 1;
        }
    }
    moving
}

fn max_backward_error(q: &Poly, roots: &[Complex64]) -> f64 {
    roots.iter().map(|&z| q.backward_error(z)).fold(0.0, f64::max)
}

/// Parlett–Reinsch balancing by powers of two.
fn balance(m: &mut DMatrix<Complex64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            while cc < r / radix {
                cc *= radix * radix;
                f *= radix;
            }
            while cc > r * radix {
                cc /= radix * radix;
                f /= radix;
            }
            // New column and row sums are c·f and r/f.
            if (cc + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Eigenvalues of the companion matrix of `q(s·x)/(q_d s^d)`, mapped back.
fn companion_roots(q: &Poly, scale: f64) -> Option<Vec<Complex64>> {
    let d = q.degree();
    let lead = q.c[d];
    let ls = scale.ln();
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for j in 0..d {
        // −a_{d−1−j} in the first row.
        let k = d - 1 - j;
        let a = q.c[k] / lead * ((k as f64 - d as f64) * ls).exp();
        m[(0, j)] = -a;
    }
    for i in 1..d {
        m[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    balance(&mut m);
    let schur = nalgebra::Schur::try_new(m, f64::EPSILON, 100 * d.max(10))?;
    let eig = schur.eigenvalues()?;
    let roots: Vec<Complex64> = eig.iter().map(|x| x * scale).collect();
    roots.iter().all(|z| z.re.is_finite() && z.im.is_finite()).then_some(roots)
}

/// Starting points on the circles given by the upper convex hull of
/// `(j, log|q_j|)`, one per unit of slope run.
fn newton_polygon_start(q: &Poly) -> Vec<Complex64> {
    let d = q.degree();
    let pts: Vec<(usize, f64)> =
        q.abs.iter().enumerate().filter(|(_, &a)| a > 0.0).map(|(j, a)| (j, a.ln())).collect();
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 as f64 - a.0 as f64) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 as f64 - a.0 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(d);
    for w in hull.windows(2) {
        let m = w[1].0 - w[0].0;
        let radius = ((w[0].1 - w[1].1) / m as f64).exp();
        for j in 0..m {
            let angle = tau * j as f64 / m as f64 + tau * w[0].0 as f64 / d as f64 + 0.7;
            out.push(Complex64::from_polar(radius, angle));
        }
    }
    out
}

/// Aberth iteration keeping the iterate with the smallest backward error.
fn polish(q: &Poly, mut roots: Vec<Complex64>, rounds: usize) -> (Vec<Complex64>, f64) {
    let mut settled = vec![false; roots.len()];
    let mut best = max_backward_error(q, &roots);
    let mut best_roots = roots.clone();
    for _ in 0..rounds {
        let moving = aberth_sweep(q, &mut roots, &mut settled);
        let err = max_backward_error(q, &roots);
        if err <= best {
            best = err;
            best_roots.copy_from_slice(&roots);
        }
        if moving == 0 {
            break;
        }
    }
    (best_roots, best)
}

/// `ln √binom(p, j)`.
fn ln_sqrt_binom(p: usize, j: usize) -> f64 {
    0.5 * (ln_gamma(p as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((p - j) as f64 + 1.0))
}

/// Zeros on P¹ of the section with monomial coefficients `coeffs`, of
/// formal degree `coeffs.len() − 1`.
pub fn roots_of(coeffs: &[Complex64]) -> Result<ZeroSet> {
    if coeffs.is_empty() {
        return Err(Error::Usage("empty coefficient vector".into()));
    }
    let p = coeffs.len() - 1;
    if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Numeric { location: "find_roots".into(), detail: "non-finite coefficient".into() });
    }
    let sizes: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| if c.norm() == 0.0 { f64::NEG_INFINITY } else { c.norm().ln() - ln_sqrt_binom(p, j) })
        .collect();
    let top_size = sizes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top_size == f64::NEG_INFINITY {
        return Err(Error::Usage("the zero polynomial has no divisor".into()));
    }
    let cut = top_size + STRIP_THRESHOLD.ln();
    let low = sizes.iter().position(|&s| s > cut).expect("some coefficient is kept");
    let high = sizes.iter().rposition(|&s| s > cut).expect("some coefficient is kept");
    let mut finite_roots = vec![zero(); low];
    let d = high - low;
    let mut root_condition = 0.0;
    if d > 0 {
        let q = Poly::new(coeffs[low..=high].to_vec());
        let (mut roots, mut err) = polish(&q, newton_polygon_start(&q), ABERTH_ROUNDS);
        if !(err <= MAX_ROOT_RESIDUAL) {
            log::debug!("Aberth iteration stalled at degree {d} (residual {err:.3e}); trying the companion matrix");
            let scale = ((q.c[0].norm().ln() - q.c[d].norm().ln()) / d as f64).exp();
            if let Some(start) = companion_roots(&q, scale) {
                let (r2, e2) = polish(&q, start, POLISH_ROUNDS);
                if e2 < err {
                    (roots, err) = (r2, e2);
                }
            }
        }
        if !(err <= MAX_ROOT_RESIDUAL) {
            log::warn!("rejecting degree-{p} sample: root residual {err:.3e}");
            return Err(Error::IllConditionedSample { residual: err, limit: MAX_ROOT_RESIDUAL });
        }
        root_condition = err;
        finite_roots.extend(roots);
    }
    Ok(ZeroSet { p, finite_roots, mult_at_infinity: p - high, root_condition, strip_threshold: STRIP_THRESHOLD })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_fallback_agrees_with_aberth() {
        let c: Vec<Complex64> = (0..=20).map(|j| Complex64::new((j as f64 * 1.3).sin(), (j as f64 * 0.4).cos())).collect();
        let q = Poly::new(c);
        let (a, ea) = polish(&q, newton_polygon_start(&q), ABERTH_ROUNDS);
        let (b, eb) = polish(&q, companion_roots(&q, 1.0).unwrap(), POLISH_ROUNDS);
        assert!(ea < 1e-14 && eb < 1e-14);
        for z in &a {
            assert!(b.iter().any(|w| (z - w).norm() < 1e-10 * (1.0 + z.norm())));
        }
    }

    #[test]
    fn newton_polygon_start_has_one_point_per_root() {
        let mut c = vec![Complex64::new(0.0, 0.0); 9];
        c[0] = Complex64::new(1e-6, 0.0);
        c[3] = Complex64::new(1.0, 0.0);
        c[8] = Complex64::new(1e4, 0.0);
        let q = Poly::new(c);
        let s = newton_polygon_start(&q);
        assert_eq!(s.len(), 8);
        // Radii 10^{-2} on the first segment and 10^{-0.8} on the second.
        assert!(s[..3].iter().all(|z| (z.norm() - 1e-2).abs() < 1e-14));
        assert!(s[3..].iter().all(|z| (z.norm() - 10f64.powf(-0.8)).abs() < 1e-14));
    }
}
