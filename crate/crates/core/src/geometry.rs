//! The Riemann sphere with its two affine charts, the Fubini–Study volume
//! form and a tensor-product quadrature rule against it.
//!
//! Chart `Zero` carries the affine coordinate `ζ`, chart `Infinity` the
//! coordinate `w = 1/ζ`. Canonical representatives always satisfy
//! `|coord| ≤ 1`. With the normalization `dd^c = (i/π)∂∂̄` the Fubini–Study
//! form has density `(1/π)(1+|ζ|²)^{-2}` and total mass one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::stats::NeumaierSum;

/// Smallest admissible radial or angular resolution.
pub const MIN_RESOLUTION: usize = 8;

/// Default resolution used by the lab (supports degrees up to ~200).
pub const DEFAULT_RESOLUTION: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    Zero,
    Infinity,
}

impl Chart {
    pub fn other(self) -> Chart {
        match self {
            Chart::Zero => Chart::Infinity,
            Chart::Infinity => Chart::Zero,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Chart::Zero => "0",
            Chart::Infinity => "inf",
        }
    }
}

/// A point of P¹ in one of the two affine charts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    pub chart: Chart,
    pub coord: Complex64,
}

impl SpherePoint {
    pub fn new(chart: Chart, coord: Complex64) -> Self {
        Self { chart, coord }
    }

    /// Canonical representative of the affine point `ζ`.
    pub fn from_affine(z: Complex64) -> Self {
        Self::new(Chart::Zero, z).canonical()
    }

    pub fn origin() -> Self {
        Self::new(Chart::Zero, Complex64::new(0.0, 0.0))
    }

    pub fn infinity() -> Self {
        Self::new(Chart::Infinity, Complex64::new(0.0, 0.0))
    }

    /// Moves points with `|coord| > 1` to the opposite chart.
    pub fn canonical(self) -> Self {
        if self.coord.norm() > 1.0 {
            Self::new(self.chart.other(), self.coord.inv())
        } else {
            self
        }
    }

    pub fn is_infinity(&self) -> bool {
        self.chart == Chart::Infinity && self.coord.norm() == 0.0
    }

    /// The affine coordinate `ζ`, or `None` at the point at infinity.
    pub fn affine(&self) -> Option<Complex64> {
        match self.chart {
            Chart::Zero => Some(self.coord),
            Chart::Infinity if self.coord.norm() == 0.0 => None,
            Chart::Infinity => Some(self.coord.inv()),
        }
    }

    /// `log|ζ|`, with `±∞` at the two poles.
    pub fn log_modulus(&self) -> f64 {
        match self.chart {
            Chart::Zero => self.coord.norm().ln(),
            Chart::Infinity => -self.coord.norm().ln(),
        }
    }

    /// `|ζ|`, with `+∞` at the point at infinity.
    pub fn modulus(&self) -> f64 {
        match self.chart {
            Chart::Zero => self.coord.norm(),
            Chart::Infinity => self.coord.norm().recip(),
        }
    }

    /// Chordal distance on P¹, bounded by one.
    pub fn chordal_distance(&self, other: &SpherePoint) -> f64 {
        let (a0, a1) = self.homogeneous();
        let (b0, b1) = other.homogeneous();
        let cross = (a0 * b1 - a1 * b0).norm();
        let na = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        let nb = (b0.norm_sqr() + b1.norm_sqr()).sqrt();
        cross / (na * nb)
    }

    fn homogeneous(&self) -> (Complex64, Complex64) {
        let one = Complex64::new(1.0, 0.0);
        match self.chart {
            Chart::Zero => (one, self.coord),
            Chart::Infinity => (self.coord, one),
        }
    }
}

/// Expresses `pt` in the opposite chart.
pub fn chart_transition(pt: SpherePoint) -> Result<SpherePoint> {
    if pt.coord.norm() == 0.0 {
        return Err(Error::Domain(format!(
            "the pole of chart {} has no coordinate in the opposite chart",
            pt.chart.as_str()
        )));
    }
    Ok(SpherePoint::new(pt.chart.other(), pt.coord.inv()))
}

/// `ρ(t) = ½ log(1 + e^{2t})`, the Fubini–Study potential as a function of
/// `t = log|ζ|`. Accepts `t = -∞`.
pub fn fs_potential(t: f64) -> f64 {
    if t > 0.0 {
        t + 0.5 * (-2.0 * t).exp().ln_1p()
    } else {
        0.5 * (2.0 * t).exp().ln_1p()
    }
}

/// Fubini–Study density with respect to Lebesgue measure in either chart.
pub fn fs_density(r: f64) -> f64 {
    let s = 1.0 + r * r;
    1.0 / (PI * s * s)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, nodes ascending.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x descends with i; map the pair ±x onto [0, 1]
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre in the chart radius times the trapezoid rule in angle,
/// on both charts.
///
/// Node `(chart, ring, k)` sits at chart coordinate `r_ring · e^{±iθ_k}`
/// with `θ_k = 2πk/N_θ`; the chart-∞ coordinate uses the minus sign so
/// that `θ_k` is the argument of `ζ` in both charts.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    n_r: usize,
    n_theta: usize,
    radii: Vec<f64>,
    radial_weights: Vec<f64>,
    nodes: Vec<SpherePoint>,
    fs_weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_r, self.n_theta)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Ring radii in chart coordinates, ascending, shared by both charts.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weights
    }

    pub fn nodes(&self) -> &[SpherePoint] {
        &self.nodes
    }

    pub fn fs_weights(&self) -> &[f64] {
        &self.fs_weights
    }

    pub fn theta(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_theta as f64
    }

    pub fn index(&self, chart: Chart, ring: usize, k: usize) -> usize {
        let base = match chart {
            Chart::Zero => 0,
            Chart::Infinity => self.n_r * self.n_theta,
        };
        base + ring * self.n_theta + k
    }

    /// `(chart, ring, angular index)` of a node.
    pub fn locate(&self, idx: usize) -> (Chart, usize, usize) {
        let per_chart = self.n_r * self.n_theta;
        let chart = if idx < per_chart { Chart::Zero } else { Chart::Infinity };
        let local = idx % per_chart;
        (chart, local / self.n_theta, local % self.n_theta)
    }

    /// Range of node indices forming one ring.
    pub fn ring_range(&self, chart: Chart, ring: usize) -> std::ops::Range<usize> {
        let start = self.index(chart, ring, 0);
        start..start + self.n_theta
    }

    /// `log|ζ|` of every node of a ring.
    pub fn ring_log_modulus(&self, chart: Chart, ring: usize) -> f64 {
        match chart {
            Chart::Zero => self.radii[ring].ln(),
            Chart::Infinity => -self.radii[ring].ln(),
        }
    }

    /// Evaluates `f` at every node.
    pub fn sample<F: Fn(&SpherePoint) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(f).collect()
    }
}

/// Builds the two-chart product grid.
pub fn build_grid(n_r: usize, n_theta: usize) -> Result<QuadratureGrid> {
    if n_r < MIN_RESOLUTION || n_theta < MIN_RESOLUTION {
        return Err(Error::Config(format!(
            "grid resolution {n_r}x{n_theta} is below the minimum {MIN_RESOLUTION}x{MIN_RESOLUTION}"
        )));
    }
    let (radii, radial_weights) = gauss_legendre_unit(n_r);
    let dtheta = 2.0 * PI / n_theta as f64;
    // Each chart carries FS mass 1/2; at low n_r the rule misses this by up to 1e-9.
    let chart_mass: f64 = radii.iter().zip(&radial_weights).map(|(&r, &wr)| wr * r * fs_density(r)).sum::<f64>() * 2.0 * PI;
    let normalize = 0.5 / chart_mass;
    let mut nodes = Vec::with_capacity(2 * n_r * n_theta);
    let mut fs_weights = Vec::with_capacity(2 * n_r * n_theta);
    for chart in [Chart::Zero, Chart::Infinity] {
        let sign = if chart == Chart::Zero { 1.0 } else { -1.0 };
        for (&r, &wr) in radii.iter().zip(&radial_weights) {
            let w = wr * r * fs_density(r) * dtheta * normalize;
            for k in 0..n_theta {
                let theta = dtheta * k as f64;
                nodes.push(SpherePoint::new(chart, Complex64::from_polar(r, sign * theta)));
                fs_weights.push(w);
            }
        }
    }
    Ok(QuadratureGrid { n_r, n_theta, radii, radial_weights, nodes, fs_weights })
}

/// `∫ f ω_FS` for a field sampled on the grid nodes.
pub fn fs_integral(grid: &QuadratureGrid, field: &[f64]) -> Result<f64> {
    if field.len() != grid.len() {
        return Err(Error::InvalidField(format!(
            "field has {} samples, grid has {} nodes",
            field.len(),
            grid.len()
        )));
    }
    let mut sum = NeumaierSum::default();
    for (i, (&f, &w)) in field.iter().zip(grid.fs_weights()).enumerate() {
        if f.is_nan() {
            return Err(Error::InvalidField(format!("NaN sample at node {i}")));
        }
        sum.add(f * w);
    }
    Ok(sum.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beta_oracle(j: usize, p: usize) -> f64 {
        // j!(p-j)!/(p+1)!
        let mut v = 1.0 / (p as f64 + 1.0);
        for i in 1..=j {
            v *= i as f64 / (p - j + i) as f64;
        }
        v
    }

    #[test]
    fn weights_sum_to_one() {
        let g = build_grid(64, 64).unwrap();
        let total: f64 = g.fs_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-10, "{total}");
        assert!(g.fs_weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn constant_and_disk_integrals() {
        let g = build_grid(64, 64).unwrap();
        let ones = vec![3.5; g.len()];
        assert!((fs_integral(&g, &ones).unwrap() - 3.5).abs() < 1e-10);
        let disk = g.sample(|p| if p.modulus() <= 1.0 { 1.0 } else { 0.0 });
        assert!((fs_integral(&g, &disk).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn fs_potential_integral() {
        // ½∫₀^∞ log(1+x)(1+x)^{-2} dx = ½
        // ρ is only log-smooth at ∞, so the rule converges algebraically.
        let g = build_grid(128, 16).unwrap();
        let f = g.sample(|p| fs_potential(p.log_modulus()));
        assert!((fs_integral(&g, &f).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn beta_monomials_are_exact() {
        let g = build_grid(256, 256).unwrap();
        for p in [0usize, 1, 5, 17, 40] {
            for j in 0..=p {
                let f = g.sample(|pt| {
                    let x = pt.modulus().powi(2);
                    if x.is_infinite() {
                        0.0
                    } else {
                        // |ζ|^{2j}(1+|ζ|²)^{-p}, evaluated stably in either chart
                        match pt.chart {
                            Chart::Zero => x.powi(j as i32) / (1.0 + x).powi(p as i32),
                            Chart::Infinity => {
                                let y = pt.coord.norm_sqr();
                                y.powi((p - j) as i32) / (1.0 + y).powi(p as i32)
                            }
                        }
                    }
                });
                let got = fs_integral(&g, &f).unwrap();
                let want = beta_oracle(j, p);
                assert!(((got - want) / want).abs() < 1e-8, "p={p} j={j}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn nan_is_rejected() {
        let g = build_grid(8, 8).unwrap();
        let mut f = vec![0.0; g.len()];
        f[3] = f64::NAN;
        assert!(matches!(fs_integral(&g, &f), Err(Error::InvalidField(_))));
    }

    #[test]
    fn resolution_floor() {
        assert!(matches!(build_grid(7, 64), Err(Error::Config(_))));
        assert!(matches!(build_grid(64, 4), Err(Error::Config(_))));
    }

    #[test]
    fn chart_transitions() {
        let p = SpherePoint::new(Chart::Zero, Complex64::new(2.0, 0.0));
        let q = chart_transition(p).unwrap();
        assert_eq!(q.chart, Chart::Infinity);
        assert!((q.coord - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let one = chart_transition(SpherePoint::new(Chart::Zero, Complex64::new(1.0, 0.0))).unwrap();
        assert_eq!(one.coord, Complex64::new(1.0, 0.0));
        assert!(matches!(chart_transition(SpherePoint::origin()), Err(Error::Domain(_))));
        let z = SpherePoint::new(Chart::Zero, Complex64::new(0.3, -0.7));
        let back = chart_transition(chart_transition(z).unwrap()).unwrap();
        assert!((back.coord - z.coord).norm() < 1e-14);
    }

    #[test]
    fn grid_refinement_is_consistent() {
        let field = |p: &SpherePoint| {
            let t = p.log_modulus();
            (t.tanh() + 0.3 * p.coord.re).sin()
        };
        let coarse = build_grid(64, 64).unwrap();
        let fine = build_grid(128, 128).unwrap();
        let a = fs_integral(&coarse, &coarse.sample(field)).unwrap();
        let b = fs_integral(&fine, &fine.sample(field)).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn canonical_points_live_in_the_unit_disk() {
        let p = SpherePoint::from_affine(Complex64::new(3.0, 4.0));
        assert_eq!(p.chart, Chart::Infinity);
        assert!((p.coord.norm() - 0.2).abs() < 1e-15);
        assert!((p.modulus() - 5.0).abs() < 1e-12);
        assert!(SpherePoint::infinity().is_infinity());
        assert!(SpherePoint::infinity().affine().is_none());
    }

    #[test]
    fn chordal_distance_of_poles() {
        assert!((SpherePoint::origin().chordal_distance(&SpherePoint::infinity()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn legendre_nodes_low_order() {
        let (x, w) = gauss_legendre_unit(2);
        let d = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - d)).abs() < 1e-15 && (x[1] - (0.5 + d)).abs() < 1e-15);
        assert!((w[0] - 0.5).abs() < 1e-15);
    }
}
