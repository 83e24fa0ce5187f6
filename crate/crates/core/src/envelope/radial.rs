//! Radial weights `u(t) = ψ(e^t)` and their Lelong-class envelope.
//!
//! For a radial weight the envelope is the largest convex, nondecreasing
//! minorant of `u` with slope at most one. It is computed by a double
//! Legendre transform over a uniform set of slopes in `[0, 1]`.

use crate::error::{Error, Result};
use crate::geometry::fs_potential;

/// Default number of slope intervals of the envelope transform.
pub const DEFAULT_SLOPE_SAMPLES: usize = 1024;

/// Tolerance on the end slopes of an admissible radial weight.
pub const SLOPE_TOL: f64 = 1e-2;

/// `u` sampled on the uniform grid `t_min + i·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialWeight {
    t_min: f64,
    dt: f64,
    values: Vec<f64>,
}

impl RadialWeight {
    pub fn new(t_min: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !t_min.is_finite() || values.len() < 3 {
            return Err(Error::Config("radial weight needs dt > 0 and at least 3 samples".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("radial weight is not finite at sample {i}")));
        }
        Ok(Self { t_min, dt, values })
    }

    /// Tabulates `u` on `[t_min, t_max]` with step close to `dt`.
    pub fn from_fn<F: Fn(f64) -> f64>(u: F, t_min: f64, t_max: f64, dt: f64) -> Self {
        let n = ((t_max - t_min) / dt).round().max(2.0) as usize;
        let dt = (t_max - t_min) / n as f64;
        let values = (0..=n).map(|i| u(t_min + i as f64 * dt)).collect();
        Self { t_min, dt, values }
    }

    /// Builds a weight from `(t, u)` pairs on a uniform grid.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::Config("radial weight needs at least 3 samples".into()));
        }
        let t0 = samples[0].0;
        let dt = (samples[samples.len() - 1].0 - t0) / (samples.len() - 1) as f64;
        for (i, &(t, _)) in samples.iter().enumerate() {
            if (t - (t0 + i as f64 * dt)).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(Error::Config(format!("radial samples are not uniformly spaced at row {i}")));
            }
        }
        Self::new(t0, dt, samples.iter().map(|s| s.1).collect())
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_min + (self.values.len() - 1) as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t_min + i as f64 * self.dt
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self { t_min: self.t_min, dt: self.dt, values: self.values.iter().map(|v| v + c).collect() }
    }

    /// Piecewise-linear `u(t)`, continued outside the window with slope 0
    /// on the left and slope 1 on the right.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        if t <= self.t_min {
            return self.values[0];
        }
        let t_max = self.t_max();
        if t >= t_max {
            return self.values[n - 1] + (t - t_max);
        }
        let x = (t - self.t_min) / self.dt;
        let i = (x.floor() as usize).min(n - 2);
        let f = x - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// `φ(t) = u(t) − ρ(t)`.
    pub fn phi(&self, t: f64) -> f64 {
        if t == f64::NEG_INFINITY {
            return self.values[0];
        }
        if t == f64::INFINITY {
            return self.values[self.values.len() - 1] - self.t_max();
        }
        self.eval(t) - fs_potential(t)
    }

    /// End slopes must be 0 on the left and 1 on the right.
    pub fn check_admissible(&self) -> Result<()> {
        let n = self.values.len();
        let left = (self.values[1] - self.values[0]) / self.dt;
        let right = (self.values[n - 1] - self.values[n - 2]) / self.dt;
        if left.abs() > SLOPE_TOL {
            return Err(Error::InadmissibleWeight(format!(
                "slope {left:.4} at t = {:.2}; a continuous weight needs slope 0 towards ζ = 0",
                self.t_min
            )));
        }
        if (right - 1.0).abs() > SLOPE_TOL {
            return Err(Error::InadmissibleWeight(format!(
                "slope {right:.4} at t = {:.2}; a continuous weight needs slope 1 towards ζ = ∞",
                self.t_max()
            )));
        }
        Ok(())
    }
}

/// Upper envelope of the lines `s_k·t + b_k`, stored as the lines that are
/// active somewhere together with their breakpoints.
#[derive(Debug, Clone)]
pub struct SupportingLines {
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    breaks: Vec<f64>,
}

impl SupportingLines {
    /// Lines of slope `k/K` supporting `u` from below.
    pub fn of(w: &RadialWeight, slope_samples: usize) -> Result<Self> {
        if slope_samples < 64 {
            return Err(Error::Config(format!("slope_samples = {slope_samples} is below 64")));
        }
        w.check_admissible()?;
        let hull = lower_hull(w);
        let mut slopes = Vec::with_capacity(slope_samples + 1);
        let mut intercepts = Vec::with_capacity(slope_samples + 1);
        // The minimizer of u(τ) − sτ moves right along the hull as s grows.
        let mut v = 0;
        for k in 0..=slope_samples {
            let s = k as f64 / slope_samples as f64;
            while v + 1 < hull.len() {
                let (t0, u0) = hull[v];
                let (t1, u1) = hull[v + 1];
                if u1 - s * t1 <= u0 - s * t0 {
                    v += 1;
                } else {
                    break;
                }
            }
            slopes.push(s);
            intercepts.push(hull[v].1 - s * hull[v].0);
        }
        Ok(Self::upper_envelope(&slopes, &intercepts))
    }

    fn upper_envelope(slopes: &[f64], intercepts: &[f64]) -> Self {
        let mut s_out: Vec<f64> = Vec::new();
        let mut b_out: Vec<f64> = Vec::new();
        let mut breaks: Vec<f64> = Vec::new();
        for (&s, &b) in slopes.iter().zip(intercepts) {
            while let Some(&sl) = s_out.last() {
                let bl = *b_out.last().unwrap();
                // Crossing point of the new line with the last kept one.
                let x = (bl - b) / (s - sl);
                if breaks.last().is_some_and(|&xb| x <= xb) {
                    s_out.pop();
                    b_out.pop();
                    breaks.pop();
                } else {
                    breaks.push(x);
                    break;
                }
            }
            s_out.push(s);
            b_out.push(b);
        }
        Self { slopes: s_out, intercepts: b_out, breaks }
    }

    /// `max_k (s_k t + b_k)`.
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.breaks.partition_point(|&x| x < t);
        self.slopes[i] * t + self.intercepts[i]
    }

    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }
}

/// Lower convex hull of the sample points, left to right.
fn lower_hull(w: &RadialWeight) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for (i, &u) in w.values.iter().enumerate() {
        let p = (w.t(i), u);
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Largest convex nondecreasing minorant of `u` with slope at most one,
/// sampled on the grid of `w`.
pub fn radial_envelope(w: &RadialWeight, slope_samples: usize) -> Result<RadialWeight> {
    let lines = SupportingLines::of(w, slope_samples)?;
    let values = (0..w.values.len()).map(|i| lines.eval(w.t(i)).min(w.values[i])).collect();
    Ok(RadialWeight { t_min: w.t_min, dt: w.dt, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct `O(nK)` evaluation of the double transform.
    fn brute(w: &RadialWeight, k: usize, t: f64) -> f64 {
        (0..=k)
            .map(|j| {
                let s = j as f64 / k as f64;
                let b = (0..w.values().len())
                    .map(|i| w.values()[i] - s * w.t(i))
                    .fold(f64::INFINITY, f64::min);
                s * t + b
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn cap(t: f64) -> f64 {
        if t < 0.0 {
            (-t).min(1.0)
        } else {
            t
        }
    }

    #[test]
    fn convex_inputs_are_fixed() {
        let w = RadialWeight::from_fn(|t| t.max(0.0), -20.0, 20.0, 1.0 / 64.0);
        let e = radial_envelope(&w, 1024).unwrap();
        for (a, b) in e.values().iter().zip(w.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        // Strictly convex input: error is set by the slope spacing.
        let w = RadialWeight::from_fn(fs_potential, -20.0, 20.0, 1.0 / 64.0);
        for k in [1024, 8192] {
            let e = radial_envelope(&w, k).unwrap();
            for (a, b) in e.values().iter().zip(w.values()) {
                assert!(*a <= *b && b - a < 0.25 / k as f64);
            }
        }
    }

    #[test]
    fn cap_envelope_matches_brute_force_lines() {
        let w = RadialWeight::from_fn(cap, -10.0, 10.0, 1.0 / 32.0);
        let e = radial_envelope(&w, 1000).unwrap();
        for i in (0..w.values().len()).step_by(7) {
            let t = w.t(i);
            let b = brute(&w, 1000, t);
            assert!((e.values()[i] - b).abs() < 1e-12, "t = {t}");
            assert!((e.values()[i] - t.max(0.0)).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn dip_envelope_matches_brute_force_lines() {
        let u = |t: f64| fs_potential(t) - 0.4 * (-(t - 0.3) * (t - 0.3) * 2.0).exp();
        let w = RadialWeight::from_fn(u, -12.0, 12.0, 1.0 / 32.0);
        let e = radial_envelope(&w, 256).unwrap();
        for i in (0..w.values().len()).step_by(5) {
            let b = brute(&w, 256, w.t(i)).min(w.values()[i]);
            assert!((e.values()[i] - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_growth_is_rejected() {
        let w = RadialWeight::from_fn(|t| 2.0 * t.max(0.0), -10.0, 10.0, 0.1);
        assert!(matches!(radial_envelope(&w, 1024), Err(Error::InadmissibleWeight(_))));
        let w = RadialWeight::from_fn(|t| t.abs(), -10.0, 10.0, 0.1);
        assert!(matches!(radial_envelope(&w, 1024), Err(Error::InadmissibleWeight(_))));
        let w = RadialWeight::from_fn(|t| t.max(0.0), -10.0, 10.0, 0.1);
        assert!(matches!(radial_envelope(&w, 16), Err(Error::Config(_))));
    }

    #[test]
    fn evaluation_extends_with_asymptotic_slopes() {
        let w = RadialWeight::from_fn(|t| t.max(0.0), -5.0, 5.0, 0.5);
        assert_eq!(w.eval(-100.0), 0.0);
        assert!((w.eval(7.0) - 7.0).abs() < 1e-12);
        assert!((w.eval(0.25) - 0.25).abs() < 1e-12);
    }
}
