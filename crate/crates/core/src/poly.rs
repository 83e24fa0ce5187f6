//! Evaluation of degree-`p` polynomials in the frame of either chart.
//!
//! A polynomial `f(ζ) = Σ c_l ζ^l` of formal degree `p` is the section
//! `f` in the chart at zero and `g(w) = w^p f(1/w) = Σ c_l w^{p−l}` in the
//! chart at infinity. On a grid ring all angular values come from one FFT.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::geometry::{Chart, SpherePoint};

/// `Σ c_l z^l` by Horner's rule.
pub fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Value of the section with monomial coefficients `coeffs` in the frame of
/// the chart of `pt`.
pub fn eval_in_chart(coeffs: &[Complex64], pt: &SpherePoint) -> Complex64 {
    match pt.chart {
        Chart::Zero => horner(coeffs, pt.coord),
        Chart::Infinity => {
            coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * pt.coord + c)
        }
    }
}

/// Ring evaluator for a fixed number of angular nodes.
#[derive(Clone)]
pub struct RingEvaluator {
    n_theta: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl RingEvaluator {
    pub fn new(n_theta: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n_theta,
            forward: planner.plan_fft_forward(n_theta),
            inverse: planner.plan_fft_inverse(n_theta),
        }
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Frame values at the nodes `r·e^{±iθ_k}` of one ring of `chart`, written
    /// into `out` (length `n_theta`). `θ_k` is the argument of `ζ`.
    pub fn eval_ring(&self, coeffs: &[Complex64], r: f64, chart: Chart, out: &mut [Complex64]) {
        let n = self.n_theta;
        let p = coeffs.len() - 1;
        out.fill(Complex64::new(0.0, 0.0));
        match chart {
            Chart::Zero => {
                // Σ c_l r^l e^{ilθ_k}: an unnormalized inverse DFT.
                let mut rl = 1.0;
                for (l, &c) in coeffs.iter().enumerate() {
                    out[l % n] += c * rl;
                    rl *= r;
                }
                self.inverse.process(out);
            }
            Chart::Infinity => {
                // Σ c_{p−m} r^m e^{−imθ_k}: a forward DFT.
                let mut rm = 1.0;
                for m in 0..=p {
                    out[m % n] += coeffs[p - m] * rm;
                    rm *= r;
                }
                self.forward.process(out);
            }
        }
    }
}
