//! Numerics for equilibrium weights, weighted Bergman kernels and zeros of
//! random polynomials on the Riemann sphere.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bergman;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod measure;
pub mod poly;
pub mod randsec;
pub mod rng;
pub mod stats;
pub mod zeros;

pub use bergman::{
    bergman_kernel, build_basis, gram_matrix, kernel_vs_envelope, orthonormal_basis, rate_fit,
    BergmanBasis, GramMatrix, KernelField, RateFit,
};
pub use envelope::{
    equilibrium_measure, psh_envelope, psi_h, radial_envelope, radial_equilibrium, EnvelopeResult,
    RadialFamily, RadialWeight, WeightField,
};
pub use error::{Error, Result};
pub use randsec::{
    bhyp_check, iid_scaling_probe, moment_estimate, sphere_area_constant, BHypothesis, MeasureSpec,
    MomentReport, TailSpec,
};
pub use zeros::{
    empirical_zero_measure, expectation_current, find_roots, lognorm_field, sample_section,
    weak_convergence_stat, SectionSample, ZeroSet,
};
pub use geometry::{build_grid, chart_transition, fs_integral, Chart, QuadratureGrid, SpherePoint};
pub use measure::{EmpiricalMeasure, Region};

