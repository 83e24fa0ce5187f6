//! Shared fixtures for the benchmarks.

use equilab_core::bergman::min_n_theta;
use equilab_core::{build_basis, build_grid, BergmanBasis, QuadratureGrid, WeightField};

/// A non-radial weight: cap{1} plus a smooth angular ripple.
pub fn rippled_cap(grid: &QuadratureGrid) -> WeightField {
    let cap = WeightField::family("cap{1}".parse().expect("family"));
    let base = cap.sample_phi(grid).expect("cap samples");
    let ripple = grid.nodes().iter().map(|pt| {
        let th = pt.affine().map_or(0.0, |z| z.arg());
        0.2 * th.cos() / pt.log_modulus().clamp(-700.0, 700.0).cosh()
    });
    WeightField::nodal(grid, base.iter().zip(ripple).map(|(a, b)| a + b).collect()).expect("nodal weight")
}

/// Grid fine enough for degree `p`, with `n_r` radial nodes.
pub fn grid_for(n_r: usize, p: usize) -> QuadratureGrid {
    build_grid(n_r, min_n_theta(p)).expect("grid")
}

/// Orthonormal FS basis of degree `p`.
pub fn fs_basis(p: usize) -> BergmanBasis {
    let g = grid_for(64, p);
    build_basis(p, &WeightField::fs(), &g).expect("basis")
}
