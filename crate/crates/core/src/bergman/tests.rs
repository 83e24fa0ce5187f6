use super::*;
use crate::envelope::{ddc_masses, psh_envelope, RadialFamily};
use crate::geometry::build_grid;
use crate::poly::eval_in_chart;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

fn beta_oracle(p: usize, j: usize) -> f64 {
    // ∫₀^∞ x^j (1+x)^{-p-2} dx = j!(p−j)!/(p+1)!
    (ln_gamma(j as f64 + 1.0) + ln_gamma((p - j) as f64 + 1.0) - ln_gamma(p as f64 + 2.0)).exp()
}

fn cap() -> WeightField {
    WeightField::family(RadialFamily::Cap(1.0))
}

fn bump() -> WeightField {
    WeightField::family(RadialFamily::Bump { center: 0.0, radius: 1.0, height: 0.5 })
}

#[test]
fn fs_gram_is_the_beta_diagonal() {
    for p in [0, 7, 30] {
        let g = build_grid(128, min_n_theta(p)).unwrap();
        let gram = gram_matrix(p, &WeightField::fs(), &g).unwrap();
        assert_eq!(gram.log_scale, 0.0);
        for j in 0..=p {
            for k in 0..=p {
                let v = gram.matrix[(j, k)];
                if j == k {
                    assert!((v.re / beta_oracle(p, j) - 1.0).abs() < 1e-10, "p={p} j={j}");
                } else {
                    assert!(v.norm() <= 1e-10 * beta_oracle(p, j).sqrt() * beta_oracle(p, k).sqrt());
                }
            }
        }
    }
}

#[test]
fn degree_zero_gram_is_total_mass() {
    let g = build_grid(64, 16).unwrap();
    for w in [cap(), bump(), WeightField::fs().shifted(3.0)] {
        let gram = gram_matrix(0, &w, &g).unwrap();
        assert!((gram.matrix[(0, 0)].re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn radial_gram_is_diagonal_and_hermitian() {
    let p = 20;
    let g = build_grid(96, min_n_theta(p)).unwrap();
    for w in [cap(), bump()] {
        let gram = gram_matrix(p, &w, &g).unwrap();
        assert!(gram.hermitian_defect() == 0.0);
        let m = &gram.matrix;
        for j in 0..=p {
            for k in 0..=p {
                if j != k {
                    assert!(m[(j, k)].norm() <= 1e-10 * (m[(j, j)].re * m[(k, k)].re).sqrt());
                }
            }
        }
    }
}

#[test]
fn angular_resolution_is_enforced() {
    let g = build_grid(32, 40).unwrap();
    assert!(matches!(gram_matrix(9, &WeightField::fs(), &g), Err(Error::Config(_))));
    assert!(gram_matrix(8, &WeightField::fs(), &g).is_ok());
}

#[test]
fn identity_gram_gives_identity_basis() {
    let gram = GramMatrix::from_matrix(DMatrix::identity(6, 6)).unwrap();
    let b = orthonormal_basis(&gram).unwrap();
    assert_eq!(b.coeffs, DMatrix::identity(6, 6));
    assert!((b.gram_cond - 1.0).abs() < 1e-12);
}

#[test]
fn fs_basis_diagonal_is_binomial() {
    let p = 12;
    let g = build_grid(64, min_n_theta(p)).unwrap();
    let b = build_basis(p, &WeightField::fs(), &g).unwrap();
    for j in 0..=p {
        let expected = ((p + 1) as f64 / beta_oracle(p, j) / (p + 1) as f64).sqrt();
        let binom = (ln_gamma(p as f64 + 1.0) - ln_gamma(j as f64 + 1.0) - ln_gamma((p - j) as f64 + 1.0)).exp();
        assert!((expected - ((p + 1) as f64 * binom).sqrt()).abs() < 1e-9 * expected);
        assert!((b.coeffs[(j, j)].re / expected - 1.0).abs() < 1e-10);
        assert_eq!(b.coeffs[(j, j)].im, 0.0);
    }
}

#[test]
fn random_spd_gram_is_orthonormalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = DMatrix::from_fn(5, 5, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let g = &a * a.adjoint() + DMatrix::identity(5, 5) * Complex64::new(0.1, 0.0);
    let b = orthonormal_basis(&GramMatrix::from_matrix(g.clone()).unwrap()).unwrap();
    let id = &b.coeffs * g * b.coeffs.adjoint();
    for i in 0..5 {
        for j in 0..5 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((id[(i, j)] - target).norm() < 1e-10);
            if j > i {
                assert_eq!(b.coeffs[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
        assert!(b.coeffs[(i, i)].re > 0.0);
    }
}

#[test]
fn singular_gram_is_reported() {
    let mut g = DMatrix::<Complex64>::identity(3, 3);
    g[(0, 1)] = Complex64::new(1.0, 0.0);
    g[(1, 0)] = Complex64::new(1.0, 0.0);
    match orthonormal_basis(&GramMatrix::from_matrix(g).unwrap()) {
        Err(Error::Conditioning { cond }) => assert!(cond > 1e14),
        other => panic!("expected a conditioning error, got {other:?}"),
    }
}

#[test]
fn fs_kernel_is_constant() {
    for p in [5, 20, 50] {
        let g = build_grid(256, min_n_theta(p)).unwrap();
        let b = build_basis(p, &WeightField::fs(), &g).unwrap();
        let kf = bergman_kernel(&b, &WeightField::fs(), &g).unwrap();
        for v in &kf.values {
            assert!((v / (p + 1) as f64 - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn degree_zero_kernel_is_one() {
    let g = build_grid(64, 16).unwrap();
    for w in [cap(), bump().shifted(-2.0)] {
        let b = build_basis(0, &w, &g).unwrap();
        let kf = bergman_kernel(&b, &w, &g).unwrap();
        assert!(kf.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(kf.log_half_p.iter().all(|&v| v == 0.0));
    }
}

/// `|S(x)|²_{h^p}` for monomial coefficients `c` normalized with the Gram matrix.
fn pointwise_norm(gram: &GramMatrix, c: &[Complex64], w: &WeightField, g: &QuadratureGrid, node: usize) -> f64 {
    let v = DVector::from_column_slice(c);
    let norm2 = (v.adjoint() * &gram.matrix * &v)[(0, 0)].re;
    let phi = w.sample_phi(g).unwrap();
    let shift = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let local = local_from_global(g, &phi.iter().map(|x| x - shift).collect::<Vec<_>>());
    let f = eval_in_chart(c, &g.nodes()[node]);
    f.norm_sqr() * (-2.0 * gram.p as f64 * local[node]).exp() / norm2
}

#[test]
fn kernel_dominates_unit_sections_and_is_attained() {
    let p = 12;
    let g = build_grid(64, min_n_theta(p)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for w in [bump(), cap()] {
        let gram = gram_matrix(p, &w, &g).unwrap();
        let b = orthonormal_basis(&gram).unwrap();
        let kf = bergman_kernel(&b, &w, &g).unwrap();
        for _ in 0..50 {
            let node = rng.random_range(0..g.len());
            let c: Vec<Complex64> =
                (0..=p).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            assert!(pointwise_norm(&gram, &c, &w, &g, node) <= kf.values[node] * (1.0 + 1e-9));
        }
        for node in [0, g.len() / 3, g.len() - 1] {
            // Peak section Σ conj(S_j(x)) S_j.
            let pt = g.nodes()[node];
            let a: Vec<Complex64> = (0..=p)
                .map(|j| {
                    let row: Vec<Complex64> = (0..=p).map(|l| b.coeffs[(j, l)]).collect();
                    eval_in_chart(&row, &pt).conj()
                })
                .collect();
            let c = b.combine(&a);
            let attained = pointwise_norm(&gram, &c, &w, &g, node);
            assert!(attained >= 0.95 * kf.values[node] && attained <= kf.values[node] * (1.0 + 1e-9));
        }
    }
}

#[test]
fn fs_distance_to_envelope_is_closed_form() {
    let p = 20;
    let g = build_grid(128, min_n_theta(p)).unwrap();
    let w = WeightField::fs();
    let kf = bergman_kernel(&build_basis(p, &w, &g).unwrap(), &w, &g).unwrap();
    let env = psh_envelope(&w, &g, 1e-10, 1000).unwrap();
    let d = kernel_vs_envelope(&kf, &env, &g).unwrap();
    assert!((d - 21f64.ln() / 40.0).abs() < 1e-6);
}

#[test]
fn identical_fields_have_zero_distance() {
    let p = 6;
    let g = build_grid(32, min_n_theta(p)).unwrap();
    let w = bump();
    let kf = bergman_kernel(&build_basis(p, &w, &g).unwrap(), &w, &g).unwrap();
    let mut env = psh_envelope(&w, &g, 1e-10, 1000).unwrap();
    env.phi_eq = env.phi.iter().zip(&kf.log_half_p).map(|(a, b)| a + b).collect();
    assert!(kernel_vs_envelope(&kf, &env, &g).unwrap() < 1e-15);
}

#[test]
fn lineage_is_checked() {
    let p = 4;
    let g = build_grid(32, min_n_theta(p)).unwrap();
    let b = build_basis(p, &cap(), &g).unwrap();
    assert!(matches!(bergman_kernel(&b, &bump(), &g), Err(Error::Usage(_))));
    let kf = bergman_kernel(&b, &cap(), &g).unwrap();
    let env = psh_envelope(&bump(), &g, 1e-10, 1000).unwrap();
    assert!(matches!(kernel_vs_envelope(&kf, &env, &g), Err(Error::Usage(_))));
}

#[test]
fn constant_offsets_leave_the_weighted_kernel_unchanged() {
    let p = 15;
    let c = 0.7;
    let g = build_grid(64, min_n_theta(p)).unwrap();
    let w = bump();
    let ws = w.shifted(c);
    let b = build_basis(p, &w, &g).unwrap();
    let bs = build_basis(p, &ws, &g).unwrap();
    let k = bergman_kernel(&b, &w, &g).unwrap();
    let ks = bergman_kernel(&bs, &ws, &g).unwrap();
    for (a, s) in k.values.iter().zip(&ks.values) {
        assert!((a / s - 1.0).abs() < 1e-10);
    }
    // The unweighted kernel Σ|S_j|² scales by e^{2pc}.
    let node = g.len() / 5;
    let pt = g.nodes()[node];
    let unweighted = |b: &BergmanBasis| -> f64 {
        let s: f64 = (0..=p)
            .map(|j| {
                let row: Vec<Complex64> = (0..=p).map(|l| b.coeffs[(j, l)]).collect();
                eval_in_chart(&row, &pt).norm_sqr()
            })
            .sum();
        s * (2.0 * b.log_scale).exp()
    };
    let ratio = unweighted(&bs) / unweighted(&b);
    assert!((ratio / (2.0 * p as f64 * c).exp() - 1.0).abs() < 1e-9);
    let env = psh_envelope(&w, &g, 1e-10, 1000).unwrap();
    let envs = psh_envelope(&ws, &g, 1e-10, 1000).unwrap();
    let d = kernel_vs_envelope(&k, &env, &g).unwrap();
    let ds = kernel_vs_envelope(&ks, &envs, &g).unwrap();
    assert!((d - ds).abs() < 1e-9);
}

#[test]
fn larger_weights_give_larger_unweighted_kernels() {
    // ψ₁ ≤ ψ₂ makes every norm larger for ψ₁, so its unit ball and Σ|S_j|² are smaller.
    let p = 10;
    let g = build_grid(48, min_n_theta(p)).unwrap();
    let w1 = WeightField::fs();
    let w2 = bump();
    let k = |w: &WeightField| -> Vec<f64> {
        let b = build_basis(p, w, &g).unwrap();
        let kf = bergman_kernel(&b, w, &g).unwrap();
        let psi = w.sample_psi_local(&g).unwrap();
        kf.values.iter().zip(&psi).map(|(v, s)| v * (2.0 * p as f64 * s).exp()).collect()
    };
    let (k1, k2) = (k(&w1), k(&w2));
    for (a, b) in k1.iter().zip(&k2) {
        assert!(*a <= b * (1.0 + 1e-8));
    }
}

#[test]
fn fubini_study_currents_are_positive_with_unit_mass() {
    let p = 16;
    let g = build_grid(64, min_n_theta(p)).unwrap();
    for w in [bump(), cap()] {
        let kf = bergman_kernel(&build_basis(p, &w, &g).unwrap(), &w, &g).unwrap();
        let m = ddc_masses(&g, &kf.fs_potential).unwrap();
        let total: f64 = m.iter().sum();
        assert!((total - 1.0).abs() < 0.02);
        assert!(m.iter().all(|&x| x >= -1e-6), "min {}", m.iter().cloned().fold(f64::INFINITY, f64::min));
    }
}

#[test]
fn rate_fit_examples() {
    let ps = [10usize, 20, 40, 80];
    let exact: Vec<(usize, f64)> = ps.iter().map(|&p| (p, (p as f64).ln() / p as f64)).collect();
    let f = rate_fit(&exact).unwrap();
    assert!((f.c_hat - 1.0).abs() < 1e-14);
    assert_eq!(f.max_violation, 0.0);
    let zero: Vec<(usize, f64)> = ps.iter().map(|&p| (p, 0.0)).collect();
    assert_eq!(rate_fit(&zero).unwrap().c_hat, 0.0);
    let fs: Vec<(usize, f64)> = ps.iter().map(|&p| (p, ((p + 1) as f64).ln() / (2.0 * p as f64))).collect();
    let c = rate_fit(&fs).unwrap().c_hat;
    assert!((0.5..=0.7).contains(&c));
    assert!(matches!(rate_fit(&fs[..3]), Err(Error::Usage(_))));
    assert!(matches!(rate_fit(&[(4, 0.1), (10, 0.1), (20, 0.1), (40, 0.1)]), Err(Error::Usage(_))));
}
