use super::*;
use crate::bergman::{build_basis, min_n_theta, orthonormal_basis, GramMatrix};
use crate::envelope::RadialFamily;
use crate::geometry::{build_grid, fs_potential};
use crate::stats::ks_uniform;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Gaussian section of `O(p)` for the FS metric, in monomial form.
fn fs_gaussian(p: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut binom = 1.0f64;
    (0..=p)
        .map(|j| {
            if j > 0 {
                binom *= (p + 1 - j) as f64 / j as f64;
            }
            let a = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            a * binom.sqrt()
        })
        .collect()
}

/// Greedy matching distance between two root multisets.
fn match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut left = b.to_vec();
    let mut worst = 0.0f64;
    for z in a {
        let (i, d) = left
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (z - w).norm() / (1.0 + z.norm())))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        worst = worst.max(d);
        left.swap_remove(i);
    }
    worst
}

#[test]
fn roots_of_unity() {
    let p = 12;
    let mut f = vec![c(0.0, 0.0); p + 1];
    f[0] = c(-1.0, 0.0);
    f[p] = c(1.0, 0.0);
    let z = roots_of(&f).unwrap();
    assert_eq!(z.mult_at_infinity, 0);
    let expected: Vec<Complex64> = (0..p).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / p as f64)).collect();
    assert!(match_distance(&z.finite_roots, &expected) < 1e-12);
    let em = empirical_zero_measure(&z);
    assert_eq!(em.atoms.len(), p);
    assert!(em.atoms.iter().all(|(pt, m)| (pt.modulus() - 1.0).abs() < 1e-12 && *m == 1.0 / p as f64));
    assert!((em.total_mass - 1.0).abs() < 1e-12);
}

#[test]
fn degree_deficiency_is_mass_at_infinity() {
    let mut f = vec![c(0.0, 0.0); 6];
    f[2] = c(1.0, 0.0);
    let z = roots_of(&f).unwrap();
    assert_eq!(z.finite_roots, vec![c(0.0, 0.0); 2]);
    assert_eq!(z.mult_at_infinity, 3);
    let em = empirical_zero_measure(&z);
    assert!((em.mass_of(&Region::Disk { radius: 0.0 }) - 0.4).abs() < 1e-15);
    assert!((em.mass_of(&Region::Shell { inner: 1.0, outer: f64::INFINITY }) - 0.6).abs() < 1e-15);
    assert!((em.total_mass - 1.0).abs() < 1e-12);
}

#[test]
fn negligible_leading_terms_are_stripped() {
    let z = roots_of(&[c(1.0, 0.0), c(1.0, 0.0), c(1e-20, 0.0)]).unwrap();
    assert_eq!(z.mult_at_infinity, 1);
    assert!((z.finite_roots[0] + 1.0).norm() < 1e-12);
    assert!(matches!(roots_of(&[c(0.0, 0.0); 4]), Err(Error::Usage(_))));
    let z = roots_of(&[c(2.0, 1.0)]).unwrap();
    assert_eq!((z.finite_roots.len(), z.mult_at_infinity), (0, 0));
}

#[test]
fn vieta_identities_for_cubics() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let f: Vec<Complex64> = (0..3).map(|_| c(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0)).chain([c(1.0, 0.0)]).collect();
        let z = roots_of(&f).unwrap();
        assert_eq!(z.finite_roots.len(), 3);
        let sum: Complex64 = z.finite_roots.iter().sum();
        let prod: Complex64 = z.finite_roots.iter().product();
        assert!((sum + f[2] / f[3]).norm() < 1e-8);
        assert!((prod + f[0] / f[3]).norm() < 1e-8);
    }
}

#[test]
fn total_zero_mass_is_the_degree() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut rejected = 0;
    for _ in 0..1000 {
        let p = rng.random_range(1..=60);
        let mut f = fs_gaussian(p, &mut rng);
        // Occasionally kill leading or trailing terms.
        let cut: usize = rng.random_range(0..4);
        if rng.random::<bool>() {
            f.iter_mut().rev().take(cut.min(p)).for_each(|x| *x = c(0.0, 0.0));
        } else {
            f.iter_mut().take(cut.min(p)).for_each(|x| *x = c(0.0, 0.0));
        }
        match roots_of(&f) {
            Ok(z) => {
                assert_eq!(z.total_multiplicity(), p);
                assert!(z.root_condition <= MAX_ROOT_RESIDUAL);
                assert!((empirical_zero_measure(&z).total_mass - 1.0).abs() < 1e-12);
            }
            Err(Error::IllConditionedSample { .. }) => rejected += 1,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(rejected <= 10, "{rejected} rejected");
}

#[test]
fn high_degree_gaussian_roots_are_accurate() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for p in [100, 200, 300] {
        let f = fs_gaussian(p, &mut rng);
        let z = roots_of(&f).unwrap();
        assert_eq!(z.finite_roots.len() + z.mult_at_infinity, p);
        assert!(z.root_condition < 1e-10, "p={p}: {}", z.root_condition);
    }
}

#[test]
fn rescaling_does_not_move_zeros() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for p in [5, 40, 120] {
        let f = fs_gaussian(p, &mut rng);
        let k = c(-3.7e5, 2.1e4);
        let g: Vec<Complex64> = f.iter().map(|x| x * k).collect();
        let (a, b) = (roots_of(&f).unwrap(), roots_of(&g).unwrap());
        assert_eq!(a.mult_at_infinity, b.mult_at_infinity);
        assert!(match_distance(&a.finite_roots, &b.finite_roots) < 1e-8);
    }
}

#[test]
fn prescribed_coefficients() {
    let basis = orthonormal_basis(&GramMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap()).unwrap();
    let s = section_from_coefficients(&basis, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
    assert_eq!(s.monomial_coeffs, vec![c(1.0, 0.0), c(0.0, 0.0)]);
    let z = find_roots(&s).unwrap();
    assert_eq!((z.finite_roots.len(), z.mult_at_infinity), (0, 1));

    let p = 5;
    let g = build_grid(32, min_n_theta(p)).unwrap();
    let basis = build_basis(p, &WeightField::fs(), &g).unwrap();
    for j in 0..=p {
        let mut a = vec![c(0.0, 0.0); p + 1];
        a[j] = c(1.0, 0.0);
        let s = section_from_coefficients(&basis, &a).unwrap();
        let row: Vec<Complex64> = (0..=p).map(|l| basis.coeffs[(j, l)]).collect();
        assert_eq!(s.monomial_coeffs, row);
    }
    assert!(section_from_coefficients(&basis, &[c(0.0, 0.0); 6]).is_err());
    assert!(section_from_coefficients(&basis, &[c(1.0, 0.0); 5]).is_err());
}

#[test]
fn gaussian_draws_concentrate() {
    let p = 50;
    let g = build_grid(32, min_n_theta(p)).unwrap();
    let basis = build_basis(p, &WeightField::fs(), &g).unwrap();
    let n = 1000;
    let ratios: Vec<f64> = (0..n)
        .map(|t| {
            let s = sample_section(&basis, &MeasureSpec::GaussianComplex, 5, t).unwrap();
            s.basis_coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() / (p + 1) as f64
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / n as f64;
    let sigma = (1.0 / ((p + 1) as f64 * n as f64)).sqrt();
    assert!((mean - 1.0).abs() < 4.0 * sigma);
    let again = sample_section(&basis, &MeasureSpec::GaussianComplex, 5, 17).unwrap();
    assert_eq!(again, sample_section(&basis, &MeasureSpec::GaussianComplex, 5, 17).unwrap());
    assert_ne!(again, sample_section(&basis, &MeasureSpec::GaussianComplex, 6, 17).unwrap());
}

#[test]
fn lognorm_of_constant_and_top_sections() {
    let p = 10;
    let g = build_grid(32, min_n_theta(p)).unwrap();
    let w = WeightField::fs();
    let basis = build_basis(p, &w, &g).unwrap();
    let mut a = vec![c(0.0, 0.0); p + 1];
    a[0] = c(1.0, 0.0);
    let s = section_from_coefficients(&basis, &a).unwrap();
    let f = lognorm_field(&s, &w, &g).unwrap();
    let c0 = basis.coeffs[(0, 0)].re;
    for (pt, v) in g.nodes().iter().zip(&f.values) {
        assert!((v - (c0.ln() / p as f64 - fs_potential(pt.log_modulus()))).abs() < 1e-12);
    }
    let bound = ((p + 1) as f64).ln() / (2.0 * p as f64);
    for j in 0..=p {
        let mut a = vec![c(0.0, 0.0); p + 1];
        a[j] = c(1.0, 0.0);
        let f = lognorm_field(&section_from_coefficients(&basis, &a).unwrap(), &w, &g).unwrap();
        let top = f.values.iter().zip(&f.mask).filter(|x| !x.1).map(|x| *x.0).fold(f64::MIN, f64::max);
        assert!(top <= bound + 1e-9);
    }
}

#[test]
fn lognorm_checks_lineage_and_masks_zeros() {
    let p = 4;
    let g = build_grid(32, min_n_theta(p)).unwrap();
    let w = WeightField::fs();
    let basis = build_basis(p, &w, &g).unwrap();
    let s = sample_section(&basis, &MeasureSpec::GaussianComplex, 1, 0).unwrap();
    let other = WeightField::family(RadialFamily::Cap(1.0));
    assert!(matches!(lognorm_field(&s, &other, &g), Err(Error::Usage(_))));
    // A section vanishing on a grid node: only that node is masked.
    let node = g.nodes()[g.index(Chart::Zero, 5, 3)].affine().unwrap();
    let mut f = vec![c(0.0, 0.0); p + 1];
    f[0] = -node;
    f[1] = c(1.0, 0.0);
    let mut s = s.clone();
    s.monomial_coeffs = f;
    let field = lognorm_field(&s, &w, &g).unwrap();
    assert_eq!(field.masked(), 1);
    assert!(field.mask[g.index(Chart::Zero, 5, 3)]);
    assert!(field.values.iter().all(|v| v.is_finite()));
    let zero = vec![0.0; g.len()];
    let d = field.l1_distance(&zero, &g).unwrap();
    assert!(d.is_finite() && d > 0.0);
}

#[test]
fn lognorm_approaches_the_envelope_gap() {
    // Cap weight: Ψ_h = min(0, max(t, −1)).
    let g = build_grid(64, min_n_theta(120)).unwrap();
    let w = WeightField::family(RadialFamily::Cap(1.0));
    let psi_h: Vec<f64> = g.nodes().iter().map(|pt| pt.log_modulus().clamp(-1.0, 0.0)).collect();
    let b30 = build_basis(30, &w, &g).unwrap();
    let b120 = build_basis(120, &w, &g).unwrap();
    let spec = MeasureSpec::GaussianComplex;
    let better = (0..50u64)
        .filter(|&t| {
            let l1 = |b: &BergmanBasis| {
                let s = sample_section(b, &spec, 31, t).unwrap();
                lognorm_field(&s, &w, &g).unwrap().l1_distance(&psi_h, &g).unwrap()
            };
            l1(&b120) <= l1(&b30)
        })
        .count();
    assert!(better >= 45, "{better} of 50");
}

#[test]
fn fs_zeros_split_evenly_across_the_unit_circle() {
    let p = 100;
    let g = build_grid(32, min_n_theta(p)).unwrap();
    let basis = build_basis(p, &WeightField::fs(), &g).unwrap();
    let regions = [Region::unit_disk(), Region::Sphere];
    let r = expectation_current(&basis, &MeasureSpec::GaussianComplex, 200, &regions, 41).unwrap();
    assert_eq!(r.accepted + r.rejected, 200);
    let disk = &r.regions[0];
    assert!((disk.mean - 0.5).abs() <= 3.0 * disk.ci_halfwidth.max(1e-3), "{disk:?}");
    assert!((r.regions[1].mean - 1.0).abs() < 1e-12);
    assert!(expectation_current(&basis, &MeasureSpec::GaussianComplex, 99, &regions, 41).is_err());
}

#[test]
fn pooled_arguments_are_uniform() {
    let p = 100;
    let g = build_grid(32, min_n_theta(p)).unwrap();
    let w = WeightField::family(RadialFamily::Cap(1.0));
    let basis = build_basis(p, &w, &g).unwrap();
    let mut angles = Vec::new();
    for t in 0..100 {
        let z = find_roots(&sample_section(&basis, &MeasureSpec::SphereComplex, 42, t).unwrap()).unwrap();
        angles.extend(z.finite_roots.iter().map(|r| r.arg().rem_euclid(2.0 * PI) / (2.0 * PI)));
    }
    assert!(angles.len() >= 9_900);
    let d = ks_uniform(&angles);
    assert!(d < 1.63 / (angles.len() as f64).sqrt(), "KS {d}");
}

#[test]
fn weak_statistic_basics() {
    let a = EmpiricalMeasure::new(vec![(SpherePoint::origin(), 1.0)]);
    let b = EmpiricalMeasure::new(vec![(SpherePoint::infinity(), 1.0)]);
    assert_eq!(weak_convergence_stat(&a, &a), 0.0);
    assert_eq!(weak_convergence_stat(&a, &b), 1.0);
    let c1 = EmpiricalMeasure::new(vec![(SpherePoint::from_affine(c(0.3, 0.1)), 0.5), (SpherePoint::infinity(), 0.5)]);
    assert_eq!(weak_convergence_stat(&a, &c1), weak_convergence_stat(&c1, &a));
    assert_eq!(dyadic_shells().len(), 16);
    let s = dyadic_shells();
    let pts = [SpherePoint::origin(), SpherePoint::infinity(), SpherePoint::from_affine(c(1.0, 0.0))];
    for pt in &pts {
        assert_eq!(s.iter().filter(|r| r.contains(pt)).count(), 1);
    }
}
