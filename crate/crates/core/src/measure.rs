//! Atomic measures on P¹ and the radial regions they are tested against.

use serde::{Deserialize, Serialize};

use crate::geometry::SpherePoint;
use crate::stats::{compensated_sum, NeumaierSum};

/// Rotation-invariant subsets of P¹, described by `|ζ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    /// `|ζ| ≤ radius`.
    Disk { radius: f64 },
    /// `inner ≤ |ζ| ≤ outer`.
    Annulus { inner: f64, outer: f64 },
    /// `inner ≤ |ζ| < outer`; `outer = ∞` includes the point at infinity.
    Shell { inner: f64, outer: f64 },
    Sphere,
}

impl Region {
    pub fn unit_disk() -> Self {
        Region::Disk { radius: 1.0 }
    }

    pub fn contains(&self, pt: &SpherePoint) -> bool {
        let r = pt.modulus();
        match *self {
            Region::Disk { radius } => r <= radius,
            Region::Annulus { inner, outer } => inner <= r && r <= outer,
            Region::Shell { inner, outer } => {
                inner <= r && (r < outer || (outer == f64::INFINITY && r == f64::INFINITY))
            }
            Region::Sphere => true,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Region::Disk { radius } => format!("disk[{radius}]"),
            Region::Annulus { inner, outer } => format!("annulus[{inner},{outer}]"),
            Region::Shell { inner, outer } => format!("shell[{inner},{outer})"),
            Region::Sphere => "sphere".to_string(),
        }
    }
}

/// A finite sum of point masses.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<(SpherePoint, f64)>,
    pub total_mass: f64,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<(SpherePoint, f64)>) -> Self {
        let total_mass = compensated_sum(atoms.iter().map(|a| a.1));
        Self { atoms, total_mass }
    }

    pub fn mass_of(&self, region: &Region) -> f64 {
        let mut s = NeumaierSum::default();
        for (pt, m) in &self.atoms {
            if region.contains(pt) {
                s.add(*m);
            }
        }
        s.total()
    }

    pub fn integrate<F: Fn(&SpherePoint) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.atoms.iter().map(|(pt, m)| f(pt) * m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn regions_classify_the_poles() {
        let zero = SpherePoint::origin();
        let inf = SpherePoint::infinity();
        assert!(Region::unit_disk().contains(&zero));
        assert!(!Region::unit_disk().contains(&inf));
        let outer = Region::Shell { inner: 128.0, outer: f64::INFINITY };
        assert!(outer.contains(&inf));
        assert!(!outer.contains(&zero));
        let unit = SpherePoint::from_affine(Complex64::new(0.0, 1.0));
        assert!(Region::Annulus { inner: 1.0, outer: 1.0 }.contains(&unit));
        assert!(!Region::Shell { inner: 0.5, outer: 1.0 }.contains(&unit));
    }

    #[test]
    fn masses_add_up() {
        let m = EmpiricalMeasure::new(vec![
            (SpherePoint::origin(), 0.4),
            (SpherePoint::infinity(), 0.6),
        ]);
        assert_eq!(m.total_mass, 1.0);
        assert_eq!(m.mass_of(&Region::unit_disk()), 0.4);
        assert_eq!(m.mass_of(&Region::Sphere), 1.0);
    }
}
