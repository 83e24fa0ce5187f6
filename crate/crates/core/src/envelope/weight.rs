//! Continuous weights `φ` on P¹ (metrics `h = h_FS e^{-2φ}` on 𝒪(1)).
//!
//! The local weight on the affine chart is `ψ = ρ + φ` with
//! `ρ = ½ log(1+|ζ|²)`; on the chart at infinity it is `ψ_∞ = ρ_∞ + φ`.
//! Radial weights are described by `u(t) = ψ(e^t)` with `t = log|ζ|`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

use super::radial::RadialWeight;
use crate::error::{Error, Result};
use crate::geometry::{fs_potential, QuadratureGrid, SpherePoint};

/// Half-width of the `t` window on which analytic radial weights are
/// tabulated for the radial envelope.
pub const RADIAL_WINDOW: f64 = 30.0;

/// Sampling step of tabulated radial weights.
pub const RADIAL_STEP: f64 = 1.0 / 1024.0;

/// Builtin radial weight families, named as in the lab configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialFamily {
    /// `φ ≡ 0`, i.e. `ψ = ρ`.
    Fs,
    /// `u(t) = min(−t, c)` for `t < 0`, `u(t) = t` for `t ≥ 0`.
    Cap(f64),
    /// `u(t) = max(t, c)`.
    Circle(f64),
    /// `ρ` plus a smooth bump in `t`: `height · exp(1 − 1/(1 − x²))`,
    /// `x = (t − center)/radius`.
    Bump { center: f64, radius: f64, height: f64 },
}

impl RadialFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialFamily::Fs => true,
            RadialFamily::Cap(c) => c.is_finite() && c > 0.0,
            RadialFamily::Circle(c) => c.is_finite(),
            RadialFamily::Bump { center, radius, height } => {
                center.is_finite() && radius.is_finite() && radius > 0.0 && height.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid weight parameters: {self}")))
        }
    }

    /// Global weight `φ` as a function of `t = log|ζ| ∈ [−∞, ∞]`.
    pub fn phi(&self, t: f64) -> f64 {
        match *self {
            RadialFamily::Fs => 0.0,
            RadialFamily::Cap(c) => {
                if t >= 0.0 {
                    -0.5 * (-2.0 * t).exp().ln_1p()
                } else {
                    (-t).min(c) - fs_potential(t)
                }
            }
            RadialFamily::Circle(c) => {
                if t >= c {
                    -0.5 * (-2.0 * t).exp().ln_1p()
                } else {
                    c - fs_potential(t)
                }
            }
            RadialFamily::Bump { center, radius, height } => height * bump((t - center) / radius),
        }
    }

    /// Local weight `u(t) = ψ(e^t)`.
    pub fn u(&self, t: f64) -> f64 {
        fs_potential(t) + self.phi(t)
    }
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

impl fmt::Display for RadialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialFamily::Fs => write!(f, "fs"),
            RadialFamily::Cap(c) => write!(f, "cap{{{c}}}"),
            RadialFamily::Circle(c) => write!(f, "circle{{{c}}}"),
            RadialFamily::Bump { center, radius, height } => {
                write!(f, "bump{{{center},{radius},{height}}}")
            }
        }
    }
}

impl FromStr for RadialFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('{') {
            Some(open) => {
                let close = s
                    .rfind('}')
                    .filter(|&c| c > open && c == s.len() - 1)
                    .ok_or_else(|| Error::Config(format!("unbalanced braces in weight `{s}`")))?;
                let args = s[open + 1..close]
                    .split(',')
                    .map(|a| {
                        a.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad number `{a}` in weight `{s}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (&s[..open], args)
            }
            None => (s, Vec::new()),
        };
        let family = match (name, args.as_slice()) {
            ("fs", []) => RadialFamily::Fs,
            ("cap", [c]) => RadialFamily::Cap(*c),
            ("circle", [c]) => RadialFamily::Circle(*c),
            ("bump", [center, radius, height]) => {
                RadialFamily::Bump { center: *center, radius: *radius, height: *height }
            }
            _ => return Err(Error::Config(format!("unknown weight descriptor `{s}`"))),
        };
        family.validate()?;
        Ok(family)
    }
}

impl Serialize for RadialFamily {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RadialFamily {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Values of `φ` at the nodes of one particular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalWeight {
    pub dims: (usize, usize),
    pub phi: Vec<f64>,
}

/// A continuous weight on P¹.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightField {
    Family { family: RadialFamily, offset: f64 },
    Radial { profile: RadialWeight, offset: f64 },
    Nodal(NodalWeight),
}

impl WeightField {
    pub fn fs() -> Self {
        Self::family(RadialFamily::Fs)
    }

    pub fn family(family: RadialFamily) -> Self {
        WeightField::Family { family, offset: 0.0 }
    }

    pub fn radial(profile: RadialWeight) -> Result<Self> {
        profile.check_admissible()?;
        Ok(WeightField::Radial { profile, offset: 0.0 })
    }

    pub fn nodal(grid: &QuadratureGrid, phi: Vec<f64>) -> Result<Self> {
        if phi.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} node values supplied for a grid with {} nodes",
                phi.len(),
                grid.len()
            )));
        }
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite weight at node {i}")));
        }
        Ok(WeightField::Nodal(NodalWeight { dims: grid.dims(), phi }))
    }

    /// Nodal weight sampled from an arbitrary function of the point.
    pub fn nodal_from_fn<F: Fn(&SpherePoint) -> f64>(grid: &QuadratureGrid, f: F) -> Result<Self> {
        Self::nodal(grid, grid.sample(f))
    }

    /// The same metric scaled by `e^{-2c}`, i.e. `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        match self {
            WeightField::Family { family, offset } => {
                WeightField::Family { family: *family, offset: offset + c }
            }
            WeightField::Radial { profile, offset } => {
                WeightField::Radial { profile: profile.clone(), offset: offset + c }
            }
            WeightField::Nodal(n) => WeightField::Nodal(NodalWeight {
                dims: n.dims,
                phi: n.phi.iter().map(|v| v + c).collect(),
            }),
        }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, WeightField::Nodal(_))
    }

    /// `φ` as a function of `t = log|ζ|` for radial weights.
    pub fn radial_phi(&self, t: f64) -> Option<f64> {
        match self {
            WeightField::Family { family, offset } => Some(family.phi(t) + offset),
            WeightField::Radial { profile, offset } => Some(profile.phi(t) + offset),
            WeightField::Nodal(_) => None,
        }
    }

    /// Radial profile `u(t)` tabulated on the standard window, or `None`
    /// for weights that are not radial.
    pub fn radial_profile(&self) -> Option<RadialWeight> {
        match self {
            WeightField::Family { family, offset } => Some(RadialWeight::from_fn(
                |t| family.u(t) + offset,
                -RADIAL_WINDOW,
                RADIAL_WINDOW,
                RADIAL_STEP,
            )),
            WeightField::Radial { profile, offset } => Some(profile.shifted(*offset)),
            WeightField::Nodal(_) => None,
        }
    }

    /// `φ` at every node of `grid`.
    pub fn sample_phi(&self, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        let out = match self {
            WeightField::Nodal(n) => {
                if n.dims != grid.dims() {
                    return Err(Error::Usage(format!(
                        "nodal weight declared on a {}x{} grid, used on {}x{}",
                        n.dims.0,
                        n.dims.1,
                        grid.n_r(),
                        grid.n_theta()
                    )));
                }
                n.phi.clone()
            }
            _ => {
                let mut out = Vec::with_capacity(grid.len());
                for chart in [crate::geometry::Chart::Zero, crate::geometry::Chart::Infinity] {
                    for ring in 0..grid.n_r() {
                        let v = self.radial_phi(grid.ring_log_modulus(chart, ring)).unwrap_or(f64::NAN);
                        out.extend(std::iter::repeat_n(v, grid.n_theta()));
                    }
                }
                out
            }
        };
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("weight is not finite at node {i}")));
        }
        Ok(out)
    }

    /// Chart-local weight `ψ_c = ρ_c + φ` at every node, where `ρ_c` is the
    /// Fubini–Study potential of the node's own chart.
    pub fn sample_psi_local(&self, grid: &QuadratureGrid) -> Result<Vec<f64>> {
        let phi = self.sample_phi(grid)?;
        Ok(local_from_global(grid, &phi))
    }

    /// Content hash of the weight as seen by `grid`.
    pub fn hash_on(&self, grid: &QuadratureGrid) -> Result<String> {
        Ok(field_hash(grid.dims(), &self.sample_phi(grid)?))
    }

    pub fn describe(&self) -> String {
        match self {
            WeightField::Family { family, offset } if *offset == 0.0 => family.to_string(),
            WeightField::Family { family, offset } => format!("{family}+{offset}"),
            WeightField::Radial { offset, .. } => format!("radial-samples+{offset}"),
            WeightField::Nodal(n) => format!("nodal[{}x{}]", n.dims.0, n.dims.1),
        }
    }
}

/// Adds the chart-local Fubini–Study potential to a global field.
pub fn local_from_global(grid: &QuadratureGrid, global: &[f64]) -> Vec<f64> {
    let mut out = global.to_vec();
    for chart in [crate::geometry::Chart::Zero, crate::geometry::Chart::Infinity] {
        for ring in 0..grid.n_r() {
            let rho = fs_potential(grid.radii()[ring].ln());
            for v in &mut out[grid.ring_range(chart, ring)] {
                *v += rho;
            }
        }
    }
    out
}

/// SHA-256 over the grid dimensions and the exact bit patterns of a field.
pub fn field_hash(dims: (usize, usize), values: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((dims.0 as u64).to_le_bytes());
    h.update((dims.1 as u64).to_le_bytes());
    for v in values {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;

    #[test]
    fn descriptors_round_trip() {
        for s in ["fs", "cap{1}", "circle{0.5}", "bump{0,1,0.5}", "bump{-1,1.5,-0.3}"] {
            let f: RadialFamily = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("cap{-1}".parse::<RadialFamily>().is_err());
        assert!("bump{0,0,1}".parse::<RadialFamily>().is_err());
        assert!("disk{1}".parse::<RadialFamily>().is_err());
        assert!("cap{1".parse::<RadialFamily>().is_err());
    }

    #[test]
    fn cap_weight_is_continuous_on_the_sphere() {
        let cap = RadialFamily::Cap(1.0);
        assert!((cap.phi(-1e-12) - cap.phi(1e-12)).abs() < 1e-9);
        assert!((cap.phi(-1.0 - 1e-12) - cap.phi(-1.0 + 1e-12)).abs() < 1e-9);
        assert_eq!(cap.phi(f64::NEG_INFINITY), 1.0);
        assert_eq!(cap.phi(f64::INFINITY), 0.0);
        assert!((cap.u(2.0) - 2.0).abs() < 1e-15);
        assert!((cap.u(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nodal_weights_check_their_grid() {
        let g = build_grid(8, 8).unwrap();
        let h = build_grid(8, 16).unwrap();
        let w = WeightField::nodal_from_fn(&g, |p| p.coord.re).unwrap();
        assert!(w.sample_phi(&g).is_ok());
        assert!(matches!(w.sample_phi(&h), Err(Error::Usage(_))));
        assert!(WeightField::nodal(&g, vec![f64::NAN; g.len()]).is_err());
    }

    #[test]
    fn hashes_see_small_perturbations() {
        let g = build_grid(8, 8).unwrap();
        let w = WeightField::family(RadialFamily::Cap(1.0));
        let a = w.hash_on(&g).unwrap();
        assert_eq!(a, w.hash_on(&g).unwrap());
        let mut phi = w.sample_phi(&g).unwrap();
        phi[5] += 1e-6;
        assert_ne!(a, WeightField::nodal(&g, phi).unwrap().hash_on(&g).unwrap());
        assert_ne!(a, w.hash_on(&build_grid(8, 16).unwrap()).unwrap());
    }
}
