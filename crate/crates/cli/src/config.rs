//! Experiment configuration: a TOML file with `weight`, `grid`, `measure`
//! and `run` sections.

use std::path::{Path, PathBuf};

use equilab_core::bergman::min_n_theta;
use equilab_core::envelope::DEFAULT_TOL;
use equilab_core::geometry::MIN_RESOLUTION;
use equilab_core::randsec::MIN_MOMENT_TRIALS;
use equilab_core::zeros::MIN_EXPECTATION_TRIALS;
use equilab_core::{MeasureSpec, RadialFamily, Region, TailSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Envelope,
    KernelConvergence,
    RateFit,
    Moments,
    ZeroEquidistribution,
    ExpectationCurrent,
}

impl ExperimentKind {
    fn needs_degrees(self) -> bool {
        !matches!(self, ExperimentKind::Envelope | ExperimentKind::Moments)
    }
}

/// Where the weight comes from.
///
/// `descriptor` is a builtin family (`fs`, `cap{1}`, `circle{0.5}`,
/// `bump{center,radius,height}`), `radial-csv:PATH` for a table of
/// `(t, u)` rows with `u(t) = ψ(e^t)`, or `nodal-csv:PATH` for one value of
/// `φ` per grid node in node order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub descriptor: String,
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_r: usize,
    pub n_theta: usize,
}

impl std::str::FromStr for GridConfig {
    type Err = LabError;

    /// Parses `NrxNt`, e.g. `256x328`.
    fn from_str(s: &str) -> LabResult<Self> {
        let bad = || LabError::Config(format!("grid `{s}` is not of the form NrxNt"));
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok(GridConfig { n_r: a.trim().parse().map_err(|_| bad())?, n_theta: b.trim().parse().map_err(|_| bad())? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Degrees `p` of the section spaces.
    #[serde(default)]
    pub degrees: Vec<usize>,
    /// Dimensions `k` probed by moment experiments.
    #[serde(default)]
    pub dimensions: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Moment order.
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Regions whose zero mass is recorded; a default set is used when empty.
    #[serde(default)]
    pub regions: Vec<Region>,
    /// Envelope solver tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Largest accepted gap between expected zero masses and equilibrium
    /// masses; no verdict is issued when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn default_trials() -> usize {
    200
}

fn default_nu() -> f64 {
    2.0
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            degrees: Vec::new(),
            dimensions: Vec::new(),
            trials: default_trials(),
            nu: default_nu(),
            seed: 0,
            out: default_out(),
            regions: Vec::new(),
            tol: default_tol(),
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub weight: WeightConfig,
    pub grid: GridConfig,
    /// A descriptor such as `"sphere-complex"` or a `{ family = ... }` table.
    #[serde(default = "default_measure", deserialize_with = "measure_field")]
    pub measure: MeasureSpec,
    #[serde(default)]
    pub run: RunConfig,
}

fn default_measure() -> MeasureSpec {
    MeasureSpec::GaussianComplex
}

fn measure_field<'de, D: serde::Deserializer<'de>>(d: D) -> Result<MeasureSpec, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Form {
        Name(String),
        Table(MeasureSpec),
    }
    match Form::deserialize(d)? {
        Form::Name(s) => parse_measure(&s).map_err(serde::de::Error::custom),
        Form::Table(m) => Ok(m),
    }
}

/// Regions recorded when the configuration names none.
pub fn default_regions() -> Vec<Region> {
    vec![Region::unit_disk(), Region::Annulus { inner: 0.8, outer: 1.25 }, Region::Sphere]
}

/// How the weight is obtained, after parsing the descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Family(RadialFamily),
    RadialCsv(PathBuf),
    NodalCsv(PathBuf),
}

impl WeightSource {
    pub fn parse(descriptor: &str, base: &Path) -> LabResult<Self> {
        if let Some(path) = descriptor.strip_prefix("radial-csv:") {
            Ok(WeightSource::RadialCsv(base.join(path)))
        } else if let Some(path) = descriptor.strip_prefix("nodal-csv:") {
            Ok(WeightSource::NodalCsv(base.join(path)))
        } else {
            descriptor.parse().map(WeightSource::Family).map_err(|e| LabError::Config(e.to_string()))
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Short content hash used in run directory names.
    pub fn short_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(&digest[..4])
    }

    pub fn max_degree(&self) -> usize {
        self.run.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn regions(&self) -> Vec<Region> {
        if self.run.regions.is_empty() {
            default_regions()
        } else {
            self.run.regions.clone()
        }
    }

    /// Checks every parameter before anything is computed. Files named by
    /// the weight descriptor are checked for existence here and parsed when
    /// the weight is built.
    pub fn validate(&self, base: &Path) -> LabResult<()> {
        let err = |m: String| Err(LabError::Config(m));
        let g = self.grid;
        if g.n_r < MIN_RESOLUTION || g.n_theta < MIN_RESOLUTION {
            return err(format!("grid {}x{} is below the minimum {MIN_RESOLUTION}x{MIN_RESOLUTION}", g.n_r, g.n_theta));
        }
        match WeightSource::parse(&self.weight.descriptor, base)? {
            WeightSource::Family(_) => {}
            WeightSource::RadialCsv(p) | WeightSource::NodalCsv(p) => {
                if !p.is_file() {
                    return err(format!("weight file {} does not exist", p.display()));
                }
            }
        }
        if !self.weight.offset.is_finite() {
            return err("weight offset must be finite".into());
        }
        if !(self.run.tol > 0.0) {
            return err(format!("solver tolerance must be positive, got {}", self.run.tol));
        }
        if i64::try_from(self.run.seed).is_err() {
            return err(format!("seed {} does not fit in a signed 64-bit integer", self.run.seed));
        }
        self.measure.validate().map_err(|e| LabError::Config(e.to_string()))?;
        if self.kind.needs_degrees() {
            if self.run.degrees.is_empty() {
                return err(format!("{:?} needs at least one degree", self.kind));
            }
            let need = min_n_theta(self.max_degree());
            if g.n_theta < need {
                return err(format!("degree {} needs n_theta ≥ {need}, got {}", self.max_degree(), g.n_theta));
            }
        }
        if self.run.degrees.contains(&0) && self.kind != ExperimentKind::KernelConvergence {
            return err("degree 0 has no zeros or rate".into());
        }
        if self.run.degrees.windows(2).any(|w| w[0] >= w[1]) {
            return err("degrees must be strictly increasing".into());
        }
        match self.kind {
            ExperimentKind::RateFit => {
                if self.run.degrees.len() < 4 || self.run.degrees[0] < 5 {
                    return err("a rate fit needs at least 4 degrees, all ≥ 5".into());
                }
            }
            ExperimentKind::Moments => {
                if self.run.dimensions.is_empty() || self.run.dimensions.contains(&0) {
                    return err("moments need a non-empty list of positive dimensions".into());
                }
                if self.run.dimensions.windows(2).any(|w| w[0] >= w[1]) {
                    return err("dimensions must be strictly increasing".into());
                }
                if !(self.run.nu >= 1.0) || !self.run.nu.is_finite() {
                    return err(format!("moment order must be ≥ 1, got {}", self.run.nu));
                }
                if self.run.trials < MIN_MOMENT_TRIALS {
                    return err(format!("moments need at least {MIN_MOMENT_TRIALS} trials"));
                }
                if let MeasureSpec::IidComplex { tail: TailSpec::ParetoLog { rho, .. } }
                | MeasureSpec::IidReal { tail: TailSpec::ParetoLog { rho, .. } } = self.measure
                {
                    if self.run.nu >= rho {
                        return err(format!("moment order {} must be below the tail exponent {rho}", self.run.nu));
                    }
                }
            }
            ExperimentKind::ExpectationCurrent => {
                if self.run.trials < MIN_EXPECTATION_TRIALS {
                    return err(format!("expectation currents need at least {MIN_EXPECTATION_TRIALS} trials"));
                }
            }
            ExperimentKind::ZeroEquidistribution => {
                if self.run.trials == 0 {
                    return err("zero experiments need at least one trial".into());
                }
            }
            ExperimentKind::Envelope | ExperimentKind::KernelConvergence => {}
        }
        if let Some(t) = self.run.tolerance {
            if !(t > 0.0) {
                return err(format!("tolerance must be positive, got {t}"));
            }
        }
        for r in &self.run.regions {
            let ok = match *r {
                Region::Disk { radius } => radius >= 0.0,
                Region::Annulus { inner, outer } | Region::Shell { inner, outer } => 0.0 <= inner && inner <= outer,
                Region::Sphere => true,
            };
            if !ok {
                return err(format!("invalid region {}", r.label()));
            }
        }
        Ok(())
    }
}

/// Parses measure names used on the command line: `gaussian-complex`,
/// `gaussian-real`, `sphere-complex`, `sphere-real`, `fubini-study{α}`,
/// `uniform-disk{r}`, `pareto-log{ρ,c}`, with a `-real` suffix on the
/// last two for real coefficients.
pub fn parse_measure(s: &str) -> LabResult<MeasureSpec> {
    let bad = || LabError::Config(format!("unknown measure `{s}`"));
    let (name, args) = match s.split_once('{') {
        Some((name, rest)) => {
            let inner = rest.strip_suffix('}').ok_or_else(bad)?;
            let args = inner.split(',').map(|a| a.trim().parse::<f64>().map_err(|_| bad())).collect::<LabResult<Vec<_>>>()?;
            (name, args)
        }
        None => (s, Vec::new()),
    };
    let (base, real) = match name.strip_suffix("-real") {
        Some(b) if matches!(b, "uniform-disk" | "pareto-log") => (b, true),
        _ => (name, false),
    };
    let spec = match (base, args.as_slice()) {
        ("gaussian-complex", []) => MeasureSpec::GaussianComplex,
        ("gaussian-real", []) => MeasureSpec::GaussianReal,
        ("sphere-complex", []) => MeasureSpec::SphereComplex,
        ("sphere-real", []) => MeasureSpec::SphereReal,
        ("fubini-study", [alpha]) => MeasureSpec::FubiniStudy { alpha: *alpha },
        ("uniform-disk", [radius]) => iid(TailSpec::UniformDisk { radius: *radius }, real),
        ("pareto-log", [rho, c]) => iid(TailSpec::ParetoLog { rho: *rho, c: *c }, real),
        _ => return Err(bad()),
    };
    spec.validate().map_err(|e| LabError::Config(e.to_string()))?;
    Ok(spec)
}

fn iid(tail: TailSpec, real: bool) -> MeasureSpec {
    if real {
        MeasureSpec::IidReal { tail }
    } else {
        MeasureSpec::IidComplex { tail }
    }
}

/// Parses `a,b,c` into a list of integers.
pub fn parse_list(s: &str) -> LabResult<Vec<usize>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| LabError::Config(format!("`{x}` is not a non-negative integer"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            kind: ExperimentKind::ZeroEquidistribution,
            weight: WeightConfig { descriptor: "bump{0,1,0.5}".into(), offset: -0.1 },
            grid: GridConfig { n_r: 64, n_theta: 208 },
            measure: MeasureSpec::IidReal { tail: TailSpec::ParetoLog { rho: 4.0, c: 0.3 } },
            run: RunConfig {
                degrees: vec![10, 20, 50],
                trials: 12,
                seed: 99,
                regions: vec![Region::Disk { radius: 0.7 }, Region::Shell { inner: 1.0, outer: f64::INFINITY }],
                tolerance: Some(0.05),
                ..RunConfig::default()
            },
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let c = sample();
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.short_hash(), c.short_hash());
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = ExperimentConfig::from_toml(
            "kind = \"kernel-convergence\"\n[weight]\ndescriptor = \"cap{1}\"\n[grid]\nn_r = 64\nn_theta = 88\n[run]\ndegrees = [5, 10, 20]\n",
        )
        .unwrap();
        assert_eq!(c.measure, MeasureSpec::GaussianComplex);
        assert_eq!(c.run.trials, 200);
        assert_eq!(c.run.tol, DEFAULT_TOL);
        c.validate(Path::new(".")).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::from_toml(
            "kind = \"envelope\"\n[weight]\ndescriptor = \"fs\"\ncolour = 1\n[grid]\nn_r = 64\nn_theta = 64\n",
        );
        assert!(matches!(e, Err(LabError::Config(_))));
    }

    #[test]
    fn validation_catches_bad_parameters() {
        let base = Path::new(".");
        let mut c = sample();
        c.grid.n_theta = 100;
        assert!(c.validate(base).is_err(), "n_theta below 4p+8");
        let mut c = sample();
        c.run.degrees = vec![20, 10];
        assert!(c.validate(base).is_err());
        let mut c = sample();
        c.weight.descriptor = "cap{-1}".into();
        assert!(c.validate(base).is_err());
        let mut c = sample();
        c.weight.descriptor = "nodal-csv:/does/not/exist.csv".into();
        assert!(c.validate(base).is_err());
        let mut c = sample();
        c.kind = ExperimentKind::Moments;
        c.run.dimensions = vec![10, 100];
        c.run.trials = 5000;
        c.run.nu = 4.0;
        assert!(c.validate(base).is_err(), "ν ≥ ρ");
        c.run.nu = 2.0;
        c.validate(base).unwrap();
        let mut c = sample();
        c.run.tol = 0.0;
        assert!(c.validate(base).is_err());
        sample().validate(base).unwrap();
    }

    #[test]
    fn command_line_parsers() {
        assert_eq!("256x328".parse::<GridConfig>().unwrap(), GridConfig { n_r: 256, n_theta: 328 });
        assert!("256".parse::<GridConfig>().is_err());
        assert_eq!(parse_list("10, 20,40").unwrap(), vec![10, 20, 40]);
        assert!(parse_list("10,x").is_err());
        assert_eq!(parse_measure("fubini-study{2}").unwrap(), MeasureSpec::FubiniStudy { alpha: 2.0 });
        assert_eq!(
            parse_measure("pareto-log-real{4,1}").unwrap(),
            MeasureSpec::IidReal { tail: TailSpec::ParetoLog { rho: 4.0, c: 1.0 } }
        );
        assert_eq!(parse_measure("sphere-real").unwrap(), MeasureSpec::SphereReal);
        assert!(parse_measure("uniform-disk{-1}").is_err());
        assert!(parse_measure("cauchy").is_err());
    }

    #[test]
    fn measure_accepts_descriptor_or_table() {
        let base = "kind = \"moments\"\n[weight]\ndescriptor = \"fs\"\n[grid]\nn_r = 8\nn_theta = 8\n";
        let named = ExperimentConfig::from_toml(&format!("measure = \"pareto-log{{4,1}}\"\n{base}")).unwrap();
        assert_eq!(named.measure, MeasureSpec::IidComplex { tail: TailSpec::ParetoLog { rho: 4.0, c: 1.0 } });
        let table = ExperimentConfig::from_toml(&format!("measure = {{ family = \"sphere-real\" }}\n{base}")).unwrap();
        assert_eq!(table.measure, MeasureSpec::SphereReal);
        assert!(ExperimentConfig::from_toml(&format!("measure = \"cauchy\"\n{base}")).is_err());
    }
}
