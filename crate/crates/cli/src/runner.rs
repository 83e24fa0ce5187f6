//! Executes an experiment configuration and writes its artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use equilab_core::envelope::{default_max_iter, EnvelopeResult, RadialWeight};
use equilab_core::randsec::{iid_scaling_probe, moment_estimate};
use equilab_core::stats::median;
use equilab_core::zeros::{lognorm_field, sample_section, weak_convergence_stat};
use equilab_core::{
    bergman_kernel, build_grid, Chart, empirical_zero_measure, equilibrium_measure, expectation_current, find_roots,
    kernel_vs_envelope, psh_envelope, radial_equilibrium, rate_fit, EmpiricalMeasure, Error, MeasureSpec,
    QuadratureGrid, RadialFamily, Region, TailSpec, WeightField, ZeroSet,
};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cache::BasisCache;
use crate::config::{ExperimentConfig, ExperimentKind, WeightSource};
use crate::error::{LabError, LabResult, StageExt};
use crate::report::{num, DegreeMetrics, RunReport, Table, Verdict, CONFIG_FILE, REPORT_FILE};

/// Supporting-line count of the radial envelope used as the reference.
pub const ORACLE_SLOPES: usize = 1 << 16;
/// Largest accepted sup distance between grid solver and radial oracle.
pub const ENVELOPE_ORACLE_TOL: f64 = 5e-3;
/// Largest accepted deviation of the equilibrium measure's total mass.
pub const TOTAL_MASS_TOL: f64 = 0.02;
/// Largest accepted gap between the FS kernel errors and `log(p+1)/2p`.
pub const FS_KERNEL_TOL: f64 = 1e-6;
/// Largest accepted ratio of the fitted rate constants.
pub const RATE_SPREAD_LIMIT: f64 = 4.0;
/// Moment estimates agree when they differ by at most this many combined
/// confidence half-widths.
pub const MOMENT_CI_FACTOR: f64 = 3.0;
/// Width of the band around `(log k)^ν` for unit sphere moments.
pub const LOG_GROWTH_BAND: f64 = 3.0;
/// Slack on the `ν/ρ` slope of heavy tailed i.i.d. moments.
pub const SLOPE_SLACK: f64 = 0.25;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; the global pool is used when `None`.
    pub threads: Option<usize>,
    /// Directory against which relative weight file paths are resolved.
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: RunReport,
}

/// What a finished computation hands back to the writer.
#[derive(Debug, Default)]
struct Computed {
    weight_hash: String,
    metrics: Vec<DegreeMetrics>,
    summary: BTreeMap<String, f64>,
    verdicts: Vec<Verdict>,
    tables: Vec<Table>,
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    grid: QuadratureGrid,
    weight: WeightField,
    source: WeightSource,
    cache: &'a BasisCache,
}

/// Validates, runs and persists one experiment under `config.run.out`.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> LabResult<RunOutcome> {
    config.validate(&opts.base_dir)?;
    let out = &config.run.out;
    std::fs::create_dir_all(out).map_err(|e| LabError::io(out, e))?;
    let started = chrono::Utc::now();
    let dir = fresh_run_dir(out, &format!("{}-{}", started.format("%Y%m%dT%H%M%SZ"), config.short_hash()))?;
    std::fs::write(dir.join(CONFIG_FILE), config.to_toml()).map_err(|e| LabError::io(dir.join(CONFIG_FILE), e))?;
    let cache = BasisCache::new(out.join(".cache"));
    let clock = Instant::now();
    let (result, threads) = match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| LabError::Config(format!("cannot start {n} threads: {e}")))?;
            (pool.install(|| compute(config, &opts.base_dir, &cache)), n)
        }
        None => (compute(config, &opts.base_dir, &cache), rayon::current_num_threads()),
    };
    let mut report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        weight_hash: String::new(),
        complete: false,
        error: None,
        started: started.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        wall_clock_seconds: 0.0,
        threads,
        cache_hits: cache.hits(),
        cache_misses: cache.misses(),
        metrics: Vec::new(),
        summary: BTreeMap::new(),
        verdicts: Vec::new(),
        artifacts: vec![CONFIG_FILE.to_string()],
    };
    let outcome = result.and_then(|c| {
        report.weight_hash = c.weight_hash;
        report.metrics = c.metrics;
        report.summary = c.summary;
        report.verdicts = c.verdicts;
        for t in &c.tables {
            report.artifacts.push(t.write(&dir)?);
        }
        Ok(())
    });
    report.wall_clock_seconds = clock.elapsed().as_secs_f64();
    report.cache_hits = cache.hits();
    report.cache_misses = cache.misses();
    match &outcome {
        Ok(()) => report.complete = true,
        Err(e) => report.error = Some(e.to_string()),
    }
    report.artifacts.push(REPORT_FILE.to_string());
    let text = serde_json::to_string_pretty(&report).expect("reports serialize");
    std::fs::write(dir.join(REPORT_FILE), text).map_err(|e| LabError::io(dir.join(REPORT_FILE), e))?;
    outcome.map(|()| RunOutcome { dir, report })
}

fn fresh_run_dir(out: &Path, stem: &str) -> LabResult<PathBuf> {
    for i in 1.. {
        let name = if i == 1 { stem.to_string() } else { format!("{stem}-{i}") };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(LabError::io(&dir, e)),
        }
    }
    unreachable!()
}

fn compute(config: &ExperimentConfig, base: &Path, cache: &BasisCache) -> LabResult<Computed> {
    let grid = build_grid(config.grid.n_r, config.grid.n_theta).stage("grid")?;
    let source = WeightSource::parse(&config.weight.descriptor, base)?;
    let weight = load_weight(&source, &grid)?.shifted(config.weight.offset);
    let weight_hash = weight.hash_on(&grid).stage("weight")?;
    let ctx = Context { config, grid, weight, source, cache };
    let mut c = match config.kind {
        ExperimentKind::Envelope => envelope_run(&ctx)?,
        ExperimentKind::KernelConvergence => kernel_run(&ctx, false)?,
        ExperimentKind::RateFit => kernel_run(&ctx, true)?,
        ExperimentKind::Moments => moments_run(config)?,
        ExperimentKind::ZeroEquidistribution => zeros_run(&ctx)?,
        ExperimentKind::ExpectationCurrent => expectation_run(&ctx)?,
    };
    c.weight_hash = weight_hash;
    Ok(c)
}

/// Builds the weight named by a descriptor on `grid`.
pub fn load_weight(source: &WeightSource, grid: &QuadratureGrid) -> LabResult<WeightField> {
    match source {
        WeightSource::Family(f) => Ok(WeightField::family(*f)),
        WeightSource::RadialCsv(path) => {
            let rows = read_columns(path, 2)?;
            let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
            let profile = RadialWeight::from_samples(&samples).stage("weight file")?;
            WeightField::radial(profile).stage("weight file")
        }
        WeightSource::NodalCsv(path) => {
            let rows = read_columns(path, 1)?;
            WeightField::nodal(grid, rows.into_iter().map(|r| r[0]).collect()).stage("weight file")
        }
    }
}

/// Reads a headed CSV of `width` numeric columns.
fn read_columns(path: &Path, width: usize) -> LabResult<Vec<Vec<f64>>> {
    let bad = |m: String| LabError::Config(format!("{}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != width {
            return Err(bad(format!("row {} has {} columns, expected {width}", i + 1, rec.len())));
        }
        let row = rec
            .iter()
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad(format!("row {}: `{x}` is not a number", i + 1))))
            .collect::<LabResult<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn solve_envelope(ctx: &Context) -> LabResult<EnvelopeResult> {
    let env = psh_envelope(&ctx.weight, &ctx.grid, ctx.config.run.tol, default_max_iter(&ctx.grid)).stage("envelope")?;
    if !env.converged {
        return Err(LabError::Stage {
            stage: "envelope".into(),
            source: Error::SolverQuality(format!(
                "no convergence after {} iterations (residual {:.3e})",
                env.iterations, env.residual
            )),
        });
    }
    Ok(env)
}

fn metrics(p: usize, values: &[(&str, f64)]) -> DegreeMetrics {
    DegreeMetrics { p, values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Largest ratio `v[i+1]/v[i]`; below one exactly when `v` decreases.
fn worst_step(v: &[f64]) -> f64 {
    v.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max)
}

fn envelope_run(ctx: &Context) -> LabResult<Computed> {
    let g = &ctx.grid;
    let env = solve_envelope(ctx)?;
    let measure = equilibrium_measure(&env, g).stage("equilibrium measure")?;
    let mut c = Computed::default();
    let psi_h = env.psi_h();
    let mut table = Table::new(
        "envelope.csv",
        &["node", "chart", "ring", "k", "log_modulus", "theta", "phi", "phi_eq", "psi_h", "contact", "mass"],
    );
    for (n, pt) in g.nodes().iter().enumerate() {
        let (chart, ring, k) = g.locate(n);
        table.push(vec![
            n.to_string(),
            chart.as_str().to_string(),
            ring.to_string(),
            k.to_string(),
            num(pt.log_modulus()),
            num(g.theta(k)),
            num(env.phi[n]),
            num(env.phi_eq[n]),
            num(psi_h[n]),
            u8::from(env.contact_mask[n]).to_string(),
            num(env.node_mass[n].max(0.0)),
        ]);
    }
    c.tables.push(table);
    let contact = env.contact_mask.iter().filter(|&&m| m).count() as f64 / g.len() as f64;
    c.summary.insert("residual".into(), env.residual);
    c.summary.insert("iterations".into(), env.iterations as f64);
    c.summary.insert("contact_fraction".into(), contact);
    c.summary.insert("total_mass".into(), measure.total_mass);
    c.summary.insert("unit_disk_mass".into(), measure.mass_of(&Region::unit_disk()));
    c.verdicts.push(Verdict::at_most(
        "equilibrium-total-mass",
        (measure.total_mass - 1.0).abs(),
        TOTAL_MASS_TOL,
        format!("total mass {:.12}", measure.total_mass),
    ));
    if ctx.weight.is_radial() {
        let oracle = radial_equilibrium(&ctx.weight, g, ORACLE_SLOPES).stage("radial oracle")?;
        let err = sup_diff(&env.phi_eq, &oracle.phi_eq);
        c.summary.insert("oracle_sup_error".into(), err);
        c.verdicts.push(Verdict::at_most(
            "envelope-oracle",
            err,
            ENVELOPE_ORACLE_TOL,
            "sup distance to the radial supporting-line envelope".into(),
        ));
    }
    Ok(c)
}

fn kernel_run(ctx: &Context, fit: bool) -> LabResult<Computed> {
    let g = &ctx.grid;
    let env = solve_envelope(ctx)?;
    let psi_h = env.psi_h();
    let mut c = Computed::default();
    let mut table = Table::new("kernel.csv", &["p", "l1_error", "gram_cond", "kernel_min", "kernel_max"]);
    let mut profile = Table::new("kernel_profile.csv", &["p", "chart", "ring", "log_modulus", "half_log_kernel", "psi_h"]);
    let mut errors = Vec::new();
    for &p in &ctx.config.run.degrees {
        let basis = ctx.cache.basis(&ctx.weight, p, g)?;
        let kf = bergman_kernel(&basis, &ctx.weight, g).stage(&format!("kernel p={p}"))?;
        let err = kernel_vs_envelope(&kf, &env, g).stage(&format!("kernel p={p}"))?;
        let lo = kf.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = kf.values.iter().copied().fold(0.0, f64::max);
        table.push(vec![p.to_string(), num(err), num(basis.gram_cond), num(lo), num(hi)]);
        for chart in [Chart::Zero, Chart::Infinity] {
            for ring in 0..g.n_r() {
                let n = g.index(chart, ring, 0);
                profile.push(vec![
                    p.to_string(),
                    chart.as_str().to_string(),
                    ring.to_string(),
                    num(g.ring_log_modulus(chart, ring)),
                    num(kf.log_half_p[n]),
                    num(psi_h[n]),
                ]);
            }
        }
        c.metrics.push(metrics(p, &[("l1_error", err), ("gram_cond", basis.gram_cond)]));
        errors.push((p, err));
    }
    c.tables.push(table);
    c.tables.push(profile);
    let errs: Vec<f64> = errors.iter().map(|e| e.1).collect();
    if errs.len() >= 2 {
        c.verdicts.push(decreasing_verdict("kernel-l1-decreasing", &errs, strictly_decreasing(&errs)));
    }
    if ctx.source == WeightSource::Family(RadialFamily::Fs) {
        let gap = errors
            .iter()
            .map(|&(p, e)| if p == 0 { e.abs() } else { (e - ((p + 1) as f64).ln() / (2 * p) as f64).abs() })
            .fold(0.0, f64::max);
        c.verdicts.push(Verdict::at_most(
            "fs-kernel-oracle",
            gap,
            FS_KERNEL_TOL,
            "distance of the L1 errors to log(p+1)/2p".into(),
        ));
    }
    if fit {
        let rf = rate_fit(&errors).stage("rate fit")?;
        let mut rates = Table::new("rate.csv", &["p", "l1_error", "constant"]);
        for (&(p, e), &(_, k)) in errors.iter().zip(&rf.constants) {
            rates.push(vec![p.to_string(), num(e), num(k)]);
        }
        c.tables.push(rates);
        c.summary.insert("c_hat".into(), rf.c_hat);
        c.summary.insert("max_violation".into(), rf.max_violation);
        c.summary.insert("spread".into(), rf.spread());
        c.verdicts.push(Verdict::at_most(
            "rate-constant-spread",
            rf.spread(),
            RATE_SPREAD_LIMIT,
            "largest over smallest error·p/log p".into(),
        ));
    }
    Ok(c)
}

fn flat_vector(k: usize) -> Vec<Complex64> {
    vec![Complex64::new((k as f64).sqrt().recip(), 0.0); k]
}

fn moments_run(config: &ExperimentConfig) -> LabResult<Computed> {
    let run = &config.run;
    let spec = config.measure;
    let mut c = Computed::default();
    let mut table = Table::new("moments.csv", &["family", "k", "nu", "estimate", "ci", "trials", "seed"]);
    let rows: Vec<(usize, f64, f64)> = match spec {
        MeasureSpec::IidComplex { tail } | MeasureSpec::IidReal { tail } => {
            let probe = iid_scaling_probe(tail, spec.is_real(), run.nu, &run.dimensions, run.trials, run.seed)
                .stage("moments")?;
            c.summary.insert("slope".into(), probe.slope);
            if let TailSpec::ParetoLog { rho, .. } = tail {
                c.verdicts.push(Verdict::at_most(
                    "moments-power-slope",
                    probe.slope,
                    run.nu / rho + SLOPE_SLACK,
                    format!("log-log slope against k, expected about ν/ρ = {}", run.nu / rho),
                ));
            }
            probe.rows
        }
        _ => run
            .dimensions
            .iter()
            .map(|&k| {
                moment_estimate(&spec, k, run.nu, &flat_vector(k), run.trials, run.seed)
                    .map(|r| (k, r.estimate, r.ci_halfwidth))
                    .stage(&format!("moments k={k}"))
            })
            .collect::<LabResult<_>>()?,
    };
    for &(k, est, ci) in &rows {
        table.push(vec![
            spec.to_string(),
            k.to_string(),
            num(run.nu),
            num(est),
            num(ci),
            run.trials.to_string(),
            run.seed.to_string(),
        ]);
        c.metrics.push(metrics(k, &[("estimate", est), ("ci", ci)]));
    }
    c.tables.push(table);
    match spec {
        MeasureSpec::GaussianComplex | MeasureSpec::GaussianReal => {
            let mut worst = 0.0f64;
            for (i, a) in rows.iter().enumerate() {
                for b in &rows[i + 1..] {
                    worst = worst.max((a.1 - b.1).abs() / a.2.hypot(b.2));
                }
            }
            c.verdicts.push(Verdict::at_most(
                "moments-constant-in-k",
                worst,
                MOMENT_CI_FACTOR,
                "largest pairwise difference in combined confidence half-widths".into(),
            ));
        }
        MeasureSpec::SphereComplex | MeasureSpec::SphereReal if rows.iter().all(|r| r.0 >= 2) => {
            let ratios: Vec<f64> = rows.iter().map(|r| r.1 / (r.0 as f64).ln().powf(run.nu)).collect();
            let hi = ratios.iter().copied().fold(0.0, f64::max);
            let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
            c.verdicts.push(Verdict::at_most(
                "moments-log-growth",
                hi / lo,
                LOG_GROWTH_BAND,
                "spread of estimate/(log k)^ν".into(),
            ));
        }
        _ => {}
    }
    Ok(c)
}

/// Per-trial output of a zero experiment.
struct TrialOutcome {
    zeros: ZeroSet,
    l1: f64,
    weak: f64,
    masses: Vec<f64>,
}

fn zeros_run(ctx: &Context) -> LabResult<Computed> {
    let g = &ctx.grid;
    let run = &ctx.config.run;
    let env = solve_envelope(ctx)?;
    let psi_h = env.psi_h();
    let eq = equilibrium_measure(&env, g).stage("equilibrium measure")?;
    let regions = ctx.config.regions();
    let mut c = Computed::default();
    let mut roots = Table::new("roots.csv", &["trial", "p", "re", "im", "chart", "mass"]);
    let mut header = vec!["p".to_string(), "trial".into(), "l1_to_psih".into(), "weak_stat".into()];
    header.extend(regions.iter().map(|r| r.label()));
    let mut summary = Table { name: "summary.csv".into(), header, rows: Vec::new() };
    let (mut l1_medians, mut weak_medians) = (Vec::new(), Vec::new());
    for &p in &run.degrees {
        let basis = ctx.cache.basis(&ctx.weight, p, g)?;
        let stage = format!("zeros p={p}");
        let outcomes: Vec<LabResult<Option<TrialOutcome>>> = (0..run.trials as u64)
            .into_par_iter()
            .map(|t| {
                let s = sample_section(&basis, &ctx.config.measure, run.seed, t).stage(&stage)?;
                let zeros = match find_roots(&s) {
                    Ok(z) => z,
                    Err(Error::IllConditionedSample { residual, .. }) => {
                        log::warn!("p={p} trial {t} discarded: root residual {residual:.3e}");
                        return Ok(None);
                    }
                    Err(e) => return Err(e).stage(&stage),
                };
                let field = lognorm_field(&s, &ctx.weight, g).stage(&stage)?;
                let l1 = field.l1_distance(&psi_h, g).stage(&stage)?;
                let em = empirical_zero_measure(&zeros);
                let weak = weak_convergence_stat(&em, &eq);
                let masses = regions.iter().map(|r| em.mass_of(r)).collect();
                Ok(Some(TrialOutcome { zeros, l1, weak, masses }))
            })
            .collect();
        let (mut l1s, mut weaks) = (Vec::new(), Vec::new());
        let mut rejected = 0usize;
        for (t, o) in outcomes.into_iter().enumerate() {
            let Some(o) = o? else {
                rejected += 1;
                continue;
            };
            push_roots(&mut roots, t, p, &o.zeros);
            let mut row = vec![p.to_string(), t.to_string(), num(o.l1), num(o.weak)];
            row.extend(o.masses.iter().map(|&m| num(m)));
            summary.push(row);
            l1s.push(o.l1);
            weaks.push(o.weak);
        }
        if l1s.is_empty() {
            return Err(LabError::Stage {
                stage,
                source: Error::Numeric { location: "zeros".into(), detail: "every sample was rejected".into() },
            });
        }
        let (ml1, mweak) = (median(&l1s), median(&weaks));
        c.metrics.push(metrics(
            p,
            &[
                ("median_l1_to_psih", ml1),
                ("median_weak_stat", mweak),
                ("accepted", l1s.len() as f64),
                ("rejected", rejected as f64),
            ],
        ));
        l1_medians.push(ml1);
        weak_medians.push(mweak);
    }
    c.tables.push(roots);
    c.tables.push(summary);
    if l1_medians.len() >= 2 {
        let ok = strictly_decreasing(&l1_medians);
        c.verdicts.push(decreasing_verdict("zero-potential-decreasing", &l1_medians, ok));
        let ok = strictly_decreasing(&weak_medians);
        c.verdicts.push(decreasing_verdict("zero-weak-decreasing", &weak_medians, ok));
    }
    Ok(c)
}

fn decreasing_verdict(name: &str, medians: &[f64], ok: bool) -> Verdict {
    Verdict {
        criterion: name.into(),
        passed: ok,
        measured: worst_step(medians),
        threshold: 1.0,
        detail: "largest ratio of consecutive values; must stay below 1".into(),
    }
}

fn push_roots(table: &mut Table, trial: usize, p: usize, z: &ZeroSet) {
    let m = 1.0 / p as f64;
    for r in &z.finite_roots {
        let (chart, x) = if r.norm() <= 1.0 { (Chart::Zero, *r) } else { (Chart::Infinity, r.inv()) };
        table.push(vec![trial.to_string(), p.to_string(), num(x.re), num(x.im), chart.as_str().into(), num(m)]);
    }
    if z.mult_at_infinity > 0 {
        table.push(vec![
            trial.to_string(),
            p.to_string(),
            num(0.0),
            num(0.0),
            Chart::Infinity.as_str().into(),
            num(z.mult_at_infinity as f64 * m),
        ]);
    }
}

fn expectation_run(ctx: &Context) -> LabResult<Computed> {
    let g = &ctx.grid;
    let run = &ctx.config.run;
    let env = solve_envelope(ctx)?;
    let eq: EmpiricalMeasure = equilibrium_measure(&env, g).stage("equilibrium measure")?;
    let mut regions = ctx.config.regions();
    if !regions.contains(&Region::Sphere) {
        regions.push(Region::Sphere);
    }
    let mut c = Computed::default();
    let mut table =
        Table::new("expectation.csv", &["p", "region", "mean", "ci", "equilibrium_mass", "accepted", "rejected"]);
    let mut sphere_gap = 0.0f64;
    let mut last_gap = 0.0f64;
    for &p in &run.degrees {
        let basis = ctx.cache.basis(&ctx.weight, p, g)?;
        let rep = expectation_current(&basis, &ctx.config.measure, run.trials, &regions, run.seed)
            .stage(&format!("expectation p={p}"))?;
        let mut vals = vec![("accepted", rep.accepted as f64), ("rejected", rep.rejected as f64)];
        let labels: Vec<String> = rep.regions.iter().map(|r| r.region.label()).collect();
        last_gap = 0.0;
        for (rm, label) in rep.regions.iter().zip(&labels) {
            let target = eq.mass_of(&rm.region);
            table.push(vec![
                p.to_string(),
                label.clone(),
                num(rm.mean),
                num(rm.ci_halfwidth),
                num(target),
                rep.accepted.to_string(),
                rep.rejected.to_string(),
            ]);
            if rm.region == Region::Sphere {
                sphere_gap = sphere_gap.max((rm.mean - 1.0).abs());
            }
            last_gap = last_gap.max((rm.mean - target).abs());
        }
        let mut m = metrics(p, &[]);
        for (v, label) in rep.regions.iter().zip(labels) {
            m.values.insert(format!("mean {label}"), v.mean);
            m.values.insert(format!("ci {label}"), v.ci_halfwidth);
        }
        for (k, v) in vals.drain(..) {
            m.values.insert(k.into(), v);
        }
        c.metrics.push(m);
    }
    c.tables.push(table);
    c.verdicts.push(Verdict::at_most(
        "expectation-total-mass",
        sphere_gap,
        1e-12,
        "deviation of the mean total zero mass from 1".into(),
    ));
    if let Some(tol) = run.tolerance {
        c.verdicts.push(Verdict::at_most(
            "expectation-near-equilibrium",
            last_gap,
            tol,
            format!("largest |mean − equilibrium mass| over regions at p = {}", ctx.config.max_degree()),
        ));
    }
    Ok(c)
}
