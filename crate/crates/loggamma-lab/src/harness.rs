//! Experiment driver: JSON configuration, cross-verification experiments
//! tying the Monte Carlo and determinant sides together, and report/CSV
//! emission for the CLI.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fredholm::{f_bbp, f_gue, finite_cdf, finite_laplace, legacy_laplace, DetResult, FiniteDetOptions, LimitDetOptions};
use crate::kernels::{finite_kernel_matrix, finite_outer_grid, FiniteContours, FiniteKernelSpec, LegacyKernelSpec};
use crate::polymer::{build_bbp_spec, mc_laplace, rescale, run_batch, BbpLayout, ModelSpec};
use crate::scaling::{descent_checks, lln_perturbed, critical_theta, scaling_constants, ModelShape};
use crate::stats::{ks_one_sample, linear_fit, mean_stderr, wilson_interval, MonotoneCdf};

/// One experiment configuration. Unknown keys are rejected so typos fail
/// loudly; every field has a default so configs stay small.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub samples: usize,
    pub m: usize,
    pub n: usize,
    pub theta: f64,
    pub tau: f64,
    pub order: usize,
    /// y arguments for Laplace/CDF comparisons.
    pub y_grid: Vec<f64>,
    /// r arguments for limit-law tables.
    pub r_grid: Vec<f64>,
    /// lattice sizes for convergence sweeps
    pub m_values: Vec<usize>,
    /// N/M slope used when sweeping m_values
    pub slope: f64,
    /// BBP perturbation anchors
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// offsets of alpha_1 from the critical value in the phase experiment
    pub alpha1_offsets: Vec<f64>,
    /// number of points in emitted determinant CDF tables
    pub cdf_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            samples: 20_000,
            m: 64,
            n: 64,
            theta: 1.0,
            tau: 0.5,
            order: 16,
            y_grid: vec![-1.0, 0.0, 1.0],
            r_grid: vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0],
            m_values: vec![32, 128, 512],
            slope: 1.0,
            x: vec![],
            y: vec![],
            alpha1_offsets: vec![-0.3, 0.3],
            cdf_points: 60,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse: {}", e)))
    }

    /// Applies a `key=value` override onto the JSON representation.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{}' is not key=value", kv)))?;
        let mut tree = serde_json::to_value(&*self)
            .map_err(|e| Error::Config(e.to_string()))?;
        let obj = tree.as_object_mut().unwrap();
        if !obj.contains_key(key) {
            return Err(Error::Config(format!("unknown config key '{}'", key)));
        }
        let parsed: serde_json::Value = serde_json::from_str(value)
            .map_err(|e| Error::Config(format!("override value '{}': {}", value, e)))?;
        obj.insert(key.to_string(), parsed);
        *self = serde_json::from_value(tree).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// One named check with its threshold. `value` is compared upward or downward
/// depending on the metric, so `pass` is stored explicitly.
#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Metric {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Metric { name: name.into(), value, threshold, pass: value <= threshold }
    }

    fn check(name: impl Into<String>, pass: bool) -> Self {
        Metric { name: name.into(), value: if pass { 1.0 } else { 0.0 }, threshold: 1.0, pass }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub metrics: Vec<Metric>,
    pub pass: bool,
    /// column header and rows emitted to data.csv
    #[serde(skip)]
    pub table: (Vec<String>, Vec<Vec<String>>),
}

impl ExperimentReport {
    fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        ExperimentReport {
            experiment: experiment.to_string(),
            config: config.clone(),
            metrics: Vec::new(),
            pass: true,
            table: (Vec::new(), Vec::new()),
        }
    }

    fn push(&mut self, m: Metric) {
        self.pass &= m.pass;
        self.metrics.push(m);
    }
}

fn det_cdf_table(shape: &ModelShape, ys: &[f64], order: usize) -> Result<Vec<(f64, DetResult)>> {
    let opts = FiniteDetOptions { order, ..Default::default() };
    ys.iter()
        .map(|&y| Ok((y, finite_cdf(shape, y, &opts)?)))
        .collect()
}

fn gue_cdf(points: usize, lo: f64, hi: f64, order: usize) -> Result<MonotoneCdf> {
    let opts = LimitDetOptions { order, ..Default::default() };
    let pts: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let r = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            Ok((r, f_gue(r, &opts)?.value))
        })
        .collect::<Result<_>>()?;
    MonotoneCdf::new(&pts)
}

/// Laplace-transform identity: Monte Carlo E[exp(-u Z)] against the
/// determinant, u = exp(W - sigma M^{1/3} y) over the configured y grid.
pub fn verify_laplace(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("verify_laplace", cfg);
    rep.table.0 = vec!["y".into(), "mc".into(), "stderr".into(), "det".into(), "est_error".into()];
    let shape = ModelShape::new(cfg.m, cfg.n, cfg.theta)?;
    let sc = scaling_constants(&shape)?;
    let spec = ModelSpec::homogeneous(cfg.m, cfg.n, cfg.theta)?;
    let logzs = run_batch(&spec, cfg.seed, cfg.samples)?;
    let opts = FiniteDetOptions { order: cfg.order, allow_small_n: cfg.n < 9, ..Default::default() };
    for &y in &cfg.y_grid {
        let log_u = sc.w - sc.sigma * (cfg.m as f64).cbrt() * y;
        let (mc, se) = mc_laplace(&logzs, log_u);
        let det = finite_cdf(&shape, y, &opts)?;
        let tol = (3.0 * se).max(1e-2);
        rep.push(Metric::below(
            format!("laplace_gap_m{}_n{}_theta{}_y{}", cfg.m, cfg.n, cfg.theta, y),
            (mc - det.value).abs(),
            tol,
        ));
        rep.table.1.push(vec![
            y.to_string(),
            mc.to_string(),
            se.to_string(),
            det.value.to_string(),
            det.est_error.to_string(),
        ]);
    }
    Ok(rep)
}

/// Tracy-Widom convergence: rescaled free-energy samples against the GUE CDF
/// for each lattice size, expecting the KS distance to shrink.
pub fn tw_convergence(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("tw_convergence", cfg);
    rep.table.0 = vec!["m".into(), "n".into(), "ks".into()];
    let gue = gue_cdf(cfg.cdf_points, -6.0, 4.0, cfg.order)?;
    let mut last = f64::INFINITY;
    let mut decreasing = true;
    for &m in &cfg.m_values {
        let n = ((m as f64) * cfg.slope).round() as usize;
        let shape = ModelShape::new(m, n, cfg.theta)?;
        let sc = scaling_constants(&shape)?;
        let spec = ModelSpec::homogeneous(m, n, cfg.theta)?;
        let f: Vec<f64> = run_batch(&spec, cfg.seed, cfg.samples)?
            .into_iter()
            .map(|lz| rescale(lz, m, &sc))
            .collect();
        let ks = ks_one_sample(&f, |x| gue.eval(x))?;
        decreasing &= ks <= last + 0.005;
        last = ks;
        rep.table.1.push(vec![m.to_string(), n.to_string(), ks.to_string()]);
    }
    rep.push(Metric::check("ks_decreasing_in_m", decreasing));
    rep.push(Metric::below("ks_final", last, 0.08));
    Ok(rep)
}

/// Upper-tail moderate deviations: the survival function on [0.5, 2.5]
/// should sit under a fitted C exp(-c x^{3/2}) envelope, and log P against
/// x^{3/2} should be close to linear.
pub fn tails(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("tails", cfg);
    rep.table.0 = vec!["x".into(), "survival".into(), "count".into(), "envelope".into()];
    let shape = ModelShape::new(cfg.m, cfg.n, cfg.theta)?;
    let sc = scaling_constants(&shape)?;
    let spec = ModelSpec::homogeneous(cfg.m, cfg.n, cfg.theta)?;
    let f: Vec<f64> = run_batch(&spec, cfg.seed, cfg.samples)?
        .into_iter()
        .map(|lz| rescale(lz, cfg.m, &sc))
        .collect();
    let n = f.len();
    let mut pts = Vec::new();
    for i in 0..9 {
        let x = 0.5 + 0.25 * i as f64;
        let count = f.iter().filter(|&&v| v >= x).count();
        if count < 20 {
            break;
        }
        pts.push((x, count));
    }
    if pts.len() < 4 {
        return Err(Error::Domain("tails: too few tail points; raise samples".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|&(x, _)| x.powf(1.5)).collect();
    let ys: Vec<f64> = pts.iter().map(|&(_, c)| (c as f64 / n as f64).ln()).collect();
    let (slope, intercept, r2) = linear_fit(&xs, &ys)?;
    // lift the fitted line until it clears every point, then demand it also
    // clears the Wilson 99% lower confidence bounds (pointwise slack)
    let lift = pts
        .iter()
        .zip(&xs)
        .map(|(&(_, c), &x32)| (c as f64 / n as f64).ln() - (intercept + slope * x32))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let mut envelope_ok = true;
    for ((&(x, c), &x32), &ly) in pts.iter().zip(&xs).zip(&ys) {
        let env = (intercept + lift + slope * x32).exp();
        let (wlo, _) = wilson_interval(c, n, 2.576)?;
        envelope_ok &= env >= wlo;
        rep.table.1.push(vec![x.to_string(), ly.exp().to_string(), c.to_string(), env.to_string()]);
    }
    rep.push(Metric::check("envelope_rate_positive", slope < 0.0));
    rep.push(Metric::check("envelope_dominates_survival", envelope_ok));
    rep.push(Metric::below("tail_envelope_r2_shortfall", 1.0 - r2, 0.1));
    Ok(rep)
}

/// BBP statistics: critically perturbed polymer samples against the BBP
/// determinant CDF, at the configured size and at a smaller reference size.
pub fn bbp(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("bbp", cfg);
    rep.table.0 = vec!["m".into(), "ks".into()];
    let lopts = LimitDetOptions { order: cfg.order, ..Default::default() };
    let pts: Vec<(f64, f64)> = (0..cfg.cdf_points)
        .map(|i| {
            let r = -6.0 + 10.0 * i as f64 / (cfg.cdf_points - 1) as f64;
            Ok((r, f_bbp(&cfg.x, &cfg.y, r, &lopts)?.value))
        })
        .collect::<Result<_>>()?;
    let cdf = MonotoneCdf::new(&pts)?;
    let layout = BbpLayout { x: cfg.x.clone(), y: cfg.y.clone() };
    let mut ks_by_m = Vec::new();
    for &m in &[cfg.m / 4, cfg.m] {
        let n = ((m as f64) * cfg.slope).round() as usize;
        let shape = ModelShape::new(m, n, cfg.theta)?;
        let (spec, sc) = build_bbp_spec(&shape, &layout)?;
        let f: Vec<f64> = run_batch(&spec, cfg.seed, cfg.samples)?
            .into_iter()
            .map(|lz| rescale(lz, m, &sc))
            .collect();
        let ks = ks_one_sample(&f, |x| cdf.eval(x))?;
        ks_by_m.push(ks);
        rep.table.1.push(vec![m.to_string(), ks.to_string()]);
    }
    rep.push(Metric::below("bbp_ks_final", ks_by_m[1], 0.10));
    rep.push(Metric::check("bbp_ks_improves", ks_by_m[1] < ks_by_m[0]));
    Ok(rep)
}

/// Law of large numbers with one perturbed column: empirical log Z / M
/// against the variational prediction on both sides of the phase transition.
pub fn lln_phase(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("lln_phase", cfg);
    rep.table.0 = vec!["alpha1".into(), "mean".into(), "stderr".into(), "predicted".into()];
    let p = cfg.n as f64 / cfg.m as f64;
    let tc = critical_theta(p, cfg.theta)?;
    // leading finite-size correction to the mean in the unperturbed phase:
    // E log Z = -M h + sigma M^{1/3} E[F_GUE] + o(M^{1/3})
    let sc = scaling_constants(&ModelShape::new(cfg.m, cfg.n, cfg.theta)?)?;
    let tw_shift = sc.sigma * crate::airy::tw_gue_mean()? * (cfg.m as f64).powf(-2.0 / 3.0);
    for &off in &cfg.alpha1_offsets {
        let alpha1 = tc + off;
        if alpha1 <= 0.0 {
            return Err(Error::Config(format!("alpha1 = {} not positive", alpha1)));
        }
        let mut alpha = vec![cfg.theta; cfg.m];
        alpha[0] = alpha1;
        let spec = ModelSpec::new(alpha, vec![0.0; cfg.n])?;
        let logzs = run_batch(&spec, cfg.seed, cfg.samples)?;
        let per_m: Vec<f64> = logzs.iter().map(|lz| lz / cfg.m as f64).collect();
        let (mean, se) = mean_stderr(&per_m)?;
        let (mut pred, argmax) = lln_perturbed(p, alpha1, cfg.theta)?;
        if alpha1 >= tc {
            pred += tw_shift;
        }
        rep.push(Metric::below(
            format!("lln_gap_alpha1_{:+.2}", off),
            (mean - pred).abs(),
            0.02f64.max(4.0 * se),
        ));
        if alpha1 < tc {
            rep.push(Metric::check(
                format!("lln_argmax_interior_{:+.2}", off),
                argmax > 1e-4 * p && argmax < p * (1.0 - 1e-4),
            ));
        }
        rep.table.1.push(vec![
            alpha1.to_string(),
            mean.to_string(),
            se.to_string(),
            pred.to_string(),
        ]);
    }
    Ok(rep)
}

/// Structural invariants: steepest-descent sweeps, contour deformation
/// invariance of the determinant, tau continuity, and the legacy/deformed
/// agreement.
pub fn invariants(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("invariants", cfg);
    // descent geometry over a small parameter grid
    let mut worst = 0.0f64;
    let mut violations = 0;
    for theta in [0.5, 1.0, 2.0] {
        for p in [0.3f64, 0.7, 1.0] {
            let n = ((cfg.m as f64) * p).round() as usize;
            let d = descent_checks(&ModelShape::new(cfg.m, n, theta)?, 24)?;
            violations += d.violations;
            worst = worst.max(d.worst);
        }
    }
    rep.push(Metric::check("descent_no_violations", violations == 0));
    // determinant invariance under admissible contour changes
    let spec = FiniteKernelSpec {
        a: vec![0.0; 9],
        alpha: vec![cfg.theta.max(1.5); 3],
        log_u: 0.0,
        tau: 0.0,
    };
    let almin = cfg.theta.max(1.5);
    let d1 = det_with_contours(&spec, FiniteContours { va: almin / 3.0, b: 2.0 * almin / 3.0, d: 0.07 }, cfg.order)?;
    let d2 = det_with_contours(&spec, FiniteContours { va: almin / 2.5, b: 0.55 * almin, d: 0.04 }, cfg.order)?;
    rep.push(Metric::below("deformation_invariance", (d1 - d2).abs(), 1e-6));
    // tau continuity at the deformed kernel
    let dt0 = finite_laplace(&spec, &FiniteDetOptions { order: cfg.order, ..Default::default() })?;
    let dt1 = finite_laplace(
        &FiniteKernelSpec { tau: 1e-4, ..spec.clone() },
        &FiniteDetOptions { order: cfg.order, ..Default::default() },
    )?;
    rep.push(Metric::below("tau_continuity", (dt0.value - dt1.value).abs(), 1e-3));
    // legacy contour agreement; tau large so the undeformed verticals'
    // exp(c^2 / 2 tau) amplitude peak stays tame
    let tau = cfg.tau.max(8.0);
    let legacy = legacy_laplace(
        &LegacyKernelSpec {
            a: spec.a.clone(),
            alpha: spec.alpha.clone(),
            log_u: 0.0,
            tau,
            d: 0.25,
        },
        cfg.order,
    )?;
    let deformed = finite_laplace(
        &FiniteKernelSpec { tau, ..spec.clone() },
        &FiniteDetOptions { order: cfg.order, ..Default::default() },
    )?;
    rep.push(Metric::below("legacy_vs_deformed", (legacy.value - deformed.value).abs(), 1e-6));
    Ok(rep)
}

fn det_with_contours(spec: &FiniteKernelSpec, cont: FiniteContours, order: usize) -> Result<f64> {
    let outer = finite_outer_grid(spec, &cont, order + 8)?;
    let k = finite_kernel_matrix(spec, &cont, &outer, order + 8)?;
    let det = crate::fredholm::fredholm_det(&k, &outer)?;
    Ok(det.re)
}

/// Reference tables of the limit distributions on the configured r grid.
pub fn tables(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("tables", cfg);
    rep.table.0 = vec!["r".into(), "f_gue".into(), "f_bbp".into(), "est_error".into()];
    let opts = LimitDetOptions { order: cfg.order, ..Default::default() };
    for &r in &cfg.r_grid {
        let g = f_gue(r, &opts)?;
        let b = if cfg.x.is_empty() && cfg.y.is_empty() {
            g
        } else {
            f_bbp(&cfg.x, &cfg.y, r, &opts)?
        };
        rep.push(Metric::below(format!("est_error_r{}", r), g.est_error.max(b.est_error), 1e-6));
        rep.table.1.push(vec![
            r.to_string(),
            g.value.to_string(),
            b.value.to_string(),
            g.est_error.max(b.est_error).to_string(),
        ]);
    }
    Ok(rep)
}

/// verify_laplace but with the determinant CDF table also emitted; used by
/// the CLI to expose finite-size CDF data.
pub fn cdf_table(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rep = ExperimentReport::new("cdf_table", cfg);
    rep.table.0 = vec!["y".into(), "cdf".into(), "est_error".into()];
    let shape = ModelShape::new(cfg.m, cfg.n, cfg.theta)?;
    for (y, det) in det_cdf_table(&shape, &cfg.y_grid, cfg.order)? {
        rep.push(Metric::below(format!("est_error_y{}", y), det.est_error, 1e-4));
        rep.table.1.push(vec![y.to_string(), det.value.to_string(), det.est_error.to_string()]);
    }
    Ok(rep)
}

/// Dispatch by experiment name.
pub fn run_experiment(name: &str, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match name {
        "verify_laplace" => verify_laplace(cfg),
        "tw_convergence" => tw_convergence(cfg),
        "tails" => tails(cfg),
        "bbp" => bbp(cfg),
        "lln_phase" => lln_phase(cfg),
        "invariants" => invariants(cfg),
        "tables" => tables(cfg),
        "cdf_table" => cdf_table(cfg),
        other => Err(Error::Config(format!(
            "unknown experiment '{}'; expected one of verify_laplace, tw_convergence, tails, bbp, lln_phase, invariants, tables, cdf_table",
            other
        ))),
    }
}

/// Writes report.json and data.csv (RFC 4180: CRLF line endings, no quoting
/// needed for numeric fields) into the output directory.
pub fn emit(report: &ExperimentReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(out_dir.join("report.json"), json)?;
    let mut csv = Vec::new();
    let (header, rows) = &report.table;
    if !header.is_empty() {
        write!(csv, "{}\r\n", header.join(","))?;
        for row in rows {
            write!(csv, "{}\r\n", row.join(","))?;
        }
    }
    std::fs::write(out_dir.join("data.csv"), csv)?;
    Ok(())
}
