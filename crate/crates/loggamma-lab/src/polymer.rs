//! Monte Carlo side of the laboratory: inverse-gamma weight sampling and the
//! log-space partition-function recursion for up-right lattice paths.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scaling::{scaling_constants, ModelShape, ScalingConstants};

/// Weight parameters of a (possibly inhomogeneous) polymer on an
/// alpha.len() x a.len() grid. Site (i, j) carries an inverse-gamma weight
/// with shape alpha[i] - a[j], which must be positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub alpha: Vec<f64>,
    pub a: Vec<f64>,
}

impl ModelSpec {
    pub fn new(alpha: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || a.is_empty() {
            return Err(Error::Domain("ModelSpec: empty parameter list".into()));
        }
        let amax = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let almin = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(almin - amax > 0.0) {
            return Err(Error::InfeasibleScaling(format!(
                "weight shape min(alpha) - max(a) = {} must be positive",
                almin - amax
            )));
        }
        Ok(ModelSpec { alpha, a })
    }

    pub fn homogeneous(m: usize, n: usize, theta: f64) -> Result<Self> {
        ModelSpec::new(vec![theta; m], vec![0.0; n])
    }

    /// Number of columns M.
    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    /// Number of rows N.
    pub fn n(&self) -> usize {
        self.a.len()
    }
}

/// Perturbation data for the critically scaled spec: x drives the first
/// `x.len()` row parameters, y the first `y.len()` column parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BbpLayout {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Critically scaled spec on the (M + c) x (N + r) grid: perturbed parameters
/// sit at g^{-1}(p) + t sigma^{-1} M^{-1/3}, the bulk stays at (theta, 0).
/// Centering and scale still come from the base shape (M, N).
pub fn build_bbp_spec(shape: &ModelShape, layout: &BbpLayout) -> Result<(ModelSpec, ScalingConstants)> {
    if layout
        .x
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        >= layout.y.iter().cloned().fold(f64::INFINITY, f64::min)
    {
        return Err(Error::Domain("BbpLayout requires min(y) > max(x)".into()));
    }
    let sc = scaling_constants(shape)?;
    let step = 1.0 / (sc.sigma * (shape.m as f64).cbrt());
    let mut a = vec![0.0; shape.n + layout.x.len()];
    for (j, &xj) in layout.x.iter().enumerate() {
        a[j] = sc.z_c + xj * step;
    }
    let mut alpha = vec![shape.theta; shape.m + layout.y.len()];
    for (i, &yi) in layout.y.iter().enumerate() {
        alpha[i] = sc.z_c + yi * step;
    }
    Ok((ModelSpec::new(alpha, a)?, sc))
}

pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    a.max(b) + (-(a - b).abs()).exp().ln_1p()
}

fn dedup_indices(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut uniq: Vec<f64> = Vec::new();
    let mut idx = Vec::with_capacity(values.len());
    for &v in values {
        match uniq.iter().position(|&u| u == v) {
            Some(k) => idx.push(k),
            None => {
                uniq.push(v);
                idx.push(uniq.len() - 1);
            }
        }
    }
    (uniq, idx)
}

/// Draws the full matrix of log-weights, row-major over (i, j) with i the
/// column index. Fixed draw order keeps seeded runs reproducible.
pub fn sample_log_weights(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let (ua, ia) = dedup_indices(&spec.alpha);
    let (ub, ib) = dedup_indices(&spec.a);
    let mut dists = Vec::with_capacity(ua.len() * ub.len());
    for &al in &ua {
        for &aa in &ub {
            dists.push(
                Gamma::new(al - aa, 1.0)
                    .map_err(|e| Error::Domain(format!("gamma shape {}: {}", al - aa, e)))?,
            );
        }
    }
    let mut out = Vec::with_capacity(spec.m() * spec.n());
    for i in 0..spec.m() {
        for j in 0..spec.n() {
            let g: f64 = dists[ia[i] * ub.len() + ib[j]].sample(rng);
            out.push(-g.ln());
        }
    }
    Ok(out)
}

/// log Z from a row-major log-weight matrix via the logsumexp recursion with
/// a single rolling row.
pub fn dp_from_log_weights(m: usize, n: usize, lw: &[f64]) -> f64 {
    assert_eq!(lw.len(), m * n);
    let mut row = vec![f64::NEG_INFINITY; n];
    for i in 0..m {
        for j in 0..n {
            let acc = if i == 0 && j == 0 {
                0.0
            } else {
                let up = if i > 0 { row[j] } else { f64::NEG_INFINITY };
                let left = if j > 0 { row[j - 1] } else { f64::NEG_INFINITY };
                logsumexp2(up, left)
            };
            row[j] = lw[i * n + j] + acc;
        }
    }
    row[n - 1]
}

/// One sampled log Z.
pub fn log_partition(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
    let lw = sample_log_weights(spec, rng)?;
    Ok(dp_from_log_weights(spec.m(), spec.n(), &lw))
}

/// Brute-force log Z summing over every up-right path of a fixed weight
/// matrix. Only usable on tiny grids; the path count is capped at 10^6.
pub fn enumerate_paths(m: usize, n: usize, lw: &[f64]) -> Result<f64> {
    let mut count = 1.0f64;
    for k in 1..n {
        count = count * (m - 1 + k) as f64 / k as f64;
    }
    if count > 1e6 {
        return Err(Error::Domain(format!("{} paths exceed enumeration cap", count)));
    }
    fn rec(i: usize, j: usize, m: usize, n: usize, lw: &[f64], acc: f64, logs: &mut Vec<f64>) {
        let acc = acc + lw[i * n + j];
        if i == m - 1 && j == n - 1 {
            logs.push(acc);
            return;
        }
        if i + 1 < m {
            rec(i + 1, j, m, n, lw, acc, logs);
        }
        if j + 1 < n {
            rec(i, j + 1, m, n, lw, acc, logs);
        }
    }
    let mut logs = Vec::new();
    rec(0, 0, m, n, lw, 0.0, &mut logs);
    let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(mx + logs.iter().map(|l| (l - mx).exp()).sum::<f64>().ln())
}

/// Independent samples of log Z. Sample s uses ChaCha stream s of the seed,
/// so the output does not depend on the thread count or schedule.
pub fn run_batch(spec: &ModelSpec, seed: u64, samples: usize) -> Result<Vec<f64>> {
    let one = |s: u64| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s);
        log_partition(spec, &mut rng)
    };
    #[cfg(feature = "parallel")]
    {
        (0..samples as u64).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..samples as u64).map(one).collect()
    }
}

/// Sequential counterpart of `run_batch`; identical output by construction
/// since samples are keyed by stream index, not draw order.
pub fn run_batch_seq(spec: &ModelSpec, seed: u64, samples: usize) -> Result<Vec<f64>> {
    (0..samples as u64)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            log_partition(spec, &mut rng)
        })
        .collect()
}

/// Rescaled free energy (log Z + M h) / (M^{1/3} sigma) with M the base
/// column count (excluding BBP-perturbed columns).
pub fn rescale(log_z: f64, m_base: usize, sc: &ScalingConstants) -> f64 {
    (log_z + m_base as f64 * sc.h) / ((m_base as f64).cbrt() * sc.sigma)
}

/// Monte Carlo estimate of E[exp(-u Z)] with its standard error, evaluated
/// stably from log u and the sampled log Z.
pub fn mc_laplace(log_zs: &[f64], log_u: f64) -> (f64, f64) {
    let n = log_zs.len() as f64;
    let vals: Vec<f64> = log_zs
        .iter()
        .map(|&lz| {
            let e = log_u + lz;
            if e > 700.0 {
                0.0
            } else {
                (-e.exp()).exp()
            }
        })
        .collect();
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}
