//! Statistical machinery for the cross-checks: Kolmogorov-Smirnov distances,
//! Wilson score intervals, least-squares fits and monotone CDF interpolation.

use crate::error::{Error, Result};

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("ks_two_sample: empty sample".into()));
    }
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    Ok(d)
}

/// Critical value of the two-sample KS statistic at level alpha = 0.01.
pub fn ks_two_sample_critical_1pct(n: usize, m: usize) -> f64 {
    1.62762 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("ks_one_sample: empty sample".into()));
    }
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

/// Piecewise-linear CDF through (x, p) points, forced nondecreasing and
/// clamped to [0, 1].
#[derive(Debug, Clone)]
pub struct MonotoneCdf {
    xs: Vec<f64>,
    ps: Vec<f64>,
}

impl MonotoneCdf {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("MonotoneCdf needs at least two points".into()));
        }
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut xs = Vec::with_capacity(pts.len());
        let mut ps = Vec::with_capacity(pts.len());
        let mut running: f64 = 0.0;
        for (x, p) in pts {
            if xs.last().is_some_and(|&last| x == last) {
                continue;
            }
            running = running.max(p.clamp(0.0, 1.0));
            xs.push(x);
            ps.push(running);
        }
        Ok(MonotoneCdf { xs, ps })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return self.ps[0];
        }
        if x >= *self.xs.last().unwrap() {
            return *self.ps.last().unwrap();
        }
        let k = self.xs.partition_point(|&u| u <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (p0, p1) = (self.ps[k - 1], self.ps[k]);
        p0 + (p1 - p0) * (x - x0) / (x1 - x0)
    }
}

/// Wilson score interval for a binomial proportion; z = 2.5758 gives 99%.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::Domain("wilson_interval: zero trials".into()));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(((center - half).max(0.0), (center + half).min(1.0)))
}

/// Ordinary least squares y = slope x + intercept with the R^2 of the fit.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Domain("linear_fit needs matched samples of size >= 2".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("linear_fit: degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, my - slope * mx, r2))
}

/// Sample mean and its standard error.
pub fn mean_stderr(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::Domain("mean_stderr: empty sample".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}
