//! Critical point, law-of-large-numbers profile, fluctuation scale and the
//! steepest-descent function G, plus numerical verifiers for its sign and
//! monotonicity properties along the descent contours.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::{digamma, log_gamma, polygamma_sum, SeriesTruncation};

/// Polymer shape: M columns, N rows, inverse-gamma shape parameter theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelShape {
    pub m: usize,
    pub n: usize,
    pub theta: f64,
}

impl ModelShape {
    pub fn new(m: usize, n: usize, theta: f64) -> Result<Self> {
        if m < 1 || n < 1 || theta <= 0.0 {
            return Err(Error::Domain("ModelShape requires M, N >= 1, theta > 0".into()));
        }
        Ok(ModelShape { m, n, theta })
    }

    /// Slope p = N/M (also called alpha).
    pub fn p(&self) -> f64 {
        self.n as f64 / self.m as f64
    }
}

/// Constants attached to one shape: critical point, scale, centering.
#[derive(Debug, Clone, Copy)]
pub struct ScalingConstants {
    /// Critical point z_c in (0, theta), maximizer of N Psi(z) + M Psi(theta - z).
    pub z_c: f64,
    /// Cube root of alpha S_3(z_c) + S_3(theta - z_c).
    pub sigma: f64,
    /// W = N Psi(z_c) + M Psi(theta - z_c).
    pub w: f64,
    /// C = N logGamma(z_c) - M logGamma(theta - z_c) - W z_c, so G(z_c) = 0.
    pub c: f64,
    /// LLN constant h_theta(N/M); satisfies M h = W.
    pub h: f64,
}

fn s2(z: f64) -> Result<f64> {
    Ok(polygamma_sum(2, Complex64::new(z, 0.0), SeriesTruncation::default())?.re)
}

fn s3(z: f64) -> Result<f64> {
    Ok(polygamma_sum(3, Complex64::new(z, 0.0), SeriesTruncation::default())?.re)
}

/// g(z) = S_2(theta - z) / S_2(z), a strictly increasing bijection (0,theta) -> (0,inf).
pub fn g_eval(z: f64, theta: f64) -> Result<f64> {
    if z <= 0.0 || z >= theta {
        return Err(Error::Domain(format!("g_eval: z = {} outside (0, {})", z, theta)));
    }
    Ok(s2(theta - z)? / s2(z)?)
}

fn g_derivative(z: f64, theta: f64) -> Result<f64> {
    let s2z = s2(z)?;
    Ok((2.0 * s3(theta - z)? * s2z + 2.0 * s3(z)? * s2(theta - z)?) / (s2z * s2z))
}

/// Inverse of `g_eval`: bracketed bisection refined by Newton with a monotone safeguard.
pub fn g_inverse(x: f64, theta: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("g_inverse: x = {} must be positive", x)));
    }
    let mut lo = 1e-6 * theta;
    let mut hi = theta - 1e-6 * theta;
    if g_eval(lo, theta)? > x {
        // x below the bracket: push towards 0 geometrically.
        while g_eval(lo, theta)? > x {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::NonConvergence("g_inverse bracket collapse".into()));
            }
        }
        hi = 2.0 * lo;
    } else if g_eval(hi, theta)? < x {
        while g_eval(hi, theta)? < x {
            hi = theta - 0.5 * (theta - hi);
            if theta - hi < 1e-300 {
                return Err(Error::NonConvergence("g_inverse bracket collapse".into()));
            }
        }
        lo = theta - 2.0 * (theta - hi);
    }
    let tol = 1e-12 * x.max(1.0);
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = g_eval(z, theta)? - x;
        if f.abs() <= tol {
            return Ok(z);
        }
        if f > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let step = f / g_derivative(z, theta)?;
        let mut zn = z - step;
        if !(zn > lo && zn < hi) {
            zn = 0.5 * (lo + hi);
        }
        z = zn;
    }
    Err(Error::NonConvergence(format!("g_inverse({}, {}) stalled", x, theta)))
}

/// h_theta(x) = x Psi(g^{-1}(x)) + Psi(theta - g^{-1}(x)).
pub fn h_theta(x: f64, theta: f64) -> Result<f64> {
    let z = g_inverse(x, theta)?;
    let psi = |t: f64| -> Result<f64> { Ok(digamma(Complex64::new(t, 0.0))?.re) };
    Ok(x * psi(z)? + psi(theta - z)?)
}

/// All scaling constants for a shape. z_c, sigma, W, C are computed from the
/// critical-point equation; h independently from the LLN profile.
pub fn scaling_constants(shape: &ModelShape) -> Result<ScalingConstants> {
    let theta = shape.theta;
    let alpha = shape.p();
    let z_c = g_inverse(alpha, theta)?;
    let sigma = (alpha * s3(z_c)? + s3(theta - z_c)?).cbrt();
    let psi = |t: f64| -> Result<f64> { Ok(digamma(Complex64::new(t, 0.0))?.re) };
    let w = shape.n as f64 * psi(z_c)? + shape.m as f64 * psi(theta - z_c)?;
    let lg = |t: f64| -> Result<f64> { Ok(log_gamma(Complex64::new(t, 0.0))?.re) };
    let c = shape.n as f64 * lg(z_c)? - shape.m as f64 * lg(theta - z_c)? - w * z_c;
    let h = h_theta(alpha, theta)?;
    Ok(ScalingConstants { z_c, sigma, w, c, h })
}

/// G(z) = N logGamma(z) - M logGamma(theta - z) - W z - C.
pub fn eval_g(z: Complex64, shape: &ModelShape, sc: &ScalingConstants) -> Result<Complex64> {
    let theta = Complex64::new(shape.theta, 0.0);
    Ok(shape.n as f64 * log_gamma(z)? - shape.m as f64 * log_gamma(theta - z)? - sc.w * z - sc.c)
}

/// G_alpha = G / M.
pub fn eval_g_scaled(z: Complex64, shape: &ModelShape, sc: &ScalingConstants) -> Result<Complex64> {
    Ok(eval_g(z, shape, sc)? / shape.m as f64)
}

/// Report from the steepest-descent sign/monotonicity sweeps.
#[derive(Debug, Clone, Copy, Default)]
pub struct DescentReport {
    pub checks: usize,
    pub violations: usize,
    pub worst: f64,
}

impl DescentReport {
    fn record(&mut self, violation: f64, tol: f64) {
        self.checks += 1;
        if violation > tol {
            self.violations += 1;
            self.worst = self.worst.max(violation);
        }
    }
}

/// Evaluates Re G along the four diagonal rays through z_c (sign and
/// monotonicity), along the vertical line (monotonicity) and on the region
/// {Re(z - z_c) >= 0, |Im| >= Re} (nonnegativity). Report-only.
pub fn descent_checks(shape: &ModelShape, grid_size: usize) -> Result<DescentReport> {
    if grid_size < 10 {
        return Err(Error::Domain("descent_checks: grid_size >= 10".into()));
    }
    let sc = scaling_constants(shape)?;
    let tol = 1e-12 * (shape.m + shape.n) as f64;
    let mut rep = DescentReport::default();
    let r_max = 3.0 * shape.theta.max(1.0);
    let re_g = |z: Complex64| -> Result<f64> { Ok(eval_g(z, shape, &sc)?.re) };

    // Diagonal rays: Re G monotone away from z_c, decreasing at 3pi/4, 5pi/4
    // and increasing at pi/4, 7pi/4.
    for (phi, increasing) in [
        (std::f64::consts::FRAC_PI_4, true),
        (3.0 * std::f64::consts::FRAC_PI_4, false),
        (5.0 * std::f64::consts::FRAC_PI_4, false),
        (7.0 * std::f64::consts::FRAC_PI_4, true),
    ] {
        let dir = Complex64::new(phi.cos(), phi.sin());
        let mut prev = 0.0;
        for k in 1..=grid_size {
            let r = r_max * k as f64 / grid_size as f64;
            let v = re_g(Complex64::new(sc.z_c, 0.0) + r * dir)?;
            let viol = if increasing { prev - v } else { v - prev };
            rep.record(viol, tol);
            // sign: Re G >= 0 on ascent rays, <= 0 on descent rays
            rep.record(if increasing { -v } else { v }, tol);
            prev = v;
        }
    }

    // Vertical line through z_c: Re G nondecreasing in |r| (requires M >= N,
    // i.e. p <= 1; skip otherwise).
    if shape.n <= shape.m {
        let mut prev = 0.0;
        for k in 1..=grid_size {
            let r = r_max * k as f64 / grid_size as f64;
            let v = re_g(Complex64::new(sc.z_c, r))?;
            rep.record(prev - v, tol);
            prev = v;
        }
        // Region x > 0, |y| >= x: Re G >= 0.
        for i in 1..=grid_size {
            for j in 0..=grid_size {
                let x = shape.theta * i as f64 / (2.0 * grid_size as f64);
                let y = x + r_max * j as f64 / grid_size as f64;
                let v = re_g(Complex64::new(sc.z_c + x, y))?;
                rep.record(-v, tol);
            }
        }
    }
    Ok(rep)
}

/// Critical value for the one-column perturbation: theta_c = g^{-1}(p).
pub fn critical_theta(p: f64, theta: f64) -> Result<f64> {
    g_inverse(p, theta)
}

/// Law of large numbers with one perturbed column:
/// max over x in (0, p) of -x Psi(alpha1) - h_theta(p - x), returned with the argmax.
pub fn lln_perturbed(p: f64, alpha1: f64, theta: f64) -> Result<(f64, f64)> {
    if p <= 0.0 || alpha1 <= 0.0 {
        return Err(Error::Domain("lln_perturbed: p > 0, alpha1 > 0 required".into()));
    }
    let boundary = -h_theta(p, theta)?;
    if alpha1 >= critical_theta(p, theta)? {
        return Ok((boundary, 0.0));
    }
    let psi_a = digamma(Complex64::new(alpha1, 0.0))?.re;
    let f = |x: f64| -> Result<f64> { Ok(-x * psi_a - h_theta(p - x, theta)?) };
    // Golden-section on the strictly concave objective.
    let inv_phi = 0.618_033_988_749_894_8;
    let mut a = 1e-9 * p;
    let mut b = p * (1.0 - 1e-9);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > 1e-10 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        }
    }
    let xm = 0.5 * (a + b);
    let fm = f(xm)?;
    if fm <= boundary {
        Ok((boundary, 0.0))
    } else {
        Ok((fm, xm))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn g_symmetry_point() {
        for theta in [0.5, 1.0, 2.0] {
            assert_abs_diff_eq!(g_eval(theta / 2.0, theta).unwrap(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn g_strictly_increasing() {
        let theta = 1.3;
        let mut prev = 0.0;
        for k in 1..40 {
            let z = theta * k as f64 / 40.0;
            let v = g_eval(z, theta).unwrap();
            assert!(v > prev, "g not increasing at z = {}", z);
            prev = v;
        }
    }

    #[test]
    fn g_frozen_oracle() {
        // theta = 1, z = 0.25, frozen from the direct partial-sum oracle.
        assert_abs_diff_eq!(
            g_eval(0.25, 1.0).unwrap(),
            0.14780665211640876,
            epsilon = 1e-10
        );
    }

    #[test]
    fn g_inverse_roundtrip_and_symmetry() {
        let theta = 1.0;
        assert_abs_diff_eq!(g_inverse(1.0, theta).unwrap(), 0.5, epsilon = 1e-12);
        for x in [0.1, 0.3, 0.7, 1.0, 2.0, 5.0, 10.0] {
            let z = g_inverse(x, theta).unwrap();
            assert_abs_diff_eq!(g_eval(z, theta).unwrap(), x, epsilon = 1e-10 * x.max(1.0));
        }
        // g^{-1}(1/x) = theta - g^{-1}(x)
        for x in [0.3, 0.7, 2.0, 5.0] {
            let lhs = g_inverse(1.0 / x, theta).unwrap();
            let rhs = theta - g_inverse(x, theta).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
        }
        // frozen bisection oracle, theta = 1, x = 2
        assert_abs_diff_eq!(
            g_inverse(2.0, 1.0).unwrap(),
            0.5999436885934187,
            epsilon = 1e-10
        );
    }

    #[test]
    fn constants_symmetric_shape() {
        for theta in [0.5, 1.0, 3.0] {
            let shape = ModelShape::new(37, 37, theta).unwrap();
            let sc = scaling_constants(&shape).unwrap();
            assert_abs_diff_eq!(sc.z_c, theta / 2.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn w_equals_m_times_h() {
        let shape = ModelShape::new(128, 64, 1.0).unwrap();
        let sc = scaling_constants(&shape).unwrap();
        let lhs = shape.m as f64 * sc.h;
        assert!(
            (lhs - sc.w).abs() <= 1e-9 * sc.w.abs(),
            "M h = {} vs W = {}",
            lhs,
            sc.w
        );
    }

    #[test]
    fn sigma_within_two_sided_bounds() {
        // Bounds from the closed interval [a, b] = g^{-1}([delta, 1]).
        let theta = 1.0;
        let delta = 0.25;
        let a = g_inverse(delta, theta).unwrap();
        let b = g_inverse(1.0, theta).unwrap();
        let lower = (delta * s3(b).unwrap() + s3(theta - a).unwrap()).cbrt();
        let upper = (s3(a).unwrap() + s3(theta - b).unwrap()).cbrt();
        for n in [16usize, 32, 48, 64] {
            let shape = ModelShape::new(64, n, theta).unwrap();
            let sc = scaling_constants(&shape).unwrap();
            assert!(sc.sigma >= lower - 1e-12 && sc.sigma <= upper + 1e-12);
        }
    }

    #[test]
    fn g_vanishes_at_critical_point() {
        let shape = ModelShape::new(48, 32, 0.8).unwrap();
        let sc = scaling_constants(&shape).unwrap();
        let v = eval_g(Complex64::new(sc.z_c, 0.0), &shape, &sc).unwrap();
        assert!(v.norm() <= 1e-10 * (shape.m + shape.n) as f64);
    }

    // Richardson-extrapolated central differences, independent of the
    // polygamma identities used inside scaling_constants.
    fn fd_derivative(
        shape: &ModelShape,
        sc: &ScalingConstants,
        order: u32,
        h: f64,
    ) -> f64 {
        let g = |x: f64| eval_g(Complex64::new(x, 0.0), shape, sc).unwrap().re;
        let d = |h: f64| match order {
            1 => (g(sc.z_c + h) - g(sc.z_c - h)) / (2.0 * h),
            2 => (g(sc.z_c + h) - 2.0 * g(sc.z_c) + g(sc.z_c - h)) / (h * h),
            3 => {
                (g(sc.z_c + 2.0 * h) - 2.0 * g(sc.z_c + h) + 2.0 * g(sc.z_c - h)
                    - g(sc.z_c - 2.0 * h))
                    / (2.0 * h * h * h)
            }
            _ => unreachable!(),
        };
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    #[test]
    fn g_derivatives_at_critical_point() {
        let shape = ModelShape::new(40, 24, 1.0).unwrap();
        let sc = scaling_constants(&shape).unwrap();
        // G''' = -2 sigma^3 M: psi'' < 0 on the positive reals, and the sign
        // matches the descent inequalities (Re G >= 0 on the pi/4 rays).
        let scale = 2.0 * sc.sigma.powi(3) * shape.m as f64;
        assert!(fd_derivative(&shape, &sc, 1, 1e-3).abs() <= 1e-4 * scale);
        assert!(fd_derivative(&shape, &sc, 2, 1e-3).abs() <= 1e-4 * scale);
        let d3 = fd_derivative(&shape, &sc, 3, 1e-3);
        assert!(
            (d3 + scale).abs() <= 1e-4 * scale,
            "G''' = {} vs -2 sigma^3 M = {}",
            d3,
            -scale
        );
    }

    #[test]
    fn cubic_remainder_scales_as_fourth_power() {
        // log-log slope of |G_alpha(z) + (z - z_c)^3 sigma^3 / 3| over radii
        // 1e-2..1e-1 should be 4.0 +- 0.2.
        let shape = ModelShape::new(40, 28, 1.0).unwrap();
        let sc = scaling_constants(&shape).unwrap();
        let dir = Complex64::new(
            (0.3f64).cos(),
            (0.3f64).sin(),
        );
        let rem = |r: f64| {
            let z = Complex64::new(sc.z_c, 0.0) + r * dir;
            let ga = eval_g_scaled(z, &shape, &sc).unwrap();
            (ga + (z - sc.z_c).powu(3) * sc.sigma.powi(3) / 3.0).norm()
        };
        let (r1, r2) = (1e-3, 1e-2);
        let slope = (rem(r2) / rem(r1)).ln() / (r2 / r1).ln();
        assert!(
            (slope - 4.0).abs() <= 0.2,
            "cubic remainder log-log slope {}",
            slope
        );
    }

    #[test]
    fn descent_sweep_clean() {
        for theta in [0.5, 1.0, 2.0] {
            for p in [0.3f64, 0.7, 1.0] {
                let n = (64.0 * p).round() as usize;
                let shape = ModelShape::new(64, n, theta).unwrap();
                let rep = descent_checks(&shape, 24).unwrap();
                assert_eq!(
                    rep.violations, 0,
                    "theta={} p={} worst={:.3e}",
                    theta, p, rep.worst
                );
            }
        }
    }

    #[test]
    fn descent_spot_values() {
        let shape = ModelShape::new(32, 32, 1.0).unwrap();
        let sc = scaling_constants(&shape).unwrap();
        // phi = 3pi/4 ray nonincreasing
        let dir = Complex64::from_polar(1.0, 3.0 * std::f64::consts::FRAC_PI_4);
        let mut prev = 0.0;
        for k in 1..=30 {
            let r = 0.1 * k as f64;
            let v = eval_g(Complex64::new(sc.z_c, 0.0) + r * dir, &shape, &sc)
                .unwrap()
                .re;
            assert!(v <= prev + 1e-10);
            prev = v;
        }
        // point z_c + 0.5 + 0.8i has Re G >= 0
        let v = eval_g(Complex64::new(sc.z_c + 0.5, 0.8), &shape, &sc).unwrap();
        assert!(v.re >= -1e-10);
    }

    #[test]
    fn lln_boundary_and_interior() {
        let theta = 1.0;
        let p = 0.5;
        let tc = critical_theta(p, theta).unwrap();
        // supercritical: flat phase
        let (v, x) = lln_perturbed(p, tc + 0.2, theta).unwrap();
        assert_eq!(x, 0.0);
        assert_abs_diff_eq!(v, -h_theta(p, theta).unwrap(), epsilon = 1e-12);
        // theta_c satisfies Psi(theta_c) = h'(p), h' by central differences
        let h = 1e-6;
        let hp = (h_theta(p + h, theta).unwrap() - h_theta(p - h, theta).unwrap()) / (2.0 * h);
        let psi_tc = digamma(Complex64::new(tc, 0.0)).unwrap().re;
        assert_abs_diff_eq!(psi_tc, hp, epsilon = 1e-6);
        // subcritical: interior maximizer, against a dense grid scan
        let a1 = tc - 0.2;
        let (v, x) = lln_perturbed(p, a1, theta).unwrap();
        assert!(x > 0.0);
        let psi_a = digamma(Complex64::new(a1, 0.0)).unwrap().re;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 1..2000 {
            let xx = p * k as f64 / 2000.0;
            let f = -xx * psi_a - h_theta(p - xx, theta).unwrap();
            if f > best.0 {
                best = (f, xx);
            }
        }
        assert!((v - best.0).abs() < 1e-6);
        assert!((x - best.1).abs() < 1e-3);
    }

    #[test]
    fn h_envelope_identity() {
        // h'(x) = Psi(g^{-1}(x)) to 1e-6 via central differences.
        let theta = 1.0;
        for x in [0.3, 0.5, 1.0, 2.0] {
            let h = 1e-6;
            let hp = (h_theta(x + h, theta).unwrap() - h_theta(x - h, theta).unwrap()) / (2.0 * h);
            let psi = digamma(Complex64::new(g_inverse(x, theta).unwrap(), 0.0))
                .unwrap()
                .re;
            assert_abs_diff_eq!(hp, psi, epsilon = 1e-6);
        }
    }

    #[test]
    fn horizontal_shift_bound() {
        // |Re[G(z(r) + x M^{-1/3}) - G(z(r))]| / (M^{2/3} (1 + r)) bounded on a grid.
        let shape = ModelShape::new(64, 40, 1.0).unwrap();
        let sc = scaling_constants(&shape).unwrap();
        let m13 = (shape.m as f64).powf(-1.0 / 3.0);
        let mut fitted = 0.0f64;
        for phi in [
            std::f64::consts::FRAC_PI_4,
            3.0 * std::f64::consts::FRAC_PI_4,
            5.0 * std::f64::consts::FRAC_PI_4,
            7.0 * std::f64::consts::FRAC_PI_4,
        ] {
            let dir = Complex64::from_polar(1.0, phi);
            for k in 0..20 {
                let r = 0.25 * k as f64;
                let z = Complex64::new(sc.z_c, 0.0) + r * dir;
                if z.im.abs() < 1e-6 && (z.re < 1e-3 || z.re > shape.theta - 1e-3) {
                    continue;
                }
                for x in [-2.0, -1.0, 1.0, 2.0] {
                    let dv = (eval_g(z + x * m13, &shape, &sc).unwrap()
                        - eval_g(z, &shape, &sc).unwrap())
                    .re
                    .abs();
                    fitted = fitted.max(dv / ((shape.m as f64).powf(2.0 / 3.0) * (1.0 + r)));
                }
            }
        }
        assert!(fitted < 50.0, "fitted horizontal-shift constant {}", fitted);
    }
}
