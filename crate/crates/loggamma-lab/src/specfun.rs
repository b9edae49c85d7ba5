//! Complex special functions used by every formula in the crate: principal-branch
//! log-gamma, digamma, the truncated polygamma-type sums S_k(z) = sum 1/(n+z)^k,
//! and an overflow-safe pi/sin(pi s).

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Distance below which an argument counts as sitting on a pole.
pub const POLE_PROXIMITY: f64 = 1e-8;

/// Controls partial sums of the polygamma series.
#[derive(Debug, Clone, Copy)]
pub struct SeriesTruncation {
    pub max_terms: usize,
    pub tail_tolerance: f64,
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        SeriesTruncation {
            max_terms: 100_000,
            tail_tolerance: 1e-13,
        }
    }
}

impl SeriesTruncation {
    pub fn new(max_terms: usize, tail_tolerance: f64) -> Result<Self> {
        if max_terms < 1 || tail_tolerance <= 0.0 {
            return Err(Error::Domain(
                "max_terms >= 1 and tail_tolerance > 0 required".into(),
            ));
        }
        Ok(SeriesTruncation {
            max_terms,
            tail_tolerance,
        })
    }
}

fn dist_to_nonpositive_integers(z: Complex64) -> f64 {
    if z.re > 0.5 {
        return f64::INFINITY;
    }
    let nearest = z.re.round().min(0.0);
    ((z.re - nearest).powi(2) + z.im * z.im).sqrt()
}

/// Distance from s to the nearest integer (the pole lattice of 1/sin(pi s)).
pub fn dist_to_integers(s: Complex64) -> f64 {
    ((s.re - s.re.round()).powi(2) + s.im * s.im).sqrt()
}

fn check_not_pole(z: Complex64, what: &str) -> Result<()> {
    let d = dist_to_nonpositive_integers(z);
    if d < POLE_PROXIMITY {
        return Err(Error::Pole {
            pole: format!("{} at nonpositive integer near {}", what, z.re.round()),
            dist: d,
        });
    }
    Ok(())
}

// Stirling coefficients B_{2n} / (2n (2n-1)).
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

const STIRLING_RADIUS: f64 = 12.0;

/// Stirling expansion, valid for |z| >= STIRLING_RADIUS, |arg z| bounded away from pi.
fn log_gamma_stirling(z: Complex64) -> Complex64 {
    let lz = z.ln();
    let mut acc = (z - 0.5) * lz - z + 0.5 * (2.0 * std::f64::consts::PI).ln();
    let z2 = z * z;
    let mut zp = z;
    for c in STIRLING {
        acc += c / zp;
        zp *= z2;
    }
    acc
}

/// log sin(pi z) with the branch appropriate for Im z >= 0:
/// sin(pi z) = (i/2) e^{-i pi z} (1 - e^{2 pi i z}).
fn log_sin_pi_upper(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let q = (2.0 * std::f64::consts::PI * i * z).exp();
    (i * 0.5).ln() - i * std::f64::consts::PI * z + (Complex64::new(1.0, 0.0) - q).ln()
}

fn log_gamma_right(z: Complex64) -> Complex64 {
    // Shift into the Stirling region; each factor uses the principal Log,
    // which is safe since the shifted arguments stay off the negative axis.
    let mut acc = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.norm() < STIRLING_RADIUS {
        acc -= w.ln();
        w += 1.0;
    }
    acc + log_gamma_stirling(w)
}

/// Principal-branch log-gamma on C minus the nonpositive integers.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    check_not_pole(z, "log_gamma")?;
    let v = if z.re >= 0.5 {
        log_gamma_right(z)
    } else if z.im >= 0.0 {
        // Reflection: log Gamma(z) = log pi - log sin(pi z) - log Gamma(1 - z).
        std::f64::consts::PI.ln() - log_sin_pi_upper(z) - log_gamma_right(Complex64::new(1.0, 0.0) - z)
    } else {
        log_gamma(z.conj())?.conj()
    };
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::Overflow(format!("log_gamma({}) not finite", z)));
    }
    Ok(v)
}

// Digamma asymptotic coefficients B_{2n} / (2n).
const DIGAMMA_ASY: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
];

fn digamma_right(z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut w = z;
    while w.norm() < STIRLING_RADIUS {
        acc -= 1.0 / w;
        w += 1.0;
    }
    let mut s = w.ln() - 0.5 / w;
    let w2 = w * w;
    let mut wp = w2;
    for c in DIGAMMA_ASY {
        s -= c / wp;
        wp *= w2;
    }
    acc + s
}

/// cot(pi z), stable for large |Im z|.
fn cot_pi(z: Complex64) -> Complex64 {
    let i = Complex64::i();
    if z.im >= 0.0 {
        let q = (2.0 * std::f64::consts::PI * i * z).exp();
        i * (q + 1.0) / (q - 1.0)
    } else {
        cot_pi(z.conj()).conj()
    }
}

/// Digamma Psi(z) = Gamma'(z)/Gamma(z).
pub fn digamma(z: Complex64) -> Result<Complex64> {
    check_not_pole(z, "digamma")?;
    let v = if z.re >= 0.5 {
        digamma_right(z)
    } else {
        // Psi(z) = Psi(1 - z) - pi cot(pi z)
        digamma_right(Complex64::new(1.0, 0.0) - z) - std::f64::consts::PI * cot_pi(z)
    };
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::Overflow(format!("digamma({}) not finite", z)));
    }
    Ok(v)
}

/// S_k(z) = sum_{n >= 0} 1/(n+z)^k for k in {2, 3}, by partial summation plus
/// an Euler-Maclaurin tail correction.
pub fn polygamma_sum(k: u32, z: Complex64, trunc: SeriesTruncation) -> Result<Complex64> {
    if k != 2 && k != 3 {
        return Err(Error::Domain(format!("polygamma_sum: k = {} not in {{2,3}}", k)));
    }
    check_not_pole(z, "polygamma_sum")?;
    let kf = k as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut n = 0usize;
    loop {
        // Estimate the size of the first neglected Euler-Maclaurin term if we
        // were to stop the explicit sum at K = n.
        let w = z + n as f64;
        let r = w.norm();
        if n >= 8 && r > 1.0 {
            let em_err = kf * (kf + 1.0) * (kf + 2.0) * (kf + 3.0) * (kf + 4.0) / 30_240.0
                / r.powi(k as i32 + 5);
            if em_err < trunc.tail_tolerance {
                let wk = w.powf(kf); // (K+z)^k
                let tail = w.powf(1.0 - kf) / (kf - 1.0) + 0.5 / wk + kf / (12.0 * wk * w)
                    - kf * (kf + 1.0) * (kf + 2.0) / (720.0 * wk * w * w * w);
                return Ok(sum + tail);
            }
        }
        if n >= trunc.max_terms {
            return Err(Error::NonConvergence(format!(
                "polygamma_sum(k={}) needs more than {} terms for tolerance {:.1e}",
                k, trunc.max_terms, trunc.tail_tolerance
            )));
        }
        sum += 1.0 / w.powf(kf);
        n += 1;
    }
}

/// pi / sin(pi s), factoring out e^{-pi |Im s|} analytically to avoid overflow.
pub fn recip_sin_pi(s: Complex64) -> Result<Complex64> {
    let d = dist_to_integers(s);
    if d < POLE_PROXIMITY {
        return Err(Error::Pole {
            pole: format!("sin(pi s) zero near {}", s.re.round()),
            dist: d,
        });
    }
    let v = if s.im.abs() <= 1.0 {
        std::f64::consts::PI / (std::f64::consts::PI * s).sin()
    } else if s.im > 0.0 {
        // 1/sin(pi s) = -2i e^{i pi s} / (1 - e^{2 pi i s})
        let i = Complex64::i();
        let e = (i * std::f64::consts::PI * s).exp();
        let q = e * e;
        -2.0 * std::f64::consts::PI * i * e / (Complex64::new(1.0, 0.0) - q)
    } else {
        recip_sin_pi(s.conj())?.conj()
    };
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn log_gamma_trivial_values() {
        assert_abs_diff_eq!(log_gamma(c(1.0, 0.0)).unwrap().norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            log_gamma(c(5.0, 0.0)).unwrap().re,
            24.0_f64.ln(),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            log_gamma(c(0.5, 0.0)).unwrap().re,
            0.5 * std::f64::consts::PI.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn log_gamma_complex_oracle() {
        // Frozen from an independent multiprecision evaluation.
        let v = log_gamma(c(2.0, 3.0)).unwrap();
        assert_abs_diff_eq!(v.re, -2.092851753092733, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 2.3023965434668676, epsilon = 1e-12);

        let v = log_gamma(c(-2.5, 1.0)).unwrap();
        assert_abs_diff_eq!(v.re, -2.3441906524655926, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, -8.304127986657926, epsilon = 1e-12);

        let v = log_gamma(c(-4.2, -3.3)).unwrap();
        assert_abs_diff_eq!(v.re, -10.937640888625788, epsilon = 1e-11);
        assert_abs_diff_eq!(v.im, 9.415974740841475, epsilon = 1e-11);
    }

    #[test]
    fn log_gamma_recurrence_grid() {
        // |logGamma(z+1) - logGamma(z) - log z| <= 1e-12 on a 10^3-point grid,
        // comparing modulo 2 pi in the imaginary part.
        let mut worst = 0.0f64;
        for i in 0..10 {
            for j in 0..10 {
                for k in 0..10 {
                    let re = -6.0 + 1.3 * i as f64 + 0.05 * k as f64;
                    let im = 0.11 + 0.8 * j as f64;
                    let z = c(re, im);
                    if dist_to_nonpositive_integers(z) < 0.05 {
                        continue;
                    }
                    let r = log_gamma(z + 1.0).unwrap() - log_gamma(z).unwrap() - z.ln();
                    let im_res = r.im - (r.im / (2.0 * std::f64::consts::PI)).round()
                        * 2.0
                        * std::f64::consts::PI;
                    let res = (r.re * r.re + im_res * im_res).sqrt();
                    worst = worst.max(res);
                }
            }
        }
        assert!(worst <= 1e-12, "worst recurrence residual {:.3e}", worst);
    }

    #[test]
    fn log_gamma_pole_and_errors() {
        assert!(matches!(
            log_gamma(c(0.0, 0.0)),
            Err(Error::Pole { .. })
        ));
        assert!(matches!(log_gamma(c(-3.0, 1e-12)), Err(Error::Pole { .. })));
    }

    #[test]
    fn digamma_values() {
        assert_abs_diff_eq!(
            digamma(c(1.0, 0.0)).unwrap().re,
            -EULER_GAMMA,
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(
            digamma(c(2.0, 0.0)).unwrap().re,
            1.0 - EULER_GAMMA,
            epsilon = 1e-13
        );
        let v = digamma(c(2.0, 3.0)).unwrap();
        assert_abs_diff_eq!(v.re, 1.2079807107101509, epsilon = 1e-10);
        assert_abs_diff_eq!(v.im, 1.1041296805875762, epsilon = 1e-10);
        let v = digamma(c(-3.7, 0.5)).unwrap();
        assert_abs_diff_eq!(v.re, 1.1933072552801448, epsilon = 1e-10);
        assert_abs_diff_eq!(v.im, 2.9306583284545293, epsilon = 1e-10);
    }

    #[test]
    fn digamma_recurrence() {
        for i in 0..20 {
            let z = c(0.3 + 0.37 * i as f64, 0.7);
            let lhs = digamma(z + 1.0).unwrap();
            let rhs = digamma(z).unwrap() + 1.0 / z;
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn digamma_is_derivative_of_log_gamma() {
        // Central differences with step 1e-5 on the positive real axis.
        let h = 1e-5;
        for i in 1..30 {
            let x = 0.4 + 0.33 * i as f64;
            let num =
                (log_gamma(c(x + h, 0.0)).unwrap().re - log_gamma(c(x - h, 0.0)).unwrap().re)
                    / (2.0 * h);
            assert_abs_diff_eq!(num, digamma(c(x, 0.0)).unwrap().re, epsilon = 1e-6);
        }
    }

    #[test]
    fn polygamma_sum_values() {
        let t = SeriesTruncation::default();
        assert_abs_diff_eq!(
            polygamma_sum(2, c(1.0, 0.0), t).unwrap().re,
            std::f64::consts::PI * std::f64::consts::PI / 6.0,
            epsilon = 1e-12
        );
        // zeta(3), frozen from the partial-sum oracle with integral tail bound.
        assert_abs_diff_eq!(
            polygamma_sum(3, c(1.0, 0.0), t).unwrap().re,
            1.2020569031595943,
            epsilon = 1e-12
        );
        let v = polygamma_sum(2, c(2.0, 3.0), t).unwrap();
        assert_abs_diff_eq!(v.re, 0.1355554270056909, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, -0.2670099924583456, epsilon = 1e-12);
        let v = polygamma_sum(3, c(0.7, -1.2), t).unwrap();
        assert_abs_diff_eq!(v.re, -0.3587129089062028, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.1760019311777615, epsilon = 1e-12);
    }

    #[test]
    fn polygamma_shift_identity() {
        // S_k(z) - S_k(z+1) = z^{-k}
        let t = SeriesTruncation::default();
        for k in [2u32, 3] {
            for i in 0..10 {
                let z = c(0.25 + 0.4 * i as f64, 0.3 * i as f64);
                let lhs = polygamma_sum(k, z, t).unwrap() - polygamma_sum(k, z + 1.0, t).unwrap();
                let rhs = 1.0 / z.powf(k as f64);
                assert!((lhs - rhs).norm() < 1e-12, "k={} z={}", k, z);
            }
        }
    }

    #[test]
    fn polygamma_is_derivative_of_digamma() {
        let t = SeriesTruncation::default();
        let h = 1e-5;
        for i in 1..20 {
            let x = 0.5 + 0.41 * i as f64;
            let num = (digamma(c(x + h, 0.0)).unwrap().re - digamma(c(x - h, 0.0)).unwrap().re)
                / (2.0 * h);
            assert_abs_diff_eq!(
                num,
                polygamma_sum(2, c(x, 0.0), t).unwrap().re,
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn polygamma_nonconvergence_error() {
        let t = SeriesTruncation::new(5, 1e-14).unwrap();
        assert!(matches!(
            polygamma_sum(2, c(0.5, 0.0), t),
            Err(Error::NonConvergence(_))
        ));
    }

    #[test]
    fn recip_sin_pi_values() {
        assert_abs_diff_eq!(
            recip_sin_pi(c(0.5, 0.0)).unwrap().re,
            std::f64::consts::PI,
            epsilon = 1e-14
        );
        // |pi/sin(pi(1/2 + 10i))| ~ 2 pi e^{-10 pi}
        let v = recip_sin_pi(c(0.5, 10.0)).unwrap();
        let expect = 2.0 * std::f64::consts::PI * (-10.0 * std::f64::consts::PI).exp();
        assert_abs_diff_eq!(v.norm(), expect, epsilon = 1e-9 * expect);
        // no overflow far up the strip
        let v = recip_sin_pi(c(0.3, 5000.0)).unwrap();
        assert!(v.norm().is_finite());
    }

    #[test]
    fn recip_sin_pi_antiperiodicity() {
        for i in 0..10 {
            let s = c(0.21 + 0.13 * i as f64, 0.4 * i as f64 - 1.7);
            let a = recip_sin_pi(s).unwrap();
            let b = recip_sin_pi(s + 1.0).unwrap();
            assert!((a + b).norm() < 1e-10 * a.norm().max(1.0));
        }
    }

    #[test]
    fn recip_sin_pi_distance_bound() {
        // |pi/sin(pi s)| <= C / dist(s, Z) with a single fitted constant C <= 10.
        let mut fitted = 0.0f64;
        for i in 0..40 {
            for j in 0..40 {
                let s = c(-2.0 + 0.101 * i as f64, -2.0 + 0.103 * j as f64);
                let d = dist_to_integers(s);
                if d < 1e-3 {
                    continue;
                }
                fitted = fitted.max(recip_sin_pi(s).unwrap().norm() * d);
            }
        }
        assert!(fitted <= 10.0, "fitted sine-bound constant {:.3}", fitted);
    }

    #[test]
    fn recip_sin_pi_pole_error() {
        assert!(matches!(recip_sin_pi(c(3.0, 0.0)), Err(Error::Pole { .. })));
    }
}
