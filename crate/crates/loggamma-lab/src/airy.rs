//! Independent Tracy-Widom GUE oracle: Airy function by contour quadrature
//! and det(I - K_Ai) on [s, inf) by a real Nystrom scheme. Shares nothing
//! with the limit-kernel path except the Gauss-Legendre rule, so it can
//! cross-check those determinants.

use num_complex::Complex64;

use crate::contour::{discretize, Contour, DiscretizeOptions};
use crate::error::Result;
use crate::fredholm::complex_det;

/// Ai and Ai' together, from (1/2 pi i) int exp(t^3/3 - x t) dt on an angle
/// pair through the saddle sqrt(max(x, 0.3)) at angle pi/3.
pub fn airy_ai_both(x: f64) -> Result<(f64, f64)> {
    let vertex = x.max(0.3).sqrt();
    let c = Contour::angle_pair(Complex64::new(vertex, 0.0), std::f64::consts::FRAC_PI_3)?;
    // decay ~ exp(-r^3 cos(pi) /3 ...): radius covers |x| up to ~30
    let radius = 8.0 + 1.5 * x.abs().sqrt();
    let grid = discretize(
        &c,
        &DiscretizeOptions {
            panel_order: 20,
            max_panel_len: 0.4,
            truncation_radius: radius,
            ..Default::default()
        },
    )?;
    let mut ai = Complex64::new(0.0, 0.0);
    let mut aip = Complex64::new(0.0, 0.0);
    for (&t, &w) in grid.nodes.iter().zip(&grid.weights) {
        let e = (t * t * t / 3.0 - x * t).exp() * w;
        ai += e;
        aip -= t * e;
    }
    Ok((ai.re, aip.re))
}

pub fn airy_ai(x: f64) -> Result<f64> {
    Ok(airy_ai_both(x)?.0)
}

/// Airy kernel with the l'Hopital diagonal.
fn airy_kernel(x: f64, ax: (f64, f64), y: f64, ay: (f64, f64)) -> f64 {
    if (x - y).abs() < 1e-9 {
        ax.1 * ax.1 - x * ax.0 * ax.0
    } else {
        (ax.0 * ay.1 - ax.1 * ay.0) / (x - y)
    }
}

/// F_GUE(s) = det(I - K_Ai) on L^2(s, inf), truncated where the kernel mass
/// is negligible and discretized with a single Gauss-Legendre rule whose
/// square-root weights keep the matrix symmetric.
pub fn tw_gue(s: f64) -> Result<f64> {
    let upper = (s + 14.0).max(8.0);
    let n = 80;
    let (xs, ws) = crate::contour::gauss_legendre(n);
    let half = 0.5 * (upper - s);
    let mid = 0.5 * (upper + s);
    let nodes: Vec<f64> = xs.iter().map(|&t| mid + half * t).collect();
    let ai: Vec<(f64, f64)> = nodes
        .iter()
        .map(|&x| airy_ai_both(x))
        .collect::<Result<_>>()?;
    let sw: Vec<f64> = ws.iter().map(|&w| (w * half).sqrt()).collect();
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let k = airy_kernel(nodes[i], ai[i], nodes[j], ai[j]);
            a[i * n + j] = Complex64::new(-sw[i] * k * sw[j], 0.0);
        }
        a[i * n + i] += 1.0;
    }
    let det = complex_det(a, n)?;
    Ok(det.re.clamp(0.0, 1.0))
}

/// Mean of the Tracy-Widom GUE law from the oracle CDF:
/// integral of (1 - F) on [0, inf) minus integral of F on (-inf, 0].
pub fn tw_gue_mean() -> Result<f64> {
    let (xs, ws) = crate::contour::gauss_legendre(48);
    let mut mean = 0.0;
    // [-8, 0]: contributes -int F
    for (&t, &w) in xs.iter().zip(&ws) {
        let x = -4.0 + 4.0 * t;
        mean -= 4.0 * w * tw_gue(x)?;
    }
    // [0, 5]: contributes +int (1 - F); beyond 5 the tail is < 1e-13
    for (&t, &w) in xs.iter().zip(&ws) {
        let x = 2.5 + 2.5 * t;
        mean += 2.5 * w * (1.0 - tw_gue(x)?);
    }
    Ok(mean)
}
