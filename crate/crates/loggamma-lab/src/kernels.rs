//! The three kernel families behind every determinant in the crate: the
//! finite-size kernel on an angle pair with pole detours, the pre-deformation
//! kernel in shifted coordinates on vertical lines, and the limit kernel whose
//! determinant gives the Tracy-Widom and BBP distributions.
//!
//! Gamma-function products are assembled in log space, grouped by distinct
//! parameter value. Exponentiating the summed logs equals the product of the
//! individual gamma factors exactly, so principal-branch cuts never leak into
//! the kernel values.

use num_complex::Complex64;

use crate::contour::{discretize, Contour, DiscretizeOptions, QuadratureGrid};
use crate::error::{Error, Result};
use crate::specfun::{log_gamma, recip_sin_pi};

const MIN_POLE_DIST: f64 = 1e-8;
const EXP_GUARD: f64 = 700.0;
const DECAY_DROP: f64 = 55.0;
const FRAC_PI_4: f64 = std::f64::consts::FRAC_PI_4;

fn cplx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// (value, multiplicity) pairs for a parameter list.
fn grouped(vals: &[f64]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &v in vals {
        match out.iter_mut().find(|(u, _)| *u == v) {
            Some((_, m)) => *m += 1.0,
            None => out.push((v, 1.0)),
        }
    }
    out
}

// Follows the integrand magnitude outward until it has dropped DECAY_DROP
// logs below its running maximum; the return value is the truncation radius.
fn march_radius<F: FnMut(f64) -> Option<f64>>(mut f: F, cap: f64) -> f64 {
    let mut r = 0.05;
    let mut fmax = f64::NEG_INFINITY;
    while r < cap {
        if let Some(v) = f(r) {
            if v > fmax {
                fmax = v;
            } else if v < fmax - DECAY_DROP {
                return (1.3 * r).min(cap);
            }
        }
        r = (1.2 * r).max(r + 0.02);
    }
    cap
}

fn panel_len_for(radius: f64) -> f64 {
    (radius / 8.0).clamp(0.01, 0.5)
}

/// Parameters of the finite-size kernel: row parameters a, column parameters
/// alpha, log of the Laplace variable u (u real positive), and the Gaussian
/// deformation strength tau.
#[derive(Debug, Clone)]
pub struct FiniteKernelSpec {
    pub a: Vec<f64>,
    pub alpha: Vec<f64>,
    pub log_u: f64,
    pub tau: f64,
}

impl FiniteKernelSpec {
    pub fn theta0(&self) -> f64 {
        let amax = self.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let almin = self.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        almin - amax
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() || self.alpha.is_empty() {
            return Err(Error::Domain("kernel needs nonempty parameter lists".into()));
        }
        if !(self.theta0() > 0.0) {
            return Err(Error::Hypothesis(format!(
                "min(alpha) - max(a) = {} must be positive",
                self.theta0()
            )));
        }
        if self.tau < 0.0 {
            return Err(Error::Hypothesis("tau must be nonnegative".into()));
        }
        Ok(())
    }

    // w-side exponent: w log u + tau w^2/2 - sum_n logGamma(w - a_n)
    //                  + sum_m logGamma(alpha_m - w).
    // The v-side exponent is exactly its negative evaluated at v.
    fn w_exponent(
        &self,
        ga: &[(f64, f64)],
        gal: &[(f64, f64)],
        w: Complex64,
    ) -> Result<Complex64> {
        let mut e = w * self.log_u + self.tau * w * w / 2.0;
        for &(av, mult) in ga {
            e -= mult * log_gamma(w - av)?;
        }
        for &(lv, mult) in gal {
            e += mult * log_gamma(cplx(lv) - w)?;
        }
        Ok(e)
    }
}

/// Contour data for the finite kernel: outer vertex va, detour vertex b and
/// detour half-width d with max(a) < va < b < min(alpha).
#[derive(Debug, Clone, Copy)]
pub struct FiniteContours {
    pub va: f64,
    pub b: f64,
    pub d: f64,
}

impl FiniteContours {
    pub fn validate(&self, spec: &FiniteKernelSpec) -> Result<()> {
        let amax = spec.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let almin = spec.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(amax < self.va && self.va < self.b && self.b < almin) {
            return Err(Error::Geometry(format!(
                "need max(a) < va < b < min(alpha), got {} < {} < {} < {}",
                amax, self.va, self.b, almin
            )));
        }
        if !(self.d > 0.0 && self.d < 0.25_f64.min((self.b - self.va) / 4.0)) {
            return Err(Error::Geometry(format!(
                "detour width d = {} outside (0, min(1/4, (b - va)/4))",
                self.d
            )));
        }
        Ok(())
    }
}

/// Midpoint contours for a spec, optionally pinning the outer vertex (the
/// natural choice is the critical point z_c).
pub fn default_finite_contours(spec: &FiniteKernelSpec, va_hint: Option<f64>) -> Result<FiniteContours> {
    spec.validate()?;
    let amax = spec.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let almin = spec.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    let va = match va_hint {
        Some(v) if v > amax && v < almin => v,
        Some(v) => {
            return Err(Error::Geometry(format!(
                "va hint {} outside ({}, {})",
                v, amax, almin
            )))
        }
        None => amax + (almin - amax) / 3.0,
    };
    let b = va + (almin - va) / 2.0;
    let d = 0.9 * 0.25_f64.min((b - va) / 4.0).min((almin - b) / 4.0);
    let c = FiniteContours { va, b, d };
    c.validate(spec)?;
    Ok(c)
}

/// Discretized outer contour C_{va, 3 pi/4}, truncated where the v-side
/// exponent has decayed.
pub fn finite_outer_grid(
    spec: &FiniteKernelSpec,
    cont: &FiniteContours,
    order: usize,
) -> Result<QuadratureGrid> {
    spec.validate()?;
    cont.validate(spec)?;
    let ga = grouped(&spec.a);
    let gal = grouped(&spec.alpha);
    let dir = Complex64::from_polar(1.0, 3.0 * FRAC_PI_4);
    let radius = march_radius(
        |r| {
            spec.w_exponent(&ga, &gal, cplx(cont.va) + r * dir)
                .ok()
                .map(|e| -e.re)
        },
        200.0,
    );
    let contour = Contour::angle_pair(cplx(cont.va), 3.0 * FRAC_PI_4)?;
    discretize(
        &contour,
        &DiscretizeOptions {
            panel_order: order,
            max_panel_len: panel_len_for(radius),
            truncation_radius: radius,
            singularities: Vec::new(),
        },
    )
}

/// Kernel matrix K(v_i, v_j) on the outer grid nodes, row-major. Each outer
/// node gets its own detour contour D_{v_i}(b, pi/4, d).
pub fn finite_kernel_matrix(
    spec: &FiniteKernelSpec,
    cont: &FiniteContours,
    outer: &QuadratureGrid,
    order: usize,
) -> Result<Vec<Complex64>> {
    spec.validate()?;
    cont.validate(spec)?;
    let ga = grouped(&spec.a);
    let gal = grouped(&spec.alpha);
    let n = outer.len();
    let almin = spec.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    let updir = Complex64::from_polar(1.0, FRAC_PI_4);
    let dndir = Complex64::from_polar(1.0, -FRAC_PI_4);
    let row = |&vi: &Complex64| -> Result<Vec<Complex64>> {
        let ev = -spec.w_exponent(&ga, &gal, vi)?;
        // truncation from both detour ray anchors, with the sine decay folded in
        let on_c = |t: f64| Complex64::new(cont.b + t.abs(), t);
        let z_hi = on_c(vi.im + cont.d);
        let z_lo = on_c(vi.im - cont.d);
        let decay = |w: Complex64| -> Option<f64> {
            spec.w_exponent(&ga, &gal, w)
                .ok()
                .map(|e| e.re - std::f64::consts::PI * (w.im - vi.im).abs())
        };
        let radius = march_radius(|r| decay(z_hi + r * updir), 200.0)
            .max(march_radius(|r| decay(z_lo + r * dndir), 200.0));
        let mut sing = vec![vi, vi + 1.0, cplx(almin)];
        sing.extend_from_slice(&outer.nodes);
        let grid = discretize(
            &Contour::detour(cont.b, cont.d, vi)?,
            &DiscretizeOptions {
                panel_order: order,
                max_panel_len: panel_len_for(radius),
                truncation_radius: radius,
                singularities: sing,
            },
        )?;
        // inner integrand without the 1/(w - v') factor
        let mut terms = Vec::with_capacity(grid.len());
        for (&w, &wt) in grid.nodes.iter().zip(&grid.weights) {
            let ex = ev + spec.w_exponent(&ga, &gal, w)?;
            if ex.re > EXP_GUARD {
                return Err(Error::Overflow(format!(
                    "kernel exponent {:.1} at w = {}",
                    ex.re, w
                )));
            }
            terms.push((w, wt * recip_sin_pi(vi - w)? * ex.exp()));
        }
        let mut out = Vec::with_capacity(n);
        for &vj in &outer.nodes {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(w, g) in &terms {
                let den = w - vj;
                if den.norm() < MIN_POLE_DIST {
                    return Err(Error::Pole {
                        pole: format!("w - v' at {}", w),
                        dist: den.norm(),
                    });
                }
                acc += g / den;
            }
            out.push(acc);
        }
        Ok(out)
    };
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<Vec<Complex64>>> = {
        use rayon::prelude::*;
        outer.nodes.par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<Vec<Complex64>>> = outer.nodes.iter().map(row).collect();
    Ok(rows?.concat())
}

/// The pre-deformation kernel in shifted coordinates s = w - v: outer contour
/// is the nearly horizontal angle pair with vertex mu = (max a + min alpha)/2,
/// the inner contour runs along vertical lines at Re s = eta - Re v with a
/// step to Re s = 1/2 between the poles of Gamma(-s). tau > 0 is required:
/// at tau = 0 the vertical parts need not converge.
#[derive(Debug, Clone)]
pub struct LegacyKernelSpec {
    pub a: Vec<f64>,
    pub alpha: Vec<f64>,
    pub log_u: f64,
    pub tau: f64,
    pub d: f64,
}

impl LegacyKernelSpec {
    fn finite_view(&self) -> FiniteKernelSpec {
        FiniteKernelSpec {
            a: self.a.clone(),
            alpha: self.alpha.clone(),
            log_u: self.log_u,
            tau: self.tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.finite_view().validate()?;
        if !(self.tau > 0.0) {
            return Err(Error::Hypothesis(
                "legacy kernel requires tau > 0 for contour convergence".into(),
            ));
        }
        if !(self.d > 0.0 && self.d <= 0.25) {
            return Err(Error::Geometry(format!("legacy d = {} outside (0, 1/4]", self.d)));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        let amax = self.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let almin = self.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        0.5 * amax + 0.5 * almin
    }

    pub fn eta(&self) -> f64 {
        let amax = self.a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let almin = self.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
        0.25 * amax + 0.75 * almin
    }
}

/// Discretized outer contour, rays at angles pi -+ pi/6 through mu.
pub fn legacy_outer_grid(spec: &LegacyKernelSpec, order: usize) -> Result<QuadratureGrid> {
    spec.validate()?;
    let fk = spec.finite_view();
    let ga = grouped(&spec.a);
    let gal = grouped(&spec.alpha);
    let phi = std::f64::consts::PI - std::f64::consts::FRAC_PI_6;
    let dir = Complex64::from_polar(1.0, phi);
    let radius = march_radius(
        |r| {
            fk.w_exponent(&ga, &gal, cplx(spec.mu()) + r * dir)
                .ok()
                .map(|e| -e.re)
        },
        200.0,
    );
    let contour = Contour::angle_pair(cplx(spec.mu()), phi)?;
    discretize(
        &contour,
        &DiscretizeOptions {
            panel_order: order,
            max_panel_len: panel_len_for(radius),
            truncation_radius: radius,
            singularities: Vec::new(),
        },
    )
}

fn legacy_inner_contour(r_line: f64, d: f64) -> Contour {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let lo = Complex64::new(r_line, -d);
    let hi = Complex64::new(r_line, d);
    let step_lo = Complex64::new(0.5, -d);
    let step_hi = Complex64::new(0.5, d);
    Contour {
        pieces: vec![
            crate::contour::Piece::Ray { anchor: lo, angle: -half_pi, incoming: true },
            crate::contour::Piece::Segment { from: lo, to: step_lo },
            crate::contour::Piece::Segment { from: step_lo, to: step_hi },
            crate::contour::Piece::Segment { from: step_hi, to: hi },
            crate::contour::Piece::Ray { anchor: hi, angle: half_pi, incoming: false },
        ],
    }
}

/// Kernel matrix of the pre-deformation kernel on the outer grid nodes.
pub fn legacy_kernel_matrix(
    spec: &LegacyKernelSpec,
    outer: &QuadratureGrid,
    order: usize,
) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let ga = grouped(&spec.a);
    let gal = grouped(&spec.alpha);
    let n = outer.len();
    let mut k = vec![Complex64::new(0.0, 0.0); n * n];
    let eta = spec.eta();
    // s-side exponent relative to a fixed v
    let s_exponent = |v: Complex64, s: Complex64| -> Result<Complex64> {
        let mut e = s * spec.log_u + spec.tau * (v * s + s * s / 2.0);
        for &(av, mult) in &ga {
            e += mult * (log_gamma(v - av)? - log_gamma(s + v - av)?);
        }
        for &(lv, mult) in &gal {
            e += mult * (log_gamma(cplx(lv) - v - s)? - log_gamma(cplx(lv) - v)?);
        }
        Ok(e)
    };
    for (i, &vi) in outer.nodes.iter().enumerate() {
        let r_line = eta - vi.re;
        let decay = |t: f64, sgn: f64| -> Option<f64> {
            let s = Complex64::new(r_line, sgn * (spec.d + t));
            s_exponent(vi, s)
                .ok()
                .map(|e| e.re - std::f64::consts::PI * s.im.abs())
        };
        let radius = march_radius(|t| decay(t, 1.0), 400.0)
            .max(march_radius(|t| decay(t, -1.0), 400.0));
        // integer poles of Gamma(-s)Gamma(1+s) near the vertical line, plus
        // alpha-pole images
        let mut sing: Vec<Complex64> = (-1..=2).map(|q| cplx(r_line.round() + q as f64)).collect();
        sing.push(cplx(0.0));
        sing.push(cplx(1.0));
        for &(lv, _) in &gal {
            sing.push(cplx(lv) - vi);
        }
        for &vp in &outer.nodes {
            sing.push(vp - vi);
        }
        let grid = discretize(
            &legacy_inner_contour(r_line, spec.d),
            &DiscretizeOptions {
                panel_order: order,
                max_panel_len: panel_len_for(radius),
                truncation_radius: radius,
                singularities: sing,
            },
        )?;
        let mut terms = Vec::with_capacity(grid.len());
        for (&s, &wt) in grid.nodes.iter().zip(&grid.weights) {
            let ex = s_exponent(vi, s)?;
            if ex.re > EXP_GUARD {
                return Err(Error::Overflow(format!(
                    "legacy exponent {:.1} at s = {}",
                    ex.re, s
                )));
            }
            // Gamma(-s) Gamma(1+s) = -pi / sin(pi s)
            terms.push((s, -wt * recip_sin_pi(s)? * ex.exp()));
        }
        for (j, &vj) in outer.nodes.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(s, g) in &terms {
                let den = vi + s - vj;
                if den.norm() < MIN_POLE_DIST {
                    return Err(Error::Pole {
                        pole: format!("v + s - v' at {}", vi + s),
                        dist: den.norm(),
                    });
                }
                acc += g / den;
            }
            k[i * n + j] = acc;
        }
    }
    Ok(k)
}

/// Limit kernel parameters: perturbation anchors x (rows) and y (columns)
/// with min(y) > max(x), and the distribution argument r.
#[derive(Debug, Clone)]
pub struct LimitKernelSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub r: f64,
}

impl LimitKernelSpec {
    pub fn max_x(&self) -> f64 {
        self.x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_y(&self) -> f64 {
        self.y.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_x() >= self.min_y() {
            return Err(Error::Domain("limit kernel requires min(y) > max(x)".into()));
        }
        Ok(())
    }
}

/// Inner contour shape for the limit kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitVariant {
    AnglePair,
    Bent,
}

/// Vertices (a, b) with max(x) < a < b < min(y), defaulting to thirds of the
/// feasible window with fallbacks when one side is unbounded.
pub fn default_limit_vertices(spec: &LimitKernelSpec) -> (f64, f64) {
    let lo = spec.max_x();
    let hi = spec.min_y();
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo + (hi - lo) / 3.0, lo + 2.0 * (hi - lo) / 3.0),
        (true, false) => (lo + 0.5, lo + 1.0),
        (false, true) => (hi - 1.0, hi - 0.5),
        (false, false) => (0.0, 1.0),
    }
}

fn limit_radius(spec: &LimitKernelSpec, vertex: f64) -> f64 {
    // cubic contraction at angle pi/4 with the linear r-term folded in
    march_radius(
        |t| {
            let w = Complex64::new(vertex, 0.0) + t * Complex64::from_polar(1.0, FRAC_PI_4);
            Some((w.powu(3) / 3.0 - spec.r * w).re)
        },
        60.0,
    )
}

/// Discretized (outer, inner) contour pair for the limit kernel.
pub fn limit_grids(
    spec: &LimitKernelSpec,
    vertices: (f64, f64),
    variant: LimitVariant,
    order: usize,
) -> Result<(QuadratureGrid, QuadratureGrid)> {
    spec.validate()?;
    let (a, b) = vertices;
    if !(a < b && a > spec.max_x() && b < spec.min_y()) {
        return Err(Error::Geometry(format!(
            "limit vertices ({}, {}) outside ({}, {})",
            a,
            b,
            spec.max_x(),
            spec.min_y()
        )));
    }
    // Re(-v^3/3 + r v) on the outer ray equals Re(w^3/3 - r w) at w = -v
    let r_out = limit_radius(spec, -a).max(6.0);
    let outer = discretize(
        &Contour::angle_pair(cplx(a), 3.0 * FRAC_PI_4)?,
        &DiscretizeOptions {
            panel_order: order,
            // entire integrand: long panels suffice
            max_panel_len: (r_out / 6.0).clamp(1.0, 2.0),
            truncation_radius: r_out,
            singularities: spec.x.iter().map(|&x| cplx(x)).collect(),
        },
    )?;
    let r_in = limit_radius(spec, b).max(6.0);
    let inner_contour = match variant {
        LimitVariant::AnglePair => Contour::angle_pair(cplx(b), FRAC_PI_4)?,
        LimitVariant::Bent => Contour::bent(b, 0.5 * (spec.min_y() - b).min(2.0))?,
    };
    let mut sing: Vec<Complex64> = spec.y.iter().map(|&y| cplx(y)).collect();
    sing.extend_from_slice(&outer.nodes);
    let inner = discretize(
        &inner_contour,
        &DiscretizeOptions {
            panel_order: order,
            max_panel_len: (r_in / 6.0).clamp(1.0, 2.0),
            truncation_radius: r_in,
            singularities: sing,
        },
    )?;
    Ok((outer, inner))
}

/// Limit kernel matrix K_r(v_i, v_j) on the outer nodes, row-major. A single
/// inner grid is shared by all outer nodes.
pub fn limit_kernel_matrix(
    spec: &LimitKernelSpec,
    outer: &QuadratureGrid,
    inner: &QuadratureGrid,
) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let n = outer.len();
    // w-only factors, with quadrature weight folded in
    let mut wfac = Vec::with_capacity(inner.len());
    for (&w, &wt) in inner.nodes.iter().zip(&inner.weights) {
        let e = w.powu(3) / 3.0 - spec.r * w;
        if e.re > EXP_GUARD {
            return Err(Error::Overflow(format!("limit exponent {:.1} at w = {}", e.re, w)));
        }
        let mut f = wt * e.exp();
        for &x in &spec.x {
            f *= w - x;
        }
        for &y in &spec.y {
            let den = cplx(y) - w;
            if den.norm() < MIN_POLE_DIST {
                return Err(Error::Pole { pole: format!("y - w at {}", w), dist: den.norm() });
            }
            f /= den;
        }
        wfac.push(f);
    }
    let mut k = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, &v) in outer.nodes.iter().enumerate() {
        let mut pref = (-v.powu(3) / 3.0 + spec.r * v).exp();
        for &x in &spec.x {
            let den = v - x;
            if den.norm() < MIN_POLE_DIST {
                return Err(Error::Pole { pole: format!("v - x at {}", v), dist: den.norm() });
            }
            pref /= den;
        }
        for &y in &spec.y {
            pref *= cplx(y) - v;
        }
        for (j, &vp) in outer.nodes.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&w, &f) in inner.nodes.iter().zip(&wfac) {
                let d1 = v - w;
                let d2 = w - vp;
                if d1.norm() < MIN_POLE_DIST || d2.norm() < MIN_POLE_DIST {
                    return Err(Error::Pole {
                        pole: format!("contour collision at w = {}", w),
                        dist: d1.norm().min(d2.norm()),
                    });
                }
                acc += f / (d1 * d2);
            }
            k[i * n + j] = pref * acc;
        }
    }
    Ok(k)
}
