//! Contours in the complex plane (angle pairs, pole detours, bent lines) and
//! their composite Gauss-Legendre discretization. Quadrature weights carry the
//! 1/(2 pi i) measure used by every kernel and determinant in the crate.

use num_complex::Complex64;

use crate::error::{Error, Result};

const TWO_PI_I: Complex64 = Complex64::new(0.0, std::f64::consts::TAU);

/// One oriented contour piece. Rays are traversed from infinity towards the
/// anchor when `incoming` is set, away from it otherwise.
#[derive(Debug, Clone, Copy)]
pub enum Piece {
    Segment { from: Complex64, to: Complex64 },
    Ray { anchor: Complex64, angle: f64, incoming: bool },
}

/// Ordered list of pieces forming one contour.
#[derive(Debug, Clone)]
pub struct Contour {
    pub pieces: Vec<Piece>,
}

impl Contour {
    /// C_{a,phi}: rays at angles -phi and phi from the vertex, oriented with
    /// increasing imaginary part.
    pub fn angle_pair(a: Complex64, phi: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < std::f64::consts::PI) {
            return Err(Error::Geometry(format!("angle_pair: phi = {} outside (0, pi)", phi)));
        }
        Ok(Contour {
            pieces: vec![
                Piece::Ray { anchor: a, angle: -phi, incoming: true },
                Piece::Ray { anchor: a, angle: phi, incoming: false },
            ],
        })
    }

    /// D_v(b, pi/4, d): C_{b,pi/4} with the band |Im w - Im v| <= d replaced by
    /// segments through v + 2d -+ i d, so that v stays left of the contour and
    /// v + 1 right of it.
    pub fn detour(b: f64, d: f64, v: Complex64) -> Result<Self> {
        if d <= 0.0 || d >= 0.5 {
            return Err(Error::Geometry(format!("detour: d = {} outside (0, 1/2)", d)));
        }
        let vertex = Complex64::new(b, 0.0);
        let on_c = |t: f64| Complex64::new(b + t.abs(), t);
        let t_lo = v.im - d;
        let t_hi = v.im + d;
        let z_lo = on_c(t_lo);
        let z_hi = on_c(t_hi);
        let mut pieces = Vec::new();
        if t_lo <= 0.0 {
            pieces.push(Piece::Ray { anchor: z_lo, angle: -std::f64::consts::FRAC_PI_4, incoming: true });
        } else {
            pieces.push(Piece::Ray { anchor: vertex, angle: -std::f64::consts::FRAC_PI_4, incoming: true });
            pieces.push(Piece::Segment { from: vertex, to: z_lo });
        }
        let apex_lo = v + Complex64::new(2.0 * d, -d);
        let apex_hi = v + Complex64::new(2.0 * d, d);
        pieces.push(Piece::Segment { from: z_lo, to: apex_lo });
        pieces.push(Piece::Segment { from: apex_lo, to: apex_hi });
        pieces.push(Piece::Segment { from: apex_hi, to: z_hi });
        if t_hi >= 0.0 {
            pieces.push(Piece::Ray { anchor: z_hi, angle: std::f64::consts::FRAC_PI_4, incoming: false });
        } else {
            pieces.push(Piece::Segment { from: z_hi, to: vertex });
            pieces.push(Piece::Ray { anchor: vertex, angle: std::f64::consts::FRAC_PI_4, incoming: false });
        }
        Ok(Contour { pieces })
    }

    /// Pi/4 angle pair whose vertex is replaced by a vertical segment through
    /// mu + rho -+ i rho. Used for the limit-kernel inner contour.
    pub fn bent(mu: f64, rho: f64) -> Result<Self> {
        if rho <= 0.0 {
            return Err(Error::Geometry(format!("bent: rho = {} must be positive", rho)));
        }
        let lo = Complex64::new(mu + rho, -rho);
        let hi = Complex64::new(mu + rho, rho);
        Ok(Contour {
            pieces: vec![
                Piece::Ray { anchor: lo, angle: -std::f64::consts::FRAC_PI_4, incoming: true },
                Piece::Segment { from: lo, to: hi },
                Piece::Ray { anchor: hi, angle: std::f64::consts::FRAC_PI_4, incoming: false },
            ],
        })
    }
}

/// Discretization controls. `truncation_radius` cuts every ray at that arc
/// length from its anchor; `singularities` force panel refinement so that no
/// panel is longer than half its distance to the nearest listed point.
#[derive(Debug, Clone)]
pub struct DiscretizeOptions {
    pub panel_order: usize,
    pub max_panel_len: f64,
    pub truncation_radius: f64,
    pub singularities: Vec<Complex64>,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        DiscretizeOptions {
            panel_order: 16,
            max_panel_len: 0.5,
            truncation_radius: 30.0,
            singularities: Vec::new(),
        }
    }
}

/// Nodes and weights; weights absorb dz / (2 pi i).
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub nodes: Vec<Complex64>,
    pub weights: Vec<Complex64>,
}

impl QuadratureGrid {
    /// (1 / 2 pi i) * integral of f along the contour.
    pub fn integrate<F: FnMut(Complex64) -> Complex64>(&self, mut f: F) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1], by Newton
/// iteration from the Chebyshev initial guess.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
    }
    (xs, ws)
}

fn dist_to_nearest(p: Complex64, pts: &[Complex64]) -> f64 {
    pts.iter()
        .map(|&s| (p - s).norm())
        .fold(f64::INFINITY, f64::min)
}

// Bisect [from, to] until every panel is shorter than both max_panel_len and
// half its midpoint distance to the nearest singularity, then lay down one
// Gauss-Legendre rule per panel.
fn fill_segment(
    from: Complex64,
    to: Complex64,
    opts: &DiscretizeOptions,
    base: &(Vec<f64>, Vec<f64>),
    grid: &mut QuadratureGrid,
    depth: u32,
) -> Result<()> {
    let len = (to - from).norm();
    if len == 0.0 {
        return Ok(());
    }
    let mid = 0.5 * (from + to);
    let mut allowed = opts.max_panel_len;
    if !opts.singularities.is_empty() {
        let d = dist_to_nearest(mid, &opts.singularities);
        if d < 1e-12 {
            return Err(Error::Geometry(format!("singularity on contour near {}", mid)));
        }
        allowed = allowed.min((0.5 * d).max(1e-3));
    }
    if len > allowed {
        if depth >= 40 {
            return Err(Error::ToleranceUnreachable(
                "contour refinement depth exceeded".into(),
            ));
        }
        fill_segment(from, mid, opts, base, grid, depth + 1)?;
        return fill_segment(mid, to, opts, base, grid, depth + 1);
    }
    let half = 0.5 * (to - from);
    for (&x, &w) in base.0.iter().zip(&base.1) {
        grid.nodes.push(mid + half * x);
        grid.weights.push(half * w / TWO_PI_I);
    }
    Ok(())
}

// A ray becomes geometrically graded segments out to the truncation radius.
fn fill_ray(
    anchor: Complex64,
    angle: f64,
    incoming: bool,
    opts: &DiscretizeOptions,
    base: &(Vec<f64>, Vec<f64>),
    grid: &mut QuadratureGrid,
) -> Result<()> {
    let dir = Complex64::from_polar(1.0, angle);
    let mut breaks = vec![0.0, opts.max_panel_len.min(1.0)];
    while *breaks.last().unwrap() < opts.truncation_radius {
        let next = (2.0 * breaks.last().unwrap()).min(opts.truncation_radius);
        breaks.push(next);
    }
    let seg = |r0: f64, r1: f64| (anchor + r0 * dir, anchor + r1 * dir);
    // panels may grow with arc length from the anchor
    let graded = |r0: f64| DiscretizeOptions {
        max_panel_len: opts.max_panel_len.max(0.25 * r0),
        ..opts.clone()
    };
    if incoming {
        for k in (1..breaks.len()).rev() {
            let (p0, p1) = seg(breaks[k], breaks[k - 1]);
            fill_segment(p0, p1, &graded(breaks[k - 1]), base, grid, 0)?;
        }
    } else {
        for k in 1..breaks.len() {
            let (p0, p1) = seg(breaks[k - 1], breaks[k]);
            fill_segment(p0, p1, &graded(breaks[k - 1]), base, grid, 0)?;
        }
    }
    Ok(())
}

/// Composite Gauss-Legendre discretization of a contour.
pub fn discretize(contour: &Contour, opts: &DiscretizeOptions) -> Result<QuadratureGrid> {
    if !(1..=64).contains(&opts.panel_order) {
        return Err(Error::Config("panel_order must lie in 1..=64".into()));
    }
    if opts.truncation_radius <= 0.0 || opts.max_panel_len <= 0.0 {
        return Err(Error::Config("positive truncation_radius and max_panel_len required".into()));
    }
    let base = gauss_legendre(opts.panel_order);
    let mut grid = QuadratureGrid { nodes: Vec::new(), weights: Vec::new() };
    for piece in &contour.pieces {
        match *piece {
            Piece::Segment { from, to } => fill_segment(from, to, opts, &base, &mut grid, 0)?,
            Piece::Ray { anchor, angle, incoming } => {
                fill_ray(anchor, angle, incoming, opts, &base, &mut grid)?
            }
        }
    }
    Ok(grid)
}

/// Truncation radius such that exp(-rate * r^3 / 3) tails fall below tol,
/// clamped to [4, 60]. Cubic decay covers every kernel in the crate; slower
/// measured decay should use a larger explicit radius instead.
pub fn cubic_decay_radius(rate: f64, tol: f64) -> f64 {
    if rate <= 0.0 || tol <= 0.0 || tol >= 1.0 {
        return 60.0;
    }
    (3.0 * (1.0 / tol).ln() / rate).cbrt().clamp(4.0, 60.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_legendre_low_orders() {
        let (x, w) = gauss_legendre(2);
        assert_abs_diff_eq!(x[1], 1.0 / 3.0f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        for n in 1..=64 {
            let (x, w) = gauss_legendre(n);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            // integrates x^(2n-1) exactly to zero, x^2 to 2/3 for n >= 2
            if n >= 2 {
                let s2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
                assert_abs_diff_eq!(s2, 2.0 / 3.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn segment_polynomial_exact() {
        let c = Contour {
            pieces: vec![Piece::Segment {
                from: Complex64::new(-1.0, 0.5),
                to: Complex64::new(2.0, -1.0),
            }],
        };
        let grid = discretize(&c, &DiscretizeOptions::default()).unwrap();
        let val = grid.integrate(|z| z * z) * TWO_PI_I;
        let (p0, p1) = (Complex64::new(-1.0, 0.5), Complex64::new(2.0, -1.0));
        let exact = (p1.powu(3) - p0.powu(3)) / 3.0;
        assert!((val - exact).norm() < 1e-13);
    }

    #[test]
    fn airy_values_from_angle_pair() {
        // Ai(x) = (1/2 pi i) int exp(w^3/3 - x w) dw over any contour from
        // infinity at angle -pi/3 to infinity at angle pi/3.
        let c = Contour::angle_pair(Complex64::new(0.5, 0.0), std::f64::consts::FRAC_PI_3).unwrap();
        let opts = DiscretizeOptions { truncation_radius: 12.0, ..Default::default() };
        let grid = discretize(&c, &opts).unwrap();
        for (x, want) in [
            (0.0, 0.3550280538878172),
            (1.0, 0.1352924163128814),
            (2.5, 0.01572592338047048),
            (-1.0, 0.5355608832923521),
        ] {
            let v = grid.integrate(|w| (w.powu(3) / 3.0 - x * w).exp());
            assert!(v.im.abs() < 1e-10, "Im residue {} at x = {}", v.im, x);
            assert_abs_diff_eq!(v.re, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn rays_decay_makes_truncation_stable() {
        let c = Contour::angle_pair(Complex64::new(0.0, 0.0), 3.0 * std::f64::consts::FRAC_PI_4)
            .unwrap();
        let f = |z: Complex64| (-z.powu(3) / 3.0).exp();
        let v1 = discretize(&c, &DiscretizeOptions { truncation_radius: 20.0, ..Default::default() })
            .unwrap()
            .integrate(f);
        let v2 = discretize(&c, &DiscretizeOptions { truncation_radius: 30.0, ..Default::default() })
            .unwrap()
            .integrate(f);
        assert!((v1 - v2).norm() < 1e-12);
    }

    #[test]
    fn panel_order_convergence() {
        let c = Contour::angle_pair(Complex64::new(0.5, 0.0), std::f64::consts::FRAC_PI_3).unwrap();
        let f = |w: Complex64| (w.powu(3) / 3.0 - 1.5 * w).exp();
        let coarse = discretize(
            &c,
            &DiscretizeOptions { panel_order: 10, truncation_radius: 12.0, ..Default::default() },
        )
        .unwrap()
        .integrate(f);
        let fine = discretize(
            &c,
            &DiscretizeOptions { panel_order: 24, truncation_radius: 12.0, ..Default::default() },
        )
        .unwrap()
        .integrate(f);
        assert!((coarse - fine).norm() < 1e-9);
    }

    // chi(q right of contour) - chi(p right of contour) for an up-oriented
    // open contour, read off from the absolutely convergent difference of
    // Cauchy kernels.
    // truncated tails only decay like 1/R, hence the loose 5e-3 tolerances
    fn side_indicator(grid: &QuadratureGrid, p: Complex64, q: Complex64) -> f64 {
        let v = grid.integrate(|w| 1.0 / (w - p) - 1.0 / (w - q));
        assert!(v.im.abs() < 5e-3, "winding not real: {}", v);
        v.re
    }

    #[test]
    fn detour_separates_pole_pair() {
        let b = 0.6;
        let d = 0.2;
        let a = 0.3;
        let opts = DiscretizeOptions { truncation_radius: 400.0, ..Default::default() };
        for im in [0.0f64, 0.15, 0.5, 2.0, 10.0, 50.0, -0.3, -7.0] {
            let v = Complex64::new(a - im.abs(), im);
            let cont = Contour::detour(b, d, v).unwrap();
            let grid = discretize(
                &cont,
                &DiscretizeOptions { singularities: vec![v, v + 1.0], ..opts.clone() },
            )
            .unwrap();
            // v left, v + 1 right
            let s = side_indicator(&grid, v, v + 1.0);
            assert_abs_diff_eq!(s, 1.0, epsilon = 5e-3);
        }
    }

    #[test]
    fn plain_angle_pair_loses_the_pole() {
        // without the detour, v + 1 ends up on the wrong side once |Im v| is
        // large; this is what makes D_v necessary.
        let b = 0.6;
        let v = Complex64::new(0.3 - 10.0, 10.0);
        let c = Contour::angle_pair(Complex64::new(b, 0.0), std::f64::consts::FRAC_PI_4).unwrap();
        let grid = discretize(
            &c,
            &DiscretizeOptions { truncation_radius: 400.0, ..Default::default() },
        )
        .unwrap();
        let s = side_indicator(&grid, v, v + 1.0);
        assert_abs_diff_eq!(s, 0.0, epsilon = 5e-3);
    }

    #[test]
    fn bent_contour_avoids_origin() {
        let c = Contour::bent(0.0, 1.0).unwrap();
        let grid = discretize(
            &c,
            &DiscretizeOptions { truncation_radius: 12.0, ..Default::default() },
        )
        .unwrap();
        // pole at 0 sits left of the bent contour; 1.5 + 0i sits right of the
        // vertical segment
        let wide = discretize(
            &c,
            &DiscretizeOptions { truncation_radius: 400.0, ..Default::default() },
        )
        .unwrap();
        let s = side_indicator(&wide, Complex64::new(0.0, 0.0), Complex64::new(1.5, 0.0));
        assert_abs_diff_eq!(s, 1.0, epsilon = 5e-3);
        // Ai is recovered on the bent contour as well
        let v = grid.integrate(|w| (w.powu(3) / 3.0 - 1.0 * w).exp());
        assert_abs_diff_eq!(v.re, 0.1352924163128814, epsilon = 1e-9);
        assert!(v.im.abs() < 1e-10);
    }

    #[test]
    fn geometry_validation() {
        assert!(Contour::angle_pair(Complex64::new(0.0, 0.0), 0.0).is_err());
        assert!(Contour::detour(0.5, 0.0, Complex64::new(0.0, 0.0)).is_err());
        assert!(Contour::bent(0.0, -1.0).is_err());
        let c = Contour::bent(0.0, 1.0).unwrap();
        assert!(discretize(&c, &DiscretizeOptions { panel_order: 0, ..Default::default() }).is_err());
        assert!(
            discretize(&c, &DiscretizeOptions { truncation_radius: -1.0, ..Default::default() })
                .is_err()
        );
    }

    #[test]
    fn singularity_on_contour_rejected() {
        let c = Contour {
            pieces: vec![Piece::Segment {
                from: Complex64::new(-1.0, 0.0),
                to: Complex64::new(1.0, 0.0),
            }],
        };
        let opts = DiscretizeOptions {
            singularities: vec![Complex64::new(0.0, 0.0)],
            ..Default::default()
        };
        assert!(discretize(&c, &opts).is_err());
    }

    #[test]
    fn cubic_radius_monotone() {
        assert!(cubic_decay_radius(1.0, 1e-14) > cubic_decay_radius(1.0, 1e-6));
        assert!(cubic_decay_radius(0.1, 1e-10) > cubic_decay_radius(1.0, 1e-10));
        assert_eq!(cubic_decay_radius(0.0, 1e-10), 60.0);
    }
}
