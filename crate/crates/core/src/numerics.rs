//! Quadrature kernels: Gauss-Legendre panels, Gauss-Chebyshev grids,
//! Chebyshev expansions with exact finite-Hilbert-transform identities, and
//! contour integration along the Sigma/Pi/Gamma/I families.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};

/// Gauss-Legendre rule of order `n` on [-1, 1], nodes ascending.
/// First 8 bytes (hex) of the SHA-256 of the little-endian bit patterns.
pub fn hash_f64s(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Cached 32-point rule used for every contour and panel integral.
pub fn gl32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

/// Composite 32-point Gauss-Legendre over `panels` equal panels.
pub fn integrate_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gl32();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            s += wi * f(mid + 0.5 * h * xi);
        }
        total += 0.5 * h * s;
    }
    total
}

/// Adaptive bisection on 32-point panels until two levels agree to `tol`
/// (absolute), with a cap on the recursion depth.
pub fn adaptive_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b, integrate_gl(f, a, b, 1), tol, 0u32)];
    let mut total = 0.0;
    while let Some((lo, hi, whole, tol, depth)) = stack.pop() {
        let m = 0.5 * (lo + hi);
        let left = integrate_gl(f, lo, m, 1);
        let right = integrate_gl(f, m, hi, 1);
        let err = (left + right - whole).abs();
        if depth >= 24 || err <= tol.max(1e-15 * (left + right).abs()) {
            total += left + right;
        } else {
            stack.push((lo, m, left, 0.5 * tol, depth + 1));
            stack.push((m, hi, right, 0.5 * tol, depth + 1));
        }
    }
    total
}

/// Chebyshev points of the first kind on [-1, 1], ascending.
pub fn cheb_nodes(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| -(PI * (j as f64 + 0.5) / m as f64).cos())
        .collect()
}

/// Gauss-Chebyshev (first kind) nodes mapped to [b1, b2], with weights
/// that absorb the square-root factor of a one-band density:
/// `integral f dmu = sum w_j f(x_j) h(x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    pub m: usize,
    pub b1: f64,
    pub b2: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ChebGrid {
    pub fn new(b1: f64, b2: f64, m: usize) -> Self {
        let mid = 0.5 * (b1 + b2);
        let r = 0.5 * (b2 - b1);
        let t = cheb_nodes(m);
        let scale = r * r / (2.0 * PI) * (PI / m as f64);
        let nodes = t.iter().map(|ti| mid + r * ti).collect();
        let weights = t.iter().map(|ti| scale * (1.0 - ti * ti)).collect();
        Self { m, b1, b2, nodes, weights }
    }
}

/// int f dmu for the equilibrium measure, on an `m`-node grid.
pub fn integrate_mu<F: Fn(f64) -> f64>(f: F, eqm: &EquilibriumMeasure, m: usize) -> Result<f64> {
    let grid;
    let g = if m == eqm.grid.m {
        &eqm.grid
    } else {
        grid = ChebGrid::new(eqm.b1, eqm.b2, m);
        &grid
    };
    let mut total = 0.0;
    for (&x, &w) in g.nodes.iter().zip(&g.weights) {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NonFiniteIntegrand(x));
        }
        total += w * eqm.h(x) * fx;
    }
    Ok(total)
}

/// Chebyshev coefficients of a function on [-1, 1] from `n` first-kind samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebExpansion {
    pub coeffs: Vec<f64>,
}

impl ChebExpansion {
    pub fn fit<F: Fn(f64) -> f64>(f: F, n: usize) -> Self {
        let theta: Vec<f64> = (0..n).map(|j| PI * (j as f64 + 0.5) / n as f64).collect();
        let vals: Vec<f64> = theta.iter().map(|t| f(t.cos())).collect();
        let mut coeffs = vec![0.0; n];
        for (k, c) in coeffs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (t, v) in theta.iter().zip(&vals) {
                s += v * (k as f64 * t).cos();
            }
            *c = 2.0 * s / n as f64;
        }
        coeffs[0] *= 0.5;
        Self { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn eval(&self, x: f64) -> f64 {
        clenshaw_t(&self.coeffs, x)
    }

    /// Largest magnitude among the last eighth of the coefficients,
    /// relative to the largest coefficient.
    pub fn tail_ratio(&self) -> f64 {
        let n = self.coeffs.len();
        let head = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if head == 0.0 {
            return 0.0;
        }
        let tail = self.coeffs[n - n.div_ceil(8)..]
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs()));
        tail / head
    }

    /// Chebyshev coefficients of the derivative.
    pub fn derivative(&self) -> Self {
        let n = self.coeffs.len();
        if n <= 1 {
            return Self { coeffs: vec![0.0] };
        }
        let mut d = vec![0.0; n + 1];
        for k in (1..n).rev() {
            d[k - 1] = d[k + 1] + 2.0 * k as f64 * self.coeffs[k];
        }
        d[0] *= 0.5;
        d.truncate(n - 1);
        Self { coeffs: d }
    }

    /// Coefficients in the second-kind basis U_j.
    pub fn to_u_basis(&self) -> Vec<f64> {
        let n = self.coeffs.len();
        let mut d = vec![0.0; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            match k {
                0 => d[0] += c,
                1 => d[1] += 0.5 * c,
                _ => {
                    d[k] += 0.5 * c;
                    d[k - 2] -= 0.5 * c;
                }
            }
        }
        d
    }

    /// PV integral of f(s) w(s) / (s - x) over [-1, 1] with the given weight.
    pub fn pv(&self, x: f64, weight: PvWeight) -> Result<f64> {
        if !(x.abs() < 1.0 - 1e-12) {
            return Err(Error::EvaluationPointOutsideOpenInterval(x));
        }
        Ok(match weight {
            PvWeight::InvSqrt => {
                // PV int T_k / ((s-x) sqrt(1-s^2)) = pi U_{k-1}(x)
                let shifted: Vec<f64> = self.coeffs.iter().skip(1).copied().collect();
                PI * clenshaw_u(&shifted, x)
            }
            PvWeight::Sqrt => {
                // PV int sqrt(1-s^2) U_j / (s-x) = -pi T_{j+1}(x)
                let d = self.to_u_basis();
                let mut shifted = vec![0.0; d.len() + 1];
                shifted[1..].copy_from_slice(&d);
                -PI * clenshaw_t(&shifted, x)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvWeight {
    InvSqrt,
    Sqrt,
}

/// Default number of Chebyshev modes for principal-value integrals.
pub const PV_MODES: usize = 256;

/// PV integral over [-1, 1] of f(s) w(s) / (s - x).
pub fn pv_cauchy<F: Fn(f64) -> f64>(f: F, x: f64, weight: PvWeight) -> Result<f64> {
    if !(x.abs() < 1.0 - 1e-12) {
        return Err(Error::EvaluationPointOutsideOpenInterval(x));
    }
    ChebExpansion::fit(f, PV_MODES).pv(x, weight)
}

/// Sum c_k T_k(x).
pub fn clenshaw_t(c: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    match c.first() {
        Some(&c0) => c0 + x * b1 - b2,
        None => 0.0,
    }
}

/// Sum c_k U_k(x).
pub fn clenshaw_u(c: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    b1
}

/// Contour families. Each is symmetric about the real axis and winds
/// counterclockwise around the half-line (-inf, anchor].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContourKind {
    /// 135-degree segment of length s1, vertical rise to height s2, then a ray to the left.
    Sigma { s1: f64, s2: f64 },
    /// Vertical segment of height s, then a ray to the left.
    Pi { s: f64 },
    /// Two 135-degree rays of length s (infinite if s is infinite).
    Gamma { s: f64 },
    /// Vertical segment from anchor - is to anchor + is.
    I { s: f64 },
    /// Full circle of the given radius around the anchor.
    Circle { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub kind: ContourKind,
    pub anchor: f64,
    pub truncation: f64,
}

pub const DEFAULT_TRUNCATION: f64 = 1e13;

impl ContourSpec {
    pub fn new(kind: ContourKind, anchor: f64) -> Result<Self> {
        let spec = Self { kind, anchor, truncation: DEFAULT_TRUNCATION };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ContourKind::Sigma { s1, s2 } => s1 > 0.0 && s2 > s1 * FRAC_1_SQRT_2,
            ContourKind::Pi { s } | ContourKind::I { s } => s > 0.0 && s.is_finite(),
            ContourKind::Gamma { s } => s > 0.0,
            ContourKind::Circle { radius } => radius > 0.0 && radius.is_finite(),
        };
        if ok && self.anchor.is_finite() && self.truncation > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidContour(format!("{self:?}")))
        }
    }

    /// Upper-half pieces in traversal order away from the real axis.
    fn pieces(&self) -> Vec<Piece> {
        let x = Complex64::new(self.anchor, 0.0);
        let left = Complex64::new(-1.0, 0.0);
        let diag = Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        match self.kind {
            ContourKind::Sigma { s1, s2 } => {
                let p1 = x + diag * s1;
                let p2 = Complex64::new(p1.re, s2);
                vec![
                    Piece::Segment(x, p1),
                    Piece::Segment(p1, p2),
                    Piece::Ray(p2, left),
                ]
            }
            ContourKind::Pi { s } => {
                let p1 = x + Complex64::new(0.0, s);
                vec![Piece::Segment(x, p1), Piece::Ray(p1, left)]
            }
            ContourKind::Gamma { s } if s.is_finite() => vec![Piece::Segment(x, x + diag * s)],
            ContourKind::Gamma { .. } => vec![Piece::Ray(x, diag)],
            ContourKind::I { s } => vec![Piece::Segment(x, x + Complex64::new(0.0, s))],
            ContourKind::Circle { .. } => Vec::new(),
        }
    }
}

enum Piece {
    Segment(Complex64, Complex64),
    Ray(Complex64, Complex64),
}

/// (1/2 pi i) times the integral of `g` along the contour. `m` is the number
/// of 32-point panels per finite segment; rays use geometrically growing panels.
pub fn contour_integral<G: Fn(Complex64) -> Complex64>(
    g: G,
    spec: &ContourSpec,
    m: usize,
) -> Result<Complex64> {
    spec.validate()?;
    let m = m.max(1);
    let i2pi = Complex64::new(0.0, 2.0 * PI);
    if let ContourKind::Circle { radius } = spec.kind {
        let npts = 32 * m;
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..npts {
            let th = 2.0 * PI * j as f64 / npts as f64;
            let e = Complex64::from_polar(radius, th);
            // dw = i e dtheta
            sum += g(spec.anchor + e) * e;
        }
        return Ok(sum / npts as f64);
    }
    let (gx, gw) = gl32();
    // Upper-half parametrization w(t) with derivative dw; the mirror half
    // contributes -g(conj w) conj(dw).
    let combined = |w: Complex64, dw: Complex64| g(w) * dw - g(w.conj()) * dw.conj();
    let mut total = Complex64::new(0.0, 0.0);
    let mut mass = 0.0;
    for piece in spec.pieces() {
        match piece {
            Piece::Segment(a, b) => {
                let d = b - a;
                for p in 0..m {
                    let lo = p as f64 / m as f64;
                    let hw = 0.5 / m as f64;
                    let mut s = Complex64::new(0.0, 0.0);
                    for (xi, wi) in gx.iter().zip(gw) {
                        let t = lo + hw * (1.0 + xi);
                        s += combined(a + d * t, d) * *wi;
                    }
                    total += s * hw;
                    mass += (s * hw).norm();
                }
            }
            Piece::Ray(start, dir) => {
                let mut lo = 0.0;
                let mut h = 0.25;
                let mut last = f64::INFINITY;
                while lo < spec.truncation {
                    let hi = (lo + h).min(spec.truncation);
                    let hw = 0.5 * (hi - lo);
                    let mut s = Complex64::new(0.0, 0.0);
                    for (xi, wi) in gx.iter().zip(gw) {
                        let t = lo + hw * (1.0 + xi);
                        s += combined(start + dir * t, dir) * *wi;
                    }
                    total += s * hw;
                    mass += (s * hw).norm();
                    lo = hi;
                    h *= 1.5;
                    last = combined(start + dir * lo, dir).norm() * lo.max(1.0);
                }
                let scale = total.norm().max(mass).max(1e-300);
                if !(last <= 1e-12 * scale) {
                    return Err(Error::TailNotDecaying { magnitude: last });
                }
            }
        }
    }
    Ok(total / i2pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(32);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(62)).sum();
        assert!((s - 2.0 / 63.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let (x5, _) = gauss_legendre(5);
        assert_eq!(x5[2], 0.0);
    }

    #[test]
    fn pv_constant_inv_sqrt_vanishes() {
        for x in [-0.7, 0.0, 0.3, 0.9] {
            let v = pv_cauchy(|_| 1.0, x, PvWeight::InvSqrt).unwrap();
            assert!(v.abs() < 1e-12, "{x}: {v}");
        }
    }

    #[test]
    fn pv_airfoil_values() {
        let v = pv_cauchy(|_| 1.0, 0.5, PvWeight::Sqrt).unwrap();
        assert!((v + PI / 2.0).abs() < 1e-13);
        let v = pv_cauchy(|s| s, 0.0, PvWeight::Sqrt).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-13);
    }

    /// Symmetric-excision PV with Richardson extrapolation in epsilon.
    fn pv_excision(f: &dyn Fn(f64) -> f64, x: f64, eps: f64) -> f64 {
        let theta = |a: f64, b: f64| {
            integrate_gl(|phi: f64| { let s = phi.sin(); f(s) * phi.cos() / (s - x) }, a, b, 400)
        };
        let left = theta(-PI / 2.0, (x - eps).asin());
        let right = theta((x + eps).asin(), PI / 2.0);
        left + right
    }

    #[test]
    fn pv_matches_excision_oracle() {
        let x = 0.37;
        let rich = |f: &dyn Fn(f64) -> f64| {
            // excision error is linear in eps to leading order
            let e1 = pv_excision(f, x, 1e-3);
            let e2 = pv_excision(f, x, 5e-4);
            2.0 * e2 - e1
        };
        let with_sqrt = rich(&|s: f64| (1.3 * s).exp() * (1.0 - s * s).sqrt());
        let spectral = pv_cauchy(|s| (1.3 * s).exp(), x, PvWeight::Sqrt).unwrap();
        assert!((with_sqrt - spectral).abs() < 1e-7, "{with_sqrt} vs {spectral}");
        let with_inv = rich(&|s: f64| (1.3 * s).exp() / (1.0 - s * s).sqrt());
        let spectral = pv_cauchy(|s| (1.3 * s).exp(), x, PvWeight::InvSqrt).unwrap();
        assert!((with_inv - spectral).abs() < 1e-7, "{with_inv} vs {spectral}");
    }

    #[test]
    fn pv_rejects_endpoint() {
        assert!(matches!(
            pv_cauchy(|s| s, 1.0, PvWeight::Sqrt),
            Err(Error::EvaluationPointOutsideOpenInterval(_))
        ));
    }

    #[test]
    fn cheb_grid_moments() {
        let g = ChebGrid::new(-2f64.sqrt(), 2f64.sqrt(), 64);
        let h = 2.0;
        let m0: f64 = g.weights.iter().map(|w| w * h).sum();
        let m2: f64 = g.weights.iter().zip(&g.nodes).map(|(w, x)| w * h * x * x).sum();
        assert!((m0 - 1.0).abs() < 1e-14);
        assert!((m2 - 0.5).abs() < 1e-14);
        assert!(g.nodes.windows(2).all(|p| p[0] < p[1]));
        assert!(g.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn integrate_mu_semicircle() {
        let v = crate::potential::Potential::new(vec![0.0, 0.0, 1.0]).unwrap();
        let eqm = crate::equilibrium::equilibrium(&v).unwrap();
        assert!((integrate_mu(|_| 1.0, &eqm, 512).unwrap() - 1.0).abs() < 1e-13);
        assert!(integrate_mu(|x| x, &eqm, 512).unwrap().abs() < 1e-14);
        assert!((integrate_mu(|x| x * x, &eqm, 64).unwrap() - 0.5).abs() < 1e-13);
        // Riemann-sum oracle on the density itself
        let n = 200_000;
        let w = eqm.b2 - eqm.b1;
        let riemann: f64 = (0..n)
            .map(|j| {
                let x = eqm.b1 + w * (j as f64 + 0.5) / n as f64;
                x * x * eqm.density(x) * w / n as f64
            })
            .sum();
        assert!((riemann - 0.5).abs() < 1e-6);
        assert!(integrate_mu(|x| 1.0 / x, &eqm, 64).is_ok());
        assert!(matches!(integrate_mu(|_| f64::NAN, &eqm, 8), Err(Error::NonFiniteIntegrand(_))));
    }

    #[test]
    fn derivative_of_expansion() {
        let e = ChebExpansion::fit(|x| (2.0 * x).sin(), 64);
        let d = e.derivative();
        for x in [-0.9, 0.1, 0.6] {
            assert!((d.eval(x) - 2.0 * (2.0 * x).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn residue_of_inverse() {
        let spec = ContourSpec::new(ContourKind::Pi { s: 1.0 }, 1.0).unwrap();
        let v = contour_integral(|w| 1.0 / w, &spec, 8).unwrap();
        assert!((v - 1.0).norm() < 1e-10, "{v}");
        let spec = ContourSpec::new(ContourKind::Sigma { s1: 1.0, s2: 2.0 }, 0.5).unwrap();
        let v = contour_integral(|w| 1.0 / (w * w), &spec, 8).unwrap();
        assert!(v.norm() < 1e-10, "{v}");
    }

    #[test]
    fn hankel_reciprocal_gamma() {
        let spec = ContourSpec::new(ContourKind::Gamma { s: f64::INFINITY }, 1.0).unwrap();
        let v = contour_integral(|w| w.exp() / w, &spec, 8).unwrap();
        assert!((v - 1.0).norm() < 1e-10, "{v}");
        // 1/Gamma(2.5) via w^{-2.5}
        let v = contour_integral(|w| w.exp() * w.powf(-2.5), &spec, 8).unwrap();
        let expect = 1.0 / statrs::function::gamma::gamma(2.5);
        assert!((v.re - expect).abs() < 1e-10 && v.im.abs() < 1e-14);
    }

    #[test]
    fn circle_extracts_coefficients() {
        let spec = ContourSpec::new(ContourKind::Circle { radius: 0.5 }, 0.0).unwrap();
        // third Taylor coefficient of exp is 1/6
        let v = contour_integral(|w| w.exp() / w.powi(4), &spec, 4).unwrap();
        assert!((v.re - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn tail_check_fires() {
        let spec = ContourSpec::new(ContourKind::Pi { s: 1.0 }, 0.0).unwrap();
        assert!(matches!(
            contour_integral(|w| w.sqrt(), &spec, 4),
            Err(Error::TailNotDecaying { .. })
        ));
    }

    #[test]
    fn invalid_sigma_rejected() {
        assert!(ContourSpec::new(ContourKind::Sigma { s1: 2.0, s2: 1.0 }, 0.0).is_err());
    }
}
