//! One-band equilibrium measure of a polynomial potential.
//!
//! Everything is expressed through the affine map `s = m + r t`, `t in [-1, 1]`,
//! where the endpoint conditions and the density polynomial reduce to
//! Gauss-Chebyshev sums that are exact for polynomial integrands.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cheb_nodes, ChebGrid};
use crate::potential::{horner, poly_derivative, Potential};

/// Default node count of the cached measure grid.
pub const MU_NODES: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumMeasure {
    pub b1: f64,
    pub b2: f64,
    pub h_coeffs: Vec<f64>,
    pub ell: f64,
    pub potential_hash: String,
    pub potential: Potential,
    pub grid: ChebGrid,
    /// Chebyshev coefficients of h(m + r t)(1 - t^2).
    q_cheb: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EqmRepr {
    b1: f64,
    b2: f64,
    h: Vec<f64>,
    ell: f64,
    potential: Potential,
}

impl Serialize for EquilibriumMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EqmRepr {
            b1: self.b1,
            b2: self.b2,
            h: self.h_coeffs.clone(),
            ell: self.ell,
            potential: self.potential.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EquilibriumMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = EqmRepr::deserialize(d)?;
        EquilibriumMeasure::from_parts(r.potential, r.b1, r.b2, r.h, Some(r.ell))
            .map_err(serde::de::Error::custom)
    }
}

/// Gauss-Chebyshev node count for the exact polynomial moments.
fn moment_nodes(v: &Potential) -> usize {
    (2 * v.degree() + 8).max(32)
}

/// Endpoint residuals and Jacobian in (m, r) coordinates.
fn endpoint_system(v: &Potential, m: f64, r: f64, nodes: &[f64]) -> ([f64; 2], [[f64; 2]; 2], f64) {
    let d1 = v.derivative_coeffs(1);
    let d2 = v.derivative_coeffs(2);
    let w = PI / nodes.len() as f64;
    let (mut s0, mut s1, mut a0, mut a1, mut a2, mut scale) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &t in nodes {
        let x = m + r * t;
        let vp = horner(&d1, x);
        let vpp = horner(&d2, x);
        s0 += w * vp;
        s1 += w * t * vp;
        a0 += w * vpp;
        a1 += w * t * vpp;
        a2 += w * t * t * vpp;
        scale += w * vp.abs();
    }
    let f = [s0, r * s1 - 2.0 * PI];
    let j = [[a0, a1], [r * a1, s1 + r * a2]];
    (f, j, scale)
}

fn newton_support(v: &Potential, mut m: f64, mut r: f64, nodes: &[f64]) -> Option<(f64, f64, [f64; 2])> {
    let norm = |f: [f64; 2]| f[0].hypot(f[1]);
    let (mut f, mut j, mut scale) = endpoint_system(v, m, r, nodes);
    for _ in 0..200 {
        let tol = 1e-13 * (1.0 + scale);
        if f[0].abs() < tol && f[1].abs() < tol {
            return Some((m, r, f));
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dm = -(j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let dr = -(-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        let mut lambda = 1.0;
        let current = norm(f);
        loop {
            let (mn, rn) = (m + lambda * dm, r + lambda * dr);
            if rn > 0.0 {
                let (fn_, jn, sn) = endpoint_system(v, mn, rn, nodes);
                if norm(fn_) < current || lambda < 1e-12 {
                    if norm(fn_) >= current && (dm.abs() + dr.abs()) * lambda < 1e-15 * (1.0 + r) {
                        // stalled at rounding level
                        let tol = 1e-11 * (1.0 + sn);
                        return (fn_[0].abs() < tol && fn_[1].abs() < tol).then_some((mn, rn, fn_));
                    }
                    m = mn;
                    r = rn;
                    f = fn_;
                    j = jn;
                    scale = sn;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-14 {
                return None;
            }
        }
    }
    None
}

/// Symmetric starting radius from the leading monomial.
fn initial_radius(v: &Potential) -> f64 {
    let deg = v.degree();
    let c = *v.coeffs().last().unwrap();
    // E[t^{2l}] under the arcsine law is (2l-1)!!/(2l)!!
    let mut ratio = 1.0;
    for i in 1..=deg / 2 {
        ratio *= (2 * i - 1) as f64 / (2 * i) as f64;
    }
    (2.0 / (deg as f64 * c * ratio)).powf(1.0 / deg as f64)
}

/// Endpoints (b1, b2) of the one-band support.
pub fn solve_support(v: &Potential, init: Option<(f64, f64)>) -> Result<(f64, f64)> {
    solve_support_with(v, init, moment_nodes(v))
}

pub fn solve_support_with(v: &Potential, init: Option<(f64, f64)>, n_nodes: usize) -> Result<(f64, f64)> {
    let nodes = cheb_nodes(n_nodes);
    let r0 = initial_radius(v);
    let mut starts = Vec::new();
    if let Some((b1, b2)) = init {
        starts.push((0.5 * (b1 + b2), 0.5 * (b2 - b1)));
    }
    starts.push((0.0, r0));
    for &(m, r) in &starts {
        if r > 0.0 {
            if let Some((m, r, _)) = newton_support(v, m, r, &nodes) {
                return Ok((m - r, m + r));
            }
        }
    }
    // Coarse grid search, then Newton from the best candidates.
    let mut cands = Vec::new();
    let (nm, nr) = (81, 61);
    for i in 0..nm {
        let m = -4.0 * r0 + 8.0 * r0 * i as f64 / (nm - 1) as f64;
        for k in 0..nr {
            let r = r0 * 10f64.powf(-1.5 + 3.0 * k as f64 / (nr - 1) as f64);
            let (f, _, scale) = endpoint_system(v, m, r, &nodes);
            cands.push(((f[0].abs() + f[1].abs()) / (1.0 + scale), m, r));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut last = (0.0, r0, [f64::NAN; 2]);
    for &(_, m, r) in cands.iter().take(12) {
        if let Some((m, r, _)) = newton_support(v, m, r, &nodes) {
            return Ok((m - r, m + r));
        }
        let (f, _, _) = endpoint_system(v, m, r, &nodes);
        last = (m, r, f);
    }
    Err(Error::NewtonDiverged {
        b1: last.0 - last.1,
        b2: last.0 + last.1,
        r0: last.2[0],
        r1: last.2[1],
    })
}

/// Density polynomial h with Psi(x) = sqrt((b2-x)(x-b1)) h(x) / (2 pi).
pub fn compute_h(v: &Potential, b1: f64, b2: f64) -> Result<Vec<f64>> {
    let d = v.derivative_coeffs(1);
    let (m, r) = (0.5 * (b1 + b2), 0.5 * (b2 - b1));
    let nodes = cheb_nodes(moment_nodes(v));
    let w = PI / nodes.len() as f64;
    // M_q = int (m + r t)^q / sqrt(1 - t^2) dt
    let moments: Vec<f64> = (0..d.len())
        .map(|q| nodes.iter().map(|t| w * (m + r * t).powi(q as i32)).sum())
        .collect();
    let deg_h = d.len() - 2;
    let mut h = vec![0.0; deg_h + 1];
    for (j, hj) in h.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in (j + 1)..d.len() {
            s += d[k] * moments[k - 1 - j];
        }
        *hj = s / PI;
    }
    let expected = v.degree() - 2;
    if h.last().copied().unwrap_or(0.0) == 0.0 || deg_h != expected {
        let got = h.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        return Err(Error::DegreeMismatch { got, expected });
    }
    Ok(h)
}

/// Solves for the equilibrium measure of `v`.
pub fn equilibrium(v: &Potential) -> Result<EquilibriumMeasure> {
    equilibrium_with_init(v, None)
}

pub fn equilibrium_with_init(v: &Potential, init: Option<(f64, f64)>) -> Result<EquilibriumMeasure> {
    let (b1, b2) = solve_support(v, init)?;
    let h = compute_h(v, b1, b2)?;
    let eqm = EquilibriumMeasure::from_parts(v.clone(), b1, b2, h, None)?;
    let n = 400;
    let mut min_density = f64::INFINITY;
    for j in 1..n {
        let x = b1 + (b2 - b1) * j as f64 / n as f64;
        min_density = min_density.min(eqm.density(x));
    }
    if min_density < -1e-10 {
        return Err(Error::MultiBandSuspected(min_density));
    }
    Ok(eqm)
}

/// Coefficients of the Taylor expansion of a polynomial about `x`.
pub fn taylor_shift(c: &[f64], x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(c.len());
    let mut fact = 1.0;
    for k in 0..c.len() {
        if k > 0 {
            fact *= k as f64;
        }
        out.push(horner(&poly_derivative(c, k), x) / fact);
    }
    out
}

impl EquilibriumMeasure {
    /// Builds the measure from its parts. If `ell` is `None` it is computed.
    pub fn from_parts(
        potential: Potential,
        b1: f64,
        b2: f64,
        h_coeffs: Vec<f64>,
        ell: Option<f64>,
    ) -> Result<Self> {
        if !(b1.is_finite() && b2.is_finite() && b1 < b2) {
            return Err(Error::InvalidArgument(format!("bad support [{b1}, {b2}]")));
        }
        if h_coeffs.is_empty() || h_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("bad density polynomial".into()));
        }
        let (m, r) = (0.5 * (b1 + b2), 0.5 * (b2 - b1));
        // h(m + r t)(1 - t^2) is a polynomial of degree deg h + 2; its
        // Chebyshev coefficients are exact from deg + 1 first-kind samples.
        let n = h_coeffs.len() + 3;
        let theta: Vec<f64> = (0..n).map(|j| PI * (j as f64 + 0.5) / n as f64).collect();
        let vals: Vec<f64> = theta
            .iter()
            .map(|th| {
                let t = th.cos();
                horner(&h_coeffs, m + r * t) * (1.0 - t * t)
            })
            .collect();
        let mut q = vec![0.0; n];
        for (k, qk) in q.iter_mut().enumerate() {
            let s: f64 = theta.iter().zip(&vals).map(|(th, v)| v * (k as f64 * th).cos()).sum();
            *qk = 2.0 * s / n as f64;
        }
        q[0] *= 0.5;
        let mut eqm = Self {
            b1,
            b2,
            h_coeffs,
            ell: 0.0,
            potential_hash: potential.hash(),
            potential,
            grid: ChebGrid::new(b1, b2, MU_NODES),
            q_cheb: q,
        };
        eqm.ell = match ell {
            Some(l) => l,
            None => eqm.lagrange_constant_at(0.5 * (b1 + b2)),
        };
        Ok(eqm)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.b1 + self.b2)
    }

    pub fn radius(&self) -> f64 {
        0.5 * (self.b2 - self.b1)
    }

    /// Right soft edge e = b2.
    pub fn edge(&self) -> f64 {
        self.b2
    }

    pub fn h(&self, x: f64) -> f64 {
        horner(&self.h_coeffs, x)
    }

    /// Density Psi(x), zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        if x <= self.b1 || x >= self.b2 {
            return 0.0;
        }
        ((self.b2 - x) * (x - self.b1)).sqrt() * self.h(x) / (2.0 * PI)
    }

    /// Total mass, which should be 1.
    pub fn mass(&self) -> f64 {
        let r = self.radius();
        r * r * self.q_cheb[0] / 2.0
    }

    /// int f dmu over the cached grid.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.grid
            .nodes
            .iter()
            .zip(&self.grid.weights)
            .map(|(&x, &w)| w * self.h(x) * f(x))
            .sum()
    }

    /// int log|x - s| dmu(s) for real x, exact via Chebyshev log-moments.
    pub fn log_potential(&self, x: f64) -> f64 {
        let (m, r) = (self.center(), self.radius());
        let y = (x - m) / r;
        let mut s = 0.0;
        if y.abs() <= 1.0 {
            let (mut tkm1, mut tk) = (1.0, y);
            s += self.q_cheb[0] * (-PI * 2f64.ln());
            for (k, &c) in self.q_cheb.iter().enumerate().skip(1) {
                s += c * (-PI / k as f64) * tk;
                let next = 2.0 * y * tk - tkm1;
                tkm1 = tk;
                tk = next;
            }
        } else {
            let ay = y.abs();
            let root = ((ay - 1.0) * (ay + 1.0)).sqrt();
            s += self.q_cheb[0] * PI * ((ay + root) / 2.0).ln();
            let rho = 1.0 / (ay + root);
            let sg = y.signum();
            let mut p = 1.0;
            for (k, &c) in self.q_cheb.iter().enumerate().skip(1) {
                p *= sg * rho;
                s += c * (-PI / k as f64) * p;
            }
        }
        r.ln() * self.mass() + r * r / (2.0 * PI) * s
    }

    /// g(z) = int log(z - s) dmu(s), principal branch, z off (-inf, b2].
    pub fn g_value(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 && z.re <= self.b2 {
            return Err(Error::BranchCut(format!("{z}")));
        }
        let (m, r) = (self.center(), self.radius());
        let zeta = (z - m) / r;
        let root = (zeta - 1.0).sqrt() * (zeta + 1.0).sqrt();
        let mut s = self.q_cheb[0] * PI * ((zeta + root) / 2.0).ln();
        let rho = zeta - root;
        let mut p = Complex64::new(1.0, 0.0);
        for (k, &c) in self.q_cheb.iter().enumerate().skip(1) {
            p *= rho;
            s += p * (c * (-PI / k as f64));
        }
        Ok(r.ln() * self.mass() + s * (r * r / (2.0 * PI)))
    }

    /// Real g(x) for x > b2.
    pub fn g_real(&self, x: f64) -> f64 {
        self.log_potential(x)
    }

    /// Resolvent int dmu(s) / (z - s) for z off the support.
    pub fn g_prime_complex(&self, z: Complex64) -> Complex64 {
        let root = (z - self.b1).sqrt() * (z - self.b2).sqrt();
        let vp = self.potential.eval_complex(z, 1);
        let h = crate::potential::horner_complex(&self.h_coeffs, z);
        (vp - root * h) * 0.5
    }

    /// g'(x) for real x > b2.
    pub fn g1(&self, x: f64) -> f64 {
        let root = ((x - self.b1) * (x - self.b2)).sqrt();
        0.5 * (self.potential.eval(x, 1) - root * self.h(x))
    }

    /// g''(x) for real x > b2.
    pub fn g2(&self, x: f64) -> f64 {
        let root = ((x - self.b1) * (x - self.b2)).sqrt();
        let droot = (2.0 * x - self.b1 - self.b2) / (2.0 * root);
        let hp = horner(&poly_derivative(&self.h_coeffs, 1), x);
        0.5 * (self.potential.eval(x, 2) - droot * self.h(x) - root * hp)
    }

    /// Taylor coefficients of g' about a real x > b2, up to power `n`.
    pub fn g_prime_taylor(&self, x: f64, n: usize) -> Vec<f64> {
        // R(x + e) = sqrt(P(x + e)) with P(y) = (y - b1)(y - b2).
        let p = [
            (x - self.b1) * (x - self.b2),
            2.0 * x - self.b1 - self.b2,
            1.0,
        ];
        let mut rc = vec![0.0; n + 1];
        rc[0] = p[0].sqrt();
        for k in 1..=n {
            let mut s = if k < 3 { p[k] } else { 0.0 };
            for i in 1..k {
                s -= rc[i] * rc[k - i];
            }
            rc[k] = s / (2.0 * rc[0]);
        }
        let ht = taylor_shift(&self.h_coeffs, x);
        let vt = taylor_shift(&self.potential.derivative_coeffs(1), x);
        (0..=n)
            .map(|k| {
                let mut rh = 0.0;
                for i in 0..=k {
                    if let Some(hv) = ht.get(k - i) {
                        rh += rc[i] * hv;
                    }
                }
                0.5 * (vt.get(k).copied().unwrap_or(0.0) - rh)
            })
            .collect()
    }

    /// g^{(order)}(x) for real x > b2 and order >= 1.
    pub fn g_deriv(&self, x: f64, order: usize) -> Result<f64> {
        if !(x > self.b2) {
            return Err(Error::BranchCut(format!("{x}")));
        }
        if order == 0 {
            return Ok(self.g_real(x));
        }
        let t = self.g_prime_taylor(x, order - 1);
        let mut fact = 1.0;
        for k in 1..order {
            fact *= k as f64;
        }
        Ok(t[order - 1] * fact)
    }

    fn lagrange_constant_at(&self, x0: f64) -> f64 {
        2.0 * self.log_potential(x0) - self.potential.eval(x0, 0)
    }

    /// Lagrange constant evaluated at an arbitrary support point.
    pub fn lagrange_constant(&self, x0: Option<f64>) -> f64 {
        self.lagrange_constant_at(x0.unwrap_or_else(|| self.center()))
    }
}

/// Interior residual and exterior margin of the variational conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalReport {
    pub interior_residual: f64,
    pub exterior_min_margin: f64,
    pub exterior_ok: bool,
}

pub fn verify_variational(eqm: &EquilibriumMeasure, v: &Potential, n_interior: usize, n_exterior: usize) -> VariationalReport {
    let (b1, b2) = (eqm.b1, eqm.b2);
    let w = b2 - b1;
    let functional = |x: f64| 2.0 * eqm.log_potential(x) - v.eval(x, 0);
    let mut res = 0.0f64;
    for j in 1..=n_interior {
        let x = b1 + w * j as f64 / (n_interior + 1) as f64;
        res = res.max((functional(x) - eqm.ell).abs());
    }
    let horizon = 10.0 * w;
    let mut margin = f64::INFINITY;
    for j in 1..=n_exterior {
        let d = horizon * j as f64 / n_exterior as f64;
        for x in [b2 + d, b1 - d] {
            margin = margin.min(eqm.ell - functional(x));
        }
    }
    VariationalReport {
        interior_residual: res,
        exterior_min_margin: margin,
        exterior_ok: margin > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_gl;

    fn v(c: &[f64]) -> Potential {
        Potential::new(c.to_vec()).unwrap()
    }

    #[test]
    fn semicircle_support_and_h() {
        let eqm = equilibrium(&v(&[0.0, 0.0, 1.0])).unwrap();
        assert!((eqm.b2 - 2f64.sqrt()).abs() < 1e-12);
        assert!((eqm.b1 + 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(eqm.h_coeffs.len(), 1);
        assert!((eqm.h_coeffs[0] - 2.0).abs() < 1e-12);
        assert!((eqm.ell - (-1.0 - 2f64.ln())).abs() < 1e-12);
        assert!((eqm.mass() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn scaled_quadratic() {
        let eqm = equilibrium(&v(&[0.0, 0.0, 2.0])).unwrap();
        assert!((eqm.b1 + 1.0).abs() < 1e-12 && (eqm.b2 - 1.0).abs() < 1e-12);
        assert!((eqm.h_coeffs[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn init_independence() {
        let p = v(&[0.0, 0.0, 1.0]);
        let a = solve_support(&p, None).unwrap();
        let b = solve_support(&p, Some((-1.4, 1.4))).unwrap();
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn quartic_needs_grid_fallback_and_solves() {
        let p = v(&[0.0, 0.11418, 0.37448, -0.16736, 0.02093]);
        let eqm = equilibrium(&p).unwrap();
        assert!((eqm.center() - 1.73003165).abs() < 1e-6, "{}", eqm.center());
        assert!((eqm.radius() - 3.17558995).abs() < 1e-6, "{}", eqm.radius());
        assert_eq!(eqm.h_coeffs.len(), 3);
        assert!((eqm.mass() - 1.0).abs() < 1e-12);
        let rep = verify_variational(&eqm, &p, 200, 200);
        assert!(rep.interior_residual < 1e-10, "{rep:?}");
        assert!(rep.exterior_ok);
    }

    #[test]
    fn density_values() {
        let eqm = equilibrium(&v(&[0.0, 0.0, 1.0])).unwrap();
        assert!((eqm.density(0.0) - 2f64.sqrt() / PI).abs() < 1e-13);
        assert_eq!(eqm.density(eqm.b2), 0.0);
        assert_eq!(eqm.density(eqm.b2 + 1.0), 0.0);
    }

    #[test]
    fn log_potential_matches_direct_quadrature() {
        let p = v(&[0.0, 0.11418, 0.37448, -0.16736, 0.02093]);
        let eqm = equilibrium(&p).unwrap();
        // theta substitution keeps the log singularity integrable; split at x
        for x in [eqm.b2 + 0.7, eqm.b1 - 2.0, eqm.center() + 0.3] {
            let f = |th: f64| {
                let s = eqm.center() + eqm.radius() * th.cos();
                (x - s).abs().ln() * eqm.density(s) * eqm.radius() * th.sin()
            };
            let direct = if x > eqm.b1 && x < eqm.b2 {
                // t = L u^4 on each side of the log singularity
                let thx = ((x - eqm.center()) / eqm.radius()).acos();
                let side = |len: f64, sign: f64| {
                    integrate_gl(|u: f64| 4.0 * len * u.powi(3) * f(thx + sign * len * u.powi(4)), 0.0, 1.0, 50)
                };
                side(thx, -1.0) + side(PI - thx, 1.0)
            } else {
                integrate_gl(f, 0.0, PI, 200)
            };
            assert!((direct - eqm.log_potential(x)).abs() < 1e-9, "{x}: {direct} vs {}", eqm.log_potential(x));
        }
    }

    #[test]
    fn complex_g_consistent_with_real() {
        let p = v(&[0.0, 0.11418, 0.37448, -0.16736, 0.02093]);
        let eqm = equilibrium(&p).unwrap();
        let x = eqm.b2 + 0.5;
        let gc = eqm.g_value(Complex64::new(x, 0.0)).unwrap();
        assert!((gc.re - eqm.log_potential(x)).abs() < 1e-12 && gc.im.abs() < 1e-14);
        // derivative of complex g equals the resolvent
        let z = Complex64::new(0.3, 0.8);
        let hstep = 1e-5;
        let fd = (eqm.g_value(z + hstep).unwrap() - eqm.g_value(z - hstep).unwrap()) / (2.0 * hstep);
        assert!((fd - eqm.g_prime_complex(z)).norm() < 1e-8);
        assert!(eqm.g_value(Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn semicircle_resolvent_derivatives() {
        let eqm = equilibrium(&v(&[0.0, 0.0, 1.0])).unwrap();
        let g1 = eqm.g_deriv(2.0, 1).unwrap();
        let g2 = eqm.g_deriv(2.0, 2).unwrap();
        assert!((g1 - (2.0 - 2f64.sqrt())).abs() < 1e-13);
        assert!((g2 - (1.0 - 2f64.sqrt())).abs() < 1e-13);
        // third derivative of z - sqrt(z^2 - 2): 2 z / (z^2-2)^{3/2}... check by FD
        let h = 1e-4;
        let fd = (eqm.g_deriv(2.0 + h, 2).unwrap() - eqm.g_deriv(2.0 - h, 2).unwrap()) / (2.0 * h);
        assert!((fd - eqm.g_deriv(2.0, 3).unwrap()).abs() < 1e-7);
    }

    #[test]
    fn lagrange_invariance_and_perturbation() {
        let p = v(&[0.0, 0.0, 1.0]);
        let mut eqm = equilibrium(&p).unwrap();
        let l0 = eqm.lagrange_constant(Some(0.0));
        let l1 = eqm.lagrange_constant(Some(0.5));
        assert!((l0 - l1).abs() < 1e-12);
        let rep = verify_variational(&eqm, &p, 200, 200);
        assert!(rep.interior_residual < 1e-12 && rep.exterior_ok);
        eqm.ell += 0.1;
        let rep = verify_variational(&eqm, &p, 200, 200);
        assert!((rep.interior_residual - 0.1).abs() < 1e-10);
    }

    #[test]
    fn affine_covariance() {
        let p = v(&[0.0, 0.0, 1.0]);
        let e1 = equilibrium(&p).unwrap();
        let e2 = equilibrium(&p.rescaled_argument(2.0).unwrap()).unwrap();
        assert!((e2.b2 - e1.b2 / 2.0).abs() < 1e-12);
        assert!((e2.b1 - e1.b1 / 2.0).abs() < 1e-12);
        // density transforms as t Psi(t x)
        assert!((e2.density(0.3) - 2.0 * e1.density(0.6)).abs() < 1e-12);
    }

    #[test]
    fn resolution_doubling() {
        let p = v(&[0.0, 0.11418, 0.37448, -0.16736, 0.02093]);
        let a = solve_support_with(&p, None, 32).unwrap();
        let b = solve_support_with(&p, None, 64).unwrap();
        assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10);
    }

    #[test]
    fn json_roundtrip() {
        let eqm = equilibrium(&v(&[0.0, 0.0, 1.0])).unwrap();
        let s = serde_json::to_string(&eqm).unwrap();
        let back: EquilibriumMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(back.b2, eqm.b2);
        assert_eq!(back.ell, eqm.ell);
    }
}
