//! Exponents G and H, the point c(a), the critical spike a_c, maximizers of G
//! and regime classification.

use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};
use crate::potential::{bisect, horner, poly_derivative};

/// Derivatives below this magnitude count as vanishing when classifying 2k.
pub const ZERO_DERIVATIVE: f64 = 1e-7;
/// Default G-value tie tolerance for secondary-critical detection.
pub const TIE_TOL: f64 = 1e-8;
/// Number of log-spaced grid points in the maximizer scan.
pub const SCAN_POINTS: usize = 2000;
/// Scan resolution of the critical-value search.
pub const CRITICAL_SCAN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    SupercriticalUnique,
    SecondaryCritical,
    AtCritical,
    Unresolved,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::SupercriticalUnique => "supercritical_unique",
            Regime::SecondaryCritical => "secondary_critical",
            Regime::AtCritical => "at_critical",
            Regime::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maximizer {
    pub x: f64,
    pub g: f64,
    /// Order 2k of the first nonvanishing derivative of G.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub a: f64,
    pub regime: Regime,
    pub c_of_a: f64,
    pub e: f64,
    pub a_c: f64,
    pub maximizers: Vec<Maximizer>,
    pub g_max: f64,
    pub h_at_c: f64,
    /// Limit of the largest eigenvalue where the theory gives one.
    pub predicted_location: Option<f64>,
}

/// Threshold 1/2 V'(e) above which c(a) = e.
pub fn edge_threshold(eqm: &EquilibriumMeasure) -> f64 {
    0.5 * eqm.potential.eval(eqm.b2, 1)
}

/// c(a): the root of g'(c) = a beyond the edge, or e when a >= V'(e)/2.
pub fn c_of_a(eqm: &EquilibriumMeasure, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::NonpositiveSpike(a));
    }
    let e = eqm.b2;
    if a >= edge_threshold(eqm) {
        return Ok(e);
    }
    let f = |x: f64| if x <= e { edge_threshold(eqm) - a } else { eqm.g1(x) - a };
    let mut lo = e;
    let mut step = 1.0f64.max(eqm.radius());
    let mut hi = e + step;
    let mut guard = 0;
    while f(hi) > 0.0 {
        lo = hi;
        step *= 2.0;
        hi = e + step;
        guard += 1;
        if guard > 200 {
            return Err(Error::SearchHorizonExceeded(format!("c(a) bracket for a = {a}")));
        }
    }
    let mut x = bisect(f, lo, hi);
    for _ in 0..3 {
        let d = eqm.g2(x);
        if d == 0.0 {
            break;
        }
        let nx = x - (eqm.g1(x) - a) / d;
        if nx > lo && nx < hi {
            x = nx;
        }
    }
    Ok(x)
}

/// G(x; a) and H(x; a).
pub fn g_h(eqm: &EquilibriumMeasure, a: f64, x: f64) -> (f64, f64) {
    let g = if x <= eqm.b2 { eqm.log_potential(eqm.b2) } else { eqm.log_potential(x) };
    let gv = g - eqm.potential.eval(x, 0) + a * x;
    let hv = -g + a * x + eqm.ell;
    (gv, hv)
}

pub fn big_g(eqm: &EquilibriumMeasure, a: f64, x: f64) -> f64 {
    eqm.log_potential(x) - eqm.potential.eval(x, 0) + a * x
}

pub fn big_h(eqm: &EquilibriumMeasure, a: f64, x: f64) -> f64 {
    -eqm.log_potential(x) + a * x + eqm.ell
}

/// G'(x; a) for x > e.
pub fn big_g1(eqm: &EquilibriumMeasure, a: f64, x: f64) -> f64 {
    eqm.g1(x) - eqm.potential.eval(x, 1) + a
}

/// G^{(j)}(x; a) for x > e and j >= 1.
pub fn big_g_deriv(eqm: &EquilibriumMeasure, a: f64, x: f64, order: usize) -> Result<f64> {
    let base = eqm.g_deriv(x, order)? - eqm.potential.eval(x, order);
    Ok(if order == 1 { base + a } else { base })
}

/// Right horizon beyond which G' < -1 and G' is decreasing.
pub fn x_horizon(eqm: &EquilibriumMeasure, a: f64) -> Result<f64> {
    let d2 = poly_derivative(eqm.potential.coeffs(), 2);
    let lead = *d2.last().unwrap();
    // Cauchy bound on the real roots of V''
    let bound = 1.0 + d2[..d2.len() - 1].iter().map(|c| (c / lead).abs()).fold(0.0, f64::max);
    let mut x = (eqm.b2 + 1.0).max(bound + eqm.b2.abs());
    for _ in 0..200 {
        if big_g1(eqm, a, x) < -1.0 && horner(&d2, x) > 0.0 && x > bound {
            return Ok(x);
        }
        x = eqm.b2 + 2.0 * (x - eqm.b2);
    }
    Err(Error::SearchHorizonExceeded(format!("no decreasing horizon for a = {a}")))
}

/// Local maxima of G on (lo, hi), found by a log-spaced G' sign scan and bisection.
fn local_maxima(eqm: &EquilibriumMeasure, a: f64, lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let gp = |x: f64| big_g1(eqm, a, x);
    let mut out = Vec::new();
    let first = lo + 1e-9 * span;
    let mut prev_x = first;
    let mut prev = gp(first);
    for j in 1..=SCAN_POINTS {
        let t = -9.0 + 9.0 * j as f64 / SCAN_POINTS as f64;
        let x = lo + span * 10f64.powf(t);
        let y = gp(x);
        if prev > 0.0 && y <= 0.0 {
            out.push(bisect(gp, prev_x, x));
        }
        prev_x = x;
        prev = y;
    }
    out
}

/// Order 2k of the first nonvanishing derivative of G at x (starting at 2).
pub fn derivative_order(eqm: &EquilibriumMeasure, a: f64, x: f64) -> Result<usize> {
    for j in 2..=24 {
        if big_g_deriv(eqm, a, x, j)?.abs() > ZERO_DERIVATIVE {
            return Ok(j);
        }
    }
    Ok(25)
}

/// All interior local maxima (x, G) of G(.; a) on (c(a), x_hi).
pub fn local_maximizers(eqm: &EquilibriumMeasure, a: f64) -> Result<Vec<(f64, f64)>> {
    let c = c_of_a(eqm, a)?;
    let hi = x_horizon(eqm, a)?;
    Ok(local_maxima(eqm, a, c, hi)
        .into_iter()
        .map(|x| (x, big_g(eqm, a, x)))
        .collect())
}

/// Global maximizers of G(.; a) within `tie_tol` of the maximum.
pub fn maximizers(eqm: &EquilibriumMeasure, a: f64, tie_tol: f64) -> Result<Vec<Maximizer>> {
    let locals = local_maximizers(eqm, a)?;
    let c = c_of_a(eqm, a)?;
    let g_c = big_g(eqm, a, c.max(eqm.b2));
    let gmax = locals.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if locals.is_empty() || gmax < g_c {
        return Err(Error::NoInteriorMaximum(a));
    }
    let mut out = Vec::new();
    for (x, g) in locals {
        if gmax - g <= tie_tol {
            out.push(Maximizer { x, g, order: derivative_order(eqm, a, x)? });
        }
    }
    Ok(out)
}

/// D(a) = sup_{x >= c(a)} G(x; a) - H(c(a); a).
pub fn excess(eqm: &EquilibriumMeasure, a: f64) -> Result<f64> {
    let c = c_of_a(eqm, a)?;
    let hc = big_h(eqm, a, c);
    let mut best = big_g(eqm, a, c);
    for (_, g) in local_maximizers(eqm, a)? {
        best = best.max(g);
    }
    Ok(best - hc)
}

/// Critical spike a_c.
pub fn critical_value(eqm: &EquilibriumMeasure) -> Result<f64> {
    let a_star = edge_threshold(eqm);
    if !(a_star > 0.0) {
        return Err(Error::SearchHorizonExceeded("V'(e) is not positive".into()));
    }
    let mut lo = 0.0;
    for j in 1..CRITICAL_SCAN {
        let a = a_star * j as f64 / CRITICAL_SCAN as f64;
        if excess(eqm, a)? > 0.0 {
            let mut hi = a;
            while hi - lo > 1e-13 * a_star {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if excess(eqm, mid)? > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        lo = a;
    }
    Ok(a_star)
}

/// Spike values in (a_lo, a_hi) where the two largest local maxima of G tie.
pub fn secondary_critical_values(eqm: &EquilibriumMeasure, a_lo: f64, a_hi: f64, steps: usize) -> Result<Vec<f64>> {
    // Delta(a) = G(far) - G(near) among the two best local maxima
    let delta = |a: f64| -> Result<Option<f64>> {
        let mut m = local_maximizers(eqm, a)?;
        if m.len() < 2 {
            return Ok(None);
        }
        m.sort_by(|p, q| q.1.total_cmp(&p.1));
        let (p, q) = (m[0], m[1]);
        let (near, far) = if p.0 < q.0 { (p, q) } else { (q, p) };
        Ok(Some(far.1 - near.1))
    };
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for j in 0..=steps {
        let a = a_lo + (a_hi - a_lo) * j as f64 / steps as f64;
        let d = delta(a)?;
        if let (Some((pa, pd)), Some(d)) = (prev, d) {
            if pd < 0.0 && d >= 0.0 {
                let (mut lo, mut hi) = (pa, a);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi || hi - lo < 1e-15 * hi.abs() {
                        break;
                    }
                    match delta(mid)? {
                        Some(v) if v >= 0.0 => hi = mid,
                        Some(_) => lo = mid,
                        None => break,
                    }
                }
                // keep the endpoint with the smaller tie defect
                let dl = delta(lo)?.map(f64::abs).unwrap_or(f64::INFINITY);
                let dh = delta(hi)?.map(f64::abs).unwrap_or(f64::INFINITY);
                out.push(if dl < dh { lo } else { hi });
            }
        }
        prev = d.map(|d| (a, d));
    }
    Ok(out)
}

/// Regime classification at spike a, given a precomputed a_c.
pub fn classify_with(eqm: &EquilibriumMeasure, a: f64, a_c: f64, tie_tol: f64) -> Result<PhaseReport> {
    let c = c_of_a(eqm, a)?;
    let h_at_c = big_h(eqm, a, c);
    let e = eqm.b2;
    let a_star = edge_threshold(eqm);
    let close = (a - a_c).abs() <= 1e-12 * a_c.max(1.0);
    let mut report = PhaseReport {
        a,
        regime: Regime::Subcritical,
        c_of_a: c,
        e,
        a_c,
        maximizers: Vec::new(),
        g_max: big_g(eqm, a, c),
        h_at_c,
        predicted_location: Some(e),
    };
    if let Ok(m) = maximizers(eqm, a, tie_tol) {
        report.g_max = m.iter().map(|p| p.g).fold(f64::NEG_INFINITY, f64::max);
        report.maximizers = m;
    }
    if close {
        if (a_c - a_star).abs() <= 1e-12 * a_star && report.maximizers.len() <= 1 {
            report.regime = Regime::AtCritical;
        } else {
            report.regime = Regime::Unresolved;
            report.predicted_location = None;
        }
    } else if a < a_c {
        report.regime = Regime::Subcritical;
    } else {
        if report.maximizers.is_empty() {
            return Err(Error::NoInteriorMaximum(a));
        }
        if report.maximizers.len() >= 2 {
            report.regime = Regime::SecondaryCritical;
            report.predicted_location = None;
        } else {
            report.regime = Regime::SupercriticalUnique;
            report.predicted_location = Some(report.maximizers[0].x);
        }
    }
    Ok(report)
}

pub fn classify(eqm: &EquilibriumMeasure, a: f64) -> Result<PhaseReport> {
    let a_c = critical_value(eqm)?;
    classify_with(eqm, a, a_c, TIE_TOL)
}

/// n-independent exponent of the largest-eigenvalue density at u > e.
pub fn asymptotic_log_density(eqm: &EquilibriumMeasure, a: f64, u: f64) -> Result<f64> {
    if !(u > eqm.b2) {
        return Err(Error::AtEdge(u));
    }
    let c = c_of_a(eqm, a)?;
    if u >= c {
        Ok(big_g(eqm, a, u))
    } else {
        Ok(big_h(eqm, a, c) - eqm.potential.eval(u, 0) + 2.0 * eqm.log_potential(u) - eqm.ell)
    }
}
