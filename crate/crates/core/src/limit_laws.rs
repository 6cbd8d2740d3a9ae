//! Predicted limit laws of the largest eigenvalue in the supercritical and
//! secondary-critical regimes, the prefactor M_beta and the quadratic
//! functional A(f).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::{gamma, gamma_lr, ln_gamma};

use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};
use crate::numerics::{cheb_nodes, integrate_gl, ChebExpansion, PvWeight, PV_MODES};
use crate::phase::{self, Regime};

/// Gauss-Chebyshev nodes for the outer integral of A(f).
pub const A_NODES: usize = 512;
/// Relative size of the Chebyshev tail above which a test function is rejected.
pub const SMOOTHNESS_TOL: f64 = 1e-10;

/// Plug-in for the signed correction measure nu entering R_beta for beta != 2.
pub trait NuMeasure {
    /// int f dnu over the support.
    fn integrate(&self, f: &dyn Fn(f64) -> f64) -> f64;
    /// Whether the plug-in is the true measure, as opposed to a stand-in.
    fn is_exact(&self) -> bool;
}

/// Stand-in that drops the nu term; results are flagged partial.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNu;

impl NuMeasure for ZeroNu {
    fn integrate(&self, _f: &dyn Fn(f64) -> f64) -> f64 {
        0.0
    }
    fn is_exact(&self) -> bool {
        false
    }
}

fn expansion_on_support<F: Fn(f64) -> f64>(f: F, b1: f64, b2: f64) -> Result<ChebExpansion> {
    let (m, r) = (0.5 * (b1 + b2), 0.5 * (b2 - b1));
    let e = ChebExpansion::fit(|t| f(m + r * t), PV_MODES);
    if e.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonSmoothInput(f64::NAN));
    }
    let tail = e.tail_ratio();
    if tail > SMOOTHNESS_TOL {
        return Err(Error::NonSmoothInput(tail));
    }
    Ok(e)
}

/// A(f) = 1/2 int_J f delta^f over the support of `eqm`.
pub fn quadratic_a<F: Fn(f64) -> f64>(f: F, eqm: &EquilibriumMeasure) -> Result<f64> {
    quadratic_a_on(f, eqm.b1, eqm.b2)
}

/// A(f) on an arbitrary interval; invariant under affine maps of the interval.
pub fn quadratic_a_on<F: Fn(f64) -> f64>(f: F, b1: f64, b2: f64) -> Result<f64> {
    let e = expansion_on_support(f, b1, b2)?;
    let d = e.derivative();
    let nodes = cheb_nodes(A_NODES);
    let mut s = 0.0;
    for &y in &nodes {
        // sqrt(1 - y^2) delta^F(y)
        let dt = -d.pv(y, PvWeight::Sqrt)? / (2.0 * PI * PI);
        s += e.eval(y) * dt;
    }
    Ok(0.5 * PI / A_NODES as f64 * s)
}

/// Polarization 1/2 (A(f+g) - A(f) - A(g)).
pub fn inner_a<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(f: F, g: G, eqm: &EquilibriumMeasure) -> Result<f64> {
    let fg = quadratic_a(|x| f(x) + g(x), eqm)?;
    Ok(0.5 * (fg - quadratic_a(&f, eqm)? - quadratic_a(&g, eqm)?))
}

/// ln R_beta(u, w) for real w > e (w = u gives R_beta(u)).
pub fn log_r_beta(
    eqm: &EquilibriumMeasure,
    u: f64,
    w: f64,
    beta: f64,
    nu: Option<&dyn NuMeasure>,
) -> Result<(f64, bool)> {
    if !(u > eqm.b2 && w > eqm.b2) {
        return Err(Error::DomainViolation(format!("u = {u}, w = {w} must exceed the edge")));
    }
    let v = &eqm.potential;
    let p = |x: f64| -v.eval(x, 0) + 2.0 * (u - x).ln() - (w - x).abs().ln();
    let mu_p = eqm.integrate(p);
    let a_p = quadratic_a(p, eqm)?;
    let (nu_p, exact) = if (beta - 2.0).abs() < 1e-15 {
        (0.0, true)
    } else {
        match nu {
            Some(n) => (n.integrate(&p), n.is_exact()),
            None => return Err(Error::NuRequired(beta)),
        }
    };
    let hb = 0.5 * beta;
    Ok((hb * ((2.0 / beta - 1.0) * nu_p - mu_p + a_p), exact))
}

/// M_beta(u) with a flag telling whether the nu term was exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prefactor {
    pub value: f64,
    pub log_value: f64,
    pub partial: bool,
}

pub fn m_beta_prefactor(
    eqm: &EquilibriumMeasure,
    a: f64,
    u: f64,
    beta: f64,
    nu: Option<&dyn NuMeasure>,
) -> Result<Prefactor> {
    let c = phase::c_of_a(eqm, a)?;
    if !(u > c) || !(u > eqm.b2) {
        return Err(Error::OutsideDomain { u, c });
    }
    let (log_r, exact) = log_r_beta(eqm, u, u, beta, nu)?;
    let hb = 0.5 * beta;
    let bracket = hb * (a - eqm.g1(u));
    let log_value = log_r + (hb - 1.0) * bracket.ln() + ln_gamma(hb);
    Ok(Prefactor { value: log_value.exp(), log_value, partial: !exact })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LawKind {
    Gaussian,
    Flat2k,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub location: f64,
    /// k with 2k the order of the first nonvanishing derivative of G.
    pub k: usize,
    /// |G^{(2k)}(location)|, the n-free part of the scale rule.
    pub curvature: f64,
    pub kind: LawKind,
    pub weight: f64,
}

impl Component {
    /// Scale at size n: [(beta/2) |G''| n]^{-1/2} for the Gaussian kind
    /// (standard normal), [(beta/2) |G^{(2k)}| n / (2k)!]^{-1/(2k)} for Flat2k.
    pub fn scale(&self, beta: f64, n: f64) -> f64 {
        let two_k = 2 * self.k;
        let log_fact = match self.kind {
            LawKind::Gaussian => 0.0,
            LawKind::Flat2k => ln_gamma(two_k as f64 + 1.0),
        };
        let log_arg = (0.5 * beta * self.curvature * n).ln() - log_fact;
        (-log_arg / two_k as f64).exp()
    }

    /// CDF of the standardized component law.
    pub fn standard_cdf(&self, t: f64) -> f64 {
        match self.kind {
            LawKind::Gaussian => Normal::standard().cdf(t),
            LawKind::Flat2k => flat_cdf(self.k, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NShift {
    pub q_beta: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    pub components: Vec<Component>,
    pub beta: f64,
    pub a: f64,
    pub alpha: Option<f64>,
    pub n_shift: Option<NShift>,
    /// True if a nu stand-in was used for beta != 2.
    pub partial: bool,
}

impl LimitLaw {
    /// Mixture CDF of the largest eigenvalue at size n.
    pub fn cdf_x(&self, x: f64, n: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.standard_cdf((x - c.location) / c.scale(self.beta, n)))
            .sum()
    }
}

/// int_{-inf}^{inf} e^{-xi^{2k}} d xi = Gamma(1/2k)/k.
pub fn flat_normalizer(k: usize) -> f64 {
    gamma(1.0 / (2 * k) as f64) / k as f64
}

/// The same normalizer by direct quadrature.
pub fn flat_normalizer_quadrature(k: usize) -> f64 {
    let two_k = 2 * k as i32;
    2.0 * integrate_gl(|x: f64| (-x.powi(two_k)).exp(), 0.0, 8.0, 64)
}

/// Normalized CDF of the density proportional to e^{-xi^{2k}}.
pub fn flat_cdf(k: usize, t: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let p = gamma_lr(1.0 / (2 * k) as f64, t.abs().powi(2 * k as i32));
    0.5 + t.signum() * 0.5 * p
}

/// q_beta = (2/beta)(1/2 - 1/2k)/(x2 - x1).
pub fn q_beta(beta: f64, k: usize, x1: f64, x2: f64) -> Result<f64> {
    if !(x2 > x1) {
        return Err(Error::DegenerateGap(x2 - x1));
    }
    Ok((2.0 / beta) * (0.5 - 0.5 / k as f64) / (x2 - x1))
}

/// Normalizes log-weights so that they sum to one, with the last weight
/// set to 1 minus the others.
fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let n = w.len();
    let head: f64 = w[..n - 1].iter().sum();
    w[n - 1] = 1.0 - head;
    w
}

/// Mixture weights from maximizers at a secondary-critical spike.
pub fn mixture_weights(
    eqm: &EquilibriumMeasure,
    a0: f64,
    beta: f64,
    alpha: f64,
    maximizers: &[phase::Maximizer],
    nu: Option<&dyn NuMeasure>,
) -> Result<(Vec<f64>, bool)> {
    let hb = 0.5 * beta;
    let mut logs = Vec::with_capacity(maximizers.len());
    let mut partial = false;
    for m in maximizers {
        let curv = -phase::big_g_deriv(eqm, a0, m.x, m.order)?;
        let pre = m_beta_prefactor(eqm, a0, m.x, beta, nu)?;
        partial |= pre.partial;
        let k = m.order / 2;
        let shape = if k == 1 {
            // sqrt(2 pi / (-(beta/2) G''))
            0.5 * (2.0 * PI / (hb * curv)).ln()
        } else {
            // ((2k)! / (-(beta/2) G^{(2k)}))^{1/2k} int e^{-xi^{2k}}
            (ln_gamma(m.order as f64 + 1.0) - (hb * curv).ln()) / m.order as f64
                + flat_normalizer(k).ln()
        };
        logs.push(hb * alpha * m.x + shape + pre.log_value);
    }
    Ok((normalize_log_weights(&logs), partial))
}

/// Predicted limit law at spike a (for a secondary-critical a, `alpha`
/// is the offset in a = a0 + alpha/n, or the Theorem-style shifted scaling
/// when the second maximizer is degenerate).
pub fn predict_limit(
    eqm: &EquilibriumMeasure,
    a: f64,
    beta: f64,
    alpha: Option<f64>,
    nu: Option<&dyn NuMeasure>,
) -> Result<LimitLaw> {
    let report = phase::classify(eqm, a)?;
    predict_from_report(eqm, &report, beta, alpha, nu)
}

pub fn predict_from_report(
    eqm: &EquilibriumMeasure,
    report: &phase::PhaseReport,
    beta: f64,
    alpha: Option<f64>,
    nu: Option<&dyn NuMeasure>,
) -> Result<LimitLaw> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta = {beta}")));
    }
    let a = report.a;
    let component = |m: &phase::Maximizer, w: f64| -> Result<Component> {
        let k = m.order / 2;
        Ok(Component {
            location: m.x,
            k,
            curvature: phase::big_g_deriv(eqm, a, m.x, m.order)?.abs(),
            kind: if k == 1 { LawKind::Gaussian } else { LawKind::Flat2k },
            weight: w,
        })
    };
    match report.regime {
        Regime::Subcritical | Regime::AtCritical | Regime::Unresolved => Err(Error::SubcriticalUnsupported),
        Regime::SupercriticalUnique => {
            let m = &report.maximizers[0];
            if m.order % 2 == 1 {
                return Err(Error::NoInteriorMaximum(a));
            }
            Ok(LimitLaw {
                components: vec![component(m, 1.0)?],
                beta,
                a,
                alpha: None,
                n_shift: None,
                partial: false,
            })
        }
        Regime::SecondaryCritical => {
            let al = alpha.unwrap_or(0.0);
            let (weights, partial) = mixture_weights(eqm, a, beta, al, &report.maximizers, nu)?;
            let comps = report
                .maximizers
                .iter()
                .zip(&weights)
                .map(|(m, &w)| component(m, w))
                .collect::<Result<Vec<_>>>()?;
            let n_shift = if comps.len() == 2 && comps[1].k > 1 && comps[0].k == 1 {
                Some(NShift {
                    q_beta: q_beta(beta, comps[1].k, comps[0].location, comps[1].location)?,
                    alpha: al,
                })
            } else {
                None
            };
            Ok(LimitLaw { components: comps, beta, a, alpha: Some(al), n_shift, partial })
        }
    }
}

/// Sum_{j<i} w_j + w_i F_i(T).
pub fn law_cdf(law: &LimitLaw, i: usize, t: f64) -> Result<f64> {
    let len = law.components.len();
    let c = law.components.get(i).ok_or(Error::IndexOutOfRange { index: i, len })?;
    let before: f64 = law.components[..i].iter().map(|c| c.weight).sum();
    Ok(before + c.weight * c.standard_cdf(t))
}
