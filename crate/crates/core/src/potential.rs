//! Polynomial potentials and the one-band standing conditions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};

/// Real polynomial of even degree with positive leading coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialRepr", into = "PotentialRepr")]
pub struct Potential {
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PotentialRepr {
    coeffs: Vec<f64>,
}

impl TryFrom<PotentialRepr> for Potential {
    type Error = Error;
    fn try_from(r: PotentialRepr) -> Result<Self> {
        Potential::new(r.coeffs)
    }
}

impl From<Potential> for PotentialRepr {
    fn from(p: Potential) -> Self {
        PotentialRepr { coeffs: p.coeffs }
    }
}

impl Potential {
    /// Validates and wraps ascending-order coefficients.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let Some(&lead) = coeffs.last() else {
            return Err(Error::EmptyCoefficients);
        };
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        let degree = coeffs.len() - 1;
        if degree < 2 || degree % 2 == 1 {
            return Err(Error::OddDegree(degree));
        }
        if lead <= 0.0 {
            return Err(Error::NonpositiveLeading(lead));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficients of the `order`-th derivative.
    pub fn derivative_coeffs(&self, order: usize) -> Vec<f64> {
        poly_derivative(&self.coeffs, order)
    }

    /// `order`-th derivative at `x`; zero beyond the degree.
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        horner(&self.derivative_coeffs(order), x)
    }

    pub fn eval_complex(&self, z: Complex64, order: usize) -> Complex64 {
        horner_complex(&self.derivative_coeffs(order), z)
    }

    /// V(tx) as a new potential.
    pub fn rescaled_argument(&self, t: f64) -> Result<Self> {
        let mut f = 1.0;
        let c = self
            .coeffs
            .iter()
            .map(|c| {
                let v = c * f;
                f *= t;
                v
            })
            .collect();
        Self::new(c)
    }

    /// Short stable identity derived from the coefficient bit patterns.
    pub fn hash(&self) -> String {
        crate::numerics::hash_f64s(&self.coeffs)
    }
}

pub fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

pub fn horner_complex(c: &[f64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * z + ci)
}

pub fn poly_derivative(c: &[f64], order: usize) -> Vec<f64> {
    let mut d = c.to_vec();
    for _ in 0..order {
        if d.len() <= 1 {
            return vec![0.0];
        }
        d = d.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
    }
    d
}

/// Evidence for the four standing conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub cond1_ok: bool,
    pub cond2_ok: bool,
    pub cond3_ok: bool,
    pub cond4_ok: bool,
    pub diagnostics: ConditionDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionDiagnostics {
    pub degree: usize,
    pub leading_coeff: f64,
    /// Minimum of h(x) sqrt((b2-x)(x-b1)) over the support grid.
    pub min_density: f64,
    /// Minimum |h| over the scan grid.
    pub min_abs_h: f64,
    /// Polished real roots of h found by bracketing.
    pub h_real_roots: Vec<f64>,
    /// Minimum of l - (2 int log|x-s| dmu(s) - V(x)) over the exterior grid.
    pub exterior_min_margin: f64,
    pub exterior_horizon: f64,
}

/// Grid sizes used by [`check_conditions`].
/// Quartic whose spike phase diagram has a secondary critical value.
pub const QUARTIC_EXAMPLE: [f64; 5] = [0.0, 0.11418, 0.37448, -0.16736, 0.02093];

pub const SUPPORT_GRID: usize = 2000;
pub const ROOT_GRID: usize = 4096;
pub const EXTERIOR_GRID: usize = 400;

/// Checks the four standing conditions against a computed equilibrium measure.
pub fn check_conditions(v: &Potential, eqm: &EquilibriumMeasure) -> Result<ConditionReport> {
    if eqm.potential_hash != v.hash() {
        return Err(Error::InconsistentInputs(
            "equilibrium measure was not computed from this potential".into(),
        ));
    }
    let (b1, b2) = (eqm.b1, eqm.b2);
    let width = b2 - b1;

    let mut min_density = f64::INFINITY;
    for j in 1..SUPPORT_GRID {
        let x = b1 + width * j as f64 / SUPPORT_GRID as f64;
        let d = horner(&eqm.h_coeffs, x) * ((b2 - x) * (x - b1)).sqrt();
        min_density = min_density.min(d);
    }
    let cond2 = min_density > 0.0;

    let (lo, hi) = (b1 - 2.0, b2 + 2.0);
    let hval = |x: f64| horner(&eqm.h_coeffs, x);
    let mut roots = Vec::new();
    let mut min_abs_h = f64::INFINITY;
    let mut prev_x = lo;
    let mut prev = hval(lo);
    for j in 0..=ROOT_GRID {
        let x = lo + (hi - lo) * j as f64 / ROOT_GRID as f64;
        let y = hval(x);
        min_abs_h = min_abs_h.min(y.abs());
        if j > 0 && (y == 0.0 || prev.signum() != y.signum()) {
            roots.push(bisect(hval, prev_x, x));
        }
        prev_x = x;
        prev = y;
    }
    // h keeps a constant sign beyond the scan window when its degree is even
    // and it has no roots inside; a real root would show up as a sign change.
    let cond3 = roots.is_empty() && min_abs_h > 0.0;

    let horizon = b2 + 10.0 * width;
    let mut margin = f64::INFINITY;
    for j in 1..=EXTERIOR_GRID {
        let t = j as f64 / EXTERIOR_GRID as f64;
        for x in [b2 + (horizon - b2) * t, b1 - (horizon - b2) * t] {
            let m = eqm.ell - (2.0 * eqm.log_potential(x) - v.eval(x, 0));
            margin = margin.min(m);
        }
    }
    let cond4 = margin > 0.0;

    Ok(ConditionReport {
        cond1_ok: v.degree() % 2 == 0 && v.degree() >= 2 && *v.coeffs.last().unwrap() > 0.0,
        cond2_ok: cond2,
        cond3_ok: cond3,
        cond4_ok: cond4,
        diagnostics: ConditionDiagnostics {
            degree: v.degree(),
            leading_coeff: *v.coeffs.last().unwrap(),
            min_density,
            min_abs_h,
            h_real_roots: roots,
            exterior_min_margin: margin,
            exterior_horizon: horizon,
        },
    })
}

/// Bisection on a sign-changing bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
