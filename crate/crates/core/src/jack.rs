//! Single-row Jack polynomials, Kummer's M(1, xi, z), and the rank-one spike
//! weight that replaces the group integral in the joint eigenvalue density.
//!
//! With N = (beta/2) n and X = (beta/2) a n the weight is
//! `Xi(lambda; a) = sum_k c_k(lambda) X^k / (N)_k`, where c_k are the power-series
//! coefficients of `prod_j (1 - a lambda_j)^(-beta/2)` in a (taken at a = 1).
//! Three evaluation routes are provided:
//!
//! * [`spike_weight`]: the series, after the exact shift
//!   `Xi(lambda) = e^(X s) Xi(lambda - s)` that makes every term positive;
//! * [`spike_weight_contour`]: the Kummer integral on a Sigma contour;
//! * [`SpikeEngine`]: the Bromwich line integral
//!   `Xi = Gamma(N) / (2 pi i) * int e^t prod_j (t - X lambda_j)^(-beta/2) dt`
//!   through the saddle point, updated in O(nodes) per single-coordinate move.

use std::f64::consts::{LN_10, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::numerics::{
    contour_integral, gauss_legendre, hash_f64s, integrate_gl, ContourKind, ContourSpec,
};

/// Power-series coefficients of `prod_j (1 - a lambda_j)^(-beta/2)` in a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeSeries {
    pub coeffs: Vec<f64>,
    pub k: usize,
    pub lambda_hash: String,
    pub beta: f64,
    /// |c_(K+1)|, the first coefficient not returned.
    pub tail_bound: f64,
}

impl SpikeSeries {
    pub fn is_sufficient(&self, tol: f64) -> bool {
        self.tail_bound <= tol
    }
}

/// Power sums p_1..p_k (index 0 holds n).
fn power_sums(lambda: &[f64], k: usize) -> Vec<f64> {
    let mut p = vec![lambda.len() as f64; k + 1];
    let mut pw = vec![1.0; lambda.len()];
    for m in 1..=k {
        let mut s = 0.0;
        for (w, &l) in pw.iter_mut().zip(lambda) {
            *w *= l;
            s += *w;
        }
        p[m] = s;
    }
    p
}

/// Formal exponential of (beta/2) sum_m p_m a^m / m, through order k.
fn exp_series(p: &[f64], beta: f64, k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k + 1];
    c[0] = 1.0;
    for j in 1..=k {
        let s: f64 = (1..=j).map(|m| p[m] * c[j - m]).sum();
        c[j] = 0.5 * beta * s / j as f64;
    }
    c
}

pub fn series_coeffs(lambda: &[f64], beta: f64, k: usize) -> SpikeSeries {
    let p = power_sums(lambda, k + 1);
    let mut c = exp_series(&p, beta, k + 1);
    let tail = c.pop().map_or(0.0, f64::abs);
    SpikeSeries {
        coeffs: c,
        k,
        lambda_hash: hash_f64s(lambda),
        beta,
        tail_bound: tail,
    }
}

/// Rising factorial (c)_i; (c)_0 = 1.
pub fn pochhammer(c: f64, i: usize) -> f64 {
    (0..i).map(|j| c + j as f64).product()
}

/// Factor turning c_k into C_(k): (2/beta)^k k! / prod_(j<k) (1 + 2j/beta).
fn row_factor(beta: f64, k: usize) -> f64 {
    let alpha = 2.0 / beta;
    (0..k).map(|j| alpha * (j + 1) as f64 / (1.0 + alpha * j as f64)).product()
}

/// C^(2/beta)_(k)(lambda) in the C-normalization.
pub fn jack_row_value(lambda: &[f64], beta: f64, k: usize) -> f64 {
    series_coeffs(lambda, beta, k).coeffs[k] * row_factor(beta, k)
}

/// Closed form of C^(2/beta)_(k)(1, ..., 1) with n ones.
pub fn jack_row_ones(n: usize, beta: f64, k: usize) -> f64 {
    let alpha = 2.0 / beta;
    (0..k)
        .map(|j| (n as f64 + alpha * j as f64) / (1.0 + alpha * j as f64))
        .product()
}

/// Below this modulus M(1, xi, z) is summed directly.
pub const KUMMER_SERIES_RADIUS: f64 = 12.0;

/// Kummer's M(1, xi, z) for xi in (0, 1].
pub fn kummer_m1(xi: f64, z: Complex64) -> Complex64 {
    kummer_m1_scaled(xi, z, 0.0)
}

/// M(1, xi, z) e^(-shift), computed without forming e^z on its own.
pub fn kummer_m1_scaled(xi: f64, z: Complex64, shift: f64) -> Complex64 {
    if xi == 1.0 {
        return (z - shift).exp();
    }
    let r = z.norm();
    if r <= KUMMER_SERIES_RADIUS {
        return kummer_series(xi, z) * (-shift).exp();
    }
    if z.re < 0.0 && z.im.abs() <= 1e-12 * r {
        return Complex64::new(kummer_negative_real(xi, -z.re) * (-shift).exp(), 0.0);
    }
    kummer_large(xi, z, shift)
}

fn kummer_series(xi: f64, z: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    if z.re >= 0.0 {
        let (mut term, mut sum) = (one, one);
        for i in 0..4000 {
            term *= z / (xi + i as f64);
            sum += term;
            if term.norm() <= 1e-17 * sum.norm() && i as f64 > z.norm() {
                break;
            }
        }
        sum
    } else {
        // Kummer transformation: M(1, xi, z) = e^z M(xi - 1, xi, -z)
        let w = -z;
        let (mut u, mut sum) = (one, one);
        for i in 1..4000 {
            u *= w / i as f64;
            sum += u * ((xi - 1.0) / (xi - 1.0 + i as f64));
            if u.norm() <= 1e-17 * sum.norm().max(1e-300) && i as f64 > w.norm() {
                break;
            }
        }
        z.exp() * sum
    }
}

/// Gamma(xi) z^(1-xi) e^z - (xi - 1) K(z), where K is the Legendre continued
/// fraction of e^z z^(1-xi) Gamma(xi - 1, z).
fn kummer_large(xi: f64, z: Complex64, shift: f64) -> Complex64 {
    let s = xi - 1.0;
    let tiny = 1e-300;
    let guard = |v: Complex64| if v.norm() < tiny { Complex64::new(tiny, 0.0) } else { v };
    let mut f = guard(z + 1.0 - s);
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for i in 1..20_000 {
        let fi = i as f64;
        let a = -fi * (fi - s);
        let b = z + 2.0 * fi + 1.0 - s;
        d = guard(b + d * a).inv();
        c = guard(b + a / c);
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    let lead = gamma(xi) * ((1.0 - xi) * z.ln() + z - shift).exp();
    lead - f.inv() * (s * (-shift).exp())
}

/// M(1, xi, -y) for real y > 0, from
/// `e^(-y) - int_0^1 y e^(-y t) [(1 - t)^(xi - 1) - 1] dt`.
fn kummer_negative_real(xi: f64, y: f64) -> f64 {
    let g = |t: f64| ((xi - 1.0) * (-t).ln_1p()).exp_m1();
    let upper = (0.5 * y).min(60.0);
    let panels = (upper / 2.0).ceil().max(1.0) as usize;
    let head = integrate_gl(|u| (-u).exp() * g(u / y), 0.0, upper, panels);
    let mut far = 0.0;
    if 0.5 * y <= 60.0 {
        // t in [1/2, 1] with v = (1 - t)^xi removing the endpoint singularity
        let vmax = 0.5f64.powf(xi);
        let with_sing =
            y / xi * integrate_gl(|v| (-y * (1.0 - v.powf(1.0 / xi))).exp(), 0.0, vmax, 40);
        far = with_sing - ((-0.5 * y).exp() - (-y).exp());
    }
    (-y).exp() - head - far
}

/// Value of the spike weight with its logarithm and truncation record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeWeight {
    pub value: f64,
    pub log_value: f64,
    pub terms: usize,
    /// Last retained term relative to the sum (series route only).
    pub tail_bound: f64,
}

impl SpikeWeight {
    fn from_log(log_value: f64, terms: usize, tail_bound: f64) -> Self {
        Self { value: log_value.exp(), log_value, terms, tail_bound }
    }
}

pub const MAX_SERIES_TERMS: usize = 20_000;
/// Relative tolerance at which [`spike_weight_checked`] reports a disagreement.
pub const ROUTE_TOL: f64 = 1e-6;

fn check_inputs(lambda: &[f64], a: f64, n: usize, beta: f64) -> Result<()> {
    if lambda.len() != n || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "expected {n} eigenvalues, got {}",
            lambda.len()
        )));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    if !a.is_finite() || lambda.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("non-finite spike or eigenvalue".into()));
    }
    Ok(())
}

/// The points X lambda_j with X = (beta/2) a n; the weight depends on nothing else
/// besides N.
fn scaled_points(lambda: &[f64], a: f64, beta: f64) -> Vec<f64> {
    let x = 0.5 * beta * a * lambda.len() as f64;
    lambda.iter().map(|l| x * l).collect()
}

/// Series route. Stops once three consecutive terms fall below `tol` times the
/// partial sum, past the point where terms can still grow.
pub fn spike_weight(lambda: &[f64], a: f64, n: usize, beta: f64, tol: f64) -> Result<SpikeWeight> {
    check_inputs(lambda, a, n, beta)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tol must lie in (0, 1), got {tol}")));
    }
    if a == 0.0 {
        return Ok(SpikeWeight::from_log(0.0, 1, 0.0));
    }
    series_from_points(&scaled_points(lambda, a, beta), beta, tol)
}

fn series_from_points(tau: &[f64], beta: f64, tol: f64) -> Result<SpikeWeight> {
    let nn = 0.5 * beta * tau.len() as f64;
    let s = tau.iter().cloned().fold(f64::INFINITY, f64::min);
    let mu: Vec<f64> = tau.iter().map(|t| t - s).collect();
    let rho = mu.iter().cloned().fold(0.0, f64::max);
    if rho == 0.0 {
        return Ok(SpikeWeight::from_log(s, 1, 0.0));
    }
    // e_k = c_k(mu / rho) stored as e_vec[k] * exp(scale_log)
    let mut pw = vec![1.0; mu.len()];
    let mut q = vec![0.0];
    let mut e = vec![1.0];
    let mut scale_log = 0.0;
    let mut log_terms = vec![0.0];
    let (mut lpoch, lrho) = (0.0, rho.ln());
    let mut lse = 0.0;
    let mut small = 0;
    let log_tol = tol.ln();
    for k in 1..=MAX_SERIES_TERMS {
        let mut qk = 0.0;
        for (w, m) in pw.iter_mut().zip(&mu) {
            *w *= m / rho;
            qk += *w;
        }
        q.push(qk);
        let conv: f64 = (1..=k).map(|m| q[m] * e[k - m]).sum();
        let mut ek = 0.5 * beta * conv / k as f64;
        if ek > 1e250 {
            for v in e.iter_mut() {
                *v *= 1e-250;
            }
            ek *= 1e-250;
            scale_log += 250.0 * LN_10;
        }
        e.push(ek);
        lpoch += (nn + (k - 1) as f64).ln();
        let lt = ek.ln() + scale_log + k as f64 * lrho - lpoch;
        log_terms.push(lt);
        lse = if lt > lse { lt + (lse - lt).exp().ln_1p() } else { lse + (lt - lse).exp().ln_1p() };
        if lt < log_tol + lse {
            small += 1;
        } else {
            small = 0;
        }
        if small >= 3 && k as f64 > rho {
            let top = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum = neumaier(log_terms.iter().map(|l| (l - top).exp()));
            let log_value = s + top + sum.ln();
            return Ok(SpikeWeight::from_log(log_value, k + 1, (lt - log_value + s).exp()));
        }
    }
    Err(Error::SeriesTruncationInsufficient(MAX_SERIES_TERMS))
}

fn neumaier<I: Iterator<Item = f64>>(it: I) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Writes (beta/2) n = m + xi with integer m >= 0 and xi in (0, 1].
pub fn split_order(beta: f64, n: usize) -> (usize, f64) {
    let nn = 0.5 * beta * n as f64;
    let m = (nn.ceil() as usize).saturating_sub(1);
    (m, nn - m as f64)
}

/// Kummer-contour route: `((xi)_m / X^m) (1/2 pi i) int prod (w - lambda_j)^(-beta/2)
/// w^(xi-1) M(1, xi, X w) dw` on a Sigma contour with anchor `max(lambda_j, 0) + 1`
/// and (s1, s2) = (1, 10). The eigenvalues are first translated so that the
/// largest is 0.
pub fn spike_weight_contour(lambda: &[f64], a: f64, n: usize, beta: f64) -> Result<SpikeWeight> {
    check_inputs(lambda, a, n, beta)?;
    if a == 0.0 {
        return Ok(SpikeWeight::from_log(0.0, 1, 0.0));
    }
    let (lam, a): (Vec<f64>, f64) = if a < 0.0 {
        (lambda.iter().map(|l| -l).collect(), -a)
    } else {
        (lambda.to_vec(), a)
    };
    let x = 0.5 * beta * a * n as f64;
    let s = lam.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mu: Vec<f64> = lam.iter().map(|l| l - s).collect();
    let (m, xi) = split_order(beta, n);
    let anchor = mu.iter().cloned().fold(0.0, f64::max) + 1.0;
    let spec = ContourSpec::new(ContourKind::Sigma { s1: 1.0, s2: 10.0 }, anchor)?;
    let shift = x * anchor;
    let hb = 0.5 * beta;
    let integrand = |w: Complex64| {
        let mut lg = (xi - 1.0) * w.ln();
        for &u in &mu {
            lg -= hb * (w - u).ln();
        }
        lg.exp() * kummer_m1_scaled(xi, w * x, shift)
    };
    let integral = contour_integral(integrand, &spec, 16)?;
    if !(integral.re > 0.0) {
        return Err(Error::DomainViolation(format!(
            "contour value {integral} is not a positive real"
        )));
    }
    let log_pref = ln_gamma(xi + m as f64) - ln_gamma(xi) - m as f64 * x.ln();
    Ok(SpikeWeight::from_log(x * s + shift + log_pref + integral.re.ln(), 0, f64::NAN))
}

/// Both routes; errors if they differ by more than [`ROUTE_TOL`] relative.
pub fn spike_weight_checked(
    lambda: &[f64],
    a: f64,
    n: usize,
    beta: f64,
    tol: f64,
) -> Result<SpikeWeight> {
    let series = spike_weight(lambda, a, n, beta, tol)?;
    let contour = spike_weight_contour(lambda, a, n, beta)?;
    if (contour.log_value - series.log_value).exp_m1().abs() > ROUTE_TOL {
        return Err(Error::ContourDisagreement {
            series: series.log_value,
            contour: contour.log_value,
        });
    }
    Ok(series)
}

/// Bromwich-line evaluation of log Xi, kept incrementally for single moves.
#[derive(Debug, Clone)]
struct LineState {
    c: f64,
    dmin: f64,
    ys: Vec<f64>,
    ws: Vec<f64>,
    sums: Vec<Complex64>,
    s0: f64,
    pending_sums: Vec<Complex64>,
    pending_s0: f64,
    moves_since_build: usize,
}

#[derive(Debug, Clone)]
enum Mode {
    Unit,
    Series,
    Line(LineState),
}

/// Incremental log spike weight for a chain that moves one eigenvalue at a time.
#[derive(Debug, Clone)]
pub struct SpikeEngine {
    beta: f64,
    x: f64,
    tol: f64,
    tau: Vec<f64>,
    current: f64,
    pending: Option<(usize, f64, f64)>,
    pending_line: Option<Box<LineState>>,
    mode: Mode,
}

/// Gas sizes with (beta/2) n below this use the series in the engine; the line
/// integrand only decays like |t|^(-N).
pub const LINE_MIN_ORDER: f64 = 4.0;
const LINE_PANEL_POINTS: usize = 16;

impl SpikeEngine {
    pub fn new(lambda: &[f64], a: f64, beta: f64, tol: f64) -> Result<Self> {
        check_inputs(lambda, a, lambda.len(), beta)?;
        let n = lambda.len();
        let x = 0.5 * beta * a * n as f64;
        let tau: Vec<f64> = lambda.iter().map(|l| x * l).collect();
        let mode = if a == 0.0 {
            Mode::Unit
        } else if 0.5 * beta * (n as f64) < LINE_MIN_ORDER {
            Mode::Series
        } else {
            Mode::Line(build_line(&tau, beta)?)
        };
        let mut eng = Self { beta, x, tol, tau, current: 0.0, pending: None, pending_line: None, mode };
        eng.current = eng.full_eval(&eng.tau.clone())?;
        Ok(eng)
    }

    /// log Xi of the committed state.
    pub fn log_value(&self) -> f64 {
        self.current
    }

    /// Recomputes log Xi of the committed state from scratch.
    pub fn recompute(&self) -> Result<f64> {
        self.full_eval(&self.tau)
    }

    fn full_eval(&self, tau: &[f64]) -> Result<f64> {
        match &self.mode {
            Mode::Unit => Ok(0.0),
            Mode::Series => Ok(series_from_points(tau, self.beta, self.tol)?.log_value),
            Mode::Line(st) => {
                let (sums, s0) = line_sums(st, tau);
                line_value(st, &sums, s0, self.beta, tau.len())
            }
        }
    }

    /// log Xi with eigenvalue `j` moved to `value`; commit with [`Self::accept`].
    pub fn propose(&mut self, j: usize, value: f64) -> Result<f64> {
        if j >= self.tau.len() {
            return Err(Error::IndexOutOfRange { index: j, len: self.tau.len() });
        }
        let t_new = self.x * value;
        let n = self.tau.len();
        let beta = self.beta;
        let out = match &mut self.mode {
            Mode::Unit => 0.0,
            Mode::Series => {
                let mut tau = self.tau.clone();
                tau[j] = t_new;
                series_from_points(&tau, beta, self.tol)?.log_value
            }
            Mode::Line(st) => {
                let t_old = self.tau[j];
                let stale = st.c - t_new < 0.5 * st.dmin || st.moves_since_build >= 4 * n;
                let incremental = if stale {
                    None
                } else {
                    for ((p, s), &y) in st.pending_sums.iter_mut().zip(&st.sums).zip(&st.ys) {
                        let w = Complex64::new(st.c, y);
                        *p = s + ((w - t_new) / (w - t_old)).ln();
                    }
                    st.pending_s0 = st.s0 + (st.c - t_new).ln() - (st.c - t_old).ln();
                    line_eval(st, &st.pending_sums, st.pending_s0, beta, n)
                };
                match incremental {
                    Some(v) => v,
                    None => {
                        // Evaluate on a line through the proposal's own saddle;
                        // it replaces the current line only if accepted.
                        let mut tau = self.tau.clone();
                        tau[j] = t_new;
                        let mut fresh = build_line(&tau, beta)?;
                        let (sums, s0) = line_sums(&fresh, &tau);
                        let v = line_value(&fresh, &sums, s0, beta, n)?;
                        fresh.sums = sums;
                        fresh.s0 = s0;
                        self.pending_line = Some(Box::new(fresh));
                        v
                    }
                }
            }
        };
        self.pending = Some((j, t_new, out));
        Ok(out)
    }

    /// Commits the last proposal.
    pub fn accept(&mut self) {
        let Some((j, t_new, value)) = self.pending.take() else {
            return;
        };
        self.tau[j] = t_new;
        self.current = value;
        if let Some(fresh) = self.pending_line.take() {
            self.mode = Mode::Line(*fresh);
        } else if let Mode::Line(st) = &mut self.mode {
            std::mem::swap(&mut st.sums, &mut st.pending_sums);
            st.s0 = st.pending_s0;
            st.moves_since_build += 1;
        }
    }

    /// Drops the last proposal.
    pub fn reject(&mut self) {
        self.pending = None;
        self.pending_line = None;
    }

    pub fn uses_line_integral(&self) -> bool {
        matches!(self.mode, Mode::Line(_))
    }

    /// Number of quadrature nodes on the current line (0 off line mode).
    pub fn line_nodes(&self) -> usize {
        match &self.mode {
            Mode::Line(st) => st.ys.len(),
            _ => 0,
        }
    }
}

/// Places the line at the saddle of e^t prod (t - tau_j)^(-beta/2) and lays out
/// Gauss-Legendre panels on y in [0, inf).
fn build_line(tau: &[f64], beta: f64) -> Result<LineState> {
    let hb = 0.5 * beta;
    let n = tau.len() as f64;
    let tmax = tau.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let phi = |t: f64| hb * tau.iter().map(|u| 1.0 / (t - u)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (tmax, tmax + hb * n + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let d: Vec<f64> = tau.iter().map(|u| c - u).collect();
    let dmin = c - tmax;
    if !(dmin > 0.0) {
        return Err(Error::DomainViolation("saddle point coincides with an eigenvalue".into()));
    }
    let sigma = 1.0 / (hb * d.iter().map(|v| 1.0 / (v * v)).sum::<f64>()).sqrt();
    let bound = |y: f64| {
        (-0.5 * hb * d.iter().map(|v| (y * y / (v * v)).ln_1p()).sum::<f64>()).exp()
    };
    let (gx, gw) = gauss_legendre(LINE_PANEL_POINTS);
    let (mut ys, mut ws) = (Vec::new(), Vec::new());
    let mut lo = 0.0;
    let mut width = (0.5 * sigma).min(0.5 * dmin).min(6.0);
    for panel in 0..4000 {
        let hi = lo + width;
        let hw = 0.5 * width;
        for (xi, wi) in gx.iter().zip(&gw) {
            ys.push(lo + hw * (1.0 + xi));
            ws.push(hw * wi);
        }
        lo = hi;
        if bound(lo) * lo < 1e-17 * sigma {
            break;
        }
        if panel >= 16 {
            width = (width * 1.3).min(6.0);
        }
    }
    let len = ys.len();
    let mut st = LineState {
        c,
        dmin,
        ys,
        ws,
        sums: vec![Complex64::new(0.0, 0.0); len],
        s0: 0.0,
        pending_sums: vec![Complex64::new(0.0, 0.0); len],
        pending_s0: 0.0,
        moves_since_build: 0,
    };
    let (sums, s0) = line_sums(&st, tau);
    st.sums = sums;
    st.s0 = s0;
    Ok(st)
}

fn line_sums(st: &LineState, tau: &[f64]) -> (Vec<Complex64>, f64) {
    let sums = st
        .ys
        .iter()
        .map(|&y| {
            let w = Complex64::new(st.c, y);
            tau.iter().map(|&u| (w - u).ln()).sum()
        })
        .collect();
    let s0 = tau.iter().map(|u| (st.c - u).ln()).sum();
    (sums, s0)
}

fn line_value(st: &LineState, sums: &[Complex64], s0: f64, beta: f64, n: usize) -> Result<f64> {
    line_eval(st, sums, s0, beta, n).ok_or_else(|| {
        Error::DomainViolation("Bromwich line integral lost its significant digits".into())
    })
}

/// `None` when cancellation along the line leaves fewer than ~8 digits.
fn line_eval(st: &LineState, sums: &[Complex64], s0: f64, beta: f64, n: usize) -> Option<f64> {
    let hb = 0.5 * beta;
    let (mut acc, mut mass) = (0.0, 0.0);
    for ((s, &y), &w) in sums.iter().zip(&st.ys).zip(&st.ws) {
        let e = Complex64::new(hb * s0 - hb * s.re, y - hb * s.im).exp();
        acc += w * e.re;
        mass += w * e.norm();
    }
    if !(acc > 1e-8 * mass) {
        return None;
    }
    let nn = hb * n as f64;
    Some(ln_gamma(nn) - PI.ln() + st.c - hb * s0 + acc.ln())
}

/// One entry of the identity report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub abs_err: f64,
    /// abs_err / max(|reference|, 1).
    pub rel_err: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(name: String, value: f64, reference: f64, tolerance: f64) -> Self {
        let abs_err = (value - reference).abs();
        let rel_err = abs_err / reference.abs().max(1.0);
        Self { name, value, reference, abs_err, rel_err, tolerance, passed: rel_err <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JackReport {
    pub n: usize,
    pub beta: f64,
    pub k_max: usize,
    pub seed: u64,
    pub lambda: Vec<f64>,
    pub checks: Vec<IdentityCheck>,
    pub passed: bool,
}

pub const GENERATING_TOL: f64 = 1e-10;
pub const JACK_TOL: f64 = 1e-9;

/// Checks the generating-function identity, the special values and the
/// Cauchy residue extraction. `lambda` defaults to n seeded uniforms in [-1, 1].
pub fn verify_jack_identities(
    n: usize,
    beta: f64,
    k_max: usize,
    lambda: Option<&[f64]>,
    seed: u64,
) -> Result<JackReport> {
    if n == 0 || !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("need n >= 1 and beta > 0 (n={n}, beta={beta})")));
    }
    let lambda: Vec<f64> = match lambda {
        Some(l) if l.len() == n => l.to_vec(),
        Some(l) => {
            return Err(Error::InvalidArgument(format!("expected {n} values, got {}", l.len())))
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
    };
    let mut checks = Vec::new();
    let series = series_coeffs(&lambda, beta, k_max);
    let jack: Vec<f64> = (0..=k_max).map(|k| series.coeffs[k] * row_factor(beta, k)).collect();

    for a in [0.01f64, 0.05] {
        let sum: f64 = (0..=k_max)
            .map(|k| jack[k] / row_factor(beta, k) * a.powi(k as i32))
            .sum();
        let direct: f64 = lambda.iter().map(|l| (1.0 - a * l).powf(-0.5 * beta)).product();
        checks.push(IdentityCheck::new(format!("generating_function(a={a})"), sum, direct, GENERATING_TOL));
    }

    let spike = lambda[0];
    let mut single = vec![0.0; n];
    single[0] = spike;
    let ones = vec![1.0; n];
    let reversed: Vec<f64> = lambda.iter().rev().cloned().collect();
    let doubled: Vec<f64> = lambda.iter().map(|l| 2.0 * l).collect();
    for k in 0..=k_max {
        checks.push(IdentityCheck::new(
            format!("single_spike(k={k})"),
            jack_row_value(&single, beta, k),
            spike.powi(k as i32),
            JACK_TOL,
        ));
        checks.push(IdentityCheck::new(
            format!("all_ones(k={k})"),
            jack_row_value(&ones, beta, k),
            jack_row_ones(n, beta, k),
            JACK_TOL,
        ));
    }
    if k_max >= 1 {
        checks.push(IdentityCheck::new("degree_one".into(), jack[1], lambda.iter().sum(), JACK_TOL));
    }
    checks.push(IdentityCheck::new(
        format!("permutation(k={k_max})"),
        jack_row_value(&reversed, beta, k_max),
        jack[k_max],
        JACK_TOL,
    ));
    checks.push(IdentityCheck::new(
        format!("homogeneity(k={k_max})"),
        jack_row_value(&doubled, beta, k_max),
        2f64.powi(k_max as i32) * jack[k_max],
        JACK_TOL,
    ));

    let rho = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let radius = if rho > 0.0 { 0.5 / rho } else { 1.0 };
    let spec = ContourSpec::new(ContourKind::Circle { radius }, 0.0)?;
    let hb = 0.5 * beta;
    for k in 0..=k_max {
        let g = |z: Complex64| {
            let lg: Complex64 = lambda.iter().map(|&l| -hb * (1.0 - z * l).ln()).sum();
            lg.exp() / z.powi(k as i32 + 1)
        };
        let v = contour_integral(g, &spec, 8)?;
        checks.push(IdentityCheck::new(format!("residue(k={k})"), v.re, series.coeffs[k], JACK_TOL));
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(JackReport { n, beta, k_max, seed, lambda, checks, passed })
}
