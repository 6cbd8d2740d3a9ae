//! Monte Carlo samplers for the largest eigenvalue: dense spiked Gaussian
//! ensembles (beta = 1, 2, 4) and a Metropolis chain on the general-beta
//! spiked log-gas. Also the dense Hermitian eigensolver they share.

use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::equilibrium::equilibrium;
use crate::error::{Error, Result};
use crate::jack::SpikeEngine;
use crate::limit_laws::LimitLaw;
use crate::potential::Potential;

// ---------------------------------------------------------------------------
// Eigensolver

/// Matrix entry type for the Householder reduction.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self> + AddAssign + SubAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn conj(self) -> Self;
    fn abs2(self) -> f64;
    fn re(self) -> f64;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn conj(self) -> Self {
        self
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn re(self) -> f64 {
        self
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn re(self) -> f64 {
        self.re
    }
}

/// Reduces a Hermitian matrix (row-major, full storage, overwritten) to a real
/// symmetric tridiagonal matrix with the same spectrum. Returns the diagonal
/// and the moduli of the off-diagonal.
pub fn tridiagonalize<T: Scalar>(a: &mut [T], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n, "matrix storage does not match n");
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![T::ZERO; n];
    let mut q = vec![T::ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let off = k + 1;
        let m = n - off;
        let x0 = a[off * n + k];
        let tail: f64 = (1..m).map(|i| a[(off + i) * n + k].abs2()).sum();
        let x0abs = x0.abs2().sqrt();
        if tail == 0.0 {
            e[k] = x0abs;
            continue;
        }
        let alpha = (x0abs * x0abs + tail).sqrt();
        let phase = if x0abs > 0.0 { x0 * (1.0 / x0abs) } else { T::ONE };
        for i in 0..m {
            v[i] = a[(off + i) * n + k];
        }
        v[0] += phase * alpha;
        let tau = 1.0 / (alpha * (alpha + x0abs));
        // q = tau A v, then q -= (tau/2)(v* q) v
        let mut vq = T::ZERO;
        for i in 0..m {
            let row = &a[(off + i) * n + off..(off + i) * n + n];
            let mut s = T::ZERO;
            for (aij, vj) in row.iter().zip(&v[..m]) {
                s += *aij * *vj;
            }
            q[i] = s * tau;
            vq += v[i].conj() * q[i];
        }
        let kk = vq * (0.5 * tau);
        for i in 0..m {
            q[i] -= kk * v[i];
        }
        for i in 0..m {
            let (vi, qi) = (v[i], q[i]);
            let row = &mut a[(off + i) * n + off..(off + i) * n + n];
            for ((aij, vj), qj) in row.iter_mut().zip(&v[..m]).zip(&q[..m]) {
                *aij -= vi * qj.conj() + qi * vj.conj();
            }
        }
        e[k] = alpha;
    }
    if n >= 2 {
        e[n - 2] = a[(n - 1) * n + n - 2].abs2().sqrt();
    }
    let d = (0..n).map(|i| a[i * n + i].re()).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below x.
pub fn sturm_count(d: &[f64], e2: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut q = 0.0;
    for i in 0..d.len() {
        q = d[i] - x - if i > 0 { e2[i - 1] / q } else { 0.0 };
        if q.abs() <= pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1] } else { 0.0 } + if i + 1 < n { e[i] } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// The eigenvalue with ascending index `k` of a symmetric tridiagonal matrix,
/// by Sturm bisection.
pub fn tridiagonal_eigenvalue(d: &[f64], e: &[f64], k: usize) -> f64 {
    let e2: Vec<f64> = e.iter().map(|x| x * x).collect();
    kth(d, e, &e2, k)
}

fn kth(d: &[f64], e: &[f64], e2: &[f64], k: usize) -> f64 {
    let (mut lo, mut hi) = gershgorin(d, e);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let pivmin = f64::MIN_POSITIVE * e2.iter().fold(1.0f64, |m, &x| m.max(x));
    lo -= 2.0 * f64::EPSILON * scale;
    hi += 2.0 * f64::EPSILON * scale;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * scale {
            break;
        }
        if sturm_count(d, e2, mid, pivmin) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// All eigenvalues, ascending.
pub fn tridiagonal_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let e2: Vec<f64> = e.iter().map(|x| x * x).collect();
    (0..d.len()).map(|k| kth(d, e, &e2, k)).collect()
}

/// All eigenvalues of a Hermitian matrix (consumed), ascending.
pub fn hermitian_eigenvalues<T: Scalar>(mut a: Vec<T>, n: usize) -> Vec<f64> {
    let (d, e) = tridiagonalize(&mut a, n);
    tridiagonal_eigenvalues(&d, &e)
}

/// Largest eigenvalue of a Hermitian matrix (consumed).
pub fn hermitian_max_eigenvalue<T: Scalar>(mut a: Vec<T>, n: usize) -> f64 {
    let (d, e) = tridiagonalize(&mut a, n);
    tridiagonal_eigenvalue(&d, &e, n - 1)
}

// ---------------------------------------------------------------------------
// Samples

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMethod {
    DirectGaussian,
    Mcmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcDiagnostics {
    /// Acceptance rate after burn-in.
    pub acceptance_rate: f64,
    /// Integrated autocorrelation time of the max, in steps.
    pub autocorrelation_time: f64,
    pub effective_sample_size: f64,
    /// Mean frozen proposal scale over coordinates.
    pub step_size: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub adaptation_converged: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    /// Draws of the largest eigenvalue, ascending.
    pub values: Vec<f64>,
    pub n: usize,
    pub beta: f64,
    pub a: f64,
    pub potential_hash: String,
    pub seed: u64,
    pub method: SampleMethod,
    pub diagnostics: Option<McmcDiagnostics>,
}

impl EmpiricalSample {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let len = self.values.len() as f64;
        self.values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (len - 1.0)
    }
}

/// Generator for trial or chain `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Largest eigenvalue of one draw of W + A with V = x^2.
///
/// Entry variances match the eigenvalue density e^{-(beta/2) n sum lambda^2};
/// the spike a/2 on the first diagonal entry (quaternion entry for beta = 4)
/// produces the factor Xi(lambda; a, beta, n).
pub fn gaussian_spiked_draw(n: usize, beta: u32, a: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let nf = n as f64;
    match beta {
        1 => {
            let (sd, so) = ((1.0 / nf).sqrt(), (0.5 / nf).sqrt());
            let mut m = vec![0.0f64; n * n];
            for i in 0..n {
                m[i * n + i] = sd * normal(rng);
                for j in i + 1..n {
                    let x = so * normal(rng);
                    m[i * n + j] = x;
                    m[j * n + i] = x;
                }
            }
            m[0] += 0.5 * a;
            Ok(hermitian_max_eigenvalue(m, n))
        }
        2 => {
            let (sd, so) = ((0.5 / nf).sqrt(), (0.25 / nf).sqrt());
            let mut m = vec![Complex64::ZERO; n * n];
            for i in 0..n {
                m[i * n + i] = Complex64::new(sd * normal(rng), 0.0);
                for j in i + 1..n {
                    let z = Complex64::new(so * normal(rng), so * normal(rng));
                    m[i * n + j] = z;
                    m[j * n + i] = z.conj();
                }
            }
            m[0].re += 0.5 * a;
            Ok(hermitian_max_eigenvalue(m, n))
        }
        4 => {
            let (sd, so) = ((0.25 / nf).sqrt(), (0.125 / nf).sqrt());
            let size = 2 * n;
            let mut m = vec![Complex64::ZERO; size * size];
            let mut put = |i: usize, j: usize, q: [f64; 4]| {
                let b = [
                    [Complex64::new(q[0], q[1]), Complex64::new(q[2], q[3])],
                    [Complex64::new(-q[2], q[3]), Complex64::new(q[0], -q[1])],
                ];
                for r in 0..2 {
                    for c in 0..2 {
                        m[(2 * i + r) * size + 2 * j + c] = b[r][c];
                        m[(2 * j + c) * size + 2 * i + r] = b[r][c].conj();
                    }
                }
            };
            for i in 0..n {
                put(i, i, [sd * normal(rng) + if i == 0 { 0.5 * a } else { 0.0 }, 0.0, 0.0, 0.0]);
                for j in i + 1..n {
                    let q = [so * normal(rng), so * normal(rng), so * normal(rng), so * normal(rng)];
                    put(i, j, q);
                }
            }
            Ok(hermitian_max_eigenvalue(m, size))
        }
        _ => Err(Error::UnsupportedBeta(beta as f64)),
    }
}

fn beta_code(beta: f64) -> Result<u32> {
    [1u32, 2, 4]
        .into_iter()
        .find(|&b| b as f64 == beta)
        .ok_or(Error::UnsupportedBeta(beta))
}

/// Runs `trials` independent dense draws, trial t on stream t of `seed`.
/// Work is split over threads; results do not depend on the split.
pub fn sample_gaussian_spiked(n: usize, beta: f64, a: f64, trials: usize, seed: u64) -> Result<EmpiricalSample> {
    let code = beta_code(beta)?;
    if n == 0 || trials == 0 {
        return Err(Error::InvalidArgument("n and trials must be at least 1".into()));
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument(format!("a = {a}")));
    }
    let threads = std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1).min(trials);
    let chunk = trials.div_ceil(threads);
    let mut values = vec![0.0; trials];
    std::thread::scope(|scope| -> Result<()> {
        let handles: Vec<_> = values
            .chunks_mut(chunk)
            .enumerate()
            .map(|(c, out)| {
                scope.spawn(move || -> Result<()> {
                    for (i, slot) in out.iter_mut().enumerate() {
                        let mut rng = stream_rng(seed, (c * chunk + i) as u64);
                        *slot = gaussian_spiked_draw(n, code, a, &mut rng)?;
                    }
                    Ok(())
                })
            })
            .collect();
        for h in handles {
            h.join().expect("sampler thread panicked")?;
        }
        Ok(())
    })?;
    values.sort_by(f64::total_cmp);
    Ok(EmpiricalSample {
        values,
        n,
        beta,
        a,
        potential_hash: Potential::new(vec![0.0, 0.0, 1.0])?.hash(),
        seed,
        method: SampleMethod::DirectGaussian,
        diagnostics: None,
    })
}

// ---------------------------------------------------------------------------
// Metropolis chain

/// Target acceptance rate of the burn-in adaptation.
pub const TARGET_ACCEPTANCE: f64 = 0.35;
/// Spike-weight series tolerance used by the chain.
pub const CHAIN_SERIES_TOL: f64 = 1e-14;

/// Log-gas state with log target beta sum_{i<j} log|l_i - l_j|
/// - (beta/2) n sum V(l_j) + log Xi(l; a, beta, n).
#[derive(Debug, Clone)]
pub struct Gas {
    lambda: Vec<f64>,
    beta: f64,
    v: Potential,
    engine: SpikeEngine,
    pending: Option<(usize, f64)>,
}

impl Gas {
    pub fn new(v: &Potential, lambda: Vec<f64>, beta: f64, a: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta = {beta}")));
        }
        let engine = SpikeEngine::new(&lambda, a, beta, CHAIN_SERIES_TOL)?;
        Ok(Self { lambda, beta, v: v.clone(), engine, pending: None })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn max(&self) -> f64 {
        self.lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Change of the log target if coordinate j moves to `value`.
    pub fn propose(&mut self, j: usize, value: f64) -> Result<f64> {
        let old = self.lambda[j];
        let n = self.lambda.len() as f64;
        let mut vdm = 0.0;
        for (i, &l) in self.lambda.iter().enumerate() {
            if i != j {
                vdm += ((value - l) / (old - l)).abs().ln();
            }
        }
        let field = self.v.eval(value, 0) - self.v.eval(old, 0);
        let before = self.engine.log_value();
        let after = self.engine.propose(j, value)?;
        self.pending = Some((j, value));
        Ok(self.beta * vdm - 0.5 * self.beta * n * field + after - before)
    }

    pub fn accept(&mut self) {
        if let Some((j, value)) = self.pending.take() {
            self.lambda[j] = value;
            self.engine.accept();
        }
    }

    pub fn reject(&mut self) {
        self.pending = None;
        self.engine.reject();
    }
}

/// Integrated autocorrelation time with Sokal's self-consistent window (c = 6).
pub fn integrated_autocorrelation(x: &[f64]) -> f64 {
    let len = x.len();
    if len < 4 {
        return 1.0;
    }
    let mean = x.iter().sum::<f64>() / len as f64;
    let c0 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..len / 2 {
        let c: f64 = x[..len - lag]
            .iter()
            .zip(&x[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / len as f64;
        tau += 2.0 * c / c0;
        if lag as f64 >= 6.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Random-scan Metropolis on the spiked log-gas with single-coordinate
/// Gaussian proposals. Per-coordinate scales adapt towards
/// [`TARGET_ACCEPTANCE`] during burn-in and are frozen afterwards. The max
/// is recorded every `thin` steps after burn-in; `thin = 0` thins by the
/// estimated integrated autocorrelation time.
#[allow(clippy::too_many_arguments)]
pub fn mcmc_spectrum(
    v: &Potential,
    n: usize,
    beta: f64,
    a: f64,
    steps: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> Result<EmpiricalSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if steps <= burn_in {
        return Err(Error::InvalidArgument(format!("steps {steps} must exceed burn-in {burn_in}")));
    }
    let eqm = equilibrium(v)?;
    let (m, r) = (eqm.center(), eqm.radius());
    let start: Vec<f64> = (0..n)
        .map(|j| m + r * (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos())
        .collect();
    let mut gas = Gas::new(v, start, beta, a)?;
    let mut rng = stream_rng(seed, 0);

    let mut log_step = vec![(r / n as f64).ln(); n];
    let mut visits = vec![0usize; n];
    let mut window = (0usize, 0usize);
    let mut accepted_after = 0usize;
    let mut trace = Vec::with_capacity(steps - burn_in);
    for step in 0..steps {
        let j = rng.random_range(0..n);
        let proposal = gas.lambda()[j] + log_step[j].exp() * normal(&mut rng);
        let delta = gas.propose(j, proposal)?;
        let u: f64 = rng.random();
        let accept = delta >= 0.0 || u < delta.exp();
        if accept {
            gas.accept();
        } else {
            gas.reject();
        }
        if step < burn_in {
            visits[j] += 1;
            let rate = 1.0 / (visits[j] as f64).powf(0.6);
            log_step[j] += rate * (accept as u8 as f64 - TARGET_ACCEPTANCE);
            if step >= burn_in / 2 {
                window.0 += 1;
                window.1 += accept as usize;
            }
        } else {
            accepted_after += accept as usize;
            trace.push(gas.max());
        }
    }

    let mut warnings = Vec::new();
    let burn_rate = if window.0 > 0 { window.1 as f64 / window.0 as f64 } else { f64::NAN };
    let adaptation_converged = (burn_rate - TARGET_ACCEPTANCE).abs() <= 0.1;
    if !adaptation_converged {
        warnings.push(Error::NonConvergedAdaptation(burn_rate).to_string());
    }
    let tau = integrated_autocorrelation(&trace);
    let thin = if thin == 0 { tau.ceil() as usize } else { thin };
    let mut values: Vec<f64> = trace.iter().step_by(thin).copied().collect();
    values.sort_by(f64::total_cmp);
    let mean_step = log_step.iter().map(|l| l.exp()).sum::<f64>() / n as f64;
    Ok(EmpiricalSample {
        values,
        n,
        beta,
        a,
        potential_hash: v.hash(),
        seed,
        method: SampleMethod::Mcmc,
        diagnostics: Some(McmcDiagnostics {
            acceptance_rate: accepted_after as f64 / (steps - burn_in) as f64,
            autocorrelation_time: tau,
            effective_sample_size: trace.len() as f64 / tau,
            step_size: mean_step,
            burn_in,
            thin,
            adaptation_converged,
            warnings,
        }),
    })
}

/// Default burn-in: 20% of the steps.
pub fn default_burn_in(steps: usize) -> usize {
    steps / 5
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsSummary {
    pub d: f64,
    pub trials: usize,
    /// Location of the supremum.
    pub argmax: f64,
    /// Asymptotic Kolmogorov p-value for d.
    pub p_value: f64,
}

/// Asymptotic P(sqrt(N) D > t) from the Kolmogorov series.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// KS distance between the sample and the law's mixture CDF at size `n`,
/// evaluated at every jump of the empirical CDF.
pub fn ks_compare(sample: &EmpiricalSample, law: &LimitLaw, n: f64) -> Result<(f64, KsSummary)> {
    ks_against(&sample.values, |x| law.cdf_x(x, n))
}

/// One-sample KS distance against an arbitrary continuous CDF.
pub fn ks_against<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<(f64, KsSummary)> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len() as f64;
    let (mut d, mut argmax) = (0.0, sorted[0]);
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let gap = (f - i as f64 / len).max((i + 1) as f64 / len - f);
        if gap > d {
            d = gap;
            argmax = x;
        }
    }
    let p_value = kolmogorov_survival(len.sqrt() * d);
    Ok((d, KsSummary { d, trials: sorted.len(), argmax, p_value }))
}

/// Two-sample KS distance sup |F_a - F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}
