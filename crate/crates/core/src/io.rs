//! Text formats: potential and equilibrium-measure JSON, run configuration
//! JSON, and sample CSV files with a commented provenance header.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::equilibrium::EquilibriumMeasure;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::sampler::{EmpiricalSample, SampleMethod};

/// Largest coefficient list accepted from a file.
pub const MAX_COEFFS: usize = 64;
/// Column holding the draws in a sample file.
pub const SAMPLE_COLUMN: &str = "xi_max";
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PotentialInput {
    Bare(Vec<f64>),
    Object { coeffs: Vec<f64> },
}

/// A potential as `{"coeffs": [c0, c1, ...]}` or a bare ascending array.
pub fn parse_potential_json(data: &[u8]) -> Result<Potential> {
    let input: PotentialInput = serde_json::from_slice(data).map_err(parse_err)?;
    let coeffs = match input {
        PotentialInput::Bare(c) | PotentialInput::Object { coeffs: c } => c,
    };
    if coeffs.len() > MAX_COEFFS {
        return Err(Error::Parse(format!("{} coefficients exceed the limit {MAX_COEFFS}", coeffs.len())));
    }
    Potential::new(coeffs)
}

/// An equilibrium measure as written by the `eqm` command (the measure object
/// itself, or the full `eqm` output holding it under `"measure"`).
pub fn parse_eqm_json(data: &[u8]) -> Result<EquilibriumMeasure> {
    let value: serde_json::Value = serde_json::from_slice(data).map_err(parse_err)?;
    let inner = value.get("measure").cloned().unwrap_or(value);
    let too_long = |key: &str| inner.get(key).and_then(|v| v.as_array()).is_some_and(|a| a.len() > MAX_COEFFS);
    let nested = inner
        .get("potential")
        .and_then(|p| p.get("coeffs"))
        .and_then(|v| v.as_array())
        .is_some_and(|a| a.len() > MAX_COEFFS);
    if too_long("h") || nested {
        return Err(Error::Parse("coefficient list too long".into()));
    }
    serde_json::from_value(inner).map_err(parse_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Run configuration; JSON keys mirror the command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Path of a potential JSON file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `direct` or `mcmc` for the sample command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Sample file for the ks command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    /// Tie tolerance for maximizers of G.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_tie: Option<f64>,
    /// KS distance above which `ks` reports a verification failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_ks: Option<f64>,
}

pub const MAX_N: usize = 100_000;
pub const MAX_SWEEP: usize = 1_000_000;

impl RunConfig {
    /// Fields of `over` replace those of `self` where present.
    pub fn overlay(self, over: RunConfig) -> RunConfig {
        RunConfig {
            command: over.command.or(self.command),
            potential: over.potential.or(self.potential),
            coeffs: over.coeffs.or(self.coeffs),
            a: over.a.or(self.a),
            a_min: over.a_min.or(self.a_min),
            a_max: over.a_max.or(self.a_max),
            a_count: over.a_count.or(self.a_count),
            alpha: over.alpha.or(self.alpha),
            beta: over.beta.or(self.beta),
            n: over.n.or(self.n),
            trials: over.trials.or(self.trials),
            steps: over.steps.or(self.steps),
            burn_in: over.burn_in.or(self.burn_in),
            thin: over.thin.or(self.thin),
            seed: over.seed.or(self.seed),
            method: over.method.or(self.method),
            sample: over.sample.or(self.sample),
            k_max: over.k_max.or(self.k_max),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            tol_tie: over.tol_tie.or(self.tol_tie),
            tol_ks: over.tol_ks.or(self.tol_ks),
        }
    }

    /// Checks every numeric field that is present.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        let finite = [self.a, self.a_min, self.a_max, self.alpha];
        if finite.iter().flatten().any(|x| !x.is_finite()) {
            return bad("spike values must be finite");
        }
        if let Some(c) = &self.coeffs {
            if c.len() > MAX_COEFFS {
                return bad("too many coefficients");
            }
            Potential::new(c.clone())?;
        }
        if self.beta.is_some_and(|b| !(b > 0.0 && b.is_finite())) {
            return bad("beta must be positive");
        }
        if self.n.is_some_and(|n| n == 0 || n > MAX_N) {
            return bad("n must lie in 1..=100000");
        }
        if self.a_count.is_some_and(|c| c == 0 || c > MAX_SWEEP) {
            return bad("a-count must lie in 1..=1000000");
        }
        if let (Some(lo), Some(hi)) = (self.a_min, self.a_max) {
            if lo > hi {
                return bad("a-min exceeds a-max");
            }
        }
        if self.trials == Some(0) {
            return bad("trials must be positive");
        }
        if let (Some(s), Some(b)) = (self.steps, self.burn_in) {
            if s <= b {
                return bad("steps must exceed burn-in");
            }
        }
        let tols = [self.tol_tie, self.tol_ks];
        if tols.iter().flatten().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("tolerances must be positive");
        }
        if let Some(m) = &self.method {
            if m != "direct" && m != "mcmc" {
                return bad("method must be direct or mcmc");
            }
        }
        Ok(())
    }

    /// Short hash of the canonical JSON form.
    /// Digest of the settings that determine results; the output path is excluded.
    pub fn hash(&self) -> String {
        let keyed = RunConfig { out: None, ..self.clone() };
        let text = serde_json::to_string(&keyed).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A validated configuration from JSON.
pub fn parse_config_json(data: &[u8]) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_slice(data).map_err(parse_err)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Contents of a sample CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    /// `# key: value` lines in file order.
    pub header: Vec<(String, String)>,
    pub values: Vec<f64>,
}

impl SampleFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn field<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)
            .ok_or_else(|| Error::Parse(format!("missing header field {key}")))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad header field {key}")))
    }

    /// Rebuilds the sample metadata from the header.
    pub fn to_sample(&self) -> Result<EmpiricalSample> {
        let method = match self.get("method") {
            Some("Mcmc") => SampleMethod::Mcmc,
            Some("DirectGaussian") => SampleMethod::DirectGaussian,
            _ => return Err(Error::Parse("missing or unknown method".into())),
        };
        let mut values = self.values.clone();
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalSample {
            values,
            n: self.field("n")?,
            beta: self.field("beta")?,
            a: self.field("a")?,
            potential_hash: self.get("potential_hash").unwrap_or_default().to_string(),
            seed: self.field("seed")?,
            method,
            diagnostics: None,
        })
    }
}

/// Reads `# key: value` header lines followed by a CSV table with an
/// `xi_max` column.
pub fn parse_samples_csv(data: &[u8]) -> Result<SampleFile> {
    let text = std::str::from_utf8(data).map_err(parse_err)?;
    let mut header = Vec::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line[1..].trim();
        if let Some((k, v)) = body.split_once(':') {
            header.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(data);
    let column = reader
        .headers()
        .map_err(parse_err)?
        .iter()
        .position(|h| h.trim() == SAMPLE_COLUMN)
        .ok_or_else(|| Error::Parse(format!("no {SAMPLE_COLUMN} column")))?;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(parse_err)?;
        let field = record.get(column).ok_or_else(|| Error::Parse("short record".into()))?;
        let x: f64 = field.trim().parse().map_err(parse_err)?;
        if !x.is_finite() {
            return Err(Error::Parse(format!("non-finite draw {field}")));
        }
        values.push(x);
    }
    Ok(SampleFile { header, values })
}

/// Sample CSV with a provenance header.
pub fn write_samples_csv(sample: &EmpiricalSample, config_hash: &str) -> String {
    let mut out = String::new();
    let method = match sample.method {
        SampleMethod::DirectGaussian => "DirectGaussian",
        SampleMethod::Mcmc => "Mcmc",
    };
    let mut line = |k: &str, v: String| out.push_str(&format!("# {k}: {v}\n"));
    line("library", format!("spikebeta {LIBRARY_VERSION}"));
    line("config_hash", config_hash.to_string());
    line("method", method.to_string());
    line("n", sample.n.to_string());
    line("beta", sample.beta.to_string());
    line("a", sample.a.to_string());
    line("seed", sample.seed.to_string());
    line("potential_hash", sample.potential_hash.clone());
    line("draws", sample.values.len().to_string());
    if let Some(d) = &sample.diagnostics {
        line("acceptance_rate", fmt_f64(d.acceptance_rate));
        line("autocorrelation_time", fmt_f64(d.autocorrelation_time));
        line("thin", d.thin.to_string());
        line("burn_in", d.burn_in.to_string());
        line("adaptation_converged", d.adaptation_converged.to_string());
    }
    out.push_str(SAMPLE_COLUMN);
    out.push('\n');
    for v in &sample.values {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::equilibrium;
    use proptest::prelude::*;

    #[test]
    fn potential_forms() {
        let p = parse_potential_json(br#"{"coeffs": [0, 0, 1]}"#).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 0.0, 1.0]);
        assert_eq!(parse_potential_json(b"[1, 0, 2]").unwrap().coeffs(), &[1.0, 0.0, 2.0]);
        assert_eq!(parse_potential_json(b"[0, 1]").unwrap_err(), Error::OddDegree(1));
        assert!(matches!(parse_potential_json(b"{"), Err(Error::Parse(_))));
        let long = format!("[{}1]", "0,".repeat(80));
        assert!(matches!(parse_potential_json(long.as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn eqm_round_trip() {
        let eqm = equilibrium(&Potential::new(vec![0.0, 0.0, 1.0]).unwrap()).unwrap();
        let text = serde_json::to_string(&eqm).unwrap();
        let back = parse_eqm_json(text.as_bytes()).unwrap();
        assert_eq!(back.b2, eqm.b2);
        assert_eq!(back.h_coeffs, eqm.h_coeffs);
        let wrapped = format!(r#"{{"measure": {text}, "extra": 1}}"#);
        assert_eq!(parse_eqm_json(wrapped.as_bytes()).unwrap().ell, eqm.ell);
        assert!(parse_eqm_json(br#"{"b1": 1, "b2": 0, "h": [1], "ell": 0, "potential": {"coeffs": [0,0,1]}}"#).is_err());
    }

    #[test]
    fn config_validation_and_overlay() {
        let cfg = parse_config_json(br#"{"command": "predict", "coeffs": [0,0,1], "a": 2, "beta": 2, "n": 200}"#).unwrap();
        assert_eq!(cfg.n, Some(200));
        assert!(matches!(parse_config_json(br#"{"beta": -1}"#), Err(Error::InvalidArgument(_))));
        assert!(matches!(parse_config_json(br#"{"bogus": 1}"#), Err(Error::Parse(_))));
        assert!(matches!(parse_config_json(br#"{"a-min": 2, "a-max": 1}"#), Err(Error::InvalidArgument(_))));
        assert!(matches!(parse_config_json(br#"{"method": "gibbs"}"#), Err(Error::InvalidArgument(_))));
        let over = RunConfig { n: Some(50), ..Default::default() };
        let merged = cfg.clone().overlay(over);
        assert_eq!(merged.n, Some(50));
        assert_eq!(merged.a, Some(2.0));
        assert_eq!(cfg.hash(), cfg.clone().hash());
        assert_ne!(cfg.hash(), merged.hash());
    }

    #[test]
    fn sample_csv_round_trip() {
        let sample = EmpiricalSample {
            values: vec![0.1, 1.0 / 3.0, 2.5],
            n: 10,
            beta: 2.0,
            a: 1.5,
            potential_hash: "abc".into(),
            seed: 7,
            method: SampleMethod::DirectGaussian,
            diagnostics: None,
        };
        let text = write_samples_csv(&sample, "h");
        let file = parse_samples_csv(text.as_bytes()).unwrap();
        assert_eq!(file.values, sample.values);
        assert_eq!(file.get("config_hash"), Some("h"));
        assert_eq!(file.to_sample().unwrap(), sample);
        assert!(matches!(parse_samples_csv(b"x\n1\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_samples_csv(b"xi_max\nfoo\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_samples_csv(b"xi_max\ninf\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(1.5), "1.5000000000000000e0");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    proptest! {
        #[test]
        fn formatted_floats_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }

        #[test]
        fn parsers_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = parse_potential_json(&bytes);
            let _ = parse_eqm_json(&bytes);
            let _ = parse_config_json(&bytes);
            let _ = parse_samples_csv(&bytes);
        }
    }
}
