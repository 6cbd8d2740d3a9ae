//! Command-line front end: equilibrium measures, phase sweeps, predicted
//! limit laws, samplers, KS comparisons and the verification batteries.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use spikebeta::appendix::{self, ZMode};
use spikebeta::equilibrium::{equilibrium, EquilibriumMeasure};
use spikebeta::io::{self, fmt_f64, OutputFormat, RunConfig, LIBRARY_VERSION};
use spikebeta::jack::verify_jack_identities;
use spikebeta::limit_laws::{predict_limit, NuMeasure, ZeroNu};
use spikebeta::phase::{self, PhaseReport, TIE_TOL};
use spikebeta::potential::{check_conditions, Potential};
use spikebeta::sampler::{default_burn_in, ks_compare, mcmc_spectrum, sample_gaussian_spiked};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Lib(#[from] spikebeta::Error),
    #[error("{0}")]
    Input(String),
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

type CliResult<T> = Result<T, CliError>;

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    VerificationFailed(String),
}

#[derive(Parser)]
#[command(name = "spikebeta", version, about = "Largest eigenvalue of spiked beta-ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium measure and standing-condition report (JSON).
    Eqm(Flags),
    /// Regime classification over an a-sweep (CSV by default).
    Phase(Flags),
    /// Predicted limit law and its CDF table at size n.
    Predict(Flags),
    /// Largest-eigenvalue draws (CSV).
    Sample(Flags),
    /// KS distance between a sample file and the predicted law.
    Ks(Flags),
    /// Closed-form against quadrature checks of the M_2 kernels.
    VerifyAppendix(Flags),
    /// Spike-weight series and Jack polynomial identity checks.
    VerifyJack(Flags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eqm(_) => "eqm",
            Command::Phase(_) => "phase",
            Command::Predict(_) => "predict",
            Command::Sample(_) => "sample",
            Command::Ks(_) => "ks",
            Command::VerifyAppendix(_) => "verify-appendix",
            Command::VerifyJack(_) => "verify-jack",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Command::Eqm(f)
            | Command::Phase(f)
            | Command::Predict(f)
            | Command::Sample(f)
            | Command::Ks(f)
            | Command::VerifyAppendix(f)
            | Command::VerifyJack(f) => f,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
struct Flags {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Potential JSON file.
    #[arg(long)]
    potential: Option<String>,
    /// Ascending coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    a_max: Option<f64>,
    #[arg(long)]
    a_count: Option<usize>,
    /// Offset of a from a secondary critical value, in units of 1/n.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Thinning interval; 0 thins by the autocorrelation time.
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// direct (Gaussian matrices, V = x^2) or mcmc.
    #[arg(long)]
    method: Option<String>,
    /// Sample CSV for ks.
    #[arg(long)]
    sample: Option<String>,
    /// Series order for verify-jack.
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    #[arg(long)]
    tol_tie: Option<f64>,
    #[arg(long)]
    tol_ks: Option<f64>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        _ => Err(format!("unknown format {s}")),
    }
}

impl Flags {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            command: None,
            potential: self.potential.clone(),
            coeffs: self.coeffs.clone(),
            a: self.a,
            a_min: self.a_min,
            a_max: self.a_max,
            a_count: self.a_count,
            alpha: self.alpha,
            beta: self.beta,
            n: self.n,
            trials: self.trials,
            steps: self.steps,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            method: self.method.clone(),
            sample: self.sample.clone(),
            k_max: self.k_max,
            out: self.out.clone(),
            format: self.format,
            tol_tie: self.tol_tie,
            tol_ks: self.tol_ks,
        }
    }
}

fn read(path: &str) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn load_config(command: &Command) -> CliResult<RunConfig> {
    let flags = command.flags();
    let base = match &flags.config {
        Some(p) => io::parse_config_json(&read(&p.to_string_lossy())?)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &base.command {
        if c != command.name() {
            return Err(CliError::Input(format!("config is for `{c}`, not `{}`", command.name())));
        }
    }
    let mut cfg = base.overlay(flags.to_config());
    cfg.command = Some(command.name().to_string());
    cfg.validate()?;
    Ok(cfg)
}

fn potential(cfg: &RunConfig) -> CliResult<Potential> {
    match (&cfg.potential, &cfg.coeffs) {
        (Some(_), Some(_)) => Err(CliError::Input("give either --potential or --coeffs".into())),
        (Some(path), None) => Ok(io::parse_potential_json(&read(path)?)?),
        (None, Some(c)) => Ok(Potential::new(c.clone())?),
        (None, None) => Err(CliError::Input("a potential is required (--coeffs or --potential)".into())),
    }
}

fn need<T: Copy>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Input(format!("--{flag} is required")))
}

#[derive(Serialize)]
struct Provenance {
    library: String,
    command: String,
    config_hash: String,
}

fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance {
        library: format!("spikebeta {LIBRARY_VERSION}"),
        command: cfg.command.clone().unwrap_or_default(),
        config_hash: cfg.hash(),
    }
}

fn csv_header(cfg: &RunConfig) -> String {
    let p = provenance(cfg);
    format!("# library: {}\n# command: {}\n# config_hash: {}\n", p.library, p.command, p.config_hash)
}

fn emit(cfg: &RunConfig, text: String) -> CliResult<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io { path: path.clone(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(cfg: &RunConfig, value: serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(&value).expect("values serialize");
    text.push('\n');
    emit(cfg, text)
}

fn run_eqm(cfg: &RunConfig) -> CliResult<Outcome> {
    let v = potential(cfg)?;
    let eqm = equilibrium(&v)?;
    let conditions = check_conditions(&v, &eqm)?;
    emit_json(
        cfg,
        json!({
            "provenance": provenance(cfg),
            "measure": eqm,
            "edge": eqm.edge(),
            "edge_threshold": phase::edge_threshold(&eqm),
            "conditions": conditions,
        }),
    )?;
    Ok(Outcome::Ok)
}

fn sweep_values(cfg: &RunConfig) -> CliResult<Vec<f64>> {
    match (cfg.a, cfg.a_min, cfg.a_max) {
        (Some(a), None, None) => Ok(vec![a]),
        (None, Some(lo), Some(hi)) => {
            let count = cfg.a_count.unwrap_or(11);
            if count == 1 {
                return Ok(vec![lo]);
            }
            Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect())
        }
        _ => Err(CliError::Input("give --a or both --a-min and --a-max".into())),
    }
}

/// Classifies every sweep point on its own thread slice; output order follows a.
fn classify_sweep(eqm: &EquilibriumMeasure, values: &[f64], tie: f64) -> CliResult<Vec<PhaseReport>> {
    let a_c = phase::critical_value(eqm)?;
    let threads = std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1);
    let chunk = values.len().div_ceil(threads).max(1);
    let parts: Vec<spikebeta::Result<Vec<PhaseReport>>> = std::thread::scope(|s| {
        let handles: Vec<_> = values
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|&a| phase::classify_with(eqm, a, a_c, tie)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(values.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn run_phase(cfg: &RunConfig) -> CliResult<Outcome> {
    let v = potential(cfg)?;
    let eqm = equilibrium(&v)?;
    let values = sweep_values(cfg)?;
    let reports = classify_sweep(&eqm, &values, cfg.tol_tie.unwrap_or(TIE_TOL))?;
    match cfg.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Json => emit_json(cfg, json!({ "provenance": provenance(cfg), "reports": reports }))?,
        OutputFormat::Csv => {
            let mut text = csv_header(cfg);
            text.push_str("a,regime,c_of_a,e,a_c,g_max,maximizers,x1,x2,predicted_location\n");
            for r in &reports {
                let x = |i: usize| r.maximizers.get(i).map(|m| fmt_f64(m.x)).unwrap_or_default();
                text.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    fmt_f64(r.a),
                    r.regime.as_str(),
                    fmt_f64(r.c_of_a),
                    fmt_f64(r.e),
                    fmt_f64(r.a_c),
                    fmt_f64(r.g_max),
                    r.maximizers.len(),
                    x(0),
                    x(1),
                    r.predicted_location.map(fmt_f64).unwrap_or_default(),
                ));
            }
            emit(cfg, text)?;
        }
    }
    Ok(Outcome::Ok)
}

fn nu_for(beta: f64) -> Option<&'static dyn NuMeasure> {
    if beta == 2.0 {
        None
    } else {
        Some(&ZeroNu)
    }
}

const CDF_POINTS: usize = 201;

fn run_predict(cfg: &RunConfig) -> CliResult<Outcome> {
    let v = potential(cfg)?;
    let eqm = equilibrium(&v)?;
    let a = need(cfg.a, "a")?;
    let beta = need(cfg.beta, "beta")?;
    let n = need(cfg.n, "n")? as f64;
    let law = predict_limit(&eqm, a, beta, cfg.alpha, nu_for(beta))?;
    let comps: Vec<_> = law
        .components
        .iter()
        .map(|c| json!({ "location": c.location, "scale": c.scale(beta, n), "weight": c.weight, "k": c.k, "kind": c.kind }))
        .collect();
    let lo = law.components.iter().map(|c| c.location - 5.0 * c.scale(beta, n)).fold(f64::INFINITY, f64::min);
    let hi = law.components.iter().map(|c| c.location + 5.0 * c.scale(beta, n)).fold(f64::NEG_INFINITY, f64::max);
    let table: Vec<(f64, f64)> = (0..CDF_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (CDF_POINTS - 1) as f64;
            (x, law.cdf_x(x, n))
        })
        .collect();
    match cfg.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => emit_json(
            cfg,
            json!({ "provenance": provenance(cfg), "n": n, "law": law, "components": comps, "cdf": table }),
        )?,
        OutputFormat::Csv => {
            let mut text = csv_header(cfg);
            text.push_str("x,cdf\n");
            for (x, f) in table {
                text.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(f)));
            }
            emit(cfg, text)?;
        }
    }
    Ok(Outcome::Ok)
}

fn run_sample(cfg: &RunConfig) -> CliResult<Outcome> {
    let a = need(cfg.a, "a")?;
    let beta = need(cfg.beta, "beta")?;
    let n = need(cfg.n, "n")?;
    let seed = need(cfg.seed, "seed")?;
    let sample = match cfg.method.as_deref().unwrap_or("direct") {
        "direct" => {
            if cfg.coeffs.is_some() || cfg.potential.is_some() {
                let v = potential(cfg)?;
                if v.coeffs() != [0.0, 0.0, 1.0] {
                    return Err(CliError::Input("the direct sampler is defined for V = x^2 only".into()));
                }
            }
            sample_gaussian_spiked(n, beta, a, need(cfg.trials, "trials")?, seed)?
        }
        _ => {
            let v = potential(cfg)?;
            let steps = need(cfg.steps, "steps")?;
            let burn = cfg.burn_in.unwrap_or_else(|| default_burn_in(steps));
            mcmc_spectrum(&v, n, beta, a, steps, burn, cfg.thin.unwrap_or(0), seed)?
        }
    };
    if let Some(d) = &sample.diagnostics {
        for w in &d.warnings {
            eprintln!("warning: {w}");
        }
    }
    emit(cfg, io::write_samples_csv(&sample, &cfg.hash()))?;
    Ok(Outcome::Ok)
}

fn run_ks(cfg: &RunConfig) -> CliResult<Outcome> {
    let path = cfg.sample.clone().ok_or_else(|| CliError::Input("--sample is required".into()))?;
    let file = io::parse_samples_csv(&read(&path)?)?;
    let sample = file.to_sample()?;
    let v = match (&cfg.coeffs, &cfg.potential) {
        (None, None) => Potential::new(vec![0.0, 0.0, 1.0])?,
        _ => potential(cfg)?,
    };
    if !sample.potential_hash.is_empty() && sample.potential_hash != v.hash() {
        return Err(CliError::Input("sample was drawn under a different potential".into()));
    }
    let a = cfg.a.unwrap_or(sample.a);
    let beta = cfg.beta.unwrap_or(sample.beta);
    let n = cfg.n.unwrap_or(sample.n) as f64;
    let eqm = equilibrium(&v)?;
    let law = predict_limit(&eqm, a, beta, cfg.alpha, nu_for(beta))?;
    let (d, summary) = ks_compare(&sample, &law, n)?;
    emit_json(cfg, json!({ "provenance": provenance(cfg), "sample": path, "n": n, "d": d, "summary": summary }))?;
    match cfg.tol_ks {
        Some(tol) if d > tol => Ok(Outcome::VerificationFailed(format!("KS distance {d} exceeds {tol}"))),
        _ => Ok(Outcome::Ok),
    }
}

fn run_verify_appendix(cfg: &RunConfig) -> CliResult<Outcome> {
    let mut reports = appendix::standard_reports()?;
    let quad = equilibrium(&Potential::new(vec![0.0, 0.0, 1.0])?)?;
    let near = ZMode::Near { z: num_complex_one() };
    let z = appendix::z_asymptotics_spotcheck(&quad, 2.5, near, cfg.n.unwrap_or(8), cfg.trials.unwrap_or(20_000), cfg.seed.unwrap_or(0))?;
    reports.push(z.report);
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    let outcome = if failed.is_empty() {
        Outcome::Ok
    } else {
        Outcome::VerificationFailed(format!("failed checks: {}", failed.join(", ")))
    };
    emit_json(cfg, json!({ "provenance": provenance(cfg), "reports": reports }))?;
    Ok(outcome)
}

fn num_complex_one() -> num_complex::Complex64 {
    num_complex::Complex64::new(1.0, 0.0)
}

fn run_verify_jack(cfg: &RunConfig) -> CliResult<Outcome> {
    let n = cfg.n.unwrap_or(4);
    let beta = cfg.beta.unwrap_or(2.0);
    let k = cfg.k_max.unwrap_or(10);
    let report = verify_jack_identities(n, beta, k, None, cfg.seed.unwrap_or(0))?;
    let passed = report.passed;
    emit_json(cfg, json!({ "provenance": provenance(cfg), "report": report }))?;
    Ok(if passed { Outcome::Ok } else { Outcome::VerificationFailed("identity checks failed".into()) })
}

fn run(command: &Command) -> CliResult<Outcome> {
    let cfg = load_config(command)?;
    match command {
        Command::Eqm(_) => run_eqm(&cfg),
        Command::Phase(_) => run_phase(&cfg),
        Command::Predict(_) => run_predict(&cfg),
        Command::Sample(_) => run_sample(&cfg),
        Command::Ks(_) => run_ks(&cfg),
        Command::VerifyAppendix(_) => run_verify_appendix(&cfg),
        Command::VerifyJack(_) => run_verify_jack(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
