//! `qmi`: entropy evaluation, bound verification and squashed-entanglement
//! estimates from the command line.
//!
//! Exit status: 0 when every checked inequality held, 2 when a report
//! contains violations, 1 on usage, input or I/O errors. Errors are printed
//! as a single line `qmi-error[<code>]: <message>` on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use qmi_core::ensembles::{EnsembleKind, EnsembleSpec};
use qmi_core::entropy::{
    conditional_entropy, mutual_information, von_neumann_entropy, LogBase, SpanDimension,
};
use qmi_core::simplex::SimplexConfig;
use qmi_core::squashed::{esq_continuity_probe, estimate_esq, estimate_esq_schedule, EsqConfig};
use qmi_core::statefile::{resolve_state, write_atomic, StateFileError};
use qmi_core::thales::{check_theorem_assembly, decompose, IDENTITY_TOL};
use qmi_core::verify::{
    dim_sweep, entropy_continuity_trials, records_csv, run_lemma_trials, run_theorem_trials,
    sweep_csv, tightness_probe, SweepConfig, TrialConfig, REPORT_SCHEMA, VIOLATION_TOL,
};
use qmi_core::DensityMatrix;

const DEFAULT_SEED: u64 = 3_735_928_559;

#[derive(Parser, Debug)]
#[command(
    name = "qmi",
    version,
    about = "Conditional entropy continuity: checks, harnesses and estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entropies of a state.
    Entropy(EntropyArgs),
    /// Auxiliary-state decomposition of a pair and its identities.
    Thales(ThalesArgs),
    /// Run a verification harness.
    Verify(VerifyArgs),
    /// Theorem harness at fixed d1 over several d2.
    Sweep(SweepArgs),
    /// Upper estimate of squashed entanglement.
    Esq(EsqArgs),
    /// Compare squashed-entanglement estimates of two nearby states.
    Probe(ProbeArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Report entropies in nats instead of bits.
    #[arg(long)]
    nats: bool,
    /// Write the report here (atomically).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Record wall-clock time in the report (makes reports non-reproducible).
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn base(&self) -> LogBase {
        if self.nats {
            LogBase::Nats
        } else {
            LogBase::Bits
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Theorem,
    Lemma,
    Continuity,
    Tightness,
}

#[derive(Args, Debug)]
struct EntropyArgs {
    /// State file or named state (bell, ghz, classical-corr, maxmix:<d>).
    #[arg(long)]
    state: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ThalesArgs {
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long, default_value_t = IDENTITY_TOL)]
    tolerance: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct TrialArgs {
    #[arg(long, default_value_t = 2)]
    d1: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = VIOLATION_TOL)]
    tolerance: f64,
    /// haar-pure, induced-mixed, rank-limited or perturbation-pair.
    #[arg(long)]
    ensemble: Option<EnsembleKind>,
    /// Ancilla dimension for induced states.
    #[arg(long)]
    ancilla: Option<usize>,
    /// Fixed trace distance for perturbation pairs.
    #[arg(long)]
    target_epsilon: Option<f64>,
    /// Worker threads (0 = all cores). Does not affect results.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Re-run the configuration echoed in an earlier report.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::Theorem)]
    suite: Suite,
    #[arg(long, default_value_t = 2)]
    d2: usize,
    /// Dimension for the continuity suite; defaults to d1*d2.
    #[arg(long)]
    dim: Option<usize>,
    /// Fixed mixing weight for the lemma suite.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Dimension in the continuity bound: support-rank or ambient.
    #[arg(long, value_enum, default_value_t = Span::SupportRank)]
    span: Span,
    #[command(flatten)]
    trial: TrialArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Span {
    SupportRank,
    Ambient,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated list of d2 values.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    d2: Vec<usize>,
    #[command(flatten)]
    trial: TrialArgs,
}

#[derive(Args, Debug, Clone)]
struct EsqOptions {
    /// Extension dimension; a comma list runs a warm-started schedule.
    #[arg(long, value_delimiter = ',')]
    d3: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    ftol: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl EsqOptions {
    fn config(&self, base: LogBase, d3: Option<usize>) -> EsqConfig {
        EsqConfig {
            d3,
            residual_dim: None,
            restarts: self.restarts,
            simplex: SimplexConfig {
                max_iterations: self.max_iter,
                ftol: self.ftol,
                ..SimplexConfig::default()
            },
            seed: self.seed,
            base,
        }
    }
}

#[derive(Args, Debug)]
struct EsqArgs {
    #[arg(long)]
    state: String,
    #[command(flatten)]
    esq: EsqOptions,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[command(flatten)]
    esq: EsqOptions,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug)]
struct Failure {
    code: String,
    message: String,
}

impl Failure {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Failure {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

macro_rules! coded {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new(e.code(), e.to_string())
            }
        }
    )*};
}

coded!(
    StateFileError,
    qmi_core::verify::VerifyError,
    qmi_core::thales::ThalesError,
    qmi_core::squashed::SquashedError,
    qmi_core::entropy::EntropyError
);

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new("json", e.to_string())
    }
}

/// Whether the run found violations.
enum Outcome {
    Ok,
    Violations,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("qmi-error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violations) => ExitCode::from(2),
        Err(f) => {
            eprintln!("qmi-error[{}]: {}", f.code, f.message.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<Outcome, Failure> {
    match command {
        Command::Entropy(a) => cmd_entropy(a),
        Command::Thales(a) => cmd_thales(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Esq(a) => cmd_esq(a),
        Command::Probe(a) => cmd_probe(a),
    }
}

fn emit_json<T: Serialize>(common: &Common, report: &T) -> Result<(), Failure> {
    if common.format == Format::Csv {
        return Err(Failure::new(
            "usage",
            "csv output is only available for verify and sweep",
        ));
    }
    if let Some(path) = &common.out {
        let mut text = serde_json::to_string_pretty(report)?;
        text.push('\n');
        write_out(path, &text)?;
    }
    Ok(())
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    write_atomic(path, text.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn elapsed_ms(common: &Common, start: Instant) -> Option<u64> {
    common.timing.then(|| start.elapsed().as_millis() as u64)
}

#[derive(Serialize)]
struct EntropyReport {
    schema: &'static str,
    command: &'static str,
    config: EntropyConfig,
    dims: Vec<usize>,
    entropy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    conditional_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mutual_information: Option<f64>,
    purity: f64,
}

#[derive(Serialize)]
struct EntropyConfig {
    state: String,
    base: LogBase,
}

fn cmd_entropy(a: EntropyArgs) -> Result<Outcome, Failure> {
    let base = a.common.base();
    let rho = resolve_state(&a.state)?;
    let unit = base.unit();
    let entropy = von_neumann_entropy(&rho, base)?.value;
    println!("dims {:?}", rho.dims());
    println!("S = {entropy} {unit}");
    let (cond, mi) = if rho.dims().len() == 2 {
        let c = conditional_entropy(&rho, base)?.value;
        let m = mutual_information(&rho, base)?;
        println!("S(1|2) = {c} {unit}");
        println!("I(1;2) = {m} {unit}");
        (Some(c), Some(m))
    } else {
        (None, None)
    };
    let report = EntropyReport {
        schema: REPORT_SCHEMA,
        command: "entropy",
        config: EntropyConfig {
            state: a.state,
            base,
        },
        dims: rho.dims().to_vec(),
        entropy,
        conditional_entropy: cond,
        mutual_information: mi,
        purity: rho.purity(),
    };
    emit_json(&a.common, &report)?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct ThalesReport {
    schema: &'static str,
    command: &'static str,
    config: ThalesConfig,
    epsilon: f64,
    residuals: qmi_core::thales::ThalesResiduals,
    identities_hold: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    assembly: Option<qmi_core::thales::AssemblyReport>,
}

#[derive(Serialize)]
struct ThalesConfig {
    a: String,
    b: String,
    tolerance: f64,
    base: LogBase,
}

fn cmd_thales(a: ThalesArgs) -> Result<Outcome, Failure> {
    let base = a.common.base();
    let rho = resolve_state(&a.a)?;
    let sigma = resolve_state(&a.b)?;
    let dec = decompose(&rho, &sigma)?;
    let residuals = dec.residuals()?;
    let identities_hold = residuals.within(a.tolerance);
    let assembly = if rho.dims().len() == 2 && rho.dims() == sigma.dims() && rho.dims()[0] >= 2 {
        Some(check_theorem_assembly(&rho, &sigma, base, VIOLATION_TOL)?)
    } else {
        None
    };
    println!("epsilon = {}", dec.epsilon);
    println!("identities within {:e}: {identities_hold}", a.tolerance);
    if let Some(s) = &assembly {
        println!(
            "|dS| = {} <= {} + {} <= {} {}",
            s.lhs,
            s.rho_leg,
            s.sigma_leg,
            s.bound,
            base.unit()
        );
    }
    let ok = identities_hold && assembly.is_none_or(|s| s.triangle_ok && s.legs_ok && s.bound_ok);
    let report = ThalesReport {
        schema: REPORT_SCHEMA,
        command: "thales",
        config: ThalesConfig {
            a: a.a,
            b: a.b,
            tolerance: a.tolerance,
            base,
        },
        epsilon: dec.epsilon,
        residuals,
        identities_hold,
        assembly,
    };
    emit_json(&a.common, &report)?;
    Ok(if ok { Outcome::Ok } else { Outcome::Violations })
}

/// Loads the `config` object (and the harness name) of an earlier report.
fn load_echo(path: &Path) -> Result<(Value, Option<String>), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new("io", format!("io error on {}: {e}", path.display())))?;
    let mut v: Value = serde_json::from_str(&text)?;
    let harness = v.get("harness").and_then(Value::as_str).map(str::to_string);
    match v.get_mut("config").map(Value::take) {
        Some(config) => Ok((config, harness)),
        None => Err(Failure::new(
            "schema",
            format!("{} has no config object", path.display()),
        )),
    }
}

fn trial_config(a: &VerifyArgs) -> Result<(Suite, TrialConfig), Failure> {
    let t = &a.trial;
    if let Some(path) = &t.config {
        let (echo, harness) = load_echo(path)?;
        let suite = match harness.as_deref() {
            Some("theorem") | None => Suite::Theorem,
            Some("lemma") => Suite::Lemma,
            Some("continuity") => Suite::Continuity,
            Some("tightness") => Suite::Tightness,
            Some(other) => {
                return Err(Failure::new(
                    "schema",
                    format!("cannot re-run a {other} report with verify"),
                ))
            }
        };
        let mut config: TrialConfig = serde_json::from_value(echo)?;
        config.workers = t.workers;
        return Ok((suite, config));
    }
    let dims = match a.suite {
        Suite::Continuity => vec![a.dim.unwrap_or(t.d1 * a.d2)],
        _ => vec![t.d1, a.d2],
    };
    let default_kind = match a.suite {
        Suite::Lemma => EnsembleKind::InducedMixed,
        _ => EnsembleKind::PerturbationPair,
    };
    let mut ensemble = EnsembleSpec::new(t.ensemble.unwrap_or(default_kind), &dims, t.seed);
    ensemble.ancilla_dim = t.ancilla;
    ensemble.target_epsilon = t.target_epsilon;
    let mut config = TrialConfig::new(ensemble, t.trials);
    config.tolerance = t.tolerance;
    config.base = t.common.base();
    config.epsilon = a.epsilon;
    config.span = match a.span {
        Span::SupportRank => SpanDimension::SupportRank,
        Span::Ambient => SpanDimension::Ambient,
    };
    config.workers = t.workers;
    Ok((a.suite, config))
}

fn cmd_verify(a: VerifyArgs) -> Result<Outcome, Failure> {
    let common = a.trial.common.clone();
    let (suite, config) = trial_config(&a)?;
    let start = Instant::now();
    if suite == Suite::Tightness {
        let mut report = tightness_probe(&config)?;
        report.wall_time_ms = elapsed_ms(&common, start);
        println!(
            "tightness: {} applicable, {} degenerate skipped, {} inapplicable, max ratio {}",
            report.applicable_trials,
            report.skipped_degenerate,
            report.inapplicable,
            report
                .max_ratio
                .map_or("n/a".to_string(), |r| r.to_string())
        );
        emit_json(&common, &report)?;
        return Ok(if report.exceedances == 0 {
            Outcome::Ok
        } else {
            Outcome::Violations
        });
    }
    let mut report = match suite {
        Suite::Theorem => run_theorem_trials(&config)?,
        Suite::Lemma => run_lemma_trials(&config)?,
        _ => entropy_continuity_trials(&config)?,
    };
    report.wall_time_ms = elapsed_ms(&common, start);
    println!(
        "{:?}: {} trials, {} applicable, {} inapplicable, {} failed, {} violations",
        report.harness,
        report.trials,
        report.applicable_trials,
        report.inapplicable,
        report.failed,
        report.violations
    );
    if let Some(m) = report.min_margin {
        println!("min margin {m} {}", config.base.unit());
    }
    if let Some(c) = &report.lemma_chain {
        println!("chain failures {}", c.chain_failures);
    }
    match (common.format, &common.out) {
        (Format::Csv, Some(path)) => write_out(path, &records_csv(&report.records, config.base))?,
        (Format::Csv, None) => return Err(Failure::new("usage", "--format csv needs --out")),
        _ => emit_json(&common, &report)?,
    }
    Ok(if report.failures() == 0 {
        Outcome::Ok
    } else {
        Outcome::Violations
    })
}

fn cmd_sweep(a: SweepArgs) -> Result<Outcome, Failure> {
    let t = &a.trial;
    let common = t.common.clone();
    let config = match &t.config {
        Some(path) => {
            let (echo, harness) = load_echo(path)?;
            if harness.as_deref() != Some("sweep") {
                return Err(Failure::new("schema", "not a sweep report"));
            }
            let mut c: SweepConfig = serde_json::from_value(echo)?;
            c.workers = t.workers;
            c
        }
        None => SweepConfig {
            d1: t.d1,
            d2: a.d2.clone(),
            kind: t.ensemble.unwrap_or(EnsembleKind::PerturbationPair),
            ancilla_dim: t.ancilla,
            target_epsilon: t.target_epsilon,
            trials: t.trials,
            tolerance: t.tolerance,
            base: common.base(),
            seed: t.seed,
            workers: t.workers,
        },
    };
    let start = Instant::now();
    let mut report = dim_sweep(&config)?;
    report.wall_time_ms = elapsed_ms(&common, start);
    println!("d2\tapplicable\tviolations\tmax_lhs\tmax_eps\trhs_at_max_eps");
    let na = |v: Option<f64>| v.map_or("n/a".to_string(), |x| x.to_string());
    for r in &report.rows {
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.d2,
            r.applicable_trials,
            r.violations,
            na(r.max_lhs),
            na(r.max_epsilon),
            na(r.rhs_at_max_epsilon)
        );
    }
    println!(
        "bound identical across rows: {}",
        report.rhs_identical_across_rows
    );
    match (common.format, &common.out) {
        (Format::Csv, Some(path)) => write_out(path, &sweep_csv(&report))?,
        (Format::Csv, None) => return Err(Failure::new("usage", "--format csv needs --out")),
        _ => emit_json(&common, &report)?,
    }
    let ok = report.violations == 0 && report.rows.iter().all(|r| r.within_cap);
    Ok(if ok { Outcome::Ok } else { Outcome::Violations })
}

#[derive(Serialize)]
struct EsqReport {
    schema: &'static str,
    command: &'static str,
    config: EsqEcho,
    best_cmi_half: f64,
    estimates: Vec<qmi_core::squashed::EsqEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_ms: Option<u64>,
}

#[derive(Serialize)]
struct EsqEcho {
    state: String,
    d3: Vec<usize>,
    esq: EsqConfig,
}

fn cmd_esq(a: EsqArgs) -> Result<Outcome, Failure> {
    let base = a.common.base();
    let rho = bipartite(resolve_state(&a.state)?)?;
    let start = Instant::now();
    let estimates = match a.esq.d3.as_slice() {
        [] => vec![estimate_esq(&rho, &a.esq.config(base, None))?],
        [d3] => vec![estimate_esq(&rho, &a.esq.config(base, Some(*d3)))?],
        many => estimate_esq_schedule(&rho, many, &a.esq.config(base, None))?,
    };
    for e in &estimates {
        println!(
            "d3 = {}: E_sq <= {} {} ({} restarts, converged {})",
            e.d3,
            e.best_cmi_half,
            base.unit(),
            e.restarts,
            e.converged
        );
    }
    let best = estimates
        .iter()
        .map(|e| e.best_cmi_half)
        .fold(f64::INFINITY, f64::min);
    let report = EsqReport {
        schema: REPORT_SCHEMA,
        command: "esq",
        config: EsqEcho {
            state: a.state,
            d3: a.esq.d3.clone(),
            esq: a.esq.config(base, None),
        },
        best_cmi_half: best,
        estimates,
        wall_time_ms: elapsed_ms(&a.common, start),
    };
    emit_json(&a.common, &report)?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct ProbeEnvelope {
    schema: &'static str,
    command: &'static str,
    config: ProbeEcho,
    probe: qmi_core::squashed::ProbeReport,
}

#[derive(Serialize)]
struct ProbeEcho {
    a: String,
    b: String,
    esq: EsqConfig,
}

fn cmd_probe(a: ProbeArgs) -> Result<Outcome, Failure> {
    let base = a.common.base();
    let rho = bipartite(resolve_state(&a.a)?)?;
    let sigma = bipartite(resolve_state(&a.b)?)?;
    let d3 = match a.esq.d3.as_slice() {
        [] => None,
        [d] => Some(*d),
        _ => return Err(Failure::new("usage", "probe takes a single --d3")),
    };
    let config = a.esq.config(base, d3);
    let probe = esq_continuity_probe(&rho, &sigma, &config)?;
    println!(
        "epsilon = {}: |E(a) - E(b)| = {} vs reference {} {} (within: {})",
        probe.epsilon,
        probe.difference,
        probe.reference_bound,
        base.unit(),
        probe.within_reference
    );
    let report = ProbeEnvelope {
        schema: REPORT_SCHEMA,
        command: "probe",
        config: ProbeEcho {
            a: a.a,
            b: a.b,
            esq: config,
        },
        probe,
    };
    emit_json(&a.common, &report)?;
    Ok(Outcome::Ok)
}

fn bipartite(rho: DensityMatrix) -> Result<DensityMatrix, Failure> {
    if rho.dims().len() != 2 {
        return Err(Failure::new(
            "arity",
            format!("expected a bipartite state, got dims {:?}", rho.dims()),
        ));
    }
    Ok(rho)
}
