//! Seeded property harnesses for the continuity bounds.
//!
//! Each harness draws trial `i` from the stream `(seed, i)`, so results do
//! not depend on how trials are spread over worker threads. Reductions run
//! over the trials in index order and break ties toward the smallest index.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::{trial_rng, EnsembleError, EnsembleKind, EnsembleSpec};
use crate::entropy::{
    af_bound, conditional_entropy, entropy_continuity_bound, span_dimension, trace_distance,
    von_neumann_entropy, EntropyError, LogBase, SpanDimension, EPSILON_SLACK,
};
use crate::qmat::DensityMatrix;
use crate::statefile::StateFile;
use crate::thales::{check_lemma_chain, LemmaChainReport, ThalesError, DEGENERATE_EPSILON};

pub const REPORT_SCHEMA: &str = "qmi-report/1";
/// Default slack on `LHS ≤ RHS` before a trial counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-9;
/// Trace distances at which sweep rows evaluate the bound.
pub const REFERENCE_EPSILONS: [f64; 6] = [0.01, 0.1, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error(transparent)]
    Thales(#[from] ThalesError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl VerifyError {
    pub fn code(&self) -> &'static str {
        match self {
            VerifyError::Ensemble(EnsembleError::Entropy(e)) | VerifyError::Entropy(e) => e.code(),
            VerifyError::Ensemble(EnsembleError::Invalid(_)) | VerifyError::Config(_) => "config",
            VerifyError::Thales(e) => e.code(),
            VerifyError::Pool(_) => "pool",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Harness {
    Theorem,
    Lemma,
    Continuity,
    Tightness,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub ensemble: EnsembleSpec,
    pub trials: usize,
    pub tolerance: f64,
    pub base: LogBase,
    /// Dimension used by the entropy-continuity harness.
    #[serde(default)]
    pub span: SpanDimension,
    /// Fixed mixing weight for lemma trials; uniform on `[0, 1]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Worker threads; 0 picks the machine default. Not part of the report.
    #[serde(skip)]
    pub workers: usize,
}

impl TrialConfig {
    pub fn new(ensemble: EnsembleSpec, trials: usize) -> Self {
        TrialConfig {
            ensemble,
            trials,
            tolerance: VIOLATION_TOL,
            base: LogBase::Bits,
            span: SpanDimension::default(),
            epsilon: None,
            workers: 0,
        }
    }

    fn validate(&self, arity: Option<usize>) -> Result<(), VerifyError> {
        self.ensemble.validate()?;
        if self.trials == 0 {
            return Err(VerifyError::Config("trials must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(VerifyError::Config(format!(
                "tolerance {} must be nonnegative",
                self.tolerance
            )));
        }
        if let Some(n) = arity {
            if self.ensemble.dims.len() != n {
                return Err(VerifyError::Config(format!(
                    "expected {n} subsystems, got dims {:?}",
                    self.ensemble.dims
                )));
            }
        }
        if let Some(e) = self.epsilon {
            if !(0.0..=1.0).contains(&e) {
                return Err(VerifyError::Config(format!("epsilon {e} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialStatus {
    Pass,
    Violation,
    /// `ε > 1`, outside the regime of the bound.
    Inapplicable,
    /// A numeric failure; recorded, never fatal.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: u64,
    pub epsilon: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub margin: Option<f64>,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// An extremal trial with the states needed to re-check it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub seed: u64,
    pub index: u64,
    pub epsilon: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub states: BTreeMap<String, StateFile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaChainSummary {
    /// Trials where any step of the chain failed.
    pub chain_failures: usize,
    pub concavity_failures: usize,
    pub marginal_concavity_failures: usize,
    pub mixing_failures: usize,
    pub min_concavity_gap: f64,
    pub min_marginal_concavity_gap: f64,
    /// Largest `mixing_excess - mixing_allowance`.
    pub max_mixing_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub schema: String,
    pub harness: Harness,
    pub config: TrialConfig,
    pub trials: usize,
    pub applicable_trials: usize,
    pub inapplicable: usize,
    pub failed: usize,
    pub violations: usize,
    pub max_lhs: Option<f64>,
    pub min_margin: Option<f64>,
    pub argmax_lhs: Option<Witness>,
    pub argmin_margin: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma_chain: Option<LemmaChainSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl TrialReport {
    /// Violations plus, for lemma runs, failed chain steps.
    pub fn failures(&self) -> usize {
        self.violations + self.lemma_chain.map_or(0, |c| c.chain_failures)
    }
}

/// One evaluated trial. `rhs` is `None` when the bound does not apply.
struct Evaluated {
    epsilon: f64,
    lhs: f64,
    rhs: Option<f64>,
    chain: Option<LemmaChainReport>,
    states: Vec<(&'static str, DensityMatrix)>,
}

fn status(lhs: f64, rhs: Option<f64>, tol: f64) -> TrialStatus {
    match rhs {
        None => TrialStatus::Inapplicable,
        Some(r) if lhs > r + tol => TrialStatus::Violation,
        Some(_) => TrialStatus::Pass,
    }
}

fn to_record(index: u64, result: &Result<Evaluated, VerifyError>, tol: f64) -> TrialRecord {
    match result {
        Ok(e) => TrialRecord {
            index,
            epsilon: Some(e.epsilon),
            lhs: Some(e.lhs),
            rhs: e.rhs,
            margin: e.rhs.map(|r| r - e.lhs),
            status: status(e.lhs, e.rhs, tol),
            error: None,
        },
        Err(err) => TrialRecord {
            index,
            epsilon: None,
            lhs: None,
            rhs: None,
            margin: None,
            status: TrialStatus::Error,
            error: Some(err.to_string()),
        },
    }
}

fn parallel_map<T: Send>(
    workers: usize,
    n: usize,
    f: impl Fn(u64) -> T + Sync,
) -> Result<Vec<T>, VerifyError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| VerifyError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..n as u64).into_par_iter().map(&f).collect()))
}

fn witness<F>(eval: &F, seed: u64, record: &TrialRecord) -> Option<Witness>
where
    F: Fn(u64) -> Result<Evaluated, VerifyError>,
{
    let e = eval(record.index).ok()?;
    let rhs = e.rhs?;
    Some(Witness {
        seed,
        index: record.index,
        epsilon: e.epsilon,
        lhs: e.lhs,
        rhs,
        margin: rhs - e.lhs,
        ratio: None,
        states: e
            .states
            .iter()
            .map(|(name, rho)| (name.to_string(), StateFile::from_density(rho)))
            .collect(),
    })
}

fn run_harness<F>(
    harness: Harness,
    config: &TrialConfig,
    eval: F,
) -> Result<TrialReport, VerifyError>
where
    F: Fn(u64) -> Result<Evaluated, VerifyError> + Sync,
{
    let tol = config.tolerance;
    let results = parallel_map(config.workers, config.trials, |i| {
        let r = eval(i);
        (to_record(i, &r, tol), r.ok().and_then(|e| e.chain))
    })?;

    let mut report = TrialReport {
        schema: REPORT_SCHEMA.to_string(),
        harness,
        config: config.clone(),
        trials: config.trials,
        applicable_trials: 0,
        inapplicable: 0,
        failed: 0,
        violations: 0,
        max_lhs: None,
        min_margin: None,
        argmax_lhs: None,
        argmin_margin: None,
        lemma_chain: None,
        wall_time_ms: None,
        records: Vec::with_capacity(results.len()),
    };
    let mut argmax = None;
    let mut argmin = None;
    let mut chain: Option<LemmaChainSummary> = None;
    for (record, lemma) in results {
        match record.status {
            TrialStatus::Inapplicable => report.inapplicable += 1,
            TrialStatus::Error => report.failed += 1,
            TrialStatus::Pass | TrialStatus::Violation => {
                report.applicable_trials += 1;
                if record.status == TrialStatus::Violation {
                    report.violations += 1;
                }
                let (lhs, margin) = (
                    record.lhs.unwrap_or(f64::NAN),
                    record.margin.unwrap_or(f64::NAN),
                );
                if report.max_lhs.is_none_or(|m| lhs > m) {
                    report.max_lhs = Some(lhs);
                    argmax = Some(report.records.len());
                }
                if report.min_margin.is_none_or(|m| margin < m) {
                    report.min_margin = Some(margin);
                    argmin = Some(report.records.len());
                }
            }
        }
        if let Some(c) = lemma {
            let s = chain.get_or_insert(LemmaChainSummary {
                chain_failures: 0,
                concavity_failures: 0,
                marginal_concavity_failures: 0,
                mixing_failures: 0,
                min_concavity_gap: f64::INFINITY,
                min_marginal_concavity_gap: f64::INFINITY,
                max_mixing_slack: f64::NEG_INFINITY,
            });
            s.chain_failures += usize::from(!c.all_ok());
            s.concavity_failures += usize::from(!c.concavity_ok);
            s.marginal_concavity_failures += usize::from(!c.marginal_concavity_ok);
            s.mixing_failures += usize::from(!c.mixing_ok);
            s.min_concavity_gap = s.min_concavity_gap.min(c.concavity_gap);
            s.min_marginal_concavity_gap =
                s.min_marginal_concavity_gap.min(c.marginal_concavity_gap);
            s.max_mixing_slack = s.max_mixing_slack.max(c.mixing_excess - c.mixing_allowance);
        }
        report.records.push(record);
    }
    let seed = config.ensemble.seed;
    report.argmax_lhs = argmax.and_then(|i| witness(&eval, seed, &report.records[i]));
    report.argmin_margin = argmin.and_then(|i| witness(&eval, seed, &report.records[i]));
    report.lemma_chain = chain;
    Ok(report)
}

fn applicable(epsilon: f64) -> bool {
    epsilon <= 1.0 + EPSILON_SLACK
}

fn cond(rho: &DensityMatrix, base: LogBase) -> Result<f64, EntropyError> {
    Ok(conditional_entropy(rho, base)?.value)
}

/// `(ε, |S(ρ|ρ²) - S(σ|σ²)|, bound)` with the bound `None` for `ε > 1`.
pub fn theorem_terms(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    base: LogBase,
) -> Result<(f64, f64, Option<f64>), EntropyError> {
    let epsilon = trace_distance(rho, sigma)?;
    let lhs = (cond(rho, base)? - cond(sigma, base)?).abs();
    let rhs = if applicable(epsilon) {
        Some(af_bound(epsilon, rho.dims()[0], base)?)
    } else {
        None
    };
    Ok((epsilon, lhs, rhs))
}

fn theorem_eval(config: &TrialConfig, i: u64) -> Result<Evaluated, VerifyError> {
    let pair = config.ensemble.sample_pair(i)?;
    let (epsilon, lhs, rhs) = theorem_terms(&pair.rho, &pair.sigma, config.base)?;
    Ok(Evaluated {
        epsilon,
        lhs,
        rhs,
        chain: None,
        states: vec![("rho", pair.rho), ("sigma", pair.sigma)],
    })
}

/// Checks `|S(ρ|ρ²) - S(σ|σ²)| ≤ 4ε log d₁ + 2η(1-ε) + 2η(ε)` on pairs from
/// `config.ensemble` (dims `[d1, d2]`). Pairs with `ε > 1` are counted as
/// inapplicable.
pub fn run_theorem_trials(config: &TrialConfig) -> Result<TrialReport, VerifyError> {
    config.validate(Some(2))?;
    run_harness(Harness::Theorem, config, |i| theorem_eval(config, i))
}

/// Draws `ρ`, `ρ̃` from the single-state marginal of `config.ensemble` and a
/// weight `ε`, then checks `|S(ρ|ρ²) - S(γ|γ²)| ≤ 2ε log d₁ + η(1-ε) + η(ε)`
/// for `γ = (1-ε)ρ + ερ̃` along with every step of the mixing chain.
pub fn run_lemma_trials(config: &TrialConfig) -> Result<TrialReport, VerifyError> {
    config.validate(Some(2))?;
    let eval = |i: u64| -> Result<Evaluated, VerifyError> {
        let mut rng = trial_rng(config.ensemble.seed, i);
        let rho = config.ensemble.sample_state(&mut rng)?;
        let rho_tilde = config.ensemble.sample_state(&mut rng)?;
        let epsilon = match config.epsilon {
            Some(e) => e,
            None => rng.random::<f64>(),
        };
        let chain = check_lemma_chain(&rho, &rho_tilde, epsilon, config.base, config.tolerance)?;
        Ok(Evaluated {
            epsilon,
            lhs: chain.difference.abs(),
            rhs: Some(chain.lemma_bound),
            chain: Some(chain),
            states: vec![("rho", rho), ("rho_tilde", rho_tilde)],
        })
    };
    run_harness(Harness::Lemma, config, eval)
}

/// Checks `|S(ρ) - S(σ)| ≤ 2ε log d + η(ε) + η(1-ε)` with `d` chosen by
/// `config.span`.
pub fn entropy_continuity_trials(config: &TrialConfig) -> Result<TrialReport, VerifyError> {
    config.validate(None)?;
    let eval = |i: u64| -> Result<Evaluated, VerifyError> {
        let pair = config.ensemble.sample_pair(i)?;
        let (rho, sigma) = (pair.rho, pair.sigma);
        let epsilon = trace_distance(&rho, &sigma)?;
        let s = |x: &DensityMatrix| von_neumann_entropy(x, config.base).map(|v| v.value);
        let lhs = (s(&rho)? - s(&sigma)?).abs();
        let rhs = if applicable(epsilon) {
            let d = span_dimension(&rho, &sigma, config.span)?;
            Some(entropy_continuity_bound(epsilon, d, config.base)?)
        } else {
            None
        };
        Ok(Evaluated {
            epsilon,
            lhs,
            rhs,
            chain: None,
            states: vec![("rho", rho), ("sigma", sigma)],
        })
    };
    run_harness(Harness::Continuity, config, eval)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub schema: String,
    pub harness: Harness,
    pub config: TrialConfig,
    pub trials: usize,
    pub applicable_trials: usize,
    /// Trials with `ε = 0`, where the ratio is `0/0`.
    pub skipped_degenerate: usize,
    pub inapplicable: usize,
    pub failed: usize,
    pub max_ratio: Option<f64>,
    /// Trials with ratio above `1 + tolerance`.
    pub exceedances: usize,
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

/// Largest `LHS / RHS` of the theorem bound over the ensemble, with the
/// pair that attains it.
pub fn tightness_probe(config: &TrialConfig) -> Result<TightnessReport, VerifyError> {
    config.validate(Some(2))?;
    enum Kind {
        Ratio(f64),
        Degenerate,
        Inapplicable,
        Failed,
    }
    let kinds = parallel_map(config.workers, config.trials, |i| {
        match theorem_eval(config, i) {
            Err(_) => Kind::Failed,
            Ok(e) => match e.rhs {
                None => Kind::Inapplicable,
                Some(_) if e.epsilon <= DEGENERATE_EPSILON => Kind::Degenerate,
                Some(r) => Kind::Ratio(e.lhs / r),
            },
        }
    })?;
    let mut report = TightnessReport {
        schema: REPORT_SCHEMA.to_string(),
        harness: Harness::Tightness,
        config: config.clone(),
        trials: config.trials,
        applicable_trials: 0,
        skipped_degenerate: 0,
        inapplicable: 0,
        failed: 0,
        max_ratio: None,
        exceedances: 0,
        witness: None,
        wall_time_ms: None,
    };
    let mut best = None;
    for (i, k) in kinds.into_iter().enumerate() {
        match k {
            Kind::Failed => report.failed += 1,
            Kind::Inapplicable => report.inapplicable += 1,
            Kind::Degenerate => report.skipped_degenerate += 1,
            Kind::Ratio(r) => {
                report.applicable_trials += 1;
                if r > 1.0 + config.tolerance {
                    report.exceedances += 1;
                }
                if report.max_ratio.is_none_or(|m| r > m) {
                    report.max_ratio = Some(r);
                    best = Some(i as u64);
                }
            }
        }
    }
    if let Some(index) = best {
        let record = to_record(index, &theorem_eval(config, index), config.tolerance);
        report.witness =
            witness(&|i| theorem_eval(config, i), config.ensemble.seed, &record).map(|mut w| {
                w.ratio = report.max_ratio;
                w
            });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d1: usize,
    pub d2: Vec<usize>,
    pub kind: EnsembleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancilla_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_epsilon: Option<f64>,
    pub trials: usize,
    pub tolerance: f64,
    pub base: LogBase,
    pub seed: u64,
    #[serde(skip)]
    pub workers: usize,
}

impl SweepConfig {
    pub fn row_config(&self, d2: usize) -> TrialConfig {
        TrialConfig {
            ensemble: EnsembleSpec {
                kind: self.kind,
                dims: vec![self.d1, d2],
                ancilla_dim: self.ancilla_dim,
                target_epsilon: self.target_epsilon,
                seed: self.seed,
            },
            trials: self.trials,
            tolerance: self.tolerance,
            base: self.base,
            span: SpanDimension::default(),
            epsilon: None,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d2: usize,
    pub trials: usize,
    pub applicable_trials: usize,
    pub inapplicable: usize,
    pub failed: usize,
    pub violations: usize,
    pub max_lhs: Option<f64>,
    pub min_margin: Option<f64>,
    pub max_epsilon: Option<f64>,
    pub rhs_at_max_epsilon: Option<f64>,
    /// The bound evaluated at [`REFERENCE_EPSILONS`].
    pub rhs_at_reference: Vec<f64>,
    /// `4 log d₁`, the bound at `ε = 1`.
    pub lhs_cap: f64,
    pub within_cap: bool,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema: String,
    pub harness: Harness,
    pub config: SweepConfig,
    pub reference_epsilons: Vec<f64>,
    pub rows: Vec<SweepRow>,
    pub violations: usize,
    /// Whether every row produced bit-identical `rhs_at_reference`.
    pub rhs_identical_across_rows: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

/// Runs the theorem harness at fixed `d1` for each `d2`.
pub fn dim_sweep(config: &SweepConfig) -> Result<SweepReport, VerifyError> {
    if config.d2.is_empty() {
        return Err(VerifyError::Config("d2 list is empty".into()));
    }
    let lhs_cap = 4.0 * config.base.log(config.d1 as f64);
    let mut rows = Vec::with_capacity(config.d2.len());
    for &d2 in &config.d2 {
        let report = run_theorem_trials(&config.row_config(d2))?;
        let rhs_at_reference = REFERENCE_EPSILONS
            .iter()
            .map(|&e| af_bound(e, config.d1, config.base))
            .collect::<Result<Vec<_>, _>>()?;
        let mut max_epsilon: Option<f64> = None;
        for r in &report.records {
            if r.rhs.is_some() {
                let e = r.epsilon.unwrap_or(0.0);
                max_epsilon = Some(max_epsilon.map_or(e, |m| m.max(e)));
            }
        }
        let rhs_at_max_epsilon = max_epsilon
            .map(|e| af_bound(e, config.d1, config.base))
            .transpose()?;
        rows.push(SweepRow {
            d2,
            trials: report.trials,
            applicable_trials: report.applicable_trials,
            inapplicable: report.inapplicable,
            failed: report.failed,
            violations: report.violations,
            max_lhs: report.max_lhs,
            min_margin: report.min_margin,
            max_epsilon,
            rhs_at_max_epsilon,
            rhs_at_reference,
            lhs_cap,
            within_cap: report
                .max_lhs
                .is_none_or(|m| m <= lhs_cap + config.tolerance),
            records: report.records,
        });
    }
    let rhs_identical_across_rows = rows.windows(2).all(|w| {
        w[0].rhs_at_reference
            .iter()
            .zip(&w[1].rhs_at_reference)
            .all(|(a, b)| a.to_bits() == b.to_bits())
    });
    Ok(SweepReport {
        schema: REPORT_SCHEMA.to_string(),
        harness: Harness::Sweep,
        config: config.clone(),
        reference_epsilons: REFERENCE_EPSILONS.to_vec(),
        violations: rows.iter().map(|r| r.violations).sum(),
        rows,
        rhs_identical_across_rows,
        wall_time_ms: None,
    })
}

fn csv_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per trial: `trial_index, epsilon, lhs, rhs, margin`, with the
/// unit of the log base in the column names. Inapplicable and failed trials
/// leave the missing fields empty.
pub fn records_csv(records: &[TrialRecord], base: LogBase) -> String {
    let u = base.unit();
    let mut out = format!("trial_index,epsilon,lhs_{u},rhs_{u},margin_{u}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.index,
            csv_field(r.epsilon),
            csv_field(r.lhs),
            csv_field(r.rhs),
            csv_field(r.margin)
        );
    }
    out
}

/// Sweep records with a leading `d2` column.
pub fn sweep_csv(report: &SweepReport) -> String {
    let u = report.config.base.unit();
    let mut out = format!("d2,trial_index,epsilon,lhs_{u},rhs_{u},margin_{u}\n");
    for row in &report.rows {
        for line in records_csv(&row.records, report.config.base)
            .lines()
            .skip(1)
        {
            let _ = writeln!(out, "{},{line}", row.d2);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn theorem_config(dims: &[usize], trials: usize, seed: u64) -> TrialConfig {
        TrialConfig::new(
            EnsembleSpec::new(EnsembleKind::PerturbationPair, dims, seed),
            trials,
        )
    }

    #[test]
    fn theorem_small_run_has_no_violations() {
        let r = run_theorem_trials(&theorem_config(&[2, 2], 300, 7)).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.applicable_trials + r.inapplicable + r.failed, 300);
        assert_eq!(r.failed, 0);
        assert!(r.min_margin.unwrap() >= -1e-9);
        let w = r.argmax_lhs.as_ref().unwrap();
        assert_eq!(Some(w.lhs), r.max_lhs);
        assert!(w.states.contains_key("rho") && w.states.contains_key("sigma"));
    }

    #[test]
    fn identical_pairs_have_zero_margin() {
        let mut cfg = theorem_config(&[2, 2], 20, 3);
        cfg.ensemble.target_epsilon = Some(0.0);
        let r = run_theorem_trials(&cfg).unwrap();
        assert_eq!(r.violations, 0);
        for rec in &r.records {
            assert_eq!(rec.epsilon, Some(0.0));
            assert_eq!(rec.lhs, Some(0.0));
            assert_eq!(rec.margin, Some(0.0));
        }
    }

    #[test]
    fn pure_pairs_beyond_one_are_inapplicable() {
        let cfg = TrialConfig::new(EnsembleSpec::new(EnsembleKind::HaarPure, &[2, 2], 1), 200);
        let r = run_theorem_trials(&cfg).unwrap();
        assert!(r.inapplicable > 0);
        assert_eq!(r.applicable_trials + r.inapplicable, 200);
        for rec in r
            .records
            .iter()
            .filter(|x| x.status == TrialStatus::Inapplicable)
        {
            assert!(rec.epsilon.unwrap() > 1.0 && rec.rhs.is_none() && rec.margin.is_none());
        }
    }

    #[test]
    fn lemma_endpoints() {
        let mut cfg = TrialConfig::new(
            EnsembleSpec::new(EnsembleKind::InducedMixed, &[2, 2], 5),
            20,
        );
        cfg.epsilon = Some(0.0);
        let r = run_lemma_trials(&cfg).unwrap();
        assert!(r.records.iter().all(|x| x.margin == Some(0.0)));
        cfg.epsilon = Some(1.0);
        let r = run_lemma_trials(&cfg).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.records.iter().all(|x| x.rhs == Some(2.0)));
        assert_eq!(r.lemma_chain.unwrap().chain_failures, 0);
    }

    #[test]
    fn lemma_random_weights() {
        let cfg = TrialConfig::new(
            EnsembleSpec::new(EnsembleKind::InducedMixed, &[2, 2], 9),
            300,
        );
        let r = run_lemma_trials(&cfg).unwrap();
        assert_eq!(r.failures(), 0);
        let c = r.lemma_chain.unwrap();
        assert!(c.min_concavity_gap >= -1e-9 && c.max_mixing_slack <= 1e-9);
    }

    #[test]
    fn continuity_trials() {
        let r = entropy_continuity_trials(&theorem_config(&[4], 300, 2)).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.failed, 0);
    }

    #[test]
    fn worker_count_does_not_change_report() {
        let mut a = theorem_config(&[2, 3], 64, 11);
        a.workers = 1;
        let mut b = a.clone();
        b.workers = 3;
        let ra = serde_json::to_string(&run_theorem_trials(&a).unwrap()).unwrap();
        let rb = serde_json::to_string(&run_theorem_trials(&b).unwrap()).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn tightness_witness_reproduces_ratio() {
        let r = tightness_probe(&theorem_config(&[2, 2], 200, 4)).unwrap();
        let m = r.max_ratio.unwrap();
        assert!((0.0..=1.0 + 1e-9).contains(&m));
        assert_eq!(r.exceedances, 0);
        let w = r.witness.unwrap();
        let rho = w.states["rho"].to_density().unwrap();
        let sigma = w.states["sigma"].to_density().unwrap();
        let (_, lhs, rhs) = theorem_terms(&rho, &sigma, LogBase::Bits).unwrap();
        assert!((lhs / rhs.unwrap() - m).abs() < 1e-9);
    }

    #[test]
    fn tightness_skips_identical_pairs() {
        let mut cfg = theorem_config(&[2, 2], 10, 4);
        cfg.ensemble.target_epsilon = Some(0.0);
        let r = tightness_probe(&cfg).unwrap();
        assert_eq!(r.skipped_degenerate, 10);
        assert!(r.max_ratio.is_none() && r.witness.is_none());
    }

    #[test]
    fn sweep_rows_share_the_bound() {
        let cfg = SweepConfig {
            d1: 2,
            d2: vec![1, 2, 4],
            kind: EnsembleKind::PerturbationPair,
            ancilla_dim: None,
            target_epsilon: None,
            trials: 50,
            tolerance: VIOLATION_TOL,
            base: LogBase::Bits,
            seed: 1,
            workers: 0,
        };
        let r = dim_sweep(&cfg).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.rhs_identical_across_rows);
        assert!(r
            .rows
            .iter()
            .all(|row| row.within_cap && row.max_lhs.unwrap() <= 4.0));
        let csv = sweep_csv(&r);
        assert_eq!(csv.lines().count(), 1 + 150);
    }

    #[test]
    fn csv_layout() {
        let r = run_theorem_trials(&theorem_config(&[2, 2], 3, 1)).unwrap();
        let csv = records_csv(&r.records, LogBase::Nats);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("trial_index,epsilon,lhs_nats,rhs_nats,margin_nats")
        );
        assert_eq!(lines.next().unwrap().split(',').count(), 5);
    }

    #[test]
    fn bad_configs() {
        assert!(run_theorem_trials(&theorem_config(&[4], 5, 1)).is_err());
        assert!(run_theorem_trials(&theorem_config(&[2, 2], 0, 1)).is_err());
    }
}
