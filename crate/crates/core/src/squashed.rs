//! Upper bounds on squashed entanglement.
//!
//! Every extension `ρ¹²³` of `ρ¹²` arises from a purification `|ψ⟩` on
//! `1 ⊗ 2 ⊗ R` by sending `R` through a channel into system 3. Here the
//! channel is a Stinespring isometry `W : R → E ⊗ 3` taken as the first
//! `rank` columns of `exp(iH)` for a Hermitian generator `H`, so every
//! real parameter vector gives an exact isometry and the search is
//! unconstrained. Half the smallest conditional mutual information found
//! by Nelder-Mead over those parameters is an upper bound on `E_sq`
//! restricted to extensions of the chosen dimension.
//!
//! Isometry outputs are indexed `e * d3 + a` (residual `E` slowest), so the
//! zero parameter vector maps `R` onto system 3 directly and, for
//! `d3 == rank`, reproduces the purification itself.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::trial_rng;
use crate::entropy::{
    af_bound, conditional_mutual_information, mutual_information, trace_distance, EntropyError,
    LogBase, EPSILON_SLACK,
};
use crate::qmat::{max_abs_diff, CMatrix, DensityMatrix, QmatError, EIGEN_CLAMP};
use crate::simplex::{self, SimplexConfig};

/// Largest admissible deviation of `W†W` from the identity.
pub const ISOMETRY_TOL: f64 = 1e-9;
/// Allowance for optimizer noise when comparing two estimates.
pub const OPTIMIZER_NOISE: f64 = 2e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SquashedError {
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("parameterized map is not an isometry (deviation {0:e})")]
    NotIsometry(f64),
    #[error("extension space of dimension {space} cannot hold rank {rank}")]
    ExtensionTooSmall { space: usize, rank: usize },
    #[error("expected {expected} parameters, got {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("out of regime: epsilon = {0} exceeds 1")]
    OutOfRegime(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<QmatError> for SquashedError {
    fn from(e: QmatError) -> Self {
        SquashedError::Entropy(e.into())
    }
}

impl SquashedError {
    pub fn code(&self) -> &'static str {
        match self {
            SquashedError::Entropy(e) => e.code(),
            SquashedError::NotIsometry(_) => "not-isometry",
            SquashedError::ExtensionTooSmall { .. } => "extension-too-small",
            SquashedError::ParamCount { .. } => "param-count",
            SquashedError::OutOfRegime(_) => "out-of-regime",
            SquashedError::Config(_) => "config",
        }
    }
}

/// A purification of a bipartite state on `d1 ⊗ d2 ⊗ rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct Purification {
    pub state: DensityMatrix,
    /// `(d1*d2) x rank` amplitude matrix: `ψ[x, i] = √λᵢ vᵢ[x]`.
    pub amplitudes: CMatrix,
    pub rank: usize,
}

pub fn purify(rho12: &DensityMatrix) -> Result<Purification, SquashedError> {
    if rho12.dims().len() != 2 {
        return Err(EntropyError::Arity {
            expected: 2,
            found: rho12.dims().len(),
        }
        .into());
    }
    let spectrum = rho12.op().eigen()?;
    let kept: Vec<usize> = (0..spectrum.eigenvalues.len())
        .filter(|&i| spectrum.eigenvalues[i] > EIGEN_CLAMP)
        .collect();
    let rank = kept.len().max(1);
    let total: f64 = kept.iter().map(|&i| spectrum.eigenvalues[i]).sum();
    let d = rho12.dim();
    let amplitudes = CMatrix::from_fn(d, rank, |x, i| match kept.get(i) {
        Some(&k) => spectrum.eigenvectors[(x, k)] * (spectrum.eigenvalues[k] / total).sqrt(),
        None => Complex64::new(0.0, 0.0),
    });
    let psi: Vec<Complex64> = (0..d * rank)
        .map(|m| amplitudes[(m / rank, m % rank)])
        .collect();
    let dims = [rho12.dims()[0], rho12.dims()[1], rank];
    Ok(Purification {
        state: DensityMatrix::from_pure(&psi, &dims)?,
        amplitudes,
        rank,
    })
}

/// Parameters of an isometry from the purifying system into `residual ⊗ 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionParams {
    pub d3: usize,
    pub residual_dim: usize,
    /// `n²` generator entries for `n = d3 * residual_dim`: the `n` diagonal
    /// entries, then real and imaginary parts of the strict upper triangle.
    pub params: Vec<f64>,
}

impl ExtensionParams {
    pub fn param_count(d3: usize, residual_dim: usize) -> usize {
        let n = d3 * residual_dim;
        n * n
    }

    pub fn identity(d3: usize, residual_dim: usize) -> Self {
        ExtensionParams {
            d3,
            residual_dim,
            params: vec![0.0; Self::param_count(d3, residual_dim)],
        }
    }

    pub fn random<R: Rng + ?Sized>(d3: usize, residual_dim: usize, rng: &mut R) -> Self {
        let params = (0..Self::param_count(d3, residual_dim))
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        ExtensionParams {
            d3,
            residual_dim,
            params,
        }
    }

    /// First `rank` columns of `exp(iH)`.
    pub fn isometry(&self, rank: usize) -> Result<CMatrix, SquashedError> {
        isometry_from(&self.params, self.d3 * self.residual_dim, rank)
    }

    /// Parameters reproducing the isometry `w`: completes it to a unitary
    /// `U` and reads off `H = -i log U` from a Schur decomposition.
    pub fn from_isometry(
        w: &CMatrix,
        d3: usize,
        residual_dim: usize,
    ) -> Result<Self, SquashedError> {
        let n = d3 * residual_dim;
        if w.nrows() != n || w.ncols() > n {
            return Err(SquashedError::ExtensionTooSmall {
                space: n,
                rank: w.ncols(),
            });
        }
        let u = complete_unitary(w);
        let (q, t) = Schur::try_new(u, f64::EPSILON, 10_000)
            .ok_or(QmatError::EigenNoConvergence { dim: n })?
            .unpack();
        let mut scaled = q.clone();
        for j in 0..n {
            let theta = t[(j, j)].arg();
            for i in 0..n {
                scaled[(i, j)] *= theta;
            }
        }
        let h = scaled * q.adjoint();
        let mut params = Vec::with_capacity(n * n);
        params.extend((0..n).map(|i| h[(i, i)].re));
        for i in 0..n {
            for j in (i + 1)..n {
                let z = 0.5 * (h[(i, j)] + h[(j, i)].conj());
                params.push(z.re);
                params.push(z.im);
            }
        }
        let p = ExtensionParams {
            d3,
            residual_dim,
            params,
        };
        let deviation = max_abs_diff(&p.isometry(w.ncols())?, w);
        if deviation > 1e-8 {
            return Err(SquashedError::NotIsometry(deviation));
        }
        Ok(p)
    }
}

/// Gram-Schmidt completion of orthonormal columns to a unitary.
fn complete_unitary(w: &CMatrix) -> CMatrix {
    let n = w.nrows();
    let mut cols: Vec<nalgebra::DVector<Complex64>> =
        w.column_iter().map(|c| c.into_owned()).collect();
    for k in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = nalgebra::DVector::from_fn(n, |i, _| {
            Complex64::new(if i == k { 1.0 } else { 0.0 }, 0.0)
        });
        for _ in 0..2 {
            for c in &cols {
                let overlap = c.dotc(&v);
                v -= c * overlap;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            cols.push(v / Complex64::new(norm, 0.0));
        }
    }
    CMatrix::from_columns(&cols)
}

/// Re-indexes an isometry into `residual ⊗ d3_to` from `residual ⊗ d3_from`
/// (`d3_from <= d3_to`), placing system 3 in the leading basis states.
pub fn embed_isometry(w: &CMatrix, d3_from: usize, d3_to: usize, residual_dim: usize) -> CMatrix {
    let mut out = CMatrix::zeros(d3_to * residual_dim, w.ncols());
    for e in 0..residual_dim {
        for a in 0..d3_from {
            for c in 0..w.ncols() {
                out[(e * d3_to + a, c)] = w[(e * d3_from + a, c)];
            }
        }
    }
    out
}

fn generator(params: &[f64], n: usize) -> Result<CMatrix, SquashedError> {
    if params.len() != n * n {
        return Err(SquashedError::ParamCount {
            expected: n * n,
            found: params.len(),
        });
    }
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(params[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in (i + 1)..n {
            let z = Complex64::new(params[k], params[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    Ok(h)
}

fn isometry_from(params: &[f64], n: usize, rank: usize) -> Result<CMatrix, SquashedError> {
    if n < rank {
        return Err(SquashedError::ExtensionTooSmall { space: n, rank });
    }
    let h = generator(params, n)?;
    let eig = h
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(QmatError::EigenNoConvergence { dim: n })?;
    let v = &eig.eigenvectors;
    // W = V exp(iΛ) V†[:, ..rank]
    let mut phased = v.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let p = Complex64::from_polar(1.0, l);
        for i in 0..n {
            phased[(i, j)] *= p;
        }
    }
    let vt = v.adjoint();
    let w = phased * vt.columns(0, rank);
    let deviation = max_abs_diff(&(w.adjoint() * &w), &CMatrix::identity(rank, rank));
    if deviation > ISOMETRY_TOL {
        return Err(SquashedError::NotIsometry(deviation));
    }
    Ok(w)
}

/// Builds extensions of one fixed state.
#[derive(Debug, Clone)]
pub struct Extender {
    dims: [usize; 2],
    purification: Purification,
    d3: usize,
    residual_dim: usize,
}

impl Extender {
    pub fn new(
        rho12: &DensityMatrix,
        d3: usize,
        residual_dim: usize,
    ) -> Result<Self, SquashedError> {
        if d3 == 0 || residual_dim == 0 {
            return Err(SquashedError::Config(
                "d3 and residual_dim must be positive".into(),
            ));
        }
        let purification = purify(rho12)?;
        if d3 * residual_dim < purification.rank {
            return Err(SquashedError::ExtensionTooSmall {
                space: d3 * residual_dim,
                rank: purification.rank,
            });
        }
        Ok(Extender {
            dims: [rho12.dims()[0], rho12.dims()[1]],
            purification,
            d3,
            residual_dim,
        })
    }

    pub fn rank(&self) -> usize {
        self.purification.rank
    }

    pub fn param_count(&self) -> usize {
        ExtensionParams::param_count(self.d3, self.residual_dim)
    }

    /// Extension for a raw parameter vector.
    pub fn extend_raw(&self, params: &[f64]) -> Result<DensityMatrix, SquashedError> {
        let n = self.d3 * self.residual_dim;
        let w = isometry_from(params, n, self.rank())?;
        // Φ = Ψ Wᵀ, one row per system-12 index and one column per (e, a).
        let phi = &self.purification.amplitudes * w.transpose();
        let d = phi.nrows();
        let (d3, k) = (self.d3, self.residual_dim);
        // Regroup as (x, a) rows and e columns, then trace out e.
        let x = DMatrix::from_fn(d * d3, k, |row, e| phi[(row / d3, e * d3 + row % d3)]);
        Ok(DensityMatrix::from_psd_unchecked(
            &x * x.adjoint(),
            &[self.dims[0], self.dims[1], d3],
        ))
    }

    pub fn extend(&self, p: &ExtensionParams) -> Result<DensityMatrix, SquashedError> {
        if p.d3 != self.d3 || p.residual_dim != self.residual_dim {
            return Err(SquashedError::Config(format!(
                "params for d3={}, residual={} used with d3={}, residual={}",
                p.d3, p.residual_dim, self.d3, self.residual_dim
            )));
        }
        self.extend_raw(&p.params)
    }

    pub fn cmi(&self, params: &[f64], base: LogBase) -> Result<f64, SquashedError> {
        Ok(conditional_mutual_information(
            &self.extend_raw(params)?,
            base,
        )?)
    }
}

/// Extension of `rho12` under `p`, with the residual dimension taken from `p`.
pub fn extend(rho12: &DensityMatrix, p: &ExtensionParams) -> Result<DensityMatrix, SquashedError> {
    Extender::new(rho12, p.d3, p.residual_dim)?.extend(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsqConfig {
    /// Extension dimension; defaults to twice the rank of the state.
    pub d3: Option<usize>,
    /// Residual dimension of the isometry; defaults to the rank.
    pub residual_dim: Option<usize>,
    pub restarts: usize,
    pub simplex: SimplexConfig,
    pub seed: u64,
    pub base: LogBase,
}

impl Default for EsqConfig {
    fn default() -> Self {
        EsqConfig {
            d3: None,
            residual_dim: None,
            restarts: 8,
            simplex: SimplexConfig::default(),
            seed: 3_735_928_559,
            base: LogBase::Bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub cmi_half: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// Zero generator.
    Identity,
    /// Uniform random generator from the restart's stream.
    Random,
    /// Best isometry of a smaller extension dimension, embedded.
    WarmStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub start: StartKind,
    pub initial_cmi_half: f64,
    pub best_cmi_half: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Failed objective evaluations (treated as +∞ by the optimizer).
    pub failed_evaluations: usize,
    /// Best value after each improving iteration.
    pub history: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsqEstimate {
    /// Half the smallest conditional mutual information found.
    pub best_cmi_half: f64,
    pub base: LogBase,
    pub d3: usize,
    pub residual_dim: usize,
    pub rank: usize,
    pub restarts: usize,
    pub iterations: usize,
    /// True when every restart met the function tolerance.
    pub converged: bool,
    /// Restart that produced the estimate; `None` when no restart beat the
    /// product extension `ρ¹² ⊗ |0⟩⟨0|`, whose value is `½ I(1;2)`.
    pub best_restart: Option<usize>,
    pub product_extension_cmi_half: f64,
    pub best_params: Option<Vec<f64>>,
    pub trace: Vec<RestartTrace>,
}

/// Minimizes `½ I(1;2|3)` over extensions of `rho12`. Restart 0 starts
/// from the zero generator, later restarts from uniform random generators
/// drawn from the stream `(seed, restart)`. Restarts run in parallel; the
/// reduction is order-independent.
pub fn estimate_esq(
    rho12: &DensityMatrix,
    config: &EsqConfig,
) -> Result<EsqEstimate, SquashedError> {
    estimate_with_warm_starts(rho12, config, &[])
}

/// Runs [`estimate_esq`] at each extension dimension in `d3_schedule`
/// (ascending), adding the previous level's best isometry as a warm start
/// to the next level. Since a smaller extension embeds in a larger one,
/// the estimates are nonincreasing along the schedule.
pub fn estimate_esq_schedule(
    rho12: &DensityMatrix,
    d3_schedule: &[usize],
    config: &EsqConfig,
) -> Result<Vec<EsqEstimate>, SquashedError> {
    if d3_schedule.is_empty() || d3_schedule.windows(2).any(|w| w[0] > w[1]) {
        return Err(SquashedError::Config(
            "d3 schedule must be nonempty and ascending".into(),
        ));
    }
    let mut out: Vec<EsqEstimate> = Vec::with_capacity(d3_schedule.len());
    for &d3 in d3_schedule {
        let level = EsqConfig {
            d3: Some(d3),
            ..config.clone()
        };
        let mut warm = Vec::new();
        if let Some(prev) = out.last() {
            if let Some(params) = &prev.best_params {
                let w = isometry_from(params, prev.d3 * prev.residual_dim, prev.rank)?;
                let residual = config.residual_dim.unwrap_or(prev.rank);
                if residual == prev.residual_dim {
                    let embedded = embed_isometry(&w, prev.d3, d3, residual);
                    warm.push(ExtensionParams::from_isometry(&embedded, d3, residual)?.params);
                }
            }
        }
        out.push(estimate_with_warm_starts(rho12, &level, &warm)?);
    }
    Ok(out)
}

fn estimate_with_warm_starts(
    rho12: &DensityMatrix,
    config: &EsqConfig,
    warm_starts: &[Vec<f64>],
) -> Result<EsqEstimate, SquashedError> {
    if config.restarts == 0 {
        return Err(SquashedError::Config("restarts must be at least 1".into()));
    }
    let rank = purify(rho12)?.rank;
    let d3 = config.d3.unwrap_or(2 * rank);
    let residual_dim = config.residual_dim.unwrap_or(rank);
    let extender = Extender::new(rho12, d3, residual_dim)?;
    let base = config.base;
    let product_extension_cmi_half = 0.5 * mutual_information(rho12, base)?.max(0.0);
    let simplex_config = SimplexConfig {
        lower_bound: Some(0.0),
        ..config.simplex
    };

    let mut starts: Vec<(StartKind, Vec<f64>)> = (0..config.restarts)
        .map(|restart| {
            if restart == 0 {
                (
                    StartKind::Identity,
                    ExtensionParams::identity(d3, residual_dim).params,
                )
            } else {
                let mut rng = trial_rng(config.seed, restart as u64);
                (
                    StartKind::Random,
                    ExtensionParams::random(d3, residual_dim, &mut rng).params,
                )
            }
        })
        .collect();
    for w in warm_starts {
        if w.len() != extender.param_count() {
            return Err(SquashedError::ParamCount {
                expected: extender.param_count(),
                found: w.len(),
            });
        }
        starts.push((StartKind::WarmStart, w.clone()));
    }

    let trace: Vec<(RestartTrace, Vec<f64>)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(restart, (start, x0))| {
            let mut failed = 0usize;
            let result = simplex::minimize(
                |x| match extender.cmi(x, base) {
                    Ok(v) => 0.5 * v,
                    Err(_) => {
                        failed += 1;
                        f64::INFINITY
                    }
                },
                &x0,
                &simplex_config,
            );
            let history: Vec<TracePoint> = result
                .history
                .iter()
                .map(|&(iteration, cmi_half)| TracePoint {
                    iteration,
                    cmi_half,
                })
                .collect();
            (
                RestartTrace {
                    restart,
                    start,
                    initial_cmi_half: history.first().map(|p| p.cmi_half).unwrap_or(f64::INFINITY),
                    best_cmi_half: result.fx,
                    iterations: result.iterations,
                    evaluations: result.evaluations,
                    converged: result.converged,
                    failed_evaluations: failed,
                    history,
                },
                result.x,
            )
        })
        .collect();

    let mut best_restart = None;
    let mut best_cmi_half = product_extension_cmi_half;
    let mut best_params = None;
    for (t, x) in &trace {
        if t.best_cmi_half.is_finite() && t.best_cmi_half < best_cmi_half {
            best_cmi_half = t.best_cmi_half;
            best_restart = Some(t.restart);
            best_params = Some(x.clone());
        }
    }
    Ok(EsqEstimate {
        best_cmi_half,
        base,
        d3,
        residual_dim,
        rank,
        restarts: trace.len(),
        iterations: trace.iter().map(|(t, _)| t.iterations).sum(),
        converged: trace.iter().all(|(t, _)| t.converged),
        best_restart,
        product_extension_cmi_half,
        best_params,
        trace: trace.into_iter().map(|(t, _)| t).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub epsilon: f64,
    pub estimate_rho: f64,
    pub estimate_sigma: f64,
    pub difference: f64,
    /// The conditional-entropy bound at this `ε`, as a reference line only.
    pub reference_bound: f64,
    pub noise_allowance: f64,
    pub within_reference: bool,
    pub base: LogBase,
}

/// Compares squashed-entanglement estimates of two nearby states against
/// the conditional-entropy continuity bound. An observation, not a check
/// of a proven inequality.
pub fn esq_continuity_probe(
    rho12: &DensityMatrix,
    sigma12: &DensityMatrix,
    config: &EsqConfig,
) -> Result<ProbeReport, SquashedError> {
    let epsilon = trace_distance(rho12, sigma12)?;
    if epsilon > 1.0 + EPSILON_SLACK {
        return Err(SquashedError::OutOfRegime(epsilon));
    }
    if rho12.dims() != sigma12.dims() || rho12.dims().len() != 2 {
        return Err(QmatError::DimensionMismatch {
            left: rho12.dim(),
            right: sigma12.dim(),
        }
        .into());
    }
    let a = estimate_esq(rho12, config)?.best_cmi_half;
    let b = estimate_esq(sigma12, config)?.best_cmi_half;
    let difference = (a - b).abs();
    let reference_bound = af_bound(epsilon, rho12.dims()[0], config.base)?;
    Ok(ProbeReport {
        epsilon,
        estimate_rho: a,
        estimate_sigma: b,
        difference,
        reference_bound,
        noise_allowance: OPTIMIZER_NOISE,
        within_reference: difference <= reference_bound + OPTIMIZER_NOISE,
        base: config.base,
    })
}
