//! The auxiliary-state construction behind the conditional-entropy bound,
//! executed numerically.
//!
//! For two states at trace distance `ε ∈ (0, 1]`, split `ρ - σ = P - N`
//! into orthogonal positive and negative parts and set
//!
//! ```text
//! γ  = (1-ε)ρ + |ρ-σ|
//! ρ̃ = |ρ-σ| / ε
//! σ̃ = ((1-ε)(ρ-σ) + |ρ-σ|) / ε = ((2-ε)P + εN) / ε
//! ```
//!
//! so that `γ = (1-ε)ρ + ερ̃ = (1-ε)σ + εσ̃`. The bound then follows from
//! two applications of the mixing estimate, one along each segment. This
//! module builds those objects, reports the residuals of every identity,
//! and measures each inequality of the mixing estimate.

use serde::Serialize;
use thiserror::Error;

use crate::entropy::{
    af_bound, conditional_entropy, eta, lemma_bound, trace_distance, von_neumann_entropy,
    EntropyError, LogBase, EPSILON_SLACK,
};
use crate::qmat::{DensityMatrix, HermitianOperator, QmatError};

/// Trace distances at or below this are treated as `ε = 0`.
pub const DEGENERATE_EPSILON: f64 = 1e-12;
/// Tolerance for the identities of a [`ThalesDecomposition`].
pub const IDENTITY_TOL: f64 = 1e-10;
/// Tolerance for the measured inequalities.
pub const INEQUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThalesError {
    #[error("degenerate case: states coincide (epsilon = {0:e}), the bound is trivially 0 = 0")]
    DegenerateCase(f64),
    #[error("out of regime: epsilon = {0} exceeds 1")]
    OutOfRegime(f64),
    #[error(transparent)]
    Entropy(#[from] EntropyError),
}

impl From<QmatError> for ThalesError {
    fn from(e: QmatError) -> Self {
        ThalesError::Entropy(e.into())
    }
}

impl ThalesError {
    pub fn code(&self) -> &'static str {
        match self {
            ThalesError::DegenerateCase(_) => "degenerate-case",
            ThalesError::OutOfRegime(_) => "out-of-regime",
            ThalesError::Entropy(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThalesDecomposition {
    pub epsilon: f64,
    pub rho: DensityMatrix,
    pub sigma: DensityMatrix,
    pub gamma: DensityMatrix,
    pub rho_tilde: DensityMatrix,
    pub sigma_tilde: DensityMatrix,
    /// Positive part `P` of `ρ - σ`.
    pub positive_part: HermitianOperator,
    /// Negative part `N` of `ρ - σ`, so that `ρ - σ = P - N`.
    pub negative_part: HermitianOperator,
}

/// Entrywise residuals of the decomposition identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThalesResiduals {
    /// `γ` vs `(1-ε)ρ + ερ̃`.
    pub gamma_via_rho: f64,
    /// `γ` vs `(1-ε)σ + εσ̃`.
    pub gamma_via_sigma: f64,
    /// `ρ̃` vs `|ρ-σ|/ε`, with the absolute value recomputed.
    pub rho_tilde_definition: f64,
    /// `σ̃` vs `((2-ε)P + εN)/ε`.
    pub sigma_tilde_explicit: f64,
    /// `|Tr P - ε/2|`.
    pub positive_trace: f64,
    /// `|Tr N - ε/2|`.
    pub negative_trace: f64,
    pub rho_tilde_min_eigenvalue: f64,
    pub sigma_tilde_min_eigenvalue: f64,
    /// `|Tr ρ̃ - 1|`.
    pub rho_tilde_trace: f64,
    /// `|Tr σ̃ - 1|`.
    pub sigma_tilde_trace: f64,
}

impl ThalesResiduals {
    pub fn within(&self, tol: f64) -> bool {
        [
            self.gamma_via_rho,
            self.gamma_via_sigma,
            self.rho_tilde_definition,
            self.sigma_tilde_explicit,
            self.positive_trace,
            self.negative_trace,
            self.rho_tilde_trace,
            self.sigma_tilde_trace,
        ]
        .iter()
        .all(|&r| r <= tol)
            && self.rho_tilde_min_eigenvalue >= -tol
            && self.sigma_tilde_min_eigenvalue >= -tol
    }
}

fn check_regime(epsilon: f64) -> Result<(), ThalesError> {
    if epsilon <= DEGENERATE_EPSILON {
        return Err(ThalesError::DegenerateCase(epsilon));
    }
    if epsilon > 1.0 + EPSILON_SLACK {
        return Err(ThalesError::OutOfRegime(epsilon));
    }
    Ok(())
}

pub fn decompose(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<ThalesDecomposition, ThalesError> {
    if rho.dims() != sigma.dims() {
        return Err(QmatError::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        }
        .into());
    }
    let diff = rho.op().sub(sigma.op())?;
    let spectrum = diff.eigen()?;
    let positive_part = spectrum.map(|l| l.max(0.0));
    let negative_part = spectrum.map(|l| (-l).max(0.0));
    let epsilon: f64 = spectrum.eigenvalues.iter().map(|l| l.abs()).sum();
    check_regime(epsilon)?;

    let abs = positive_part.add(&negative_part)?;
    let dims = rho.dims();
    let gamma = DensityMatrix::validate(
        (rho.op().scale(1.0 - epsilon).add(&abs)?).into_matrix(),
        dims,
    )?;
    let rho_tilde = DensityMatrix::validate(abs.scale(1.0 / epsilon).into_matrix(), dims)?;
    let sigma_tilde = DensityMatrix::validate(
        diff.scale(1.0 - epsilon)
            .add(&abs)?
            .scale(1.0 / epsilon)
            .into_matrix(),
        dims,
    )?;
    Ok(ThalesDecomposition {
        epsilon,
        rho: rho.clone(),
        sigma: sigma.clone(),
        gamma,
        rho_tilde,
        sigma_tilde,
        positive_part,
        negative_part,
    })
}

impl ThalesDecomposition {
    pub fn residuals(&self) -> Result<ThalesResiduals, ThalesError> {
        let e = self.epsilon;
        let via_rho = self
            .rho
            .op()
            .scale(1.0 - e)
            .add(&self.rho_tilde.op().scale(e))?;
        let via_sigma = self
            .sigma
            .op()
            .scale(1.0 - e)
            .add(&self.sigma_tilde.op().scale(e))?;
        let abs = self.rho.op().sub(self.sigma.op())?.abs()?;
        let explicit = self
            .positive_part
            .scale(2.0 - e)
            .add(&self.negative_part.scale(e))?
            .scale(1.0 / e);
        Ok(ThalesResiduals {
            gamma_via_rho: self.gamma.op().max_abs_diff(&via_rho),
            gamma_via_sigma: self.gamma.op().max_abs_diff(&via_sigma),
            rho_tilde_definition: self.rho_tilde.op().max_abs_diff(&abs.scale(1.0 / e)),
            sigma_tilde_explicit: self.sigma_tilde.op().max_abs_diff(&explicit),
            positive_trace: (self.positive_part.trace() - e / 2.0).abs(),
            negative_trace: (self.negative_part.trace() - e / 2.0).abs(),
            rho_tilde_min_eigenvalue: self.rho_tilde.op().min_eigenvalue()?,
            sigma_tilde_min_eigenvalue: self.sigma_tilde.op().min_eigenvalue()?,
            rho_tilde_trace: (self.rho_tilde.op().trace() - 1.0).abs(),
            sigma_tilde_trace: (self.sigma_tilde.op().trace() - 1.0).abs(),
        })
    }
}

/// Measured terms of the mixing estimate for `γ = (1-ε)ρ + ερ̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaChainReport {
    pub epsilon: f64,
    pub d1: usize,
    pub base: LogBase,
    pub cond_rho: f64,
    pub cond_rho_tilde: f64,
    pub cond_gamma: f64,
    /// `S(γ|γ²) - (1-ε)S(ρ|ρ²) - εS(ρ̃|ρ̃²)`; nonnegative by concavity.
    pub concavity_gap: f64,
    /// `S(γ²) - (1-ε)S(ρ²) - εS(ρ̃²)`; nonnegative by concavity of entropy.
    pub marginal_concavity_gap: f64,
    /// `S(γ¹²) - (1-ε)S(ρ¹²) - εS(ρ̃¹²)`; at most `η(1-ε) + η(ε)`.
    pub mixing_excess: f64,
    /// `η(1-ε) + η(ε)`.
    pub mixing_allowance: f64,
    /// `S(ρ|ρ²) - S(γ|γ²)`.
    pub difference: f64,
    /// `ε (S(ρ|ρ²) - S(ρ̃|ρ̃²))`, the middle term of both one-sided chains.
    pub scaled_gap: f64,
    /// `2ε log d₁`.
    pub upper_limit: f64,
    /// `-2ε log d₁ - η(1-ε) - η(ε)`.
    pub lower_limit: f64,
    pub lemma_bound: f64,
    pub concavity_ok: bool,
    pub marginal_concavity_ok: bool,
    pub mixing_ok: bool,
    /// `difference ≤ scaled_gap ≤ upper_limit`.
    pub upper_chain_ok: bool,
    /// `difference ≥ scaled_gap - allowance ≥ lower_limit`.
    pub lower_chain_ok: bool,
    /// `|difference| ≤ lemma_bound`.
    pub lemma_ok: bool,
}

impl LemmaChainReport {
    pub fn all_ok(&self) -> bool {
        self.concavity_ok
            && self.marginal_concavity_ok
            && self.mixing_ok
            && self.upper_chain_ok
            && self.lower_chain_ok
            && self.lemma_ok
    }
}

/// Forms `γ = (1-ε)ρ + ερ̃` and measures every step of the two one-sided
/// chains of the mixing estimate at tolerance `tol`.
pub fn check_lemma_chain(
    rho: &DensityMatrix,
    rho_tilde: &DensityMatrix,
    epsilon: f64,
    base: LogBase,
    tol: f64,
) -> Result<LemmaChainReport, ThalesError> {
    if rho.dims() != rho_tilde.dims() || rho.dims().len() != 2 {
        return Err(QmatError::DimensionMismatch {
            left: rho.dim(),
            right: rho_tilde.dim(),
        }
        .into());
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(EntropyError::BoundInapplicable {
            epsilon,
            fallback: 2.0 * base.log(rho.dims()[0] as f64),
        }
        .into());
    }
    let d1 = rho.dims()[0];
    let gamma = rho.mix(rho_tilde, epsilon)?;
    let w = 1.0 - epsilon;

    let joint = |s: &DensityMatrix| von_neumann_entropy(s, base).map(|v| v.value);
    let second =
        |s: &DensityMatrix| -> Result<f64, EntropyError> { joint(&s.partial_trace(&[1])?) };
    let cond = |s: &DensityMatrix| conditional_entropy(s, base).map(|v| v.value);

    let cond_rho = cond(rho)?;
    let cond_rho_tilde = cond(rho_tilde)?;
    let cond_gamma = cond(&gamma)?;
    let concavity_gap = cond_gamma - (w * cond_rho + epsilon * cond_rho_tilde);
    let marginal_concavity_gap =
        second(&gamma)? - (w * second(rho)? + epsilon * second(rho_tilde)?);
    let mixing_excess = joint(&gamma)? - (w * joint(rho)? + epsilon * joint(rho_tilde)?);
    let mixing_allowance = eta(w, base)? + eta(epsilon, base)?;

    let log_d = base.log(d1 as f64);
    let difference = cond_rho - cond_gamma;
    let scaled_gap = epsilon * (cond_rho - cond_rho_tilde);
    let upper_limit = 2.0 * epsilon * log_d;
    let lower_limit = -upper_limit - mixing_allowance;
    let bound = lemma_bound(epsilon, d1, base)?;

    Ok(LemmaChainReport {
        epsilon,
        d1,
        base,
        cond_rho,
        cond_rho_tilde,
        cond_gamma,
        concavity_gap,
        marginal_concavity_gap,
        mixing_excess,
        mixing_allowance,
        difference,
        scaled_gap,
        upper_limit,
        lower_limit,
        lemma_bound: bound,
        concavity_ok: concavity_gap >= -tol,
        marginal_concavity_ok: marginal_concavity_gap >= -tol,
        mixing_ok: mixing_excess <= mixing_allowance + tol,
        upper_chain_ok: difference <= scaled_gap + tol && scaled_gap <= upper_limit + tol,
        lower_chain_ok: difference >= scaled_gap - mixing_allowance - tol
            && scaled_gap - mixing_allowance >= lower_limit - tol,
        lemma_ok: difference.abs() <= bound + tol,
    })
}

/// The triangle-inequality assembly through `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssemblyReport {
    pub epsilon: f64,
    pub d1: usize,
    pub base: LogBase,
    /// `|S(ρ|ρ²) - S(σ|σ²)|`.
    pub lhs: f64,
    /// `|S(ρ|ρ²) - S(γ|γ²)|`.
    pub rho_leg: f64,
    /// `|S(σ|σ²) - S(γ|γ²)|`.
    pub sigma_leg: f64,
    pub triangle_sum: f64,
    /// Mixing bound applied to each leg.
    pub leg_bound: f64,
    pub bound: f64,
    pub margin: f64,
    pub triangle_ok: bool,
    pub legs_ok: bool,
    pub bound_ok: bool,
}

pub fn check_theorem_assembly(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    base: LogBase,
    tol: f64,
) -> Result<AssemblyReport, ThalesError> {
    let dec = decompose(rho, sigma)?;
    if rho.dims().len() != 2 {
        return Err(EntropyError::Arity {
            expected: 2,
            found: rho.dims().len(),
        }
        .into());
    }
    let d1 = rho.dims()[0];
    let cond = |s: &DensityMatrix| conditional_entropy(s, base).map(|v| v.value);
    let (c_rho, c_sigma, c_gamma) = (cond(rho)?, cond(sigma)?, cond(&dec.gamma)?);
    let lhs = (c_rho - c_sigma).abs();
    let rho_leg = (c_rho - c_gamma).abs();
    let sigma_leg = (c_sigma - c_gamma).abs();
    let triangle_sum = rho_leg + sigma_leg;
    let leg_bound = lemma_bound(dec.epsilon, d1, base)?;
    let bound = af_bound(dec.epsilon, d1, base)?;
    Ok(AssemblyReport {
        epsilon: dec.epsilon,
        d1,
        base,
        lhs,
        rho_leg,
        sigma_leg,
        triangle_sum,
        leg_bound,
        bound,
        margin: bound - lhs,
        triangle_ok: lhs <= triangle_sum + tol,
        legs_ok: rho_leg <= leg_bound + tol && sigma_leg <= leg_bound + tol,
        bound_ok: triangle_sum <= bound + tol,
    })
}

/// Convenience: `ε` without building the decomposition.
pub fn regime_epsilon(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, ThalesError> {
    let e = trace_distance(rho, sigma)?;
    check_regime(e)?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{induced_mixed, trial_rng};
    use crate::states;

    fn diag(p: &[f64]) -> DensityMatrix {
        DensityMatrix::from_diagonal(p, &[p.len()]).unwrap()
    }

    fn assert_state_eq(a: &DensityMatrix, b: &[f64]) {
        let expected = HermitianOperator::from_real_diagonal(b);
        assert!(
            a.op().max_abs_diff(&expected) < 1e-15,
            "{:?} vs {b:?}",
            a.matrix()
        );
    }

    #[test]
    fn half_epsilon_diagonal_example() {
        let dec = decompose(&diag(&[1.0, 0.0]), &diag(&[0.75, 0.25])).unwrap();
        assert!((dec.epsilon - 0.5).abs() < 1e-15);
        assert_state_eq(&dec.rho_tilde, &[0.5, 0.5]);
        assert_state_eq(&dec.gamma, &[0.75, 0.25]);
        assert_state_eq(&dec.sigma_tilde, &[0.75, 0.25]);
        assert!(dec.residuals().unwrap().within(IDENTITY_TOL));
    }

    #[test]
    fn unit_epsilon_diagonal_example() {
        let dec = decompose(&diag(&[0.75, 0.25]), &diag(&[0.25, 0.75])).unwrap();
        assert!((dec.epsilon - 1.0).abs() < 1e-15);
        for s in [&dec.rho_tilde, &dec.sigma_tilde, &dec.gamma] {
            assert_state_eq(s, &[0.5, 0.5]);
        }
    }

    #[test]
    fn equal_states_are_degenerate() {
        let r = diag(&[0.6, 0.4]);
        let err = decompose(&r, &r).unwrap_err();
        assert!(matches!(err, ThalesError::DegenerateCase(_)));
        assert_eq!(err.code(), "degenerate-case");
    }

    #[test]
    fn bell_vs_maximally_mixed_is_out_of_regime() {
        let mm = DensityMatrix::maximally_mixed(&[2, 2]).unwrap();
        match decompose(&states::bell(), &mm) {
            Err(ThalesError::OutOfRegime(e)) => assert!((e - 1.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(
            check_theorem_assembly(&states::bell(), &mm, LogBase::Bits, INEQUALITY_TOL).is_err()
        );
    }

    #[test]
    fn lemma_chain_endpoints() {
        let mut rng = trial_rng(5, 0);
        let rho = induced_mixed(&[2, 2], 4, &mut rng).unwrap();
        let tilde = induced_mixed(&[2, 2], 4, &mut rng).unwrap();
        let zero = check_lemma_chain(&rho, &tilde, 0.0, LogBase::Bits, INEQUALITY_TOL).unwrap();
        assert_eq!(zero.concavity_gap, 0.0);
        assert_eq!(zero.marginal_concavity_gap, 0.0);
        assert_eq!(zero.mixing_excess, 0.0);
        assert_eq!(zero.difference, 0.0);
        assert!(zero.all_ok());

        let one = check_lemma_chain(&rho, &tilde, 1.0, LogBase::Bits, INEQUALITY_TOL).unwrap();
        assert!((one.difference - (one.cond_rho - one.cond_rho_tilde)).abs() < 1e-12);
        assert!(one.difference.abs() <= 2.0 + 1e-12);
        assert!(one.all_ok());

        assert!(check_lemma_chain(&rho, &tilde, 1.5, LogBase::Bits, INEQUALITY_TOL).is_err());
        let other = DensityMatrix::maximally_mixed(&[4]).unwrap();
        assert!(check_lemma_chain(&rho, &other, 0.5, LogBase::Bits, INEQUALITY_TOL).is_err());
    }

    #[test]
    fn small_perturbation_assembly() {
        let rho = induced_mixed(&[2, 2], 4, &mut trial_rng(8, 0)).unwrap();
        let mm = DensityMatrix::maximally_mixed(&[2, 2]).unwrap();
        let sigma = rho.mix(&mm, 1e-6).unwrap();
        let rep = check_theorem_assembly(&rho, &sigma, LogBase::Bits, INEQUALITY_TOL).unwrap();
        assert!(rep.epsilon > 0.0 && rep.epsilon < 1e-5);
        assert!(rep.lhs < 1e-4 && rep.triangle_sum < 1e-4);
        assert!(rep.bound_ok && rep.triangle_ok && rep.legs_ok);
        let two_eta = 2.0 * eta(rep.epsilon, LogBase::Bits).unwrap();
        assert!((rep.margin - two_eta).abs() < 0.5 * two_eta);
    }
}
