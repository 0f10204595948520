//! Entropy functionals and the closed-form continuity bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qmat::{DensityMatrix, QmatError, EIGEN_CLAMP};

/// Slack allowed on `epsilon` before a bound evaluator declares it out of
/// `[0, 1]`; absorbs eigensolver jitter at the endpoints.
pub const EPSILON_SLACK: f64 = 1e-12;
/// Tolerance on negative conditional mutual information before it is
/// reported as a strong-subadditivity fault.
pub const CMI_NEGATIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Bits,
    Nats,
}

impl LogBase {
    /// Logarithm of `x` in this base.
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Bits => x.log2(),
            LogBase::Nats => x.ln(),
        }
    }

    /// Multiplier converting a value in this base into `to`.
    pub fn factor_to(self, to: LogBase) -> f64 {
        match (self, to) {
            (LogBase::Bits, LogBase::Nats) => std::f64::consts::LN_2,
            (LogBase::Nats, LogBase::Bits) => std::f64::consts::LOG2_E,
            _ => 1.0,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            LogBase::Bits => "bits",
            LogBase::Nats => "nats",
        }
    }
}

/// An entropy together with the logarithm base it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub value: f64,
    pub base: LogBase,
}

impl EntropyValue {
    pub fn new(value: f64, base: LogBase) -> Self {
        Self { value, base }
    }

    pub fn in_base(self, base: LogBase) -> EntropyValue {
        EntropyValue {
            value: self.value * self.base.factor_to(base),
            base,
        }
    }

    pub fn bits(self) -> f64 {
        self.in_base(LogBase::Bits).value
    }

    pub fn nats(self) -> f64 {
        self.in_base(LogBase::Nats).value
    }

    /// `self - other`, refusing to mix bases.
    pub fn checked_sub(self, other: EntropyValue) -> Result<EntropyValue, EntropyError> {
        if self.base != other.base {
            return Err(EntropyError::BaseMismatch);
        }
        Ok(EntropyValue::new(self.value - other.value, self.base))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntropyError {
    #[error(transparent)]
    Qmat(#[from] QmatError),
    #[error("eta argument {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("expected {expected} subsystems, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("conditional mutual information {0:e} is negative beyond tolerance")]
    NegativeCmi(f64),
    #[error(
        "bound inapplicable for epsilon {epsilon} (outside [0, 1]); trivial fallback {fallback}"
    )]
    BoundInapplicable { epsilon: f64, fallback: f64 },
    #[error("invalid dimension {0} for this bound")]
    BadDimension(usize),
    #[error("entropy values in different log bases")]
    BaseMismatch,
}

impl EntropyError {
    pub fn code(&self) -> &'static str {
        match self {
            EntropyError::Qmat(e) => e.code(),
            EntropyError::OutOfDomain(_) => "out-of-domain",
            EntropyError::Arity { .. } => "arity",
            EntropyError::NegativeCmi(_) => "negative-cmi",
            EntropyError::BoundInapplicable { .. } => "bound-inapplicable",
            EntropyError::BadDimension(_) => "bad-dimension",
            EntropyError::BaseMismatch => "base-mismatch",
        }
    }
}

/// `η(x) = -x log x` with `η(0) = 0`.
pub fn eta(x: f64, base: LogBase) -> Result<f64, EntropyError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(EntropyError::OutOfDomain(x));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * base.log(x))
}

fn clamp_eigenvalue(l: f64) -> f64 {
    if (-EIGEN_CLAMP..0.0).contains(&l) {
        0.0
    } else if l > 1.0 && l <= 1.0 + EIGEN_CLAMP {
        1.0
    } else {
        l
    }
}

/// Shannon entropy of a probability vector given as eigenvalues.
pub(crate) fn spectrum_entropy(eigenvalues: &[f64], base: LogBase) -> Result<f64, EntropyError> {
    eigenvalues
        .iter()
        .map(|&l| eta(clamp_eigenvalue(l), base))
        .sum()
}

pub fn von_neumann_entropy(
    rho: &DensityMatrix,
    base: LogBase,
) -> Result<EntropyValue, EntropyError> {
    let spectrum = rho.op().eigen()?;
    Ok(EntropyValue::new(
        spectrum_entropy(&spectrum.eigenvalues, base)?,
        base,
    ))
}

/// `S(ρ¹²) - S(ρ²)` for a state with exactly two declared subsystems.
pub fn conditional_entropy(
    rho12: &DensityMatrix,
    base: LogBase,
) -> Result<EntropyValue, EntropyError> {
    expect_arity(rho12, 2)?;
    let joint = von_neumann_entropy(rho12, base)?;
    let second = von_neumann_entropy(&rho12.partial_trace(&[1])?, base)?;
    joint.checked_sub(second)
}

/// `S(ρ¹³|ρ³) - S(ρ¹²³|ρ²³)`; tiny negative values are clamped to zero,
/// anything below `-CMI_NEGATIVE_TOL` is an error.
pub fn conditional_mutual_information(
    rho123: &DensityMatrix,
    base: LogBase,
) -> Result<f64, EntropyError> {
    expect_arity(rho123, 3)?;
    let dims = rho123.dims();
    let rho13 = rho123.partial_trace(&[0, 2])?;
    let grouped = rho123.regroup(&[dims[0], dims[1] * dims[2]])?;
    let cmi = conditional_entropy(&rho13, base)?
        .checked_sub(conditional_entropy(&grouped, base)?)?
        .value;
    if cmi < -CMI_NEGATIVE_TOL {
        return Err(EntropyError::NegativeCmi(cmi));
    }
    Ok(cmi.max(0.0))
}

/// `I(1;2) = S(ρ¹) + S(ρ²) - S(ρ¹²)`.
pub fn mutual_information(rho12: &DensityMatrix, base: LogBase) -> Result<f64, EntropyError> {
    expect_arity(rho12, 2)?;
    let s1 = von_neumann_entropy(&rho12.partial_trace(&[0])?, base)?.value;
    let s2 = von_neumann_entropy(&rho12.partial_trace(&[1])?, base)?.value;
    let s12 = von_neumann_entropy(rho12, base)?.value;
    Ok(s1 + s2 - s12)
}

/// `Tr|ρ - σ|`, ranging over `[0, 2]`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64, EntropyError> {
    if rho.dim() != sigma.dim() {
        return Err(QmatError::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
        }
        .into());
    }
    Ok(rho.op().sub(sigma.op())?.trace_norm()?)
}

/// How the dimension in the entropy-continuity bound is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpanDimension {
    /// Rank of the support of `ρ + σ`.
    #[default]
    SupportRank,
    /// The full Hilbert space dimension.
    Ambient,
}

/// Dimension of the span of the supports of `rho` and `sigma`.
pub fn support_span_rank(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<usize, EntropyError> {
    let sum = rho.op().add(sigma.op())?;
    Ok(sum
        .eigen()?
        .eigenvalues
        .iter()
        .filter(|&&l| l > EIGEN_CLAMP)
        .count())
}

pub fn span_dimension(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    mode: SpanDimension,
) -> Result<usize, EntropyError> {
    match mode {
        SpanDimension::SupportRank => support_span_rank(rho, sigma),
        SpanDimension::Ambient => Ok(rho.dim()),
    }
}

fn admit_epsilon(epsilon: f64, fallback: f64) -> Result<f64, EntropyError> {
    if !(-EPSILON_SLACK..=1.0 + EPSILON_SLACK).contains(&epsilon) {
        return Err(EntropyError::BoundInapplicable { epsilon, fallback });
    }
    Ok(epsilon.clamp(0.0, 1.0))
}

/// `4ε log d₁ + 2η(1-ε) + 2η(ε)`: bounds the change of conditional entropy
/// between two states at trace distance `ε`, with no dependence on the
/// conditioning system.
pub fn af_bound(epsilon: f64, d1: usize, base: LogBase) -> Result<f64, EntropyError> {
    if d1 < 2 {
        return Err(EntropyError::BadDimension(d1));
    }
    let log_d = base.log(d1 as f64);
    let e = admit_epsilon(epsilon, 2.0 * log_d)?;
    Ok(4.0 * e * log_d + 2.0 * eta(1.0 - e, base)? + 2.0 * eta(e, base)?)
}

/// `2ε log d₁ + η(1-ε) + η(ε)`: the one-sided mixing step.
pub fn lemma_bound(epsilon: f64, d1: usize, base: LogBase) -> Result<f64, EntropyError> {
    if d1 < 2 {
        return Err(EntropyError::BadDimension(d1));
    }
    let log_d = base.log(d1 as f64);
    let e = admit_epsilon(epsilon, 2.0 * log_d)?;
    Ok(2.0 * e * log_d + eta(1.0 - e, base)? + eta(e, base)?)
}

/// `2ε log d + η(ε) + η(1-ε)` for the plain von Neumann entropy.
pub fn entropy_continuity_bound(
    epsilon: f64,
    d: usize,
    base: LogBase,
) -> Result<f64, EntropyError> {
    if d < 1 {
        return Err(EntropyError::BadDimension(d));
    }
    let log_d = base.log(d as f64);
    let e = admit_epsilon(epsilon, log_d)?;
    Ok(2.0 * e * log_d + eta(e, base)? + eta(1.0 - e, base)?)
}

fn expect_arity(rho: &DensityMatrix, expected: usize) -> Result<(), EntropyError> {
    let found = rho.dims().len();
    if found != expected {
        return Err(EntropyError::Arity { expected, found });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states;
    use approx::assert_abs_diff_eq;

    const B: LogBase = LogBase::Bits;

    #[test]
    fn eta_values() {
        assert_eq!(eta(0.0, B).unwrap(), 0.0);
        assert_eq!(eta(1.0, B).unwrap(), 0.0);
        assert_abs_diff_eq!(eta(0.5, B).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(eta(-0.1, B), Err(EntropyError::OutOfDomain(_))));
        assert!(matches!(eta(1.5, B), Err(EntropyError::OutOfDomain(_))));
    }

    #[test]
    fn base_conversion() {
        let v = EntropyValue::new(1.7, LogBase::Bits);
        assert_abs_diff_eq!(v.nats(), 1.7 * std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(v.in_base(LogBase::Nats).bits(), 1.7, epsilon = 1e-12);
        let w = EntropyValue::new(1.0, LogBase::Nats);
        assert_eq!(v.checked_sub(w), Err(EntropyError::BaseMismatch));
    }

    #[test]
    fn von_neumann_examples() {
        let pure = states::bell();
        assert_abs_diff_eq!(
            von_neumann_entropy(&pure, B).unwrap().value,
            0.0,
            epsilon = 1e-12
        );
        for d in [2usize, 3, 4, 8] {
            let mm = DensityMatrix::maximally_mixed(&[d]).unwrap();
            assert_abs_diff_eq!(
                von_neumann_entropy(&mm, B).unwrap().value,
                (d as f64).log2(),
                epsilon = 1e-12
            );
        }
        // -(3/4) log2(3/4) - (1/4) log2(1/4)
        let expected = -(0.75f64 * 0.75f64.log2()) - 0.25 * 0.25f64.log2();
        let rho = DensityMatrix::from_diagonal(&[0.75, 0.25], &[2]).unwrap();
        let s = von_neumann_entropy(&rho, B).unwrap().value;
        assert_abs_diff_eq!(s, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 0.811278, epsilon = 1e-6);
        assert_abs_diff_eq!(
            von_neumann_entropy(&rho, LogBase::Nats).unwrap().value,
            expected * std::f64::consts::LN_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn conditional_entropy_examples() {
        assert_abs_diff_eq!(
            conditional_entropy(&states::bell(), B).unwrap().value,
            -1.0,
            epsilon = 1e-12
        );
        let rho = DensityMatrix::from_diagonal(&[0.75, 0.25], &[2]).unwrap();
        let tau = DensityMatrix::from_diagonal(&[0.1, 0.2, 0.7], &[3]).unwrap();
        assert_abs_diff_eq!(
            conditional_entropy(&rho.tensor(&tau), B).unwrap().value,
            von_neumann_entropy(&rho, B).unwrap().value,
            epsilon = 1e-12
        );
        let mm = DensityMatrix::maximally_mixed(&[2, 2]).unwrap();
        assert_abs_diff_eq!(
            conditional_entropy(&mm, B).unwrap().value,
            1.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            conditional_entropy(&DensityMatrix::maximally_mixed(&[4]).unwrap(), B),
            Err(EntropyError::Arity {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn cmi_examples() {
        let tau = DensityMatrix::from_diagonal(&[0.3, 0.7], &[2]).unwrap();
        let bt = states::bell().tensor(&tau);
        assert_abs_diff_eq!(
            conditional_mutual_information(&bt, B).unwrap(),
            2.0,
            epsilon = 1e-12
        );

        let rho = states::classical_correlated();
        let mixed = DensityMatrix::from_diagonal(&[0.4, 0.1, 0.2, 0.3], &[2, 2]).unwrap();
        for r in [rho, mixed] {
            let expected = mutual_information(&r, B).unwrap();
            let cmi = conditional_mutual_information(&r.tensor(&tau), B).unwrap();
            assert_abs_diff_eq!(cmi, expected, epsilon = 1e-12);
        }

        assert_abs_diff_eq!(
            conditional_mutual_information(&states::ghz(), B).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(matches!(
            conditional_mutual_information(&states::bell(), B),
            Err(EntropyError::Arity {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn trace_distance_examples() {
        let p0 = DensityMatrix::from_diagonal(&[1.0, 0.0], &[2]).unwrap();
        let p1 = DensityMatrix::from_diagonal(&[0.0, 1.0], &[2]).unwrap();
        let m = DensityMatrix::from_diagonal(&[0.75, 0.25], &[2]).unwrap();
        assert_eq!(trace_distance(&p0, &p0).unwrap(), 0.0);
        assert_abs_diff_eq!(trace_distance(&p0, &p1).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&p0, &m).unwrap(), 0.5, epsilon = 1e-15);
        let big = DensityMatrix::maximally_mixed(&[3]).unwrap();
        assert!(trace_distance(&p0, &big).is_err());
    }

    #[test]
    fn bound_examples() {
        for d1 in [2usize, 3, 7] {
            assert_eq!(af_bound(0.0, d1, B).unwrap(), 0.0);
            assert_eq!(lemma_bound(0.0, d1, B).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(af_bound(0.5, 2, B).unwrap(), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(af_bound(1.0, 2, B).unwrap(), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lemma_bound(0.5, 2, B).unwrap(), 2.0, epsilon = 1e-15);
        assert_eq!(entropy_continuity_bound(0.0, 5, B).unwrap(), 0.0);
        assert_abs_diff_eq!(
            entropy_continuity_bound(0.5, 2, B).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            entropy_continuity_bound(1.0, 4, B).unwrap(),
            4.0,
            epsilon = 1e-15
        );
        // 4(0.05) + 2η(0.95) + 2η(0.05), each η evaluated directly
        let direct = 0.2 - 2.0 * 0.95 * 0.95f64.log2() - 2.0 * 0.05 * 0.05f64.log2();
        assert_abs_diff_eq!(af_bound(0.05, 2, B).unwrap(), direct, epsilon = 1e-14);
        assert_abs_diff_eq!(direct, 0.772794, epsilon = 1e-6);
    }

    #[test]
    fn bound_rejections_carry_fallback() {
        match af_bound(1.5, 4, B) {
            Err(EntropyError::BoundInapplicable { epsilon, fallback }) => {
                assert_eq!(epsilon, 1.5);
                assert_abs_diff_eq!(fallback, 4.0, epsilon = 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(lemma_bound(-0.1, 2, B).is_err());
        assert!(af_bound(0.5, 1, B).is_err());
        assert!(entropy_continuity_bound(f64::NAN, 2, B).is_err());
        assert_eq!(
            af_bound(1.0 + 1e-13, 2, B).unwrap(),
            af_bound(1.0, 2, B).unwrap()
        );
    }

    #[test]
    fn bounds_scale_with_base() {
        let bits = af_bound(0.3, 3, LogBase::Bits).unwrap();
        let nats = af_bound(0.3, 3, LogBase::Nats).unwrap();
        assert_abs_diff_eq!(nats, bits * std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn support_span() {
        let p0 = DensityMatrix::from_diagonal(&[1.0, 0.0, 0.0], &[3]).unwrap();
        let p1 = DensityMatrix::from_diagonal(&[0.0, 1.0, 0.0], &[3]).unwrap();
        assert_eq!(support_span_rank(&p0, &p0).unwrap(), 1);
        assert_eq!(support_span_rank(&p0, &p1).unwrap(), 2);
        assert_eq!(span_dimension(&p0, &p1, SpanDimension::Ambient).unwrap(), 3);
    }

    #[test]
    fn continuity_bound_on_diagonal_family() {
        // ρ = diag(1,0), σ = diag(1-t, t): ε = 2t, d = 2.
        let rho = DensityMatrix::from_diagonal(&[1.0, 0.0], &[2]).unwrap();
        for k in 1..=50 {
            let t = 0.25 * k as f64 / 50.0;
            let sigma = DensityMatrix::from_diagonal(&[1.0 - t, t], &[2]).unwrap();
            let eps = trace_distance(&rho, &sigma).unwrap();
            assert_abs_diff_eq!(eps, 2.0 * t, epsilon = 1e-15);
            let lhs = von_neumann_entropy(&sigma, B).unwrap().value;
            let direct_lhs = -t * t.log2() - (1.0 - t) * (1.0 - t).log2();
            assert_abs_diff_eq!(lhs, direct_lhs, epsilon = 1e-12);
            let d = support_span_rank(&rho, &sigma).unwrap();
            assert_eq!(d, 2);
            let rhs = entropy_continuity_bound(eps, d, B).unwrap();
            let u = 2.0 * t;
            let direct_rhs = 2.0 * u
                - u * u.log2()
                - if u < 1.0 {
                    (1.0 - u) * (1.0 - u).log2()
                } else {
                    0.0
                };
            assert_abs_diff_eq!(rhs, direct_rhs, epsilon = 1e-12);
            assert!(lhs <= rhs);
        }
    }
}
