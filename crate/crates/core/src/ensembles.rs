//! Seeded random states and controlled perturbations.
//!
//! Every random object is a pure function of a master seed and a trial
//! index: [`trial_rng`] keys a ChaCha20 stream by `(seed, index)`, so a
//! parallel run draws exactly the same ensemble as a serial one.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entropy::{trace_distance, EntropyError};
use crate::qmat::{CMatrix, DensityMatrix, QmatError};

/// Target tolerance for [`perturbation_pair`].
pub const PERTURBATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Entropy(#[from] EntropyError),
    #[error("invalid ensemble: {0}")]
    Invalid(String),
}

impl From<QmatError> for EnsembleError {
    fn from(e: QmatError) -> Self {
        EnsembleError::Entropy(e.into())
    }
}

/// Independent RNG stream for trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed unit vector in `C^n`.
pub fn haar_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n).map(|_| complex_normal(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Haar-random unitary: QR of a complex Ginibre matrix, with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let z = DMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn haar_pure<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<DensityMatrix, QmatError> {
    let d: usize = dims.iter().product();
    DensityMatrix::from_pure(&haar_vector(d, rng), dims)
}

/// Pure state from a fixed seed.
pub fn haar_pure_seeded(dims: &[usize], seed: u64) -> Result<DensityMatrix, QmatError> {
    haar_pure(dims, &mut trial_rng(seed, 0))
}

/// Reduced state of a Haar pure state on `dims ⊗ ancilla`, tracing out the ancilla.
pub fn induced_mixed<R: Rng + ?Sized>(
    dims: &[usize],
    ancilla: usize,
    rng: &mut R,
) -> Result<DensityMatrix, QmatError> {
    if ancilla == 0 {
        return Err(QmatError::InvalidDims(vec![0]));
    }
    let d: usize = dims.iter().product();
    let psi = haar_vector(d * ancilla, rng);
    // psi index = x * ancilla + a, so the reshaped matrix is d x ancilla.
    let x = DMatrix::from_fn(d, ancilla, |i, a| psi[i * ancilla + a]);
    DensityMatrix::validate(&x * x.adjoint(), dims)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPair {
    pub rho: DensityMatrix,
    pub sigma: DensityMatrix,
    pub achieved_epsilon: f64,
    /// Mixing weight toward the random state.
    pub weight: f64,
    /// False when even the full mixture stays short of the target.
    pub achieved_target: bool,
}

/// `σ = (1-t)ρ + tτ` for a Haar-random pure `τ`, with `t` chosen so that
/// `‖ρ - σ‖₁` hits `target_epsilon` to within [`PERTURBATION_TOL`]. If the target is beyond reach the full mixture
/// `t = 1` is returned with `achieved_target = false`.
pub fn perturbation_pair<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    target_epsilon: f64,
    rng: &mut R,
) -> Result<PerturbationPair, EnsembleError> {
    if !(0.0..=1.0).contains(&target_epsilon) {
        return Err(EnsembleError::Invalid(format!(
            "target epsilon {target_epsilon} outside [0, 1]"
        )));
    }
    let tau = haar_pure(rho.dims(), rng)?;
    if target_epsilon == 0.0 {
        return Ok(PerturbationPair {
            rho: rho.clone(),
            sigma: rho.clone(),
            achieved_epsilon: 0.0,
            weight: 0.0,
            achieved_target: true,
        });
    }
    let full_eps = trace_distance(rho, &tau)?;
    let full = tau;
    if full_eps < target_epsilon - PERTURBATION_TOL {
        return Ok(PerturbationPair {
            rho: rho.clone(),
            sigma: full,
            achieved_epsilon: full_eps,
            weight: 1.0,
            achieved_target: false,
        });
    }
    // ‖ρ - ((1-t)ρ + tτ)‖₁ = t‖ρ - τ‖₁, so the weight is a ratio.
    let weight = (target_epsilon / full_eps).min(1.0);
    let sigma = if weight == 1.0 {
        full
    } else {
        rho.mix(&full, weight)?
    };
    let achieved_epsilon = trace_distance(rho, &sigma)?;
    Ok(PerturbationPair {
        rho: rho.clone(),
        sigma,
        achieved_epsilon,
        weight,
        achieved_target: (achieved_epsilon - target_epsilon).abs() <= PERTURBATION_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Both states Haar-random pure.
    HaarPure,
    /// Both states induced by tracing out an ancilla of `ancilla_dim`.
    InducedMixed,
    /// Induced states of rank at most `ancilla_dim`.
    RankLimited,
    /// An induced state and a perturbation of it at a prescribed trace distance.
    PerturbationPair,
}

impl std::str::FromStr for EnsembleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "haar_pure" => Ok(EnsembleKind::HaarPure),
            "induced_mixed" => Ok(EnsembleKind::InducedMixed),
            "rank_limited" => Ok(EnsembleKind::RankLimited),
            "perturbation_pair" => Ok(EnsembleKind::PerturbationPair),
            other => Err(format!("unknown ensemble kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub dims: Vec<usize>,
    /// Ancilla dimension for induced states; defaults to the system dimension
    /// (Hilbert-Schmidt measure), or 1 for `rank_limited`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancilla_dim: Option<usize>,
    /// Fixed target for `perturbation_pair`; drawn uniformly from `[0, 1]`
    /// per trial when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_epsilon: Option<f64>,
    pub seed: u64,
}

/// A sampled pair plus the stream it came from, for follow-up draws.
#[derive(Debug)]
pub struct SampledPair {
    pub rho: DensityMatrix,
    pub sigma: DensityMatrix,
    pub rng: ChaCha20Rng,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, dims: &[usize], seed: u64) -> Self {
        EnsembleSpec {
            kind,
            dims: dims.to_vec(),
            ancilla_dim: None,
            target_epsilon: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(EnsembleError::Invalid(format!("bad dims {:?}", self.dims)));
        }
        if self.ancilla_dim == Some(0) {
            return Err(EnsembleError::Invalid(
                "ancilla_dim must be positive".into(),
            ));
        }
        if let Some(t) = self.target_epsilon {
            if self.kind != EnsembleKind::PerturbationPair {
                return Err(EnsembleError::Invalid(
                    "target_epsilon only applies to perturbation_pair".into(),
                ));
            }
            if !(0.0..=1.0).contains(&t) {
                return Err(EnsembleError::Invalid(format!(
                    "target_epsilon {t} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn ancilla(&self) -> usize {
        match self.kind {
            EnsembleKind::RankLimited => self.ancilla_dim.unwrap_or(1),
            _ => self.ancilla_dim.unwrap_or_else(|| self.total_dim()),
        }
    }

    /// One state from the single-state marginal of this ensemble.
    pub fn sample_state<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Result<DensityMatrix, EnsembleError> {
        Ok(match self.kind {
            EnsembleKind::HaarPure => haar_pure(&self.dims, rng)?,
            _ => induced_mixed(&self.dims, self.ancilla(), rng)?,
        })
    }

    /// Trial `index`'s pair, drawn from the stream `(seed, index)`.
    pub fn sample_pair(&self, index: u64) -> Result<SampledPair, EnsembleError> {
        self.validate()?;
        let mut rng = trial_rng(self.seed, index);
        let (rho, sigma) = match self.kind {
            EnsembleKind::PerturbationPair => {
                let rho = induced_mixed(&self.dims, self.ancilla(), &mut rng)?;
                let target = match self.target_epsilon {
                    Some(t) => t,
                    None => rng.random::<f64>(),
                };
                let pair = perturbation_pair(&rho, target, &mut rng)?;
                (pair.rho, pair.sigma)
            }
            _ => {
                let rho = self.sample_state(&mut rng)?;
                let sigma = self.sample_state(&mut rng)?;
                (rho, sigma)
            }
        };
        Ok(SampledPair { rho, sigma, rng })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{von_neumann_entropy, LogBase};
    use crate::qmat::max_abs_diff;

    #[test]
    fn haar_pure_is_pure_and_deterministic() {
        for d in [1usize, 2, 5, 16] {
            let rho = haar_pure_seeded(&[d], 42).unwrap();
            assert!((rho.op().trace() - 1.0).abs() < 1e-10);
            assert!((rho.purity() - 1.0).abs() < 1e-10);
            assert!(
                von_neumann_entropy(&rho, LogBase::Bits)
                    .unwrap()
                    .value
                    .abs()
                    < 1e-8
            );
        }
        let a = haar_pure_seeded(&[2], 42).unwrap();
        let b = haar_pure_seeded(&[2], 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, haar_pure_seeded(&[2], 43).unwrap());
    }

    #[test]
    fn streams_are_decorrelated() {
        let a = haar_pure(&[3], &mut trial_rng(1, 0)).unwrap();
        let b = haar_pure(&[3], &mut trial_rng(1, 1)).unwrap();
        assert!(a.op().max_abs_diff(b.op()) > 1e-3);
    }

    #[test]
    fn induced_with_trivial_ancilla_is_pure() {
        let rho = induced_mixed(&[3], 1, &mut trial_rng(5, 0)).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn induced_mean_purity() {
        // Mean purity of the induced measure is (d + k)/(dk + 1) = 4/5 at d = k = 2.
        let n = 100_000u64;
        let mean: f64 = (0..n)
            .map(|i| {
                induced_mixed(&[2], 2, &mut trial_rng(2024, i))
                    .unwrap()
                    .purity()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.8).abs() < 0.01, "mean purity {mean}");
    }

    #[test]
    fn large_ancilla_concentrates() {
        let mm = DensityMatrix::maximally_mixed(&[2]).unwrap();
        let n = 2000u64;
        let mean: f64 = (0..n)
            .map(|i| {
                let rho = induced_mixed(&[2], 64, &mut trial_rng(9, i)).unwrap();
                trace_distance(&rho, &mm).unwrap()
            })
            .sum::<f64>()
            / n as f64;
        assert!(mean < 0.2, "mean distance {mean}");
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = trial_rng(3, 0);
        for n in [1usize, 2, 4, 7] {
            let u = haar_unitary(n, &mut rng);
            assert!(max_abs_diff(&(u.adjoint() * &u), &CMatrix::identity(n, n)) < 1e-12);
        }
    }

    #[test]
    fn perturbation_pair_contract() {
        let mut rng = trial_rng(77, 0);
        let rho = induced_mixed(&[2, 2], 4, &mut rng).unwrap();
        let zero = perturbation_pair(&rho, 0.0, &mut rng).unwrap();
        assert_eq!(zero.sigma, rho);
        assert_eq!(zero.achieved_epsilon, 0.0);
        for k in 1..=10 {
            let target = k as f64 / 10.0;
            let p = perturbation_pair(&rho, target, &mut trial_rng(77, k)).unwrap();
            let d = trace_distance(&p.rho, &p.sigma).unwrap();
            assert!((d - p.achieved_epsilon).abs() < 1e-9);
            if p.achieved_target {
                assert!((p.achieved_epsilon - target).abs() <= PERTURBATION_TOL);
            } else {
                assert_eq!(p.weight, 1.0);
                assert!(p.achieved_epsilon < target);
            }
        }
        assert!(perturbation_pair(&rho, 1.2, &mut rng).is_err());
    }

    #[test]
    fn unreachable_target_is_flagged() {
        // On a one-dimensional space every state coincides, so nothing is reachable.
        let rho = DensityMatrix::maximally_mixed(&[1]).unwrap();
        let p = perturbation_pair(&rho, 0.5, &mut trial_rng(1, 0)).unwrap();
        assert!(!p.achieved_target);
        assert_eq!(p.weight, 1.0);
        assert!(p.achieved_epsilon < 1e-12);
        // ‖|ψ⟩⟨ψ| - I/2‖₁ = 1 for every pure ψ, so ε = 1 sits exactly at t = 1.
        let mm = DensityMatrix::maximally_mixed(&[2]).unwrap();
        let q = perturbation_pair(&mm, 1.0, &mut trial_rng(1, 1)).unwrap();
        assert!(q.achieved_target);
        assert!((q.achieved_epsilon - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spec_validation() {
        let mut spec = EnsembleSpec::new(EnsembleKind::InducedMixed, &[2, 2], 1);
        assert!(spec.validate().is_ok());
        spec.target_epsilon = Some(0.5);
        assert!(spec.validate().is_err());
        spec.kind = EnsembleKind::PerturbationPair;
        assert!(spec.validate().is_ok());
        spec.target_epsilon = Some(1.5);
        assert!(spec.validate().is_err());
        assert_eq!(
            "rank-limited".parse::<EnsembleKind>().unwrap(),
            EnsembleKind::RankLimited
        );
    }

    #[test]
    fn sampled_pairs_are_reproducible_and_valid() {
        for kind in [
            EnsembleKind::HaarPure,
            EnsembleKind::InducedMixed,
            EnsembleKind::RankLimited,
            EnsembleKind::PerturbationPair,
        ] {
            let spec = EnsembleSpec::new(kind, &[2, 3], 99);
            let a = spec.sample_pair(4).unwrap();
            let b = spec.sample_pair(4).unwrap();
            assert_eq!(a.rho, b.rho);
            assert_eq!(a.sigma, b.sigma);
            for s in [&a.rho, &a.sigma] {
                assert!(DensityMatrix::validate(s.matrix().clone(), s.dims()).is_ok());
            }
        }
        let rank1 = EnsembleSpec::new(EnsembleKind::RankLimited, &[2, 2], 3)
            .sample_pair(0)
            .unwrap();
        assert!((rank1.rho.purity() - 1.0).abs() < 1e-12);
    }
}
