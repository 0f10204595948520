use proptest::prelude::*;

use qmi_core::ensembles::{haar_pure, induced_mixed, trial_rng};
use qmi_core::entropy::{
    af_bound, conditional_entropy, conditional_mutual_information, trace_distance,
    von_neumann_entropy, LogBase,
};
use qmi_core::qmat::kron;
use qmi_core::thales::decompose;
use qmi_core::DensityMatrix;

fn state(dims: &[usize], ancilla: usize, seed: u64) -> DensityMatrix {
    induced_mixed(dims, ancilla, &mut trial_rng(seed, 0)).unwrap()
}

fn s(rho: &DensityMatrix) -> f64 {
    von_neumann_entropy(rho, LogBase::Bits).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_traces_are_states(d1 in 1usize..4, d2 in 1usize..4, k in 1usize..5, seed: u64) {
        let rho = state(&[d1, d2], k, seed);
        for keep in [&[0usize][..], &[1]] {
            let m = rho.partial_trace(keep).unwrap();
            prop_assert!((m.op().trace() - 1.0).abs() < 1e-12);
            prop_assert!(m.op().min_eigenvalue().unwrap() > -1e-12);
        }
    }

    #[test]
    fn kron_is_associative(seed: u64) {
        let a = state(&[2], 2, seed).op().clone();
        let b = state(&[3], 2, seed ^ 1).op().clone();
        let c = state(&[2], 1, seed ^ 2).op().clone();
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!(left.max_abs_diff(&right) < 1e-15);
    }

    #[test]
    fn abs_dominates_both_signs(seed: u64, d in 2usize..6) {
        let h = state(&[d], d, seed).op().sub(state(&[d], 1, seed ^ 7).op()).unwrap();
        let a = h.abs().unwrap();
        prop_assert!(a.add(&h).unwrap().min_eigenvalue().unwrap() > -1e-12);
        prop_assert!(a.sub(&h).unwrap().min_eigenvalue().unwrap() > -1e-12);
        prop_assert!((a.trace() - h.trace_norm().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_concave(seed: u64, w in 0.0f64..1.0) {
        let a = state(&[3], 2, seed);
        let b = state(&[3], 3, seed ^ 3);
        let mix = a.mix(&b, w).unwrap();
        prop_assert!(s(&mix) >= (1.0 - w) * s(&a) + w * s(&b) - 1e-9);
    }

    #[test]
    fn strong_subadditivity(seed: u64, k in 1usize..9) {
        let rho = state(&[2, 2, 2], k, seed);
        prop_assert!(conditional_mutual_information(&rho, LogBase::Bits).is_ok());
    }

    #[test]
    fn conditional_entropy_range(seed: u64, d1 in 2usize..4, d2 in 1usize..4) {
        let rho = haar_pure(&[d1, d2], &mut trial_rng(seed, 1)).unwrap();
        let c = conditional_entropy(&rho, LogBase::Bits).unwrap().value;
        let log_d1 = (d1 as f64).log2();
        prop_assert!(c >= -log_d1 - 1e-9 && c <= log_d1 + 1e-9);
    }

    #[test]
    fn bound_holds_on_nearby_pairs(seed: u64, t in 0.0f64..1.0, d2 in 1usize..5) {
        let rho = state(&[2, d2], 2 * d2, seed);
        let tau = state(&[2, d2], 1, seed ^ 5);
        let sigma = rho.mix(&tau, t).unwrap();
        let eps = trace_distance(&rho, &sigma).unwrap();
        prop_assume!(eps <= 1.0);
        let lhs = (conditional_entropy(&rho, LogBase::Bits).unwrap().value
            - conditional_entropy(&sigma, LogBase::Bits).unwrap().value)
            .abs();
        prop_assert!(lhs <= af_bound(eps, 2, LogBase::Bits).unwrap() + 1e-9);
    }

    #[test]
    fn decomposition_mixes_to_gamma(seed: u64, t in 0.01f64..1.0) {
        let rho = state(&[2, 2], 4, seed);
        let sigma = rho.mix(&state(&[2, 2], 1, seed ^ 9), t).unwrap();
        prop_assume!(trace_distance(&rho, &sigma).unwrap() <= 1.0);
        let dec = decompose(&rho, &sigma).unwrap();
        prop_assert!(dec.residuals().unwrap().within(1e-10));
    }
}
