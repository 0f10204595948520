//! Named reference states.

use num_complex::Complex64;

use crate::qmat::{DensityMatrix, QmatError};

fn basis_superposition(dim: usize, support: &[usize]) -> Vec<Complex64> {
    let amp = 1.0 / (support.len() as f64).sqrt();
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    for &i in support {
        psi[i] = Complex64::new(amp, 0.0);
    }
    psi
}

/// `Φ⁺ = (|00⟩ + |11⟩)/√2` on `2 ⊗ 2`.
pub fn bell() -> DensityMatrix {
    DensityMatrix::from_pure(&basis_superposition(4, &[0, 3]), &[2, 2])
        .expect("Bell state is valid")
}

/// `(|000⟩ + |111⟩)/√2` on `2 ⊗ 2 ⊗ 2`.
pub fn ghz() -> DensityMatrix {
    DensityMatrix::from_pure(&basis_superposition(8, &[0, 7]), &[2, 2, 2])
        .expect("GHZ state is valid")
}

/// `½(|00⟩⟨00| + |11⟩⟨11|)`.
pub fn classical_correlated() -> DensityMatrix {
    DensityMatrix::from_diagonal(&[0.5, 0.0, 0.0, 0.5], &[2, 2]).expect("diagonal state is valid")
}

/// Resolves `bell`, `ghz`, `classical-corr`, `maxmix:<d>` and
/// `maxmix:<d1>x<d2>x...`. Returns `None` for anything else.
pub fn named_state(name: &str) -> Option<Result<DensityMatrix, QmatError>> {
    match name {
        "bell" => Some(Ok(bell())),
        "ghz" => Some(Ok(ghz())),
        "classical-corr" => Some(Ok(classical_correlated())),
        _ => {
            let spec = name.strip_prefix("maxmix:")?;
            let dims: Option<Vec<usize>> = spec.split('x').map(|s| s.trim().parse().ok()).collect();
            Some(DensityMatrix::maximally_mixed(&dims?))
        }
    }
}
