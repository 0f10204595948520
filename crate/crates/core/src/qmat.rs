//! Dense complex Hermitian operator algebra.
//!
//! Everything here is sized for desk-scale systems (total dimension up to
//! about 64), so all matrices are dense `nalgebra` matrices over
//! [`Complex64`]. Composite systems use row-major subsystem ordering: the
//! first factor is the slowest-varying index, both for Kronecker products
//! and for partial traces.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;

/// Largest admissible `|m[i,j] - conj(m[j,i])|` for a matrix to count as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues in `[-EIGEN_CLAMP, 0)` are treated as numerical zeros.
pub const EIGEN_CLAMP: f64 = 1e-10;
/// Largest admissible deviation of a state's trace from one.
pub const TRACE_TOL: f64 = 1e-9;
/// Largest total eigenvalue mass that validation may clamp away.
pub const CLAMPED_MASS_TOL: f64 = 1e-9;

const EIGEN_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QmatError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has a non-finite entry")]
    NonFinite,
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NonHermitian { deviation: f64 },
    #[error("subsystem dimensions {dims:?} multiply to {product}, matrix dimension is {dim}")]
    DimsMismatch {
        dims: Vec<usize>,
        product: usize,
        dim: usize,
    },
    #[error("subsystem dimensions must be nonempty and positive, got {0:?}")]
    InvalidDims(Vec<usize>),
    #[error("negative eigenvalue {value:e} (below -{EIGEN_CLAMP:e})")]
    NegativeEigenvalue { value: f64 },
    #[error("trace {trace} differs from 1 by more than {TRACE_TOL:e}")]
    TraceMismatch { trace: f64 },
    #[error("clamped eigenvalue mass {mass:e} exceeds {CLAMPED_MASS_TOL:e}")]
    ClampedMass { mass: f64 },
    #[error("invalid subsystem selection {keep:?} for {count} subsystems")]
    InvalidSubsystem { keep: Vec<usize>, count: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("Hermitian eigensolver did not converge (dimension {dim})")]
    EigenNoConvergence { dim: usize },
}

impl QmatError {
    /// Stable machine-readable identifier for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            QmatError::NotSquare { .. } => "not-square",
            QmatError::NonFinite => "non-finite",
            QmatError::NonHermitian { .. } => "non-hermitian",
            QmatError::DimsMismatch { .. } => "dims-mismatch",
            QmatError::InvalidDims(_) => "invalid-dims",
            QmatError::NegativeEigenvalue { .. } => "negative-eigenvalue",
            QmatError::TraceMismatch { .. } => "trace-mismatch",
            QmatError::ClampedMass { .. } => "clamped-mass",
            QmatError::InvalidSubsystem { .. } => "invalid-subsystem",
            QmatError::DimensionMismatch { .. } => "dimension-mismatch",
            QmatError::EigenNoConvergence { .. } => "eigen-no-convergence",
        }
    }
}

/// A Hermitian complex matrix. Admission symmetrizes the input, so the
/// stored entries are exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl HermitianOperator {
    pub fn new(mat: CMatrix) -> Result<Self, QmatError> {
        if !mat.is_square() {
            return Err(QmatError::NotSquare {
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QmatError::NonFinite);
        }
        let deviation = hermiticity_deviation(&mat);
        if deviation > HERMITICITY_TOL {
            return Err(QmatError::NonHermitian { deviation });
        }
        Ok(Self::symmetrized(mat))
    }

    /// Symmetrizes without checking; for results that are Hermitian by construction.
    pub(crate) fn symmetrized(mat: CMatrix) -> Self {
        let adj = mat.adjoint();
        Self {
            mat: (mat + adj).scale(0.5),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            mat: CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    /// `Tr(self * other)`, which is real for two Hermitian operators.
    pub fn trace_product(&self, other: &HermitianOperator) -> Result<f64, QmatError> {
        same_dim(self.dim(), other.dim())?;
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.mat[(i, j)] * other.mat[(j, i)]).re;
            }
        }
        Ok(acc)
    }

    pub fn kron(&self, other: &HermitianOperator) -> HermitianOperator {
        HermitianOperator {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    pub fn scale(&self, factor: f64) -> HermitianOperator {
        HermitianOperator {
            mat: self.mat.scale(factor),
        }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator, QmatError> {
        same_dim(self.dim(), other.dim())?;
        Ok(HermitianOperator {
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &HermitianOperator) -> Result<HermitianOperator, QmatError> {
        same_dim(self.dim(), other.dim())?;
        Ok(HermitianOperator {
            mat: &self.mat - &other.mat,
        })
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        max_abs_diff(&self.mat, &other.mat)
    }

    pub fn eigen(&self) -> Result<Spectrum, QmatError> {
        herm_eigen(self)
    }

    pub fn abs(&self) -> Result<HermitianOperator, QmatError> {
        operator_abs(self)
    }

    pub fn trace_norm(&self) -> Result<f64, QmatError> {
        trace_norm(self)
    }

    pub fn min_eigenvalue(&self) -> Result<f64, QmatError> {
        Ok(self.eigen()?.eigenvalues.last().copied().unwrap_or(0.0))
    }
}

/// Eigendecomposition of a Hermitian operator: eigenvalues in descending
/// order with the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        HermitianOperator::symmetrized(scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.map(|l| l)
    }
}

pub fn kron(a: &HermitianOperator, b: &HermitianOperator) -> HermitianOperator {
    a.kron(b)
}

pub fn herm_eigen(h: &HermitianOperator) -> Result<Spectrum, QmatError> {
    let dim = h.dim();
    if dim == 0 {
        return Ok(Spectrum {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = h
        .mat
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_SWEEPS)
        .ok_or(QmatError::EigenNoConvergence { dim })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

pub fn operator_abs(h: &HermitianOperator) -> Result<HermitianOperator, QmatError> {
    Ok(herm_eigen(h)?.map(f64::abs))
}

pub fn trace_norm(h: &HermitianOperator) -> Result<f64, QmatError> {
    Ok(herm_eigen(h)?.eigenvalues.iter().map(|l| l.abs()).sum())
}

/// A validated quantum state with declared subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    op: HermitianOperator,
}

impl DensityMatrix {
    /// Admits a matrix as a state: symmetrizes it, clamps eigenvalues in
    /// `[-EIGEN_CLAMP, 0)` to zero and renormalizes the trace. Rejects
    /// anything further from a state than those tolerances.
    pub fn validate(mat: CMatrix, dims: &[usize]) -> Result<Self, QmatError> {
        validate_density(mat, dims)
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn from_pure(psi: &[Complex64], dims: &[usize]) -> Result<Self, QmatError> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let n = psi.len();
        let mat = CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        validate_density(mat, dims)
    }

    pub fn from_diagonal(probs: &[f64], dims: &[usize]) -> Result<Self, QmatError> {
        validate_density(
            HermitianOperator::from_real_diagonal(probs).into_matrix(),
            dims,
        )
    }

    pub fn maximally_mixed(dims: &[usize]) -> Result<Self, QmatError> {
        check_dims(dims)?;
        let d: usize = dims.iter().product();
        Ok(Self {
            dims: dims.to_vec(),
            op: HermitianOperator::identity(d).scale(1.0 / d as f64),
        })
    }

    /// Wraps a matrix that is positive semidefinite by construction (such as
    /// a Gram matrix `X X†`), normalizing its trace. Skips the spectral check.
    pub(crate) fn from_psd_unchecked(mat: CMatrix, dims: &[usize]) -> Self {
        let op = HermitianOperator::symmetrized(mat);
        let trace = op.trace();
        DensityMatrix {
            dims: dims.to_vec(),
            op: op.scale(1.0 / trace),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn purity(&self) -> f64 {
        self.op.matrix().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Same matrix under a different subsystem grouping, e.g. `[d1, d2*d3]`.
    pub fn regroup(&self, dims: &[usize]) -> Result<Self, QmatError> {
        check_dims(dims)?;
        let product: usize = dims.iter().product();
        if product != self.dim() {
            return Err(QmatError::DimsMismatch {
                dims: dims.to_vec(),
                product,
                dim: self.dim(),
            });
        }
        Ok(Self {
            dims: dims.to_vec(),
            op: self.op.clone(),
        })
    }

    /// Product state `self ⊗ other`; the subsystem lists concatenate.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix {
            dims,
            op: self.op.kron(&other.op),
        }
    }

    /// `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &DensityMatrix, weight: f64) -> Result<DensityMatrix, QmatError> {
        same_dim(self.dim(), other.dim())?;
        if weight == 0.0 {
            return Ok(self.clone());
        }
        if weight == 1.0 && self.dims == other.dims {
            return Ok(other.clone());
        }
        let mat = self.op.matrix().scale(1.0 - weight) + other.op.matrix().scale(weight);
        validate_density(mat, &self.dims)
    }

    /// Reduced state on the subsystems listed in `keep` (0-based, any order;
    /// the result keeps the original subsystem order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix, QmatError> {
        partial_trace(self, keep)
    }
}

fn check_dims(dims: &[usize]) -> Result<(), QmatError> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(QmatError::InvalidDims(dims.to_vec()));
    }
    Ok(())
}

fn same_dim(left: usize, right: usize) -> Result<(), QmatError> {
    if left != right {
        return Err(QmatError::DimensionMismatch { left, right });
    }
    Ok(())
}

pub(crate) fn hermiticity_deviation(mat: &CMatrix) -> f64 {
    let n = mat.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((mat[(i, j)] - mat[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn validate_density(mat: CMatrix, dims: &[usize]) -> Result<DensityMatrix, QmatError> {
    check_dims(dims)?;
    let op = HermitianOperator::new(mat)?;
    let product: usize = dims.iter().product();
    if product != op.dim() {
        return Err(QmatError::DimsMismatch {
            dims: dims.to_vec(),
            product,
            dim: op.dim(),
        });
    }
    let spectrum = herm_eigen(&op)?;
    let min = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
    if min < -EIGEN_CLAMP {
        return Err(QmatError::NegativeEigenvalue { value: min });
    }
    let clamped_mass: f64 = spectrum
        .eigenvalues
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|l| -l)
        .sum();
    if clamped_mass > CLAMPED_MASS_TOL {
        return Err(QmatError::ClampedMass { mass: clamped_mass });
    }
    let trace = op.trace();
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(QmatError::TraceMismatch { trace });
    }
    let op = if clamped_mass > 0.0 {
        let fixed = spectrum.map(|l| l.max(0.0));
        let t = fixed.trace();
        fixed.scale(1.0 / t)
    } else if (trace - 1.0).abs() > 4.0 * f64::EPSILON {
        op.scale(1.0 / trace)
    } else {
        op
    };
    Ok(DensityMatrix {
        dims: dims.to_vec(),
        op,
    })
}

/// Row-major strides of a list of subsystem dimensions.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Full-space offsets for every joint index of the factors in `subset`.
fn subset_offsets(dims: &[usize], strides: &[usize], subset: &[usize]) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &f in subset {
        let mut next = Vec::with_capacity(offsets.len() * dims[f]);
        for &o in &offsets {
            for digit in 0..dims[f] {
                next.push(o + digit * strides[f]);
            }
        }
        offsets = next;
    }
    offsets
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix, QmatError> {
    let count = rho.dims.len();
    let mut kept = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() || kept.len() != keep.len() || kept.iter().any(|&k| k >= count) {
        return Err(QmatError::InvalidSubsystem {
            keep: keep.to_vec(),
            count,
        });
    }
    let traced: Vec<usize> = (0..count).filter(|i| !kept.contains(i)).collect();
    let st = strides(&rho.dims);
    let keep_off = subset_offsets(&rho.dims, &st, &kept);
    let trace_off = subset_offsets(&rho.dims, &st, &traced);
    let m = rho.matrix();
    let dk = keep_off.len();
    let mut out = CMatrix::zeros(dk, dk);
    for (a, &oa) in keep_off.iter().enumerate() {
        for (b, &ob) in keep_off.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in &trace_off {
                acc += m[(oa + t, ob + t)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(DensityMatrix {
        dims: kept.iter().map(|&k| rho.dims[k]).collect(),
        op: HermitianOperator::symmetrized(out),
    })
}

/// Embeds an operator on the factors `on` (sorted) as `a ⊗ 𝟙` on the full system.
pub fn embed(
    a: &HermitianOperator,
    dims: &[usize],
    on: &[usize],
) -> Result<HermitianOperator, QmatError> {
    let count = dims.len();
    if on.is_empty() || on.windows(2).any(|w| w[0] >= w[1]) || on.iter().any(|&k| k >= count) {
        return Err(QmatError::InvalidSubsystem {
            keep: on.to_vec(),
            count,
        });
    }
    let st = strides(dims);
    let keep_off = subset_offsets(dims, &st, on);
    same_dim(keep_off.len(), a.dim())?;
    let rest: Vec<usize> = (0..count).filter(|i| !on.contains(i)).collect();
    let rest_off = subset_offsets(dims, &st, &rest);
    let d: usize = dims.iter().product();
    let mut out = CMatrix::zeros(d, d);
    for (i, &oi) in keep_off.iter().enumerate() {
        for (j, &oj) in keep_off.iter().enumerate() {
            for &t in &rest_off {
                out[(oi + t, oj + t)] = a.matrix()[(i, j)];
            }
        }
    }
    Ok(HermitianOperator { mat: out })
}
