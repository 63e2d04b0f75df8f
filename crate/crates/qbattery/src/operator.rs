//! Dense complex Hermitian operator algebra: construction, spectral
//! decomposition, matrix functions, tensor products.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative Hermiticity tolerance enforced at construction.
pub const TOL_HERM: f64 = 1e-12;
/// Default eigenvalue cutoff for rank and support decisions.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-10;
/// Largest total dimension accepted by tensor-product construction.
pub const MAX_TOTAL_DIM: usize = 4096;
/// Minimum modulus for the phase-fixing pivot of an eigenvector.
const PHASE_PIVOT_TOL: f64 = 1e-8;

/// A square complex matrix with enforced Hermiticity.
///
/// The stored matrix is exactly Hermitian: construction validates the input
/// against [`TOL_HERM`] (relative to the largest entry) and then symmetrizes
/// to `(M + M†)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl HermitianOperator {
    /// Validate and wrap a complex square matrix.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows().max(1),
                got: mat.ncols(),
            });
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let scale = mat.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        let asymmetry = max_asymmetry(&mat);
        if asymmetry > TOL_HERM * scale.max(1.0) {
            return Err(Error::NotHermitian {
                asymmetry,
                tol: TOL_HERM * scale.max(1.0),
            });
        }
        Ok(Self {
            mat: symmetrize(&mat),
        })
    }

    /// Build from a real diagonal.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut mat = CMatrix::zeros(dim, dim);
        for (i, &d) in diag.iter().enumerate() {
            mat[(i, i)] = C64::new(d, 0.0);
        }
        Self { mat }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CMatrix::zeros(dim, dim),
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
        self.mat.trace().re
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> f64 {
        self.eig()
            .eigenvalues()
            .iter()
            .map(|l| l.abs())
            .fold(0.0, f64::max)
    }

    /// Shift by a multiple of the identity: `self + c·1`.
    pub fn shift(&self, c: f64) -> Self {
        let mut mat = self.mat.clone();
        for i in 0..self.dim() {
            mat[(i, i)] += C64::new(c, 0.0);
        }
        Self { mat }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            mat: self.mat.clone() * C64::new(c, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    /// Hermitian eigendecomposition with descending eigenvalues and a
    /// deterministic eigenvector phase convention.
    pub fn eig(&self) -> SpectralDecomposition {
        eig_hermitian(self)
    }

    /// `U f(Λ) U†` for a total scalar function.
    pub fn matrix_function(&self, f: impl Fn(f64) -> f64) -> Self {
        self.eig().apply(f)
    }

    /// `U f(Λ) U†` where eigenvalues at or below `support_tol` contribute 0
    /// (projector-restricted function; the support-truncate policy).
    pub fn matrix_function_on_support(&self, f: impl Fn(f64) -> f64, support_tol: f64) -> Self {
        self.eig()
            .apply(|l| if l <= support_tol { 0.0 } else { f(l) })
    }

    /// `U f(Λ) U†`, rejecting eigenvalues at or below `support_tol`
    /// (the reject policy for singular scalar functions).
    pub fn matrix_function_strict(&self, f: impl Fn(f64) -> f64, support_tol: f64) -> Result<Self> {
        let spec = self.eig();
        if let Some(&bad) = spec.eigenvalues().iter().find(|&&l| l <= support_tol) {
            return Err(Error::SingularLogarithm {
                eigenvalue: bad,
                support_tol,
            });
        }
        Ok(spec.apply(f))
    }

    pub fn exp(&self) -> Self {
        self.matrix_function(f64::exp)
    }

    /// Logarithm restricted to the support: kernel eigenvalues map to 0.
    pub fn log_on_support(&self, support_tol: f64) -> Self {
        self.matrix_function_on_support(f64::ln, support_tol)
    }

    /// Logarithm that rejects rank-deficient input.
    pub fn log_strict(&self, support_tol: f64) -> Result<Self> {
        self.matrix_function_strict(f64::ln, support_tol)
    }

    /// Principal square root of a PSD operator (small negative eigenvalues
    /// are clamped to zero before the root).
    pub fn sqrt_psd(&self) -> Self {
        self.matrix_function(|l| l.max(0.0).sqrt())
    }

    /// Kronecker product `self ⊗ other` (left factor slowest index).
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let total = self.dim() * other.dim();
        if total > MAX_TOTAL_DIM {
            return Err(Error::param(
                "total_dim",
                &format!("<= {MAX_TOTAL_DIM}"),
                total,
            ));
        }
        Ok(Self {
            mat: self.mat.kronecker(&other.mat),
        })
    }
}

/// Spectral decomposition of a Hermitian operator: descending real
/// eigenvalues and a unitary matrix of eigenvector columns.
///
/// The phase of every eigenvector is fixed by making its first component of
/// modulus > 1e-8 real and positive. Within a degenerate cluster the ordering
/// produced by this convention is deterministic but not unique; all
/// downstream quantities are basis-independent.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// Assemble from known parts: descending eigenvalues and a unitary of
    /// eigenvector columns (orthonormal within 1e-10).
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: CMatrix) -> Result<Self> {
        let dim = eigenvalues.len();
        if eigenvectors.nrows() != dim || eigenvectors.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: eigenvectors.nrows(),
            });
        }
        if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("eigenvalues", "descending", "spectrum"));
        }
        let gram = eigenvectors.adjoint() * &eigenvectors;
        let defect = (gram - CMatrix::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max);
        if defect > 1e-10 {
            return Err(Error::param(
                "eigenvectors",
                "orthonormal within 1e-10",
                format!("{defect:e}"),
            ));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary matrix whose columns are the eigenvectors.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues mapped through `f`, reassembled as `U f(Λ) U†`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let dim = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let fl = C64::new(f(l), 0.0);
            for i in 0..dim {
                scaled[(i, j)] *= fl;
            }
        }
        let mat = &scaled * self.eigenvectors.adjoint();
        HermitianOperator {
            mat: symmetrize(&mat),
        }
    }

    /// `U Λ U†`.
    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|l| l).into_matrix()
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > tol).count()
    }

    /// Column `k` as an owned vector.
    pub fn eigenvector(&self, k: usize) -> nalgebra::DVector<C64> {
        self.eigenvectors.column(k).into_owned()
    }
}

/// Hermitian eigendecomposition with deterministic ordering and phases.
pub fn eig_hermitian(a: &HermitianOperator) -> SpectralDecomposition {
    let dim = a.dim();
    let se = nalgebra::SymmetricEigen::new(a.mat.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[j]
            .partial_cmp(&se.eigenvalues[i])
            .expect("finite eigenvalues")
    });
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut eigenvectors = CMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(se.eigenvalues[src]);
        let col = se.eigenvectors.column(src);
        // Phase fix: first component with modulus above threshold made real
        // positive.
        let pivot = col
            .iter()
            .find(|z| z.norm() > PHASE_PIVOT_TOL)
            .copied()
            .unwrap_or(C64::new(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        for i in 0..dim {
            eigenvectors[(i, dst)] = col[i] * phase;
        }
    }
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// `(M + M†)/2`.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn max_asymmetry(m: &CMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `AB - BA`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `AB + BA`.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}
