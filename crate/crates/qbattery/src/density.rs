//! Density matrices: positive semidefinite, unit-trace Hermitian operators
//! with a cached spectral decomposition.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::operator::{CMatrix, HermitianOperator, SpectralDecomposition, C64};

/// Trace tolerance for density-matrix construction.
pub const TOL_TRACE: f64 = 1e-12;
/// Eigenvalues in `[-TOL_NEG, 0)` are clamped to 0 on read; anything more
/// negative is rejected at construction.
pub const TOL_NEG: f64 = 1e-12;

/// A positive semidefinite unit-trace Hermitian matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: HermitianOperator,
    spectral: SpectralDecomposition,
    clamped: Vec<f64>,
}

impl DensityMatrix {
    /// Validate trace and positivity at the strict tolerances.
    pub fn new(op: HermitianOperator) -> Result<Self> {
        Self::with_negativity_window(op, TOL_NEG)
    }

    /// Like [`DensityMatrix::new`] but accepting eigenvalue negativity down
    /// to `-neg_tol` (clamped to 0 and the trace renormalized). Used to
    /// absorb integrator drift; never widens the window silently.
    pub fn with_negativity_window(op: HermitianOperator, neg_tol: f64) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > neg_tol.max(TOL_TRACE) {
            return Err(Error::InvalidState(format!(
                "trace {trace} differs from 1 by more than {:e}",
                neg_tol.max(TOL_TRACE)
            )));
        }
        let spectral = op.eig();
        if let Some(&bad) = spectral.eigenvalues().iter().find(|&&l| l < -neg_tol) {
            return Err(Error::InvalidState(format!(
                "eigenvalue {bad:e} below -{neg_tol:e}"
            )));
        }
        let clamped: Vec<f64> = spectral
            .eigenvalues()
            .iter()
            .map(|&l| if l < 0.0 { 0.0 } else { l })
            .collect();
        Ok(Self {
            op,
            spectral,
            clamped,
        })
    }

    /// Build from a known spectral decomposition, keeping it as the cache.
    ///
    /// Used where the decomposition is available analytically (thermal
    /// states) and more precise than re-diagonalizing the assembled matrix,
    /// whose dense eigensolver cannot resolve populations below ~1e-16.
    pub fn from_spectral(spectral: crate::operator::SpectralDecomposition) -> Result<Self> {
        let op = spectral.apply(|l| l);
        let trace = op.trace();
        if (trace - 1.0).abs() > TOL_TRACE {
            return Err(Error::InvalidState(format!(
                "trace {trace} differs from 1 beyond {TOL_TRACE:e}"
            )));
        }
        if let Some(&bad) = spectral.eigenvalues().iter().find(|&&l| l < -TOL_NEG) {
            return Err(Error::InvalidState(format!(
                "eigenvalue {bad:e} below -{TOL_NEG:e}"
            )));
        }
        let clamped: Vec<f64> = spectral
            .eigenvalues()
            .iter()
            .map(|&l| if l < 0.0 { 0.0 } else { l })
            .collect();
        Ok(Self {
            op,
            spectral,
            clamped,
        })
    }

    /// Pure state |ψ⟩⟨ψ| from a (not necessarily normalized) ket.
    pub fn pure(ket: &DVector<C64>) -> Result<Self> {
        let norm = ket.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero ket".into()));
        }
        let psi = ket / C64::new(norm, 0.0);
        let mat = &psi * psi.adjoint();
        Self::new(HermitianOperator::new(mat)?)
    }

    /// Pure basis state |k⟩⟨k|.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::param("k", &format!("< {dim}"), k));
        }
        let mut ket = DVector::zeros(dim);
        ket[k] = C64::new(1.0, 0.0);
        Self::pure(&ket)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let diag = vec![1.0 / dim as f64; dim];
        Self::new(HermitianOperator::from_diagonal(&diag)).expect("valid by construction")
    }

    /// Diagonal state from populations (must sum to 1).
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::from_diagonal(populations))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    /// Cached spectral decomposition (descending eigenvalues).
    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    /// Eigenvalues with the negativity window clamped to 0, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.clamped
    }

    pub fn trace(&self) -> f64 {
        self.op.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.matrix() * self.matrix()).trace().re
    }

    /// Number of eigenvalues above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.clamped.iter().filter(|&&l| l > tol).count()
    }

    /// Convex mixture with the maximally mixed state:
    /// `(1-ε)ρ + ε·1/d`.
    pub fn mix_with_identity(&self, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::param("epsilon", "in [0, 1)", epsilon));
        }
        let d = self.dim() as f64;
        let mut mat = self.matrix() * C64::new(1.0 - epsilon, 0.0);
        for i in 0..self.dim() {
            mat[(i, i)] += C64::new(epsilon / d, 0.0);
        }
        Self::new(HermitianOperator::new(mat)?)
    }

    /// `tr(ρ A)`, asserting the imaginary residue is numerical noise.
    pub fn expectation(&self, a: &HermitianOperator) -> Result<f64> {
        expectation(self, a)
    }
}

/// `tr(ρ A)` as a real number; the imaginary residue must be below 1e-10
/// (relative to scale) and is discarded.
pub fn expectation(rho: &DensityMatrix, a: &HermitianOperator) -> Result<f64> {
    if rho.dim() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: a.dim(),
        });
    }
    // tr(ρA) = Σ_ij ρ_ij A_ji without forming the product matrix.
    let mut acc = C64::new(0.0, 0.0);
    let r = rho.matrix();
    let m = a.matrix();
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            acc += r[(i, j)] * m[(j, i)];
        }
    }
    let scale = acc.re.abs().max(1.0);
    if acc.im.abs() > 1e-10 * scale {
        return Err(Error::Inconsistency(format!(
            "expectation has imaginary residue {:e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{random_density, random_hermitian};
    use approx::assert_relative_eq;

    #[test]
    fn rejects_wrong_trace() {
        let op = HermitianOperator::from_diagonal(&[0.7, 0.7]);
        assert!(DensityMatrix::new(op).is_err());
    }

    #[test]
    fn rejects_negative_eigenvalue() {
        let op = HermitianOperator::from_diagonal(&[1.2, -0.2]);
        assert!(DensityMatrix::new(op).is_err());
    }

    #[test]
    fn clamps_tiny_negativity_on_read() {
        let op = HermitianOperator::from_diagonal(&[1.0 + 5e-13, -5e-13]);
        let rho = DensityMatrix::new(op).unwrap();
        assert!(rho.eigenvalues().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn negativity_window_widens_for_integrator() {
        let op = HermitianOperator::from_diagonal(&[1.0 + 1e-9, -1e-9]);
        assert!(DensityMatrix::new(op.clone()).is_err());
        let rho = DensityMatrix::with_negativity_window(op, 1e-8).unwrap();
        assert!(rho.eigenvalues().iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn expectation_of_maximally_mixed_is_trace_over_d() {
        let a = random_hermitian(5, 1.0, 3);
        let rho = DensityMatrix::maximally_mixed(5);
        assert_relative_eq!(
            rho.expectation(&a).unwrap(),
            a.trace() / 5.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn expectation_in_eigenstate_is_eigenvalue() {
        let a = random_hermitian(4, 1.0, 4);
        let spec = a.eig();
        let rho = DensityMatrix::pure(&spec.eigenvector(2)).unwrap();
        assert_relative_eq!(
            rho.expectation(&a).unwrap(),
            spec.eigenvalues()[2],
            epsilon = 1e-10
        );
    }

    #[test]
    fn expectation_matches_elementwise_sum() {
        // Oracle: explicit double sum Σ ρ_ji A_ij.
        let rho = random_density(4, 4, 5).unwrap();
        let a = random_hermitian(4, 1.0, 6);
        let mut by_hand = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                by_hand += rho.matrix()[(j, i)] * a.matrix()[(i, j)];
            }
        }
        assert_relative_eq!(rho.expectation(&a).unwrap(), by_hand.re, epsilon = 1e-12);
    }

    #[test]
    fn purity_of_pure_state() {
        let rho = DensityMatrix::basis_state(3, 1).unwrap();
        assert_relative_eq!(rho.purity(), 1.0, epsilon = 1e-14);
    }
}
