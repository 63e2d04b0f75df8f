//! Free energy operator and scalar work/entropy quantifiers, plus the
//! variances and covariances used by the bound analyses.
//!
//! Units: ħ = k_B = 1; β carries 1/energy; entropies are in nats.
//!
//! Scalar quantities (energy, entropy, extractable work) are always computed
//! from eigenvalues with the 0·log 0 = 0 convention and stay finite for
//! rank-deficient states. The free energy *operator* requires an explicit
//! [`RegularizationPolicy`] because its logarithm is singular on the kernel.

use serde::{Deserialize, Serialize};

use crate::density::{expectation, DensityMatrix};
use crate::error::{Error, Result};
use crate::operator::{HermitianOperator, C64, DEFAULT_SUPPORT_TOL};

/// How to treat the operator logarithm on (near-)kernel eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegularizationPolicy {
    /// Restrict the logarithm to the support: kernel eigenvalues contribute 0.
    SupportTruncate {
        #[serde(default = "default_support_tol")]
        support_tol: f64,
    },
    /// Replace ρ by the full-rank mixture `(1-ε)ρ + ε·1/d` before the log.
    EpsilonMix { epsilon: f64 },
    /// Refuse rank-deficient states outright.
    Reject {
        #[serde(default = "default_support_tol")]
        support_tol: f64,
    },
}

fn default_support_tol() -> f64 {
    DEFAULT_SUPPORT_TOL
}

impl Default for RegularizationPolicy {
    fn default() -> Self {
        RegularizationPolicy::SupportTruncate {
            support_tol: DEFAULT_SUPPORT_TOL,
        }
    }
}

impl RegularizationPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            RegularizationPolicy::EpsilonMix { epsilon } => {
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(Error::param("epsilon", "in (0, 1)", epsilon));
                }
            }
            RegularizationPolicy::SupportTruncate { support_tol }
            | RegularizationPolicy::Reject { support_tol } => {
                if !support_tol.is_finite() || *support_tol < 0.0 {
                    return Err(Error::param("support_tol", ">= 0 and finite", support_tol));
                }
            }
        }
        Ok(())
    }
}

/// Reference inverse temperature and battery Hamiltonian.
#[derive(Debug, Clone)]
pub struct ThermoContext {
    beta: f64,
    h_w: HermitianOperator,
}

impl ThermoContext {
    pub fn new(beta: f64, h_w: HermitianOperator) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", "> 0 and finite", beta));
        }
        Ok(Self { beta, h_w })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.h_w
    }

    pub fn dim(&self) -> usize {
        self.h_w.dim()
    }
}

/// Gibbs state `e^{-βH}/Z`, sharing the eigenbasis of H.
///
/// Rejects `β · spectral range > 700`, where populations would underflow to
/// exactly zero.
pub fn thermal_state(ctx: &ThermoContext) -> Result<DensityMatrix> {
    let spec = ctx.h_w.eig();
    let lmin = *spec.eigenvalues().last().expect("dim >= 1");
    let lmax = spec.eigenvalues()[0];
    if ctx.beta * (lmax - lmin) > 700.0 {
        return Err(Error::param(
            "beta * spectral_range",
            "<= 700 (population underflow)",
            ctx.beta * (lmax - lmin),
        ));
    }
    let z: f64 = spec
        .eigenvalues()
        .iter()
        .map(|&l| (-ctx.beta * (l - lmin)).exp())
        .sum();
    // Populations from the scalar partition function, eigenvectors from H:
    // this analytic decomposition stays exact far below the ~1e-16 floor a
    // dense eigensolver could resolve on the assembled matrix. H's
    // eigenvalues descend, so the populations come out ascending and the
    // column order is reversed.
    let dim = spec.dim();
    let populations: Vec<f64> = spec
        .eigenvalues()
        .iter()
        .rev()
        .map(|&l| (-ctx.beta * (l - lmin)).exp() / z)
        .collect();
    let mut columns = crate::operator::CMatrix::zeros(dim, dim);
    for (dst, src) in (0..dim).rev().enumerate() {
        columns.set_column(dst, &spec.eigenvectors().column(src));
    }
    let tau_spec = crate::operator::SpectralDecomposition::from_parts(populations, columns)?;
    DensityMatrix::from_spectral(tau_spec)
}

/// Log of the partition function, `log tr e^{-βH}`.
pub fn log_partition_function(ctx: &ThermoContext) -> f64 {
    let spec = ctx.h_w.eig();
    let lmin = *spec.eigenvalues().last().expect("dim >= 1");
    let z_shifted: f64 = spec
        .eigenvalues()
        .iter()
        .map(|&l| (-ctx.beta * (l - lmin)).exp())
        .sum();
    z_shifted.ln() - ctx.beta * lmin
}

/// Equilibrium free energy `F(τ_β) = -β⁻¹ log Z`.
pub fn equilibrium_free_energy(ctx: &ThermoContext) -> f64 {
    -log_partition_function(ctx) / ctx.beta
}

/// The free energy operator `H_W + β⁻¹ log ρ_W` under the given policy.
pub fn free_energy_operator(
    ctx: &ThermoContext,
    rho_w: &DensityMatrix,
    reg: &RegularizationPolicy,
) -> Result<HermitianOperator> {
    if rho_w.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.dim(),
            got: rho_w.dim(),
        });
    }
    reg.validate()?;
    let log_rho = match reg {
        RegularizationPolicy::SupportTruncate { support_tol } => {
            rho_w.operator().log_on_support(*support_tol)
        }
        RegularizationPolicy::EpsilonMix { epsilon } => {
            let mixed = rho_w.mix_with_identity(*epsilon)?;
            mixed.operator().log_strict(0.0)?
        }
        RegularizationPolicy::Reject { support_tol } => {
            rho_w.operator().log_strict(*support_tol)?
        }
    };
    ctx.h_w.add(&log_rho.scale(1.0 / ctx.beta))
}

/// Centered free energy operator `δF = F - ⟨F⟩_W·1`.
pub fn centered_free_energy_operator(
    ctx: &ThermoContext,
    rho_w: &DensityMatrix,
    reg: &RegularizationPolicy,
) -> Result<HermitianOperator> {
    let f = free_energy_operator(ctx, rho_w, reg)?;
    let mean = expectation(rho_w, &f)?;
    Ok(f.shift(-mean))
}

/// Von Neumann entropy `-tr(ρ log ρ)` in nats, from eigenvalues with the
/// 0·log 0 = 0 convention.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let s: f64 = rho
        .eigenvalues()
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum();
    s.max(0.0)
}

/// Average energy `tr(ρ H)`.
pub fn average_energy(ctx: &ThermoContext, rho: &DensityMatrix) -> Result<f64> {
    expectation(rho, &ctx.h_w)
}

/// Nonequilibrium free energy `F(ρ) = U(ρ) - β⁻¹ S(ρ)`.
pub fn nonequilibrium_free_energy(ctx: &ThermoContext, rho: &DensityMatrix) -> Result<f64> {
    Ok(average_energy(ctx, rho)? - von_neumann_entropy(rho) / ctx.beta)
}

/// Quantum relative entropy, with a distinguished infinite value on support
/// violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelativeEntropy {
    Finite(f64),
    Infinite,
}

impl RelativeEntropy {
    pub fn is_infinite(&self) -> bool {
        matches!(self, RelativeEntropy::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            RelativeEntropy::Finite(v) => Some(*v),
            RelativeEntropy::Infinite => None,
        }
    }
}

/// `S(ρ‖σ) = tr(ρ log ρ) - tr(ρ log σ)` in nats.
///
/// Returns [`RelativeEntropy::Infinite`] when ρ has weight above
/// `support_tol` in the kernel of σ.
pub fn relative_entropy(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    support_tol: f64,
) -> Result<RelativeEntropy> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: rho.dim(),
        });
    }
    let sig = sigma.spectral();
    let mut tr_rho_log_sigma = 0.0;
    for (k, &q) in sig.eigenvalues().iter().enumerate() {
        let vec = sig.eigenvector(k);
        let weight = (vec.adjoint() * rho.matrix() * &vec)[(0, 0)].re;
        if q <= support_tol {
            if weight > support_tol {
                return Ok(RelativeEntropy::Infinite);
            }
        } else {
            tr_rho_log_sigma += weight * q.ln();
        }
    }
    let tr_rho_log_rho: f64 = rho
        .eigenvalues()
        .iter()
        .map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 })
        .sum();
    let mut v = tr_rho_log_rho - tr_rho_log_sigma;
    if v < 0.0 && v > -1e-12 {
        v = 0.0;
    }
    Ok(RelativeEntropy::Finite(v))
}

/// Maximum extractable work in thermal contact with the β-bath.
///
/// Evaluates both `β⁻¹ S(ρ_W‖τ_β)` and `F(ρ_W) - F(τ_β)` and requires the
/// two routes to agree to 1e-9 relative; the relative-entropy value is
/// returned.
pub fn max_extractable_work(ctx: &ThermoContext, rho_w: &DensityMatrix) -> Result<f64> {
    let tau = thermal_state(ctx)?;
    // The overflow guard keeps every thermal population strictly positive
    // (>= e^-700), so the support check runs at tolerance 0: populations far
    // below any rank cutoff still carry a finite log.
    let via_rel = match relative_entropy(rho_w, &tau, 0.0)? {
        RelativeEntropy::Finite(s) => s / ctx.beta,
        RelativeEntropy::Infinite => {
            return Err(Error::Inconsistency(
                "relative entropy to the full-rank thermal state came out infinite".into(),
            ))
        }
    };
    let via_free = nonequilibrium_free_energy(ctx, rho_w)? - equilibrium_free_energy(ctx);
    let scale = via_rel.abs().max(via_free.abs()).max(1.0);
    if (via_rel - via_free).abs() > 1e-9 * scale {
        return Err(Error::Inconsistency(format!(
            "W_max routes disagree: relative-entropy side {via_rel}, free-energy side {via_free}"
        )));
    }
    Ok(via_rel)
}

/// Ergotropy: work extractable by cyclic unitaries, via the passive-state
/// eigenvalue rearrangement (descending populations against ascending
/// energies).
pub fn ergotropy(h: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    if h.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: rho.dim(),
        });
    }
    let populations = rho.eigenvalues(); // descending
    let spec_h = h.eig();
    let mut energies: Vec<f64> = spec_h.eigenvalues().to_vec();
    energies.reverse(); // ascending
    let passive: f64 = populations
        .iter()
        .zip(energies.iter())
        .map(|(r, e)| r * e)
        .sum();
    let mut w = expectation(rho, h)? - passive;
    if w < 0.0 && w > -1e-12 {
        w = 0.0;
    }
    Ok(w)
}

/// `⟨A²⟩ - ⟨A⟩²`.
pub fn variance(rho: &DensityMatrix, a: &HermitianOperator) -> Result<f64> {
    let a_sq = HermitianOperator::new(a.matrix() * a.matrix())?;
    let mean = expectation(rho, a)?;
    Ok(expectation(rho, &a_sq)? - mean * mean)
}

/// `Cov(A, B) = tr(ρAB) - tr(ρA)tr(ρB)`; conjugate-symmetric under swap.
pub fn covariance(
    rho: &DensityMatrix,
    a: &HermitianOperator,
    b: &HermitianOperator,
) -> Result<C64> {
    if rho.dim() != a.dim() || rho.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: a.dim().max(b.dim()),
        });
    }
    let rho_a = rho.matrix() * a.matrix();
    let mut tr_rho_ab = C64::new(0.0, 0.0);
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            tr_rho_ab += rho_a[(i, j)] * b.matrix()[(j, i)];
        }
    }
    let mean_a = expectation(rho, a)?;
    let mean_b = expectation(rho, b)?;
    Ok(tr_rho_ab - C64::new(mean_a * mean_b, 0.0))
}
