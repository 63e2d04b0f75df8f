//! Charging-power bounds and equalities for closed and open dynamics: the
//! corrected closed-system bound, the QFI-based open-system bound with its
//! kernel term, the eigenstate-case bound and power equality, and the
//! ε-regularization probe of the kernel singularity.

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::dynamics::{
    lindblad_rhs_matrix, power_closed, power_closed_centered, power_from_derivative, trace_product,
    ClosedModel, LindbladModel,
};
use crate::error::{Error, Result};
use crate::operator::{CMatrix, HermitianOperator, SpectralDecomposition, C64};
use crate::space::Subsystem;
use crate::thermo::{
    centered_free_energy_operator, covariance, variance, RegularizationPolicy, ThermoContext,
};

/// Eigenvalue cutoff below which the SLD oracle refuses a state.
pub const SLD_FULL_RANK_TOL: f64 = 1e-10;

/// One evaluated inequality: left-hand side, itemized right-hand side,
/// slack, and violation flag at a scale-aware tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs_terms: Vec<(String, f64)>,
    pub rhs: f64,
    /// `rhs - lhs`; negative beyond `tol_violation` flags a violation.
    pub slack: f64,
    pub violated: bool,
    pub tol_violation: f64,
    pub instance_meta: String,
    /// Diagnostic values that do not enter the rhs composition.
    pub extras: Vec<(String, f64)>,
}

impl BoundReport {
    fn assemble(
        name: &str,
        lhs: f64,
        rhs_terms: Vec<(String, f64)>,
        instance_meta: String,
        extras: Vec<(String, f64)>,
    ) -> Result<Self> {
        let rhs = compose_rhs(name, &rhs_terms)?;
        let tol_violation = 1e-9 * lhs.abs().max(rhs.abs()).max(1.0);
        let slack = rhs - lhs;
        Ok(Self {
            name: name.to_string(),
            lhs,
            rhs_terms,
            rhs,
            slack,
            violated: slack < -tol_violation,
            tol_violation,
            instance_meta,
            extras,
        })
    }

    /// Recombine the named terms exactly as the bound prescribes.
    pub fn recompute_rhs(&self) -> Result<f64> {
        compose_rhs(&self.name, &self.rhs_terms)
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

fn term(terms: &[(String, f64)], key: &str) -> Result<f64> {
    terms
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Inconsistency(format!("bound report missing term `{key}`")))
}

fn compose_rhs(name: &str, terms: &[(String, f64)]) -> Result<f64> {
    match name {
        "closed-power-squared" => {
            let s2f = term(terms, "sigma2_f")?;
            let s2v = term(terms, "sigma2_v")?;
            let re_cov_sq = term(terms, "re_cov_sq")?;
            Ok(2.0 * (s2f * s2v - re_cov_sq))
        }
        "open-power" => {
            let sf = term(terms, "sigma_f")?;
            let sqrt_qfi = term(terms, "sqrt_qfi")?;
            let kernel = term(terms, "kernel_term")?;
            Ok(sf * sqrt_qfi + kernel)
        }
        other => Err(Error::Inconsistency(format!("unknown bound `{other}`"))),
    }
}

/// Quantum Fisher information via the eigensum restricted to eigenvalue
/// pairs with `p_α + p_β` above the rank cutoff: finite on every input.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QfiResult {
    pub value: f64,
    /// Number of eigenvalues above the rank cutoff.
    pub rank_used: usize,
    /// Number of (α, β) pairs excluded by the cutoff.
    pub excluded_pairs: usize,
}

/// `I_Q = 2 Σ' |⟨β|ρ̇|α⟩|² / (p_α + p_β)` over pairs with
/// `p_α + p_β > rank_tol`.
pub fn qfi_eigsum(
    spec: &SpectralDecomposition,
    rho_dot: &CMatrix,
    rank_tol: f64,
) -> Result<QfiResult> {
    let dim = spec.dim();
    if rho_dot.nrows() != dim || rho_dot.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho_dot.nrows(),
        });
    }
    let u = spec.eigenvectors();
    let m = u.adjoint() * rho_dot * u;
    let p: Vec<f64> = spec.eigenvalues().iter().map(|&l| l.max(0.0)).collect();
    let mut value = 0.0;
    let mut excluded = 0usize;
    for alpha in 0..dim {
        for beta in 0..dim {
            let weight = p[alpha] + p[beta];
            if weight > rank_tol {
                value += 2.0 * m[(beta, alpha)].norm_sqr() / weight;
            } else {
                excluded += 1;
            }
        }
    }
    Ok(QfiResult {
        value,
        rank_used: p.iter().filter(|&&x| x > rank_tol).count(),
        excluded_pairs: excluded,
    })
}

/// Independent QFI oracle via the symmetric logarithmic derivative: solve
/// `ρ̇ = (Λρ + ρΛ)/2` elementwise in the ρ eigenbasis and return `tr(ρΛ²)`.
/// Restricted to full-rank states.
pub fn qfi_sld(rho: &DensityMatrix, rho_dot: &CMatrix) -> Result<f64> {
    let dim = rho.dim();
    if rho_dot.nrows() != dim || rho_dot.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho_dot.nrows(),
        });
    }
    let p = rho.eigenvalues();
    if let Some(&bad) = p.iter().find(|&&x| x <= SLD_FULL_RANK_TOL) {
        return Err(Error::param(
            "rho",
            &format!("full rank (eigenvalues > {SLD_FULL_RANK_TOL:e})"),
            bad,
        ));
    }
    let u = rho.spectral().eigenvectors();
    let m = u.adjoint() * rho_dot * u;
    let mut lambda = CMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            lambda[(a, b)] = m[(a, b)] * C64::new(2.0 / (p[a] + p[b]), 0.0);
        }
    }
    let lambda_sq = &lambda * &lambda;
    let mut out = 0.0;
    for a in 0..dim {
        out += p[a] * lambda_sq[(a, a)].re;
    }
    Ok(out)
}

/// Kernel contribution `|Σ'' δF_{αβ} ⟨β|ρ̇|α⟩|` over pairs with
/// `p_α + p_β <= rank_tol`; zero for full-rank states.
pub fn kernel_term(
    spec: &SpectralDecomposition,
    rho_dot: &CMatrix,
    df: &HermitianOperator,
    rank_tol: f64,
) -> Result<f64> {
    let dim = spec.dim();
    if rho_dot.nrows() != dim || df.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho_dot.nrows().max(df.dim()),
        });
    }
    let u = spec.eigenvectors();
    let d = u.adjoint() * df.matrix() * u;
    let m = u.adjoint() * rho_dot * u;
    let p: Vec<f64> = spec.eigenvalues().iter().map(|&l| l.max(0.0)).collect();
    let mut acc = C64::new(0.0, 0.0);
    for alpha in 0..dim {
        for beta in 0..dim {
            if p[alpha] + p[beta] <= rank_tol {
                acc += d[(alpha, beta)] * m[(beta, alpha)];
            }
        }
    }
    Ok(acc.norm())
}

/// Corrected closed-system bound
/// `|P|² <= 2(σ²_F σ²_V - Re[Cov(F,V)²])`, with the commutator equality and
/// the conjugate-pair structure asserted along the way.
pub fn closed_bound(
    rho_full: &DensityMatrix,
    ctx: &ThermoContext,
    reg: &RegularizationPolicy,
    model: &ClosedModel,
    instance_meta: impl Into<String>,
) -> Result<BoundReport> {
    let rho_w = model.space().partial_trace(rho_full, Subsystem::Battery)?;
    let f = crate::thermo::free_energy_operator(ctx, &rho_w, reg)?;
    let f_embedded = model.space().embed_battery(&f)?;

    let p_direct = power_closed(rho_full, ctx, reg, model)?;
    let p_centered = power_closed_centered(rho_full, ctx, reg, model)?;
    let p_scale = p_direct.abs().max(1.0);
    if (p_direct - p_centered).abs() > 1e-9 * p_scale {
        return Err(Error::Inconsistency(format!(
            "commutator equality failed: direct {p_direct}, centered {p_centered}"
        )));
    }

    let sigma2_f = variance(&rho_w, &f)?;
    let sigma2_v = variance(rho_full, model.interaction())?;
    let cov = covariance(rho_full, &f_embedded, model.interaction())?;
    let re_cov_sq = (cov * cov).re;

    // Conjugate-pair structure via explicit √ρ, and the three-term
    // decomposition of |P|².
    let sqrt_rho = rho_full.operator().sqrt_psd();
    let mean_f = crate::density::expectation(&rho_w, &f)?;
    let df_embedded = f_embedded.shift(-mean_f);
    let mean_v = rho_full.expectation(model.interaction())?;
    let dv = model.interaction().shift(-mean_v);
    let fv = df_embedded.matrix() * dv.matrix();
    let vf = dv.matrix() * df_embedded.matrix();
    let z_fv = trace_product(&(sqrt_rho.matrix() * &fv), sqrt_rho.matrix());
    let z_vf = trace_product(&(sqrt_rho.matrix() * &vf), sqrt_rho.matrix());
    let conj_residual = (z_fv - z_vf.conj()).norm();
    if conj_residual >= 1e-10 {
        return Err(Error::Inconsistency(format!(
            "conjugate-pair structure broken: residual {conj_residual:e}"
        )));
    }
    let three_term = z_fv.norm_sqr() + z_vf.norm_sqr() - 2.0 * (z_fv * z_fv).re;
    let lhs = p_direct * p_direct;
    if (three_term - lhs).abs() > 1e-9 * lhs.max(1.0) {
        return Err(Error::Inconsistency(format!(
            "three-term decomposition mismatch: |P|² = {lhs}, decomposition {three_term}"
        )));
    }

    BoundReport::assemble(
        "closed-power-squared",
        lhs,
        vec![
            ("sigma2_f".into(), sigma2_f),
            ("sigma2_v".into(), sigma2_v),
            ("re_cov_sq".into(), re_cov_sq),
        ],
        instance_meta.into(),
        vec![
            ("p_direct".into(), p_direct),
            ("p_centered".into(), p_centered),
            ("cov_re".into(), cov.re),
            ("cov_im".into(), cov.im),
            ("three_term_decomposition".into(), three_term),
            ("conjugate_residual".into(), conj_residual),
        ],
    )
}

/// Open-system bound `|P| <= σ_F √I_Q + kernel term`, with the
/// `Σ (p_α+p_β)|δF_{αβ}|² = 2σ²_F` identity asserted.
pub fn open_bound(
    model: &LindbladModel,
    rho: &DensityMatrix,
    ctx: &ThermoContext,
    reg: &RegularizationPolicy,
    rank_tol: f64,
    instance_meta: impl Into<String>,
) -> Result<BoundReport> {
    let rho_dot = lindblad_rhs_matrix(model, rho.matrix());
    let p = power_from_derivative(rho, &rho_dot, ctx, reg)?;

    let f = crate::thermo::free_energy_operator(ctx, rho, reg)?;
    let df = centered_free_energy_operator(ctx, rho, reg)?;
    let sigma2_f = variance(rho, &f)?;
    let sigma_f = sigma2_f.max(0.0).sqrt();

    // Identity: the pair-weighted sum of |δF_{αβ}|² equals 2σ²_F.
    let u = rho.spectral().eigenvectors();
    let d = u.adjoint() * df.matrix() * u;
    let pops = rho.eigenvalues();
    let mut weighted = 0.0;
    for a in 0..rho.dim() {
        for b in 0..rho.dim() {
            weighted += (pops[a] + pops[b]) * d[(a, b)].norm_sqr();
        }
    }
    let id_residual = (weighted - 2.0 * sigma2_f).abs();
    if id_residual > 1e-9 * (2.0 * sigma2_f).abs().max(1.0) {
        return Err(Error::Inconsistency(format!(
            "pair-sum identity failed: Σ(p+p)|δF|² = {weighted}, 2σ² = {}",
            2.0 * sigma2_f
        )));
    }

    let qfi = qfi_eigsum(rho.spectral(), &rho_dot, rank_tol)?;
    let kernel = kernel_term(rho.spectral(), &rho_dot, &df, rank_tol)?;

    BoundReport::assemble(
        "open-power",
        p.abs(),
        vec![
            ("sigma_f".into(), sigma_f),
            ("sqrt_qfi".into(), qfi.value.sqrt()),
            ("kernel_term".into(), kernel),
        ],
        instance_meta.into(),
        vec![
            ("p_signed".into(), p),
            ("qfi".into(), qfi.value),
            ("qfi_rank_used".into(), qfi.rank_used as f64),
            ("qfi_excluded_pairs".into(), qfi.excluded_pairs as f64),
            ("pair_sum_identity_residual".into(), id_residual),
        ],
    )
}

fn eigenstate_sums(
    model: &LindbladModel,
    df_spec: &SpectralDecomposition,
    n: usize,
    absolute: bool,
) -> Result<f64> {
    let dim = df_spec.dim();
    if model.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: model.dim(),
        });
    }
    if n >= dim {
        return Err(Error::param("n", &format!("< {dim}"), n));
    }
    let w = df_spec.eigenvalues();
    if w[n].abs() > 1e-9 {
        return Err(Error::param(
            "w_n",
            "= 0 within 1e-9 (battery in an eigenstate of F)",
            w[n],
        ));
    }
    let u = df_spec.eigenvectors();
    let mut out = 0.0;
    for ch in model.channels() {
        let l_eig = u.adjoint() * &ch.jump * u;
        for m in 0..dim {
            if m == n {
                continue;
            }
            let amount = if absolute { w[m].abs() } else { w[m] };
            out += ch.gamma * amount * l_eig[(m, n)].norm_sqr();
        }
    }
    Ok(out)
}

/// Eigenstate-case open bound `Σ_j γ_j Σ_{m≠n} |w_m| |⟨m|L_j|n⟩|²`, for a
/// battery pure in the `n`-th eigenstate of δF (which forces `w_n = 0`).
pub fn eigenstate_open_bound(
    model: &LindbladModel,
    df_spec: &SpectralDecomposition,
    n: usize,
) -> Result<f64> {
    eigenstate_sums(model, df_spec, n, true)
}

/// The signed eigenstate-case power `Σ_j γ_j Σ_{m≠n} w_m |⟨m|L_j|n⟩|²`
/// (generically nonzero: the pure-eigenstate battery still charges).
pub fn cusumano_power(
    model: &LindbladModel,
    df_spec: &SpectralDecomposition,
    n: usize,
) -> Result<f64> {
    eigenstate_sums(model, df_spec, n, false)
}

/// Least-squares fit record of `P(ε) ≈ a + b·log ε`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularityFit {
    /// ε-independent part `a`.
    pub intercept: f64,
    /// Coefficient `b` of log ε; nonzero iff population leaks into the
    /// kernel.
    pub log_slope: f64,
    /// RMS fit residual.
    pub residual: f64,
    /// Set when the residual exceeds 5% of `|b·log ε_min|`.
    pub poor_fit: bool,
    /// The sampled (ε, P(ε)) table.
    pub points: Vec<(f64, f64)>,
}

/// Probe the log-singularity of the free energy operator: evaluate the open
/// power on the `n`-th Hamiltonian eigenstate under the ε-mix policy (the
/// operator sees `ρ_ε = (1-ε)|n⟩⟨n| + ε·1/d`) over a descending geometric
/// grid, and fit `P(ε) = a + b·log ε`.
pub fn singularity_probe(
    model: &LindbladModel,
    ctx: &ThermoContext,
    n: usize,
    eps_grid: &[f64],
) -> Result<SingularityFit> {
    validate_eps_grid(eps_grid)?;
    let dim = model.dim();
    if n >= dim {
        return Err(Error::param("n", &format!("< {dim}"), n));
    }
    let h_spec = model.hamiltonian().eig();
    let pure = DensityMatrix::pure(&h_spec.eigenvector(n))?;

    let mut points = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let reg = RegularizationPolicy::EpsilonMix { epsilon: eps };
        let p = crate::dynamics::power_open(model, &pure, ctx, &reg)?;
        points.push((eps, p));
    }

    // Linear least squares in x = log ε.
    let n_pts = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(eps, p) in &points {
        let x = eps.ln();
        sx += x;
        sy += p;
        sxx += x * x;
        sxy += x * p;
    }
    let denom = n_pts * sxx - sx * sx;
    let log_slope = (n_pts * sxy - sx * sy) / denom;
    let intercept = (sy - log_slope * sx) / n_pts;
    let mut ss = 0.0;
    for &(eps, p) in &points {
        let r = p - intercept - log_slope * eps.ln();
        ss += r * r;
    }
    let residual = (ss / n_pts).sqrt();
    let eps_min = eps_grid.last().copied().expect("non-empty grid");
    let poor_fit = residual > 0.05 * (log_slope * eps_min.ln()).abs();

    Ok(SingularityFit {
        intercept,
        log_slope,
        residual,
        poor_fit,
        points,
    })
}

fn validate_eps_grid(eps_grid: &[f64]) -> Result<()> {
    if eps_grid.len() < 4 {
        return Err(Error::param("eps_grid", ">= 4 points", eps_grid.len()));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0 && e <= 0.1)) {
        return Err(Error::param("eps_grid", "within (0, 0.1]", "grid"));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("eps_grid", "strictly descending", "grid"));
    }
    let r0 = (eps_grid[1] / eps_grid[0]).ln();
    for w in eps_grid.windows(2) {
        let r = (w[1] / w[0]).ln();
        if (r - r0).abs() > 0.1 * r0.abs() {
            return Err(Error::param("eps_grid", "geometrically spaced", "grid"));
        }
    }
    Ok(())
}
