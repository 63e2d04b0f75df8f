//! Named physical models, reproducible random-instance generators, and
//! scenario-config ingestion.
//!
//! All generators are pure functions of (parameters, seed). The RNG is
//! pinned to ChaCha8 (`rand_chacha::ChaCha8Rng`, seeded via `seed_from_u64`)
//! with `rand_distr::StandardNormal` for Gaussian draws, so identical seeds
//! reproduce identical instances across runs and platforms.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::dynamics::{ClosedModel, LindbladModel};
use crate::error::{Error, Result};
use crate::operator::{CMatrix, HermitianOperator, C64, DEFAULT_SUPPORT_TOL};
use crate::space::CompositeSpace;
use crate::thermo::{thermal_state, RegularizationPolicy, ThermoContext};

/// Identifier of the pinned RNG algorithm, recorded in reports.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64 + rand_distr StandardNormal";

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian: independent N(0, 1/2) real and imaginary
/// parts, unit expected squared modulus.
fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) / 2.0_f64.sqrt()
}

fn ginibre(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Normalized random ket with complex-Gaussian amplitudes.
pub fn random_ket(dim: usize, rng: &mut ChaCha8Rng) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Hilbert–Schmidt-induced random state of the given rank:
/// `G G† / tr(G G†)` with a dim×rank Ginibre factor.
pub fn random_density(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    let mut rng = seeded_rng(seed);
    random_density_from(dim, rank, &mut rng)
}

pub fn random_density_from(dim: usize, rank: usize, rng: &mut ChaCha8Rng) -> Result<DensityMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::param("rank", "in 1..=dim", rank));
    }
    let g = ginibre(dim, rank, rng);
    let gram = &g * g.adjoint();
    let tr = gram.trace().re;
    DensityMatrix::new(HermitianOperator::new(gram / C64::new(tr, 0.0))?)
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the R-diagonal
/// phase correction.
pub fn haar_unitary(dim: usize, seed: u64) -> CMatrix {
    let mut rng = seeded_rng(seed);
    haar_unitary_from(dim, &mut rng)
}

pub fn haar_unitary_from(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = ginibre(dim, dim, rng);
    let qr = g.qr();
    let r = qr.r();
    let q = qr.q();
    let mut phases = DVector::from_element(dim, C64::new(1.0, 0.0));
    for i in 0..dim {
        let rii = r[(i, i)];
        if rii.norm() > 0.0 {
            phases[i] = rii / rii.norm();
        }
    }
    let mut u = q;
    for j in 0..dim {
        for i in 0..dim {
            u[(i, j)] *= phases[j];
        }
    }
    u
}

/// GUE-style random Hermitian: `(A + A†)/2` with scale-normal Ginibre A.
pub fn random_hermitian(dim: usize, scale: f64, seed: u64) -> HermitianOperator {
    let mut rng = seeded_rng(seed);
    random_hermitian_from(dim, scale, &mut rng)
}

pub fn random_hermitian_from(dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> HermitianOperator {
    let a = ginibre(dim, dim, rng) * C64::new(scale, 0.0);
    let sym = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    HermitianOperator::new(sym).expect("symmetrized matrix is Hermitian")
}

/// Random Lindblad model: unit-scale GUE Hamiltonian, Ginibre jump
/// operators, rates uniform in (0, gamma_max].
pub fn random_lindblad(
    dim: usize,
    n_channels: usize,
    gamma_max: f64,
    seed: u64,
) -> Result<LindbladModel> {
    if !(gamma_max > 0.0 && gamma_max.is_finite()) {
        return Err(Error::param("gamma_max", "> 0 and finite", gamma_max));
    }
    let mut rng = seeded_rng(seed);
    let h = random_hermitian_from(dim, 1.0, &mut rng);
    let mut channels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let jump = ginibre(dim, dim, &mut rng);
        let u: f64 = rng.random();
        channels.push((gamma_max * (1.0 - u), jump));
    }
    LindbladModel::new(h, channels)
}

/// Random closed instance with the layout the closed-system analysis
/// assumes: `H0 = Σ_k 1 ⊗ H_k ⊗ 1` (local terms, battery part included) and
/// a random interaction `V` on the total space. Returns the model together
/// with the battery-local Hamiltonian.
pub fn random_closed_model(
    dims: [usize; 4],
    v_scale: f64,
    seed: u64,
) -> Result<(ClosedModel, HermitianOperator)> {
    let mut rng = seeded_rng(seed);
    random_closed_model_from(dims, v_scale, &mut rng)
}

pub fn random_closed_model_from(
    dims: [usize; 4],
    v_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(ClosedModel, HermitianOperator)> {
    let space = CompositeSpace::new(dims)?;
    let mut h0 = HermitianOperator::zeros(space.total_dim());
    let mut h_w = HermitianOperator::zeros(space.battery_dim());
    for (k, &d) in dims.iter().enumerate() {
        if d == 1 {
            continue;
        }
        let local = random_hermitian_from(d, 1.0, rng);
        let sub = crate::space::Subsystem::from_index(k)?;
        h0 = h0.add(&space.embed(&local, sub)?)?;
        if sub == crate::space::Subsystem::Battery {
            h_w = local;
        }
    }
    let v = random_hermitian_from(space.total_dim(), v_scale, rng);
    Ok((ClosedModel::new(space, h0, v)?, h_w))
}

// ---------------------------------------------------------------------------
// Qubit operator helpers. Basis convention throughout: index 0 = |e⟩
// (excited), index 1 = |g⟩ (ground), so H = (ω/2)σ_z has |e⟩ on top.
// ---------------------------------------------------------------------------

pub fn sigma_z() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(1, 1)] = C64::new(-1.0, 0.0);
    m
}

/// Lowering operator |g⟩⟨e|.
pub fn sigma_minus() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(1, 0)] = C64::new(1.0, 0.0);
    m
}

/// Raising operator |e⟩⟨g|.
pub fn sigma_plus() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = C64::new(1.0, 0.0);
    m
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Closed,
    Open,
}

/// Complex matrix as row-major interleaved re/im pairs, for configs and
/// replayable reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixData {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl MatrixData {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut data = Vec::with_capacity(2 * dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(m[(i, j)].re);
                data.push(m[(i, j)].im);
            }
        }
        Self { dim, data }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != 2 * self.dim * self.dim {
            return Err(Error::Config(format!(
                "matrix data length {} does not match dim {} (expected {})",
                self.data.len(),
                self.dim,
                2 * self.dim * self.dim
            )));
        }
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let k = 2 * (i * self.dim + j);
                m[(i, j)] = C64::new(self.data[k], self.data[k + 1]);
            }
        }
        Ok(m)
    }
}

/// Model block: either a named model with parameters or explicit matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Level splitting ω (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Exchange coupling g (two-qubit-exchange only, default 0.1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// Relaxation rate γ (open named models, default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Explicit open model: battery Hamiltonian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixData>,
    /// Explicit open model: (rate, jump) channels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<ChannelConfig>>,
    /// Explicit closed model: subsystem dimensions (S, B, A, W).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<[usize; 4]>,
    /// Explicit closed model: local Hamiltonians on the total space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<MatrixData>,
    /// Explicit closed model: interaction on the total space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<MatrixData>,
    /// Explicit closed model: battery-local Hamiltonian.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_w: Option<MatrixData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub gamma: f64,
    pub jump: MatrixData,
}

/// Initial-state block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    /// One of: excited | ground | thermal | maximally-mixed | random |
    /// charged-source | matrix.
    pub kind: String,
    /// Rank for `random` (defaults to full rank).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// Explicit density matrix for `matrix`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixData>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
}

impl GridConfig {
    pub fn times(&self) -> Vec<f64> {
        let n = self.n_samples;
        (0..n)
            .map(|k| self.t_start + (self.t_end - self.t_start) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

fn default_rank_tol() -> f64 {
    DEFAULT_SUPPORT_TOL
}

/// A fully specified run: model, initial state, grid, thermodynamic and
/// numerical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    /// Integrator step for open runs; derived from the stability guard when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub model: ModelConfig,
    pub initial_state: InitialStateConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub regularization: RegularizationPolicy,
}

/// A scenario materialized into operators and states.
#[derive(Debug, Clone)]
pub enum BuiltScenario {
    Closed {
        model: ClosedModel,
        h_w: HermitianOperator,
        rho0: DensityMatrix,
    },
    Open {
        model: LindbladModel,
        rho0: DensityMatrix,
        step: f64,
    },
}

pub const VALID_MODEL_NAMES: [&str; 4] = [
    "two-qubit-exchange",
    "qubit-amplitude-damping",
    "qubit-dephasing",
    "qubit-pumping",
];

const VALID_STATE_KINDS: [&str; 7] = [
    "excited",
    "ground",
    "thermal",
    "maximally-mixed",
    "random",
    "charged-source",
    "matrix",
];

/// Parameter overrides for [`named_model`]; unset fields take the documented
/// defaults ω = 1, g = 0.1, γ = 1, β = 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct NamedModelParams {
    pub omega: Option<f64>,
    pub g: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
}

/// A ready-to-run scenario for one of the named toy models.
pub fn named_model(name: &str, params: &NamedModelParams) -> Result<Scenario> {
    if !VALID_MODEL_NAMES.contains(&name) {
        return Err(Error::UnknownModel {
            name: name.to_string(),
            valid: VALID_MODEL_NAMES.join(", "),
        });
    }
    let omega = params.omega.unwrap_or(1.0);
    let g = params.g.unwrap_or(0.1);
    let gamma = params.gamma.unwrap_or(1.0);
    let beta = params.beta.unwrap_or(1.0);
    let seed = params.seed.unwrap_or(0);

    let (kind, initial_kind, grid) = match name {
        "two-qubit-exchange" => (
            ScenarioKind::Closed,
            "charged-source",
            GridConfig {
                t_start: 0.0,
                t_end: std::f64::consts::PI / g,
                n_samples: 101,
            },
        ),
        "qubit-pumping" => (
            ScenarioKind::Open,
            "ground",
            GridConfig {
                t_start: 0.0,
                t_end: 5.0 / gamma,
                n_samples: 101,
            },
        ),
        // amplitude damping and dephasing start from the excited state
        _ => (
            ScenarioKind::Open,
            "excited",
            GridConfig {
                t_start: 0.0,
                t_end: 5.0 / gamma,
                n_samples: 101,
            },
        ),
    };

    let model = ModelConfig {
        name: Some(name.to_string()),
        omega: Some(omega),
        g: if name == "two-qubit-exchange" {
            Some(g)
        } else {
            None
        },
        gamma: if kind == ScenarioKind::Open {
            Some(gamma)
        } else {
            None
        },
        ..ModelConfig::default()
    };

    let scenario = Scenario {
        kind,
        beta,
        seed,
        rank_tol: DEFAULT_SUPPORT_TOL,
        step: None,
        model,
        initial_state: InitialStateConfig {
            kind: initial_kind.to_string(),
            rank: None,
            matrix: None,
        },
        grid,
        regularization: RegularizationPolicy::default(),
    };
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "field `beta` must satisfy > 0, got {}",
                self.beta
            )));
        }
        if !(self.rank_tol >= 0.0 && self.rank_tol.is_finite()) {
            return Err(Error::Config(format!(
                "field `rank_tol` must satisfy >= 0, got {}",
                self.rank_tol
            )));
        }
        if let Some(step) = self.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::Config(format!(
                    "field `step` must satisfy > 0, got {step}"
                )));
            }
        }
        if self.grid.n_samples < 2 {
            return Err(Error::Config(format!(
                "field `grid.n_samples` must satisfy >= 2, got {}",
                self.grid.n_samples
            )));
        }
        if self.grid.t_start < 0.0 || self.grid.t_start.is_nan() {
            return Err(Error::Config(format!(
                "field `grid.t_start` must satisfy >= 0, got {}",
                self.grid.t_start
            )));
        }
        if self.grid.t_end <= self.grid.t_start || self.grid.t_end.is_nan() {
            return Err(Error::Config(format!(
                "field `grid.t_end` must satisfy > t_start, got {}",
                self.grid.t_end
            )));
        }
        self.regularization
            .validate()
            .map_err(|e| Error::Config(format!("field `regularization`: {e}")))?;
        if !VALID_STATE_KINDS.contains(&self.initial_state.kind.as_str()) {
            return Err(Error::Config(format!(
                "field `initial_state.kind` must be one of {}, got `{}`",
                VALID_STATE_KINDS.join(" | "),
                self.initial_state.kind
            )));
        }
        if self.initial_state.rank.is_some() && self.initial_state.kind != "random" {
            return Err(Error::Config(
                "field `initial_state.rank` is only valid for kind = \"random\"".into(),
            ));
        }
        if self.initial_state.matrix.is_some() != (self.initial_state.kind == "matrix") {
            return Err(Error::Config(
                "field `initial_state.matrix` is required exactly when kind = \"matrix\"".into(),
            ));
        }
        self.validate_model()?;
        Ok(())
    }

    fn validate_model(&self) -> Result<()> {
        let m = &self.model;
        let explicit_open = m.hamiltonian.is_some() || m.channels.is_some();
        let explicit_closed =
            m.dims.is_some() || m.h0.is_some() || m.v.is_some() || m.h_w.is_some();
        match (&m.name, explicit_open, explicit_closed) {
            (Some(name), false, false) => {
                if !VALID_MODEL_NAMES.contains(&name.as_str()) {
                    return Err(Error::Config(format!(
                        "field `model.name`: unknown model `{name}`; valid names: {}",
                        VALID_MODEL_NAMES.join(", ")
                    )));
                }
                let named_kind = if name == "two-qubit-exchange" {
                    ScenarioKind::Closed
                } else {
                    ScenarioKind::Open
                };
                if named_kind != self.kind {
                    return Err(Error::Config(format!(
                        "field `kind` does not match model `{name}`"
                    )));
                }
                if let Some(g) = m.gamma {
                    if !(g >= 0.0 && g.is_finite()) {
                        return Err(Error::Config(format!(
                            "field `model.gamma` must satisfy >= 0, got {g}"
                        )));
                    }
                }
                Ok(())
            }
            (None, true, false) => {
                if self.kind != ScenarioKind::Open {
                    return Err(Error::Config(
                        "explicit open model requires kind = \"open\"".into(),
                    ));
                }
                if m.hamiltonian.is_none() {
                    return Err(Error::Config(
                        "field `model.hamiltonian` is required for an explicit open model".into(),
                    ));
                }
                Ok(())
            }
            (None, false, true) => {
                if self.kind != ScenarioKind::Closed {
                    return Err(Error::Config(
                        "explicit closed model requires kind = \"closed\"".into(),
                    ));
                }
                if m.dims.is_none() || m.h0.is_none() || m.v.is_none() || m.h_w.is_none() {
                    return Err(Error::Config(
                        "explicit closed model requires `model.dims`, `model.h0`, `model.v`, `model.h_w`"
                            .into(),
                    ));
                }
                Ok(())
            }
            (None, false, false) => Err(Error::Config(
                "field `model` must name a model or give explicit matrices".into(),
            )),
            _ => Err(Error::Config(
                "field `model` must be either named or explicit, not both".into(),
            )),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    /// Battery-space thermodynamic context (β and H_W).
    pub fn thermo_context(&self) -> Result<ThermoContext> {
        let h_w = match self.build()? {
            BuiltScenario::Closed { h_w, .. } => h_w,
            BuiltScenario::Open { model, .. } => model.hamiltonian().clone(),
        };
        ThermoContext::new(self.beta, h_w)
    }

    /// Materialize the model and initial state.
    pub fn build(&self) -> Result<BuiltScenario> {
        self.validate()?;
        let omega = self.model.omega.unwrap_or(1.0);
        let gamma = self.model.gamma.unwrap_or(1.0);
        match self.kind {
            ScenarioKind::Open => {
                let model = match self.model.name.as_deref() {
                    Some("qubit-amplitude-damping") => LindbladModel::new(
                        HermitianOperator::from_diagonal(&[omega / 2.0, -omega / 2.0]),
                        vec![(gamma, sigma_minus())],
                    )?,
                    Some("qubit-dephasing") => LindbladModel::new(
                        HermitianOperator::from_diagonal(&[omega / 2.0, -omega / 2.0]),
                        vec![(gamma, sigma_z())],
                    )?,
                    Some("qubit-pumping") => LindbladModel::new(
                        HermitianOperator::from_diagonal(&[omega / 2.0, -omega / 2.0]),
                        vec![(gamma, sigma_plus())],
                    )?,
                    Some(other) => {
                        return Err(Error::UnknownModel {
                            name: other.to_string(),
                            valid: VALID_MODEL_NAMES.join(", "),
                        })
                    }
                    None => {
                        let h = HermitianOperator::new(
                            self.model
                                .hamiltonian
                                .as_ref()
                                .expect("validated")
                                .to_matrix()?,
                        )?;
                        let channels = self
                            .model
                            .channels
                            .as_ref()
                            .map(|cs| {
                                cs.iter()
                                    .map(|c| Ok((c.gamma, c.jump.to_matrix()?)))
                                    .collect::<Result<Vec<_>>>()
                            })
                            .transpose()?
                            .unwrap_or_default();
                        LindbladModel::new(h, channels)?
                    }
                };
                let rho0 = self.initial_state_open(&model)?;
                let step = self.effective_step(&model)?;
                Ok(BuiltScenario::Open { model, rho0, step })
            }
            ScenarioKind::Closed => {
                let (model, h_w) = match self.model.name.as_deref() {
                    Some("two-qubit-exchange") => {
                        let g = self.model.g.unwrap_or(0.1);
                        let space = CompositeSpace::new([2, 1, 1, 2])?;
                        let z = HermitianOperator::from_diagonal(&[1.0, -1.0]);
                        let i2 = HermitianOperator::identity(2);
                        let h0 = z.tensor(&i2)?.add(&i2.tensor(&z)?)?.scale(omega / 2.0);
                        let mut v = CMatrix::zeros(4, 4);
                        v[(1, 2)] = C64::new(g, 0.0);
                        v[(2, 1)] = C64::new(g, 0.0);
                        let model = ClosedModel::new(space, h0, HermitianOperator::new(v)?)?;
                        let h_w = HermitianOperator::from_diagonal(&[omega / 2.0, -omega / 2.0]);
                        (model, h_w)
                    }
                    Some(other) => {
                        return Err(Error::UnknownModel {
                            name: other.to_string(),
                            valid: VALID_MODEL_NAMES.join(", "),
                        })
                    }
                    None => {
                        let dims = self.model.dims.expect("validated");
                        let space = CompositeSpace::new(dims)?;
                        let h0 = HermitianOperator::new(
                            self.model.h0.as_ref().expect("validated").to_matrix()?,
                        )?;
                        let v = HermitianOperator::new(
                            self.model.v.as_ref().expect("validated").to_matrix()?,
                        )?;
                        let h_w = HermitianOperator::new(
                            self.model.h_w.as_ref().expect("validated").to_matrix()?,
                        )?;
                        if h_w.dim() != space.battery_dim() {
                            return Err(Error::Config(format!(
                                "field `model.h_w` has dim {}, battery dim is {}",
                                h_w.dim(),
                                space.battery_dim()
                            )));
                        }
                        (ClosedModel::new(space, h0, v)?, h_w)
                    }
                };
                let rho0 = self.initial_state_closed(&model, &h_w)?;
                Ok(BuiltScenario::Closed { model, h_w, rho0 })
            }
        }
    }

    fn initial_state_open(&self, model: &LindbladModel) -> Result<DensityMatrix> {
        let dim = model.dim();
        let spec = model.hamiltonian().eig();
        match self.initial_state.kind.as_str() {
            "excited" => DensityMatrix::pure(&spec.eigenvector(0)),
            "ground" => DensityMatrix::pure(&spec.eigenvector(dim - 1)),
            "thermal" => {
                let ctx = ThermoContext::new(self.beta, model.hamiltonian().clone())?;
                thermal_state(&ctx)
            }
            "maximally-mixed" => Ok(DensityMatrix::maximally_mixed(dim)),
            "random" => random_density(dim, self.initial_state.rank.unwrap_or(dim), self.seed),
            "matrix" => {
                let m = self.initial_state.matrix.as_ref().expect("validated");
                DensityMatrix::new(HermitianOperator::new(m.to_matrix()?)?)
            }
            other => Err(Error::Config(format!(
                "initial state `{other}` is not valid for an open scenario"
            ))),
        }
    }

    fn initial_state_closed(
        &self,
        model: &ClosedModel,
        _h_w: &HermitianOperator,
    ) -> Result<DensityMatrix> {
        let total = model.space().total_dim();
        match self.initial_state.kind.as_str() {
            // Source excited, battery in the ground state: the canonical
            // charging start for the exchange model.
            "charged-source" => {
                if model.space().dims() != [2, 1, 1, 2] {
                    return Err(Error::Config(
                        "initial state `charged-source` requires the two-qubit exchange layout"
                            .into(),
                    ));
                }
                DensityMatrix::basis_state(4, 1)
            }
            "random" => random_density(total, self.initial_state.rank.unwrap_or(total), self.seed),
            "matrix" => {
                let m = self.initial_state.matrix.as_ref().expect("validated");
                DensityMatrix::new(HermitianOperator::new(m.to_matrix()?)?)
            }
            other => Err(Error::Config(format!(
                "initial state `{other}` is not valid for a closed scenario"
            ))),
        }
    }

    /// Integrator step for open runs: the configured value, or one fifth of
    /// the stability-guard limit, capped by the sample spacing.
    pub fn effective_step(&self, model: &LindbladModel) -> Result<f64> {
        let times = self.times();
        let spacing = times[1] - times[0];
        let auto = (0.2 * model.max_stable_step()).min(spacing);
        let step = self.step.unwrap_or(auto);
        if step > model.max_stable_step() * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "field `step` violates the stability guard (max {:.3e})",
                model.max_stable_step()
            )));
        }
        Ok(step.min(spacing))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Parse and validate a scenario document (TOML; strict unknown-key
/// rejection).
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}
