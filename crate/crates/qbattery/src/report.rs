//! Machine-readable run and verification reports.
//!
//! CSV is used for trajectory tables (plot-friendly), JSON for structured
//! verification reports. All energies are in ħ = k_B = 1 units. Reports are
//! byte-deterministic for a fixed command line except for the `timestamp`
//! field, which consumers exclude from hashing.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::bounds::{
    closed_bound, kernel_term, open_bound, qfi_eigsum, BoundReport, SingularityFit,
};
use crate::density::DensityMatrix;
use crate::dynamics::{
    evolve_closed, evolve_lindblad, lindblad_rhs_matrix, power_finite_difference, Trajectory,
};
use crate::error::{Error, Result};
use crate::operator::CMatrix;
use crate::scenarios::{BuiltScenario, MatrixData, Scenario, RNG_ALGORITHM};
use crate::thermo::{centered_free_energy_operator, max_extractable_work, von_neumann_entropy};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed CSV column order for trajectory tables.
pub const RUN_COLUMNS: [&str; 11] = [
    "t",
    "battery_energy",
    "entropy",
    "w_max",
    "p_direct",
    "p_finite_difference",
    "sigma_f",
    "qfi",
    "kernel_term",
    "bound_rhs",
    "slack",
];

/// A float that serializes non-finite values as the string `"infinite"`
/// (the relative-entropy sentinel) instead of null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportFloat(pub f64);

impl Serialize for ReportFloat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("infinite")
        }
    }
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "infinite".to_string()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub t: ReportFloat,
    pub battery_energy: ReportFloat,
    pub entropy: ReportFloat,
    pub w_max: ReportFloat,
    pub p_direct: ReportFloat,
    pub p_finite_difference: ReportFloat,
    pub sigma_f: ReportFloat,
    pub qfi: ReportFloat,
    pub kernel_term: ReportFloat,
    pub bound_rhs: ReportFloat,
    pub slack: ReportFloat,
}

impl RunRow {
    fn values(&self) -> [f64; 11] {
        [
            self.t.0,
            self.battery_energy.0,
            self.entropy.0,
            self.w_max.0,
            self.p_direct.0,
            self.p_finite_difference.0,
            self.sigma_f.0,
            self.qfi.0,
            self.kernel_term.0,
            self.bound_rhs.0,
            self.slack.0,
        ]
    }
}

/// One simulate run: scenario hash, per-time quantifier rows, tool and RNG
/// identification.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub scenario_hash: String,
    pub tool_version: String,
    pub rng_algorithm: String,
    pub bound_name: String,
    pub columns: Vec<String>,
    pub rows: Vec<RunRow>,
}

impl RunRecord {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&RUN_COLUMNS.join(","));
        out.push('\n');
        for row in &self.rows {
            let vals: Vec<String> = row.values().iter().map(|&v| fmt_float(v)).collect();
            out.push_str(&vals.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn scenario_hash(scenario: &Scenario) -> Result<String> {
    let canonical = scenario.to_toml_string()?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hex_digest(&hasher.finalize()))
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn term_value(report: &BoundReport, key: &str) -> f64 {
    report
        .rhs_terms
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .unwrap_or(0.0)
}

/// Fill the per-time scalar quantifier map of a closed trajectory: energy,
/// entropy, W_max, powers, and the closed-bound terms.
pub fn annotate_closed_trajectory(
    traj: &mut Trajectory,
    model: &crate::dynamics::ClosedModel,
    ctx: &crate::thermo::ThermoContext,
    reg: &crate::thermo::RegularizationPolicy,
    rank_tol: f64,
) -> Result<()> {
    let ground = *ctx
        .hamiltonian()
        .eig()
        .eigenvalues()
        .last()
        .expect("dim >= 1");
    let fd = power_finite_difference(traj, ctx)?;
    let times = traj.times().to_vec();
    for (i, &t) in times.iter().enumerate() {
        let battery = traj.states()[i].clone();
        let full = traj.full_states().expect("closed run")[i].clone();
        let report = closed_bound(&full, ctx, reg, model, format!("t={t}"))?;
        let p_direct = report
            .extra("p_direct")
            .ok_or_else(|| Error::Inconsistency("missing p_direct".into()))?;
        let rho_dot_w = model.reduced_battery_derivative(&full)?;
        let qfi = qfi_eigsum(battery.spectral(), &rho_dot_w, rank_tol)?.value;
        let df = centered_free_energy_operator(ctx, &battery, reg)?;
        let kernel = kernel_term(battery.spectral(), &rho_dot_w, &df, rank_tol)?;
        traj.record(
            i,
            "energy",
            battery.expectation(ctx.hamiltonian())? - ground,
        );
        traj.record(i, "entropy", von_neumann_entropy(&battery));
        traj.record(i, "w_max", max_extractable_work(ctx, &battery)?);
        traj.record(i, "p_direct", p_direct);
        traj.record(i, "p_finite_difference", fd[i]);
        traj.record(
            i,
            "sigma_f",
            term_value(&report, "sigma2_f").max(0.0).sqrt(),
        );
        traj.record(i, "qfi", qfi);
        traj.record(i, "kernel_term", kernel);
        traj.record(i, "bound_rhs", report.rhs);
        traj.record(i, "slack", report.slack);
    }
    Ok(())
}

/// Fill the per-time scalar quantifier map of an open trajectory.
pub fn annotate_open_trajectory(
    traj: &mut Trajectory,
    model: &crate::dynamics::LindbladModel,
    ctx: &crate::thermo::ThermoContext,
    reg: &crate::thermo::RegularizationPolicy,
    rank_tol: f64,
) -> Result<()> {
    let ground = *ctx
        .hamiltonian()
        .eig()
        .eigenvalues()
        .last()
        .expect("dim >= 1");
    let fd = power_finite_difference(traj, ctx)?;
    let times = traj.times().to_vec();
    for (i, &t) in times.iter().enumerate() {
        let state = traj.states()[i].clone();
        let report = open_bound(model, &state, ctx, reg, rank_tol, format!("t={t}"))?;
        let p_signed = report
            .extra("p_signed")
            .ok_or_else(|| Error::Inconsistency("missing p_signed".into()))?;
        traj.record(i, "energy", state.expectation(ctx.hamiltonian())? - ground);
        traj.record(i, "entropy", von_neumann_entropy(&state));
        traj.record(i, "w_max", max_extractable_work(ctx, &state)?);
        traj.record(i, "p_direct", p_signed);
        traj.record(i, "p_finite_difference", fd[i]);
        traj.record(i, "sigma_f", term_value(&report, "sigma_f"));
        traj.record(i, "qfi", report.extra("qfi").unwrap_or(0.0));
        traj.record(i, "kernel_term", term_value(&report, "kernel_term"));
        traj.record(i, "bound_rhs", report.rhs);
        traj.record(i, "slack", report.slack);
    }
    Ok(())
}

/// Run a scenario and assemble the per-time quantifier table.
///
/// The battery energy column is the stored energy above the battery ground
/// state, `tr(ρ_W H_W) - λ_min(H_W)`.
pub fn simulate_scenario(scenario: &Scenario) -> Result<RunRecord> {
    scenario.validate()?;
    let ctx = scenario.thermo_context()?;
    let reg = scenario.regularization;
    let times = scenario.times();
    let rank_tol = scenario.rank_tol;

    let (traj, bound_name) = match scenario.build()? {
        BuiltScenario::Closed { model, rho0, .. } => {
            let mut traj = evolve_closed(&model, &rho0, &times)?;
            annotate_closed_trajectory(&mut traj, &model, &ctx, &reg, rank_tol)?;
            (traj, "closed-power-squared".to_string())
        }
        BuiltScenario::Open { model, rho0, step } => {
            let mut traj = evolve_lindblad(&model, &rho0, &times, step)?;
            annotate_open_trajectory(&mut traj, &model, &ctx, &reg, rank_tol)?;
            (traj, "open-power".to_string())
        }
    };

    let pick = |rec: &std::collections::BTreeMap<String, f64>, key: &str| -> Result<f64> {
        rec.get(key)
            .copied()
            .ok_or_else(|| Error::Inconsistency(format!("missing record `{key}`")))
    };
    let mut rows = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let rec = &traj.records()[i];
        rows.push(RunRow {
            t: ReportFloat(t),
            battery_energy: ReportFloat(pick(rec, "energy")?),
            entropy: ReportFloat(pick(rec, "entropy")?),
            w_max: ReportFloat(pick(rec, "w_max")?),
            p_direct: ReportFloat(pick(rec, "p_direct")?),
            p_finite_difference: ReportFloat(pick(rec, "p_finite_difference")?),
            sigma_f: ReportFloat(pick(rec, "sigma_f")?),
            qfi: ReportFloat(pick(rec, "qfi")?),
            kernel_term: ReportFloat(pick(rec, "kernel_term")?),
            bound_rhs: ReportFloat(pick(rec, "bound_rhs")?),
            slack: ReportFloat(pick(rec, "slack")?),
        });
    }

    Ok(RunRecord {
        scenario_hash: scenario_hash(scenario)?,
        tool_version: TOOL_VERSION.to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        bound_name,
        columns: RUN_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

/// Everything needed to re-evaluate one bound instance from raw matrices.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct ReplayInstance {
    pub kind: String,
    pub instance_meta: String,
    pub beta: f64,
    pub rank_tol: f64,
    /// Closed instances: subsystem dims, H0, V, battery H.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<[usize; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_w: Option<MatrixData>,
    /// Open instances: battery H and (rate, jump) channels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<(f64, MatrixData)>>,
    /// The state the bound was evaluated at.
    pub rho: MatrixData,
}

#[derive(Debug, Clone, Serialize)]
pub struct ViolationRecord {
    pub report: BoundReport,
    pub replay: ReplayInstance,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundSummary {
    pub name: String,
    pub evaluations: usize,
    pub pass_count: usize,
    pub violation_count: usize,
    pub worst_slack: f64,
    pub worst_instance: String,
}

/// JSON report of a verification campaign.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub command: String,
    pub timestamp: String,
    pub tool_version: String,
    pub rng_algorithm: String,
    pub seed: u64,
    pub params: BTreeMap<String, String>,
    pub bounds: Vec<BoundSummary>,
    pub violations: Vec<ViolationRecord>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Summarize a stream of (report, replay) evaluations per bound name.
pub fn summarize(
    command: &str,
    seed: u64,
    params: BTreeMap<String, String>,
    evaluations: Vec<(BoundReport, ReplayInstance)>,
    effective_tol: f64,
) -> VerifyReport {
    let mut by_name: BTreeMap<String, BoundSummary> = BTreeMap::new();
    let mut violations = Vec::new();
    for (report, replay) in evaluations {
        let scale = report.lhs.abs().max(report.rhs.abs()).max(1.0);
        let violated = report.slack < -effective_tol * scale;
        let entry = by_name
            .entry(report.name.clone())
            .or_insert_with(|| BoundSummary {
                name: report.name.clone(),
                evaluations: 0,
                pass_count: 0,
                violation_count: 0,
                worst_slack: f64::INFINITY,
                worst_instance: String::new(),
            });
        entry.evaluations += 1;
        if violated {
            entry.violation_count += 1;
        } else {
            entry.pass_count += 1;
        }
        if report.slack < entry.worst_slack {
            entry.worst_slack = report.slack;
            entry.worst_instance = report.instance_meta.clone();
        }
        if violated {
            violations.push(ViolationRecord { report, replay });
        }
    }
    let all_passed = violations.is_empty();
    VerifyReport {
        command: command.to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        tool_version: TOOL_VERSION.to_string(),
        rng_algorithm: RNG_ALGORITHM.to_string(),
        seed,
        params,
        bounds: by_name.into_values().collect(),
        violations,
        all_passed,
    }
}

/// Report of the eigsum-vs-SLD QFI cross-validation campaign.
#[derive(Debug, Clone, Serialize)]
pub struct QfiCheckReport {
    pub command: String,
    pub timestamp: String,
    pub tool_version: String,
    pub rng_algorithm: String,
    pub seed: u64,
    pub dim: usize,
    pub full_rank_instances: usize,
    pub max_relative_deviation: f64,
    pub rank_deficient_instances: usize,
    pub all_finite: bool,
    pub min_excluded_pairs: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl QfiCheckReport {
    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Report of a singularity probe: the sampled table and the log fit.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub command: String,
    pub timestamp: String,
    pub tool_version: String,
    pub rng_algorithm: String,
    pub model: String,
    pub state_index: usize,
    pub beta: f64,
    pub fit: SingularityFit,
}

impl ProbeReport {
    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// CSV table of (ε, P(ε)) with the fit as trailing comment lines.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epsilon,power\n");
        for &(eps, p) in &self.fit.points {
            out.push_str(&format!("{},{}\n", fmt_float(eps), fmt_float(p)));
        }
        out.push_str(&format!("# a = {}\n", fmt_float(self.fit.intercept)));
        out.push_str(&format!("# b = {}\n", fmt_float(self.fit.log_slope)));
        out.push_str(&format!("# residual = {}\n", fmt_float(self.fit.residual)));
        out.push_str(&format!("# poor_fit = {}\n", self.fit.poor_fit));
        out
    }
}

/// Helper for replay blobs: capture an open model instance.
pub fn replay_open(
    meta: &str,
    beta: f64,
    rank_tol: f64,
    model: &crate::dynamics::LindbladModel,
    rho: &DensityMatrix,
) -> ReplayInstance {
    ReplayInstance {
        kind: "open".into(),
        instance_meta: meta.into(),
        beta,
        rank_tol,
        dims: None,
        h0: None,
        v: None,
        h_w: None,
        hamiltonian: Some(MatrixData::from_matrix(model.hamiltonian().matrix())),
        channels: Some(
            model
                .channels()
                .iter()
                .map(|c| (c.gamma, MatrixData::from_matrix(&c.jump)))
                .collect(),
        ),
        rho: MatrixData::from_matrix(rho.matrix()),
    }
}

/// Helper for replay blobs: capture a closed model instance.
pub fn replay_closed(
    meta: &str,
    beta: f64,
    rank_tol: f64,
    model: &crate::dynamics::ClosedModel,
    h_w: &crate::operator::HermitianOperator,
    rho: &DensityMatrix,
) -> ReplayInstance {
    ReplayInstance {
        kind: "closed".into(),
        instance_meta: meta.into(),
        beta,
        rank_tol,
        dims: Some(model.space().dims()),
        h0: Some(MatrixData::from_matrix(model.h0().matrix())),
        v: Some(MatrixData::from_matrix(model.interaction().matrix())),
        h_w: Some(MatrixData::from_matrix(h_w.matrix())),
        hamiltonian: None,
        channels: None,
        rho: MatrixData::from_matrix(rho.matrix()),
    }
}

/// Re-evaluate a serialized instance; used by the `--replay` flag.
pub fn replay_instance(
    instance: &ReplayInstance,
    reg: &crate::thermo::RegularizationPolicy,
) -> Result<BoundReport> {
    use crate::operator::HermitianOperator;
    let rho = DensityMatrix::new(HermitianOperator::new(instance.rho.to_matrix()?)?)?;
    match instance.kind.as_str() {
        "open" => {
            let h = HermitianOperator::new(
                instance
                    .hamiltonian
                    .as_ref()
                    .ok_or_else(|| Error::Config("replay: missing hamiltonian".into()))?
                    .to_matrix()?,
            )?;
            let channels: Vec<(f64, CMatrix)> = instance
                .channels
                .as_ref()
                .ok_or_else(|| Error::Config("replay: missing channels".into()))?
                .iter()
                .map(|(g, m)| Ok((*g, m.to_matrix()?)))
                .collect::<Result<_>>()?;
            let model = crate::dynamics::LindbladModel::new(h.clone(), channels)?;
            let ctx = crate::thermo::ThermoContext::new(instance.beta, h)?;
            // The derivative is recomputed from the model, exactly as in the
            // original evaluation.
            let _ = lindblad_rhs_matrix(&model, rho.matrix());
            open_bound(
                &model,
                &rho,
                &ctx,
                reg,
                instance.rank_tol,
                instance.instance_meta.clone(),
            )
        }
        "closed" => {
            let dims = instance
                .dims
                .ok_or_else(|| Error::Config("replay: missing dims".into()))?;
            let space = crate::space::CompositeSpace::new(dims)?;
            let h0 = HermitianOperator::new(
                instance
                    .h0
                    .as_ref()
                    .ok_or_else(|| Error::Config("replay: missing h0".into()))?
                    .to_matrix()?,
            )?;
            let v = HermitianOperator::new(
                instance
                    .v
                    .as_ref()
                    .ok_or_else(|| Error::Config("replay: missing v".into()))?
                    .to_matrix()?,
            )?;
            let h_w = HermitianOperator::new(
                instance
                    .h_w
                    .as_ref()
                    .ok_or_else(|| Error::Config("replay: missing h_w".into()))?
                    .to_matrix()?,
            )?;
            let model = crate::dynamics::ClosedModel::new(space, h0, v)?;
            let ctx = crate::thermo::ThermoContext::new(instance.beta, h_w)?;
            closed_bound(&rho, &ctx, reg, &model, instance.instance_meta.clone())
        }
        other => Err(Error::Config(format!("replay: unknown kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{named_model, NamedModelParams};

    #[test]
    fn csv_has_fixed_header_and_row_count() {
        let scenario = named_model("qubit-dephasing", &NamedModelParams::default()).unwrap();
        let record = simulate_scenario(&scenario).unwrap();
        assert_eq!(record.rows.len(), scenario.grid.n_samples);
        let csv = record.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), RUN_COLUMNS.join(","));
        assert_eq!(csv.lines().count(), 1 + scenario.grid.n_samples);
    }

    #[test]
    fn dephasing_run_has_zero_power_column() {
        let scenario = named_model("qubit-dephasing", &NamedModelParams::default()).unwrap();
        let record = simulate_scenario(&scenario).unwrap();
        for row in &record.rows {
            assert!(row.p_direct.0.abs() < 1e-10);
        }
    }

    #[test]
    fn exchange_energy_column_matches_rabi_oracle() {
        let scenario = named_model("two-qubit-exchange", &NamedModelParams::default()).unwrap();
        let record = simulate_scenario(&scenario).unwrap();
        let g = 0.1;
        for row in &record.rows {
            let t = row.t.0;
            let want = (g * t).sin().powi(2);
            assert!(
                (row.battery_energy.0 - want).abs() < 1e-8,
                "energy {} vs ω sin²(gt) = {want} at t = {t}",
                row.battery_energy.0
            );
        }
    }

    #[test]
    fn run_rows_never_violate_bounds() {
        for name in crate::scenarios::VALID_MODEL_NAMES {
            let scenario = named_model(name, &NamedModelParams::default()).unwrap();
            let record = simulate_scenario(&scenario).unwrap();
            for row in &record.rows {
                assert!(
                    row.slack.0 >= -1e-9 * row.bound_rhs.0.abs().max(1.0),
                    "bound violated in {name}"
                );
            }
        }
    }

    #[test]
    fn report_float_serializes_infinite_sentinel() {
        let json = serde_json::to_string(&ReportFloat(f64::INFINITY)).unwrap();
        assert_eq!(json, "\"infinite\"");
        let json = serde_json::to_string(&ReportFloat(1.5)).unwrap();
        assert_eq!(json, "1.5");
    }

    #[test]
    fn replay_reproduces_open_bound() {
        let model = crate::scenarios::random_lindblad(3, 2, 1.0, 811).unwrap();
        let rho = crate::scenarios::random_density(3, 3, 812).unwrap();
        let ctx = crate::thermo::ThermoContext::new(1.0, model.hamiltonian().clone()).unwrap();
        let reg = crate::thermo::RegularizationPolicy::default();
        let original = open_bound(&model, &rho, &ctx, &reg, 1e-10, "orig").unwrap();
        let blob = replay_open("orig", 1.0, 1e-10, &model, &rho);
        let replayed = replay_instance(&blob, &reg).unwrap();
        assert_eq!(original.lhs, replayed.lhs);
        assert_eq!(original.rhs, replayed.rhs);
    }
}
