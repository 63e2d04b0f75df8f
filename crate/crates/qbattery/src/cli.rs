//! Command implementations behind the `qbattery` binary: scenario runs,
//! verification campaigns, the singularity probe, and the QFI cross-check.
//!
//! Exit codes: 0 success, 1 usage/config/IO error, 2 verification
//! violation, 3 integrator failure.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::bounds::{
    closed_bound, open_bound, qfi_eigsum, qfi_sld, singularity_probe, BoundReport,
};
use crate::dynamics::{evolve_lindblad, lindblad_rhs};
use crate::error::{Error, Result};
use crate::report::{
    replay_closed, replay_open, simulate_scenario, summarize, ProbeReport, QfiCheckReport,
    ReplayInstance, VerifyReport,
};
use crate::scenarios::{
    load_scenario, named_model, random_closed_model_from, random_density_from, random_lindblad,
    seeded_rng, BuiltScenario, NamedModelParams, Scenario, RNG_ALGORITHM, VALID_MODEL_NAMES,
};
use crate::thermo::{RegularizationPolicy, ThermoContext};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_INTEGRATOR: i32 = 3;

/// Relative-deviation tolerance of the QFI cross-validation campaign.
pub const QFI_AGREEMENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub kind: CampaignKind,
    pub instances: usize,
    /// Closed campaigns: explicit layout; alternates the two reference
    /// layouts when absent.
    pub dims: Option<[usize; 4]>,
    /// Open campaigns: named models to run (defaults to all).
    pub models: Vec<String>,
    pub states_per_model: usize,
    pub time_samples: usize,
    pub seed: u64,
    pub jobs: Option<usize>,
    /// Violation tolerance base (scale-aware); default 1e-9.
    pub tol: f64,
    pub rank_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CampaignKind {
    Closed,
    Open,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            kind: CampaignKind::Closed,
            instances: 1000,
            dims: None,
            models: VALID_MODEL_NAMES.iter().map(|s| s.to_string()).collect(),
            states_per_model: 10,
            time_samples: 100,
            seed: 0,
            jobs: None,
            tol: 1e-9,
            rank_tol: crate::operator::DEFAULT_SUPPORT_TOL,
        }
    }
}

fn validate_common(tol: f64, rank_tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::param("tol", "> 0 and finite", tol));
    }
    if !(rank_tol >= 0.0 && rank_tol.is_finite()) {
        return Err(Error::param("rank_tol", ">= 0 and finite", rank_tol));
    }
    Ok(())
}

fn run_pooled<T, F>(jobs: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match jobs {
        Some(n) => {
            if n == 0 {
                return Err(Error::param("jobs", ">= 1", n));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Closed-bound fuzz campaign over random full-rank instances.
pub fn closed_campaign(opts: &VerifyOptions) -> Result<VerifyReport> {
    validate_common(opts.tol, opts.rank_tol)?;
    let reg = RegularizationPolicy::SupportTruncate {
        support_tol: opts.rank_tol,
    };
    let evaluations: Vec<(BoundReport, ReplayInstance)> = run_pooled(opts.jobs, || {
        (0..opts.instances)
            .into_par_iter()
            .map(|i| {
                // Independent per-instance stream: seed = base + index.
                let seed_i = opts.seed.wrapping_add(i as u64);
                let mut rng = seeded_rng(seed_i);
                let dims = opts.dims.unwrap_or(if i % 2 == 0 {
                    [2, 1, 1, 2]
                } else {
                    [2, 2, 1, 2]
                });
                let (model, h_w) = random_closed_model_from(dims, 0.5, &mut rng)?;
                let total = model.space().total_dim();
                let rho = random_density_from(total, total, &mut rng)?;
                let u: f64 = rand::Rng::random(&mut rng);
                let beta = 10.0_f64.powf(-1.0 + 2.0 * u);
                let ctx = ThermoContext::new(beta, h_w.clone())?;
                let meta = format!("closed idx={i} seed={seed_i} dims={dims:?} beta={beta:.6}");
                let report = closed_bound(&rho, &ctx, &reg, &model, meta.clone())?;
                let replay = replay_closed(&meta, beta, opts.rank_tol, &model, &h_w, &rho);
                Ok((report, replay))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut params = BTreeMap::new();
    params.insert("kind".into(), "closed".into());
    params.insert("instances".into(), opts.instances.to_string());
    params.insert(
        "dims".into(),
        opts.dims
            .map(|d| format!("{d:?}"))
            .unwrap_or_else(|| "[2,1,1,2] | [2,2,1,2]".into()),
    );
    params.insert("tol".into(), format!("{:e}", opts.tol));
    params.insert("rank_tol".into(), format!("{:e}", opts.rank_tol));
    Ok(summarize(
        "verify",
        opts.seed,
        params,
        evaluations,
        opts.tol,
    ))
}

/// Open-bound campaign along Lindblad trajectories of the named models.
pub fn open_campaign(opts: &VerifyOptions) -> Result<VerifyReport> {
    validate_common(opts.tol, opts.rank_tol)?;
    for name in &opts.models {
        if !VALID_MODEL_NAMES.contains(&name.as_str()) {
            return Err(Error::UnknownModel {
                name: name.clone(),
                valid: VALID_MODEL_NAMES.join(", "),
            });
        }
        if name == "two-qubit-exchange" {
            return Err(Error::param(
                "models",
                "open campaign accepts open models only",
                name,
            ));
        }
    }
    let reg = RegularizationPolicy::SupportTruncate {
        support_tol: opts.rank_tol,
    };
    let tasks: Vec<(String, usize)> = opts
        .models
        .iter()
        .flat_map(|m| (0..opts.states_per_model).map(move |s| (m.clone(), s)))
        .collect();

    let evaluations: Vec<Vec<(BoundReport, ReplayInstance)>> = run_pooled(opts.jobs, || {
        tasks
            .par_iter()
            .enumerate()
            .map(|(idx, (name, state_idx))| {
                let seed_i = opts.seed.wrapping_add(idx as u64);
                let mut rng = seeded_rng(seed_i);
                let mut scenario = named_model(name, &NamedModelParams::default())?;
                scenario.grid.n_samples = opts.time_samples;
                scenario.rank_tol = opts.rank_tol;
                let BuiltScenario::Open { model, .. } = scenario.build()? else {
                    return Err(Error::Config("expected an open scenario".into()));
                };
                let rho0 = random_density_from(model.dim(), model.dim(), &mut rng)?;
                let step = scenario.effective_step(&model)?;
                let ctx = scenario.thermo_context()?;
                let times = scenario.times();
                let traj = evolve_lindblad(&model, &rho0, &times, step)?;
                let mut out = Vec::with_capacity(times.len());
                for (k, state) in traj.states().iter().enumerate() {
                    let meta = format!(
                        "open model={name} state={state_idx} seed={seed_i} t={}",
                        times[k]
                    );
                    let report =
                        open_bound(&model, state, &ctx, &reg, opts.rank_tol, meta.clone())?;
                    let replay = replay_open(&meta, scenario.beta, opts.rank_tol, &model, state);
                    out.push((report, replay));
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let mut params = BTreeMap::new();
    params.insert("kind".into(), "open".into());
    params.insert("models".into(), opts.models.join(","));
    params.insert("states_per_model".into(), opts.states_per_model.to_string());
    params.insert("time_samples".into(), opts.time_samples.to_string());
    params.insert("tol".into(), format!("{:e}", opts.tol));
    params.insert("rank_tol".into(), format!("{:e}", opts.rank_tol));
    Ok(summarize(
        "verify",
        opts.seed,
        params,
        evaluations.into_iter().flatten().collect(),
        opts.tol,
    ))
}

/// QFI cross-validation: eigsum vs SLD on full-rank instances, finiteness
/// on rank-deficient ones.
pub fn qfi_campaign(
    instances: usize,
    dim: usize,
    seed: u64,
    rank_tol: f64,
    jobs: Option<usize>,
) -> Result<QfiCheckReport> {
    if dim == 0 {
        return Err(Error::param("dim", ">= 1", dim));
    }
    validate_common(1e-9, rank_tol)?;
    let results: Vec<(f64, bool, usize)> = run_pooled(jobs, || {
        (0..instances)
            .into_par_iter()
            .map(|i| {
                let seed_i = seed.wrapping_add(i as u64);
                let mut rng = seeded_rng(seed_i);
                let rho = random_density_from(dim, dim, &mut rng)?;
                let model = random_lindblad(dim, 2, 1.0, seed_i.wrapping_add(0x9E37))?;
                let rho_dot = lindblad_rhs(&model, &rho)?;
                let via_sum = qfi_eigsum(rho.spectral(), rho_dot.matrix(), rank_tol)?;
                let via_sld = qfi_sld(&rho, rho_dot.matrix())?;
                let rel = (via_sum.value - via_sld).abs() / via_sld.abs().max(1e-12);

                // Rank-deficient companion instance: finite by construction.
                let (finite, excluded) = if dim > 1 {
                    let rank = 1 + (i % (dim - 1));
                    let rho_def = random_density_from(dim, rank, &mut rng)?;
                    let dot_def = lindblad_rhs(&model, &rho_def)?;
                    let q = qfi_eigsum(rho_def.spectral(), dot_def.matrix(), rank_tol)?;
                    (q.value.is_finite(), q.excluded_pairs)
                } else {
                    (via_sum.value.is_finite(), 0)
                };
                Ok((rel, finite, excluded))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let max_rel = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let all_finite = results.iter().all(|r| r.1);
    let min_excluded = results.iter().map(|r| r.2).min().unwrap_or(0);
    Ok(QfiCheckReport {
        command: "qfi-check".into(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        tool_version: crate::report::TOOL_VERSION.into(),
        rng_algorithm: RNG_ALGORITHM.into(),
        seed,
        dim,
        full_rank_instances: instances,
        max_relative_deviation: max_rel,
        rank_deficient_instances: if dim > 1 { instances } else { 0 },
        all_finite,
        min_excluded_pairs: min_excluded,
        tolerance: QFI_AGREEMENT_TOL,
        passed: max_rel < QFI_AGREEMENT_TOL && all_finite,
    })
}

fn exit_for_error(err: &Error) -> i32 {
    match err {
        Error::IntegratorFailure { .. } => EXIT_INTEGRATOR,
        _ => EXIT_USAGE,
    }
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// `simulate`: run a scenario file and write the trajectory table.
pub fn cmd_simulate(scenario_path: &Path, output: &Path, format: OutputFormat) -> i32 {
    let run = || -> Result<String> {
        let text = std::fs::read_to_string(scenario_path)?;
        let scenario: Scenario = load_scenario(&text)?;
        let record = simulate_scenario(&scenario)?;
        match format {
            OutputFormat::Csv => Ok(record.to_csv_string()),
            OutputFormat::Json => record.to_json_string(),
        }
    };
    match run() {
        Ok(contents) => match write_output(output, &contents) {
            Ok(()) => EXIT_SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_USAGE
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit_for_error(&e)
        }
    }
}

/// `verify`: run a bound campaign and write the JSON report.
pub fn cmd_verify(opts: &VerifyOptions, report_path: &Path) -> i32 {
    let run = || -> Result<VerifyReport> {
        match opts.kind {
            CampaignKind::Closed => closed_campaign(opts),
            CampaignKind::Open => open_campaign(opts),
        }
    };
    match run() {
        Ok(report) => {
            let json = match report.to_json_string() {
                Ok(j) => j,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            if let Err(e) = write_output(report_path, &json) {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
            if report.all_passed {
                EXIT_SUCCESS
            } else {
                eprintln!(
                    "verification FAILED: {} violating instance(s) serialized in {}",
                    report.violations.len(),
                    report_path.display()
                );
                EXIT_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_for_error(&e)
        }
    }
}

/// `verify --replay`: re-evaluate the violating instances of a previous
/// report from their serialized matrices.
pub fn cmd_replay(report_path: &Path, tol: f64) -> i32 {
    let run = || -> Result<(usize, usize)> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::param("tol", "> 0 and finite", tol));
        }
        let text = std::fs::read_to_string(report_path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let violations = value
            .get("violations")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Config("report has no `violations` array".into()))?;
        let mut violated = 0usize;
        for entry in violations {
            let replay: ReplayInstance = serde_json::from_value(
                entry
                    .get("replay")
                    .cloned()
                    .ok_or_else(|| Error::Config("violation entry has no `replay`".into()))?,
            )
            .map_err(|e| Error::Config(e.to_string()))?;
            // Campaigns evaluate under support truncation at their rank
            // cutoff; replay reconstructs the same policy per instance.
            let reg = RegularizationPolicy::SupportTruncate {
                support_tol: replay.rank_tol,
            };
            let report = crate::report::replay_instance(&replay, &reg)?;
            let scale = report.lhs.abs().max(report.rhs.abs()).max(1.0);
            let still_violated = report.slack < -tol * scale;
            println!(
                "replay {}: lhs={} rhs={} slack={} violated={}",
                report.instance_meta, report.lhs, report.rhs, report.slack, still_violated
            );
            if still_violated {
                violated += 1;
            }
        }
        Ok((violations.len(), violated))
    };
    match run() {
        Ok((_, 0)) => EXIT_SUCCESS,
        Ok((_, _)) => EXIT_VIOLATION,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// `probe-singularity`: ε-sweep the open power near a pure eigenstate and
/// fit the logarithmic divergence.
#[allow(clippy::too_many_arguments)]
pub fn cmd_probe_singularity(
    model_name: &str,
    params: &NamedModelParams,
    state_index: usize,
    eps_grid: &[f64],
    output: &Path,
    format: OutputFormat,
) -> i32 {
    let run = || -> Result<ProbeReport> {
        let scenario = named_model(model_name, params)?;
        let BuiltScenario::Open { model, .. } = scenario.build()? else {
            return Err(Error::param(
                "model",
                "an open (Lindblad) named model",
                model_name,
            ));
        };
        let ctx = scenario.thermo_context()?;
        let fit = singularity_probe(&model, &ctx, state_index, eps_grid)?;
        if fit.poor_fit {
            eprintln!(
                "warning: poor fit (residual {} vs |b log eps_min| = {})",
                fit.residual,
                (fit.log_slope * eps_grid.last().unwrap().ln()).abs()
            );
        }
        Ok(ProbeReport {
            command: "probe-singularity".into(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            tool_version: crate::report::TOOL_VERSION.into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            model: model_name.into(),
            state_index,
            beta: scenario.beta,
            fit,
        })
    };
    match run() {
        Ok(report) => {
            let contents = match format {
                OutputFormat::Csv => report.to_csv_string(),
                OutputFormat::Json => match report.to_json_string() {
                    Ok(j) => j,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_USAGE;
                    }
                },
            };
            match write_output(output, &contents) {
                Ok(()) => EXIT_SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_USAGE
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// `qfi-check`: eigsum-vs-SLD agreement campaign.
pub fn cmd_qfi_check(
    instances: usize,
    dim: usize,
    seed: u64,
    rank_tol: f64,
    jobs: Option<usize>,
    report_path: Option<&Path>,
) -> i32 {
    match qfi_campaign(instances, dim, seed, rank_tol, jobs) {
        Ok(report) => {
            let json = match report.to_json_string() {
                Ok(j) => j,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            if let Some(path) = report_path {
                if let Err(e) = write_output(path, &json) {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            } else {
                println!("{json}");
            }
            if report.passed {
                EXIT_SUCCESS
            } else {
                eprintln!(
                    "qfi-check FAILED: max relative deviation {}",
                    report.max_relative_deviation
                );
                EXIT_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
