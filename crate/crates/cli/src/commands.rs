//! The four subcommands.

use std::path::Path;
use std::process::ExitCode;

use l1l2_core::experiments::{
    run_experiment_parallel, run_experiment_with_traces, ExperimentSpec,
};
use l1l2_core::linalg::{norm2, sub, DenseMatrix};
use l1l2_core::model::{PenaltyObjective, ProblemInstance};
use l1l2_core::prox::{prox_oracle, prox_rho, rho_objective, ProxCase};
use l1l2_core::rng::Rng;

use crate::config::{self, FileConfig};
use crate::output;
use crate::{CliError, Options};

const PROX_CHECK_GAP: f64 = 1e-7;
const GRAD_CHECK_TOL: f64 = 1e-5;
const GRAD_BOUNDARY_MARGIN: f64 = 1e-4;

fn load_config(options: &Options) -> Result<FileConfig, CliError> {
    let path = options
        .config_path
        .as_ref()
        .expect("presence checked during argument parsing");
    let mut cfg = config::load(path)?;
    if let Some(seed) = options.seed_override {
        cfg.spec.seed = seed;
    }
    Ok(cfg)
}

fn validated(spec: &ExperimentSpec) -> Result<(), CliError> {
    spec.validate().map_err(|err| CliError::Config(err.to_string()))
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|err| CliError::Io(format!("creating {}: {err}", dir.display())))
}

pub fn solve(options: &Options) -> Result<ExitCode, CliError> {
    let cfg = load_config(options)?;
    // Validate everything before any file is touched.
    validated(&cfg.spec)?;
    ensure_out_dir(&options.out_dir)?;

    if options.trace {
        let (outcome, results) = run_experiment_with_traces(&cfg.spec, options.threads)
            .map_err(|err| CliError::Config(err.to_string()))?;
        for (record, result) in outcome.records.iter().zip(&results) {
            let path = options.out_dir.join(format!("trace_{}.csv", record.trial));
            output::write_trace_csv(&path, result)?;
        }
        finish_solve(options, &cfg.spec, outcome)
    } else {
        let outcome = run_experiment_parallel(&cfg.spec, options.threads)
            .map_err(|err| CliError::Config(err.to_string()))?;
        finish_solve(options, &cfg.spec, outcome)
    }
}

fn finish_solve(
    options: &Options,
    spec: &ExperimentSpec,
    outcome: l1l2_core::experiments::ExperimentOutcome,
) -> Result<ExitCode, CliError> {
    output::write_trials_csv(&options.out_dir.join("trials.csv"), &outcome.records)?;
    output::write_summary_json(&options.out_dir.join("summary.json"), &outcome.summary)?;
    if options.verbosity >= 0 {
        println!(
            "{} trials ({}, m={}, n={}, s={}): success rate {:.3}, mean rel_err {:.3e}, \
             mean ree_err {:.3e}, mean mse {:.4}",
            outcome.summary.trials,
            spec.solver.label(),
            spec.m,
            spec.n,
            spec.s,
            outcome.summary.success_rate,
            outcome.summary.mean_rel_err,
            outcome.summary.mean_ree_err,
            outcome.summary.mean_mse,
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub fn sweep(options: &Options) -> Result<ExitCode, CliError> {
    let cfg = load_config(options)?;
    let sweep_cfg = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs sweep_axis and sweep_values".into()))?;
    if options.trace {
        eprintln!("note: --trace applies to solve only and is ignored for sweeps");
    }
    // Validate the whole grid up front so a bad point cannot leave partial
    // output behind.
    let points: Vec<ExperimentSpec> = (0..sweep_cfg.values.len())
        .map(|i| config::apply_axis(&cfg.spec, sweep_cfg, i))
        .collect();
    for point in &points {
        validated(point)?;
    }
    ensure_out_dir(&options.out_dir)?;

    let mut rows = Vec::with_capacity(points.len());
    for (index, point) in points.iter().enumerate() {
        let outcome = run_experiment_parallel(point, options.threads)
            .map_err(|err| CliError::Config(err.to_string()))?;
        let value = sweep_cfg.values[index];
        let label = if value.fract() == 0.0 {
            format!("{}", value as i64)
        } else {
            output::float_field(value)
        };
        if options.verbosity >= 1 {
            eprintln!(
                "sweep point {}={}: success rate {:.3}",
                sweep_cfg.axis.key(),
                label,
                outcome.summary.success_rate
            );
        }
        rows.push((label, outcome.summary));
    }
    output::write_sweep_csv(
        &options.out_dir.join("sweep.csv"),
        sweep_cfg.axis.key(),
        &rows,
    )?;
    if options.verbosity >= 0 {
        println!("sweep over {} points written to sweep.csv", rows.len());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn prox_check(options: &Options) -> Result<ExitCode, CliError> {
    let (draws, seed) = match options.config_path {
        Some(_) => {
            let cfg = load_config(options)?;
            (cfg.check_draws, cfg.check_seed)
        }
        None => (1000, 1),
    };
    let mut rng = Rng::new(seed);
    let targets = [
        None,
        Some(ProxCase::One),
        Some(ProxCase::Two),
        Some(ProxCase::Three),
        Some(ProxCase::Four),
    ];
    let mut max_gap = 0.0f64;
    let mut worst: Option<(Vec<f64>, l1l2_core::prox::ProxParams)> = None;
    for i in 0..draws {
        let (y, params) = l1l2_core::prox::sample_subproblem(targets[i % targets.len()], &mut rng);
        let closed = prox_rho(&y, &params);
        let oracle = prox_oracle(&y, &params, 250)
            .expect("sampler stays within the oracle's dimension limit");
        let gap = (rho_objective(&y, &params, &closed.result)
            - rho_objective(&y, &params, &oracle))
        .abs();
        if gap > max_gap {
            max_gap = gap;
            worst = Some((y, params));
        }
    }
    println!("prox-check: {draws} draws, max objective gap {max_gap:e}");
    if max_gap <= PROX_CHECK_GAP {
        Ok(ExitCode::SUCCESS)
    } else {
        let (y, params) = worst.expect("a positive gap implies a recorded draw");
        println!(
            "worst case: y = {y:?}, beta = {}, gamma = {}, d = {}",
            params.beta, params.gamma, params.radius
        );
        Ok(ExitCode::from(1))
    }
}

pub fn grad_check(options: &Options) -> Result<ExitCode, CliError> {
    let (draws, seed) = match options.config_path {
        Some(_) => {
            let cfg = load_config(options)?;
            (cfg.check_draws, cfg.check_seed)
        }
        None => (200, 1),
    };
    let mut rng = Rng::new(seed);
    let mut checked = 0usize;
    let mut max_rel = 0.0f64;
    let mut worst: Option<(usize, usize, f64)> = None;
    while checked < draws {
        let m = 1 + rng.below(20);
        let n = 1 + rng.below(20);
        let a = DenseMatrix::new(m, n, (0..m * n).map(|_| rng.normal()).collect())
            .expect("normal draws are finite");
        let b: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        if norm2(&b) == 0.0 {
            continue;
        }
        let eps = if rng.uniform() < 0.5 {
            0.0
        } else {
            0.8 * rng.uniform() * norm2(&b)
        };
        let Ok(problem) = ProblemInstance::new(a, b, eps, 1e6, None) else {
            continue;
        };
        let objective = PenaltyObjective::with_lipschitz(problem, 1.0, 1.0)
            .expect("constants are positive");
        let x: Vec<f64> = (0..n).map(|_| 2.0 * rng.normal()).collect();
        let residual = norm2(&sub(
            &objective.problem().matrix().matvec(&x).expect("dims"),
            objective.problem().measurements(),
        ));
        if (residual - eps).abs() <= GRAD_BOUNDARY_MARGIN {
            continue;
        }
        let analytic = objective.envelope_gradient(&x);
        let numeric = objective.fd_envelope_gradient(&x, 1e-6);
        let rel = norm2(&sub(&analytic, &numeric)) / norm2(&analytic).max(1e-6);
        if rel > max_rel {
            max_rel = rel;
            worst = Some((m, n, eps));
        }
        checked += 1;
    }
    println!("grad-check: {checked} points, max relative error {max_rel:e}");
    if max_rel <= GRAD_CHECK_TOL {
        Ok(ExitCode::SUCCESS)
    } else {
        if let Some((m, n, eps)) = worst {
            println!("worst case: m = {m}, n = {n}, eps = {eps:e}");
        }
        Ok(ExitCode::from(1))
    }
}
