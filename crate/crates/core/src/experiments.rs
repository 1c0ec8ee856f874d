//! Problem generators, recovery metrics, and the trial loop.
//!
//! An [`ExperimentSpec`] describes one batch of synthetic recovery trials:
//! sensing-matrix family and size, sparsity and amplitude model of the
//! planted signal, noise level, solver selection and its knobs. Each trial
//! derives its own random streams from `(seed, trial, purpose)`, so a batch
//! is reproducible and trials can run concurrently without changing any
//! recorded number.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, DenseMatrix, Vector};
use crate::model::{PenaltyObjective, ProblemInstance};
use crate::rng::{Purpose, Rng};
use crate::solvers::{
    admm_l1_warm_start, noisy_warm_start, solve_ppga, solve_ppga_ls, LambdaSchedule, SolverConfig,
    SolverResult, Termination,
};

/// A trial counts as a successful recovery below this relative error.
pub const SUCCESS_THRESHOLD: f64 = 1e-3;

/// Weight of the l1 term in the warm-start problem.
pub const WARM_START_WEIGHT: f64 = 0.08;

/// ADMM penalty parameter for the warm start.
pub const WARM_START_RHO: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFamily {
    Gaussian,
    OversampledDct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsRule {
    /// Noise-free runs: eps = 0.
    Zero,
    /// eps = c * sqrt(m).
    ScaledSqrtM(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Ppga,
    PpgaMl,
    PpgaNl,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Ppga => "ppga",
            SolverKind::PpgaMl => "ppga_ml",
            SolverKind::PpgaNl => "ppga_nl",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub family: MatrixFamily,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    /// DCT coherence factor F; unused for the Gaussian family.
    pub coherence: f64,
    /// Dynamic-range exponent D of the planted magnitudes (DCT family only;
    /// the Gaussian family plants standard normal values).
    pub dynamic_range: f64,
    /// Column normalization for the Gaussian family (zero mean, unit norm).
    pub normalize_columns: bool,
    /// Noise standard deviation; 0 means noise-free.
    pub sigma: f64,
    pub eps_rule: EpsRule,
    pub trials: usize,
    pub seed: u64,
    pub lambda0: f64,
    pub lambda_schedule_on: bool,
    pub solver: SolverKind,
    pub ball_radius: f64,
    /// Backtracking factor eta.
    pub shrink: f64,
    /// Sufficient-decrease weight a.
    pub sufficient_decrease: f64,
    /// Nonmonotone window N (used by the `PpgaNl` solver).
    pub window: usize,
    pub rel_tol: f64,
    /// Iteration cap; `None` means `500 * n`.
    pub max_iter: Option<usize>,
}

impl ExperimentSpec {
    /// Spec with the standard experiment defaults; callers override fields.
    pub fn baseline(family: MatrixFamily, m: usize, n: usize, s: usize) -> Self {
        ExperimentSpec {
            family,
            m,
            n,
            s,
            coherence: 1.0,
            dynamic_range: 1.0,
            normalize_columns: true,
            sigma: 0.0,
            eps_rule: EpsRule::Zero,
            trials: 1,
            seed: 0,
            lambda0: 0.008,
            lambda_schedule_on: false,
            solver: SolverKind::PpgaNl,
            ball_radius: 1e7,
            shrink: 0.5,
            sufficient_decrease: 1e-8,
            window: 4,
            rel_tol: 1e-8,
            max_iter: None,
        }
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iter.unwrap_or(500 * self.n)
    }

    pub fn noise_bound(&self) -> f64 {
        match self.eps_rule {
            EpsRule::Zero => 0.0,
            EpsRule::ScaledSqrtM(c) => c * (self.m as f64).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("m and n must be positive".into()));
        }
        if self.s == 0 || self.s > self.n {
            return Err(Error::InvalidArgument(format!(
                "sparsity must satisfy 1 <= s <= n, got s={} n={}",
                self.s, self.n
            )));
        }
        if self.m > self.n {
            return Err(Error::InvalidArgument(format!(
                "compressed sensing regime needs m <= n, got m={} n={}",
                self.m, self.n
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be positive".into()));
        }
        if !crate::error::positive(self.coherence) {
            return Err(Error::InvalidArgument("coherence factor must be positive".into()));
        }
        if !crate::error::nonnegative(self.dynamic_range) {
            return Err(Error::InvalidArgument(
                "dynamic range exponent must be nonnegative".into(),
            ));
        }
        if !crate::error::nonnegative(self.sigma) {
            return Err(Error::InvalidArgument("sigma must be nonnegative".into()));
        }
        if let EpsRule::ScaledSqrtM(c) = self.eps_rule {
            if !crate::error::nonnegative(c) {
                return Err(Error::InvalidArgument("eps scale must be nonnegative".into()));
            }
        }
        if !crate::error::positive(self.lambda0) {
            return Err(Error::InvalidArgument("lambda0 must be positive".into()));
        }
        if !crate::error::positive(self.ball_radius) {
            return Err(Error::InvalidArgument("ball radius must be positive".into()));
        }
        if !(crate::error::positive(self.shrink) && self.shrink < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eta must lie strictly between 0 and 1, got {}",
                self.shrink
            )));
        }
        if !crate::error::nonnegative(self.sufficient_decrease) {
            return Err(Error::InvalidArgument(
                "sufficient-decrease weight must be nonnegative".into(),
            ));
        }
        if self.solver == SolverKind::PpgaNl && self.window == 0 {
            return Err(Error::InvalidArgument(
                "the nonmonotone solver needs window >= 1".into(),
            ));
        }
        if !crate::error::nonnegative(self.rel_tol) {
            return Err(Error::InvalidArgument("rel_tol must be nonnegative".into()));
        }
        if self.max_iterations() == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Oversampled DCT sensing matrix: column `j` (1-based) has entries
/// `cos(2 pi w_i j / F) / sqrt(m)` with `w` drawn uniformly on [0, 1]^m.
/// Larger `F` yields more coherent columns.
pub fn gen_dct_matrix(m: usize, n: usize, coherence: f64, rng: &mut Rng) -> DenseMatrix {
    let w: Vector = (0..m).map(|_| rng.uniform()).collect();
    dct_matrix_from_w(&w, n, coherence)
}

/// Deterministic core of [`gen_dct_matrix`], exposed so tests can pin `w`.
pub fn dct_matrix_from_w(w: &[f64], n: usize, coherence: f64) -> DenseMatrix {
    let m = w.len();
    let scale = 1.0 / (m as f64).sqrt();
    let mut data = vec![0.0; m * n];
    for (i, &wi) in w.iter().enumerate() {
        let base = 2.0 * std::f64::consts::PI * wi / coherence;
        for j in 0..n {
            data[i * n + j] = (base * (j + 1) as f64).cos() * scale;
        }
    }
    DenseMatrix::new(m, n, data).expect("generated entries are finite")
}

/// Matrix of i.i.d. standard normals; optionally shifts each column to zero
/// mean and scales it to unit norm.
pub fn gen_gaussian_matrix(m: usize, n: usize, normalize_cols: bool, rng: &mut Rng) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            a.set(i, j, rng.normal());
        }
    }
    if normalize_cols {
        for j in 0..n {
            let mean = (0..m).map(|i| a.get(i, j)).sum::<f64>() / m as f64;
            for i in 0..m {
                a.set(i, j, a.get(i, j) - mean);
            }
            let norm = (0..m).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for i in 0..m {
                    a.set(i, j, a.get(i, j) / norm);
                }
            }
        }
    }
    a
}

/// `s`-sparse planted signal. The DCT family plants signed magnitudes
/// `10^(D u)` with `u` uniform, giving dynamic range up to `10^D`; the
/// Gaussian family plants standard normal values (`dynamic_range` ignored).
pub fn gen_ground_truth(
    n: usize,
    s: usize,
    family: MatrixFamily,
    dynamic_range: f64,
    rng: &mut Rng,
) -> Vector {
    let mut support_rng = rng.split(1);
    let mut sign_rng = rng.split(2);
    let mut magnitude_rng = rng.split(3);
    let support = support_rng.sample_indices(n, s);
    let mut x = vec![0.0; n];
    for &idx in &support {
        x[idx] = match family {
            MatrixFamily::OversampledDct => {
                let sign = if sign_rng.normal() < 0.0 { -1.0 } else { 1.0 };
                sign * 10f64.powf(dynamic_range * magnitude_rng.uniform())
            }
            MatrixFamily::Gaussian => magnitude_rng.normal(),
        };
    }
    x
}

/// Builds the problem of one trial: matrix, planted signal, noisy
/// measurements `b = A x_g + sigma e`, and the noise bound from the eps rule.
pub fn make_instance(spec: &ExperimentSpec, trial: usize) -> ProblemInstance {
    let mut matrix_rng = Rng::for_trial(spec.seed, trial as u64, Purpose::Matrix);
    let matrix = match spec.family {
        MatrixFamily::OversampledDct => {
            gen_dct_matrix(spec.m, spec.n, spec.coherence, &mut matrix_rng)
        }
        MatrixFamily::Gaussian => {
            gen_gaussian_matrix(spec.m, spec.n, spec.normalize_columns, &mut matrix_rng)
        }
    };
    let mut truth_rng = Rng::for_trial(spec.seed, trial as u64, Purpose::Support);
    let truth = gen_ground_truth(spec.n, spec.s, spec.family, spec.dynamic_range, &mut truth_rng);
    let mut b = matrix.matvec(&truth).expect("dimensions agree by construction");
    if spec.sigma > 0.0 {
        let mut noise_rng = Rng::for_trial(spec.seed, trial as u64, Purpose::Noise);
        for bi in b.iter_mut() {
            *bi += spec.sigma * noise_rng.normal();
        }
    }
    ProblemInstance::new(matrix, b, spec.noise_bound(), spec.ball_radius, Some(truth))
        .expect("generated instance satisfies the model invariants")
}

/// `||x_star - x_g|| / ||x_g||`; errors when the reference signal is zero.
pub fn rel_err(x_star: &[f64], x_g: &[f64]) -> Result<f64> {
    let denom = linalg::norm2(x_g);
    if denom == 0.0 {
        return Err(Error::InvalidArgument(
            "relative error undefined for a zero reference".into(),
        ));
    }
    Ok(linalg::norm2(&linalg::sub(x_star, x_g)) / denom)
}

/// `||x_star - x_g|| / max(1, ||x_g||)`.
pub fn ree_err(x_star: &[f64], x_g: &[f64]) -> f64 {
    linalg::norm2(&linalg::sub(x_star, x_g)) / linalg::norm2(x_g).max(1.0)
}

/// The error statistic of the noisy studies, `||x_star - x_g||_2`.
pub fn mse(x_star: &[f64], x_g: &[f64]) -> f64 {
    linalg::norm2(&linalg::sub(x_star, x_g))
}

/// Expected squared error of least squares restricted to the true support:
/// `sigma^2 tr((A_S^T A_S)^{-1})`.
pub fn oracle_mse(a: &DenseMatrix, support: &[usize], sigma: f64) -> Result<f64> {
    let restricted = a.select_columns(support);
    let gram = restricted.gram();
    let chol = Cholesky::factor(&gram, "oracle_mse gram")?;
    Ok(sigma * sigma * chol.trace_inverse())
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed_used: u64,
    pub rel_err: f64,
    pub ree_err: f64,
    pub mse: f64,
    pub oracle_mse: Option<f64>,
    pub success: bool,
    pub iterations: usize,
    pub termination: Termination,
    pub stationarity_residual: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub trials: usize,
    pub success_rate: f64,
    pub mean_rel_err: f64,
    pub std_rel_err: f64,
    pub mean_ree_err: f64,
    pub std_ree_err: f64,
    pub mean_mse: f64,
    pub std_mse: f64,
    pub mean_oracle_mse: Option<f64>,
    pub mean_iterations: f64,
    pub mean_wall_time_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

pub fn summarize(records: &[TrialRecord]) -> Summary {
    let trials = records.len();
    let successes = records.iter().filter(|r| r.success).count();
    let (mean_rel_err, std_rel_err) = mean_std(records.iter().map(|r| r.rel_err));
    let (mean_ree_err, std_ree_err) = mean_std(records.iter().map(|r| r.ree_err));
    let (mean_mse, std_mse) = mean_std(records.iter().map(|r| r.mse));
    let oracle: Vec<f64> = records.iter().filter_map(|r| r.oracle_mse).collect();
    let mean_oracle_mse = if oracle.len() == trials && trials > 0 {
        Some(oracle.iter().sum::<f64>() / trials as f64)
    } else {
        None
    };
    Summary {
        trials,
        success_rate: if trials == 0 {
            f64::NAN
        } else {
            successes as f64 / trials as f64
        },
        mean_rel_err,
        std_rel_err,
        mean_ree_err,
        std_ree_err,
        mean_mse,
        std_mse,
        mean_oracle_mse,
        mean_iterations: records.iter().map(|r| r.iterations as f64).sum::<f64>()
            / trials.max(1) as f64,
        mean_wall_time_ms: records.iter().map(|r| r.wall_time_ms).sum::<f64>()
            / trials.max(1) as f64,
    }
}

/// Runs one trial end to end and keeps the full solver result (traces
/// included) alongside the scored record.
///
/// The pipeline: build the instance, warm start with the l1 ADMM solution
/// (projected toward the tube when the run is noisy), solve, and score
/// against the planted signal. Solver-level argument failures are recorded
/// as `LineSearchFail` with the warm start scored instead, so a batch never
/// aborts.
pub fn run_trial_full(spec: &ExperimentSpec, trial: usize) -> (TrialRecord, SolverResult) {
    let start = Instant::now();
    let instance = make_instance(spec, trial);
    let warm = admm_l1_warm_start(
        instance.matrix(),
        instance.measurements(),
        WARM_START_WEIGHT,
        2 * spec.n,
        WARM_START_RHO,
    )
    .expect("warm-start system is positive definite");
    let x0 = if instance.noise_bound() > 0.0 {
        noisy_warm_start(&instance, &warm).unwrap_or(warm)
    } else {
        warm
    };

    let objective =
        PenaltyObjective::new(instance, spec.lambda0).expect("spec validated lambda0 > 0");
    let mut cfg = match spec.solver {
        SolverKind::Ppga => {
            SolverConfig::fixed_step(objective.lipschitz(), spec.rel_tol, spec.max_iterations())
        }
        SolverKind::PpgaMl => SolverConfig::line_search(
            objective.lipschitz(),
            0,
            spec.rel_tol,
            spec.max_iterations(),
        ),
        SolverKind::PpgaNl => SolverConfig::line_search(
            objective.lipschitz(),
            spec.window,
            spec.rel_tol,
            spec.max_iterations(),
        ),
    };
    cfg.shrink = spec.shrink;
    if spec.solver != SolverKind::Ppga {
        cfg.sufficient_decrease = spec.sufficient_decrease;
    }
    if spec.lambda_schedule_on {
        cfg = cfg.with_lambda_schedule(LambdaSchedule::default());
    }

    let solved = match spec.solver {
        SolverKind::Ppga => solve_ppga(&objective, &x0, &cfg),
        SolverKind::PpgaMl | SolverKind::PpgaNl => solve_ppga_ls(&objective, &x0, &cfg),
    };
    let result = solved.unwrap_or_else(|_| SolverResult {
        x_final: x0.clone(),
        objective_trace: vec![],
        step_trace: vec![],
        step_norm_trace: vec![],
        iterate_norm_trace: vec![],
        backtrack_trace: vec![],
        prox_case_trace: vec![],
        iterations: 0,
        termination: Termination::LineSearchFail,
        stationarity_residual: f64::NAN,
    });

    let record = record_from(spec, trial, &objective, &result, start);
    (record, result)
}

/// Runs one trial and returns only the scored record.
pub fn run_trial(spec: &ExperimentSpec, trial: usize) -> TrialRecord {
    run_trial_full(spec, trial).0
}

fn record_from(
    spec: &ExperimentSpec,
    trial: usize,
    objective: &PenaltyObjective,
    result: &SolverResult,
    start: Instant,
) -> TrialRecord {
    let truth = objective
        .problem()
        .ground_truth()
        .expect("make_instance always plants a signal");
    let rel = rel_err(&result.x_final, truth).expect("planted signals are nonzero");
    let oracle = if spec.sigma > 0.0 {
        let support: Vec<usize> = truth
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect();
        oracle_mse(objective.problem().matrix(), &support, spec.sigma).ok()
    } else {
        None
    };
    TrialRecord {
        trial,
        seed_used: Rng::stream_key(spec.seed, trial as u64, Purpose::Matrix),
        rel_err: rel,
        ree_err: ree_err(&result.x_final, truth),
        mse: mse(&result.x_final, truth),
        oracle_mse: oracle,
        success: rel <= SUCCESS_THRESHOLD,
        iterations: result.iterations,
        termination: result.termination,
        stationarity_residual: result.stationarity_residual,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Maps every trial index through `work` on up to `threads` workers; results
/// come back in trial order regardless of scheduling.
fn map_trials<T, F>(spec: &ExperimentSpec, threads: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = threads.max(1).min(spec.trials);
    if workers <= 1 {
        return (0..spec.trials).map(work).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..spec.trials).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                if t >= spec.trials {
                    break;
                }
                let value = work(t);
                slots.lock().expect("worker panicked")[t] = Some(value);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every trial index was claimed"))
        .collect()
}

fn warn_ignored_fields(spec: &ExperimentSpec) {
    if spec.family == MatrixFamily::Gaussian && spec.dynamic_range != 1.0 {
        eprintln!(
            "warning: dynamic range exponent {} is ignored for the gaussian family",
            spec.dynamic_range
        );
    }
}

/// Runs all trials sequentially.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    run_experiment_parallel(spec, 1)
}

/// Runs trials on up to `threads` workers. Records are identical to the
/// sequential run except for wall times.
pub fn run_experiment_parallel(spec: &ExperimentSpec, threads: usize) -> Result<ExperimentOutcome> {
    spec.validate()?;
    warn_ignored_fields(spec);
    let records = map_trials(spec, threads, |t| run_trial(spec, t));
    let summary = summarize(&records);
    Ok(ExperimentOutcome { records, summary })
}

/// Like [`run_experiment_parallel`] but also returns every solver result, so
/// callers can emit per-iteration traces.
pub fn run_experiment_with_traces(
    spec: &ExperimentSpec,
    threads: usize,
) -> Result<(ExperimentOutcome, Vec<SolverResult>)> {
    spec.validate()?;
    warn_ignored_fields(spec);
    let pairs = map_trials(spec, threads, |t| run_trial_full(spec, t));
    let (records, results): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    let summary = summarize(&records);
    Ok((ExperimentOutcome { records, summary }, results))
}
