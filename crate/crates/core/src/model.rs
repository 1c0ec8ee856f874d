//! The penalized objective being minimized.
//!
//! For a sensing matrix `A`, measurements `b`, noise bound `eps` and ball
//! radius `d`, the objective is
//!
//! ```text
//! Q_lambda(x) = (lambda * ||x||_1 + env(Ax)) / ||x||_2    on {0 < ||x||_2 <= d},
//! Q_lambda(x) = +inf                                       elsewhere,
//! ```
//!
//! where `env(z) = 0.5 * max(0, ||z - b||_2 - eps)^2` is the Moreau envelope
//! of the indicator of the eps-ball around `b`. The envelope term is smooth
//! with gradient Lipschitz constant `||A||_2^2`, which is what the solvers
//! key their step sizes on.

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Vector};

/// Multiplicative slack when testing ball membership. Proximity steps can
/// land exactly on the sphere up to rounding; points within this slack are
/// treated as inside.
pub const BALL_TOLERANCE: f64 = 1e-12;

/// Safety factor applied on top of the power-iteration estimate of
/// `||A||_2^2`, which is a lower bound on the true value.
pub const LIPSCHITZ_SAFETY: f64 = 1.001;

/// One recovery problem: matrix, measurements, noise bound, ball radius and,
/// for synthetic experiments, the planted signal.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    matrix: DenseMatrix,
    measurements: Vector,
    noise_bound: f64,
    ball_radius: f64,
    ground_truth: Option<Vector>,
}

impl ProblemInstance {
    pub fn new(
        matrix: DenseMatrix,
        measurements: Vector,
        noise_bound: f64,
        ball_radius: f64,
        ground_truth: Option<Vector>,
    ) -> Result<Self> {
        if measurements.len() != matrix.rows() {
            return Err(Error::DimensionMismatch {
                context: "ProblemInstance::new (measurements)",
                expected: matrix.rows(),
                actual: measurements.len(),
            });
        }
        if !measurements.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(
                "measurements must be finite".into(),
            ));
        }
        if !crate::error::nonnegative(noise_bound) {
            return Err(Error::InvalidArgument(format!(
                "noise bound must be nonnegative, got {noise_bound}"
            )));
        }
        if !crate::error::positive(ball_radius) {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be positive, got {ball_radius}"
            )));
        }
        // Standing assumption: the zero signal is infeasible for the tube.
        if linalg::norm2(&measurements) <= noise_bound {
            return Err(Error::InvalidArgument(
                "||b||_2 must exceed the noise bound".into(),
            ));
        }
        if let Some(ref truth) = ground_truth {
            if truth.len() != matrix.cols() {
                return Err(Error::DimensionMismatch {
                    context: "ProblemInstance::new (ground truth)",
                    expected: matrix.cols(),
                    actual: truth.len(),
                });
            }
        }
        Ok(ProblemInstance {
            matrix,
            measurements,
            noise_bound,
            ball_radius,
            ground_truth,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn measurements(&self) -> &[f64] {
        &self.measurements
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    pub fn ground_truth(&self) -> Option<&[f64]> {
        self.ground_truth.as_deref()
    }

    pub fn dimension(&self) -> usize {
        self.matrix.cols()
    }

    /// True when `x` lies in the radius-`d` ball, up to [`BALL_TOLERANCE`].
    pub fn in_ball(&self, x: &[f64]) -> bool {
        linalg::norm2(x) <= self.ball_radius * (1.0 + BALL_TOLERANCE)
    }
}

/// The objective `Q_lambda` together with its cached Lipschitz constant.
/// Immutable; the lambda schedule in the solvers swaps whole objectives.
#[derive(Debug, Clone)]
pub struct PenaltyObjective {
    problem: ProblemInstance,
    lambda: f64,
    lipschitz: f64,
}

impl PenaltyObjective {
    /// Builds the objective, estimating `||A||_2^2` by power iteration and
    /// applying the safety factor.
    pub fn new(problem: ProblemInstance, lambda: f64) -> Result<Self> {
        let estimate = linalg::spectral_norm_sq_default(problem.matrix());
        Self::with_lipschitz(problem, lambda, LIPSCHITZ_SAFETY * estimate)
    }

    /// Builds the objective with a caller-supplied Lipschitz constant, which
    /// must dominate `||A||_2^2`.
    pub fn with_lipschitz(problem: ProblemInstance, lambda: f64, lipschitz: f64) -> Result<Self> {
        if !crate::error::positive(lambda) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !crate::error::positive(lipschitz) {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz constant must be positive, got {lipschitz}"
            )));
        }
        Ok(PenaltyObjective {
            problem,
            lambda,
            lipschitz,
        })
    }

    /// Same problem and Lipschitz constant, different smoothing weight.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        PenaltyObjective {
            problem: self.problem.clone(),
            lambda,
            lipschitz: self.lipschitz,
        }
    }

    pub fn problem(&self) -> &ProblemInstance {
        &self.problem
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `env(Ax) = 0.5 * max(0, ||Ax - b||_2 - eps)^2`, always nonnegative and
    /// exactly zero inside the tube.
    pub fn envelope_value(&self, x: &[f64]) -> f64 {
        let ax = self
            .problem
            .matrix
            .matvec(x)
            .expect("x must have the problem dimension");
        let residual_norm = residual_norm(&ax, &self.problem.measurements);
        envelope_from_residual_norm(residual_norm, self.problem.noise_bound)
    }

    /// Gradient of the envelope term: zero inside the tube, otherwise
    /// `(1 - eps / ||Ax - b||) * A^T (Ax - b)`. Continuous across the
    /// boundary.
    pub fn envelope_gradient(&self, x: &[f64]) -> Vector {
        let ax = self
            .problem
            .matrix
            .matvec(x)
            .expect("x must have the problem dimension");
        let residual = linalg::sub(&ax, &self.problem.measurements);
        self.envelope_gradient_from_residual(&residual)
    }

    pub(crate) fn envelope_gradient_from_residual(&self, residual: &[f64]) -> Vector {
        let rn = linalg::norm2(residual);
        if rn <= self.problem.noise_bound {
            return vec![0.0; self.problem.dimension()];
        }
        let factor = 1.0 - self.problem.noise_bound / rn;
        let grad = self
            .problem
            .matrix
            .matvec_t(residual)
            .expect("residual has the measurement dimension");
        linalg::scale(&grad, factor)
    }

    /// The full objective; `+inf` at zero and outside the ball.
    pub fn q_lambda(&self, x: &[f64]) -> f64 {
        let norm = linalg::norm2(x);
        if norm == 0.0 || norm > self.problem.ball_radius * (1.0 + BALL_TOLERANCE) {
            return f64::INFINITY;
        }
        (self.lambda * linalg::norm1(x) + self.envelope_value(x)) / norm
    }

    /// The ratio parameter `C = (lambda ||x||_1 + env(Ax)) / ||x||_2` driving
    /// each solver step. Always at least `lambda`. Errors outside the domain.
    pub fn ratio_parameter(&self, x: &[f64]) -> Result<f64> {
        let value = self.q_lambda(x);
        if !value.is_finite() {
            return Err(Error::InvalidArgument(
                "ratio parameter is undefined at zero or outside the ball".into(),
            ));
        }
        Ok(value)
    }

    /// Objective recomposed from a precomputed `Ax`; used by the solver loops
    /// to avoid repeating the matrix product. Matches `q_lambda` bit for bit.
    pub(crate) fn q_lambda_from_parts(&self, x: &[f64], ax: &[f64]) -> f64 {
        let norm = linalg::norm2(x);
        if norm == 0.0 || norm > self.problem.ball_radius * (1.0 + BALL_TOLERANCE) {
            return f64::INFINITY;
        }
        let rn = residual_norm(ax, &self.problem.measurements);
        let env = envelope_from_residual_norm(rn, self.problem.noise_bound);
        (self.lambda * linalg::norm1(x) + env) / norm
    }

    /// Central finite differences of [`envelope_value`]; an independent check
    /// of the analytic gradient, exposed for the gradient-check command.
    pub fn fd_envelope_gradient(&self, x: &[f64], step: f64) -> Vector {
        let mut probe = x.to_vec();
        let mut grad = vec![0.0; x.len()];
        for i in 0..x.len() {
            let xi = probe[i];
            probe[i] = xi + step;
            let plus = self.envelope_value(&probe);
            probe[i] = xi - step;
            let minus = self.envelope_value(&probe);
            probe[i] = xi;
            grad[i] = (plus - minus) / (2.0 * step);
        }
        grad
    }
}

fn residual_norm(ax: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(ax.len(), b.len());
    ax.iter()
        .zip(b)
        .map(|(a, bi)| (a - bi) * (a - bi))
        .sum::<f64>()
        .sqrt()
}

fn envelope_from_residual_norm(residual_norm: f64, eps: f64) -> f64 {
    let excess = (residual_norm - eps).max(0.0);
    0.5 * excess * excess
}
