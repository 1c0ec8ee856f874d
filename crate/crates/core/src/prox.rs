//! Closed-form proximity operators.
//!
//! The solver subproblem is, for `beta = alpha * lambda` and
//! `gamma = C / lambda`,
//!
//! ```text
//! prox(y) = argmin { ||x||_1 - gamma ||x||_2 + (1/(2 beta)) ||x - y||_2^2 : ||x||_2 <= d }
//! ```
//!
//! which splits into four regimes by comparing `||y||_inf` against `beta` and
//! `(1 - gamma) beta`. The operator is set-valued on the boundary regimes;
//! [`prox_rho`] returns a deterministic representative and reports which case
//! fired so callers can detect the set-valued branches.
//!
//! [`prox_oracle`] solves the same problem numerically for small dimensions.
//! It shares no formulas with the closed form and exists to validate it.

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};

/// Parameters of one proximity subproblem.
#[derive(Debug, Clone, Copy)]
pub struct ProxParams {
    /// Quadratic weight `beta = alpha * lambda`.
    pub beta: f64,
    /// Norm-ratio weight `gamma = C / lambda`; at least 1 in solver context.
    pub gamma: f64,
    /// Ball radius `d`.
    pub radius: f64,
}

impl ProxParams {
    pub fn new(beta: f64, gamma: f64, radius: f64) -> Result<Self> {
        if !(crate::error::positive(beta) && crate::error::positive(gamma) && crate::error::positive(radius)) {
            return Err(Error::InvalidArgument(format!(
                "prox parameters must be positive: beta={beta}, gamma={gamma}, radius={radius}"
            )));
        }
        Ok(ProxParams {
            beta,
            gamma,
            radius,
        })
    }
}

/// Which analytic branch produced the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxCase {
    /// `||y||_inf > beta`: scaled soft threshold.
    One,
    /// `||y||_inf = beta`: set-valued; mass on one maximal coordinate.
    Two,
    /// `(1 - gamma) beta < ||y||_inf < beta`: one-sparse.
    Three,
    /// `||y||_inf <= (1 - gamma) beta`: zero.
    Four,
}

impl ProxCase {
    pub fn label(self) -> &'static str {
        match self {
            ProxCase::One => "I",
            ProxCase::Two => "II",
            ProxCase::Three => "III",
            ProxCase::Four => "IV",
        }
    }
}

impl std::fmt::Display for ProxCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Result of a prox evaluation: the representative minimizer plus which case
/// fired and, for the one-sparse branches, the chosen coordinate.
#[derive(Debug, Clone)]
pub struct ProxSelection {
    pub case: ProxCase,
    pub selected_index: Option<usize>,
    pub result: Vector,
}

/// Componentwise soft thresholding.
pub fn soft_threshold(y: &[f64], alpha: f64) -> Vector {
    debug_assert!(alpha >= 0.0);
    y.iter()
        .map(|&v| {
            if v > alpha {
                v - alpha
            } else if v < -alpha {
                v + alpha
            } else {
                0.0
            }
        })
        .collect()
}

fn argmax_abs(y: &[f64]) -> usize {
    let mut best = 0;
    let mut best_abs = y[0].abs();
    for (i, &v) in y.iter().enumerate().skip(1) {
        if v.abs() > best_abs {
            best = i;
            best_abs = v.abs();
        }
    }
    best
}

/// The subproblem objective `||x||_1 - gamma ||x||_2 + ||x - y||^2 / (2 beta)`.
/// Callers are responsible for feasibility of `x`.
pub fn rho_objective(y: &[f64], params: &ProxParams, x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    linalg::norm1(x) - params.gamma * linalg::norm2(x)
        + linalg::dot(
            &linalg::sub(x, y),
            &linalg::sub(x, y),
        ) / (2.0 * params.beta)
}

/// Deterministic member of the prox set.
///
/// Branch order: the zero case is tested first, then the soft-threshold case,
/// then the two boundary cases; the comparisons are exact floating-point
/// predicates, which makes the classifier total. Ties between coordinates of
/// maximal magnitude resolve to the lowest index; a zero coordinate takes
/// positive sign. With `gamma >= 1` the output is nonzero whenever `y` is
/// nonzero or `gamma > 1`.
pub fn prox_rho(y: &[f64], params: &ProxParams) -> ProxSelection {
    let ProxParams {
        beta,
        gamma,
        radius,
    } = *params;
    let n = y.len();
    let y_max = linalg::norm_inf(y);

    if y_max <= (1.0 - gamma) * beta {
        return ProxSelection {
            case: ProxCase::Four,
            selected_index: None,
            result: vec![0.0; n],
        };
    }

    if y_max > beta {
        let z = soft_threshold(y, beta);
        let zn = linalg::norm2(&z);
        let target_norm = if zn <= radius - beta * gamma {
            zn + beta * gamma
        } else {
            radius
        };
        return ProxSelection {
            case: ProxCase::One,
            selected_index: None,
            result: linalg::scale(&z, target_norm / zn),
        };
    }

    // Boundary and interior one-sparse branches put all mass on the first
    // coordinate of maximal magnitude.
    let idx = argmax_abs(y);
    let (case, magnitude) = if y_max == beta {
        (ProxCase::Two, (beta * gamma).min(radius))
    } else {
        (ProxCase::Three, (y_max + (gamma - 1.0) * beta).min(radius))
    };
    let mut result = vec![0.0; n];
    result[idx] = if y[idx] < 0.0 { -magnitude } else { magnitude };
    ProxSelection {
        case,
        selected_index: Some(idx),
        result,
    }
}

/// Random subproblem for consistency checks, optionally aimed at one branch
/// of the closed form. Dimensions stay within the oracle's reach (n <= 3);
/// `beta` is log-uniform on [0.01, 5], `gamma` on [0.1, 10], the radius
/// uniform on [0.5, 20], and the peak magnitude of `y` is placed to land in
/// the requested regime.
pub fn sample_subproblem(target: Option<ProxCase>, rng: &mut crate::rng::Rng) -> (Vector, ProxParams) {
    let geometric = |rng: &mut crate::rng::Rng, lo: f64, hi: f64| lo * (hi / lo).powf(rng.uniform());
    loop {
        let n = 1 + rng.below(3);
        let beta = geometric(rng, 0.01, 5.0);
        let radius = 0.5 + 19.5 * rng.uniform();
        let (gamma, peak) = match target {
            None => {
                let gamma = geometric(rng, 0.1, 10.0);
                let y: Vector = (0..n).map(|_| 3.0 * beta * rng.normal()).collect();
                let params = ProxParams::new(beta, gamma, radius).expect("positive by construction");
                return (y, params);
            }
            Some(ProxCase::One) => (
                geometric(rng, 0.1, 10.0),
                beta * (1.05 + 2.0 * rng.uniform()),
            ),
            Some(ProxCase::Two) => (geometric(rng, 0.1, 10.0), beta),
            Some(ProxCase::Three) => {
                let gamma = geometric(rng, 0.1, 10.0);
                let lo = ((1.0 - gamma) * beta).max(0.0);
                let peak = lo + (0.05 + 0.9 * rng.uniform()) * (beta - lo);
                if !(peak > lo && peak < beta) {
                    continue;
                }
                (gamma, peak)
            }
            Some(ProxCase::Four) => {
                let gamma = 0.1 + 0.8 * rng.uniform();
                (gamma, (1.0 - gamma) * beta * 0.95 * rng.uniform())
            }
        };
        let spike = rng.below(n);
        let mut y = vec![0.0; n];
        for (i, slot) in y.iter_mut().enumerate() {
            if i != spike {
                *slot = (2.0 * rng.uniform() - 1.0) * 0.9 * peak;
            }
        }
        y[spike] = if rng.uniform() < 0.5 { -peak } else { peak };
        let params = ProxParams::new(beta, gamma, radius).expect("positive by construction");
        return (y, params);
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization on [lo, hi]; assumes the bracket contains the
/// minimum of a function that is unimodal there.
fn golden_min(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    if f1 < fm && f1 <= f2 {
        (x1, f1)
    } else if f2 < fm {
        (x2, f2)
    } else {
        (mid, fm)
    }
}

/// Scan `points` grid values on [lo, hi], then golden-refine around the best.
fn grid_then_golden(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    debug_assert!(points >= 3);
    let step = (hi - lo) / (points - 1) as f64;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..points {
        let v = f(lo + i as f64 * step);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let c = lo + best_i as f64 * step;
    golden_min(f, (c - step).max(lo), (c + step).min(hi), 80)
}

/// Unit direction with nonnegative entries minimizing `<w, c>`, found by a
/// numeric search over spherical angles (no use of the analytic solution).
fn best_direction(c: &[f64], grid: usize) -> Vec<f64> {
    match c.len() {
        1 => vec![1.0],
        2 => {
            let f = |theta: f64| c[0] * theta.cos() + c[1] * theta.sin();
            let (theta, _) = grid_then_golden(f, 0.0, std::f64::consts::FRAC_PI_2, grid);
            vec![theta.cos(), theta.sin()]
        }
        len => {
            // len - 1 spherical angles on the nonnegative patch.
            let angles_dim = len - 1;
            let assemble = |angles: &[f64]| {
                let mut w = vec![0.0; len];
                let mut sin_prod = 1.0;
                for (k, &a) in angles.iter().enumerate() {
                    w[k] = sin_prod * a.cos();
                    sin_prod *= a.sin();
                }
                w[len - 1] = sin_prod;
                w
            };
            let score = |angles: &[f64]| linalg::dot(&assemble(angles), c);

            // Coarse dense grid.
            let g = if angles_dim == 2 { grid.min(150) } else { grid.min(36) };
            let step = std::f64::consts::FRAC_PI_2 / (g - 1) as f64;
            let mut best_angles = vec![0.0; angles_dim];
            let mut best_score = f64::INFINITY;
            let mut counter = vec![0usize; angles_dim];
            loop {
                let angles: Vec<f64> = counter.iter().map(|&i| i as f64 * step).collect();
                let s = score(&angles);
                if s < best_score {
                    best_score = s;
                    best_angles = angles;
                }
                // Odometer increment.
                let mut dim = 0;
                loop {
                    counter[dim] += 1;
                    if counter[dim] < g {
                        break;
                    }
                    counter[dim] = 0;
                    dim += 1;
                    if dim == angles_dim {
                        break;
                    }
                }
                if dim == angles_dim {
                    break;
                }
            }

            // Cyclic golden refinement around the grid winner.
            let mut width = step;
            for _round in 0..8 {
                for k in 0..angles_dim {
                    let others = best_angles.clone();
                    let f = |a: f64| {
                        let mut angles = others.clone();
                        angles[k] = a;
                        score(&angles)
                    };
                    let lo = (best_angles[k] - width).max(0.0);
                    let hi = (best_angles[k] + width).min(std::f64::consts::FRAC_PI_2);
                    let (a, s) = golden_min(f, lo, hi, 60);
                    if s < best_score {
                        best_score = s;
                        best_angles[k] = a;
                    }
                }
                width *= 0.5;
            }
            assemble(&best_angles)
        }
    }
}

/// Brute-force global minimizer of the prox subproblem for `y.len() <= 4`.
///
/// Sign agreement and magnitude ordering let the search run over magnitudes
/// only: for every support pattern the objective restricted to `x = t * w`
/// (with `w` a unit direction on the pattern) is linear in the direction for
/// each fixed norm `t`, so the direction can be found once per pattern and
/// the norm by a grid-plus-golden-section scan over `[0, d]`. Objective
/// accuracy is about 1e-9 on the scales exercised here.
pub fn prox_oracle(y: &[f64], params: &ProxParams, grid: usize) -> Result<Vector> {
    let n = y.len();
    if n > 4 {
        return Err(Error::InvalidArgument(format!(
            "prox_oracle supports dimension <= 4, got {n}"
        )));
    }
    if grid < 200 {
        return Err(Error::InvalidArgument(format!(
            "prox_oracle grid must be at least 200, got {grid}"
        )));
    }
    let magnitudes: Vector = y.iter().map(|v| v.abs()).collect();
    let signs: Vector = y
        .iter()
        .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
        .collect();

    let mut best_x = vec![0.0; n];
    let mut best_val = rho_objective(y, params, &best_x);

    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        // Reduced linear coefficients: the objective at x = t * w equals
        // t^2/(2 beta) + t (<w, c> - gamma) + const with c_i = 1 - |y_i|/beta.
        let c: Vector = support
            .iter()
            .map(|&i| 1.0 - magnitudes[i] / params.beta)
            .collect();
        let w = best_direction(&c, grid);

        let assemble = |t: f64| {
            let mut x = vec![0.0; n];
            for (&i, &wi) in support.iter().zip(&w) {
                x[i] = signs[i] * t * wi;
            }
            x
        };
        let value_at = |t: f64| rho_objective(y, params, &assemble(t));
        let (t_best, val) = grid_then_golden(value_at, 0.0, params.radius, grid);
        if val < best_val {
            best_val = val;
            best_x = assemble(t_best);
        }
    }
    Ok(best_x)
}
