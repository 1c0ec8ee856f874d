//! Declarative `key = value` experiment configs.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are rejected
//! so typos fail loudly before any work starts. Defaults follow the standard
//! experiment constants (lambda0 0.008, ball radius 1e7, eta 0.5, a 1e-8,
//! window 4, rel_tol 1e-8, max_iter 500 n).

use std::path::Path;

use l1l2_core::experiments::{EpsRule, ExperimentSpec, MatrixFamily, SolverKind};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Sparsity,
    Coherence,
    DynamicRange,
    Measurements,
}

impl SweepAxis {
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::Sparsity => "s",
            SweepAxis::Coherence => "coherence",
            SweepAxis::DynamicRange => "dynamic_range",
            SweepAxis::Measurements => "m",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Optional per-grid-point smoothing weights, aligned with `values`.
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct FileConfig {
    pub spec: ExperimentSpec,
    pub sweep: Option<SweepConfig>,
    pub check_draws: usize,
    pub check_seed: u64,
}

fn config_err(key: &str, detail: impl fmt::Display) -> CliError {
    CliError::Config(format!("config field `{key}`: {detail}"))
}

use std::fmt;

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str, expected: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| config_err(key, format!("expected {expected}, got `{raw}`")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(config_err(key, format!("expected true/false, got `{other}`"))),
    }
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|piece| !piece.is_empty())
        .map(|piece| parse_value::<f64>(key, piece, "a comma-separated list of numbers"))
        .collect()
}

pub fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| CliError::Config(format!("cannot read config {}: {err}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<FileConfig, CliError> {
    let mut spec = ExperimentSpec::baseline(MatrixFamily::OversampledDct, 64, 1024, 5);
    let mut axis: Option<SweepAxis> = None;
    let mut values: Option<Vec<f64>> = None;
    let mut lambdas: Option<Vec<f64>> = None;
    let mut check_draws = 1000usize;
    let mut check_seed = 1u64;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, raw)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "config line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim();
        let raw = raw.trim();
        match key {
            "matrix_family" => {
                spec.family = match raw {
                    "dct" | "oversampled_dct" => MatrixFamily::OversampledDct,
                    "gaussian" => MatrixFamily::Gaussian,
                    other => {
                        return Err(config_err(key, format!("expected dct|gaussian, got `{other}`")))
                    }
                }
            }
            "m" => spec.m = parse_value(key, raw, "a positive integer")?,
            "n" => spec.n = parse_value(key, raw, "a positive integer")?,
            "s" => spec.s = parse_value(key, raw, "a positive integer")?,
            "coherence" => spec.coherence = parse_value(key, raw, "a number")?,
            "dynamic_range" => spec.dynamic_range = parse_value(key, raw, "a number")?,
            "normalize_columns" => spec.normalize_columns = parse_bool(key, raw)?,
            "sigma" => spec.sigma = parse_value(key, raw, "a number")?,
            "eps_scale" => {
                let scale: f64 = parse_value(key, raw, "a number")?;
                spec.eps_rule = if scale == 0.0 {
                    EpsRule::Zero
                } else {
                    EpsRule::ScaledSqrtM(scale)
                };
            }
            "trials" => spec.trials = parse_value(key, raw, "a positive integer")?,
            "seed" => spec.seed = parse_value(key, raw, "an unsigned integer")?,
            "lambda0" => spec.lambda0 = parse_value(key, raw, "a number")?,
            "lambda_schedule" => spec.lambda_schedule_on = parse_bool(key, raw)?,
            "solver" => {
                spec.solver = match raw {
                    "ppga" => SolverKind::Ppga,
                    "ppga_ml" => SolverKind::PpgaMl,
                    "ppga_nl" => SolverKind::PpgaNl,
                    other => {
                        return Err(config_err(
                            key,
                            format!("expected ppga|ppga_ml|ppga_nl, got `{other}`"),
                        ))
                    }
                }
            }
            "ball_radius" => spec.ball_radius = parse_value(key, raw, "a number")?,
            "eta" => spec.shrink = parse_value(key, raw, "a number")?,
            "a" => spec.sufficient_decrease = parse_value(key, raw, "a number")?,
            "window" => spec.window = parse_value(key, raw, "a nonnegative integer")?,
            "rel_tol" => spec.rel_tol = parse_value(key, raw, "a number")?,
            "max_iter" => spec.max_iter = Some(parse_value(key, raw, "a positive integer")?),
            "sweep_axis" => {
                axis = Some(match raw {
                    "s" => SweepAxis::Sparsity,
                    "coherence" => SweepAxis::Coherence,
                    "dynamic_range" => SweepAxis::DynamicRange,
                    "m" => SweepAxis::Measurements,
                    other => {
                        return Err(config_err(
                            key,
                            format!("expected s|coherence|dynamic_range|m, got `{other}`"),
                        ))
                    }
                })
            }
            "sweep_values" => values = Some(parse_list(key, raw)?),
            "lambda_list" => lambdas = Some(parse_list(key, raw)?),
            "check_draws" => check_draws = parse_value(key, raw, "a positive integer")?,
            "check_seed" => check_seed = parse_value(key, raw, "an unsigned integer")?,
            other => {
                return Err(CliError::Config(format!(
                    "config line {}: unknown field `{other}`",
                    lineno + 1
                )))
            }
        }
    }

    let sweep = match (axis, values) {
        (Some(axis), Some(values)) => {
            if values.is_empty() {
                return Err(config_err("sweep_values", "needs at least one value"));
            }
            if matches!(axis, SweepAxis::Sparsity | SweepAxis::Measurements) {
                for v in &values {
                    if v.fract() != 0.0 || *v < 1.0 {
                        return Err(config_err(
                            "sweep_values",
                            format!("axis `{}` needs positive integers, got {v}", axis.key()),
                        ));
                    }
                }
            }
            if let Some(ref l) = lambdas {
                if l.len() != values.len() {
                    return Err(config_err(
                        "lambda_list",
                        format!("has {} entries but sweep_values has {}", l.len(), values.len()),
                    ));
                }
            }
            Some(SweepConfig {
                axis,
                values,
                lambdas,
            })
        }
        (None, None) => None,
        (Some(_), None) => return Err(config_err("sweep_values", "required when sweep_axis is set")),
        (None, Some(_)) => return Err(config_err("sweep_axis", "required when sweep_values is set")),
    };

    Ok(FileConfig {
        spec,
        sweep,
        check_draws,
        check_seed,
    })
}

/// Grid-point spec for one sweep value.
pub fn apply_axis(spec: &ExperimentSpec, sweep: &SweepConfig, index: usize) -> ExperimentSpec {
    let mut point = spec.clone();
    let value = sweep.values[index];
    match sweep.axis {
        SweepAxis::Sparsity => point.s = value as usize,
        SweepAxis::Coherence => point.coherence = value,
        SweepAxis::DynamicRange => point.dynamic_range = value,
        SweepAxis::Measurements => point.m = value as usize,
    }
    if let Some(ref lambdas) = sweep.lambdas {
        point.lambda0 = lambdas[index];
    }
    point
}
