//! CSV and JSON writers. Numbers are formatted locale-independently with
//! lowercase scientific notation; the same inputs always produce the same
//! bytes (wall-time columns aside, which track real time).

use std::io::Write;
use std::path::Path;

use l1l2_core::experiments::{Summary, TrialRecord};
use l1l2_core::solvers::SolverResult;

use crate::CliError;

pub fn float_field(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "nan".into()
    }
}

fn json_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "null".into()
    }
}

/// RFC 4180: quote fields containing separators, quotes or newlines.
pub fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

fn io_err(path: &Path, err: std::io::Error) -> CliError {
    CliError::Io(format!("writing {}: {err}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(contents.as_bytes()).map_err(|e| io_err(path, e))
}

pub const TRIALS_HEADER: &str =
    "trial,seed,rel_err,ree_err,mse,success,iterations,termination,wall_time_ms";

pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<(), CliError> {
    let mut out = String::from(TRIALS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.trial,
            r.seed_used,
            float_field(r.rel_err),
            float_field(r.ree_err),
            float_field(r.mse),
            r.success,
            r.iterations,
            csv_field(r.termination.label()),
            float_field(r.wall_time_ms),
        ));
    }
    write_file(path, &out)
}

pub fn write_summary_json(path: &Path, summary: &Summary) -> Result<(), CliError> {
    let oracle = summary
        .mean_oracle_mse
        .map_or("null".to_string(), json_number);
    let out = format!(
        "{{\n  \"trials\": {},\n  \"success_rate\": {},\n  \"mean_rel_err\": {},\n  \
         \"std_rel_err\": {},\n  \"mean_ree_err\": {},\n  \"std_ree_err\": {},\n  \
         \"mean_mse\": {},\n  \"std_mse\": {},\n  \"mean_oracle_mse\": {},\n  \
         \"mean_iterations\": {},\n  \"mean_wall_time_ms\": {}\n}}\n",
        summary.trials,
        json_number(summary.success_rate),
        json_number(summary.mean_rel_err),
        json_number(summary.std_rel_err),
        json_number(summary.mean_ree_err),
        json_number(summary.std_ree_err),
        json_number(summary.mean_mse),
        json_number(summary.std_mse),
        oracle,
        json_number(summary.mean_iterations),
        json_number(summary.mean_wall_time_ms),
    );
    write_file(path, &out)
}

pub fn write_sweep_csv(
    path: &Path,
    axis_key: &str,
    rows: &[(String, Summary)],
) -> Result<(), CliError> {
    let mut out = format!("{axis_key},success_rate,mean_rel_err,mean_ree_err,mean_mse,mean_iters\n");
    for (axis_value, summary) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(axis_value),
            float_field(summary.success_rate),
            float_field(summary.mean_rel_err),
            float_field(summary.mean_ree_err),
            float_field(summary.mean_mse),
            float_field(summary.mean_iterations),
        ));
    }
    write_file(path, &out)
}

pub fn write_trace_csv(path: &Path, result: &SolverResult) -> Result<(), CliError> {
    let mut out = String::from("iteration,q_lambda,alpha,prox_case\n");
    if let Some(q0) = result.objective_trace.first() {
        out.push_str(&format!("0,{},,\n", float_field(*q0)));
    }
    for k in 0..result.iterations {
        out.push_str(&format!(
            "{},{},{},{}\n",
            k + 1,
            float_field(result.objective_trace[k + 1]),
            float_field(result.step_trace[k]),
            result.prox_case_trace[k].label(),
        ));
    }
    write_file(path, &out)
}
