//! Solving a [`RunConfig`] and writing its outputs.
//!
//! Files written into the output directory, for a run named `NAME`:
//!
//! * `NAME_trajectory.csv`: `k,theta,v,u,d,zeta,xi`, one row per stage
//!   `0..=N` with `θ` in `[0, 2π)`; stage `N` has no inputs or covectors.
//! * `NAME_covectors.csv`: `k,zeta,xi,zeta_min,xi_min,zeta_max,xi_max`, the
//!   combined covectors beside those of the two one-sided problems.
//! * `NAME_report.json`: status, residual, iterations and, when requested,
//!   the certificates.
//!
//! Numbers are written with 17 significant digits.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Emit, RunConfig};
use crate::error::Error;
use crate::lq_game::{lq_trajectory, max_delta, riccati_recursion};
use crate::nlsolve::SolveReport;
use crate::saddle::HessianReport;
use crate::spacecraft::{simulate, unwinding_profile, TrajectorySolution, UnwindingProfile};

/// Outcome class of a run, also the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Success,
    NotConverged,
    CertificateFailed,
    SolverFailure,
    InvalidConfig,
    IOFailure,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::NotConverged => 2,
            RunStatus::CertificateFailed => 3,
            RunStatus::SolverFailure => 4,
            RunStatus::InvalidConfig => 5,
            RunStatus::IOFailure => 6,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalSummary {
    pub passed: bool,
    /// Largest `|∂_u H|` and `|∂_d H|` over all stages.
    pub max_grad_u: f64,
    pub max_grad_d: f64,
    pub failing_stages: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubproblemSummary {
    pub passed: bool,
    pub negation_error: f64,
    pub combined_error: f64,
    pub supplied_error: Option<f64>,
    pub zero_multiplier_vanishes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub variational: VariationalSummary,
    pub subproblem: SubproblemSummary,
    pub saddle: HessianReport,
}

/// Machine-readable summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub name: String,
    pub status: RunStatus,
    pub exit_code: i32,
    pub guess: String,
    pub converged: bool,
    pub residual_inf: Option<f64>,
    pub iterations: Option<usize>,
    pub termination: Option<String>,
    pub message: Option<String>,
    pub theta_final: Option<f64>,
    pub nonsmooth_iterations: Vec<usize>,
    pub unwinding: Option<UnwindingProfile>,
    pub certificates: Option<CertificateSummary>,
    pub lq_oracle_max_delta: Option<f64>,
}

/// Report plus the paths of every file written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: RunReport,
    pub solution: Option<TrajectorySolution>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.report.status.exit_code()
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `θ` mapped into `[0, 2π)`.
pub fn counterclockwise(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

pub fn trajectory_csv(sol: &TrajectorySolution) -> String {
    let n = sol.horizon();
    let mut out = String::from("k,theta,v,u,d,zeta,xi\n");
    for k in 0..=n {
        let _ = write!(out, "{k},{},{}", fmt_num(counterclockwise(sol.theta[k])), fmt_num(sol.v[k]));
        if k < n {
            let _ = write!(
                out,
                ",{},{},{},{}",
                fmt_num(sol.u[k]),
                fmt_num(sol.d[k]),
                fmt_num(sol.zeta[k]),
                fmt_num(sol.xi[k])
            );
        } else {
            out.push_str(",,,,");
        }
        out.push('\n');
    }
    out
}

pub fn covectors_csv(sol: &TrajectorySolution) -> String {
    let mut out = String::from("k,zeta,xi,zeta_min,xi_min,zeta_max,xi_max\n");
    let sub = sol.certificates.as_ref().map(|c| &c.subproblem);
    for k in 0..sol.horizon() {
        let _ = write!(out, "{k},{},{}", fmt_num(sol.zeta[k]), fmt_num(sol.xi[k]));
        match sub {
            Some(s) => {
                let _ = write!(
                    out,
                    ",{},{},{},{}",
                    fmt_num(s.min_covectors[k].zeta),
                    fmt_num(s.min_covectors[k].xi),
                    fmt_num(s.max_covectors[k].zeta),
                    fmt_num(s.max_covectors[k].xi)
                );
            }
            None => out.push_str(",,,,"),
        }
        out.push('\n');
    }
    out
}

fn summarize(sol: &TrajectorySolution) -> Option<CertificateSummary> {
    let c = sol.certificates.as_ref()?;
    let failing_stages = c
        .variational
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.k)
        .collect();
    let fold = |f: fn(&crate::pmp::VariationalReport) -> f64| {
        c.variational.iter().map(f).fold(0.0f64, |m, x| m.max(x.abs()))
    };
    Some(CertificateSummary {
        variational: VariationalSummary {
            passed: c.variational_passed(),
            max_grad_u: fold(|r| r.grad_u),
            max_grad_d: fold(|r| r.grad_d),
            failing_stages,
        },
        subproblem: SubproblemSummary {
            passed: c.subproblem.passed(),
            negation_error: c.subproblem.negation_error,
            combined_error: c.subproblem.combined_error,
            supplied_error: c.subproblem.supplied_error,
            zero_multiplier_vanishes: c.subproblem.zero_multiplier_vanishes,
        },
        saddle: c.saddle,
    })
}

fn empty_report(cfg: &RunConfig, status: RunStatus, message: Option<String>) -> RunReport {
    RunReport {
        name: cfg.name.clone(),
        status,
        exit_code: status.exit_code(),
        guess: cfg.guess.to_string(),
        converged: false,
        residual_inf: None,
        iterations: None,
        termination: None,
        message,
        theta_final: None,
        nonsmooth_iterations: Vec::new(),
        unwinding: None,
        certificates: None,
        lq_oracle_max_delta: None,
    }
}

fn failed_solve(cfg: &RunConfig, status: RunStatus, report: &SolveReport, msg: String) -> RunReport {
    RunReport {
        residual_inf: Some(report.residual_inf_norm),
        iterations: Some(report.iterations),
        termination: Some(report.termination.to_string()),
        nonsmooth_iterations: report.nonsmooth_iterations.clone(),
        ..empty_report(cfg, status, Some(msg))
    }
}

/// Solves `cfg` and builds the report without touching the filesystem.
pub fn solve(cfg: &RunConfig) -> (RunReport, Option<TrajectorySolution>) {
    let params = &cfg.params;
    if let Err(e) = params.validate().and_then(|_| cfg.solver.validate()) {
        return (empty_report(cfg, RunStatus::InvalidConfig, Some(e.to_string())), None);
    }
    let guess = cfg.guess.resolve(params);
    let sol = match simulate(params, &guess, &cfg.solver) {
        Ok(sol) => sol,
        Err(Error::NotConverged(rep)) => {
            let msg = format!("solver did not converge: {}", rep.termination);
            return (failed_solve(cfg, RunStatus::NotConverged, &rep, msg), None);
        }
        Err(e @ Error::InvalidParams(_)) => {
            return (empty_report(cfg, RunStatus::InvalidConfig, Some(e.to_string())), None);
        }
        Err(e) => return (empty_report(cfg, RunStatus::SolverFailure, Some(e.to_string())), None),
    };
    let certified = sol.certified();
    let status = if certified {
        RunStatus::Success
    } else {
        RunStatus::CertificateFailed
    };
    let lq_oracle_max_delta = if params.psi == 0.0 && !params.is_constrained() {
        riccati_recursion(params)
            .and_then(|seqs| lq_trajectory(params, &seqs))
            .ok()
            .map(|lq| max_delta(&sol, &lq))
    } else {
        None
    };
    let report = RunReport {
        converged: true,
        residual_inf: Some(sol.residual_inf),
        iterations: Some(sol.iterations),
        termination: Some("converged".into()),
        theta_final: sol.theta.last().map(|t| counterclockwise(*t)),
        nonsmooth_iterations: sol.nonsmooth_iterations.clone(),
        unwinding: Some(unwinding_profile(&sol.theta)),
        certificates: if cfg.emit.contains(&Emit::Certificates) {
            summarize(&sol)
        } else {
            None
        },
        lq_oracle_max_delta,
        ..empty_report(cfg, status, None)
    };
    (report, Some(sol))
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn write_outputs(
    dir: &Path,
    cfg: &RunConfig,
    report: &RunReport,
    sol: Option<&TrajectorySolution>,
) -> Result<Vec<PathBuf>, String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut files = Vec::new();
    if let Some(sol) = sol {
        if cfg.emit.contains(&Emit::Trajectory) {
            let p = dir.join(format!("{}_trajectory.csv", cfg.name));
            write_file(&p, &trajectory_csv(sol))?;
            files.push(p);
        }
        if cfg.emit.contains(&Emit::Covectors) {
            let p = dir.join(format!("{}_covectors.csv", cfg.name));
            write_file(&p, &covectors_csv(sol))?;
            files.push(p);
        }
    }
    let p = dir.join(format!("{}_report.json", cfg.name));
    let mut json = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    json.push('\n');
    write_file(&p, &json)?;
    files.push(p);
    Ok(files)
}

/// Solves `cfg` and writes its outputs into `out_dir` (or the configured
/// `output_path`).
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> RunOutcome {
    let dir = out_dir.map_or_else(|| PathBuf::from(&cfg.output_path), Path::to_path_buf);
    let (report, solution) = solve(cfg);
    match write_outputs(&dir, cfg, &report, solution.as_ref()) {
        Ok(files) => RunOutcome {
            report,
            solution,
            files,
        },
        Err(msg) => RunOutcome {
            report: RunReport {
                status: RunStatus::IOFailure,
                exit_code: RunStatus::IOFailure.exit_code(),
                message: Some(msg),
                ..report
            },
            solution,
            files: Vec::new(),
        },
    }
}
