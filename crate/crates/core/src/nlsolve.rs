//! Damped Newton root finding with a central-difference Jacobian.
//!
//! The merit function is `½‖F‖₂²`. Steps are backtracked (halving) until the
//! Armijo condition holds; trial points where `F` reports a domain error are
//! treated as having infinite merit. Linear systems are solved by Gaussian
//! elimination with partial pivoting; a single Levenberg-regularised solve is
//! attempted when elimination meets a negligible pivot.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative pivot magnitude below which a matrix is treated as singular.
pub const PIVOT_TOL: f64 = 1e-14;

/// Regularisation used by the one-shot Levenberg fallback, relative to the
/// largest diagonal entry of `JᵀJ`.
const LEVENBERG_DAMPING: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Convergence threshold on `‖F‖∞`.
    pub residual_tol: f64,
    /// Base finite-difference step; coordinate `j` uses `fd_step·(1+|xⱼ|)`.
    pub fd_step: f64,
    pub armijo_c: f64,
    /// Smallest line-search fraction tried before giving up.
    pub min_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 200,
            residual_tol: 1e-9,
            fd_step: 1e-6,
            armijo_c: 1e-4,
            min_step: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidParams("max_iters must be at least 1".into()));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParams("residual_tol must be positive".into()));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::InvalidParams("fd_step must be positive".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidParams("armijo_c must lie in (0, 1)".into()));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::InvalidParams("min_step must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The line search shrank below `min_step` without an acceptable point.
    StepCollapse,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "maximum iterations reached",
            Termination::StepCollapse => "line search step collapsed",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub residual_inf_norm: f64,
    /// Number of Newton steps taken.
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// `‖F‖∞` at the start of every iteration, plus the final value.
    pub history: Vec<f64>,
    /// `½‖F‖₂²` alongside `history`.
    pub merit_history: Vec<f64>,
    /// Iterations whose Jacobian stencil crossed a kink of `F`.
    pub nonsmooth_iterations: Vec<usize>,
    /// Iterations that fell back to the Levenberg-regularised step.
    pub levenberg_iterations: Vec<usize>,
}

/// A square residual map `Rⁿ → Rⁿ`.
pub trait Residual {
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Whether `F` is non-differentiable somewhere on the box `x ± steps`.
    fn stencil_is_nonsmooth(&self, _x: &[f64], _steps: &[f64]) -> bool {
        false
    }
}

impl<F> Residual for F
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self(x)
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBreakdown(format!("non-finite {what}")))
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn merit(v: &[f64]) -> f64 {
    0.5 * v.iter().map(|x| x * x).sum::<f64>()
}

/// Central-difference Jacobian with a uniform step.
pub fn numerical_jacobian<R: Residual + ?Sized>(
    f: &R,
    x: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    let steps = vec![step; x.len()];
    jacobian_with_steps(f, x, &steps)
}

/// Central-difference Jacobian with a per-coordinate step.
pub fn jacobian_with_steps<R: Residual + ?Sized>(
    f: &R,
    x: &[f64],
    steps: &[f64],
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac: Option<DMatrix<f64>> = None;
    let mut probe = x.to_vec();
    for j in 0..n {
        let (hi, lo) = (x[j] + steps[j], x[j] - steps[j]);
        // divide by the spacing actually representable, not the nominal 2h
        let width = hi - lo;
        probe[j] = hi;
        let fp = f.eval(&probe)?;
        probe[j] = lo;
        let fm = f.eval(&probe)?;
        probe[j] = x[j];
        check_finite(&fp, "residual on Jacobian stencil")?;
        check_finite(&fm, "residual on Jacobian stencil")?;
        let m = jac.get_or_insert_with(|| DMatrix::zeros(fp.len(), n));
        for i in 0..fp.len() {
            m[(i, j)] = (fp[i] - fm[i]) / width;
        }
    }
    Ok(jac.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

/// Gaussian elimination with partial pivoting. Returns the offending pivot on
/// failure.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> std::result::Result<DVector<f64>, f64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "solve_dense needs a square matrix");
    let mut m = a.clone();
    let mut rhs = b.clone();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv_row, piv) = (col..n)
            .map(|r| (r, m[(r, col)]))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        if !(piv.abs() > PIVOT_TOL * scale) {
            return Err(piv);
        }
        if piv_row != col {
            m.swap_rows(piv_row, col);
            rhs.swap_rows(piv_row, col);
        }
        for r in col + 1..n {
            let factor = m[(r, col)] / m[(col, col)];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                m[(r, c)] -= factor * m[(col, c)];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = DVector::zeros(n);
    for r in (0..n).rev() {
        let mut acc = rhs[r];
        for c in r + 1..n {
            acc -= m[(r, c)] * x[c];
        }
        x[r] = acc / m[(r, r)];
    }
    Ok(x)
}

fn levenberg_step(jac: &DMatrix<f64>, r: &DVector<f64>) -> std::result::Result<DVector<f64>, f64> {
    let jtj = jac.transpose() * jac;
    let diag_max = jtj.diagonal().amax();
    if !(diag_max > 0.0) {
        return Err(0.0);
    }
    let lambda = LEVENBERG_DAMPING * diag_max;
    let lhs = jtj + DMatrix::identity(jac.ncols(), jac.ncols()) * lambda;
    let rhs = -(jac.transpose() * r);
    solve_dense(&lhs, &rhs)
}

/// Damped Newton iteration from `x0`.
///
/// Returns `Ok` with `converged == false` when the iteration budget runs out
/// or the line search collapses; hard failures (singular Jacobian after the
/// Levenberg retry, non-finite values, `F` undefined at `x0`) are errors.
pub fn newton_solve<R: Residual + ?Sized>(
    f: &R,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let mut x = x0.to_vec();
    let mut r = f.eval(&x)?;
    check_finite(&r, "residual at the initial point")?;
    if r.len() != x.len() {
        return Err(Error::InvalidParams(format!(
            "residual has {} components for {} unknowns",
            r.len(),
            x.len()
        )));
    }

    let mut history = Vec::new();
    let mut merit_history = Vec::new();
    let mut nonsmooth = Vec::new();
    let mut levenberg = Vec::new();
    let mut iterations = 0;
    let termination = loop {
        let norm = inf_norm(&r);
        history.push(norm);
        merit_history.push(merit(&r));
        if norm <= cfg.residual_tol {
            break Termination::Converged;
        }
        if iterations >= cfg.max_iters {
            break Termination::MaxIterations;
        }

        let steps: Vec<f64> = x.iter().map(|xj| cfg.fd_step * (1.0 + xj.abs())).collect();
        if f.stencil_is_nonsmooth(&x, &steps) {
            nonsmooth.push(iterations);
        }
        let jac = jacobian_with_steps(f, &x, &steps)?;
        let rv = DVector::from_column_slice(&r);
        let dir = match solve_dense(&jac, &(-&rv)) {
            Ok(p) => p,
            Err(_) => {
                levenberg.push(iterations);
                levenberg_step(&jac, &rv).map_err(|pivot| Error::SingularJacobian {
                    iteration: iterations,
                    pivot,
                })?
            }
        };
        check_finite(dir.as_slice(), "Newton direction")?;

        let phi = merit(&r);
        let slope = rv.dot(&(&jac * &dir));
        if !(slope < 0.0) {
            // stationary point of the merit that is not a root
            break Termination::StepCollapse;
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t >= cfg.min_step {
            let trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, p)| a + t * p).collect();
            if let Ok(rt) = f.eval(&trial) {
                if rt.iter().all(|v| v.is_finite()) {
                    let phi_t = merit(&rt);
                    if phi_t <= phi + cfg.armijo_c * t * slope && phi_t <= phi {
                        accepted = Some((trial, rt));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((xt, rt)) => {
                x = xt;
                r = rt;
                iterations += 1;
            }
            None => break Termination::StepCollapse,
        }
    };

    let residual_inf_norm = inf_norm(&r);
    Ok(SolveReport {
        x,
        residual_inf_norm,
        iterations,
        converged: termination == Termination::Converged,
        termination,
        history,
        merit_history,
        nonsmooth_iterations: nonsmooth,
        levenberg_iterations: levenberg,
    })
}
