//! The maximum principle for systems on `Rⁿ`, where the group is trivial:
//! `v_{k+1} = F(v_k, u_k, d_k)` with `H = -c_k + ⟨ξ, F⟩`,
//! `ξᵏ⁻¹ = ∇_v H(γ_k)` and `ξᴺ⁻¹ = -∇c_N(v_N)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pmp::{Interval, FD_STEP};

fn fd_step(x: f64) -> f64 {
    FD_STEP * (1.0 + x.abs())
}

fn scalar_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> DVector<f64> {
    let mut p = x.to_vec();
    DVector::from_fn(x.len(), |j, _| {
        let h = fd_step(x[j]);
        p[j] = x[j] + h;
        let hi = f(&p);
        p[j] = x[j] - h;
        let lo = f(&p);
        p[j] = x[j];
        (hi - lo) / (2.0 * h)
    })
}

fn vector_jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, x: &[f64], rows: usize) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(rows, x.len());
    let mut p = x.to_vec();
    for j in 0..x.len() {
        let h = fd_step(x[j]);
        p[j] = x[j] + h;
        let hi = f(&p);
        p[j] = x[j] - h;
        let lo = f(&p);
        p[j] = x[j];
        for i in 0..rows {
            jac[(i, j)] = (hi[i] - lo[i]) / (2.0 * h);
        }
    }
    jac
}

/// A discrete-time system on `Rⁿ` with inputs in `Rᵐ` and `Rᵖ`.
///
/// Gradient methods default to central differences.
pub trait EuclidModel {
    fn horizon(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn dynamics(&self, v: &[f64], u: &[f64], d: &[f64]) -> Vec<f64>;
    fn stage_cost(&self, k: usize, v: &[f64], u: &[f64], d: &[f64]) -> f64;
    fn terminal_cost(&self, v: &[f64]) -> f64;

    fn dynamics_jacobian_v(&self, v: &[f64], u: &[f64], d: &[f64]) -> DMatrix<f64> {
        vector_jacobian(|x| self.dynamics(x, u, d), v, self.state_dim())
    }
    fn dynamics_jacobian_u(&self, v: &[f64], u: &[f64], d: &[f64]) -> DMatrix<f64> {
        vector_jacobian(|x| self.dynamics(v, x, d), u, self.state_dim())
    }
    fn dynamics_jacobian_d(&self, v: &[f64], u: &[f64], d: &[f64]) -> DMatrix<f64> {
        vector_jacobian(|x| self.dynamics(v, u, x), d, self.state_dim())
    }
    fn cost_gradient_v(&self, k: usize, v: &[f64], u: &[f64], d: &[f64]) -> DVector<f64> {
        scalar_gradient(|x| self.stage_cost(k, x, u, d), v)
    }
    fn cost_gradient_u(&self, k: usize, v: &[f64], u: &[f64], d: &[f64]) -> DVector<f64> {
        scalar_gradient(|x| self.stage_cost(k, v, x, d), u)
    }
    fn cost_gradient_d(&self, k: usize, v: &[f64], u: &[f64], d: &[f64]) -> DVector<f64> {
        scalar_gradient(|x| self.stage_cost(k, v, u, x), d)
    }
    fn terminal_gradient(&self, v: &[f64]) -> DVector<f64> {
        scalar_gradient(|x| self.terminal_cost(x), v)
    }
}

/// Backward covector sweep; entry `k` is `ξᵏ`.
pub fn euclid_adjoint_pass<M: EuclidModel + ?Sized>(
    model: &M,
    v: &[Vec<f64>],
    u: &[Vec<f64>],
    d: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let n = model.horizon();
    if n == 0 || v.len() != n + 1 || u.len() != n || d.len() != n {
        return Err(Error::InvalidParams("trajectory length does not match the horizon".into()));
    }
    let mut xi = vec![DVector::zeros(model.state_dim()); n];
    xi[n - 1] = -model.terminal_gradient(&v[n]);
    for k in (1..n).rev() {
        let fv = model.dynamics_jacobian_v(&v[k], &u[k], &d[k]);
        xi[k - 1] = -model.cost_gradient_v(k, &v[k], &u[k], &d[k]) + fv.transpose() * &xi[k];
    }
    Ok(xi.into_iter().map(|x| x.iter().copied().collect()).collect())
}

/// Per-coordinate verdicts of the box saddle condition at one stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EuclidVariationalReport {
    pub k: usize,
    pub grad_u: Vec<f64>,
    pub grad_d: Vec<f64>,
    pub u_ok: Vec<bool>,
    pub d_ok: Vec<bool>,
}

impl EuclidVariationalReport {
    pub fn passed(&self) -> bool {
        self.u_ok.iter().chain(&self.d_ok).all(|b| *b)
    }
}

fn coordinate_ok(grad: f64, x: f64, iv: &Interval, tol: f64) -> bool {
    let band = |b: f64| 1e-12 * (1.0 + b.abs());
    let at_lo = iv.lo.is_finite() && x <= iv.lo + band(iv.lo);
    let at_hi = iv.hi.is_finite() && x >= iv.hi - band(iv.hi);
    match (at_lo, at_hi) {
        (true, true) => true,
        (false, true) => grad >= -tol,
        (true, false) => grad <= tol,
        (false, false) => grad.abs() <= tol,
    }
}

/// `⟨∇_u H, ũ⟩ ≤ tol` and `⟨∇_d H, d̃⟩ ≥ -tol` over box input sets.
#[allow(clippy::too_many_arguments)]
pub fn euclid_variational_check<M: EuclidModel + ?Sized>(
    model: &M,
    k: usize,
    v: &[f64],
    u: &[f64],
    d: &[f64],
    xi: &[f64],
    u_box: &[Interval],
    d_box: &[Interval],
    tol: f64,
) -> Result<EuclidVariationalReport> {
    if u_box.len() != u.len() || d_box.len() != d.len() || xi.len() != model.state_dim() {
        return Err(Error::InvalidParams("box or covector dimension mismatch".into()));
    }
    let xi = DVector::from_column_slice(xi);
    let gu = -model.cost_gradient_u(k, v, u, d) + model.dynamics_jacobian_u(v, u, d).transpose() * &xi;
    let gd = -model.cost_gradient_d(k, v, u, d) + model.dynamics_jacobian_d(v, u, d).transpose() * &xi;
    let u_ok = (0..u.len()).map(|i| coordinate_ok(gu[i], u[i], &u_box[i], tol)).collect();
    let d_ok = (0..d.len()).map(|i| coordinate_ok(-gd[i], d[i], &d_box[i], tol)).collect();
    Ok(EuclidVariationalReport {
        k,
        grad_u: gu.iter().copied().collect(),
        grad_d: gd.iter().copied().collect(),
        u_ok,
        d_ok,
    })
}
