//! Closed-form solution of the unconstrained linear-quadratic game obtained
//! with `ψ = 0`:
//!
//! ```text
//! L_k = 1 + s² M_{k+1} (1 - μ⁻²),   M_k = Λ² + M_{k+1} / L_k,   M_N = Λ²
//! u_k = -s M_{k+1} v_k / L_k,   d_k = μ⁻² s M_{k+1} v_k / L_k,   v_{k+1} = v_k / L_k
//! ```
//!
//! `λ` must be 1. `μ = ∞` is read as `μ⁻² = 0`, the one-player regulator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spacecraft::{ProblemParams, TrajectorySolution};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiSequences {
    /// `M_0..M_N`.
    pub m: Vec<f64>,
    /// `L_0..L_{N-1}`.
    pub l: Vec<f64>,
}

fn inv_mu2(mu: f64) -> f64 {
    if mu.is_infinite() {
        0.0
    } else {
        1.0 / (mu * mu)
    }
}

pub fn riccati_recursion(params: &ProblemParams) -> Result<RiccatiSequences> {
    if params.lambda_u != 1.0 {
        return Err(Error::InvalidParams(format!(
            "the game recursion requires lambda = 1, got {}",
            params.lambda_u
        )));
    }
    if !(params.mu > 0.0) {
        return Err(Error::InvalidParams(format!("mu must be positive, got {}", params.mu)));
    }
    if params.n == 0 || !(params.s > 0.0) {
        return Err(Error::InvalidParams("need N >= 1 and s > 0".into()));
    }
    let n = params.n;
    let s2 = params.s * params.s;
    let lam2 = params.lambda_v * params.lambda_v;
    let w = 1.0 - inv_mu2(params.mu);
    let mut m = vec![0.0; n + 1];
    let mut l = vec![0.0; n];
    m[n] = lam2;
    for k in (0..n).rev() {
        let lk = 1.0 + s2 * m[k + 1] * w;
        if !(lk > 0.0) {
            return Err(Error::GameIllPosed { stage: k, value: lk });
        }
        l[k] = lk;
        m[k] = lam2 + m[k + 1] / lk;
    }
    Ok(RiccatiSequences { m, l })
}

/// Forward rollout of the closed-form saddle policy, with `ξᵏ = -Λ² Σ_{i>k} v_i`
/// and `ζ ≡ 0`.
pub fn lq_trajectory(params: &ProblemParams, seqs: &RiccatiSequences) -> Result<TrajectorySolution> {
    if params.psi != 0.0 {
        return Err(Error::InvalidParams(format!(
            "the closed form requires psi = 0, got {}",
            params.psi
        )));
    }
    let n = params.n;
    if seqs.l.len() != n || seqs.m.len() != n + 1 {
        return Err(Error::InvalidParams("Riccati sequences do not match N".into()));
    }
    let s = params.s;
    let im2 = inv_mu2(params.mu);
    let mut v = vec![params.v0];
    let mut theta = vec![params.theta0];
    let mut u = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for k in 0..n {
        let gain = s * seqs.m[k + 1] / seqs.l[k];
        u.push(-gain * v[k]);
        d.push(im2 * gain * v[k]);
        let sv = s * v[k];
        if !(sv * sv < 1.0) {
            return Err(Error::DomainViolation { stage: k, value: sv.abs() });
        }
        theta.push(theta[k] + sv.asin());
        v.push(v[k] / seqs.l[k]);
    }
    let lam2 = params.lambda_v * params.lambda_v;
    let mut xi = vec![0.0; n];
    let mut acc = 0.0;
    for k in (0..n).rev() {
        acc += v[k + 1];
        xi[k] = -lam2 * acc;
    }
    Ok(TrajectorySolution {
        theta,
        v,
        u,
        d,
        zeta: vec![0.0; n],
        xi,
        residual_inf: 0.0,
        iterations: 0,
        nonsmooth_iterations: Vec::new(),
        certificates: None,
    })
}

/// Largest stage-wise difference in `v`, `u` and `d`.
pub fn max_delta(a: &TrajectorySolution, b: &TrajectorySolution) -> f64 {
    let diff = |x: &[f64], y: &[f64]| {
        if x.len() != y.len() {
            return f64::INFINITY;
        }
        x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    };
    diff(&a.v, &b.v).max(diff(&a.u, &b.u)).max(diff(&a.d, &b.d))
}
