//! Single-axis spacecraft rotation on SO(2) under a bounded disturbance.
//!
//! ```text
//! g_{k+1} = g_k [[√(1-s²v²), -sv], [sv, √(1-s²v²)]]
//! v_{k+1} = v_k + s (u_k + d_k)
//! c_k = ½ (λ²u² + Λ²v² - μ²d² + ψ²(2 - tr g))
//! c_N = ½ (Λ²v² + ψ²(2 - tr g))
//! ```
//!
//! The necessary conditions are reduced to `N` equations in the velocities
//! `v_1..v_N`: angles are rolled forward, covectors come from their closed
//! form, inputs from the clamped stationarity conditions, and the residual is
//! the velocity update defect.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie_so2::{exp_so2, group_deviation_cost, skew_gradient, Rotation2};
use crate::nlsolve::{newton_solve, Residual, SolverConfig, Termination};
use crate::pmp::{
    subproblem_consistency, variational_check, CovectorPair, Interval, StagePartials,
    SubproblemReport, SystemModel, TerminalPartials, Trajectory, VariationalReport,
    VARIATIONAL_TOL,
};
use crate::saddle::{sufficient_saddle_check, HessianReport, HESSIAN_STEP};

/// Residual targeted by the polishing steps after convergence.
const POLISH_TOL: f64 = 1e-14;
const POLISH_ITERS: usize = 3;

/// Parameters of one spacecraft problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    /// Horizon `N`.
    pub n: usize,
    /// Step size `s`.
    pub s: f64,
    /// Velocity weight `Λ`.
    pub lambda_v: f64,
    /// Control weight `λ`.
    pub lambda_u: f64,
    /// Disturbance weight `μ`.
    pub mu: f64,
    /// Attitude weight `ψ`.
    pub psi: f64,
    /// Control bound, `∞` for none.
    pub u_c: f64,
    /// Disturbance bound, `∞` for none.
    pub d_c: f64,
    pub theta0: f64,
    pub v0: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams {
            n: 50,
            s: 0.1,
            lambda_v: 0.1,
            lambda_u: 1.0,
            mu: 2.0,
            psi: 0.0,
            u_c: f64::INFINITY,
            d_c: f64::INFINITY,
            theta0: 0.0,
            v0: 0.0,
        }
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n == 0 {
            return bad("N must be at least 1".into());
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return bad(format!("s must be positive, got {}", self.s));
        }
        for (name, w) in [
            ("Lambda", self.lambda_v),
            ("lambda", self.lambda_u),
            ("mu", self.mu),
            ("psi", self.psi),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {w}"));
            }
        }
        for (name, c) in [("u_c", self.u_c), ("d_c", self.d_c)] {
            if !(c > 0.0) {
                return bad(format!("{name} must be positive or infinite, got {c}"));
            }
        }
        if self.u_c.is_infinite() && self.lambda_u == 0.0 {
            return bad("lambda must be positive when the control is unbounded".into());
        }
        if self.d_c.is_infinite() && self.mu == 0.0 {
            return bad("mu must be positive when the disturbance is unbounded".into());
        }
        if !self.theta0.is_finite() || !self.v0.is_finite() {
            return bad("initial conditions must be finite".into());
        }
        Ok(())
    }

    pub fn is_constrained(&self) -> bool {
        self.u_c.is_finite() || self.d_c.is_finite()
    }

    pub fn u_interval(&self) -> Interval {
        Interval::symmetric(self.u_c)
    }

    pub fn d_interval(&self) -> Interval {
        Interval::symmetric(self.d_c)
    }
}

fn check_domain(v: f64, s: f64) -> Result<f64> {
    let sv = s * v;
    if !(sv * sv < 1.0) {
        return Err(Error::DomainViolation {
            stage: 0,
            value: sv.abs(),
        });
    }
    Ok(sv)
}

/// `f(v) = [[√(1-s²v²), -sv], [sv, √(1-s²v²)]] = exp(asin(sv))`.
pub fn kinematics_factor(v: f64, s: f64) -> Result<Rotation2> {
    let sv = check_domain(v, s)?;
    let c = (1.0 - sv * sv).sqrt();
    Ok(Rotation2::from_matrix_unchecked(nalgebra::Matrix2::new(
        c, -sv, sv, c,
    )))
}

/// The spacecraft system with closed-form partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacecraftModel {
    pub params: ProblemParams,
}

impl SpacecraftModel {
    pub fn new(params: ProblemParams) -> Self {
        SpacecraftModel { params }
    }
}

impl SystemModel for SpacecraftModel {
    fn horizon(&self) -> usize {
        self.params.n
    }

    fn kinematics(&self, _g: &Rotation2, v: f64) -> Result<Rotation2> {
        kinematics_factor(v, self.params.s)
    }

    fn dynamics(&self, _g: &Rotation2, v: f64, u: f64, d: f64) -> f64 {
        v + self.params.s * (u + d)
    }

    fn stage_cost(&self, _k: usize, g: &Rotation2, v: f64, u: f64, d: f64) -> f64 {
        let p = &self.params;
        0.5 * ((p.lambda_u * u).powi(2) + (p.lambda_v * v).powi(2) - (p.mu * d).powi(2)
            + p.psi * p.psi * group_deviation_cost(g))
    }

    fn terminal_cost(&self, g: &Rotation2, v: f64) -> f64 {
        let p = &self.params;
        0.5 * ((p.lambda_v * v).powi(2) + p.psi * p.psi * group_deviation_cost(g))
    }

    fn stage_partials(
        &self,
        _k: usize,
        g: &Rotation2,
        v: f64,
        u: f64,
        d: f64,
    ) -> Result<StagePartials> {
        let p = &self.params;
        let sv = check_domain(v, p.s)?;
        Ok(StagePartials {
            cost_v: p.lambda_v * p.lambda_v * v,
            cost_u: p.lambda_u * p.lambda_u * u,
            cost_d: -p.mu * p.mu * d,
            // ψ² sin θ
            cost_group: -p.psi * p.psi * skew_gradient(g).value(),
            increment_v: p.s / (1.0 - sv * sv).sqrt(),
            increment_group: 0.0,
            dynamics_v: 1.0,
            dynamics_u: p.s,
            dynamics_d: p.s,
            dynamics_group: 0.0,
        })
    }

    fn terminal_partials(&self, g: &Rotation2, v: f64) -> TerminalPartials {
        let p = &self.params;
        TerminalPartials {
            group: -p.psi * p.psi * skew_gradient(g).value(),
            v: p.lambda_v * p.lambda_v * v,
        }
    }
}

/// Covectors from their closed form. `ζᵏ = -ψ² Σ_{i>k} sin θ_i`; `ξ` by the
/// backward recursion from `ξᴺ⁻¹ = -Λ² v_N`.
pub fn closed_form_adjoints(
    params: &ProblemParams,
    theta: &[f64],
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = params.n;
    check_lengths(n, theta, v)?;
    let psi2 = params.psi * params.psi;
    let lam2 = params.lambda_v * params.lambda_v;
    let mut zeta = vec![0.0; n];
    let mut xi = vec![0.0; n];
    zeta[n - 1] = -psi2 * theta[n].sin();
    xi[n - 1] = -lam2 * v[n];
    for k in (1..n).rev() {
        let sv = check_domain(v[k], params.s).map_err(|e| e.at_stage(k))?;
        zeta[k - 1] = zeta[k] - psi2 * theta[k].sin();
        xi[k - 1] = params.s * zeta[k] / (1.0 - sv * sv).sqrt() + xi[k] - lam2 * v[k];
    }
    Ok((zeta, xi))
}

/// `ξᵏ = -Λ² Σ_{i=k+1..N} v_i + Σ_{i=k+1..N-1} s ζⁱ / √(1 - (s v_i)²)`,
/// the unrolled recursion.
pub fn explicit_sum_xi(params: &ProblemParams, zeta: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = params.n;
    if zeta.len() != n || v.len() != n + 1 {
        return Err(Error::InvalidParams("sequence length mismatch".into()));
    }
    let lam2 = params.lambda_v * params.lambda_v;
    let mut xi = vec![0.0; n];
    for (k, out) in xi.iter_mut().enumerate() {
        let mut acc = 0.0;
        for vi in &v[k + 1..=n] {
            acc -= lam2 * vi;
        }
        for i in k + 1..n {
            let sv = check_domain(v[i], params.s).map_err(|e| e.at_stage(i))?;
            acc += params.s * zeta[i] / (1.0 - sv * sv).sqrt();
        }
        *out = acc;
    }
    Ok(xi)
}

fn check_lengths(n: usize, theta: &[f64], v: &[f64]) -> Result<()> {
    if n == 0 || theta.len() != n + 1 || v.len() != n + 1 {
        return Err(Error::InvalidParams(format!(
            "expected {} angles and velocities, got {} and {}",
            n + 1,
            theta.len(),
            v.len()
        )));
    }
    Ok(())
}

fn clamp_input(raw_num: f64, weight2: f64, bound: f64) -> f64 {
    if weight2 == 0.0 {
        // bang-bang limit of the clamp
        return if raw_num == 0.0 { 0.0 } else { bound.copysign(raw_num) };
    }
    (raw_num / weight2).clamp(-bound, bound)
}

/// `u = clamp(sξ/λ², ±u_c)`, `d = clamp(-sξ/μ², ±d_c)`.
pub fn optimal_inputs(xi_k: f64, params: &ProblemParams) -> (f64, f64) {
    let sx = params.s * xi_k;
    (
        clamp_input(sx, params.lambda_u * params.lambda_u, params.u_c),
        clamp_input(-sx, params.mu * params.mu, params.d_c),
    )
}

/// Which side of its clamp an input sits on.
fn clamp_regime(raw_num: f64, weight2: f64, bound: f64) -> i8 {
    if bound.is_infinite() {
        return 0;
    }
    let x = clamp_input(raw_num, weight2, bound);
    if x >= bound {
        1
    } else if x <= -bound {
        -1
    } else {
        0
    }
}

/// Everything induced by a velocity sequence.
#[derive(Debug, Clone, PartialEq)]
struct Induced {
    theta: Vec<f64>,
    v: Vec<f64>,
    u: Vec<f64>,
    d: Vec<f64>,
    zeta: Vec<f64>,
    xi: Vec<f64>,
}

fn induce(params: &ProblemParams, v_interior: &[f64]) -> Result<Induced> {
    let n = params.n;
    if v_interior.len() != n {
        return Err(Error::InvalidParams(format!(
            "expected {n} unknown velocities, got {}",
            v_interior.len()
        )));
    }
    let mut v = Vec::with_capacity(n + 1);
    v.push(params.v0);
    v.extend_from_slice(v_interior);
    let mut theta = Vec::with_capacity(n + 1);
    theta.push(params.theta0);
    for k in 0..n {
        let sv = check_domain(v[k], params.s).map_err(|e| e.at_stage(k))?;
        theta.push(theta[k] + sv.asin());
    }
    let (zeta, xi) = closed_form_adjoints(params, &theta, &v)?;
    let (u, d): (Vec<f64>, Vec<f64>) = xi.iter().map(|&x| optimal_inputs(x, params)).unzip();
    Ok(Induced {
        theta,
        v,
        u,
        d,
        zeta,
        xi,
    })
}

/// The velocity-update defect as a function of `v_1..v_N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacecraftResidual {
    pub params: ProblemParams,
}

impl SpacecraftResidual {
    pub fn new(params: ProblemParams) -> Self {
        SpacecraftResidual { params }
    }

    fn regimes(&self, x: &[f64]) -> Option<Vec<(i8, i8)>> {
        let p = &self.params;
        let ind = induce(p, x).ok()?;
        Some(
            ind.xi
                .iter()
                .map(|&xi| {
                    (
                        clamp_regime(p.s * xi, p.lambda_u * p.lambda_u, p.u_c),
                        clamp_regime(-p.s * xi, p.mu * p.mu, p.d_c),
                    )
                })
                .collect(),
        )
    }
}

/// `res_k = v_{k+1} - (v_k + s(u_k + d_k))`, `k = 0..N-1`.
pub fn residual(params: &ProblemParams, v_interior: &[f64]) -> Result<Vec<f64>> {
    let ind = induce(params, v_interior)?;
    Ok((0..params.n)
        .map(|k| ind.v[k + 1] - (ind.v[k] + params.s * (ind.u[k] + ind.d[k])))
        .collect())
}

impl Residual for SpacecraftResidual {
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        residual(&self.params, x)
    }

    fn stencil_is_nonsmooth(&self, x: &[f64], steps: &[f64]) -> bool {
        if !self.params.is_constrained() {
            return false;
        }
        let Some(base) = self.regimes(x) else {
            return false;
        };
        let mut p = x.to_vec();
        for j in 0..x.len() {
            for sign in [1.0, -1.0] {
                p[j] = x[j] + sign * steps[j];
                if self.regimes(&p).is_some_and(|r| r != base) {
                    return true;
                }
            }
            p[j] = x[j];
        }
        false
    }
}

/// Named initial guesses for `v_1..v_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GuessKind {
    /// `v ≡ 0`.
    Zero,
    /// `v_k = v̄₀ (1 - k/N)`.
    Drift,
    /// Constant velocity covering the shortest angle back to `θ = 0`.
    Geodesic,
}

impl GuessKind {
    pub fn name(&self) -> &'static str {
        match self {
            GuessKind::Zero => "zero",
            GuessKind::Drift => "drift",
            GuessKind::Geodesic => "geodesic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(GuessKind::Zero),
            "drift" => Some(GuessKind::Drift),
            "geodesic" => Some(GuessKind::Geodesic),
            _ => None,
        }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

pub fn initial_guess(kind: GuessKind, params: &ProblemParams) -> Vec<f64> {
    let n = params.n;
    match kind {
        GuessKind::Zero => vec![0.0; n],
        GuessKind::Drift => (1..=n)
            .map(|k| params.v0 * (1.0 - k as f64 / n as f64))
            .collect(),
        GuessKind::Geodesic => {
            let v = wrap_angle(-params.theta0) / (n as f64 * params.s);
            vec![v; n]
        }
    }
}

/// Total cost `J(ū, d̄)` from the problem's initial state; `NaN` if the
/// rollout leaves the kinematics domain.
pub fn cost(params: &ProblemParams, u: &[f64], d: &[f64]) -> f64 {
    let model = SpacecraftModel::new(*params);
    let mut g = exp_so2(params.theta0);
    let mut v = params.v0;
    let mut total = 0.0;
    for k in 0..u.len().min(d.len()) {
        total += model.stage_cost(k, &g, v, u[k], d[k]);
        match kinematics_factor(v, params.s) {
            Ok(f) => g = (g * f).renormalized_if_drifted(),
            Err(_) => return f64::NAN,
        }
        v += params.s * (u[k] + d[k]);
    }
    total + model.terminal_cost(&g, v)
}

/// Certificates attached to a solved trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificates {
    pub variational: Vec<VariationalReport>,
    pub subproblem: SubproblemReport,
    pub saddle: HessianReport,
}

impl Certificates {
    pub fn variational_passed(&self) -> bool {
        self.variational.iter().all(|r| r.passed())
    }

    pub fn passed(&self) -> bool {
        self.variational_passed() && self.subproblem.passed() && self.saddle.is_saddle_certified
    }
}

/// Optimal sequences for one problem. `theta` is unwrapped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySolution {
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub zeta: Vec<f64>,
    pub xi: Vec<f64>,
    pub residual_inf: f64,
    pub iterations: usize,
    /// Newton iterations whose Jacobian stencil crossed a clamp kink.
    pub nonsmooth_iterations: Vec<usize>,
    pub certificates: Option<Certificates>,
}

impl TrajectorySolution {
    pub fn horizon(&self) -> usize {
        self.u.len()
    }

    /// Largest per-stage defect of the state equations.
    pub fn dynamics_defect(&self, s: f64) -> f64 {
        (0..self.horizon())
            .map(|k| {
                let dv = self.v[k + 1] - (self.v[k] + s * (self.u[k] + self.d[k]));
                let dt = self.theta[k + 1] - (self.theta[k] + (s * self.v[k]).asin());
                dv.abs().max(dt.abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn covectors(&self) -> Vec<CovectorPair> {
        self.zeta
            .iter()
            .zip(&self.xi)
            .map(|(&z, &x)| CovectorPair::new(z, x))
            .collect()
    }

    /// The trajectory as group elements for the generic conditions.
    pub fn to_trajectory(&self) -> Trajectory {
        Trajectory {
            g: self.theta.iter().map(|&t| exp_so2(t)).collect(),
            v: self.v.clone(),
            u: self.u.clone(),
            d: self.d.clone(),
        }
    }

    pub fn certified(&self) -> bool {
        self.certificates.as_ref().is_some_and(|c| c.passed())
    }
}

/// Runs every stage-wise and global check on a solved trajectory.
pub fn certify(params: &ProblemParams, sol: &TrajectorySolution) -> Result<Certificates> {
    let model = SpacecraftModel::new(*params);
    let traj = sol.to_trajectory();
    let cov = sol.covectors();
    let mut variational = Vec::with_capacity(params.n);
    for (k, c) in cov.iter().enumerate() {
        variational.push(variational_check(
            &model,
            &traj.stage(k, *c),
            params.u_interval(),
            params.d_interval(),
            VARIATIONAL_TOL,
        )?);
    }
    let subproblem = subproblem_consistency(
        &model,
        &traj,
        Some(&cov),
        params.u_interval(),
        params.d_interval(),
    )?;
    let saddle = sufficient_saddle_check(|u, d| cost(params, u, d), &sol.u, &sol.d, HESSIAN_STEP)?;
    Ok(Certificates {
        variational,
        subproblem,
        saddle,
    })
}

/// Solves the reduced necessary conditions from `initial_guess` and
/// certifies the result. Non-convergence is an error carrying the solver
/// report.
pub fn simulate(
    params: &ProblemParams,
    initial_guess: &[f64],
    solver_cfg: &SolverConfig,
) -> Result<TrajectorySolution> {
    params.validate()?;
    let res = SpacecraftResidual::new(*params);
    let mut report = newton_solve(&res, initial_guess, solver_cfg)?;
    if !report.converged {
        return Err(Error::NotConverged(Box::new(report)));
    }
    // a few extra steps push the residual to rounding level so the stored
    // trajectory satisfies the state equations to ~1e-15
    let polish_cfg = SolverConfig {
        max_iters: POLISH_ITERS,
        residual_tol: POLISH_TOL,
        ..*solver_cfg
    };
    if report.residual_inf_norm > POLISH_TOL {
        if let Ok(polished) = newton_solve(&res, &report.x, &polish_cfg) {
            if polished.residual_inf_norm < report.residual_inf_norm {
                let iterations = report.iterations + polished.iterations;
                let mut nonsmooth = report.nonsmooth_iterations.clone();
                nonsmooth.extend(
                    polished
                        .nonsmooth_iterations
                        .iter()
                        .map(|i| i + report.iterations),
                );
                report = polished;
                report.iterations = iterations;
                report.nonsmooth_iterations = nonsmooth;
                report.converged = true;
                report.termination = Termination::Converged;
            }
        }
    }
    let ind = induce(params, &report.x)?;
    let mut sol = TrajectorySolution {
        theta: ind.theta,
        v: ind.v,
        u: ind.u,
        d: ind.d,
        zeta: ind.zeta,
        xi: ind.xi,
        residual_inf: report.residual_inf_norm,
        iterations: report.iterations,
        nonsmooth_iterations: report.nonsmooth_iterations,
        certificates: None,
    };
    sol.certificates = Some(certify(params, &sol)?);
    Ok(sol)
}

/// Wrapped distance of the attitude from `θ = 0` along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnwindingProfile {
    pub initial: f64,
    pub peak: f64,
    pub peak_stage: usize,
    pub last: f64,
}

impl UnwindingProfile {
    /// Distance first grows past its initial value, then shrinks again.
    pub fn unwinds(&self, n: usize) -> bool {
        self.peak > self.initial && self.peak_stage > 0 && self.peak_stage < n && self.last < self.peak
    }
}

pub fn unwinding_profile(theta: &[f64]) -> UnwindingProfile {
    let dist: Vec<f64> = theta.iter().map(|&t| wrap_angle(t).abs()).collect();
    let (peak_stage, peak) = dist
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, x)| if x > best.1 { (k, x) } else { best });
    UnwindingProfile {
        initial: dist[0],
        peak,
        peak_stage,
        last: dist[dist.len() - 1],
    }
}
