//! Min-max maximum principle for systems on `SO(2) × R`.
//!
//! The system is `g_{k+1} = g_k f(g_k, v_k)`, `v_{k+1} = F(g_k, v_k, u_k, d_k)`
//! with stage costs `c_k` and terminal cost `c_N`. Along a saddle trajectory
//! there are covectors `(ζᵏ, ξᵏ)`, `k = 0..N-1`, such that with
//!
//! ```text
//! H(ζ, ξ, g, v, u, d) = -c_k(g, v, u, d) + ⟨ζ, exp⁻¹ f(g, v)⟩ + ξ F(g, v, u, d)
//! ```
//!
//! the state equations, the backward adjoint recursion, the terminal
//! (transversality) values and a saddle-type variational inequality in
//! `(u, d)` all hold. Stage `k` is evaluated with the stage-`k` covectors and
//! produces the stage-`(k-1)` covectors.
//!
//! Every operation here is written against the generic [`SystemModel`]
//! trait. Gradients default to central finite differences; a model may
//! override [`SystemModel::stage_partials`] and
//! [`SystemModel::terminal_partials`] with closed forms.
//!
//! The cost enters with a coefficient (`-1` in the combined Hamiltonian). The
//! `*_with` variants expose that coefficient so that the two one-sided
//! problems (minimisation over `u` with `d` frozen and maximisation over `d`
//! with `u` frozen) and rescaled multipliers can be run through the same code.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie_so2::{adjoint_action, exp_so2, log_so2, pairing, AlgebraScalar, Rotation2};

/// Base step for central differences on real arguments, scaled by `1 + |x|`.
pub const FD_STEP: f64 = 1e-6;

/// Default tolerance of [`variational_check`].
pub const VARIATIONAL_TOL: f64 = 1e-8;

/// Tolerance used when comparing covector sequences from different routes.
pub const COVECTOR_TOL: f64 = 1e-12;

/// Tolerance of [`scaling_invariance_check`].
pub const SCALING_TOL: f64 = 1e-10;

/// Distance of `tr f` from `-2` below which `exp⁻¹ f` is treated as undefined.
const CHART_TOL: f64 = 1e-12;

/// Covectors `(ζᵏ, ξᵏ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CovectorPair {
    pub zeta: f64,
    pub xi: f64,
}

impl CovectorPair {
    pub fn new(zeta: f64, xi: f64) -> Self {
        CovectorPair { zeta, xi }
    }

    pub fn zeta_algebra(&self) -> AlgebraScalar {
        AlgebraScalar(self.zeta)
    }

    pub fn scaled(&self, r: f64) -> Self {
        CovectorPair {
            zeta: r * self.zeta,
            xi: r * self.xi,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.zeta.is_finite() && self.xi.is_finite()
    }
}

/// Stage data `γ_k = (ζᵏ, ξᵏ, g_k, v_k, u_k, d_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTuple {
    pub k: usize,
    pub covectors: CovectorPair,
    pub g: Rotation2,
    pub v: f64,
    pub u: f64,
    pub d: f64,
}

/// Partial derivatives of the Hamiltonian's ingredients at one stage.
///
/// `increment` is `vex(exp⁻¹ f(g, v))`. Entries suffixed `_group` are
/// left-trivialised derivatives, `d/ds φ(g exp(σ(s)))` at `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StagePartials {
    pub cost_v: f64,
    pub cost_u: f64,
    pub cost_d: f64,
    pub cost_group: f64,
    pub increment_v: f64,
    pub increment_group: f64,
    pub dynamics_v: f64,
    pub dynamics_u: f64,
    pub dynamics_d: f64,
    pub dynamics_group: f64,
}

/// Gradient of the terminal cost: left-trivialised group part and `∂_v`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TerminalPartials {
    pub group: f64,
    pub v: f64,
}

/// A discrete-time system on `SO(2) × R` with a min-max cost.
pub trait SystemModel {
    fn horizon(&self) -> usize;

    /// The factor `f(g, v)` in `g_{k+1} = g_k f(g_k, v_k)`.
    fn kinematics(&self, g: &Rotation2, v: f64) -> Result<Rotation2>;

    fn dynamics(&self, g: &Rotation2, v: f64, u: f64, d: f64) -> f64;

    fn stage_cost(&self, k: usize, g: &Rotation2, v: f64, u: f64, d: f64) -> f64;

    fn terminal_cost(&self, g: &Rotation2, v: f64) -> f64;

    fn stage_partials(
        &self,
        k: usize,
        g: &Rotation2,
        v: f64,
        u: f64,
        d: f64,
    ) -> Result<StagePartials> {
        numerical_stage_partials(self, k, g, v, u, d)
    }

    fn terminal_partials(&self, g: &Rotation2, v: f64) -> TerminalPartials {
        numerical_terminal_partials(self, g, v)
    }
}

fn fd_step(x: f64) -> f64 {
    FD_STEP * (1.0 + x.abs())
}

fn central<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = fd_step(x);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn central_result<F: Fn(f64) -> Result<f64>>(f: F, x: f64) -> Result<f64> {
    let h = fd_step(x);
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// Left-trivialised derivative `d/ds φ(g exp(σ(s)))` at `s = 0`.
fn central_group<F: Fn(&Rotation2) -> f64>(f: F, g: &Rotation2) -> f64 {
    let h = FD_STEP;
    (f(&g.perturbed(h)) - f(&g.perturbed(-h))) / (2.0 * h)
}

/// `vex(exp⁻¹ f(g, v))`, the increment of the configuration over one stage.
pub fn increment<M: SystemModel + ?Sized>(model: &M, g: &Rotation2, v: f64) -> Result<f64> {
    let f = model.kinematics(g, v)?;
    if f.trace() <= -2.0 + CHART_TOL {
        return Err(Error::ChartViolation);
    }
    Ok(log_so2(&f))
}

/// Central-difference partials of every Hamiltonian ingredient.
pub fn numerical_stage_partials<M: SystemModel + ?Sized>(
    model: &M,
    k: usize,
    g: &Rotation2,
    v: f64,
    u: f64,
    d: f64,
) -> Result<StagePartials> {
    let inc_group = {
        let h = FD_STEP;
        (increment(model, &g.perturbed(h), v)? - increment(model, &g.perturbed(-h), v)?)
            / (2.0 * h)
    };
    Ok(StagePartials {
        cost_v: central(|x| model.stage_cost(k, g, x, u, d), v),
        cost_u: central(|x| model.stage_cost(k, g, v, x, d), u),
        cost_d: central(|x| model.stage_cost(k, g, v, u, x), d),
        cost_group: central_group(|h| model.stage_cost(k, h, v, u, d), g),
        increment_v: central_result(|x| increment(model, g, x), v)?,
        increment_group: inc_group,
        dynamics_v: central(|x| model.dynamics(g, x, u, d), v),
        dynamics_u: central(|x| model.dynamics(g, v, x, d), u),
        dynamics_d: central(|x| model.dynamics(g, v, u, x), d),
        dynamics_group: central_group(|h| model.dynamics(h, v, u, d), g),
    })
}

pub fn numerical_terminal_partials<M: SystemModel + ?Sized>(
    model: &M,
    g: &Rotation2,
    v: f64,
) -> TerminalPartials {
    TerminalPartials {
        group: central_group(|h| model.terminal_cost(h, v), g),
        v: central(|x| model.terminal_cost(g, x), v),
    }
}

/// `H(γ_k)` with the cost weighted by `-1`.
pub fn hamiltonian<M: SystemModel + ?Sized>(model: &M, t: &StageTuple) -> Result<f64> {
    hamiltonian_with(model, t, -1.0)
}

/// `cost_coef·c_k + ⟨ζ, exp⁻¹ f⟩ + ξ F`.
pub fn hamiltonian_with<M: SystemModel + ?Sized>(
    model: &M,
    t: &StageTuple,
    cost_coef: f64,
) -> Result<f64> {
    let inc = increment(model, &t.g, t.v)?;
    let cost = model.stage_cost(t.k, &t.g, t.v, t.u, t.d);
    let dynamics = model.dynamics(&t.g, t.v, t.u, t.d);
    Ok(cost_coef * cost
        + pairing(t.covectors.zeta_algebra(), AlgebraScalar(inc))
        + t.covectors.xi * dynamics)
}

/// Gradient of the Hamiltonian in every argument.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct HamiltonianGradient {
    /// `∂_ζ H = vex(exp⁻¹ f)`.
    pub zeta: f64,
    /// `∂_ξ H = F`.
    pub xi: f64,
    pub v: f64,
    pub u: f64,
    pub d: f64,
    /// Left-trivialised `T_g H`.
    pub group: f64,
}

pub fn hamiltonian_gradient<M: SystemModel + ?Sized>(
    model: &M,
    t: &StageTuple,
) -> Result<HamiltonianGradient> {
    hamiltonian_gradient_with(model, t, -1.0)
}

pub fn hamiltonian_gradient_with<M: SystemModel + ?Sized>(
    model: &M,
    t: &StageTuple,
    cost_coef: f64,
) -> Result<HamiltonianGradient> {
    let p = model.stage_partials(t.k, &t.g, t.v, t.u, t.d)?;
    let CovectorPair { zeta, xi } = t.covectors;
    Ok(HamiltonianGradient {
        zeta: increment(model, &t.g, t.v)?,
        xi: model.dynamics(&t.g, t.v, t.u, t.d),
        v: cost_coef * p.cost_v + zeta * p.increment_v + xi * p.dynamics_v,
        u: cost_coef * p.cost_u + xi * p.dynamics_u,
        d: cost_coef * p.cost_d + xi * p.dynamics_d,
        group: cost_coef * p.cost_group + zeta * p.increment_group + xi * p.dynamics_group,
    })
}

/// `Ad*_a ζ`, the dual of the adjoint action.
fn coadjoint(a: &Rotation2, zeta: f64) -> f64 {
    pairing(AlgebraScalar(zeta), adjoint_action(a, AlgebraScalar(1.0)))
}

/// One backward step: stage-`k` data and covectors give `(ζᵏ⁻¹, ξᵏ⁻¹)`.
pub fn adjoint_step<M: SystemModel + ?Sized>(model: &M, t: &StageTuple) -> Result<CovectorPair> {
    adjoint_step_with(model, t, -1.0)
}

pub fn adjoint_step_with<M: SystemModel + ?Sized>(
    model: &M,
    t: &StageTuple,
    cost_coef: f64,
) -> Result<CovectorPair> {
    let grad = hamiltonian_gradient_with(model, t, cost_coef)?;
    let back = exp_so2(-grad.zeta);
    Ok(CovectorPair {
        zeta: coadjoint(&back, t.covectors.zeta) + grad.group,
        xi: grad.v,
    })
}

/// Terminal covectors `(ζᴺ⁻¹, ξᴺ⁻¹) = -(T_g c_N, ∂_v c_N)`.
pub fn transversality<M: SystemModel + ?Sized>(model: &M, g_n: &Rotation2, v_n: f64) -> CovectorPair {
    transversality_with(model, g_n, v_n, -1.0)
}

pub fn transversality_with<M: SystemModel + ?Sized>(
    model: &M,
    g_n: &Rotation2,
    v_n: f64,
    cost_coef: f64,
) -> CovectorPair {
    let p = model.terminal_partials(g_n, v_n);
    CovectorPair {
        zeta: cost_coef * p.group,
        xi: cost_coef * p.v,
    }
}

/// State and input sequences of one trajectory: `g`, `v` have `N + 1`
/// entries, `u`, `d` have `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub g: Vec<Rotation2>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.u.len()
    }

    pub fn stage(&self, k: usize, covectors: CovectorPair) -> StageTuple {
        StageTuple {
            k,
            covectors,
            g: self.g[k],
            v: self.v[k],
            u: self.u[k],
            d: self.d[k],
        }
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.u.len();
        if self.d.len() != n || self.g.len() != n + 1 || self.v.len() != n + 1 {
            return Err(Error::InvalidParams(format!(
                "trajectory shape mismatch: g {}, v {}, u {}, d {}",
                self.g.len(),
                self.v.len(),
                self.u.len(),
                self.d.len()
            )));
        }
        Ok(())
    }
}

/// Rolls the state equations forward from `(g0, v0)`.
pub fn forward_rollout<M: SystemModel + ?Sized>(
    model: &M,
    g0: Rotation2,
    v0: f64,
    u: &[f64],
    d: &[f64],
) -> Result<Trajectory> {
    if u.len() != d.len() {
        return Err(Error::InvalidParams("u and d differ in length".into()));
    }
    let n = u.len();
    let mut g = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    g.push(g0);
    v.push(v0);
    for k in 0..n {
        let f = model.kinematics(&g[k], v[k]).map_err(|e| e.at_stage(k))?;
        let next = (g[k] * f).renormalized_if_drifted();
        let vel = model.dynamics(&g[k], v[k], u[k], d[k]);
        g.push(next);
        v.push(vel);
    }
    Ok(Trajectory {
        g,
        v,
        u: u.to_vec(),
        d: d.to_vec(),
    })
}

/// Runs the adjoint recursion backward from the transversality values.
/// Entry `k` of the result holds `(ζᵏ, ξᵏ)`.
pub fn backward_adjoints<M: SystemModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
) -> Result<Vec<CovectorPair>> {
    backward_adjoints_with(model, traj, -1.0)
}

pub fn backward_adjoints_with<M: SystemModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    cost_coef: f64,
) -> Result<Vec<CovectorPair>> {
    traj.check_shape()?;
    let n = traj.horizon();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut out = vec![CovectorPair::default(); n];
    out[n - 1] = transversality_with(model, &traj.g[n], traj.v[n], cost_coef);
    for k in (1..n).rev() {
        let t = traj.stage(k, out[k]);
        out[k - 1] = adjoint_step_with(model, &t, cost_coef).map_err(|e| e.at_stage(k))?;
    }
    Ok(out)
}

/// `ρ = T*_e(exp⁻¹ ∘ Φ_{g_prev⁻¹ g_k})(ζ)` evaluated through its defining
/// directional derivative. On SO(2) this returns `ζ` up to the difference
/// error.
pub fn cotangent_pullback(zeta: f64, g_prev: &Rotation2, g_k: &Rotation2) -> f64 {
    let base = g_prev.inverse() * *g_k;
    let curve = |s: f64| log_so2(&(base * exp_so2(s)));
    let h = FD_STEP;
    let mut hi = curve(h);
    let mut lo = curve(-h);
    // keep the two samples on the same branch across the ±π cut
    let jump = hi - lo;
    if jump > std::f64::consts::PI {
        hi -= 2.0 * std::f64::consts::PI;
    } else if jump < -std::f64::consts::PI {
        lo -= 2.0 * std::f64::consts::PI;
    }
    pairing(AlgebraScalar(zeta), AlgebraScalar((hi - lo) / (2.0 * h)))
}

/// A closed interval, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn unbounded() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    /// `[-c, c]`; `c = ∞` gives the real line.
    pub fn symmetric(c: f64) -> Self {
        Interval { lo: -c, hi: c }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn at_lo(&self, x: f64) -> bool {
        self.lo.is_finite() && x <= self.lo + 1e-12 * (1.0 + self.lo.abs())
    }

    fn at_hi(&self, x: f64) -> bool {
        self.hi.is_finite() && x >= self.hi - 1e-12 * (1.0 + self.hi.abs())
    }
}

/// `⟨grad, x' - x⟩ ≤ tol` for every `x'` in the interval.
fn nonpositive_pairing(grad: f64, x: f64, iv: &Interval, tol: f64) -> bool {
    match (iv.at_lo(x), iv.at_hi(x)) {
        (true, true) => true,
        (false, true) => grad >= -tol,
        (true, false) => grad <= tol,
        (false, false) => grad.abs() <= tol,
    }
}

/// Outcome of the Hamiltonian saddle-type inequalities at one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationalReport {
    pub k: usize,
    pub grad_u: f64,
    pub grad_d: f64,
    /// `⟨∂_u H, ũ⟩ ≤ tol` for all feasible `ũ`.
    pub u_ok: bool,
    /// `⟨∂_d H, d̃⟩ ≥ -tol` for all feasible `d̃`.
    pub d_ok: bool,
}

impl VariationalReport {
    pub fn passed(&self) -> bool {
        self.u_ok && self.d_ok
    }
}

pub fn variational_check<M: SystemModel + ?Sized>(
    model: &M,
    t: &StageTuple,
    u_interval: Interval,
    d_interval: Interval,
    tol: f64,
) -> Result<VariationalReport> {
    variational_check_with(model, t, u_interval, d_interval, tol, -1.0)
}

pub fn variational_check_with<M: SystemModel + ?Sized>(
    model: &M,
    t: &StageTuple,
    u_interval: Interval,
    d_interval: Interval,
    tol: f64,
    cost_coef: f64,
) -> Result<VariationalReport> {
    let grad = hamiltonian_gradient_with(model, t, cost_coef)?;
    Ok(variational_from_gradients(
        t.k, grad.u, grad.d, t.u, t.d, u_interval, d_interval, tol,
    ))
}

/// The interval sign conditions given the two input gradients directly.
#[allow(clippy::too_many_arguments)]
pub fn variational_from_gradients(
    k: usize,
    grad_u: f64,
    grad_d: f64,
    u: f64,
    d: f64,
    u_interval: Interval,
    d_interval: Interval,
    tol: f64,
) -> VariationalReport {
    VariationalReport {
        k,
        grad_u,
        grad_d,
        u_ok: nonpositive_pairing(grad_u, u, &u_interval, tol),
        d_ok: nonpositive_pairing(-grad_d, d, &d_interval, tol),
    }
}

/// Comparison of the two one-sided problems against the combined conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubproblemReport {
    /// Minimisation over `u` (`d` frozen), multiplier `-1`.
    pub min_covectors: Vec<CovectorPair>,
    /// Maximisation over `d` (`u` frozen), multiplier `-1`.
    pub max_covectors: Vec<CovectorPair>,
    /// `max_k |ζ̌ᵏ + ζ̂ᵏ|, |ξ̌ᵏ + ξ̂ᵏ|`.
    pub negation_error: f64,
    /// Distance of `(ζ̌, ξ̌)` and `-(ζ̂, ξ̂)` from the combined recursion.
    pub combined_error: f64,
    /// Distance of caller-supplied covectors from the combined recursion.
    pub supplied_error: Option<f64>,
    /// Whether the zero-multiplier recursion vanished identically.
    pub zero_multiplier_vanishes: bool,
    /// Non-positive gradient condition of each one-sided problem.
    pub min_gradient_ok: bool,
    pub max_gradient_ok: bool,
}

impl SubproblemReport {
    pub fn passed(&self) -> bool {
        self.negation_error <= COVECTOR_TOL
            && self.combined_error <= COVECTOR_TOL
            && self.supplied_error.is_none_or(|e| e <= COVECTOR_TOL)
            && self.zero_multiplier_vanishes
            && self.min_gradient_ok
            && self.max_gradient_ok
    }
}

fn max_pair_distance(a: &[CovectorPair], b: &[CovectorPair], sign: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.zeta - sign * y.zeta).abs().max((x.xi - sign * y.xi).abs()))
        .fold(0.0, f64::max)
}

/// Runs the one-sided adjoint recursions independently and checks that they
/// are negatives of each other and agree with the combined recursion. Also
/// reruns the minimisation recursion with a zero multiplier, which must
/// produce identically zero covectors.
pub fn subproblem_consistency<M: SystemModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    supplied: Option<&[CovectorPair]>,
    u_interval: Interval,
    d_interval: Interval,
) -> Result<SubproblemReport> {
    // min problem: ν̌ c_k; max problem: -ν̂ c_k; both with ν = -1
    let nu_min = -1.0;
    let nu_max = -1.0;
    let min_covectors = backward_adjoints_with(model, traj, nu_min)?;
    let max_covectors = backward_adjoints_with(model, traj, -nu_max)?;
    let combined = backward_adjoints(model, traj)?;

    let negation_error = max_pair_distance(&min_covectors, &max_covectors, -1.0);
    let combined_error = max_pair_distance(&min_covectors, &combined, 1.0)
        .max(max_pair_distance(&max_covectors, &combined, -1.0));
    let supplied_error = supplied.map(|s| max_pair_distance(s, &combined, 1.0));

    let zero = backward_adjoints_with(model, traj, 0.0)?;
    let zero_multiplier_vanishes = zero.iter().all(|c| c.zeta == 0.0 && c.xi == 0.0);

    let mut min_gradient_ok = true;
    let mut max_gradient_ok = true;
    for k in 0..traj.horizon() {
        let g_min = hamiltonian_gradient_with(model, &traj.stage(k, min_covectors[k]), nu_min)?;
        min_gradient_ok &= nonpositive_pairing(g_min.u, traj.u[k], &u_interval, VARIATIONAL_TOL);
        let g_max = hamiltonian_gradient_with(model, &traj.stage(k, max_covectors[k]), -nu_max)?;
        max_gradient_ok &= nonpositive_pairing(g_max.d, traj.d[k], &d_interval, VARIATIONAL_TOL);
    }

    Ok(SubproblemReport {
        min_covectors,
        max_covectors,
        negation_error,
        combined_error,
        supplied_error,
        zero_multiplier_vanishes,
        min_gradient_ok,
        max_gradient_ok,
    })
}

/// Largest violation of each necessary condition for a given multiplier
/// scale `r` (cost weighted by `-r`, covectors multiplied by `r`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionResiduals {
    /// State equations.
    pub state: f64,
    /// Adjoint recursion.
    pub adjoint: f64,
    /// Terminal values.
    pub transversality: f64,
    /// Worst gradient violation of the interval sign conditions.
    pub variational: f64,
}

impl ConditionResiduals {
    fn as_array(&self) -> [f64; 4] {
        [self.state, self.adjoint, self.transversality, self.variational]
    }
}

fn sign_violation(grad: f64, x: f64, iv: &Interval) -> f64 {
    match (iv.at_lo(x), iv.at_hi(x)) {
        (true, true) => 0.0,
        (false, true) => (-grad).max(0.0),
        (true, false) => grad.max(0.0),
        (false, false) => grad.abs(),
    }
}

/// Residuals of every necessary condition with the multiplier scaled by `r`.
pub fn condition_residuals<M: SystemModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    covectors: &[CovectorPair],
    r: f64,
    u_interval: Interval,
    d_interval: Interval,
) -> Result<ConditionResiduals> {
    traj.check_shape()?;
    let n = traj.horizon();
    if covectors.len() != n {
        return Err(Error::InvalidParams("covector sequence length differs from N".into()));
    }
    let coef = -r;
    let scaled: Vec<CovectorPair> = covectors.iter().map(|c| c.scaled(r)).collect();
    let mut state: f64 = 0.0;
    let mut adjoint: f64 = 0.0;
    let mut variational: f64 = 0.0;
    for k in 0..n {
        let t = traj.stage(k, scaled[k]);
        let grad = hamiltonian_gradient_with(model, &t, coef).map_err(|e| e.at_stage(k))?;
        let predicted = traj.g[k] * exp_so2(grad.zeta);
        state = state
            .max((predicted.matrix() - traj.g[k + 1].matrix()).amax())
            .max((grad.xi - traj.v[k + 1]).abs());
        if k >= 1 {
            let prev = adjoint_step_with(model, &t, coef)?;
            adjoint = adjoint
                .max((prev.zeta - scaled[k - 1].zeta).abs())
                .max((prev.xi - scaled[k - 1].xi).abs());
        }
        variational = variational
            .max(sign_violation(grad.u, traj.u[k], &u_interval))
            .max(sign_violation(-grad.d, traj.d[k], &d_interval));
    }
    let term = if n > 0 {
        let tc = transversality_with(model, &traj.g[n], traj.v[n], coef);
        (tc.zeta - scaled[n - 1].zeta)
            .abs()
            .max((tc.xi - scaled[n - 1].xi).abs())
    } else {
        0.0
    };
    Ok(ConditionResiduals {
        state,
        adjoint,
        transversality: term,
        variational,
    })
}

/// Residuals before and after rescaling the multiplier and covectors by `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingReport {
    pub r: f64,
    pub unscaled: ConditionResiduals,
    pub scaled: ConditionResiduals,
    /// Per condition (state, adjoint, transversality, variational): the scaled
    /// residual is within tolerance.
    pub passes: [bool; 4],
    /// Per condition: the scaled residual equals the unscaled one times `r`
    /// (times 1 for the state equations) up to tolerance.
    pub consistent: [bool; 4],
}

impl ScalingReport {
    pub fn passed(&self) -> bool {
        self.passes.iter().chain(self.consistent.iter()).all(|b| *b)
    }
}

/// Rescales `ν` and every covector by `r > 0` and re-evaluates all
/// necessary conditions.
pub fn scaling_invariance_check<M: SystemModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    covectors: &[CovectorPair],
    r: f64,
    u_interval: Interval,
    d_interval: Interval,
) -> Result<ScalingReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParams(format!("scale must be positive, got {r}")));
    }
    let unscaled = condition_residuals(model, traj, covectors, 1.0, u_interval, d_interval)?;
    let scaled = condition_residuals(model, traj, covectors, r, u_interval, d_interval)?;
    let a = unscaled.as_array();
    let b = scaled.as_array();
    let factors = [1.0, r, r, r];
    let mut passes = [false; 4];
    let mut consistent = [false; 4];
    for i in 0..4 {
        passes[i] = b[i] <= SCALING_TOL;
        consistent[i] = (b[i] - factors[i] * a[i]).abs() <= SCALING_TOL * r.max(1.0);
    }
    Ok(ScalingReport {
        r,
        unscaled,
        scaled,
        passes,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `f = exp(a v)`, `F = v + b(u + d)`, quadratic costs plus `κ(1 - cos θ)`.
    struct Toy {
        n: usize,
        a: f64,
        b: f64,
        kappa: f64,
    }

    impl SystemModel for Toy {
        fn horizon(&self) -> usize {
            self.n
        }
        fn kinematics(&self, _g: &Rotation2, v: f64) -> Result<Rotation2> {
            Ok(exp_so2(self.a * v))
        }
        fn dynamics(&self, _g: &Rotation2, v: f64, u: f64, d: f64) -> f64 {
            v + self.b * (u + d)
        }
        fn stage_cost(&self, _k: usize, g: &Rotation2, v: f64, u: f64, d: f64) -> f64 {
            0.5 * (u * u + 0.1 * v * v - 4.0 * d * d) + self.kappa * (1.0 - g.matrix()[(0, 0)])
        }
        fn terminal_cost(&self, g: &Rotation2, v: f64) -> f64 {
            0.5 * v * v + self.kappa * (1.0 - g.matrix()[(0, 0)])
        }
    }

    fn toy() -> Toy {
        Toy {
            n: 6,
            a: 0.2,
            b: 0.1,
            kappa: 0.3,
        }
    }

    fn toy_trajectory(m: &Toy) -> Trajectory {
        let u: Vec<f64> = (0..m.n).map(|k| 0.3 - 0.05 * k as f64).collect();
        let d: Vec<f64> = (0..m.n).map(|k| 0.01 * k as f64).collect();
        forward_rollout(m, exp_so2(1.1), 0.4, &u, &d).unwrap()
    }

    #[test]
    fn rollout_matches_closed_form() {
        let m = toy();
        let traj = toy_trajectory(&m);
        let mut theta = 1.1;
        let mut v = 0.4;
        for k in 0..m.n {
            assert!((log_so2(&traj.g[k]) - theta).abs() < 1e-13);
            assert!((traj.v[k] - v).abs() < 1e-15);
            theta += m.a * v;
            v += m.b * (traj.u[k] + traj.d[k]);
        }
    }

    #[test]
    fn numerical_partials_match_hand_derivatives() {
        let m = toy();
        let g = exp_so2(0.7);
        let p = numerical_stage_partials(&m, 0, &g, 0.4, 0.2, -0.1).unwrap();
        assert!((p.cost_v - 0.04).abs() < 1e-9);
        assert!((p.cost_u - 0.2).abs() < 1e-9);
        assert!((p.cost_d - 0.4).abs() < 1e-9);
        // d/ds κ(1 - cos(θ + s)) = κ sin θ
        assert!((p.cost_group - 0.3 * 0.7f64.sin()).abs() < 1e-9);
        assert!((p.increment_v - 0.2).abs() < 1e-9);
        assert!(p.increment_group.abs() < 1e-9);
        assert!((p.dynamics_u - 0.1).abs() < 1e-9);
    }

    #[test]
    fn backward_recursion_matches_hand_unrolled() {
        let m = toy();
        let traj = toy_trajectory(&m);
        let cov = backward_adjoints(&m, &traj).unwrap();
        let n = m.n;
        let sin = |k: usize| log_so2(&traj.g[k]).sin();
        // ζᴺ⁻¹ = -κ sin θ_N, ξᴺ⁻¹ = -v_N
        let mut zeta = -m.kappa * sin(n);
        let mut xi = -traj.v[n];
        assert!((cov[n - 1].zeta - zeta).abs() < 1e-9);
        assert!((cov[n - 1].xi - xi).abs() < 1e-9);
        for k in (1..n).rev() {
            let new_zeta = zeta - m.kappa * sin(k);
            let new_xi = -0.1 * traj.v[k] + zeta * m.a + xi;
            zeta = new_zeta;
            xi = new_xi;
            assert!((cov[k - 1].zeta - zeta).abs() < 1e-8, "ζ at {}", k - 1);
            assert!((cov[k - 1].xi - xi).abs() < 1e-8, "ξ at {}", k - 1);
        }
    }

    #[test]
    fn recursion_is_deterministic() {
        let m = toy();
        let traj = toy_trajectory(&m);
        assert_eq!(
            backward_adjoints(&m, &traj).unwrap(),
            backward_adjoints(&m, &traj).unwrap()
        );
    }

    #[test]
    fn zero_multiplier_gives_zero_covectors() {
        let m = toy();
        let traj = toy_trajectory(&m);
        let cov = backward_adjoints_with(&m, &traj, 0.0).unwrap();
        assert!(cov.iter().all(|c| c.zeta == 0.0 && c.xi == 0.0));
    }

    #[test]
    fn one_sided_recursions_are_negatives() {
        let m = toy();
        let traj = toy_trajectory(&m);
        let rep =
            subproblem_consistency(&m, &traj, None, Interval::unbounded(), Interval::unbounded())
                .unwrap();
        assert!(rep.negation_error <= COVECTOR_TOL);
        assert!(rep.combined_error <= COVECTOR_TOL);
        assert!(rep.zero_multiplier_vanishes);
    }

    #[test]
    fn pullback_is_identity_on_so2() {
        for (a, b, z) in [(0.3, 0.5, 1.7), (3.0, -3.1, -0.4), (-1.0, 2.0, 10.0)] {
            let rho = cotangent_pullback(z, &exp_so2(a), &exp_so2(b));
            assert!((rho - z).abs() <= 1e-8 * (1.0 + z.abs()), "{rho} vs {z}");
        }
    }

    #[test]
    fn variational_examples() {
        let iv = Interval::new(-1.0, 1.0);
        let free = Interval::unbounded();
        // interior stationary
        assert!(variational_from_gradients(0, 0.0, 0.0, 0.2, 0.0, iv, free, 1e-8).passed());
        // at the upper bound pushing outward
        assert!(variational_from_gradients(0, 0.5, 0.0, 1.0, 0.0, iv, free, 1e-8).u_ok);
        // interior with nonzero gradient
        assert!(!variational_from_gradients(0, 0.3, 0.0, 0.2, 0.0, iv, free, 1e-8).u_ok);
        // at the lower bound pushing outward is fine, inward is not
        assert!(variational_from_gradients(0, -0.5, 0.0, -1.0, 0.0, iv, free, 1e-8).u_ok);
        assert!(!variational_from_gradients(0, 0.5, 0.0, -1.0, 0.0, iv, free, 1e-8).u_ok);
        // disturbance minimises H: at its upper bound H must not decrease inward
        assert!(variational_from_gradients(0, 0.0, -0.5, 0.0, 1.0, free, iv, 1e-8).d_ok);
        assert!(!variational_from_gradients(0, 0.0, 0.5, 0.0, 1.0, free, iv, 1e-8).d_ok);
        assert!(!variational_from_gradients(0, 0.0, 0.3, 0.0, 0.0, free, iv, 1e-8).d_ok);
    }

    #[test]
    fn chart_cut_is_rejected() {
        struct HalfTurn;
        impl SystemModel for HalfTurn {
            fn horizon(&self) -> usize {
                1
            }
            fn kinematics(&self, _g: &Rotation2, _v: f64) -> Result<Rotation2> {
                Ok(exp_so2(std::f64::consts::PI))
            }
            fn dynamics(&self, _g: &Rotation2, v: f64, _u: f64, _d: f64) -> f64 {
                v
            }
            fn stage_cost(&self, _k: usize, _g: &Rotation2, _v: f64, _u: f64, _d: f64) -> f64 {
                0.0
            }
            fn terminal_cost(&self, _g: &Rotation2, _v: f64) -> f64 {
                0.0
            }
        }
        let t = StageTuple {
            k: 0,
            covectors: CovectorPair::default(),
            g: Rotation2::identity(),
            v: 0.0,
            u: 0.0,
            d: 0.0,
        };
        assert_eq!(hamiltonian(&HalfTurn, &t), Err(Error::ChartViolation));
    }

    #[test]
    fn scaling_by_one_is_bit_identical() {
        let m = toy();
        let traj = toy_trajectory(&m);
        let cov = backward_adjoints(&m, &traj).unwrap();
        let rep = scaling_invariance_check(
            &m,
            &traj,
            &cov,
            1.0,
            Interval::unbounded(),
            Interval::unbounded(),
        )
        .unwrap();
        assert_eq!(rep.scaled, rep.unscaled);
        assert!(scaling_invariance_check(
            &m,
            &traj,
            &cov,
            -1.0,
            Interval::unbounded(),
            Interval::unbounded()
        )
        .is_err());
    }
}
