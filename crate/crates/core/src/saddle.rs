//! Saddle-point verification for `F(u, d)`, minimised in `u` and maximised
//! in `d`.
//!
//! Two routes are provided. [`grid_saddle_check`] samples a finite box and
//! decides the saddle property three ways: directly from the defining
//! inequalities, through the union of the strict sublevel/superlevel sets
//! `Ω₁ ∪ Ω₂`, and through the pair `Ω₁′`, `Ω₂′`. [`sufficient_saddle_check`]
//! forms finite-difference gradients and Hessian blocks and certifies a
//! local saddle from their definiteness.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Width of the equality band around `F(u*, d*)` in the grid check.
pub const EQUALITY_BAND: f64 = 1e-12;

/// Base step of Hessian differences, scaled by `1 + |x|`.
pub const HESSIAN_STEP: f64 = 1e-4;

/// Base step of gradient differences, scaled by `1 + |x|`.
pub const GRADIENT_STEP: f64 = 1e-6;

/// Largest gradient entry accepted as stationary.
pub const GRADIENT_TOL: f64 = 1e-6;

/// One sampled axis: `count` evenly spaced points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParams(format!(
                "axis needs lo < hi and count >= 2, got [{lo}, {hi}] x {count}"
            )));
        }
        Ok(AxisRange { lo, hi, count })
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.hi
                } else {
                    self.lo + step * i as f64
                }
            })
            .collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub u_range: AxisRange,
    pub d_range: AxisRange,
}

impl GridSpec {
    /// `[lo, hi]²` with `count` points per axis.
    pub fn square(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let axis = AxisRange::new(lo, hi, count)?;
        Ok(GridSpec {
            u_range: axis,
            d_range: axis,
        })
    }
}

/// Verdicts of the three characterizations on the sampled box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSaddleReport {
    /// The box actually sampled. Nothing is claimed outside it.
    pub grid: GridSpec,
    pub candidate: (f64, f64),
    pub value: f64,
    /// `F(u*, d) ≤ F(u*, d*) ≤ F(u, d*)` on the sampled row and column.
    pub definition: bool,
    /// `(Ω₁ ∪ Ω₂ ∪ {c}) ∩ S = {c}`.
    pub union_sets: bool,
    /// `Ω₁′ ∩ S = {c}` and `Ω₂′ ∩ S = {c}`.
    pub separate_sets: bool,
    /// Sample points that break the definition, as `(u, d, F)`.
    pub witnesses: Vec<(f64, f64, f64)>,
}

impl GridSaddleReport {
    pub fn agree(&self) -> bool {
        self.definition == self.union_sets && self.union_sets == self.separate_sets
    }

    pub fn is_saddle(&self) -> bool {
        self.agree() && self.definition
    }
}

fn eval<F: Fn(&[f64], &[f64]) -> f64>(f: &F, u: f64, d: f64) -> Result<f64> {
    let y = f(&[u], &[d]);
    if !y.is_finite() {
        return Err(Error::NumericalBreakdown(format!("F({u}, {d}) = {y}")));
    }
    Ok(y)
}

/// Decides whether `candidate` is a saddle of `f` restricted to the sampled
/// box. The sample set is the grid together with the candidate's row
/// `{(uᵢ, d*)}` and column `{(u*, dⱼ)}`.
pub fn grid_saddle_check<F>(f: F, grid: &GridSpec, candidate: (f64, f64)) -> Result<GridSaddleReport>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let (us, ds) = candidate;
    if !grid.u_range.contains(us) || !grid.d_range.contains(ds) {
        return Err(Error::InvalidParams(format!(
            "candidate ({us}, {ds}) outside the sampled box"
        )));
    }
    let fs = eval(&f, us, ds)?;
    let u_pts = grid.u_range.points();
    let d_pts = grid.d_range.points();

    let mut samples: Vec<(f64, f64)> = Vec::with_capacity((u_pts.len() + 1) * (d_pts.len() + 1));
    for &u in &u_pts {
        for &d in &d_pts {
            samples.push((u, d));
        }
        samples.push((u, ds));
    }
    for &d in &d_pts {
        samples.push((us, d));
    }
    samples.push(candidate);

    // definition: row and column only
    let mut definition = true;
    let mut witnesses = Vec::new();
    for &u in &u_pts {
        let y = eval(&f, u, ds)?;
        if y < fs - EQUALITY_BAND {
            definition = false;
            witnesses.push((u, ds, y));
        }
    }
    for &d in &d_pts {
        let y = eval(&f, us, d)?;
        if y > fs + EQUALITY_BAND {
            definition = false;
            witnesses.push((us, d, y));
        }
    }

    // set characterizations over the whole sample set
    let mut in_omega1 = Vec::new();
    let mut in_omega2 = Vec::new();
    for &(u, d) in &samples {
        if (u, d) == candidate {
            continue;
        }
        let on_row = d == ds;
        let on_col = u == us;
        if !on_row && !on_col {
            continue;
        }
        let y = eval(&f, u, d)?;
        if on_row && y < fs - EQUALITY_BAND {
            in_omega1.push((u, d));
        }
        if on_col && y > fs + EQUALITY_BAND {
            in_omega2.push((u, d));
        }
    }
    let union_sets = in_omega1.iter().chain(&in_omega2).all(|p| *p == candidate);
    let separate_sets = in_omega1.is_empty() && in_omega2.is_empty();

    Ok(GridSaddleReport {
        grid: *grid,
        candidate,
        value: fs,
        definition,
        union_sets,
        separate_sets,
        witnesses,
    })
}

/// Second-order certificate at a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianReport {
    /// ∞-norm of `∇_u F`.
    pub grad_u_norm: f64,
    /// ∞-norm of `∇_d F`.
    pub grad_d_norm: f64,
    pub min_eig_huu: f64,
    pub max_eig_hdd: f64,
    pub is_saddle_certified: bool,
}

fn check_finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NumericalBreakdown(format!("non-finite {what}")))
    }
}

/// Central-difference gradient and Hessian of `g` at `x`.
fn gradient_and_hessian<G: Fn(&[f64]) -> f64>(
    g: &G,
    x: &[f64],
    hess_step: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = x.len();
    let f0 = check_finite(g(x), "function value")?;
    let mut p = x.to_vec();
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let h = GRADIENT_STEP * (1.0 + x[i].abs());
        p[i] = x[i] + h;
        let fp = g(&p);
        p[i] = x[i] - h;
        let fm = g(&p);
        p[i] = x[i];
        grad[i] = check_finite((fp - fm) / (2.0 * h), "gradient entry")?;
    }
    let steps: Vec<f64> = x.iter().map(|xi| hess_step * (1.0 + xi.abs())).collect();
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let hi = steps[i];
        p[i] = x[i] + hi;
        let fp = g(&p);
        p[i] = x[i] - hi;
        let fm = g(&p);
        p[i] = x[i];
        hess[(i, i)] = check_finite((fp - 2.0 * f0 + fm) / (hi * hi), "Hessian entry")?;
        for j in 0..i {
            let hj = steps[j];
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * hi;
                p[j] = x[j] + sj * hj;
                let y = g(&p);
                p[i] = x[i];
                p[j] = x[j];
                y
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0)
                + corner(-1.0, -1.0))
                / (4.0 * hi * hj);
            let v = check_finite(v, "Hessian entry")?;
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((grad, hess))
}

/// Finite-difference certificate: both gradients vanish, the `u` block of
/// the Hessian is positive definite and the `d` block negative definite.
/// `fd_step` is the Hessian base step, scaled per coordinate by `1 + |x|`.
pub fn sufficient_saddle_check<F>(f: F, u: &[f64], d: &[f64], fd_step: f64) -> Result<HessianReport>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if !(fd_step > 0.0) {
        return Err(Error::InvalidParams(format!("fd_step must be positive, got {fd_step}")));
    }
    let (gu, huu) = gradient_and_hessian(&|x: &[f64]| f(x, d), u, fd_step)?;
    let (gd, hdd) = gradient_and_hessian(&|x: &[f64]| f(u, x), d, fd_step)?;
    let norm = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let grad_u_norm = norm(&gu);
    let grad_d_norm = norm(&gd);
    let min_eig_huu = symmetric_eigenvalues(&huu)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let max_eig_hdd = symmetric_eigenvalues(&hdd)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(HessianReport {
        grad_u_norm,
        grad_d_norm,
        min_eig_huu,
        max_eig_hdd,
        is_saddle_certified: grad_u_norm <= GRADIENT_TOL
            && grad_d_norm <= GRADIENT_TOL
            && min_eig_huu > 0.0
            && max_eig_hdd < 0.0,
    })
}

/// Eigenvalues of the symmetric part of `a` by cyclic Jacobi rotations,
/// in ascending order.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let mut m = (a + a.transpose()) * 0.5;
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    eig
}
