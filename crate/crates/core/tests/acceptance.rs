//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p lie-minmax --test acceptance`.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{Matrix4, Vector4};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use lie_minmax::config::{preset, RunConfig, PRESET_NAMES};
use lie_minmax::lie_so2::{exp_so2, group_deviation_cost, log_so2};
use lie_minmax::lq_game::{lq_trajectory, max_delta, riccati_recursion};
use lie_minmax::nlsolve::SolverConfig;
use lie_minmax::pmp::{
    hamiltonian, hamiltonian_gradient, numerical_stage_partials, scaling_invariance_check,
    CovectorPair, StageTuple, SystemModel,
};
use lie_minmax::saddle::{grid_saddle_check, GridSpec};
use lie_minmax::spacecraft::{
    kinematics_factor, simulate, unwinding_profile, wrap_angle, ProblemParams, SpacecraftModel,
    TrajectorySolution,
};

type Verdict = (bool, String);

struct PresetRun {
    name: &'static str,
    config: RunConfig,
    elapsed: Duration,
    result: Result<TrajectorySolution, String>,
}

fn preset_runs() -> &'static [PresetRun] {
    static RUNS: OnceLock<Vec<PresetRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        PRESET_NAMES
            .iter()
            .map(|&name| {
                let config = preset(name).expect("preset exists");
                let guess = config.guess.resolve(&config.params);
                let start = Instant::now();
                let result = simulate(&config.params, &guess, &config.solver).map_err(|e| e.to_string());
                PresetRun {
                    name,
                    config,
                    elapsed: start.elapsed(),
                    result,
                }
            })
            .collect()
    })
}

fn lq_params() -> ProblemParams {
    ProblemParams {
        v0: 0.3,
        ..ProblemParams::default()
    }
}

fn lq_run() -> &'static (Result<TrajectorySolution, String>, Duration) {
    static RUN: OnceLock<(Result<TrajectorySolution, String>, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let p = lq_params();
        let start = Instant::now();
        let res = simulate(&p, &vec![0.0; p.n], &SolverConfig::default()).map_err(|e| e.to_string());
        (res, start.elapsed())
    })
}

fn criterion_1() -> Verdict {
    let p = lq_params();
    let (res, elapsed) = lq_run();
    let sol = match res {
        Ok(s) => s,
        Err(e) => return (false, format!("solve failed: {e}")),
    };
    let lq = lq_trajectory(&p, &riccati_recursion(&p).unwrap()).unwrap();
    let delta = max_delta(sol, &lq);
    let fast = elapsed.as_secs_f64() < 2.0;
    (
        delta <= 1e-8 && fast,
        format!("max |dv|,|du|,|dd| = {delta:.3e}, solve time {:.3} s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Verdict {
    let p = lq_params();
    let sol = match &lq_run().0 {
        Ok(s) => s,
        Err(e) => return (false, format!("solve failed: {e}")),
    };
    let mu2 = p.mu * p.mu;
    let mut worst_u: f64 = 0.0;
    let mut worst_d: f64 = 0.0;
    for k in 0..p.n {
        worst_u = worst_u.max((sol.u[k] - p.s * sol.xi[k]).abs());
        worst_d = worst_d.max((sol.d[k] + p.s * sol.xi[k] / mu2).abs());
    }
    (
        worst_u <= 1e-12 && worst_d <= 1e-12,
        format!("max |u - s xi| = {worst_u:.3e}, max |d + s xi/mu^2| = {worst_d:.3e}"),
    )
}

fn criterion_3() -> Verdict {
    let p = ProblemParams {
        n: 2,
        v0: 1.0,
        ..ProblemParams::default()
    };
    let (s, l2, m2, v0) = (p.s, p.lambda_v * p.lambda_v, p.mu * p.mu, p.v0);
    // unknowns (u0, d0, u1, d1); v1 = v0 + s(u0 + d0), v2 = v1 + s(u1 + d1)
    // ∂J/∂u1 = u1 + sΛ²v2, ∂J/∂d1 = -μ²d1 + sΛ²v2,
    // ∂J/∂u0 = u0 + sΛ²(v1 + v2), ∂J/∂d0 = -μ²d0 + sΛ²(v1 + v2)
    let a = s * s * l2;
    let mat = Matrix4::new(
        1.0 + 2.0 * a, 2.0 * a, a, a,
        2.0 * a, 2.0 * a - m2, a, a,
        a, a, 1.0 + a, a,
        a, a, a, a - m2,
    );
    let rhs = Vector4::new(-2.0 * s * l2 * v0, -2.0 * s * l2 * v0, -s * l2 * v0, -s * l2 * v0);
    let exact = match mat.lu().solve(&rhs) {
        Some(x) => x,
        None => return (false, "stationarity system is singular".into()),
    };
    let sol = match simulate(&p, &[0.0, 0.0], &SolverConfig::default()) {
        Ok(s) => s,
        Err(e) => return (false, format!("solve failed: {e}")),
    };
    let pmp = Vector4::new(sol.u[0], sol.d[0], sol.u[1], sol.d[1]);
    let err = (pmp - exact).amax();
    (err <= 1e-10, format!("max deviation from the stationary point {err:.3e}"))
}

fn criterion_4() -> Verdict {
    let runs = preset_runs();
    let mut ok = true;
    let mut notes = Vec::new();
    for run in runs {
        let sol = match &run.result {
            Ok(s) => s,
            Err(e) => {
                ok = false;
                notes.push(format!("{}: {e}", run.name));
                continue;
            }
        };
        let cert = sol.certificates.as_ref().expect("simulate attaches certificates");
        let residual_ok = sol.residual_inf <= 1e-9;
        let var_ok = cert.variational.len() == run.config.params.n && cert.variational_passed();
        let h = &cert.saddle;
        let saddle_ok = h.min_eig_huu > 0.0 && h.max_eig_hdd < 0.0;
        let time_ok = run.elapsed.as_secs_f64() < 10.0;
        let this = residual_ok && var_ok && saddle_ok && time_ok;
        ok &= this;
        notes.push(format!(
            "{}[{} res={:.1e} var={} eig_uu={:.3} eig_dd={:+.3} {:.2}s]",
            run.name,
            if this { "ok" } else { "FAIL" },
            sol.residual_inf,
            var_ok,
            h.min_eig_huu,
            h.max_eig_hdd,
            run.elapsed.as_secs_f64()
        ));
    }
    let find = |n: &str| runs.iter().find(|r| r.name == n).and_then(|r| r.result.as_ref().ok());
    match (find("S17"), find("UW4")) {
        (Some(a), Some(b)) => {
            let gap = a
                .theta
                .iter()
                .zip(&b.theta)
                .map(|(x, y)| wrap_angle(x - y).abs())
                .fold(0.0, f64::max);
            let prof = unwinding_profile(&b.theta);
            let unwinds = prof.unwinds(b.horizon());
            ok &= gap > 0.1 && unwinds;
            notes.push(format!(
                "S17/UW4 gap {gap:.3}; UW4 distance {:.3} -> peak {:.3} at k={} -> {:.3}",
                prof.initial, prof.peak, prof.peak_stage, prof.last
            ));
        }
        _ => ok = false,
    }
    (ok, notes.join("; "))
}

fn converged_presets() -> Vec<(&'static PresetRun, &'static TrajectorySolution)> {
    preset_runs()
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|s| (r, s)))
        .collect()
}

fn criterion_5() -> Verdict {
    let runs = converged_presets();
    let mut worst: f64 = 0.0;
    for (_, sol) in &runs {
        let sub = &sol.certificates.as_ref().unwrap().subproblem;
        for (a, b) in sub.min_covectors.iter().zip(&sub.max_covectors) {
            worst = worst.max((a.zeta + b.zeta).abs()).max((a.xi + b.xi).abs());
        }
    }
    (
        !runs.is_empty() && worst <= 1e-12,
        format!("{} presets, max |min + max| = {worst:.3e}", runs.len()),
    )
}

fn criterion_6() -> Verdict {
    let runs = converged_presets();
    let all_zero = runs
        .iter()
        .all(|(_, s)| s.certificates.as_ref().unwrap().subproblem.zero_multiplier_vanishes);
    (
        !runs.is_empty() && all_zero,
        format!("{} presets, zero multiplier gives exact zeros: {all_zero}", runs.len()),
    )
}

fn criterion_7() -> Verdict {
    let runs = converged_presets();
    let mut ok = !runs.is_empty();
    let mut worst: f64 = 0.0;
    for (run, sol) in &runs {
        let p = &run.config.params;
        let model = SpacecraftModel::new(*p);
        let traj = sol.to_trajectory();
        let cov = sol.covectors();
        for r in [0.5, 2.0, 10.0] {
            match scaling_invariance_check(&model, &traj, &cov, r, p.u_interval(), p.d_interval()) {
                Ok(rep) => {
                    let s = rep.scaled;
                    worst = worst
                        .max(s.state)
                        .max(s.adjoint)
                        .max(s.transversality)
                        .max(s.variational);
                    ok &= rep.passed();
                }
                Err(_) => ok = false,
            }
        }
    }
    (
        ok,
        format!("{} presets x r in {{0.5, 2, 10}}, worst scaled residual {worst:.3e}", runs.len()),
    )
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / 1f64.max(a.abs()).max(n.abs())
}

fn criterion_8() -> Verdict {
    let mut rng = StdRng::seed_from_u64(20240917);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = ProblemParams {
            lambda_v: rng.random_range(0.0..1.0),
            lambda_u: rng.random_range(0.1..2.0),
            mu: rng.random_range(0.5..3.0),
            psi: rng.random_range(0.0..1.0),
            ..ProblemParams::default()
        };
        let model = SpacecraftModel::new(p);
        let t = StageTuple {
            k: rng.random_range(0..p.n),
            covectors: CovectorPair::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            g: exp_so2(rng.random_range(-PI..PI)),
            v: rng.random_range(-9.9..9.9),
            u: rng.random_range(-2.0..2.0),
            d: rng.random_range(-2.0..2.0),
        };
        let grad = hamiltonian_gradient(&model, &t).unwrap();
        let h = |t: &StageTuple| hamiltonian(&model, t).unwrap();
        let central = |x: f64, set: &dyn Fn(&mut StageTuple, f64)| {
            let step = 1e-6 * (1.0 + x.abs());
            let mut hi = t;
            set(&mut hi, x + step);
            let mut lo = t;
            set(&mut lo, x - step);
            (h(&hi) - h(&lo)) / (2.0 * step)
        };
        let fd_v = central(t.v, &|s, x| s.v = x);
        let fd_u = central(t.u, &|s, x| s.u = x);
        let fd_d = central(t.d, &|s, x| s.d = x);
        let fd_zeta = central(t.covectors.zeta, &|s, x| s.covectors.zeta = x);
        let fd_xi = central(t.covectors.xi, &|s, x| s.covectors.xi = x);
        let fd_group = {
            let step = 1e-6;
            let mut hi = t;
            hi.g = t.g.perturbed(step);
            let mut lo = t;
            lo.g = t.g.perturbed(-step);
            (h(&hi) - h(&lo)) / (2.0 * step)
        };
        for (a, n) in [
            (grad.v, fd_v),
            (grad.u, fd_u),
            (grad.d, fd_d),
            (grad.zeta, fd_zeta),
            (grad.xi, fd_xi),
            (grad.group, fd_group),
        ] {
            worst = worst.max(rel_err(a, n));
        }
        let analytic = model.stage_partials(t.k, &t.g, t.v, t.u, t.d).unwrap();
        let numeric = numerical_stage_partials(&model, t.k, &t.g, t.v, t.u, t.d).unwrap();
        for (a, n) in [
            (analytic.cost_v, numeric.cost_v),
            (analytic.cost_u, numeric.cost_u),
            (analytic.cost_d, numeric.cost_d),
            (analytic.cost_group, numeric.cost_group),
            (analytic.increment_v, numeric.increment_v),
            (analytic.increment_group, numeric.increment_group),
        ] {
            worst = worst.max(rel_err(a, n));
        }
    }
    (worst <= 1e-6, format!("100 random points, worst relative error {worst:.3e}"))
}

fn criterion_9() -> Verdict {
    let mut log_exp: f64 = 0.0;
    let mut cost: f64 = 0.0;
    let mut kin: f64 = 0.0;
    let s = 0.1;
    for i in 0..1000 {
        let x = -PI + 2.0 * PI * (i + 1) as f64 / 1000.0;
        log_exp = log_exp.max((log_so2(&exp_so2(x)) - x).abs());
        let theta = 2.0 * PI * i as f64 / 1000.0;
        cost = cost.max((group_deviation_cost(&exp_so2(theta)) - 4.0 * (theta / 2.0).sin().powi(2)).abs());
        let sv = -0.999 + 1.998 * i as f64 / 999.0;
        let f = kinematics_factor(sv / s, s).unwrap();
        kin = kin.max((f.matrix() - exp_so2((s * (sv / s)).asin()).matrix()).amax());
    }
    (
        log_exp <= 1e-12 && cost <= 1e-12 && kin <= 1e-12,
        format!("log(exp) {log_exp:.1e}, deviation cost {cost:.1e}, kinematics {kin:.1e}"),
    )
}

fn criterion_10() -> Verdict {
    let grid = GridSpec::square(-1.0, 1.0, 21).unwrap();
    let cases: [(&str, fn(&[f64], &[f64]) -> f64, (f64, f64), bool); 3] = [
        ("u^2-d^2", |u, d| u[0] * u[0] - d[0] * d[0], (0.0, 0.0), true),
        ("u^2+d^2", |u, d| u[0] * u[0] + d[0] * d[0], (0.0, 0.0), false),
        (
            "shifted",
            |u, d| (u[0] - 0.5).powi(2) - (d[0] + 0.5).powi(2),
            (0.5, -0.5),
            true,
        ),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, f, c, expect) in cases {
        let rep = grid_saddle_check(f, &grid, c).unwrap();
        ok &= rep.agree() && rep.definition == expect;
        notes.push(format!(
            "{name}: ({}, {}, {})",
            rep.definition, rep.union_sets, rep.separate_sets
        ));
    }
    (ok, notes.join("; "))
}

fn criterion_11() -> Verdict {
    let p = ProblemParams::default();
    let sol = match simulate(&p, &vec![0.0; p.n], &SolverConfig::default()) {
        Ok(s) => s,
        Err(e) => return (false, format!("solve failed: {e}")),
    };
    let zero = sol
        .theta
        .iter()
        .chain(&sol.v)
        .chain(&sol.u)
        .chain(&sol.d)
        .chain(&sol.zeta)
        .chain(&sol.xi)
        .all(|x| *x == 0.0);
    (
        zero && sol.residual_inf == 0.0,
        format!("all sequences zero: {zero}, residual {:e}", sol.residual_inf),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("LQ oracle equivalence", criterion_1),
        ("input/covector identity on the LQ run", criterion_2),
        ("two-stage game stationary point", criterion_3),
        ("reference presets converge and certify", criterion_4),
        ("one-sided covectors are negatives", criterion_5),
        ("zero multiplier gives zero covectors", criterion_6),
        ("multiplier scaling invariance", criterion_7),
        ("Hamiltonian gradient fidelity", criterion_8),
        ("geometry identities", criterion_9),
        ("grid saddle characterizations agree", criterion_10),
        ("equilibrium fixed point", criterion_11),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let (passed, detail) = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| (false, "panicked".to_string()));
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {title}: {detail}",
            i + 1,
            if passed { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
