//! Acceptance battery shared by `selab verify` and the `acceptance` test
//! target. Each check prints as one pass/fail line.

use std::f64::consts::PI;
use std::time::Instant;

use crate::bifurcation::{estimate_lambda_star, lambda0_bound, lambda_sweep, reference_mass, SweepOptions};
use crate::comparison::{check_ordering, lemma_psi, random_suite, Conclusion};
use crate::config::ProblemConfig;
use crate::constructions::{build_subsolution_eigen, build_supersolution, eigen_threshold, solve_convection_problem};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::hprofile::{build_h_profile, verify_h_bound};
use crate::linalg::norm_inf;
use crate::model::{make_problem, Potential, ProblemSpec, ReactionTerm, SingularTerm};
use crate::solver::{self, newton_solve, residual, Verdict};
use crate::spectral::{default_collar_width, first_eigenpair, hopf_collar};

pub const THEOREM1_CFG: &str = include_str!("../../../configs/theorem1.cfg");
pub const THEOREM2_CFG: &str = include_str!("../../../configs/theorem2.cfg");
pub const THEOREM3_CFG: &str = include_str!("../../../configs/theorem3.cfg");

/// Names accepted by `--only`, in run order.
pub const CHECKS: [&str; 9] = [
    "eigen",
    "hprofile",
    "mms",
    "theorem1",
    "theorem2",
    "theorem3",
    "comparison",
    "monotonicity",
    "certificate",
];

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    /// Run only checks whose name contains this string.
    pub only: Option<String>,
    /// Replace every grid size in the battery by this node count.
    pub n_override: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub criterion: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {:<12} {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

struct Ctx {
    n_override: Option<usize>,
    seed: u64,
}

impl Ctx {
    fn n(&self, n: usize) -> usize {
        self.n_override.unwrap_or(n)
    }

    fn config(&self, text: &str) -> Result<ProblemSpec> {
        let mut c = ProblemConfig::parse(text)?;
        c.n = self.n(c.n);
        c.to_spec()
    }
}

type Outcome = Result<(bool, String)>;

fn eigen(ctx: &Ctx) -> Outcome {
    let e1 = first_eigenpair(&Grid::interval(1.0, ctx.n(1023))?, 1e-10)?;
    let d1 = (e1.lambda1 - PI * PI).abs();
    let e3 = first_eigenpair(&Grid::interval(1.0, 3)?, 1e-13)?;
    let closed = 32.0 * (1.0 - (PI / 4.0).cos());
    let d3 = (e3.lambda1 - closed).abs();
    let m = ctx.n(255);
    let e2 = first_eigenpair(&Grid::rectangle(1.0, 1.0, m, m)?, 1e-10)?;
    let d2 = (e2.lambda1 - 2.0 * PI * PI).abs();
    let ok = d1 < 1e-4 && d3 < 1e-10 && (e3.lambda1 - 9.3726).abs() < 1e-4 && d2 < 1e-2;
    Ok((
        ok,
        format!("|l1-pi^2|={d1:.2e} |l1(n=3)-closed|={d3:.1e} |l1-2pi^2|={d2:.2e}"),
    ))
}

fn hprofile(_: &Ctx) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut bound_ok = true;
    for alpha in [0.25, 0.5, 0.75] {
        let g = SingularTerm::power(alpha)?;
        let p = build_h_profile(&g, 1.0, 1e-9)?;
        let beta = 2.0 / (alpha + 1.0);
        let c = ((alpha + 1.0) / 2.0 * (2.0 / (1.0 - alpha)).sqrt()).powf(beta);
        for i in 1..p.len() {
            let exact = c * p.t()[i].powf(beta);
            worst = worst.max((p.h()[i] - exact).abs() / exact);
        }
        let b = verify_h_bound(&p, 1e-9);
        bound_ok &= b.passed && (b.max_ratio - 1.0 / (alpha + 1.0)).abs() < 1e-6;
    }
    let rejected = [1.0, 1.5].iter().all(|&a| {
        matches!(
            build_h_profile(&SingularTerm::Power { alpha: a }, 1.0, 1e-8),
            Err(Error::KellerOsserman)
        )
    });
    Ok((
        worst < 1e-6 && bound_ok && rejected,
        format!("max rel err {worst:.2e}, bound ok {bound_ok}, alpha>=1 rejected {rejected}"),
    ))
}

fn mms_spec(n: usize) -> Result<ProblemSpec> {
    make_problem(
        Grid::interval(1.0, n)?,
        Potential::Constant(-1.0),
        SingularTerm::power(0.5)?,
        ReactionTerm::power(0.5)?,
        1.0,
        1.0,
        0.05,
    )
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn mms(ctx: &Ctx) -> Outcome {
    // Exactly representable solution x(1-x) with its discrete source.
    let mut exact_err: f64 = 0.0;
    for n in [ctx.n(16), ctx.n(63), ctx.n(255)] {
        let s = mms_spec(n)?;
        let ustar = s.grid().field_from(|p| p[0] * (1.0 - p[0]));
        let s = s.with_source(residual(&s, &ustar)?)?;
        let init = ustar.map(|v| 0.5 * v + 0.1);
        let rep = newton_solve(&s, &init, 1e-11, 60)?;
        exact_err = exact_err.max(sup_diff(&rep.solution, &ustar));
    }
    // Smooth u* = e^x sin(πx) with the continuum source.
    let u = |x: f64| x.exp() * (PI * x).sin();
    let du = |x: f64| x.exp() * ((PI * x).sin() + PI * (PI * x).cos());
    let d2u = |x: f64| x.exp() * ((1.0 - PI * PI) * (PI * x).sin() + 2.0 * PI * (PI * x).cos());
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    let ns: Vec<usize> = match ctx.n_override {
        Some(n) => vec![n, 2 * n, 4 * n],
        None => vec![32, 64, 128],
    };
    for &n in &ns {
        let s = mms_spec(n)?;
        let src = s
            .grid()
            .field_from(|p| {
                let x = p[0];
                -d2u(x) - (u(x) + 0.05).powf(-0.5) + du(x).abs() - u(x).sqrt()
            });
        let s = s.with_source(src)?;
        let ustar = s.grid().field_from(|p| u(p[0]));
        let rep = newton_solve(&s, &ustar.map(|v| 0.9 * v + 0.01), 1e-11, 60)?;
        errs.push(sup_diff(&rep.solution, &ustar));
        hs.push(s.grid().spacing()[0]);
    }
    let orders: Vec<f64> = (1..errs.len())
        .map(|i| (errs[i - 1] / errs[i]).ln() / (hs[i - 1] / hs[i]).ln())
        .collect();
    let ok = exact_err < 1e-8 && orders.iter().all(|o| (o - 2.0).abs() <= 0.2);
    Ok((
        ok,
        format!(
            "x(1-x) err {exact_err:.1e}; smooth errs {:?} orders {:?}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>(),
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        ),
    ))
}

fn theorem1(ctx: &Ctx) -> Outcome {
    let base = ctx.config(THEOREM1_CFG)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for lambda in [0.1, 1.0, 10.0] {
        let s = base.with_lambda(lambda)?;
        let rep = solver::solve_with_continuation(&s, &solver::default_schedule(), 1e-9, 100)?;
        let eps = *rep.eps_path.last().unwrap_or(&f64::NAN);
        let res = norm_inf(&residual(&s.with_eps(eps)?, &rep.solution)?);
        let good = rep.verdict == Verdict::Converged && res < 1e-8 && rep.min_interior > 0.0;
        ok &= good;
        parts.push(format!("l={lambda}: {} res {res:.1e} min {:.2e}", rep.verdict.as_str(), rep.min_interior));
    }
    let grid = Grid::interval(1.0, ctx.n(255))?;
    let v = solve_convection_problem(&grid, 1.0, &grid.constant(1.0))?;
    let mid = v.field[grid.len() / 2];
    let dv = (mid - ((-0.5f64).exp() - 0.5)).abs();
    ok &= dv < 1e-4;
    parts.push(format!("v(0.5) err {dv:.1e}"));
    Ok((ok, parts.join("; ")))
}

fn theorem2(ctx: &Ctx) -> Outcome {
    let base = ctx.config(THEOREM2_CFG)?;
    let schedule = solver::default_schedule();
    let mut ok = true;
    let mut parts = Vec::new();
    for lambda in [1.0, 10.0, 100.0] {
        let s = base.with_lambda(lambda)?;
        let rep = solver::solve_with_continuation(&s, &schedule, 1e-8, 100)?;
        let (growth, source) = if rep.mass_path.len() >= 2 {
            let m = &rep.mass_path;
            (m[m.len() - 1] / m[m.len() - 2], "path")
        } else {
            let c2 = build_supersolution(&s)?.meta.c2.expect("fit");
            let n = schedule.len();
            let r = |e: f64| reference_mass(s.grid(), s.singular(), c2, e);
            (r(schedule[n - 1]) / r(schedule[n - 2]), "reference")
        };
        let good = rep.verdict == Verdict::NonexistenceIndicated && (growth - 1.41).abs() <= 0.15;
        ok &= good;
        parts.push(format!("l={lambda}: {} growth {growth:.3} ({source})", rep.verdict.as_str()));
    }
    Ok((ok, parts.join("; ")))
}

fn theorem3(ctx: &Ctx) -> Outcome {
    let coarse = ctx.config(THEOREM3_CFG)?;
    let n = coarse.grid().n_interior()[0];
    let fine = coarse.with_grid(Grid::interval(1.0, 2 * n)?)?;
    let opts = SweepOptions::default();
    let a = estimate_lambda_star(&coarse, 0.1, 100.0, 12, &opts)?;
    let b = estimate_lambda_star(&fine, 0.1, 100.0, 12, &opts)?;
    let eig = first_eigenpair(coarse.grid(), 1e-10)?;
    let l0 = lambda0_bound(&coarse, &eig)?;
    let (ma, mb) = match (a.midpoint(), b.midpoint()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Ok((false, format!("bracket not finite: {:?} {:?}", a.sentinel, b.sentinel))),
    };
    let shift = (mb - ma).abs() / ma;
    let ok = shift < 0.1 && l0 == 1.0 && a.lambda0_consistent() && b.lambda0_consistent();
    Ok((
        ok,
        format!(
            "n={n}: [{:.4}, {:.4}]  n={}: [{:.4}, {:.4}]  shift {:.2}%  lambda0 {l0}",
            a.lo.unwrap_or(f64::NAN),
            a.hi.unwrap_or(f64::NAN),
            2 * n,
            b.lo.unwrap_or(f64::NAN),
            b.hi.unwrap_or(f64::NAN),
            100.0 * shift
        ),
    ))
}

fn comparison(ctx: &Ctx) -> Outcome {
    let suite = random_suite(ctx.seed, 50)?;
    let mut ordered = 0;
    let mut confirmed = 0;
    let mut worst: f64 = 0.0;
    for inst in &suite {
        let psi = |k: usize, s: f64| inst.psi(k, s);
        let r = check_ordering(&inst.grid, &psi, &inst.v, &inst.w, 1e-8)?;
        worst = worst.max(r.max_violation);
        ordered += usize::from(r.ordered && r.max_violation <= 1e-8);
        confirmed += usize::from(r.conclusion == Conclusion::Confirmed);
    }
    let inst = &suite[0];
    let psi = |k: usize, s: f64| inst.psi(k, s);
    let bad = check_ordering(&inst.grid, &psi, &inst.w.scaled(2.0), &inst.w, 1e-8)?;
    let flagged = bad.conclusion == Conclusion::HypothesesFailed;
    Ok((
        ordered == suite.len() && flagged,
        format!(
            "{ordered}/{} ordered ({confirmed} with all hypotheses), max violation {worst:.1e}; v=2w -> {:?}",
            suite.len(),
            bad.conclusion
        ),
    ))
}

fn monotonicity(ctx: &Ctx) -> Outcome {
    let base = ctx.config(THEOREM3_CFG)?;
    let lambdas: Vec<f64> = (0..12).map(|i| 10f64.powf(i as f64 * 2.0 / 11.0)).collect();
    let warm = lambda_sweep(
        &base,
        &lambdas,
        &SweepOptions {
            warm_start: true,
            ..SweepOptions::default()
        },
    )?;
    let cold = lambda_sweep(&base, &lambdas, &SweepOptions::default())?;
    let sols: Vec<&Field> = warm.entries.iter().filter_map(|e| e.solution.as_ref()).collect();
    let mut worst: f64 = 0.0;
    for w in sols.windows(2) {
        worst = worst.max(w[0].iter().zip(w[1].iter()).fold(0.0f64, |m, (a, b)| m.max(a - b)));
    }
    let converged = warm.entries.iter().filter(|e| e.verdict == Verdict::Converged).count();
    let ok = warm.is_up_set() && cold.is_up_set() && worst <= 1e-8;
    Ok((
        ok,
        format!(
            "up-set warm {} cold {}; {converged}/12 converged; max(u_i - u_j)+ {worst:.1e}",
            warm.is_up_set(),
            cold.is_up_set()
        ),
    ))
}

fn certificate(ctx: &Ctx) -> Outcome {
    let base = ctx.config(THEOREM3_CFG)?;
    let grid = base.grid().clone();
    let eig = first_eigenpair(&grid, 1e-10)?;
    let collar = hopf_collar(&grid, &eig, default_collar_width(&grid))?;
    let profile = build_h_profile(base.singular(), eig.phi.max(), 1e-9)?;
    let th = eigen_threshold(&base, &eig, &collar, &profile)?;
    let spec = base.with_lambda(2.0 * th.lambda_threshold)?;
    let sub = build_subsolution_eigen(&spec, &eig, &collar, &profile)?;
    let nonpos = sub.certificate.iter().filter(|r| **r <= 0.0).count();
    let sup = build_supersolution(&spec)?;
    let psi = lemma_psi(&spec);
    let r = check_ordering(&grid, &psi, &sub.field, &sup.field, 1e-8)?;
    let ok = nonpos == grid.len() && r.ordered && r.conclusion == Conclusion::Confirmed;
    Ok((
        ok,
        format!(
            "lambda_threshold {:.4}, M {}, residual <= 0 at {nonpos}/{} nodes (max {:.2e}), ordering {:?} (violation {:.1e})",
            th.lambda_threshold,
            th.m,
            grid.len(),
            sub.meta.residual_max,
            r.conclusion,
            r.max_violation
        ),
    ))
}

/// Runs the selected checks in order.
pub fn run(opts: &VerifyOptions) -> Vec<CheckResult> {
    let ctx = Ctx {
        n_override: opts.n_override,
        seed: opts.seed,
    };
    let table: [(&'static str, fn(&Ctx) -> Outcome); 9] = [
        ("eigen", eigen),
        ("hprofile", hprofile),
        ("mms", mms),
        ("theorem1", theorem1),
        ("theorem2", theorem2),
        ("theorem3", theorem3),
        ("comparison", comparison),
        ("monotonicity", monotonicity),
        ("certificate", certificate),
    ];
    let mut out = Vec::new();
    for (i, (name, f)) in table.into_iter().enumerate() {
        if let Some(filter) = &opts.only {
            if !name.contains(filter.as_str()) {
                continue;
            }
        }
        let t = Instant::now();
        let (passed, detail) = match f(&ctx) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        out.push(CheckResult {
            criterion: i + 1,
            name,
            passed,
            detail,
            seconds: t.elapsed().as_secs_f64(),
        });
    }
    out
}
