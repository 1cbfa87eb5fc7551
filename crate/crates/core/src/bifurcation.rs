//! λ-sweeps, bisection for the existence threshold λ*, the lower bound λ₀
//! and the singular-mass diagnostic along an ε-schedule.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::constructions::build_supersolution;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{ProblemSpec, SignRegime};
use crate::quad;
use crate::solver::{self, mass_divergent, SolveReport, Verdict};
use crate::spectral::{first_eigenpair, EigenPair};

/// Shared solver settings for sweeps and bisection.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub schedule: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub warm_start: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            schedule: solver::default_schedule(),
            tol: 1e-8,
            max_iter: 100,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub verdict: Verdict,
    pub max_u: f64,
    pub min_u: f64,
    pub mass_integral: f64,
    /// `∫ u φ₁` for converged entries below λ₀ (which should not exist).
    pub orthogonality_flag: Option<f64>,
    #[serde(skip)]
    pub solution: Option<Field>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// `"warm-sequential"` or `"parallel"`.
    pub mode: &'static str,
    pub lambda0: Option<f64>,
}

impl SweepResult {
    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    /// Converged verdicts form an up-set of the λ grid.
    pub fn is_up_set(&self) -> bool {
        let first = self.entries.iter().position(|e| e.verdict == Verdict::Converged);
        match first {
            None => true,
            Some(i) => self.entries[i..].iter().all(|e| e.verdict == Verdict::Converged),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["lambda", "verdict", "max_u", "min_u", "mass_integral"])?;
        for e in &self.entries {
            wr.write_record([
                e.lambda.to_string(),
                e.verdict.as_str().to_string(),
                e.max_u.to_string(),
                e.min_u.to_string(),
                e.mass_integral.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn entry(lambda: f64, rep: SolveReport) -> SweepEntry {
    let mass = rep.mass_path.last().copied().unwrap_or(f64::NAN);
    SweepEntry {
        lambda,
        verdict: rep.verdict,
        max_u: rep.max_value,
        min_u: rep.min_interior,
        mass_integral: mass,
        orthogonality_flag: None,
        solution: (rep.verdict == Verdict::Converged).then_some(rep.solution),
    }
}

fn thread_cap() -> Option<usize> {
    std::env::var("SELAB_THREADS").ok()?.parse().ok().filter(|n| *n > 0)
}

fn solve_at(template: &ProblemSpec, lambda: f64, opts: &SweepOptions, warm: Option<&Field>) -> Result<SolveReport> {
    let spec = template.with_lambda(lambda)?;
    solver::solve_with_continuation_from(&spec, &opts.schedule, opts.tol, opts.max_iter, warm)
}

/// Runs continuation at each λ. With `warm_start` the list is processed in
/// ascending order and each solve starts from the previous converged field.
pub fn lambda_sweep(template: &ProblemSpec, lambdas: &[f64], opts: &SweepOptions) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return Err(Error::Argument("empty lambda list".into()));
    }
    if lambdas.iter().any(|l| !(*l > 0.0)) || lambdas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Argument("lambda list must be positive and strictly increasing".into()));
    }
    let (entries, mode) = if opts.warm_start {
        let mut out: Vec<SweepEntry> = Vec::new();
        for &l in lambdas {
            let warm = out.iter().rev().find_map(|e| e.solution.as_ref());
            let rep = solve_at(template, l, opts, warm)?;
            out.push(entry(l, rep));
        }
        (out, "warm-sequential")
    } else {
        let job = || -> Result<Vec<SweepEntry>> {
            lambdas
                .par_iter()
                .map(|&l| solve_at(template, l, opts, None).map(|r| entry(l, r)))
                .collect()
        };
        let out = match thread_cap() {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Argument(e.to_string()))?
                .install(job)?,
            None => job()?,
        };
        (out, "parallel")
    };
    let mut res = SweepResult {
        entries,
        mode,
        lambda0: None,
    };
    if template.regime() == SignRegime::Positive {
        let eig = first_eigenpair(template.grid(), 1e-10)?;
        if let Ok(l0) = lambda0_bound(template, &eig) {
            res.lambda0 = Some(l0);
            let vol = template.grid().cell_volume();
            for e in res.entries.iter_mut() {
                if e.lambda < l0 {
                    if let Some(u) = &e.solution {
                        let ip: f64 = vol * u.iter().zip(eig.phi.iter()).map(|(a, b)| a * b).sum::<f64>();
                        e.orthogonality_flag = Some(ip);
                    }
                }
            }
        }
    }
    Ok(res)
}

/// λ₀ = min{1, λ₁/(2m)}, `m = max_x f(x,c)/c`, `c = sup{s : max_x (f - Kg)(x,s) < 0}`.
pub fn lambda0_bound(template: &ProblemSpec, eig: &EigenPair) -> Result<f64> {
    if template.regime() != SignRegime::Positive {
        return Err(Error::Regime("lambda0 is defined for K > 0".into()));
    }
    let n = template.grid().len();
    let g = template.singular();
    let k = template.k_nodes();
    let worst = |s: f64| (0..n).map(|i| template.f_at(i, s) - k[i] * g.eval(s)).fold(f64::NEG_INFINITY, f64::max);
    let mut lo = 1e-12;
    if !(worst(lo) < 0.0) {
        return Err(Error::Model("f - K g is not negative near 0".into()));
    }
    let mut hi = 1.0;
    while worst(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(1.0);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if worst(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = lo;
    let m = (0..n).map(|i| template.f_at(i, c) / c).fold(f64::NEG_INFINITY, f64::max);
    Ok(1f64.min(eig.lambda1 / (2.0 * m)))
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaStarEstimate {
    /// Largest probed λ with nonexistence indicated (`None`: λ* <= λ_min).
    pub lo: Option<f64>,
    /// Smallest probed λ with convergence (`None`: λ* >= λ_max).
    pub hi: Option<f64>,
    pub iters: usize,
    pub lambda0: Option<f64>,
    pub grid_n: usize,
    #[serde(skip)]
    pub history: Vec<(f64, Verdict)>,
    #[serde(skip)]
    pub sentinel: Option<&'static str>,
    /// Verdicts at `(lo, hi)` re-run on the doubled grid.
    #[serde(skip)]
    pub refined: Option<(Option<Verdict>, Option<Verdict>)>,
}

impl LambdaStarEstimate {
    pub fn midpoint(&self) -> Option<f64> {
        Some(0.5 * (self.lo? + self.hi?))
    }

    /// λ₀ <= λ_hi, or vacuous when either is missing.
    pub fn lambda0_consistent(&self) -> bool {
        match (self.lambda0, self.hi) {
            (Some(l0), Some(hi)) => l0 <= hi,
            _ => true,
        }
    }
}

fn doubled(grid: &Grid) -> Result<Grid> {
    let n: Vec<usize> = grid.n_interior().iter().map(|n| 2 * n).collect();
    Grid::build(grid.kind(), grid.extents(), &n)
}

/// Bisection on the verdict "converged" over `[λ_min, λ_max]`.
pub fn estimate_lambda_star(
    template: &ProblemSpec,
    lambda_min: f64,
    lambda_max: f64,
    iters: usize,
    opts: &SweepOptions,
) -> Result<LambdaStarEstimate> {
    if !(lambda_min > 0.0 && lambda_max > lambda_min) {
        return Err(Error::Argument(format!(
            "need 0 < lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
        )));
    }
    let grid_n = template.grid().n_interior()[0];
    let lambda0 = if template.regime() == SignRegime::Positive {
        let eig = first_eigenpair(template.grid(), 1e-10)?;
        lambda0_bound(template, &eig).ok()
    } else {
        None
    };
    let verdict = |l: f64| -> Result<Verdict> { Ok(solve_at(template, l, opts, None)?.verdict) };
    let mut history = Vec::new();
    let vmin = verdict(lambda_min)?;
    history.push((lambda_min, vmin));
    let mut out = LambdaStarEstimate {
        lo: None,
        hi: None,
        iters,
        lambda0,
        grid_n,
        history: Vec::new(),
        sentinel: None,
        refined: None,
    };
    if vmin == Verdict::Converged {
        out.hi = Some(lambda_min);
        out.sentinel = Some("lambda* <= lambda_min");
        out.history = history;
        return Ok(out);
    }
    let vmax = verdict(lambda_max)?;
    history.push((lambda_max, vmax));
    if vmax != Verdict::Converged {
        out.lo = Some(lambda_max);
        out.sentinel = Some("lambda* >= lambda_max");
        out.history = history;
        return Ok(out);
    }
    let (mut lo, mut hi) = (lambda_min, lambda_max);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let v = verdict(mid)?;
        history.push((mid, v));
        if v == Verdict::Converged {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    out.lo = Some(lo);
    out.hi = Some(hi);
    out.history = history;
    let fine = template.with_grid(doubled(template.grid())?)?;
    let fv = |l: f64| -> Result<Verdict> {
        Ok(solver::solve_with_continuation(&fine.with_lambda(l)?, &opts.schedule, opts.tol, opts.max_iter)?.verdict)
    };
    out.refined = Some((Some(fv(lo)?), Some(fv(hi)?)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassVerdict {
    MassDivergent,
    MassBounded,
    NoTrend,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceReport {
    pub eps: Vec<f64>,
    /// `∫ g(u_ε + ε)` for the ε values the solver reached.
    pub mass: Vec<f64>,
    /// `∫ g(c₂ dist + ε)` at every scheduled ε.
    pub reference: Vec<f64>,
    pub c2: f64,
    /// `I(ε/2)/I(ε)` at the end of the solved path, if it has two points.
    pub growth: Option<f64>,
    pub reference_growth: Option<f64>,
    pub solver_verdict: Verdict,
    pub verdict: MassVerdict,
}

/// `∫_Ω g(c dist(x) + ε)` from the distribution of `dist`: on a box with
/// sides `L_i` the set `{dist > t}` has measure `Π (L_i - 2t)`.
pub fn reference_mass(grid: &Grid, g: &crate::model::SingularTerm, c: f64, eps: f64) -> f64 {
    let ext = grid.extents().to_vec();
    let tmax = 0.5 * ext.iter().copied().fold(f64::INFINITY, f64::min);
    let density = move |t: f64| -> f64 {
        match ext.len() {
            1 => 2.0,
            _ => 2.0 * (ext[0] - 2.0 * t) + 2.0 * (ext[1] - 2.0 * t),
        }
    };
    // s = c t + ε, then s = e^τ.
    quad::integrate(
        |tau: f64| {
            let s = tau.exp();
            let t = (s - eps) / c;
            g.eval(s) * density(t) * s / c
        },
        eps.ln(),
        (c * tmax + eps).ln(),
        1e-10,
        0.0,
    )
    .value
}

/// Computes `I(ε)` along the schedule (nonincreasing; repeated values allowed).
pub fn nonexistence_diagnostic(template: &ProblemSpec, schedule: &[f64], opts: &SweepOptions) -> Result<NonexistenceReport> {
    if template.regime() != SignRegime::Positive {
        return Err(Error::Regime("nonexistence diagnostic is defined for K > 0".into()));
    }
    if schedule.is_empty() || schedule.iter().any(|e| !(*e > 0.0)) || schedule.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Argument("schedule must be positive and nonincreasing".into()));
    }
    let mut distinct: Vec<f64> = schedule.to_vec();
    distinct.dedup();
    let c2 = build_supersolution(template)?.meta.c2.expect("super-solution fit");
    let reference: Vec<f64> = schedule
        .iter()
        .map(|&e| reference_mass(template.grid(), template.singular(), c2, e))
        .collect();
    let rep = solver::solve_with_continuation(template, &distinct, opts.tol, opts.max_iter)?;
    let ratio = |v: &[f64]| (v.len() >= 2).then(|| v[v.len() - 1] / v[v.len() - 2]);
    let mut ref_distinct = reference.clone();
    ref_distinct.dedup();
    let verdict = if distinct.len() == 1 {
        MassVerdict::NoTrend
    } else if mass_divergent(&rep.mass_path) {
        MassVerdict::MassDivergent
    } else if rep.mass_path.len() >= 3 {
        let m = &rep.mass_path;
        let n = m.len();
        let (d1, d2) = (m[n - 2] - m[n - 3], m[n - 1] - m[n - 2]);
        if d2.abs() <= 1e-2 * m[n - 1].abs() && d2.abs() <= 0.9 * d1.abs() {
            MassVerdict::MassBounded
        } else {
            MassVerdict::Inconclusive
        }
    } else {
        MassVerdict::Inconclusive
    };
    Ok(NonexistenceReport {
        eps: rep.eps_path.clone(),
        growth: ratio(&rep.mass_path),
        mass: rep.mass_path,
        reference_growth: ratio(&ref_distinct),
        reference,
        c2,
        solver_verdict: rep.verdict,
        verdict,
    })
}
