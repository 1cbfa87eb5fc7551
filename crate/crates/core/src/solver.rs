//! Discrete solves of `-Δu + K g(u+ε) + |∇u|^a = λ f(x,u) (+ source)`.
//!
//! Newton with the analytic banded Jacobian is the workhorse. The monotone
//! iteration is kept as a globalizer and as an executable form of the
//! sub/super-solution argument. Continuation drives ε to 0 and decides
//! between "converged" and "nonexistence indicated".

use serde::Serialize;

use crate::constructions;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{norm2, norm_inf, BandMatrix};
use crate::model::{compute_p, ProblemSpec, ReactionTerm, SignRegime, SingularTerm};
use crate::quad;
use crate::spectral;

const CONV_ETA: f64 = 1e-14;
const MAX_BACKTRACK: usize = 30;
const BLOW_UP: f64 = 1e12;
/// Relative size of the last ε-step below which the path counts as Cauchy.
pub const CAUCHY_RTOL: f64 = 1e-3;

/// Residual operator with optional pieces. The model problem switches
/// everything on; the auxiliary problems (sub-solutions, probes) use subsets.
pub(crate) struct Equation<'a> {
    pub grid: &'a Grid,
    pub singular: Option<(&'a [f64], &'a SingularTerm)>,
    pub eps: f64,
    pub convection: Option<f64>,
    pub reaction: Option<(f64, &'a ReactionTerm, &'a [f64])>,
    pub source: Option<&'a [f64]>,
}

impl<'a> Equation<'a> {
    pub(crate) fn of_spec(spec: &'a ProblemSpec) -> Self {
        Self {
            grid: spec.grid(),
            singular: spec
                .singular_enabled()
                .then(|| (spec.k_nodes(), spec.singular())),
            eps: spec.eps(),
            convection: spec.convection_enabled().then(|| spec.a()),
            reaction: Some((spec.lambda(), spec.reaction(), spec.q_nodes())),
            source: spec.source().map(|s| &s[..]),
        }
    }

    pub(crate) fn residual(&self, u: &[f64]) -> Result<Field> {
        let mut r = self.grid.apply_laplacian(u)?;
        if let Some((k, g)) = self.singular {
            for i in 0..r.len() {
                let s = u[i] + self.eps;
                if !(s > 0.0) {
                    return Err(Error::SingularEvaluation { node: i, value: u[i] });
                }
                r[i] += k[i] * g.eval(s);
            }
        }
        if let Some(a) = self.convection {
            let gm = self.grid.gradient_magnitude(u)?;
            for i in 0..r.len() {
                r[i] += gm[i].powf(a);
            }
        }
        if let Some((lambda, f, q)) = self.reaction {
            for i in 0..r.len() {
                r[i] -= lambda * q[i] * f.profile(u[i]);
            }
        }
        if let Some(s) = self.source {
            for i in 0..r.len() {
                r[i] -= s[i];
            }
        }
        Ok(r)
    }

    fn jacobian(&self, u: &[f64]) -> Result<BandMatrix> {
        let grid = self.grid;
        let n = grid.len();
        let bw = grid.bandwidth();
        let mut j = BandMatrix::zeros(n, bw, bw);
        let h = grid.spacing();
        for k in 0..n {
            let nb = grid.neighbours(k);
            for axis in 0..grid.dim() {
                let h2 = h[axis] * h[axis];
                j.add(k, k, 2.0 / h2);
                for m in [nb[axis].0, nb[axis].1].into_iter().flatten() {
                    j.add(k, m, -1.0 / h2);
                }
            }
        }
        if let Some((kn, g)) = self.singular {
            for k in 0..n {
                j.add(k, k, kn[k] * g.deriv(u[k] + self.eps));
            }
        }
        if let Some((lambda, f, q)) = self.reaction {
            for k in 0..n {
                let d = f.profile_deriv(u[k]);
                if d.is_finite() {
                    j.add(k, k, -lambda * q[k] * d);
                }
            }
        }
        if let Some(a) = self.convection {
            let grad = grid.gradient(u)?;
            for k in 0..n {
                let (gx, gy) = (grad[0][k], grad[1][k]);
                let w = a * (gx * gx + gy * gy + CONV_ETA * CONV_ETA).powf(0.5 * (a - 2.0));
                let nb = grid.neighbours(k);
                for axis in 0..grid.dim() {
                    let c = w * grad[axis][k] / (2.0 * h[axis]);
                    if let Some(p) = nb[axis].1 {
                        j.add(k, p, c);
                    }
                    if let Some(m) = nb[axis].0 {
                        j.add(k, m, -c);
                    }
                }
            }
        }
        Ok(j)
    }

    /// Lower limit a Newton iterate may take at a node.
    fn floor(&self, old: f64) -> Option<f64> {
        self.singular?;
        Some(if self.eps > 0.0 { 1e-2 * self.eps } else { 0.1 * old })
    }
}

pub(crate) struct NewtonRun {
    pub u: Field,
    pub iterations: usize,
    pub residual: f64,
    pub outcome: Result<()>,
}

pub(crate) fn newton_core(eq: &Equation, u0: Field, tol: f64, max_iter: usize) -> NewtonRun {
    let mut u = u0;
    let mut r = match eq.residual(&u) {
        Ok(r) => r,
        Err(e) => {
            return NewtonRun {
                u,
                iterations: 0,
                residual: f64::INFINITY,
                outcome: Err(e),
            }
        }
    };
    let mut rn = norm_inf(&r);
    let done = |u: Field, it: usize, rn: f64, outcome: Result<()>| NewtonRun {
        u,
        iterations: it,
        residual: rn,
        outcome,
    };
    for it in 0..max_iter {
        if rn < tol {
            return done(u, it, rn, Ok(()));
        }
        let lu = match eq.jacobian(&u).and_then(|j| j.factor()) {
            Ok(lu) => lu,
            Err(e) => return done(u, it, rn, Err(e)),
        };
        let d = lu.solve(&r);
        if d.iter().any(|x| !x.is_finite()) {
            return done(u, it, rn, Err(Error::Stagnation { residual: rn }));
        }
        let n2 = norm2(&r);
        let mut tau = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let cand: Vec<f64> = u
                .iter()
                .zip(d.iter())
                .map(|(ui, di)| {
                    let v = ui - tau * di;
                    match eq.floor(*ui) {
                        Some(fl) => v.max(fl),
                        None => v,
                    }
                })
                .collect();
            if let Ok(rc) = eq.residual(&cand) {
                let ok = rc.iter().all(|x| x.is_finite())
                    && (norm2(&rc) < (1.0 - 1e-4 * tau) * n2 || norm_inf(&rc) < tol);
                if ok {
                    accepted = Some((Field(cand), rc));
                    break;
                }
            }
            tau *= 0.5;
        }
        match accepted {
            Some((un, rc)) => {
                u = un;
                r = rc;
                rn = norm_inf(&r);
                if u.max() > BLOW_UP {
                    return done(u, it + 1, rn, Err(Error::Convergence { iterations: it + 1, residual: rn }));
                }
            }
            None => return done(u, it, rn, Err(Error::Stagnation { residual: rn })),
        }
    }
    if rn < tol {
        return done(u, max_iter, rn, Ok(()));
    }
    done(
        u,
        max_iter,
        rn,
        Err(Error::Convergence {
            iterations: max_iter,
            residual: rn,
        }),
    )
}

/// Outcome class of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converged,
    NonexistenceIndicated,
    NotConverged,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::NonexistenceIndicated => "nonexistence-indicated",
            Verdict::NotConverged => "not-converged",
        }
    }
}

/// How a continuation run failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureMode {
    /// Newton lost the solution branch (iterates pushed onto the floor).
    Collapse,
    BlowUp,
    /// `∫ g(u_ε+ε)` keeps growing at a non-decaying rate.
    MassDivergent,
    /// ε-path not Cauchy or minimum not separated from ε.
    NotCauchy,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: Field,
    pub verdict: Verdict,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub eps_path: Vec<f64>,
    pub min_interior: f64,
    pub max_value: f64,
    /// `∫ g(u_ε + ε)` along the path (continuation only).
    pub mass_path: Vec<f64>,
    /// Relative sup-norm change between consecutive path solutions.
    pub path_steps: Vec<f64>,
    pub mode: Option<FailureMode>,
    pub monotone: Option<bool>,
    pub bracket_escape: Option<bool>,
    pub diagnostics: Vec<String>,
}

impl SolveReport {
    fn single(solution: Field, iterations: usize, residual: f64, eps: f64) -> Self {
        Self {
            min_interior: solution.min(),
            max_value: solution.max(),
            solution,
            verdict: Verdict::Converged,
            converged: true,
            iterations,
            residual,
            eps_path: vec![eps],
            mass_path: Vec::new(),
            path_steps: Vec::new(),
            mode: None,
            monotone: None,
            bracket_escape: None,
            diagnostics: Vec::new(),
        }
    }
}

/// Nodal residual `-Δu + K g(u+ε) + |∇u|^a - λ f(x,u) - source`.
pub fn residual(spec: &ProblemSpec, u: &[f64]) -> Result<Field> {
    Equation::of_spec(spec).residual(u)
}

/// Damped Newton from `initial`; converged when `‖F‖∞ < tol`.
pub fn newton_solve(spec: &ProblemSpec, initial: &Field, tol: f64, max_iter: usize) -> Result<SolveReport> {
    let eq = Equation::of_spec(spec);
    let run = newton_core(&eq, initial.clone(), tol, max_iter);
    run.outcome?;
    Ok(SolveReport::single(run.u, run.iterations, run.residual, spec.eps()))
}

/// Sampled one-sided Lipschitz bound for `s ↦ -K g(s+ε) + λ f(x,s)` on
/// `[lo, hi]`, times 1.5.
pub fn default_shift(spec: &ProblemSpec, lo: f64, hi: f64) -> f64 {
    let eps = spec.eps();
    let lo = if lo + eps > 0.0 { lo } else { 1e-3 * hi.max(1e-300) - eps };
    let hi = hi.max(lo);
    let qmin = spec.q_nodes().iter().copied().fold(f64::INFINITY, f64::min);
    let qmax = spec.q_nodes().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..=64 {
        let s = lo + (hi - lo) * i as f64 / 64.0;
        for k in [spec.k_min(), spec.k_max()] {
            for q in [qmin, qmax] {
                let mut slope = spec.lambda() * q * spec.reaction().profile_deriv(s.max(1e-300));
                if spec.singular_enabled() {
                    slope -= k * spec.singular().deriv(s + eps);
                }
                if slope.is_finite() {
                    worst = worst.min(slope);
                }
            }
        }
    }
    1.5 * (-worst).max(0.0)
}

/// Shifted fixed-point iteration between an ordered pair, starting at `sub`:
/// `(-Δ + D) u_{k+1} = D u_k - K g(u_k+ε) - |∇u_k|^a + λ f(x,u_k)`.
pub fn monotone_iterate(
    spec: &ProblemSpec,
    sub: &Field,
    sup: &Field,
    shift: Option<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let grid = spec.grid();
    grid.check(sub)?;
    grid.check(sup)?;
    if let Some((node, excess)) = sub
        .iter()
        .zip(sup.iter())
        .map(|(a, b)| a - b)
        .enumerate()
        .find(|(_, d)| *d > 0.0)
    {
        return Err(Error::Ordering { node, excess });
    }
    let d = match shift {
        Some(d) if !(d >= 0.0) => return Err(Error::Range(format!("shift must be nonnegative, got {d}"))),
        Some(d) => d,
        None => default_shift(spec, sub.min(), sup.max()),
    };
    // The iteration map is the residual with the operator removed:
    // rhs = D u - (F(u) - (-Δu)).
    let eq = Equation::of_spec(spec);
    let chol = grid.laplacian_matrix(d).factor()?;
    let mut u = sub.clone();
    let mut monotone = true;
    let mut escape = false;
    let mut step = f64::INFINITY;
    let mut it = 0;
    while it < max_iter {
        let r = eq.residual(&u)?;
        let lap = grid.apply_laplacian(&u)?;
        let rhs: Vec<f64> = (0..u.len()).map(|k| d * u[k] - (r[k] - lap[k])).collect();
        let next = Field(chol.solve(&rhs));
        it += 1;
        step = next.iter().zip(u.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = next.max().abs().max(1.0);
        if next.iter().zip(u.iter()).any(|(a, b)| *a < b - 1e-12 * scale) {
            monotone = false;
        }
        if (0..u.len()).any(|k| next[k] < sub[k] - tol || next[k] > sup[k] + tol) {
            escape = true;
        }
        u = next;
        if step < tol {
            break;
        }
    }
    let res = norm_inf(&eq.residual(&u)?);
    let converged = step < tol;
    let mut rep = SolveReport::single(u, it, res, spec.eps());
    rep.converged = converged;
    rep.verdict = if converged { Verdict::Converged } else { Verdict::NotConverged };
    rep.monotone = Some(monotone);
    rep.bracket_escape = Some(escape);
    if escape {
        rep.diagnostics.push("iterate left the [sub, super] bracket".into());
    }
    if !monotone {
        rep.diagnostics.push("iterates not nodewise nondecreasing (lagged convection)".into());
    }
    rep.diagnostics.push(format!("shift D = {d}"));
    Ok(rep)
}

/// `ε_k = 0.1 · 2^{-k}`, `k = 0..12`.
pub fn default_schedule() -> Vec<f64> {
    (0..12).map(|k| 0.1 * 0.5f64.powi(k)).collect()
}

/// `∫_Ω g(u + ε)` for the piecewise-linear interpolant of `u` (zero on the
/// boundary), integrated exactly in 1D and by adaptive quadrature over the
/// value distribution of each triangle in 2D.
pub fn singular_mass(grid: &Grid, g: &SingularTerm, u: &[f64], eps: f64) -> Result<f64> {
    let cells = grid.simplices(u)?;
    let seg = |lo: f64, hi: f64| -> f64 {
        if lo > 0.0 {
            g.integral(lo, hi)
        } else {
            g.primitive(hi).unwrap_or(f64::INFINITY)
        }
    };
    let mut total = 0.0;
    for (meas, v) in cells {
        if v[2].is_nan() {
            let (lo, hi) = (v[0].min(v[1]) + eps, v[0].max(v[1]) + eps);
            total += if hi - lo <= 1e-6 * hi {
                meas * g.eval(0.5 * (lo + hi))
            } else {
                meas * seg(lo, hi) / (hi - lo)
            };
            continue;
        }
        let mut s = [v[0] + eps, v[1] + eps, v[2] + eps];
        s.sort_by(|a, b| a.total_cmp(b));
        let [a, b, c] = s;
        if c - a <= 1e-6 * c {
            total += meas * g.eval((a + b + c) / 3.0);
            continue;
        }
        if a <= 0.0 && g.primitive(c).is_none() {
            return Ok(f64::INFINITY);
        }
        // Density of the linear function's values: a tent on [a, c] with
        // its peak at b.
        let mut part = 0.0;
        let piece = |lo: f64, hi: f64, dens: &dyn Fn(f64) -> f64| -> f64 {
            if lo > 0.0 {
                quad::integrate(
                    |t: f64| {
                        let x = t.exp();
                        g.eval(x) * dens(x) * x
                    },
                    lo.ln(),
                    hi.ln(),
                    1e-9,
                    0.0,
                )
                .value
            } else {
                quad::integrate(
                    |w: f64| {
                        let x = lo + (hi - lo) * w * w;
                        g.eval(x) * dens(x) * 2.0 * (hi - lo) * w
                    },
                    0.0,
                    1.0,
                    1e-9,
                    0.0,
                )
                .value
            }
        };
        if b - a > 1e-12 * c {
            let up = |x: f64| 2.0 * (x - a) / ((c - a) * (b - a));
            part += piece(a, b, &up);
        }
        if c - b > 1e-12 * c {
            let down = |x: f64| 2.0 * (c - x) / ((c - a) * (c - b));
            part += piece(b, c, &down);
        }
        total += meas * part;
    }
    Ok(total)
}

/// Whether the tail of a mass sequence keeps growing at a non-decaying rate.
pub fn mass_divergent(masses: &[f64]) -> bool {
    let n = masses.len();
    if n < 3 || !masses[n - 1].is_finite() {
        return n >= 1 && masses[n - 1].is_infinite();
    }
    let d1 = masses[n - 2] - masses[n - 3];
    let d2 = masses[n - 1] - masses[n - 2];
    d1 > 0.0 && d2 > 0.0 && d2 / d1 >= 0.9 && d2 / masses[n - 1] > 1e-3
}

/// Starting field at the first ε: the super-solution `U_λ` when `K > 0`
/// (Newton on the convex residual then descends to the largest solution),
/// the convection sub-solution when `K < 0`.
pub fn initial_guesses(spec: &ProblemSpec) -> Vec<(String, Field)> {
    let mut out = Vec::new();
    let sup = constructions::build_supersolution(spec).ok();
    if spec.regime() == SignRegime::Negative && compute_p(spec).1 {
        if let Ok(c) = constructions::build_subsolution_convection(spec) {
            out.push(("sub-convection".to_string(), c.field));
        }
    }
    if let Some(s) = &sup {
        out.push(("super-U".to_string(), s.field.clone()));
    }
    if let Ok(e) = spectral::first_eigenpair(spec.grid(), 1e-10) {
        let scale = sup.as_ref().map_or(1.0, |s| s.field.max());
        out.push(("scaled-phi1".to_string(), e.phi.scaled(scale)));
    }
    out
}

/// Continuation along a strictly decreasing ε-schedule.
pub fn solve_with_continuation(
    spec: &ProblemSpec,
    schedule: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    solve_with_continuation_from(spec, schedule, tol, max_iter, None)
}

/// As [`solve_with_continuation`], optionally warm-started at the first ε.
pub fn solve_with_continuation_from(
    spec: &ProblemSpec,
    schedule: &[f64],
    tol: f64,
    max_iter: usize,
    warm: Option<&Field>,
) -> Result<SolveReport> {
    if schedule.is_empty()
        || schedule.iter().any(|e| !(*e > 0.0) || !e.is_finite())
        || schedule.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::Argument(
            "epsilon schedule must be a strictly decreasing sequence of positive numbers".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::Range(format!("tolerance must be positive, got {tol}")));
    }
    let grid = spec.grid();
    let mut diagnostics = Vec::new();
    let mut eps_path = Vec::new();
    let mut mass_path = Vec::new();
    let mut path_steps = Vec::new();
    let mut iterations = 0;
    let mut current: Option<Field> = None;
    let mut last_residual = f64::INFINITY;
    let mut failure: Option<(FailureMode, Field)> = None;

    for (k, &eps) in schedule.iter().enumerate() {
        let sk = spec.with_eps(eps)?;
        let eq = Equation::of_spec(&sk);
        let run = if let Some(prev) = &current {
            newton_core(&eq, prev.clone(), tol, max_iter)
        } else {
            let mut starts = Vec::new();
            if let Some(w) = warm {
                starts.push(("warm-start".to_string(), w.clone()));
            }
            starts.extend(initial_guesses(spec));
            let mut last = None;
            for (name, u0) in starts {
                let run = newton_core(&eq, u0, tol, max_iter);
                let ok = run.outcome.is_ok();
                if ok {
                    diagnostics.push(format!("initial guess: {name}"));
                }
                last = Some(run);
                if ok {
                    break;
                }
            }
            match last {
                Some(r) => r,
                None => {
                    return Err(Error::Model("no initial guess could be built".into()));
                }
            }
        };
        iterations += run.iterations;
        last_residual = run.residual;
        if let Err(e) = run.outcome {
            let mode = if run.u.max() > BLOW_UP || matches!(e, Error::Convergence { .. }) && run.u.max() > 1e6 {
                FailureMode::BlowUp
            } else {
                FailureMode::Collapse
            };
            diagnostics.push(format!("newton failed at eps = {eps} (step {k}): {e}"));
            failure = Some((mode, run.u));
            break;
        }
        let u = run.u;
        if let Some(prev) = &current {
            let diff = u.iter().zip(prev.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            path_steps.push(diff / norm_inf(&u).max(f64::MIN_POSITIVE));
        }
        mass_path.push(singular_mass(grid, spec.singular(), &u, eps)?);
        eps_path.push(eps);
        current = Some(u);
    }

    let finish = |solution: Field, verdict: Verdict, mode, diagnostics| SolveReport {
        min_interior: solution.min(),
        max_value: solution.max(),
        solution,
        verdict,
        converged: verdict == Verdict::Converged,
        iterations,
        residual: last_residual,
        eps_path: eps_path.clone(),
        mass_path: mass_path.clone(),
        path_steps: path_steps.clone(),
        mode,
        monotone: None,
        bracket_escape: None,
        diagnostics,
    };

    if let Some((mode, last)) = failure {
        let sol = current.unwrap_or(last);
        return Ok(finish(sol, Verdict::NonexistenceIndicated, Some(mode), diagnostics));
    }
    let u = current.expect("at least one step");
    let eps_final = *schedule.last().expect("nonempty");
    if spec.regime() == SignRegime::Positive && mass_divergent(&mass_path) {
        diagnostics.push("singular mass grows without bound along the schedule".into());
        return Ok(finish(u, Verdict::NonexistenceIndicated, Some(FailureMode::MassDivergent), diagnostics));
    }
    let cauchy = match path_steps.last() {
        None => true,
        Some(&last) => {
            let tail = &path_steps[path_steps.len().saturating_sub(3)..];
            last <= CAUCHY_RTOL && tail.windows(2).all(|w| w[1] <= 1.01 * w[0])
        }
    };
    if !cauchy {
        diagnostics.push("epsilon path is not settling".into());
        return Ok(finish(u, Verdict::NonexistenceIndicated, Some(FailureMode::NotCauchy), diagnostics));
    }
    if !(u.min() > eps_final) {
        diagnostics.push(format!(
            "interior minimum {} not separated from eps = {eps_final}",
            u.min()
        ));
        return Ok(finish(u, Verdict::NonexistenceIndicated, Some(FailureMode::Collapse), diagnostics));
    }
    Ok(finish(u, Verdict::Converged, None, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_problem, Potential};

    fn spec1d(n: usize, k: f64, alpha: f64, p: f64, a: f64, lambda: f64, eps: f64) -> ProblemSpec {
        make_problem(
            Grid::interval(1.0, n).unwrap(),
            Potential::Constant(k),
            SingularTerm::power(alpha).unwrap(),
            ReactionTerm::power(p).unwrap(),
            a,
            lambda,
            eps,
        )
        .unwrap()
    }

    #[test]
    fn manufactured_residual_vanishes() {
        let s = spec1d(31, -1.0, 0.5, 0.5, 1.0, 1.0, 0.0);
        let u = s.grid().field_from(|p| p[0] * (1.0 - p[0]));
        let src = residual(&s, &u).unwrap();
        let s2 = s.with_source(src).unwrap();
        assert!(norm_inf(&residual(&s2, &u).unwrap()) < 1e-12);
    }

    #[test]
    fn zero_field_is_singular() {
        let s = spec1d(15, -1.0, 0.5, 0.5, 1.0, 1.0, 0.0);
        let z = s.grid().constant(0.0);
        assert!(matches!(residual(&s, &z), Err(Error::SingularEvaluation { .. })));
        assert!(matches!(
            newton_solve(&s, &z, 1e-10, 20),
            Err(Error::SingularEvaluation { .. })
        ));
    }

    #[test]
    fn newton_recovers_manufactured_solution() {
        let s = spec1d(63, -1.0, 0.5, 0.5, 1.0, 1.0, 0.0);
        let ustar = s.grid().field_from(|p| p[0] * (1.0 - p[0]));
        let s2 = s.with_source(residual(&s, &ustar).unwrap()).unwrap();
        let init = ustar.map(|v| 0.5 * v + 0.1);
        let rep = newton_solve(&s2, &init, 1e-11, 50).unwrap();
        let err = rep.solution.iter().zip(ustar.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn continuation_negative_regime_converges() {
        let s = spec1d(63, -1.0, 0.5, 0.5, 1.0, 1.0, 0.0);
        let rep = solve_with_continuation(&s, &default_schedule(), 1e-9, 100).unwrap();
        assert_eq!(rep.verdict, Verdict::Converged, "{:?}", rep.diagnostics);
        assert!(rep.min_interior > 0.0);
        let s0 = s.with_eps(*rep.eps_path.last().unwrap()).unwrap();
        assert!(norm_inf(&residual(&s0, &rep.solution).unwrap()) < 1e-9);
    }

    #[test]
    fn mass_of_linear_cells() {
        // g(s) = s^-1/2 on u = x(1-x): compare with direct quadrature of the
        // interpolant.
        let grid = Grid::interval(1.0, 9).unwrap();
        let g = SingularTerm::power(0.5).unwrap();
        let u = grid.field_from(|p| p[0] * (1.0 - p[0]));
        let eps = 0.01;
        let got = singular_mass(&grid, &g, &u, eps).unwrap();
        let h = 0.1;
        let nodal = |i: usize| if i == 0 || i == 10 { 0.0 } else { u[i - 1] };
        let mut want = 0.0;
        for i in 0..10 {
            let (a, b) = (nodal(i), nodal(i + 1));
            want += quad::integrate(|x: f64| (a + (b - a) * (x - i as f64 * h) / h + eps).powf(-0.5), i as f64 * h, (i + 1) as f64 * h, 1e-12, 0.0).value;
        }
        assert!((got - want).abs() < 1e-9 * want);
    }

    #[test]
    fn mass_of_triangles_matches_direct_quadrature() {
        let grid = Grid::rectangle(1.0, 1.0, 3, 3).unwrap();
        let g = SingularTerm::power(1.5).unwrap();
        let u = grid.field_from(|p| (std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin());
        let eps = 0.05;
        let got = singular_mass(&grid, &g, &u, eps).unwrap();
        // Direct 2D quadrature of g(interp + ε) over each triangle.
        let mut want = 0.0;
        for (area, v) in grid.simplices(&u).unwrap() {
            let inner = |x: f64| {
                quad::integrate(
                    |y: f64| g.eval(v[0] * (1.0 - x - y) + v[1] * x + v[2] * y + eps),
                    0.0,
                    1.0 - x,
                    1e-11,
                    0.0,
                )
                .value
            };
            want += 2.0 * area * quad::integrate(inner, 0.0, 1.0, 1e-10, 0.0).value;
        }
        assert!((got - want).abs() < 1e-7 * want, "{got} vs {want}");
    }

    #[test]
    fn divergence_test_on_sequences() {
        let grow: Vec<f64> = (0..6).map(|k| 2f64.powf(0.5 * k as f64)).collect();
        assert!(mass_divergent(&grow));
        let settle: Vec<f64> = (0..6).map(|k| 3.0 - 2f64.powf(-0.5 * k as f64)).collect();
        assert!(!mass_divergent(&settle));
        assert!(!mass_divergent(&[1.0, 1.0]));
    }

    #[test]
    fn schedule_validation() {
        let s = spec1d(15, -1.0, 0.5, 0.5, 1.0, 1.0, 0.0);
        assert!(matches!(
            solve_with_continuation(&s, &[0.1, 0.1], 1e-8, 10),
            Err(Error::Argument(_))
        ));
        assert!(matches!(solve_with_continuation(&s, &[], 1e-8, 10), Err(Error::Argument(_))));
        let d = default_schedule();
        assert_eq!(d.len(), 12);
        assert_eq!(d[0], 0.1);
    }
}
