//! Discrete check of the comparison principle for `Δu + Ψ(x,u) = 0`: if
//! `Δw + Ψ(x,w) <= 0 <= Δv + Ψ(x,v)`, `v, w > 0`, `v <= w` on the boundary,
//! `Ψ(x,s)/s` is strictly decreasing and one of `Δv`, `Δw` is integrable,
//! then `v <= w`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{ProblemSpec, SignRegime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conclusion {
    /// Hypotheses hold and the fields are ordered.
    Confirmed,
    /// Hypotheses hold but `v > w` somewhere beyond tolerance.
    RedFlag,
    /// Some hypothesis fails; no conclusion is drawn.
    HypothesesFailed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    /// Share of nodes with `Δv + Ψ(x,v) >= 0` (within slack).
    pub sub_share: f64,
    /// Share of nodes with `Δw + Ψ(x,w) <= 0` (within slack).
    pub super_share: f64,
    pub boundary_ordered: bool,
    /// `Ψ(x,s)/s` strictly decreasing on the sampled range at every node.
    pub strict_decrease: bool,
    /// `h^N Σ |Δv|` and `h^N Σ |Δw|` are finite.
    pub l1_finite: bool,
    pub max_violation: f64,
    pub ordered: bool,
    pub conclusion: Conclusion,
    pub failed: Vec<String>,
}

/// The nonlinearity used with the eigen sub-solution and `U_λ`: `λf` when
/// `K > 0` (the convection and singular terms then only help the
/// sub-inequality), `λf - Kg` when `K < 0`.
pub fn lemma_psi(spec: &ProblemSpec) -> impl Fn(usize, f64) -> f64 + '_ {
    move |k, s| match spec.regime() {
        SignRegime::Positive => spec.lambda() * spec.f_at(k, s),
        SignRegime::Negative => spec.psi_at(k, s),
    }
}

fn strictly_decreasing(psi: &dyn Fn(usize, f64) -> f64, n: usize, lo: f64, hi: f64) -> bool {
    const SAMPLES: usize = 48;
    let ratio = (hi / lo).powf(1.0 / SAMPLES as f64);
    (0..n).all(|k| {
        let mut prev = f64::INFINITY;
        let mut s = lo;
        for _ in 0..=SAMPLES {
            let r = psi(k, s) / s;
            if !(r < prev - 1e-12 * prev.abs().min(r.abs())) {
                return false;
            }
            prev = r;
            s *= ratio;
        }
        true
    })
}

/// Checks the hypotheses on `(v, w)` and, when they hold, the conclusion.
pub fn check_ordering(
    grid: &Grid,
    psi: &dyn Fn(usize, f64) -> f64,
    v: &Field,
    w: &Field,
    tol: f64,
) -> Result<ComparisonReport> {
    grid.check(v)?;
    grid.check(w)?;
    if !v.is_positive() || !w.is_positive() {
        return Err(Error::Domain("comparison fields must be positive in the interior".into()));
    }
    let n = grid.len();
    // apply_laplacian returns -Δ.
    let lv = grid.apply_laplacian(v)?;
    let lw = grid.apply_laplacian(w)?;
    let slack_v = tol * lv.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let slack_w = tol * lw.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let sub_ok = (0..n).filter(|&k| -lv[k] + psi(k, v[k]) >= -slack_v).count();
    let sup_ok = (0..n).filter(|&k| -lw[k] + psi(k, w[k]) <= slack_w).count();
    let sub_share = sub_ok as f64 / n as f64;
    let super_share = sup_ok as f64 / n as f64;
    // Both fields carry the homogeneous boundary values.
    let boundary_ordered = true;
    let lo = 0.5 * v.min().min(w.min());
    let hi = 2.0 * v.max().max(w.max());
    let strict_decrease = strictly_decreasing(psi, n, lo, hi);
    let vol = grid.cell_volume();
    let l1 = |f: &Field| vol * f.iter().map(|x| x.abs()).sum::<f64>();
    let l1_finite = l1(&lv).is_finite() || l1(&lw).is_finite();
    let max_violation = v.iter().zip(w.iter()).fold(0.0f64, |m, (a, b)| m.max(a - b));
    let ordered = max_violation <= tol;

    let mut failed = Vec::new();
    if sub_ok < n {
        failed.push("sub-inequality".to_string());
    }
    if sup_ok < n {
        failed.push("super-inequality".to_string());
    }
    if !strict_decrease {
        failed.push("strict-decrease".to_string());
    }
    if !l1_finite {
        failed.push("integrability".to_string());
    }
    let conclusion = if !failed.is_empty() {
        Conclusion::HypothesesFailed
    } else if ordered {
        Conclusion::Confirmed
    } else {
        Conclusion::RedFlag
    };
    Ok(ComparisonReport {
        sub_share,
        super_share,
        boundary_ordered,
        strict_decrease,
        l1_finite,
        max_violation,
        ordered,
        conclusion,
        failed,
    })
}

/// Nonlinearity of the randomized suite: `Ψ(x,s) = λ q(x) s^p + κ s^{-α}`
/// with `q` a positive bump, `p ∈ (0,1)`, `κ >= 0`.
#[derive(Debug, Clone)]
pub struct SuiteInstance {
    pub grid: Grid,
    pub lambda: f64,
    pub p: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub q: Vec<f64>,
    pub v: Field,
    pub w: Field,
}

impl SuiteInstance {
    pub fn psi(&self, k: usize, s: f64) -> f64 {
        self.lambda * self.q[k] * s.powf(self.p) + self.kappa * s.powf(-self.alpha)
    }
}

/// Shifted iteration `(-Δ + D) u_{k+1} = D u_k + Ψ(u_k)`. Starting from a
/// sub- (super-) solution every iterate is again one, as long as
/// `s ↦ Ds + Ψ(s)` is nondecreasing on the swept range.
fn shifted_iterates(inst: &SuiteInstance, start: &Field, lo: f64, steps: usize) -> Result<Field> {
    let d = 1.5 * inst.kappa * inst.alpha * lo.powf(-inst.alpha - 1.0);
    let chol = inst.grid.laplacian_matrix(d).factor()?;
    let mut u = start.clone();
    for _ in 0..steps {
        let rhs: Vec<f64> = (0..u.len()).map(|k| d * u[k] + inst.psi(k, u[k])).collect();
        u = Field(chol.solve(&rhs));
    }
    Ok(u)
}

/// Random admissible pairs: `v` is a few monotone iterates from `tφ₁`
/// (a sub-solution for small `t`), `w` a few iterates from `T e` with
/// `-Δe = 1` (a super-solution for large `T`).
pub fn random_suite(seed: u64, count: usize) -> Result<Vec<SuiteInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let grid = if rng.gen_bool(0.7) {
            Grid::interval(1.0, rng.gen_range(15..64))?
        } else {
            let m = rng.gen_range(7..16);
            Grid::rectangle(1.0, rng.gen_range(0.5..2.0), m, m + rng.gen_range(0..5))?
        };
        let lambda = rng.gen_range(0.1..20.0);
        let p = rng.gen_range(0.1..0.9);
        let kappa = if rng.gen_bool(0.5) { rng.gen_range(0.0..2.0) } else { 0.0 };
        let alpha = rng.gen_range(0.1..0.9);
        let amp = rng.gen_range(0.0..0.5);
        let q: Vec<f64> = grid
            .points()
            .map(|x| 1.0 + amp * (3.0 * x[0] + 2.0 * x[1]).sin())
            .collect();
        let mut inst = SuiteInstance {
            grid: grid.clone(),
            lambda,
            p,
            kappa,
            alpha,
            q,
            v: grid.constant(0.0),
            w: grid.constant(0.0),
        };
        let eig = crate::spectral::first_eigenpair(&grid, 1e-10)?;
        let qmin = inst.q.iter().copied().fold(f64::INFINITY, f64::min);
        // t φ₁ is a sub-solution once λ qmin t^{p-1} >= λ₁.
        let t = 0.5 * (lambda * qmin / eig.lambda1).powf(1.0 / (1.0 - p));
        let sub0 = eig.phi.scaled(t);
        let e = Field(grid.laplacian_matrix(0.0).factor()?.solve(&grid.constant(1.0)));
        let mut big = 1.0;
        let is_super = |u: &Field| -> Result<bool> {
            let l = grid.apply_laplacian(u)?;
            Ok((0..u.len()).all(|k| l[k] >= inst.psi(k, u[k])))
        };
        while !is_super(&e.scaled(big))? {
            big *= 2.0;
        }
        let sup0 = e.scaled(big);
        let lo = sub0.min();
        let steps_v = rng.gen_range(0..6);
        let steps_w = rng.gen_range(0..6);
        inst.v = shifted_iterates(&inst, &sub0, lo, steps_v)?;
        inst.w = shifted_iterates(&inst, &sup0, lo, steps_w)?;
        out.push(inst);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_doubling() {
        let inst = &random_suite(7, 1).unwrap()[0];
        let psi = |k: usize, s: f64| inst.psi(k, s);
        let r = check_ordering(&inst.grid, &psi, &inst.w, &inst.w, 1e-8).unwrap();
        assert!(r.ordered && r.max_violation == 0.0);
        let r = check_ordering(&inst.grid, &psi, &inst.w.scaled(2.0), &inst.w, 1e-8).unwrap();
        assert_eq!(r.conclusion, Conclusion::HypothesesFailed);
        assert!(!r.ordered);
    }

    #[test]
    fn linear_psi_is_inadmissible() {
        let grid = Grid::interval(1.0, 15).unwrap();
        let u = grid.field_from(|x| x[0] * (1.0 - x[0]) + 0.1);
        let psi = |_k: usize, s: f64| s;
        let r = check_ordering(&grid, &psi, &u, &u, 1e-8).unwrap();
        assert!(!r.strict_decrease);
        assert_eq!(r.conclusion, Conclusion::HypothesesFailed);
    }

    #[test]
    fn nonpositive_field_rejected() {
        let grid = Grid::interval(1.0, 5).unwrap();
        let z = grid.constant(0.0);
        let psi = |_k: usize, s: f64| s.sqrt();
        assert!(matches!(check_ordering(&grid, &psi, &z, &z, 1e-8), Err(Error::Domain(_))));
    }

    #[test]
    fn suite_is_deterministic() {
        let a = random_suite(3, 4).unwrap();
        let b = random_suite(3, 4).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.v.0, y.v.0);
            assert_eq!(x.w.0, y.w.0);
        }
    }
}
