//! The explicit comparison fields of the existence theory.
//!
//! * `U_λ`, the solution of `-ΔU = λ f(x,U)`; a super-solution of the full
//!   problem whenever `K >= 0`.
//! * `v`, the solution of `-Δv + |∇v|^a = p(x)`; a sub-solution in the
//!   negative-`K` regime.
//! * `M h(φ₁)`, the boundary-layer sub-solution for `K > 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::hprofile::HProfile;
use crate::linalg::norm_inf;
use crate::model::{compute_p, ProblemSpec, SignRegime};
use crate::solver::{newton_core, Equation};
use crate::spectral::{first_eigenpair, EigenPair, HopfCollar};

const PICARD_MAX: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstructionKind {
    #[serde(rename = "super")]
    Super,
    #[serde(rename = "sub-conv")]
    SubConvection,
    #[serde(rename = "sub-eigen")]
    SubEigen,
}

/// Metadata written next to a construction. `residual_max` is the sup-norm
/// of the defining equation's residual for `super` and `sub-conv`, and the
/// largest (signed) value of the sub-solution residual for `sub-eigen`.
#[derive(Debug, Clone, Serialize)]
pub struct ConstructionMeta {
    pub kind: ConstructionKind,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub delta: Option<f64>,
    pub lambda_threshold: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub residual_max: f64,
    pub omega0_size: Option<usize>,
    /// Collar nodes where `-K* g(h(φ₁)) + M^a h'(φ₁)^a |∇φ₁|^a < 0` fails.
    pub collar_condition_failures: Option<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub field: Field,
    pub kind: ConstructionKind,
    pub certificate: Field,
    pub meta: ConstructionMeta,
}

fn meta(kind: ConstructionKind) -> ConstructionMeta {
    ConstructionMeta {
        kind,
        m: None,
        delta: None,
        lambda_threshold: None,
        c1: None,
        c2: None,
        residual_max: 0.0,
        omega0_size: None,
        collar_condition_failures: None,
        iterations: 0,
    }
}

/// `U_λ` by Picard iteration `U_{k+1} = (-Δ)^{-1} λ f(x, U_k)` from `φ₁`.
pub fn build_supersolution(spec: &ProblemSpec) -> Result<Construction> {
    build_supersolution_tol(spec, 1e-11)
}

pub fn build_supersolution_tol(spec: &ProblemSpec, tol: f64) -> Result<Construction> {
    let grid = spec.grid();
    let chol = grid.laplacian_matrix(0.0).factor()?;
    let lambda = spec.lambda();
    let eq = Equation {
        grid,
        singular: None,
        eps: 0.0,
        convection: None,
        reaction: Some((lambda, spec.reaction(), spec.q_nodes())),
        source: None,
    };
    let mut u = first_eigenpair(grid, 1e-10)?.phi;
    let mut prev_step = f64::INFINITY;
    let mut damping: f64 = 1.0;
    let mut it = 0;
    loop {
        if it >= PICARD_MAX {
            let r = norm_inf(&eq.residual(&u)?);
            return Err(Error::Convergence {
                iterations: it,
                residual: r,
            });
        }
        it += 1;
        let rhs: Vec<f64> = (0..u.len()).map(|k| lambda * spec.f_at(k, u[k])).collect();
        let next = chol.solve(&rhs);
        let step = next.iter().zip(u.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if step > prev_step {
            damping = (damping * 0.5).max(0.125);
        }
        prev_step = step;
        u = Field(
            u.iter()
                .zip(next.iter())
                .map(|(a, b)| a + damping * (b - a))
                .collect(),
        );
        let scale = u.max();
        if !(scale > 1e-300) {
            return Err(Error::DegenerateSolution);
        }
        if !scale.is_finite() || scale > 1e200 {
            return Err(Error::Convergence {
                iterations: it,
                residual: f64::INFINITY,
            });
        }
        if step <= tol * scale.max(1.0) {
            break;
        }
    }
    if !u.is_positive() {
        return Err(Error::DegenerateSolution);
    }
    let cert = eq.residual(&u)?;
    let dist = grid.boundary_distance();
    let ratios: Vec<f64> = u.iter().zip(dist.iter()).map(|(a, d)| a / d).collect();
    let mut m = meta(ConstructionKind::Super);
    m.c1 = Some(ratios.iter().copied().fold(f64::INFINITY, f64::min));
    m.c2 = Some(ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    m.residual_max = norm_inf(&cert);
    m.iterations = it;
    Ok(Construction {
        field: u,
        kind: ConstructionKind::Super,
        certificate: cert,
        meta: m,
    })
}

/// Solution of `-Δv + |∇v|^a = p` with lagged-gradient Picard steps followed
/// by a Newton polish.
pub fn build_subsolution_convection(spec: &ProblemSpec) -> Result<Construction> {
    if spec.regime() != SignRegime::Negative {
        return Err(Error::Regime(
            "convection sub-solution needs K < 0 in the domain".into(),
        ));
    }
    let (p, ok) = compute_p(spec);
    if !ok {
        return Err(Error::Regime(format!(
            "p(x) = min(lambda f(x,1), -K(x) g(1)) must be positive, min is {}",
            p.min()
        )));
    }
    solve_convection_problem(spec.grid(), spec.a(), &p)
}

pub(crate) fn solve_convection_problem(
    grid: &crate::grid::Grid,
    a: f64,
    p: &Field,
) -> Result<Construction> {
    let chol = grid.laplacian_matrix(0.0).factor()?;
    let mut v = grid.constant(0.0);
    let mut it = 0;
    for _ in 0..200 {
        it += 1;
        let gm = grid.gradient_magnitude(&v)?;
        let rhs: Vec<f64> = (0..v.len()).map(|k| p[k] - gm[k].powf(a)).collect();
        let next = Field(chol.solve(&rhs));
        let step = next.iter().zip(v.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        v = Field(v.iter().zip(next.iter()).map(|(x, y)| 0.5 * (x + y)).collect());
        if step < 1e-6 * v.max().abs().max(1e-300) {
            break;
        }
    }
    let eq = Equation {
        grid,
        singular: None,
        eps: 0.0,
        convection: Some(a),
        reaction: None,
        source: Some(p),
    };
    let run = newton_core(&eq, v, 1e-10 * p.max().max(1.0), 50);
    it += run.iterations;
    run.outcome?;
    let v = run.u;
    if !v.is_positive() {
        return Err(Error::PositivityViolation(v.min()));
    }
    let cert = eq.residual(&v)?;
    let mut m = meta(ConstructionKind::SubConvection);
    m.residual_max = norm_inf(&cert);
    m.iterations = it;
    Ok(Construction {
        field: v,
        kind: ConstructionKind::SubConvection,
        certificate: cert,
        meta: m,
    })
}

/// `(M, λ_threshold)` for the field `M h(φ₁)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EigenThreshold {
    #[serde(rename = "M")]
    pub m: f64,
    pub lambda_threshold: f64,
    /// First λ-condition alone (collar; uses the peak value `M h(‖φ₁‖∞)`).
    pub lambda_collar: f64,
    /// Second λ-condition alone (over Ω₀).
    pub lambda_interior: f64,
}

pub fn eigen_threshold(
    spec: &ProblemSpec,
    eig: &EigenPair,
    collar: &HopfCollar,
    profile: &HProfile,
) -> Result<EigenThreshold> {
    if spec.regime() != SignRegime::Positive {
        return Err(Error::Regime("eigen sub-solution needs K > 0 on the closed domain".into()));
    }
    let kstar = spec.k_max();
    let m = (2.0 * kstar / (collar.delta * collar.delta)).max(1.0);
    let a = spec.a();
    let lambda1 = eig.lambda1;
    let grad = spec.grid().gradient_magnitude(&eig.phi)?;
    let g = spec.singular();
    let n = eig.phi.len();

    let phi_max = eig.phi.max();
    let (hm, _) = profile.eval(phi_max);
    let fmin_peak = (0..n).map(|k| spec.f_at(k, m * hm)).fold(f64::INFINITY, f64::min);
    let lambda_collar = 2.0 * lambda1 * m * hm / fmin_peak;

    let lambda_interior = if collar.interior.is_empty() {
        0.0
    } else {
        let mut num = f64::NEG_INFINITY;
        let mut den = f64::INFINITY;
        for &k in &collar.interior {
            let (h, dh) = profile.eval(eig.phi[k]);
            let v = kstar * g.eval(h) + 2.0 * lambda1 * m * h + (m * dh * grad[k]).powf(a);
            num = num.max(v);
            den = den.min(spec.f_at(k, m * h));
        }
        num / den
    };
    Ok(EigenThreshold {
        m,
        lambda_threshold: lambda_collar.max(lambda_interior),
        lambda_collar,
        lambda_interior,
    })
}

/// `u = M h(φ₁)`; certified when `spec.λ >= λ_threshold`.
pub fn build_subsolution_eigen(
    spec: &ProblemSpec,
    eig: &EigenPair,
    collar: &HopfCollar,
    profile: &HProfile,
) -> Result<Construction> {
    let th = eigen_threshold(spec, eig, collar, profile)?;
    if spec.lambda() < th.lambda_threshold {
        return Err(Error::SubsolutionNotCertified {
            threshold: th.lambda_threshold,
        });
    }
    let grid = spec.grid();
    let m = th.m;
    let field = Field(eig.phi.iter().map(|p| m * profile.eval(*p).0).collect());
    let cert = crate::solver::residual(&spec.with_eps(0.0)?, &field)?;

    let grad = grid.gradient_magnitude(&eig.phi)?;
    let a = spec.a();
    let kstar = spec.k_max();
    let failures = collar
        .collar
        .iter()
        .filter(|&&k| {
            let (h, dh) = profile.eval(eig.phi[k]);
            -kstar * spec.singular().eval(h) + (m * dh * grad[k]).powf(a) >= 0.0
        })
        .count();

    let mut md = meta(ConstructionKind::SubEigen);
    md.m = Some(m);
    md.delta = Some(collar.delta);
    md.lambda_threshold = Some(th.lambda_threshold);
    md.residual_max = cert.max();
    md.omega0_size = Some(collar.interior.len());
    md.collar_condition_failures = Some(failures);
    Ok(Construction {
        field,
        kind: ConstructionKind::SubEigen,
        certificate: cert,
        meta: md,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::hprofile::build_h_profile;
    use crate::model::{make_problem, Potential, ReactionTerm, SingularTerm};
    use crate::spectral::hopf_collar;

    fn spec(k: f64, alpha: f64, p: f64, lambda: f64, n: usize) -> ProblemSpec {
        make_problem(
            Grid::interval(1.0, n).unwrap(),
            Potential::Constant(k),
            SingularTerm::power(alpha).unwrap(),
            ReactionTerm::power(p).unwrap(),
            1.0,
            lambda,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn super_solution_bounds() {
        let s = spec(1.0, 0.5, 0.5, 1.0, 127);
        let c = build_supersolution(&s).unwrap();
        assert!(c.meta.residual_max < 1e-9);
        let (c1, c2) = (c.meta.c1.unwrap(), c.meta.c2.unwrap());
        assert!(0.0 < c1 && c1 <= c2 && c2.is_finite());
        // Picard iterates are ordered; U is symmetric.
        let n = c.field.len();
        for i in 0..n / 2 {
            assert!((c.field[i] - c.field[n - 1 - i]).abs() < 1e-10);
        }
    }

    #[test]
    fn convection_subsolution_closed_form() {
        let grid = Grid::interval(1.0, 255).unwrap();
        let p = grid.constant(1.0);
        let c = solve_convection_problem(&grid, 1.0, &p).unwrap();
        let mid = c.field[127];
        assert!((mid - ((-0.5f64).exp() - 0.5)).abs() < 1e-4, "{mid}");
        assert!(c.meta.residual_max < 1e-10);
    }

    #[test]
    fn regime_errors() {
        let s = spec(1.0, 0.5, 0.5, 1.0, 31);
        assert!(matches!(build_subsolution_convection(&s), Err(Error::Regime(_))));
        let s = spec(-1.0, 0.5, 0.5, 1.0, 31);
        let g = s.grid().clone();
        let e = first_eigenpair(&g, 1e-10).unwrap();
        let col = hopf_collar(&g, &e, 0.1).unwrap();
        let hp = build_h_profile(s.singular(), 1.0, 1e-8).unwrap();
        assert!(matches!(build_subsolution_eigen(&s, &e, &col, &hp), Err(Error::Regime(_))));
    }

    #[test]
    fn eigen_subsolution_m_and_threshold() {
        let s = spec(1.0, 0.5, 0.5, 1.0, 255);
        let g = s.grid().clone();
        let e = first_eigenpair(&g, 1e-10).unwrap();
        let col = hopf_collar(&g, &e, 0.1).unwrap();
        let hp = build_h_profile(s.singular(), 1.0, 1e-8).unwrap();
        let th = eigen_threshold(&s, &e, &col, &hp).unwrap();
        assert_eq!(th.m, 1.0);
        let err = build_subsolution_eigen(&s, &e, &col, &hp).unwrap_err();
        assert!(matches!(err, Error::SubsolutionNotCertified { .. }));
        let s2 = s.with_lambda(2.0 * th.lambda_threshold).unwrap();
        let c = build_subsolution_eigen(&s2, &e, &col, &hp).unwrap();
        assert!((c.field[127] - 1.5f64.powf(4.0 / 3.0)).abs() < 1e-6);
        assert!(c.certificate.iter().all(|r| *r <= 0.0));
        let forced = HopfCollar {
            delta: 0.5,
            ..col.clone()
        };
        assert_eq!(eigen_threshold(&s, &e, &forced, &hp).unwrap().m, 8.0);
    }
}
