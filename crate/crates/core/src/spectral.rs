//! First Dirichlet eigenpair of the discrete `-Δ` and the boundary collar on
//! which its gradient stays bounded away from zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::norm_inf;

const MAX_ITER: usize = 500;

/// `(λ₁, φ₁)` with `φ₁ > 0` and `max φ₁ = 1`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi: Field,
    pub iterations: usize,
    /// `‖-Δφ₁ - λ₁φ₁‖∞ / λ₁`.
    pub residual: f64,
}

/// Inverse power iteration on `-Δ` with one banded Cholesky factorization.
///
/// Stops once successive Rayleigh quotients differ by less than `tol`
/// (relative) and the relative eigen-residual is below `tol` as well.
pub fn first_eigenpair(grid: &Grid, tol: f64) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::Range(format!("tolerance must be positive, got {tol}")));
    }
    let chol = grid.laplacian_matrix(0.0).factor()?;
    let mut v = grid.constant(1.0);
    let mut rq_prev = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let w = chol.solve(&v);
        let scale = norm_inf(&w);
        v = Field(w.iter().map(|x| x / scale).collect());
        let av = grid.apply_laplacian(&v)?;
        let num: f64 = v.iter().zip(av.iter()).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        let rq = num / den;
        residual = av
            .iter()
            .zip(v.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - rq * b).abs()))
            / rq;
        if (rq - rq_prev).abs() < tol * rq && residual < tol {
            let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
            let phi = v.scaled(sign / norm_inf(&v));
            if !phi.is_positive() {
                return Err(Error::Convergence {
                    iterations: it,
                    residual,
                });
            }
            return Ok(EigenPair {
                lambda1: rq,
                phi,
                iterations: it,
                residual,
            });
        }
        rq_prev = rq;
    }
    Err(Error::Convergence {
        iterations: MAX_ITER,
        residual,
    })
}

/// Boundary strip `{dist < d}` with `δ = min |∇φ₁|` over it; `interior`
/// lists the remaining nodes (the set Ω₀).
#[derive(Debug, Clone, Serialize)]
pub struct HopfCollar {
    pub width: f64,
    pub delta: f64,
    pub collar: Vec<usize>,
    pub interior: Vec<usize>,
}

/// Default collar width: four grid spacings of the finest axis.
pub fn default_collar_width(grid: &Grid) -> f64 {
    4.0 * grid.spacing().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn hopf_collar(grid: &Grid, eig: &EigenPair, d: f64) -> Result<HopfCollar> {
    let half = 0.5 * grid.extents().iter().copied().fold(f64::INFINITY, f64::min);
    if !(d > 0.0) {
        return Err(Error::Collar(format!("collar width must be positive, got {d}")));
    }
    if d >= half {
        return Err(Error::Collar(format!(
            "collar width {d} covers the whole domain (gradient of phi1 vanishes at its peak); use d < {half}"
        )));
    }
    let dist = grid.boundary_distance();
    let grad = grid.gradient_magnitude(&eig.phi)?;
    let (collar, interior): (Vec<usize>, Vec<usize>) = (0..grid.len()).partition(|&k| dist[k] < d);
    if collar.is_empty() {
        return Err(Error::Collar(format!("no grid node within distance {d} of the boundary")));
    }
    let delta = collar.iter().map(|&k| grad[k]).fold(f64::INFINITY, f64::min);
    if !(delta > 0.0) {
        return Err(Error::Collar(format!(
            "gradient of phi1 vanishes in the collar of width {d}; choose a smaller width"
        )));
    }
    Ok(HopfCollar {
        width: d,
        delta,
        collar,
        interior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn three_node_closed_form() {
        let g = Grid::interval(1.0, 3).unwrap();
        let e = first_eigenpair(&g, 1e-12).unwrap();
        let exact = 32.0 * (1.0 - (PI / 4.0).cos());
        assert!((e.lambda1 - exact).abs() < 1e-10);
        assert!((e.lambda1 - 9.3726).abs() < 1e-4);
        let s = 0.5f64.sqrt();
        for (a, b) in e.phi.iter().zip([s, 1.0, s]) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn matches_closed_form_and_residual_bound() {
        for g in [
            Grid::interval(2.0, 40).unwrap(),
            Grid::rectangle(1.0, 2.0, 12, 20).unwrap(),
        ] {
            let e = first_eigenpair(&g, 1e-10).unwrap();
            assert!((e.lambda1 - g.lambda1_closed_form()).abs() < 1e-8 * e.lambda1);
            assert!(e.residual < 1e-10);
            assert!(e.phi.is_positive());
            assert!((e.phi.max() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn eigenvalue_approaches_pi_squared_monotonically() {
        let mut prev = 0.0;
        for n in [15, 31, 63] {
            let e = first_eigenpair(&Grid::interval(1.0, n).unwrap(), 1e-10).unwrap();
            assert!(e.lambda1 > prev && e.lambda1 < PI * PI);
            let h = 1.0 / (n as f64 + 1.0);
            // λ₁(h) = π² - π⁴h²/12 + O(h⁴).
            let gap = PI * PI - e.lambda1;
            assert!((gap / (h * h) - PI.powi(4) / 12.0).abs() < 0.05);
            prev = e.lambda1;
        }
    }

    #[test]
    fn bad_tolerance() {
        let g = Grid::interval(1.0, 5).unwrap();
        assert!(matches!(first_eigenpair(&g, 0.0), Err(Error::Range(_))));
    }

    #[test]
    fn collar_examples() {
        let g = Grid::interval(1.0, 1023).unwrap();
        let e = first_eigenpair(&g, 1e-9).unwrap();
        let c = hopf_collar(&g, &e, 0.1).unwrap();
        assert!((c.delta - PI * (0.1 * PI).cos()).abs() < 2e-3, "{}", c.delta);
        assert!((c.delta - 2.988).abs() < 2e-3);
        let c = hopf_collar(&g, &e, 0.49).unwrap();
        assert!((c.delta - PI * (0.49 * PI).cos()).abs() < 1e-2);
        assert!(c.delta > 0.0);
        assert_eq!(c.collar.len() + c.interior.len(), g.len());
        assert!(matches!(hopf_collar(&g, &e, 0.5), Err(Error::Collar(_))));
    }

    #[test]
    fn delta_nonincreasing_in_width() {
        let g = Grid::rectangle(1.0, 1.0, 31, 31).unwrap();
        let e = first_eigenpair(&g, 1e-9).unwrap();
        let mut prev = f64::INFINITY;
        for d in [0.05, 0.1, 0.2, 0.3, 0.4] {
            let c = hopf_collar(&g, &e, d).unwrap();
            assert!(c.delta <= prev);
            prev = c.delta;
        }
    }
}
