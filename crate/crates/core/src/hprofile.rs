//! The profile `h'' = g(h)`, `h(0) = 0`, `h'(0) = 0`.
//!
//! Multiplying by `h'` gives `h' = √(2G(h))` with `G(y) = ∫_0^y g`, so the
//! inverse function is `t(h) = ∫_0^h dy / √(2G(y))`. The integrand is
//! integrable at 0 exactly when `g` is, which is where the construction
//! breaks down for strong singularities. The table is produced in the
//! `h`-variable and inverted onto a `t`-grid that is geometric near 0 (where
//! `h` has a power cusp) and uniform afterwards.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{classify_singularity, Integrability, SingularTerm};
use crate::quad;

/// Tabulated `(t_i, h_i, h'_i)` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct HProfile {
    t: Vec<f64>,
    h: Vec<f64>,
    dh: Vec<f64>,
    g: Option<SingularTerm>,
    cap: f64,
}

impl HProfile {
    /// Wraps raw table data (used for diagnostics on external tables).
    pub fn from_table(t: Vec<f64>, h: Vec<f64>, dh: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != h.len() || t.len() != dh.len() {
            return Err(Error::Shape {
                expected: t.len(),
                got: h.len().min(dh.len()),
            });
        }
        let cap = *t.last().expect("nonempty");
        Ok(Self {
            t,
            h,
            dh,
            g: None,
            cap,
        })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }
    pub fn h(&self) -> &[f64] {
        &self.h
    }
    pub fn dh(&self) -> &[f64] {
        &self.dh
    }
    pub fn cap(&self) -> f64 {
        self.cap
    }
    pub fn len(&self) -> usize {
        self.t.len()
    }
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `(h(s), h'(s))` by cubic Hermite interpolation of the table, using
    /// `h'' = g(h)` as the derivative data for `h'`. Below the first positive
    /// abscissa the local power law through that point is used.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let n = self.t.len();
        if s <= 0.0 || n < 2 {
            return (0.0, 0.0);
        }
        let (t1, h1, d1) = (self.t[1], self.h[1], self.dh[1]);
        if s <= t1 {
            let beta = t1 * d1 / h1;
            let h = h1 * (s / t1).powf(beta);
            return (h, beta * h / s);
        }
        let i = (self.t.partition_point(|v| *v <= s).max(2) - 1).min(n - 2);
        let (ta, tb) = (self.t[i], self.t[i + 1]);
        let dt = tb - ta;
        let x = (s - ta) / dt;
        let (ha, hb, da, db) = (self.h[i], self.h[i + 1], self.dh[i], self.dh[i + 1]);
        let (x2, x3) = (x * x, x * x * x);
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        let h = h00 * ha + h10 * dt * da + h01 * hb + h11 * dt * db;
        let dh = match &self.g {
            Some(g) => {
                let (ca, cb) = (g.eval(ha), g.eval(hb));
                h00 * da + h10 * dt * ca + h01 * db + h11 * dt * cb
            }
            None => da + x * (db - da),
        };
        (h, dh)
    }
}

/// `t(y) = ∫_0^y dw / √(2G(w))`, via `w = y σ²` to remove the endpoint
/// singularity.
fn t_of_h(g: &SingularTerm, y: f64, rtol: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let big_g = |w: f64| g.primitive(w).expect("integrable");
    quad::integrate(
        |sig: f64| {
            let w = y * sig * sig;
            2.0 * y * sig / (2.0 * big_g(w)).sqrt()
        },
        0.0,
        1.0,
        rtol,
        0.0,
    )
    .value
}

fn t_increment(g: &SingularTerm, a: f64, b: f64, rtol: f64) -> f64 {
    quad::integrate(
        |w: f64| 1.0 / (2.0 * g.primitive(w).expect("integrable")).sqrt(),
        a,
        b,
        rtol,
        0.0,
    )
    .value
}

/// Builds the table on `[0, cap]` to relative accuracy `tol`.
pub fn build_h_profile(g: &SingularTerm, cap: f64, tol: f64) -> Result<HProfile> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::Range(format!("profile cap must be positive, got {cap}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Range(format!("tolerance must be positive, got {tol}")));
    }
    match classify_singularity(g) {
        Integrability::Integrable => {}
        Integrability::NonIntegrable => return Err(Error::KellerOsserman),
        Integrability::Indeterminate(why) => {
            return Err(Error::Model(format!("cannot decide integrability of g: {why}")))
        }
    }
    let rtol = (tol * 1e-3).max(1e-14);

    // Target abscissae.
    let t_geo_end = 0.01 * cap;
    let mut targets = vec![0.0];
    let mut t = 1e-8 * cap;
    while t < t_geo_end {
        targets.push(t);
        t *= 1.02;
    }
    let uniform = 1000;
    for k in 0..=uniform {
        targets.push(t_geo_end + (cap - t_geo_end) * k as f64 / uniform as f64);
    }

    // Knots in h with cumulative t(h); start well below the first target.
    let first = targets[1];
    let mut y0 = 1.0;
    while t_of_h(g, y0, rtol) > 0.1 * first {
        y0 *= 0.25;
        if y0 < 1e-300 {
            return Err(Error::Model("h-profile does not resolve near the origin".into()));
        }
    }
    let mut ys = vec![y0];
    let mut ts = vec![t_of_h(g, y0, rtol)];
    while *ts.last().expect("nonempty") < cap {
        let a = *ys.last().expect("nonempty");
        let b = a * 1.05;
        let dt = t_increment(g, a, b, rtol);
        ys.push(b);
        ts.push(ts.last().expect("nonempty") + dt);
        if ys.len() > 100_000 {
            return Err(Error::Model("h-profile knot sequence did not reach the cap".into()));
        }
    }

    let speed = |y: f64| (2.0 * g.primitive(y).expect("integrable")).sqrt();
    let mut hs = vec![0.0];
    let mut dhs = vec![0.0];
    for &tt in &targets[1..] {
        let j = (ts.partition_point(|v| *v <= tt).max(1) - 1).min(ts.len() - 2);
        let (mut lo, mut hi) = (ys[j], ys[j + 1]);
        let base = ts[j];
        // Initial guess from the local slope dt/dy = 1/h'.
        let mut y = (lo + (tt - base) * speed(lo)).clamp(lo, hi);
        for _ in 0..60 {
            let r = base + t_increment(g, ys[j], y, rtol) - tt;
            if r.abs() <= 1e-15 * tt.max(1e-300) {
                break;
            }
            if r > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let step = r * speed(y);
            let cand = y - step;
            y = if cand > lo && cand < hi { cand } else { 0.5 * (lo + hi) };
            if (hi - lo) <= 1e-16 * hi {
                break;
            }
        }
        hs.push(y);
        dhs.push(speed(y));
    }
    Ok(HProfile {
        t: targets,
        h: hs,
        dh: dhs,
        g: Some(g.clone()),
        cap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HBoundReport {
    /// `max t h'(t) / (2 h(t))` over table points with `t > 0`.
    pub max_ratio: f64,
    pub passed: bool,
    pub checked: usize,
}

/// Checks `t h'(t) <= 2 h(t)` at every table point.
pub fn verify_h_bound(profile: &HProfile, tol: f64) -> HBoundReport {
    let mut max_ratio = f64::NEG_INFINITY;
    let mut checked = 0;
    for i in 0..profile.len() {
        let (t, h, dh) = (profile.t[i], profile.h[i], profile.dh[i]);
        if t > 0.0 && h > 0.0 {
            max_ratio = max_ratio.max(t * dh / (2.0 * h));
            checked += 1;
        }
    }
    HBoundReport {
        max_ratio: if checked == 0 { 0.0 } else { max_ratio },
        passed: checked == 0 || max_ratio <= 1.0 + tol,
        checked,
    }
}

/// Spread of `h'(t)² - 2G(h(t))` over the table: the energy identity holds
/// between every pair of points up to this value.
pub fn energy_defect(profile: &HProfile, g: &SingularTerm) -> Option<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..profile.len() {
        let e = profile.dh[i] * profile.dh[i] - 2.0 * g.primitive(profile.h[i])?;
        lo = lo.min(e);
        hi = hi.max(e);
    }
    Some(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(alpha: f64, t: f64) -> f64 {
        let beta = 2.0 / (alpha + 1.0);
        let c = ((alpha + 1.0) / 2.0 * (2.0 / (1.0 - alpha)).sqrt()).powf(beta);
        c * t.powf(beta)
    }

    #[test]
    fn sqrt_singularity_values() {
        let g = SingularTerm::power(0.5).unwrap();
        let p = build_h_profile(&g, 1.0, 1e-8).unwrap();
        let (h, dh) = p.eval(2.0 / 3.0);
        assert!((h - 1.0).abs() < 1e-7, "{h}");
        assert!((dh - 2.0).abs() < 1e-7, "{dh}");
        assert!(2.0 / 3.0 * dh <= 2.0 * h);
        let (h1, _) = p.eval(1.0);
        assert!((h1 - 1.5f64.powf(4.0 / 3.0)).abs() < 1e-7);
    }

    #[test]
    fn table_matches_closed_form() {
        for alpha in [0.25, 0.5, 0.75] {
            let g = SingularTerm::power(alpha).unwrap();
            let p = build_h_profile(&g, 1.0, 1e-8).unwrap();
            for i in 1..p.len() {
                let exact = closed_form(alpha, p.t()[i]);
                assert!((p.h()[i] - exact).abs() <= 1e-7 * exact, "alpha={alpha} i={i}");
            }
            // Interpolated values between table points.
            for k in 1..50 {
                let s = k as f64 / 50.0;
                let exact = closed_form(alpha, s);
                assert!((p.eval(s).0 - exact).abs() <= 1e-6 * exact);
            }
        }
    }

    #[test]
    fn strong_singularity_rejected() {
        let g = SingularTerm::power(1.5).unwrap();
        assert_eq!(build_h_profile(&g, 1.0, 1e-8).unwrap_err(), Error::KellerOsserman);
        assert_eq!(
            build_h_profile(&SingularTerm::ShiftedExp, 1.0, 1e-8).unwrap_err(),
            Error::KellerOsserman
        );
        let g = SingularTerm::power(0.5).unwrap();
        assert!(matches!(build_h_profile(&g, 0.0, 1e-8), Err(Error::Range(_))));
    }

    #[test]
    fn bound_ratio_is_constant_for_powers() {
        for (alpha, ratio) in [(0.5, 2.0 / 3.0), (0.9, 1.0 / 1.9)] {
            let g = SingularTerm::power(alpha).unwrap();
            let p = build_h_profile(&g, 1.0, 1e-8).unwrap();
            let r = verify_h_bound(&p, 1e-8);
            assert!(r.passed);
            assert!((r.max_ratio - ratio).abs() < 1e-6, "{}", r.max_ratio);
        }
        let single = HProfile::from_table(vec![0.0], vec![0.0], vec![0.0]).unwrap();
        let r = verify_h_bound(&single, 1e-8);
        assert!(r.passed && r.checked == 0);
    }

    #[test]
    fn energy_identity_and_second_derivative() {
        let g = SingularTerm::power(0.5).unwrap();
        let tol = 1e-8;
        let p = build_h_profile(&g, 1.0, tol).unwrap();
        assert!(energy_defect(&p, &g).unwrap() < 10.0 * tol);
        assert_eq!(p.h()[0], 0.0);
        assert_eq!(p.dh()[0], 0.0);
        assert!(p.h().windows(2).all(|w| w[1] > w[0]));
        assert!(p.dh().windows(2).all(|w| w[1] >= w[0]));
        // h'' from centered differences of h' on the uniform part.
        let n = p.len();
        for i in (n - 900..n - 1).step_by(50) {
            let (t, d) = (p.t(), p.dh());
            let dd = (d[i + 1] - d[i - 1]) / (t[i + 1] - t[i - 1]);
            let gh = g.eval(p.h()[i]);
            assert!((dd - gh).abs() < 1e-4 * gh, "i={i}: {dd} vs {gh}");
        }
        // h' is continuous at 0.
        assert!(p.eval(1e-12).1 < 1e-3);
    }

    #[test]
    fn tabulated_singularity_profile() {
        use crate::model::SingularTable;
        let s: Vec<f64> = (0..400).map(|i| 1e-3 * 1.02f64.powi(i)).collect();
        let gv: Vec<f64> = s.iter().map(|x| x.powf(-0.5)).collect();
        let g = SingularTerm::Table(SingularTable::new(s, gv).unwrap());
        let p = build_h_profile(&g, 1.0, 1e-8).unwrap();
        let (h, _) = p.eval(2.0 / 3.0);
        assert!((h - 1.0).abs() < 1e-3);
    }
}
