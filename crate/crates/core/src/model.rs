//! Nonlinearities `K`, `g`, `f` and the assembled problem instance
//! `-Δu + K(x) g(u) + |∇u|^a = λ f(x, u)` with `u = 0` on the boundary.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Point};
use crate::quad;

type PointFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Singular absorption term `g`, nonincreasing with `g(0+) = +∞`.
#[derive(Debug, Clone, PartialEq)]
pub enum SingularTerm {
    /// `g(s) = s^{-α}`, `α > 0`.
    Power { alpha: f64 },
    /// `g(s) = e^{1/s} - 1`.
    ShiftedExp,
    /// Tabulated data with linear interpolation; see [`SingularTable`].
    Table(SingularTable),
}

/// Monotone table `(s_i, g_i)`. Below the first abscissa the table continues
/// as the power law through its first two points; beyond the last one it is
/// constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTable {
    s: Vec<f64>,
    g: Vec<f64>,
    tail_alpha: f64,
}

impl SingularTable {
    pub fn new(s: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if s.len() != g.len() || s.len() < 2 {
            return Err(Error::Model("table needs at least two (s, g) pairs".into()));
        }
        if !(s[0] > 0.0) || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Model("table abscissae must be positive and increasing".into()));
        }
        if g.iter().any(|v| !(*v >= 0.0)) || g.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Model("table values must be nonnegative and nonincreasing".into()));
        }
        let tail_alpha = -(g[1] / g[0]).ln() / (s[1] / s[0]).ln();
        if !(tail_alpha > 0.0) || !tail_alpha.is_finite() {
            return Err(Error::Model(
                "table must decrease between its first two points so that g blows up at 0".into(),
            ));
        }
        Ok(Self { s, g, tail_alpha })
    }

    pub fn tail_alpha(&self) -> f64 {
        self.tail_alpha
    }

    fn eval(&self, x: f64) -> f64 {
        let (s, g) = (&self.s, &self.g);
        if x <= s[0] {
            return g[0] * (x / s[0]).powf(-self.tail_alpha);
        }
        let last = s.len() - 1;
        if x >= s[last] {
            return g[last];
        }
        let i = s.partition_point(|v| *v <= x) - 1;
        let t = (x - s[i]) / (s[i + 1] - s[i]);
        g[i] + t * (g[i + 1] - g[i])
    }

    fn deriv(&self, x: f64) -> f64 {
        let (s, g) = (&self.s, &self.g);
        if x <= s[0] {
            return -self.tail_alpha * self.eval(x) / x;
        }
        let last = s.len() - 1;
        if x >= s[last] {
            return 0.0;
        }
        let i = s.partition_point(|v| *v <= x) - 1;
        (g[i + 1] - g[i]) / (s[i + 1] - s[i])
    }

    /// `∫_a^b g` for `0 < a <= b`, exact for the piecewise model.
    fn integral(&self, a: f64, b: f64) -> f64 {
        let piece = |lo: f64, hi: f64| -> f64 {
            if hi <= lo {
                return 0.0;
            }
            // Within one piece the model is either the tail, linear or flat.
            if hi <= self.s[0] {
                let al = self.tail_alpha;
                let c = self.g[0] * self.s[0].powf(al);
                if (al - 1.0).abs() < 1e-14 {
                    c * (hi / lo).ln()
                } else {
                    c * (hi.powf(1.0 - al) - lo.powf(1.0 - al)) / (1.0 - al)
                }
            } else {
                0.5 * (self.eval(lo) + self.eval(hi)) * (hi - lo)
            }
        };
        let mut knots = vec![a];
        knots.extend(self.s.iter().copied().filter(|v| *v > a && *v < b));
        knots.push(b);
        knots.windows(2).map(|w| piece(w[0], w[1])).sum()
    }
}

impl SingularTerm {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Range(format!("singular exponent must be positive, got {alpha}")));
        }
        Ok(SingularTerm::Power { alpha })
    }

    /// `g(s)`; `+∞` for `s <= 0`.
    pub fn eval(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return f64::INFINITY;
        }
        match self {
            SingularTerm::Power { alpha } => s.powf(-alpha),
            SingularTerm::ShiftedExp => (1.0 / s).exp_m1(),
            SingularTerm::Table(t) => t.eval(s),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        if !(s > 0.0) {
            return f64::NEG_INFINITY;
        }
        match self {
            SingularTerm::Power { alpha } => -alpha * s.powf(-alpha - 1.0),
            SingularTerm::ShiftedExp => -(1.0 / s).exp() / (s * s),
            SingularTerm::Table(t) => t.deriv(s),
        }
    }

    /// `∫_a^b g(s) ds` for `0 < a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            SingularTerm::Power { alpha } => {
                if (alpha - 1.0).abs() < 1e-14 {
                    (b / a).ln()
                } else {
                    let e = 1.0 - alpha;
                    (b.powf(e) - a.powf(e)) / e
                }
            }
            SingularTerm::ShiftedExp => {
                // Log substitution keeps the integrand tame across scales.
                let q = quad::integrate(
                    |t: f64| {
                        let s = t.exp();
                        (1.0 / s).exp_m1() * s
                    },
                    a.ln(),
                    b.ln(),
                    1e-12,
                    0.0,
                );
                q.value
            }
            SingularTerm::Table(t) => t.integral(a, b),
        }
    }

    /// Primitive `G(y) = ∫_0^y g`, or `None` when `g` is not integrable at 0.
    pub fn primitive(&self, y: f64) -> Option<f64> {
        if y <= 0.0 {
            return Some(0.0);
        }
        match self {
            SingularTerm::Power { alpha } if *alpha < 1.0 => Some(y.powf(1.0 - alpha) / (1.0 - alpha)),
            SingularTerm::Power { .. } | SingularTerm::ShiftedExp => None,
            SingularTerm::Table(t) if t.tail_alpha < 1.0 => {
                let s0 = t.s[0];
                let head = t.g[0] * s0 / (1.0 - t.tail_alpha);
                if y <= s0 {
                    Some(head * (y / s0).powf(1.0 - t.tail_alpha))
                } else {
                    Some(head + t.integral(s0, y))
                }
            }
            SingularTerm::Table(_) => None,
        }
    }
}

/// Outcome of the integrability test of `g` at the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrability {
    Integrable,
    NonIntegrable,
    Indeterminate(String),
}

/// Decides whether `∫_0^1 g < ∞`: closed form for the built-in families,
/// partial integrals over dyadic shells for tabulated data.
pub fn classify_singularity(g: &SingularTerm) -> Integrability {
    match g {
        SingularTerm::Power { alpha } => {
            if *alpha < 1.0 {
                Integrability::Integrable
            } else {
                Integrability::NonIntegrable
            }
        }
        SingularTerm::ShiftedExp => Integrability::NonIntegrable,
        SingularTerm::Table(_) => {
            // Shell masses ∫_{2^-k-1}^{2^-k} g: geometric decay means a
            // convergent series, a ratio ≥ 1 means divergence.
            let shell = |k: i32| g.integral(2f64.powi(-k - 1), 2f64.powi(-k));
            let ratios: Vec<f64> = (40..48).map(|k| shell(k + 1) / shell(k)).collect();
            let r = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !r.is_finite() {
                Integrability::NonIntegrable
            } else if r < 0.999 {
                Integrability::Integrable
            } else if r >= 1.0 - 1e-9 {
                Integrability::NonIntegrable
            } else {
                Integrability::Indeterminate(format!(
                    "dyadic shell ratio {r:.6} too close to 1 to decide"
                ))
            }
        }
    }
}

/// Space-dependent weight, closed form over the closed domain.
#[derive(Clone)]
pub enum Weight {
    Constant(f64),
    Custom(PointFn),
}

impl Weight {
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::Custom(f) => f(p),
        }
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Constant(c) => write!(f, "Constant({c})"),
            Weight::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// `s`-dependence of the reaction term.
#[derive(Debug, Clone, PartialEq)]
pub enum ReactionProfile {
    /// `s^p`.
    Power { p: f64 },
    /// Piecewise-linear data through `(s_i, φ_i)`, continued by the power
    /// laws through the first and last two points.
    Table { s: Vec<f64>, v: Vec<f64> },
}

/// Reaction term `f(x, s) = q(x) φ(s)`.
#[derive(Debug, Clone)]
pub struct ReactionTerm {
    pub weight: Weight,
    pub profile: ReactionProfile,
}

impl ReactionTerm {
    pub fn power(p: f64) -> Result<Self> {
        Self::weighted_power(p, Weight::Constant(1.0))
    }

    pub fn weighted_power(p: f64, weight: Weight) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::Range(format!("reaction exponent must be positive, got {p}")));
        }
        Ok(Self {
            weight,
            profile: ReactionProfile::Power { p },
        })
    }

    pub fn table(s: Vec<f64>, v: Vec<f64>, weight: Weight) -> Result<Self> {
        if s.len() != v.len() || s.len() < 2 {
            return Err(Error::Model("reaction table needs at least two points".into()));
        }
        if !(s[0] > 0.0) || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Model("reaction abscissae must be positive and increasing".into()));
        }
        if !(v[0] > 0.0) || v.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Model("reaction values must be positive and nondecreasing".into()));
        }
        Ok(Self {
            weight,
            profile: ReactionProfile::Table { s, v },
        })
    }

    /// `φ(s)` for `s >= 0` (negative arguments are clamped to 0).
    pub fn profile(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match &self.profile {
            ReactionProfile::Power { p } => s.powf(*p),
            ReactionProfile::Table { s: xs, v } => {
                let last = xs.len() - 1;
                if s <= xs[0] {
                    let e = (v[1] / v[0]).ln() / (xs[1] / xs[0]).ln();
                    if s == 0.0 {
                        return if e > 0.0 { 0.0 } else { v[0] };
                    }
                    return v[0] * (s / xs[0]).powf(e);
                }
                if s >= xs[last] {
                    let e = (v[last] / v[last - 1]).ln() / (xs[last] / xs[last - 1]).ln();
                    return v[last] * (s / xs[last]).powf(e);
                }
                let i = xs.partition_point(|x| *x <= s) - 1;
                let t = (s - xs[i]) / (xs[i + 1] - xs[i]);
                v[i] + t * (v[i + 1] - v[i])
            }
        }
    }

    pub fn profile_deriv(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return match &self.profile {
                ReactionProfile::Power { p } if *p < 1.0 => f64::INFINITY,
                ReactionProfile::Power { p } if *p == 1.0 => 1.0,
                _ => 0.0,
            };
        }
        match &self.profile {
            ReactionProfile::Power { p } => p * s.powf(p - 1.0),
            ReactionProfile::Table { s: xs, v } => {
                let last = xs.len() - 1;
                if s <= xs[0] || s >= xs[last] {
                    let (i, j) = if s <= xs[0] { (0, 1) } else { (last - 1, last) };
                    let e = (v[j] / v[i]).ln() / (xs[j] / xs[i]).ln();
                    return e * self.profile(s) / s;
                }
                let i = xs.partition_point(|x| *x <= s) - 1;
                (v[i + 1] - v[i]) / (xs[i + 1] - xs[i])
            }
        }
    }

    pub fn eval(&self, p: Point, s: f64) -> f64 {
        self.weight.eval(p) * self.profile(s)
    }
}

/// Potential `K(x)`.
#[derive(Clone)]
pub enum Potential {
    Constant(f64),
    /// `offset + slope · x`.
    Affine { offset: f64, slope: [f64; 2] },
    Custom(PointFn),
}

impl Potential {
    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Potential::Constant(c) => *c,
            Potential::Affine { offset, slope } => offset + slope[0] * p[0] + slope[1] * p[1],
            Potential::Custom(f) => f(p),
        }
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Constant(c) => write!(f, "Constant({c})"),
            Potential::Affine { offset, slope } => write!(f, "Affine({offset}, {slope:?})"),
            Potential::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignRegime {
    /// `K < 0` in Ω (may vanish on the boundary).
    Negative,
    /// `K > 0` on the closed domain.
    Positive,
}

/// A validated instance of the problem on a grid.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    grid: Grid,
    potential: Potential,
    g: SingularTerm,
    f: ReactionTerm,
    a: f64,
    lambda: f64,
    eps: f64,
    source: Option<Field>,
    k_nodes: Vec<f64>,
    q_nodes: Vec<f64>,
    k_min: f64,
    k_max: f64,
    regime: SignRegime,
    singular_on: bool,
    convection_on: bool,
}

/// Validates the pieces and caches nodal values of `K` and `q`.
pub fn make_problem(
    grid: Grid,
    potential: Potential,
    g: SingularTerm,
    f: ReactionTerm,
    a: f64,
    lambda: f64,
    eps: f64,
) -> Result<ProblemSpec> {
    if !(a > 0.0 && a <= 2.0) {
        return Err(Error::Range(format!("convection exponent must lie in (0, 2], got {a}")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Range(format!("lambda must be positive, got {lambda}")));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Range(format!("epsilon must be nonnegative, got {eps}")));
    }
    if let SingularTerm::Power { alpha } = g {
        if !(alpha > 0.0) {
            return Err(Error::Range(format!("singular exponent must be positive, got {alpha}")));
        }
    }
    if let ReactionProfile::Power { p } = f.profile {
        if !(p > 0.0) {
            return Err(Error::Range(format!("reaction exponent must be positive, got {p}")));
        }
    }
    let k_nodes: Vec<f64> = grid.points().map(|p| potential.eval(p)).collect();
    let q_nodes: Vec<f64> = grid.points().map(|p| f.weight.eval(p)).collect();
    if q_nodes.iter().any(|q| !(*q > 0.0)) {
        return Err(Error::Model("reaction weight must be positive on the domain".into()));
    }
    let k_bdry: Vec<f64> = grid.boundary_points().into_iter().map(|p| potential.eval(p)).collect();
    let all = k_nodes.iter().chain(k_bdry.iter());
    let k_min = all.clone().copied().fold(f64::INFINITY, f64::min);
    let k_max = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let regime = if k_nodes.iter().all(|k| *k < 0.0) && k_bdry.iter().all(|k| *k <= 0.0) {
        SignRegime::Negative
    } else if k_min > 0.0 {
        SignRegime::Positive
    } else {
        return Err(Error::UnsupportedRegime(format!(
            "K must be negative in the domain or positive on its closure (range [{k_min}, {k_max}])"
        )));
    };
    Ok(ProblemSpec {
        grid,
        potential,
        g,
        f,
        a,
        lambda,
        eps,
        source: None,
        k_nodes,
        q_nodes,
        k_min,
        k_max,
        regime,
        singular_on: true,
        convection_on: true,
    })
}

impl ProblemSpec {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn potential(&self) -> &Potential {
        &self.potential
    }
    pub fn singular(&self) -> &SingularTerm {
        &self.g
    }
    pub fn reaction(&self) -> &ReactionTerm {
        &self.f
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn source(&self) -> Option<&Field> {
        self.source.as_ref()
    }
    pub fn regime(&self) -> SignRegime {
        self.regime
    }
    /// `K_* = min K` over the closed domain.
    pub fn k_min(&self) -> f64 {
        self.k_min
    }
    /// `K^* = max K` over the closed domain.
    pub fn k_max(&self) -> f64 {
        self.k_max
    }
    pub fn k_nodes(&self) -> &[f64] {
        &self.k_nodes
    }
    pub fn q_nodes(&self) -> &[f64] {
        &self.q_nodes
    }
    pub fn singular_enabled(&self) -> bool {
        self.singular_on
    }
    pub fn convection_enabled(&self) -> bool {
        self.convection_on
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Range(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            lambda,
            ..self.clone()
        })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::Range(format!("epsilon must be nonnegative, got {eps}")));
        }
        Ok(Self { eps, ..self.clone() })
    }

    pub fn with_source(&self, source: Field) -> Result<Self> {
        self.grid.check(&source)?;
        Ok(Self {
            source: Some(source),
            ..self.clone()
        })
    }

    /// Same nonlinearities on another grid.
    pub fn with_grid(&self, grid: Grid) -> Result<Self> {
        let mut out = make_problem(
            grid,
            self.potential.clone(),
            self.g.clone(),
            self.f.clone(),
            self.a,
            self.lambda,
            self.eps,
        )?;
        out.singular_on = self.singular_on;
        out.convection_on = self.convection_on;
        Ok(out)
    }

    /// Test-harness switch that removes the singular and/or convection terms
    /// to expose a linear Poisson probe. Not part of the modelled problem.
    #[doc(hidden)]
    pub fn with_terms_disabled(&self, singular_off: bool, convection_off: bool) -> Self {
        Self {
            singular_on: !singular_off,
            convection_on: !convection_off,
            ..self.clone()
        }
    }

    /// `f(x_k, s)` at interior node `k`.
    #[inline]
    pub fn f_at(&self, k: usize, s: f64) -> f64 {
        self.q_nodes[k] * self.f.profile(s)
    }

    #[inline]
    pub fn df_at(&self, k: usize, s: f64) -> f64 {
        self.q_nodes[k] * self.f.profile_deriv(s)
    }

    /// `Ψ(x, s) = λ f(x, s) - K(x) g(s)` at node `k`.
    pub fn psi_at(&self, k: usize, s: f64) -> f64 {
        self.lambda * self.f_at(k, s) - self.k_nodes[k] * self.g.eval(s)
    }
}

/// `p(x) = min{λ f(x,1), -K(x) g(1)}` and whether it is positive everywhere.
pub fn compute_p(spec: &ProblemSpec) -> (Field, bool) {
    let g1 = spec.g.eval(1.0);
    let p: Vec<f64> = (0..spec.grid.len())
        .map(|k| (spec.lambda * spec.f_at(k, 1.0)).min(-spec.k_nodes[k] * g1))
        .collect();
    let ok = p.iter().all(|v| *v > 0.0);
    (Field(p), ok)
}

/// One pass/fail entry of a hypothesis probe.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub checks: Vec<HypothesisCheck>,
}

impl ProbeReport {
    pub fn passed(&self, name: &str) -> Option<bool> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

// Log-log slope of positive samples, `d ln y / d ln s`, over the given pair.
fn log_slope(s0: f64, y0: f64, s1: f64, y1: f64) -> f64 {
    if y0.is_infinite() || y1.is_infinite() {
        return if y0.is_infinite() { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    (y1.ln() - y0.ln()) / (s1.ln() - s0.ln())
}

const SLOPE_FLOOR: f64 = 1e-2;

/// Samples `s` on a log grid over `[1e-6, 1e6]` at the nodes of the sample
/// problem's grid and reports the standing hypotheses on `f` and `g`, and
/// the sub/super-solution lemma hypotheses for `Ψ = λf - Kg`.
pub fn hypothesis_probe(f: &ReactionTerm, g: &SingularTerm, sample: &ProblemSpec) -> ProbeReport {
    let grid = sample.grid();
    let samples: Vec<f64> = (0..=120).map(|i| 10f64.powf(-6.0 + 0.1 * i as f64)).collect();
    let (s_lo, s_hi) = (samples[0], samples[samples.len() - 1]);
    let nodes: Vec<Point> = grid.points().chain(grid.boundary_points()).collect();
    let mut checks = Vec::new();

    // (f) positivity and monotonicity in s.
    let mut pos_mono = true;
    let mut f1 = true;
    let mut f1_detail = String::from("f(x,s)/s nonincreasing at every sample");
    for p in &nodes {
        let vals: Vec<f64> = samples.iter().map(|&s| f.eval(*p, s)).collect();
        if vals.iter().any(|v| !(*v > 0.0)) || vals.windows(2).any(|w| w[1] < w[0]) {
            pos_mono = false;
        }
        for (i, w) in vals.windows(2).enumerate() {
            let (r0, r1) = (w[0] / samples[i], w[1] / samples[i + 1]);
            if r1 > r0 * (1.0 + 1e-12) && f1 {
                f1 = false;
                f1_detail = format!(
                    "f(x,s)/s increases between s={:.3e} and s={:.3e} at x={:?}",
                    samples[i],
                    samples[i + 1],
                    p
                );
            }
        }
    }
    checks.push(HypothesisCheck {
        name: "f-positive-nondecreasing",
        passed: pos_mono,
        detail: "f > 0 and nondecreasing in s on the sample".into(),
    });
    checks.push(HypothesisCheck {
        name: "f1",
        passed: f1,
        detail: f1_detail,
    });

    // (f2) via log-log trends of f/s at both ends.
    let mut worst_lo = f64::NEG_INFINITY;
    let mut worst_hi = f64::NEG_INFINITY;
    for p in &nodes {
        let r = |s: f64| f.eval(*p, s) / s;
        worst_lo = worst_lo.max(log_slope(s_lo, r(s_lo), 10.0 * s_lo, r(10.0 * s_lo)));
        worst_hi = worst_hi.max(log_slope(s_hi / 10.0, r(s_hi / 10.0), s_hi, r(s_hi)));
    }
    checks.push(HypothesisCheck {
        name: "f2-zero",
        passed: worst_lo < -SLOPE_FLOOR,
        detail: format!("log-log slope of f/s near 0: {worst_lo:.4} (needs < -{SLOPE_FLOOR})"),
    });
    checks.push(HypothesisCheck {
        name: "f2-infinity",
        passed: worst_hi < -SLOPE_FLOOR,
        detail: format!("log-log slope of f/s near infinity: {worst_hi:.4} (needs < -{SLOPE_FLOOR})"),
    });

    // (g1) and the standing monotonicity of g.
    let gv: Vec<f64> = samples.iter().map(|&s| g.eval(s)).collect();
    let g_mono = gv.iter().all(|v| *v >= 0.0) && gv.windows(2).all(|w| w[1] <= w[0]);
    checks.push(HypothesisCheck {
        name: "g-nonincreasing",
        passed: g_mono,
        detail: "g >= 0 and nonincreasing on the sample".into(),
    });
    let g_slope = log_slope(s_lo, gv[0], 10.0 * s_lo, gv[10]);
    checks.push(HypothesisCheck {
        name: "g1",
        passed: g_slope < -SLOPE_FLOOR,
        detail: format!("log-log slope of g near 0: {g_slope:.4}"),
    });

    // Lemma hypotheses on Ψ = λ f - K g.
    let lambda1 = grid.lambda1_closed_form();
    let lam = sample.lambda();
    let psi = |p: Point, s: f64| lam * f.eval(p, s) - sample.potential().eval(p) * g.eval(s);
    let a1 = nodes.iter().map(|p| psi(*p, s_hi)).fold(f64::NEG_INFINITY, f64::max) / s_hi;
    checks.push(HypothesisCheck {
        name: "A1",
        passed: a1 < lambda1,
        detail: format!("s^-1 max Psi at s={s_hi:.0e}: {a1:.4e} vs lambda1 {lambda1:.4}"),
    });
    let t = 1e-3;
    let mut d_t = 0.0f64;
    let mut finite = true;
    for p in &nodes {
        for w in samples.windows(2).filter(|w| w[0] >= t) {
            let slope = (psi(*p, w[1]) - psi(*p, w[0])) / (w[1] - w[0]);
            if !slope.is_finite() {
                finite = false;
            }
            d_t = d_t.max(-slope);
        }
    }
    checks.push(HypothesisCheck {
        name: "A2",
        passed: finite,
        detail: format!("one-sided Lipschitz bound D({t:.0e}) = {d_t:.4e}"),
    });
    let near0 = samples.iter().copied().filter(|s| *s <= 1e-3);
    let min_psi = near0
        .flat_map(|s| nodes.iter().map(move |p| (s, *p)))
        .map(|(s, p)| psi(p, s))
        .fold(f64::INFINITY, f64::min);
    let interior: Vec<Point> = grid.points().collect();
    let psi_ratio_slope = interior
        .iter()
        .map(|p| {
            let r = |s: f64| psi(*p, s) / s;
            let (a, b) = (r(s_lo), r(10.0 * s_lo));
            if a > 0.0 && b > 0.0 {
                log_slope(s_lo, a, 10.0 * s_lo, b)
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(HypothesisCheck {
        name: "A3",
        passed: min_psi >= 0.0 && psi_ratio_slope < -SLOPE_FLOOR,
        detail: format!(
            "min Psi on (0, 1e-3]: {min_psi:.4e}; log-log slope of Psi/s near 0: {psi_ratio_slope:.4}"
        ),
    });
    ProbeReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid {
        Grid::interval(1.0, n).unwrap()
    }

    fn base(k: Potential, lambda: f64) -> Result<ProblemSpec> {
        make_problem(
            unit(63),
            k,
            SingularTerm::power(0.5).unwrap(),
            ReactionTerm::power(0.5).unwrap(),
            1.0,
            lambda,
            0.0,
        )
    }

    #[test]
    fn builds_negative_regime() {
        let s = base(Potential::Constant(-1.0), 1.0).unwrap();
        assert_eq!(s.regime(), SignRegime::Negative);
        assert_eq!((s.k_min(), s.k_max()), (-1.0, -1.0));
    }

    #[test]
    fn range_and_regime_errors() {
        let g = SingularTerm::power(0.5).unwrap();
        let f = ReactionTerm::power(0.5).unwrap();
        let k = Potential::Constant(-1.0);
        let mk = |a: f64, l: f64| make_problem(unit(7), k.clone(), g.clone(), f.clone(), a, l, 0.0);
        assert!(matches!(mk(2.5, 1.0), Err(Error::Range(_))));
        assert!(matches!(mk(0.0, 1.0), Err(Error::Range(_))));
        assert!(mk(2.0, 1.0).is_ok());
        assert!(matches!(mk(1.0, 0.0), Err(Error::Range(_))));
        let sign_change = Potential::Affine {
            offset: -0.5,
            slope: [1.0, 0.0],
        };
        assert!(matches!(
            base(sign_change, 1.0),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn negative_k_may_vanish_on_boundary() {
        let k = Potential::Custom(Arc::new(|p: Point| -p[0] * (1.0 - p[0])));
        assert_eq!(base(k, 1.0).unwrap().regime(), SignRegime::Negative);
    }

    #[test]
    fn caches_bound_nodal_values() {
        let k = Potential::Custom(Arc::new(|p: Point| 2.0 + (3.0 * p[0]).sin()));
        let s = base(k, 1.0).unwrap();
        assert!(s.k_nodes().iter().all(|k| *k >= s.k_min() && *k <= s.k_max()));
    }

    #[test]
    fn power_classification_matches_analytic_criterion() {
        for i in 1..=19 {
            let alpha = 0.1 * i as f64;
            let v = classify_singularity(&SingularTerm::power(alpha).unwrap());
            let expect = if alpha < 1.0 - 1e-12 {
                Integrability::Integrable
            } else {
                Integrability::NonIntegrable
            };
            assert_eq!(v, expect, "alpha={alpha}");
        }
        assert_eq!(
            classify_singularity(&SingularTerm::power(1.0).unwrap()),
            Integrability::NonIntegrable
        );
        assert_eq!(classify_singularity(&SingularTerm::ShiftedExp), Integrability::NonIntegrable);
    }

    #[test]
    fn table_classification_by_shells() {
        let table = |alpha: f64| {
            let s: Vec<f64> = (0..20).map(|i| 0.01 * 1.3f64.powi(i)).collect();
            let g: Vec<f64> = s.iter().map(|x| x.powf(-alpha)).collect();
            SingularTerm::Table(SingularTable::new(s, g).unwrap())
        };
        assert_eq!(classify_singularity(&table(0.5)), Integrability::Integrable);
        assert_eq!(classify_singularity(&table(1.5)), Integrability::NonIntegrable);
        assert_eq!(classify_singularity(&table(1.0)), Integrability::NonIntegrable);
        assert!(matches!(classify_singularity(&table(0.9999)), Integrability::Indeterminate(_)));
    }

    #[test]
    fn table_primitive_matches_power() {
        let s: Vec<f64> = (0..800).map(|i| 1e-3 * 1.01f64.powi(i)).collect();
        let g: Vec<f64> = s.iter().map(|x| x.powf(-0.5)).collect();
        let t = SingularTerm::Table(SingularTable::new(s, g).unwrap());
        let exact = 2.0 * 1.5f64.sqrt();
        let got = t.primitive(1.5).unwrap();
        assert!((got - exact).abs() < 1e-4, "{got} vs {exact}");
        assert!(SingularTable::new(vec![1.0, 2.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn singular_integrals() {
        let g = SingularTerm::power(0.5).unwrap();
        assert!((g.integral(0.25, 1.0) - 1.0).abs() < 1e-14);
        assert!((g.primitive(4.0).unwrap() - 4.0).abs() < 1e-14);
        let g = SingularTerm::power(1.0).unwrap();
        assert!((g.integral(1.0, std::f64::consts::E) - 1.0).abs() < 1e-14);
        let e = SingularTerm::ShiftedExp;
        let q = quad::integrate(|s: f64| (1.0 / s).exp_m1(), 0.5, 2.0, 1e-13, 0.0).value;
        assert!((e.integral(0.5, 2.0) - q).abs() < 1e-9);
        assert!(e.eval(1e-4).is_infinite());
    }

    #[test]
    fn p_field_examples() {
        let s = base(Potential::Constant(-1.0), 1.0).unwrap();
        let (p, ok) = compute_p(&s);
        assert!(ok && p.iter().all(|v| (*v - 1.0).abs() < 1e-15));
        let s = make_problem(
            unit(63),
            Potential::Constant(1.0),
            SingularTerm::power(0.5).unwrap(),
            ReactionTerm::power(0.5).unwrap(),
            1.0,
            1.0,
            0.0,
        )
        .unwrap();
        let (p, ok) = compute_p(&s);
        assert!(!ok && p.iter().all(|v| (*v + 1.0).abs() < 1e-15));
        let k = Potential::Affine {
            offset: -1.0,
            slope: [-1.0, 0.0],
        };
        let s = base(k, 2.0).unwrap().with_grid(unit(3)).unwrap();
        let (p, ok) = compute_p(&s);
        assert!(ok);
        assert!((p[0] - 1.25).abs() < 1e-15);
        for (k, x) in s.grid().points().enumerate() {
            assert!((p[k] - (1.0 + x[0])).abs() < 1e-15);
        }
    }

    #[test]
    fn p_is_below_psi_in_negative_regime() {
        let k = Potential::Custom(Arc::new(|p: Point| -(1.0 + p[0] * p[0])));
        let s = base(k, 0.7).unwrap();
        let (p, _) = compute_p(&s);
        for k in 0..s.grid().len() {
            for sv in [0.01, 0.1, 1.0, 10.0] {
                assert!(p[k] <= s.psi_at(k, sv) + 1e-12);
            }
        }
    }

    #[test]
    fn probe_sqrt_passes_and_square_fails() {
        let s = base(Potential::Constant(-1.0), 1.0).unwrap();
        let g = SingularTerm::power(0.5).unwrap();
        let r = hypothesis_probe(&ReactionTerm::power(0.5).unwrap(), &g, &s);
        for name in ["f-positive-nondecreasing", "f1", "f2-zero", "f2-infinity", "g-nonincreasing", "g1"] {
            assert_eq!(r.passed(name), Some(true), "{name}: {:?}", r.checks);
        }
        assert_eq!(r.passed("A1"), Some(true));
        assert_eq!(r.passed("A3"), Some(true));
        let r = hypothesis_probe(&ReactionTerm::power(2.0).unwrap(), &g, &s);
        assert_eq!(r.passed("f1"), Some(false));
        // Positive K: Ψ → -∞ at 0, so A3 fails.
        let s = make_problem(
            unit(15),
            Potential::Constant(1.0),
            g.clone(),
            ReactionTerm::power(0.5).unwrap(),
            1.0,
            1.0,
            0.0,
        )
        .unwrap();
        let r = hypothesis_probe(s.reaction(), &g, &s);
        assert_eq!(r.passed("A3"), Some(false));
        let r = hypothesis_probe(s.reaction(), &SingularTerm::ShiftedExp, &s);
        assert_eq!(r.passed("g1"), Some(true));
        assert_eq!(r.passed("g-nonincreasing"), Some(true));
    }
}
