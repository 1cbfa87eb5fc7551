//! Uniform grids on an interval or a rectangle, second-order difference
//! operators with homogeneous Dirichlet data, and quadrature.

use std::io::{Read, Write};
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymBandMatrix;

/// A point of the domain; the second coordinate is unused in 1D.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Interval,
    Rectangle,
}

/// Uniform grid. Interior nodes are numbered row-major (x fastest); the
/// boundary carries the Dirichlet value 0 and is never stored in a [`Field`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    kind: DomainKind,
    extents: [f64; 2],
    n: [usize; 2],
    spacing: [f64; 2],
}

impl Grid {
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Self::build(DomainKind::Interval, &[length], &[n])
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::build(DomainKind::Rectangle, &[lx, ly], &[nx, ny])
    }

    /// `extents` and `n_interior` carry one entry per axis (a single entry is
    /// broadcast to both axes of a rectangle).
    pub fn build(kind: DomainKind, extents: &[f64], n_interior: &[usize]) -> Result<Self> {
        let axes = match kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
        };
        let pick = |v: &[f64], k: usize| v.get(k).or(v.first()).copied();
        let pick_n = |v: &[usize], k: usize| v.get(k).or(v.first()).copied();
        let mut ext = [0.0; 2];
        let mut n = [1usize; 2];
        let mut spacing = [1.0; 2];
        for k in 0..axes {
            let l = pick(extents, k).ok_or_else(|| Error::Domain("missing extent".into()))?;
            let m = pick_n(n_interior, k).ok_or(Error::DegenerateGrid(0))?;
            if m < 3 {
                return Err(Error::DegenerateGrid(m));
            }
            if !(l > 0.0) || !l.is_finite() {
                return Err(Error::Domain(format!("extent must be positive, got {l}")));
            }
            ext[k] = l;
            n[k] = m;
            spacing[k] = l / (m as f64 + 1.0);
        }
        Ok(Self {
            kind,
            extents: ext,
            n,
            spacing,
        })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
        }
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents[..self.dim()]
    }

    pub fn n_interior(&self) -> &[usize] {
        &self.n[..self.dim()]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim()]
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Volume element `h_x` (1D) or `h_x h_y` (2D).
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Half-bandwidth of stencil matrices in the row-major numbering.
    pub fn bandwidth(&self) -> usize {
        match self.kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => self.n[0],
        }
    }

    #[inline]
    fn split(&self, idx: usize) -> (usize, usize) {
        (idx % self.n[0], idx / self.n[0])
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = self.split(idx);
        match self.kind {
            DomainKind::Interval => [(i + 1) as f64 * self.spacing[0], 0.0],
            DomainKind::Rectangle => [
                (i + 1) as f64 * self.spacing[0],
                (j + 1) as f64 * self.spacing[1],
            ],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Nodes on the boundary, used to sample closed forms over the closed domain.
    pub fn boundary_points(&self) -> Vec<Point> {
        match self.kind {
            DomainKind::Interval => vec![[0.0, 0.0], [self.extents[0], 0.0]],
            DomainKind::Rectangle => {
                let (nx, ny) = (self.n[0] + 2, self.n[1] + 2);
                let mut out = Vec::with_capacity(2 * (nx + ny));
                for j in 0..ny {
                    for i in 0..nx {
                        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                            out.push([i as f64 * self.spacing[0], j as f64 * self.spacing[1]]);
                        }
                    }
                }
                out
            }
        }
    }

    /// Neighbours of an interior node along each axis as `(minus, plus)`;
    /// `None` marks a boundary neighbour.
    pub fn neighbours(&self, idx: usize) -> [(Option<usize>, Option<usize>); 2] {
        let (i, j) = self.split(idx);
        let nx = self.n[0];
        let xm = (i > 0).then(|| idx - 1);
        let xp = (i + 1 < nx).then(|| idx + 1);
        let (ym, yp) = match self.kind {
            DomainKind::Interval => (None, None),
            DomainKind::Rectangle => (
                (j > 0).then(|| idx - nx),
                (j + 1 < self.n[1]).then(|| idx + nx),
            ),
        };
        [(xm, xp), (ym, yp)]
    }

    pub fn field_from<F: Fn(Point) -> f64>(&self, f: F) -> Field {
        Field(self.points().map(f).collect())
    }

    pub fn constant(&self, c: f64) -> Field {
        Field(vec![c; self.len()])
    }

    pub fn check(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: field.len(),
            });
        }
        Ok(())
    }

    /// `-Δu` by the 3-point (1D) or 5-point (2D) stencil.
    pub fn apply_laplacian(&self, u: &[f64]) -> Result<Field> {
        self.check(u)?;
        let v = |k: Option<usize>| k.map_or(0.0, |k| u[k]);
        let out = (0..self.len())
            .map(|k| {
                let nb = self.neighbours(k);
                let mut s = 0.0;
                for axis in 0..self.dim() {
                    let h2 = self.spacing[axis] * self.spacing[axis];
                    let (m, p) = nb[axis];
                    s += (2.0 * u[k] - v(m) - v(p)) / h2;
                }
                s
            })
            .collect();
        Ok(Field(out))
    }

    /// Central-difference gradient; neighbours on the boundary contribute 0.
    pub fn gradient(&self, u: &[f64]) -> Result<[Field; 2]> {
        self.check(u)?;
        let v = |k: Option<usize>| k.map_or(0.0, |k| u[k]);
        let mut gx = vec![0.0; self.len()];
        let mut gy = vec![0.0; self.len()];
        for k in 0..self.len() {
            let nb = self.neighbours(k);
            gx[k] = (v(nb[0].1) - v(nb[0].0)) / (2.0 * self.spacing[0]);
            if self.dim() == 2 {
                gy[k] = (v(nb[1].1) - v(nb[1].0)) / (2.0 * self.spacing[1]);
            }
        }
        Ok([Field(gx), Field(gy)])
    }

    pub fn gradient_magnitude(&self, u: &[f64]) -> Result<Field> {
        let [gx, gy] = self.gradient(u)?;
        Ok(Field(gx.iter().zip(gy.iter()).map(|(a, b)| a.hypot(*b)).collect()))
    }

    /// Exact Euclidean distance from each interior node to the boundary.
    pub fn boundary_distance(&self) -> Field {
        self.field_from(|p| {
            let mut d = p[0].min(self.extents[0] - p[0]);
            if self.dim() == 2 {
                d = d.min(p[1]).min(self.extents[1] - p[1]);
            }
            d
        })
    }

    /// Trapezoid rule with the zero boundary values, i.e. `h^N Σ u_i`.
    pub fn integrate(&self, u: &[f64]) -> Result<f64> {
        self.check(u)?;
        Ok(self.cell_volume() * u.iter().sum::<f64>())
    }

    /// Simplices of the piecewise-linear interpolant including boundary
    /// cells: intervals in 1D, two triangles per square in 2D. Each entry
    /// is `(measure, vertex values)` with unused vertices set to `NaN`.
    pub fn simplices(&self, u: &[f64]) -> Result<Vec<(f64, [f64; 3])>> {
        self.check(u)?;
        let (nx, ny) = (self.n[0], self.n[1]);
        // Value at full-grid node (i, j), 0 <= i <= nx + 1.
        let full = |i: usize, j: usize| -> f64 {
            if i == 0 || i == nx + 1 {
                return 0.0;
            }
            match self.kind {
                DomainKind::Interval => u[i - 1],
                DomainKind::Rectangle => {
                    if j == 0 || j == ny + 1 {
                        0.0
                    } else {
                        u[(j - 1) * nx + (i - 1)]
                    }
                }
            }
        };
        let mut out = Vec::new();
        match self.kind {
            DomainKind::Interval => {
                for i in 0..=nx {
                    out.push((self.spacing[0], [full(i, 0), full(i + 1, 0), f64::NAN]));
                }
            }
            DomainKind::Rectangle => {
                let area = 0.5 * self.spacing[0] * self.spacing[1];
                for j in 0..=ny {
                    for i in 0..=nx {
                        let (a, b, c, d) =
                            (full(i, j), full(i + 1, j), full(i + 1, j + 1), full(i, j + 1));
                        out.push((area, [a, b, c]));
                        out.push((area, [a, c, d]));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Smallest eigenvalue of the discrete Dirichlet `-Δ`, in closed form:
    /// `Σ (2/h²)(1 - cos(π h / L))` over the axes.
    pub fn lambda1_closed_form(&self) -> f64 {
        (0..self.dim())
            .map(|k| {
                let h = self.spacing[k];
                2.0 / (h * h) * (1.0 - (std::f64::consts::PI * h / self.extents[k]).cos())
            })
            .sum()
    }

    /// Matrix of `-Δ + shift·I`, symmetric positive definite for `shift > -λ₁`.
    pub fn laplacian_matrix(&self, shift: f64) -> SymBandMatrix {
        let mut m = SymBandMatrix::zeros(self.len(), self.bandwidth());
        for k in 0..self.len() {
            let nb = self.neighbours(k);
            let mut diag = shift;
            for axis in 0..self.dim() {
                let h2 = self.spacing[axis] * self.spacing[axis];
                diag += 2.0 / h2;
                if let Some(m_) = nb[axis].0 {
                    m.add_lower(k, m_, -1.0 / h2);
                }
            }
            m.add_lower(k, k, diag);
        }
        m
    }

    /// Writes a field as CSV with header `x,value` or `x,y,value`.
    pub fn write_csv<W: Write>(&self, u: &[f64], w: W) -> Result<()> {
        self.check(u)?;
        let mut wr = csv::Writer::from_writer(w);
        match self.kind {
            DomainKind::Interval => wr.write_record(["x", "value"])?,
            DomainKind::Rectangle => wr.write_record(["x", "y", "value"])?,
        }
        for (k, p) in self.points().enumerate() {
            let mut rec = vec![p[0].to_string()];
            if self.dim() == 2 {
                rec.push(p[1].to_string());
            }
            rec.push(u[k].to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a field CSV written for this grid; coordinates must match.
    pub fn read_csv<R: Read>(&self, r: R) -> Result<Field> {
        let mut rd = csv::Reader::from_reader(r);
        let cols = self.dim() + 1;
        let headers = rd.headers()?.clone();
        let expected: &[&str] = if self.dim() == 1 {
            &["x", "value"]
        } else {
            &["x", "y", "value"]
        };
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Io(format!("unexpected CSV header {headers:?}")));
        }
        let tol = 1e-9 * self.extents().iter().fold(0.0f64, |m, v| m.max(*v));
        let mut values = Vec::with_capacity(self.len());
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != cols || k >= self.len() {
                return Err(Error::Shape {
                    expected: self.len(),
                    got: k + 1,
                });
            }
            let num = |c: usize| -> Result<f64> {
                rec[c]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Io(format!("row {k}: {e}")))
            };
            let p = self.point(k);
            for axis in 0..self.dim() {
                if (num(axis)? - p[axis]).abs() > tol {
                    return Err(Error::Io(format!("row {k}: node coordinates do not match grid")));
                }
            }
            values.push(num(cols - 1)?);
        }
        self.check(&values)?;
        Ok(Field(values))
    }
}

/// Grid function on the interior nodes; the boundary value is implicitly 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|v| *v > 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|v| f(*v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}
