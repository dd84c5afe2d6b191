//! Uniform meridional grid on `[0, L] x [0, 1]` and node-collocated scalar fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 9 nodes per direction, got {nx} x {nr}")]
    TooSmall { nx: usize, nr: usize },
    #[error("grid length must be positive, got {0}")]
    BadLength(f64),
    #[error("query ({x}, {r}) lies outside the domain")]
    OutOfDomain { x: f64, r: f64 },
    #[error("field has {got} values, grid needs {want}")]
    Shape { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub nr: usize,
    pub length: f64,
}

impl Grid2D {
    pub fn new(nx: usize, nr: usize, length: f64) -> Result<Self, GridError> {
        if nx < 9 || nr < 9 {
            return Err(GridError::TooSmall { nx, nr });
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(GridError::BadLength(length));
        }
        Ok(Self { nx, nr, length })
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.length / (self.nx - 1) as f64
    }

    #[inline]
    pub fn hr(&self) -> f64 {
        1.0 / (self.nr - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.length
        } else {
            i as f64 * self.hx()
        }
    }

    #[inline]
    pub fn r(&self, j: usize) -> f64 {
        if j == self.nr - 1 {
            1.0
        } else {
            j as f64 * self.hr()
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nr + j
    }

    pub fn len(&self) -> usize {
        self.nx * self.nr
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, x: f64, r: f64) -> bool {
        let tol = 1e-12;
        x >= -tol * self.length && x <= self.length * (1.0 + tol) && r >= -tol && r <= 1.0 + tol
    }

    /// The grid with each spacing halved.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx - 1, nr: 2 * self.nr - 1, length: self.length }
    }
}

/// Behavior of the represented function under `r -> -r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    fn ghost_sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Scalar field stored row-major by `x` then `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub grid: Grid2D,
    pub parity: Parity,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: Grid2D, parity: Parity) -> Self {
        Self { grid, parity, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid2D, parity: Parity, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            for j in 0..grid.nr {
                values.push(f(grid.x(i), grid.r(j)));
            }
        }
        let mut field = Self { grid, parity, values };
        field.enforce_parity();
        field
    }

    pub fn from_values(grid: Grid2D, parity: Parity, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::Shape { got: values.len(), want: grid.len() });
        }
        let mut field = Self { grid, parity, values };
        field.enforce_parity();
        Ok(field)
    }

    /// Odd fields vanish on the axis row.
    pub fn enforce_parity(&mut self) {
        if self.parity == Parity::Odd {
            for i in 0..self.grid.nx {
                let k = self.grid.idx(i, 0);
                self.values[k] = 0.0;
            }
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.nr + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = i * self.grid.nr + j;
        self.values[k] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let nr = self.grid.nr;
        &self.values[i * nr..(i + 1) * nr]
    }

    pub fn map(&self, parity: Parity, f: impl Fn(f64) -> f64) -> Field2D {
        let values = self.values.iter().map(|&v| f(v)).collect();
        let mut out = Field2D { grid: self.grid, parity, values };
        out.enforce_parity();
        out
    }

    pub fn zip_map(&self, other: &Field2D, parity: Parity, f: impl Fn(f64, f64) -> f64) -> Field2D {
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        let mut out = Field2D { grid: self.grid, parity, values };
        out.enforce_parity();
        out
    }

    /// `alpha * self + beta * other`.
    pub fn lincomb(&self, alpha: f64, other: &Field2D, beta: f64) -> Field2D {
        self.zip_map(other, self.parity, |a, b| alpha * a + beta * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Field2D) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Rows `x,r,value`, ordered by `x` then `r`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,r,value\n");
        for i in 0..self.grid.nx {
            for j in 0..self.grid.nr {
                out.push_str(&crate::io::csv_row(&[self.grid.x(i), self.grid.r(j), self.get(i, j)]));
            }
        }
        out
    }
}

/// Centered `d/dx`. At the entrance and exit the missing neighbour is a cubic extrapolation, so
/// the leading error term is the same `h^2 f'''/6` as inside.
pub fn ddx(f: &Field2D) -> Field2D {
    let g = f.grid;
    let h = g.hx();
    let mut out = Field2D::zeros(g, f.parity);
    for i in 0..g.nx {
        for j in 0..g.nr {
            let v = if i == 0 {
                (-4.0 * f.get(0, j) + 7.0 * f.get(1, j) - 4.0 * f.get(2, j) + f.get(3, j)) / (2.0 * h)
            } else if i == g.nx - 1 {
                (4.0 * f.get(i, j) - 7.0 * f.get(i - 1, j) + 4.0 * f.get(i - 2, j) - f.get(i - 3, j)) / (2.0 * h)
            } else {
                (f.get(i + 1, j) - f.get(i - 1, j)) / (2.0 * h)
            };
            out.set(i, j, v);
        }
    }
    out.enforce_parity();
    out
}

/// Centered `d/dr` with a parity ghost across the axis and a cubically extrapolated ghost at the wall.
pub fn ddr(f: &Field2D) -> Field2D {
    let g = f.grid;
    let h = g.hr();
    let n = g.nr - 1;
    let sign = f.parity.ghost_sign();
    let mut out = Field2D::zeros(g, f.parity.flip());
    for i in 0..g.nx {
        for j in 0..g.nr {
            let v = if j == 0 {
                (f.get(i, 1) - sign * f.get(i, 1)) / (2.0 * h)
            } else if j == n {
                (4.0 * f.get(i, n) - 7.0 * f.get(i, n - 1) + 4.0 * f.get(i, n - 2) - f.get(i, n - 3)) / (2.0 * h)
            } else {
                (f.get(i, j + 1) - f.get(i, j - 1)) / (2.0 * h)
            };
            out.set(i, j, v);
        }
    }
    out.enforce_parity();
    out
}

/// Weight applied to the integrand of [`cumulative_r_integral`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialWeight {
    None,
    R,
}

/// Per-column trapezoid integral of `weight * f` from the axis.
pub fn cumulative_r_integral(f: &Field2D, weight: RadialWeight) -> Field2D {
    let g = f.grid;
    let h = g.hr();
    let wt = |j: usize| match weight {
        RadialWeight::None => 1.0,
        RadialWeight::R => g.r(j),
    };
    let mut out = Field2D::zeros(g, Parity::Even);
    for i in 0..g.nx {
        let mut acc = 0.0;
        for j in 1..g.nr {
            acc += 0.5 * h * (wt(j - 1) * f.get(i, j - 1) + wt(j) * f.get(i, j));
            out.set(i, j, acc);
        }
    }
    out
}

fn locate(t: f64, h: f64, n: usize) -> (usize, f64) {
    let s = (t / h).max(0.0);
    let k = (s.floor() as usize).min(n - 2);
    let frac = (s - k as f64).clamp(0.0, 1.0);
    (k, frac)
}

/// Piecewise-linear interpolation in `r` along column `i`.
pub fn interp_column(f: &Field2D, i: usize, r: f64) -> Result<f64, GridError> {
    let g = f.grid;
    if i >= g.nx || !(r >= -1e-12 && r <= 1.0 + 1e-12) {
        return Err(GridError::OutOfDomain { x: if i < g.nx { g.x(i) } else { f64::NAN }, r });
    }
    let (k, t) = locate(r, g.hr(), g.nr);
    if t == 0.0 {
        return Ok(f.get(i, k));
    }
    if t == 1.0 {
        return Ok(f.get(i, k + 1));
    }
    Ok((1.0 - t) * f.get(i, k) + t * f.get(i, k + 1))
}

/// Bilinear interpolation at an arbitrary point of the closed domain.
pub fn bilinear(f: &Field2D, x: f64, r: f64) -> Result<f64, GridError> {
    let g = f.grid;
    if !g.contains(x, r) {
        return Err(GridError::OutOfDomain { x, r });
    }
    let (i, tx) = locate(x, g.hx(), g.nx);
    let (j, tr) = locate(r, g.hr(), g.nr);
    let lo = (1.0 - tr) * f.get(i, j) + tr * f.get(i, j + 1);
    if tx == 0.0 {
        return Ok(lo);
    }
    let hi = (1.0 - tr) * f.get(i + 1, j) + tr * f.get(i + 1, j + 1);
    Ok((1.0 - tx) * lo + tx * hi)
}
