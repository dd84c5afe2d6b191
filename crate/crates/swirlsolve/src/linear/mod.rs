//! Sparse linear systems: compressed rows, BiCGStab with a Jacobi preconditioner, banded
//! direct elimination, and a separable direct solver for tensor-product operators.

mod banded;
mod tensor;

pub use banded::{BandedLu, BandedMatrix};
pub use tensor::{SeparableFactor, StencilRow, TensorSystem, Tridiagonal};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Largest system solved by banded elimination in [`solve`].
pub const DIRECT_LIMIT: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolverError {
    #[error("dimension mismatch: operator {n}, vector {got}")]
    Dimension { n: usize, got: usize },
    #[error("iterative solver failed after {iterations} iterations, relative residual {residual:e}")]
    IterativeFailure { iterations: usize, residual: f64 },
    #[error("singular pivot at row {row}")]
    Singular { row: usize },
    #[error("radial operator cannot be symmetrized: {0}")]
    NotSymmetrizable(String),
}

/// Compressed sparse rows with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    pub symmetric_hint: bool,
}

impl SparseOperator {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), n, "row count must equal dimension");
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
                *merged.entry(c).or_insert(0.0) += v;
            }
            for (c, v) in merged {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals, symmetric_hint: false }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().cloned().zip(self.vals[a..b].iter().cloned())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).find(|(c, _)| *c == i).map(|(_, v)| v).unwrap_or(0.0))
            .collect()
    }

    /// `||A x - b||_2 / ||b||_2`, or the absolute residual when `b = 0`.
    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matvec(x);
        let r = norm2_diff(&ax, b);
        let nb = norm2(b);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.n {
            for (c, _) in self.row(i) {
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn to_banded(&self) -> BandedMatrix {
        let (kl, ku) = self.bandwidths();
        let mut m = BandedMatrix::zeros(self.n, kl, ku);
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                m.add(i, c, v);
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    /// Iteration cap; zero means `20 n`.
    pub max_iter: usize,
    pub direct_limit: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 0, direct_limit: DIRECT_LIMIT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    BandedDirect,
    BiCgStab,
    Separable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    /// Relative residual recomputed from an explicit product.
    pub residual: f64,
    pub iterations: usize,
    pub method: Method,
}

/// Direct banded elimination for small systems, BiCGStab otherwise.
pub fn solve(
    op: &SparseOperator,
    rhs: &[f64],
    opts: &SolveOptions,
) -> Result<LinearSolution, LinearSolverError> {
    if rhs.len() != op.n {
        return Err(LinearSolverError::Dimension { n: op.n, got: rhs.len() });
    }
    if op.n <= opts.direct_limit {
        solve_direct(op, rhs)
    } else {
        bicgstab(op, rhs, None, opts)
    }
}

pub fn solve_direct(op: &SparseOperator, rhs: &[f64]) -> Result<LinearSolution, LinearSolverError> {
    if rhs.len() != op.n {
        return Err(LinearSolverError::Dimension { n: op.n, got: rhs.len() });
    }
    let lu = op.to_banded().factor()?;
    let mut x = lu.solve(rhs);
    let ax = op.matvec(&x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let dx = lu.solve(&r);
    for (xi, d) in x.iter_mut().zip(&dx) {
        *xi += d;
    }
    let residual = op.relative_residual(&x, rhs);
    Ok(LinearSolution { x, residual, iterations: 1, method: Method::BandedDirect })
}

/// Jacobi-preconditioned BiCGStab, optionally warm-started. Restarts from the current iterate
/// when the recursive residual drifts from the true one.
pub fn bicgstab(
    op: &SparseOperator,
    rhs: &[f64],
    guess: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<LinearSolution, LinearSolverError> {
    let n = op.n;
    if rhs.len() != n {
        return Err(LinearSolverError::Dimension { n, got: rhs.len() });
    }
    let max_iter = if opts.max_iter == 0 { 20 * n } else { opts.max_iter };
    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => return Err(LinearSolverError::Dimension { n, got: g.len() }),
        None => vec![0.0; n],
    };
    if norm2(rhs) == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(LinearSolution { x, residual: 0.0, iterations: 0, method: Method::BiCgStab });
    }
    let dinv: Vec<f64> = op
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut iterations = 0;
    let mut residual = op.relative_residual(&x, rhs);
    for _restart in 0..8 {
        if residual <= opts.tol || iterations >= max_iter {
            break;
        }
        iterations += bicgstab_pass(op, rhs, &dinv, &mut x, opts.tol, max_iter - iterations);
        residual = op.relative_residual(&x, rhs);
    }
    if !(residual <= opts.tol) {
        return Err(LinearSolverError::IterativeFailure { iterations, residual });
    }
    Ok(LinearSolution { x, residual, iterations, method: Method::BiCgStab })
}

fn bicgstab_pass(
    op: &SparseOperator,
    rhs: &[f64],
    dinv: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> usize {
    let n = op.n;
    let mut r: Vec<f64> = {
        let ax = op.matvec(x);
        rhs.iter().zip(&ax).map(|(b, a)| b - a).collect()
    };
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let target = tol * norm2(rhs);
    let mut iterations = 0;
    while norm2(&r) > target && iterations < max_iter {
        iterations += 1;
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 || omega.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
            y[k] = dinv[k] * p[k];
        }
        op.matvec_into(&y, &mut v);
        let r0v = dot(&r0, &v);
        if r0v.abs() < 1e-300 {
            break;
        }
        alpha = rho / r0v;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm2(&s) <= target {
            for k in 0..n {
                x[k] += alpha * y[k];
            }
            break;
        }
        for k in 0..n {
            z[k] = dinv[k] * s[k];
        }
        op.matvec_into(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for k in 0..n {
            x[k] += alpha * y[k] + omega * z[k];
            r[k] = s[k] - omega * t[k];
        }
    }
    iterations
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn norm2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
