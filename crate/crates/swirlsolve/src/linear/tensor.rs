//! Operators of the form `sum_t c_t u_{block(t)} + k_b R u_b` where every block shares one
//! tridiagonal radial operator `R`. Diagonalizing `R` decouples the radial modes, leaving one
//! small banded system per mode.

use super::{BandedLu, BandedMatrix, LinearSolverError, SparseOperator};
use nalgebra::{DMatrix, SymmetricEigen};

/// Tridiagonal matrix; `sub[j]` couples row `j` to `j - 1`, `sup[j]` couples it to `j + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(m: usize) -> Self {
        Self { sub: vec![0.0; m], diag: vec![0.0; m], sup: vec![0.0; m] }
    }

    pub fn m(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|j| {
                let mut s = self.diag[j] * x[j];
                if j > 0 {
                    s += self.sub[j] * x[j - 1];
                }
                if j + 1 < m {
                    s += self.sup[j] * x[j + 1];
                }
                s
            })
            .collect()
    }

    /// Eigenpairs `R = V diag(lambda) V^{-1}` through a diagonal similarity to a symmetric matrix.
    pub fn eigen(&self) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>), LinearSolverError> {
        let m = self.m();
        let mut d = vec![1.0; m];
        let mut off = vec![0.0; m.saturating_sub(1)];
        for j in 0..m.saturating_sub(1) {
            let (u, l) = (self.sup[j], self.sub[j + 1]);
            if !(u * l > 0.0) {
                return Err(LinearSolverError::NotSymmetrizable(format!(
                    "off-diagonal pair ({u}, {l}) at row {j}"
                )));
            }
            d[j + 1] = d[j] * (l / u).sqrt();
            off[j] = u.signum() * (u * l).sqrt();
        }
        let mut s = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            s[(j, j)] = self.diag[j];
            if j + 1 < m {
                s[(j, j + 1)] = off[j];
                s[(j + 1, j)] = off[j];
            }
        }
        let eig = SymmetricEigen::new(s);
        let q = eig.eigenvectors;
        let mut v = q.clone();
        let mut vinv = q.transpose();
        for j in 0..m {
            for k in 0..m {
                v[(j, k)] *= d[j];
                vinv[(k, j)] /= d[j];
            }
        }
        Ok((eig.eigenvalues.iter().cloned().collect(), v, vinv))
    }
}

/// One block row: x-coupling terms `(block, coefficient)` plus the radial multiplier.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StencilRow {
    pub terms: Vec<(usize, f64)>,
    pub radial: f64,
}

/// Block-structured operator; unknown `(b, j)` is stored at `b * m + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSystem {
    pub radial_op: Tridiagonal,
    pub rows: Vec<StencilRow>,
}

impl TensorSystem {
    pub fn blocks(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.radial_op.m()
    }

    pub fn n(&self) -> usize {
        self.blocks() * self.m()
    }

    pub fn to_sparse(&self) -> SparseOperator {
        let m = self.m();
        let rad = &self.radial_op;
        let mut rows = Vec::with_capacity(self.n());
        for (b, row) in self.rows.iter().enumerate() {
            for j in 0..m {
                let mut entries: Vec<(usize, f64)> =
                    row.terms.iter().map(|&(t, c)| (t * m + j, c)).collect();
                if row.radial != 0.0 {
                    entries.push((b * m + j, row.radial * rad.diag[j]));
                    if j > 0 {
                        entries.push((b * m + j - 1, row.radial * rad.sub[j]));
                    }
                    if j + 1 < m {
                        entries.push((b * m + j + 1, row.radial * rad.sup[j]));
                    }
                }
                rows.push(entries);
            }
        }
        SparseOperator::from_rows(self.n(), rows)
    }

    pub fn factor(&self) -> Result<SeparableFactor, LinearSolverError> {
        let (lambda, v, vinv) = self.radial_op.eigen()?;
        let nb = self.blocks();
        let mut kl = 0;
        let mut ku = 0;
        for (b, row) in self.rows.iter().enumerate() {
            for &(t, _) in &row.terms {
                if t < b {
                    kl = kl.max(b - t);
                } else {
                    ku = ku.max(t - b);
                }
            }
        }
        let mut modes = Vec::with_capacity(lambda.len());
        for &lam in &lambda {
            let mut a = BandedMatrix::zeros(nb, kl, ku);
            for (b, row) in self.rows.iter().enumerate() {
                for &(t, c) in &row.terms {
                    a.add(b, t, c);
                }
                if row.radial != 0.0 {
                    a.add(b, b, row.radial * lam);
                }
            }
            modes.push(a.factor()?);
        }
        Ok(SeparableFactor { m: self.m(), blocks: nb, v, vinv, modes })
    }
}

/// Cached eigen-decomposition and per-mode factorizations of a [`TensorSystem`].
#[derive(Debug, Clone)]
pub struct SeparableFactor {
    m: usize,
    blocks: usize,
    v: DMatrix<f64>,
    vinv: DMatrix<f64>,
    modes: Vec<BandedLu>,
}

impl SeparableFactor {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinearSolverError> {
        let n = self.m * self.blocks;
        if rhs.len() != n {
            return Err(LinearSolverError::Dimension { n, got: rhs.len() });
        }
        let b = DMatrix::from_column_slice(self.m, self.blocks, rhs);
        let mut hat = &self.vinv * b;
        let mut line = vec![0.0; self.blocks];
        for (k, lu) in self.modes.iter().enumerate() {
            for (blk, slot) in line.iter_mut().enumerate() {
                *slot = hat[(k, blk)];
            }
            lu.solve_in_place(&mut line);
            for (blk, val) in line.iter().enumerate() {
                hat[(k, blk)] = *val;
            }
        }
        let u = &self.v * hat;
        Ok(u.as_slice().to_vec())
    }

    /// Solve followed by iterative refinement against the assembled operator until the
    /// relative residual is below `tol` or stops improving.
    pub fn solve_refined(&self, op: &SparseOperator, rhs: &[f64], tol: f64) -> Result<Vec<f64>, LinearSolverError> {
        let mut x = self.solve(rhs)?;
        let mut res = op.relative_residual(&x, rhs);
        for _ in 0..4 {
            if res <= 0.01 * tol {
                break;
            }
            let ax = op.matvec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let dx = self.solve(&r)?;
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let next = op.relative_residual(&trial, rhs);
            if !(next < res) {
                break;
            }
            x = trial;
            res = next;
        }
        Ok(x)
    }
}
