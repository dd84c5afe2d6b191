//! Swirl stream function: `-(d_xx + (1/r) d_r(r d_r) - 1/r^2) psi = f2` with `psi = 0` on the
//! axis and the wall and `d_x psi = 0` at both ends, imposed by even reflection across the end
//! planes.
//!
//! Two discretizations are provided. The direct form works on `psi` at `r > 0`. The lifted form
//! solves for `xi = psi / r`, which obeys the five-dimensional radial Laplace problem
//! `xi_xx + (1/r^3) d_r(r^3 d_r xi) = -f2 / r` and has no singular coefficient.

use crate::elliptic::{EllipticError, LinearMethod};
use crate::grid::{Field2D, Grid2D, Parity};
use crate::linear::{self, SeparableFactor, SolveOptions, SparseOperator, StencilRow, TensorSystem, Tridiagonal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SwirlForm {
    Direct,
    #[default]
    Lifted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwirlSolution {
    pub psi: Field2D,
    pub xi: Field2D,
}

/// Largest axis value removed from `f2` by [`enforce_axis_compatibility`].
pub fn enforce_axis_compatibility(f2: &mut Field2D) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..f2.grid.nx {
        worst = worst.max(f2.get(i, 0).abs());
        f2.set(i, 0, 0.0);
    }
    f2.parity = Parity::Odd;
    worst
}

/// `d_r((1/r) d_r(r psi))` on `j = 1 .. nr-2`, exact on `r` and `r^3`.
fn direct_radial_operator(nr: usize) -> Tridiagonal {
    let h = 1.0 / (nr - 1) as f64;
    let m = nr - 2;
    let mut t = Tridiagonal::zeros(m);
    for k in 0..m {
        let j = k + 1;
        let r = j as f64 * h;
        let (rm, rp) = (r - 0.5 * h, r + 0.5 * h);
        t.sub[k] = (r - h) / (rm * h * h);
        t.sup[k] = (r + h) / (rp * h * h);
        t.diag[k] = -r * (1.0 / rp + 1.0 / rm) / (h * h);
    }
    t
}

/// `(1/r^3) d_r(r^3 d_r xi)` on `j = 0 .. nr-2` with exact control volumes and `xi(1) = 0`.
fn lifted_radial_operator(nr: usize) -> Tridiagonal {
    let h = 1.0 / (nr - 1) as f64;
    let m = nr - 1;
    let mut t = Tridiagonal::zeros(m);
    t.diag[0] = -8.0 / (h * h);
    t.sup[0] = 8.0 / (h * h);
    for j in 1..m {
        let r = j as f64 * h;
        let (rm, rp) = (r - 0.5 * h, r + 0.5 * h);
        let vol = (rp.powi(4) - rm.powi(4)) / 4.0;
        t.sub[j] = rm.powi(3) / (h * vol);
        t.sup[j] = rp.powi(3) / (h * vol);
        t.diag[j] = -(rm.powi(3) + rp.powi(3)) / (h * vol);
    }
    t
}

fn swirl_system(grid: &Grid2D, form: SwirlForm) -> TensorSystem {
    let nx = grid.nx;
    let hx = grid.hx();
    let hx2 = hx * hx;
    let n = nx - 1;
    let mut rows = vec![StencilRow { terms: Vec::new(), radial: -1.0 }; nx];
    rows[0].terms.extend([(0, 2.0 / hx2), (1, -2.0 / hx2)]);
    rows[n].terms.extend([(n, 2.0 / hx2), (n - 1, -2.0 / hx2)]);
    for (i, row) in rows.iter_mut().enumerate().take(n).skip(1) {
        row.terms.extend([(i - 1, -1.0 / hx2), (i, 2.0 / hx2), (i + 1, -1.0 / hx2)]);
    }
    let radial_op = match form {
        SwirlForm::Direct => direct_radial_operator(grid.nr),
        SwirlForm::Lifted => lifted_radial_operator(grid.nr),
    };
    TensorSystem { radial_op, rows }
}

/// Factorized swirl operator for one grid and formulation.
#[derive(Debug, Clone)]
pub struct SwirlSolver {
    grid: Grid2D,
    form: SwirlForm,
    method: LinearMethod,
    opts: SolveOptions,
    sparse: SparseOperator,
    factor: Option<SeparableFactor>,
}

impl SwirlSolver {
    pub fn new(grid: Grid2D, form: SwirlForm, method: LinearMethod, opts: SolveOptions) -> Result<Self, EllipticError> {
        let system = swirl_system(&grid, form);
        let sparse = system.to_sparse();
        let factor = match method {
            LinearMethod::Separable => Some(system.factor()?),
            LinearMethod::Sparse => None,
        };
        Ok(Self { grid, form, method, opts, sparse, factor })
    }

    pub fn form(&self) -> SwirlForm {
        self.form
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.sparse
    }

    fn unknowns(&self) -> (usize, usize) {
        match self.form {
            SwirlForm::Direct => (1, self.grid.nr - 2),
            SwirlForm::Lifted => (0, self.grid.nr - 1),
        }
    }

    /// Right-hand side vector; the axis row of `f2` is read as zero.
    pub fn assemble_rhs(&self, f2: &Field2D) -> Vec<f64> {
        let g = self.grid;
        let (j0, m) = self.unknowns();
        let hr = g.hr();
        let mut b = vec![0.0; g.nx * m];
        for i in 0..g.nx {
            for k in 0..m {
                let j = j0 + k;
                b[i * m + k] = match self.form {
                    SwirlForm::Direct => f2.get(i, j),
                    SwirlForm::Lifted if j == 0 => (4.0 * f2.get(i, 1) - f2.get(i, 2)) / (2.0 * hr),
                    SwirlForm::Lifted => f2.get(i, j) / g.r(j),
                };
            }
        }
        b
    }

    pub fn solve(&self, f2: &Field2D) -> Result<SwirlSolution, EllipticError> {
        let b = self.assemble_rhs(f2);
        let x = match (&self.factor, self.method) {
            (Some(f), LinearMethod::Separable) => f.solve_refined(&self.sparse, &b, self.opts.tol)?,
            _ => linear::solve(&self.sparse, &b, &self.opts)?.x,
        };
        let residual = self.sparse.relative_residual(&x, &b);
        if residual > self.opts.tol {
            return Err(EllipticError::Residual { residual, tol: self.opts.tol });
        }
        let g = self.grid;
        let (j0, m) = self.unknowns();
        let mut psi = Field2D::zeros(g, Parity::Odd);
        let mut xi = Field2D::zeros(g, Parity::Even);
        for i in 0..g.nx {
            for k in 0..m {
                let j = j0 + k;
                let v = x[i * m + k];
                match self.form {
                    SwirlForm::Direct => psi.set(i, j, v),
                    SwirlForm::Lifted => {
                        xi.set(i, j, v);
                        if j > 0 {
                            psi.set(i, j, g.r(j) * v);
                        }
                    }
                }
            }
        }
        if self.form == SwirlForm::Direct {
            for i in 0..g.nx {
                for j in 1..g.nr - 1 {
                    xi.set(i, j, psi.get(i, j) / g.r(j));
                }
                let (a, b, c) = (xi.get(i, 1), xi.get(i, 2), xi.get(i, 3));
                xi.set(i, 0, 3.0 * a - 3.0 * b + c);
            }
        }
        Ok(SwirlSolution { psi, xi })
    }
}

pub fn solve_psi_direct(f2: &Field2D) -> Result<SwirlSolution, EllipticError> {
    SwirlSolver::new(f2.grid, SwirlForm::Direct, LinearMethod::Separable, SolveOptions::default())?.solve(f2)
}

pub fn solve_psi_lifted(f2: &Field2D) -> Result<SwirlSolution, EllipticError> {
    SwirlSolver::new(f2.grid, SwirlForm::Lifted, LinearMethod::Separable, SolveOptions::default())?.solve(f2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDiagnostics {
    /// `max_x |(psi_0 - 2 psi_1 + psi_2) / hr^2|`
    pub d2r_axis: f64,
    /// `max_x |(Delta - 1/r^2) psi|` at the first ring off the axis.
    pub operator_near_axis: f64,
}

pub fn axis_diagnostics(psi: &Field2D) -> AxisDiagnostics {
    let g = psi.grid;
    let hr = g.hr();
    let hx = g.hx();
    let radial = direct_radial_operator(g.nr);
    let mut d2 = 0.0f64;
    let mut op = 0.0f64;
    for i in 0..g.nx {
        d2 = d2.max(((psi.get(i, 0) - 2.0 * psi.get(i, 1) + psi.get(i, 2)) / (hr * hr)).abs());
        let xx = if i == 0 || i == g.nx - 1 {
            0.0
        } else {
            (psi.get(i + 1, 1) - 2.0 * psi.get(i, 1) + psi.get(i - 1, 1)) / (hx * hx)
        };
        let rr = radial.diag[0] * psi.get(i, 1) + radial.sup[0] * psi.get(i, 2);
        op = op.max((xx + rr).abs());
    }
    AxisDiagnostics { d2r_axis: d2, operator_near_axis: op }
}

/// `F(x, r) = r^-4 int_0^r s^3 f(x, s) ds`, zero on the axis. Each panel integrates `s^3` times
/// the linear interpolant of `f` exactly.
pub fn flux_potential(f: &Field2D) -> Field2D {
    let g = f.grid;
    let h = g.hr();
    let mut out = Field2D::zeros(g, Parity::Odd);
    for i in 0..g.nx {
        let mut acc = 0.0;
        for j in 1..g.nr {
            let (a, b) = (g.r(j - 1), g.r(j));
            let m4 = (b.powi(4) - a.powi(4)) / 4.0;
            let m5 = (b.powi(5) - a.powi(5)) / 5.0;
            let slope = (f.get(i, j) - f.get(i, j - 1)) / h;
            acc += f.get(i, j - 1) * m4 + slope * (m5 - a * m4);
            out.set(i, j, acc / b.powi(4));
        }
    }
    out
}
