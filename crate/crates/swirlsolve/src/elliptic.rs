//! Linearized potential block: coefficients at the background state and the coupled solve for
//! the potential perturbation `Psi` and the velocity potential `phi`.
//!
//! ```text
//! d_x(a11 d_x phi) + (1/r) d_r(r a22 d_r phi) + d_x(b1 Psi) = div F
//! d_xx Psi + (1/r) d_r(r d_r Psi) - c1 d_x phi - d Psi     = f1
//! ```
//!
//! with `phi = 0` at the entrance, `d_x phi = g` at the exit, `Psi` prescribed at both ends,
//! zero normal derivatives at the wall and even parity across the axis. The exit condition
//! enters through a ghost column `phi[n+1] = phi[n-1] + 2 hx g` in the exit-node equation.

use crate::background::BackgroundProfile;
use crate::grid::{Field2D, Grid2D, Parity};
use crate::linear::{self, LinearSolverError, SeparableFactor, SolveOptions, SparseOperator, StencilRow, TensorSystem, Tridiagonal};
use crate::thermo::ThermoError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipticError {
    #[error("coefficient degeneracy at x = {x}: {what}")]
    Degenerate { x: f64, what: String },
    #[error("coefficients have {got} stations, grid has {want}")]
    Stations { got: usize, want: usize },
    #[error("boundary data has {got} values, grid has {want} radii")]
    BoundaryLength { got: usize, want: usize },
    #[error("linear residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },
    #[error(transparent)]
    Linear(#[from] LinearSolverError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

/// Linear-system route for the elliptic blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LinearMethod {
    /// Radial eigen-decomposition with banded solves per mode.
    #[default]
    Separable,
    /// Assembled sparse operator: banded elimination or BiCGStab.
    Sparse,
}

/// Coefficients of the linearized block. They depend on `x` only and are stored per station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub a11: Vec<f64>,
    pub a22: Vec<f64>,
    pub b1: Vec<f64>,
    pub c1: Vec<f64>,
    pub d: Vec<f64>,
    pub nu1: f64,
    pub nu2: f64,
}

/// Background state quantities at one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundState {
    pub u: f64,
    /// `K0 + Phi0 - u^2/2`
    pub tau: f64,
    /// `H(S0, tau)`
    pub rho: f64,
    /// `H / ((gamma - 1) tau)`
    pub h_tau: f64,
}

pub fn background_state(bg: &BackgroundProfile, i: usize) -> Result<BackgroundState, ThermoError> {
    let gas = &bg.gas;
    let u = bg.u_bar[i];
    let tau = bg.b0 + bg.phi0[i] - 0.5 * u * u;
    let rho = gas.density_h(bg.env.s0, tau)?;
    Ok(BackgroundState { u, tau, rho, h_tau: rho / ((gas.gamma - 1.0) * tau) })
}

pub fn build_coefficients(bg: &BackgroundProfile) -> Result<CoefficientField, EllipticError> {
    let n = bg.n();
    let mut c = CoefficientField {
        a11: Vec::with_capacity(n),
        a22: Vec::with_capacity(n),
        b1: Vec::with_capacity(n),
        c1: Vec::with_capacity(n),
        d: Vec::with_capacity(n),
        nu1: 0.0,
        nu2: 0.0,
    };
    for i in 0..n {
        let st = background_state(bg, i)?;
        let a11 = st.rho - st.u * st.u * st.h_tau;
        if !(a11 > 0.0) {
            return Err(EllipticError::Degenerate {
                x: bg.x[i],
                what: format!("a11 = {a11} is not positive (sonic background)"),
            });
        }
        c.a11.push(a11);
        c.a22.push(st.rho);
        c.b1.push(st.h_tau * st.u);
        c.c1.push(-st.h_tau * st.u);
        c.d.push(st.h_tau);
    }
    c.refresh_bounds();
    Ok(c)
}

impl CoefficientField {
    pub fn n(&self) -> usize {
        self.a11.len()
    }

    /// Recomputes `nu1` and `nu2` from the stored coefficients.
    pub fn refresh_bounds(&mut self) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for v in self.a11.iter().chain(&self.a22) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        self.nu1 = lo.min(1.0 / hi);
        self.nu2 = self.d.iter().cloned().fold(f64::INFINITY, f64::min);
    }

    pub fn check(&self, grid: &Grid2D) -> Result<(), EllipticError> {
        if self.n() != grid.nx {
            return Err(EllipticError::Stations { got: self.n(), want: grid.nx });
        }
        for i in 0..self.n() {
            if !(self.a11[i] > 0.0 && self.a22[i] > 0.0) {
                return Err(EllipticError::Degenerate { x: grid.x(i), what: "non-elliptic coefficients".into() });
            }
            if !(self.d[i] >= 0.0) {
                return Err(EllipticError::Degenerate { x: grid.x(i), what: format!("d = {} is negative", self.d[i]) });
            }
        }
        Ok(())
    }
}

/// Finite-volume radial operator `(1/r) d_r(r d_r f)` for even fields with a zero-flux wall.
pub fn even_radial_operator(nr: usize) -> Tridiagonal {
    let h = 1.0 / (nr - 1) as f64;
    let n = nr - 1;
    let mut t = Tridiagonal::zeros(nr);
    t.diag[0] = -4.0 / (h * h);
    t.sup[0] = 4.0 / (h * h);
    for j in 1..n {
        let r = j as f64 * h;
        let (rm, rp) = (r - 0.5 * h, r + 0.5 * h);
        t.sub[j] = rm / (r * h * h);
        t.sup[j] = rp / (r * h * h);
        t.diag[j] = -(rm + rp) / (r * h * h);
    }
    let vol = 0.5 * h * (1.0 - 0.25 * h);
    let rm = 1.0 - 0.5 * h;
    t.sub[n] = rm / (h * vol);
    t.diag[n] = -rm / (h * vol);
    t
}

/// Finite-volume `d_x F_x + (1/r) d_r(r F_r)` consistent with [`even_radial_operator`].
/// The wall flux is taken as zero.
pub fn divergence_fv(fx: &Field2D, fr: &Field2D) -> Field2D {
    let g = fx.grid;
    let (hx, hr) = (g.hx(), g.hr());
    let n = g.nr - 1;
    let mut out = Field2D::zeros(g, Parity::Even);
    for i in 0..g.nx {
        for j in 0..g.nr {
            let dx = if i == 0 {
                (-3.0 * fx.get(0, j) + 4.0 * fx.get(1, j) - fx.get(2, j)) / (2.0 * hx)
            } else if i == g.nx - 1 {
                (3.0 * fx.get(i, j) - 4.0 * fx.get(i - 1, j) + fx.get(i - 2, j)) / (2.0 * hx)
            } else {
                (fx.get(i + 1, j) - fx.get(i - 1, j)) / (2.0 * hx)
            };
            let face = |a: usize| 0.5 * (fr.get(i, a) + fr.get(i, a + 1));
            let dr = if j == 0 {
                (0.5 * hr * face(0)) / (0.125 * hr * hr)
            } else if j == n {
                -(1.0 - 0.5 * hr) * face(n - 1) / (0.5 * hr * (1.0 - 0.25 * hr))
            } else {
                let r = j as f64 * hr;
                ((r + 0.5 * hr) * face(j) - (r - 0.5 * hr) * face(j - 1)) / (r * hr)
            };
            out.set(i, j, dx + dr);
        }
    }
    out
}

/// Right-hand side data of the coupled block.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRhs {
    pub fx: Field2D,
    pub fr: Field2D,
    pub f1: Field2D,
    /// Exit value of `d_x phi` per radius.
    pub g_exit: Vec<f64>,
    /// `Psi` at the entrance per radius.
    pub psi_bd0: Vec<f64>,
    /// `Psi` at the exit per radius.
    pub psi_bdl: Vec<f64>,
}

/// Factorized coupled operator for one grid and coefficient set.
#[derive(Debug, Clone)]
pub struct PairSolver {
    grid: Grid2D,
    method: LinearMethod,
    opts: SolveOptions,
    sparse: SparseOperator,
    factor: Option<SeparableFactor>,
    /// Outer face coefficient of the exit ghost cell.
    exit_face: f64,
}

const PHI: usize = 0;
const PSI: usize = 1;

fn pair_system(grid: &Grid2D, c: &CoefficientField) -> TensorSystem {
    let nx = grid.nx;
    let hx = grid.hx();
    let hx2 = hx * hx;
    let blk = |i: usize, f: usize| 2 * i + f;
    let mut rows = vec![StencilRow::default(); 2 * nx];
    rows[blk(0, PHI)].terms.push((blk(0, PHI), 1.0));
    let n = nx - 1;
    let row = &mut rows[blk(n, PHI)];
    row.terms.extend([
        (blk(n - 1, PHI), 2.0 * c.a11[n] / hx2),
        (blk(n, PHI), -2.0 * c.a11[n] / hx2),
        (blk(n, PSI), 3.0 * c.b1[n] / (2.0 * hx)),
        (blk(n - 1, PSI), -4.0 * c.b1[n - 1] / (2.0 * hx)),
        (blk(n - 2, PSI), c.b1[n - 2] / (2.0 * hx)),
    ]);
    row.radial = c.a22[n];
    rows[blk(0, PSI)].terms.push((blk(0, PSI), 1.0));
    rows[blk(n, PSI)].terms.push((blk(n, PSI), 1.0));
    for i in 1..n {
        let ap = 0.5 * (c.a11[i] + c.a11[i + 1]);
        let am = 0.5 * (c.a11[i] + c.a11[i - 1]);
        let row = &mut rows[blk(i, PHI)];
        row.terms.extend([
            (blk(i - 1, PHI), am / hx2),
            (blk(i, PHI), -(ap + am) / hx2),
            (blk(i + 1, PHI), ap / hx2),
            (blk(i + 1, PSI), c.b1[i + 1] / (2.0 * hx)),
            (blk(i - 1, PSI), -c.b1[i - 1] / (2.0 * hx)),
        ]);
        row.radial = c.a22[i];
        let row = &mut rows[blk(i, PSI)];
        row.terms.extend([
            (blk(i - 1, PSI), 1.0 / hx2),
            (blk(i, PSI), -2.0 / hx2 - c.d[i]),
            (blk(i + 1, PSI), 1.0 / hx2),
            (blk(i + 1, PHI), -c.c1[i] / (2.0 * hx)),
            (blk(i - 1, PHI), c.c1[i] / (2.0 * hx)),
        ]);
        row.radial = 1.0;
    }
    TensorSystem { radial_op: even_radial_operator(grid.nr), rows }
}

impl PairSolver {
    pub fn new(
        grid: Grid2D,
        coeffs: &CoefficientField,
        method: LinearMethod,
        opts: SolveOptions,
    ) -> Result<Self, EllipticError> {
        coeffs.check(&grid)?;
        let system = pair_system(&grid, coeffs);
        let sparse = system.to_sparse();
        let factor = match method {
            LinearMethod::Separable => Some(system.factor()?),
            LinearMethod::Sparse => None,
        };
        let n = grid.nx - 1;
        let exit_face = 0.5 * (3.0 * coeffs.a11[n] - coeffs.a11[n - 1]);
        Ok(Self { grid, method, opts, sparse, factor, exit_face })
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.sparse
    }

    pub fn assemble_rhs(&self, rhs: &PairRhs) -> Result<Vec<f64>, EllipticError> {
        let g = self.grid;
        for v in [&rhs.g_exit, &rhs.psi_bd0, &rhs.psi_bdl] {
            if v.len() != g.nr {
                return Err(EllipticError::BoundaryLength { got: v.len(), want: g.nr });
            }
        }
        let div = divergence_fv(&rhs.fx, &rhs.fr);
        let nr = g.nr;
        let n = g.nx - 1;
        let mut b = vec![0.0; 2 * g.nx * nr];
        for i in 0..g.nx {
            for j in 0..nr {
                let (bphi, bpsi) = if i == 0 {
                    (0.0, rhs.psi_bd0[j])
                } else if i == n {
                    (div.get(i, j) - 2.0 * self.exit_face * rhs.g_exit[j] / g.hx(), rhs.psi_bdl[j])
                } else {
                    (div.get(i, j), rhs.f1.get(i, j))
                };
                b[(2 * i + PHI) * nr + j] = bphi;
                b[(2 * i + PSI) * nr + j] = bpsi;
            }
        }
        Ok(b)
    }

    /// Returns `(Psi, phi)`.
    pub fn solve(&self, rhs: &PairRhs) -> Result<(Field2D, Field2D), EllipticError> {
        let b = self.assemble_rhs(rhs)?;
        let x = match (&self.factor, self.method) {
            (Some(f), LinearMethod::Separable) => f.solve_refined(&self.sparse, &b, self.opts.tol)?,
            _ => linear::solve(&self.sparse, &b, &self.opts)?.x,
        };
        let residual = self.sparse.relative_residual(&x, &b);
        if residual > self.opts.tol {
            return Err(EllipticError::Residual { residual, tol: self.opts.tol });
        }
        let g = self.grid;
        let nr = g.nr;
        let mut psi = Field2D::zeros(g, Parity::Even);
        let mut phi = Field2D::zeros(g, Parity::Even);
        for i in 0..g.nx {
            for j in 0..nr {
                phi.set(i, j, x[(2 * i + PHI) * nr + j]);
                psi.set(i, j, x[(2 * i + PSI) * nr + j]);
            }
        }
        Ok((psi, phi))
    }
}

/// One-shot coupled solve with the default separable route.
pub fn solve_linear_pair(
    grid: Grid2D,
    coeffs: &CoefficientField,
    rhs: &PairRhs,
) -> Result<(Field2D, Field2D), EllipticError> {
    PairSolver::new(grid, coeffs, LinearMethod::Separable, SolveOptions::default())?.solve(rhs)
}
