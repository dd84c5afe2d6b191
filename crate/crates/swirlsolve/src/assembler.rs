//! Nonlinear couplings: velocity and density from the potentials, the right-hand sides of the
//! elliptic blocks, the exit Neumann data and the meridional mass flux.

use crate::background::BackgroundProfile;
use crate::elliptic::{background_state, build_coefficients, BackgroundState, CoefficientField, EllipticError};
use crate::grid::{ddr, ddx, Field2D, Grid2D, Parity};
use crate::perturbation::PerturbationInput;
use crate::swirl::enforce_axis_compatibility;
use crate::transport::{MeridionalMomentum, TransportedFields};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("vacuum at x = {x}, r = {r}")]
    Vacuum { x: f64, r: f64 },
    #[error("background has {got} stations, grid has {want}")]
    Stations { got: usize, want: usize },
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

/// Background quantities sampled on the x-stations of a grid.
#[derive(Debug, Clone)]
pub struct BaseFlow {
    pub grid: Grid2D,
    pub bg: BackgroundProfile,
    pub coeffs: CoefficientField,
    pub states: Vec<BackgroundState>,
}

impl BaseFlow {
    pub fn new(bg: BackgroundProfile, grid: Grid2D) -> Result<Self, AssemblyError> {
        if bg.n() != grid.nx {
            return Err(AssemblyError::Stations { got: bg.n(), want: grid.nx });
        }
        let coeffs = build_coefficients(&bg)?;
        let states = (0..bg.n())
            .map(|i| background_state(&bg, i))
            .collect::<Result<Vec<_>, _>>()
            .map_err(EllipticError::from)?;
        Ok(Self { grid, bg, coeffs, states })
    }

    pub fn k0(&self) -> f64 {
        self.bg.b0
    }

    pub fn s0(&self) -> f64 {
        self.bg.env.s0
    }
}

/// Inner unknowns: potential perturbation `Psi`, velocity potential `phi`, swirl stream `psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub psi_pert: Field2D,
    pub phi: Field2D,
    pub psi: Field2D,
}

impl Potentials {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            psi_pert: Field2D::zeros(grid, Parity::Even),
            phi: Field2D::zeros(grid, Parity::Even),
            psi: Field2D::zeros(grid, Parity::Odd),
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.psi_pert
            .max_abs_diff(&other.psi_pert)
            .max(self.phi.max_abs_diff(&other.phi))
            .max(self.psi.max_abs_diff(&other.psi))
    }

    pub fn relax_towards(&self, other: &Self, relax: f64) -> Self {
        Self {
            psi_pert: self.psi_pert.lincomb(1.0 - relax, &other.psi_pert, relax),
            phi: self.phi.lincomb(1.0 - relax, &other.phi, relax),
            psi: self.psi.lincomb(1.0 - relax, &other.psi, relax),
        }
    }
}

/// Full state at one iterate: unknowns, transported quantities and derived flow fields.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowIterate {
    pub pot: Potentials,
    pub w: TransportedFields,
    pub dphi_dx: Field2D,
    pub dphi_dr: Field2D,
    /// Swirl contribution `(1/r) d_r(r psi) = d_r psi + psi / r` to the axial velocity. On the
    /// axis `psi / r` is extrapolated from the first two rings.
    pub tx: Field2D,
    /// Swirl contribution `-d_x psi` to the radial velocity.
    pub tr: Field2D,
    pub rho: Field2D,
    pub ux: Field2D,
    pub ur: Field2D,
    pub utheta: Field2D,
    pub q_sq: Field2D,
}

impl FlowIterate {
    /// Total electric potential `Phi0 + Psi`.
    pub fn phi_total(&self, base: &BaseFlow) -> Field2D {
        let g = base.grid;
        let mut out = self.pot.psi_pert.clone();
        for i in 0..g.nx {
            for j in 0..g.nr {
                out.set(i, j, base.bg.phi0[i] + self.pot.psi_pert.get(i, j));
            }
        }
        out
    }
}

pub fn reconstruct_velocity(
    base: &BaseFlow,
    pot: &Potentials,
    w: &TransportedFields,
) -> Result<FlowIterate, AssemblyError> {
    let g = base.grid;
    let gas = &base.bg.gas;
    let dphi_dx = ddx(&pot.phi);
    let mut dphi_dr = ddr(&pot.phi);
    for i in 0..g.nx {
        dphi_dr.set(i, g.nr - 1, 0.0);
    }
    let dpsi_dr = ddr(&pot.psi);
    let dpsi_dx = ddx(&pot.psi);
    let mut tx = Field2D::zeros(g, Parity::Even);
    let tr = dpsi_dx.map(Parity::Odd, |v| -v);
    let mut rho = Field2D::zeros(g, Parity::Even);
    let mut ux = Field2D::zeros(g, Parity::Even);
    let mut ur = Field2D::zeros(g, Parity::Odd);
    let mut q_sq = Field2D::zeros(g, Parity::Even);
    let utheta = w.v.clone();
    for i in 0..g.nx {
        let ubar = base.bg.u_bar[i];
        let phi0 = base.bg.phi0[i];
        for j in 0..g.nr {
            let t = if j == 0 {
                let xi1 = pot.psi.get(i, 1) / g.r(1);
                let xi2 = pot.psi.get(i, 2) / g.r(2);
                dpsi_dr.get(i, 0) + (4.0 * xi1 - xi2) / 3.0
            } else {
                dpsi_dr.get(i, j) + pot.psi.get(i, j) / g.r(j)
            };
            tx.set(i, j, t);
            let vx = ubar + dphi_dx.get(i, j) + t;
            let vr = dphi_dr.get(i, j) + tr.get(i, j);
            let vt = utheta.get(i, j);
            let q2 = vx * vx + vr * vr + vt * vt;
            let tau = w.k.get(i, j) + phi0 + pot.psi_pert.get(i, j) - 0.5 * q2;
            let density = gas
                .density_h(w.s.get(i, j), tau)
                .map_err(|_| AssemblyError::Vacuum { x: g.x(i), r: g.r(j) })?;
            ux.set(i, j, vx);
            ur.set(i, j, vr);
            q_sq.set(i, j, q2);
            rho.set(i, j, density);
        }
    }
    ur.enforce_parity();
    Ok(FlowIterate { pot: pot.clone(), w: w.clone(), dphi_dx, dphi_dr, tx, tr, rho, ux, ur, utheta, q_sq })
}

/// `(F_x, F_r, f1)` from the exact Taylor remainders of the flux and density maps.
pub fn assemble_f_f1(base: &BaseFlow, it: &FlowIterate, pert: &PerturbationInput) -> (Field2D, Field2D, Field2D) {
    let g = base.grid;
    let c = &base.coeffs;
    let mut fx = Field2D::zeros(g, Parity::Even);
    let mut fr = Field2D::zeros(g, Parity::Odd);
    let mut f1 = Field2D::zeros(g, Parity::Even);
    for i in 0..g.nx {
        let st = &base.states[i];
        let ubar = st.u;
        for j in 0..g.nr {
            let bq = it.rho.get(i, j);
            let v1 = it.dphi_dx.get(i, j);
            let v2 = it.dphi_dr.get(i, j);
            let z = it.pot.psi_pert.get(i, j);
            let a1q = bq * (ubar + v1);
            let a10 = st.rho * ubar;
            fx.set(i, j, -bq * it.tx.get(i, j) - (a1q - a10 - c.a11[i] * v1 - c.b1[i] * z));
            if j > 0 && j < g.nr - 1 {
                fr.set(i, j, -bq * it.tr.get(i, j) - (bq * v2 - c.a22[i] * v2));
            }
            let b = pert.b_field.get(i, j);
            f1.set(i, j, bq - st.rho - c.c1[i] * v1 - c.d[i] * z - (b - pert.b0));
        }
    }
    (fx, fr, f1)
}

/// Swirl source `[T dS/dr - dK/dr + (V/r) dLambda/dr] / ux`, with its axis row forced to zero.
/// Also returns the largest axis value before enforcement.
pub fn assemble_f2(base: &BaseFlow, it: &FlowIterate) -> (Field2D, f64) {
    let g = base.grid;
    let gas = &base.bg.gas;
    let w = &it.w;
    let mut f2 = Field2D::zeros(g, Parity::Even);
    let dv_dr_axis = |i: usize| w.v.get(i, 1) / g.hr();
    for i in 0..g.nx {
        for j in 0..g.nr {
            let rho = it.rho.get(i, j);
            let s = w.s.get(i, j);
            let temp = gas.temperature(rho, s).unwrap_or(f64::NAN);
            let v_over_r = if j == 0 { dv_dr_axis(i) } else { w.v.get(i, j) / g.r(j) };
            let num = temp * w.ds_dr.get(i, j) - w.dk_dr.get(i, j) + v_over_r * w.dlambda_dr.get(i, j);
            f2.set(i, j, num / it.ux.get(i, j));
        }
    }
    let pre = enforce_axis_compatibility(&mut f2);
    (f2, pre)
}

/// Exit Neumann data for `phi`, from the exit pressure condition.
pub fn assemble_g(base: &BaseFlow, it: &FlowIterate, pert: &PerturbationInput) -> Vec<f64> {
    let g = base.grid;
    let gas = &base.bg.gas;
    let n = g.nx - 1;
    let ubar = base.bg.u_bar[n];
    let gm = gas.gamma;
    let k0 = base.k0();
    let s0 = base.s0();
    let e = (gm - 1.0) / gm;
    let ref_term = pert.p_l.powf(e) * gas.entropy_factor(s0).powf(1.0 / gm);
    (0..g.nr)
        .map(|j| {
            let r = g.r(j);
            let tx = it.tx.get(n, j);
            let wx = it.dphi_dx.get(n, j) + tx;
            let wr = it.dphi_dr.get(n, j) + it.tr.get(n, j);
            let wt = it.utheta.get(n, j);
            let psi_bd = pert.phi_bdl.eval(r) - base.bg.phi0[n];
            let k = it.w.k.get(n, j);
            let s = it.w.s.get(n, j);
            let pex = pert.p_ex.eval(r);
            let p_term = pex.powf(e) * gas.entropy_factor(s).powf(1.0 / gm) - ref_term;
            -tx + (k - k0 + psi_bd - 0.5 * (wx * wx + wr * wr + wt * wt)) / ubar
                - gm * p_term / ((gm - 1.0) * ubar)
        })
        .collect()
}

/// Boundary values of `Psi` at the entrance and the exit.
pub fn boundary_psi(base: &BaseFlow, pert: &PerturbationInput) -> (Vec<f64>, Vec<f64>) {
    let g = base.grid;
    let n = g.nx - 1;
    let at0 = (0..g.nr).map(|j| pert.phi_bd0.eval(g.r(j)) - base.bg.phi0[0]).collect();
    let atl = (0..g.nr).map(|j| pert.phi_bdl.eval(g.r(j)) - base.bg.phi0[n]).collect();
    (at0, atl)
}

pub fn assemble_m(it: &FlowIterate) -> MeridionalMomentum {
    let mx = it.rho.zip_map(&it.ux, Parity::Even, |a, b| a * b);
    let mr = it.rho.zip_map(&it.ur, Parity::Odd, |a, b| a * b);
    MeridionalMomentum::new(mx, mr)
}
