//! Transport of `W = (S, K, Lambda)` along the meridional mass flux `M`.
//!
//! The stream function `w(x, r) = int_0^r s Mx(x, s) ds` is constant along streamlines, so each
//! node carries the entrance radius `theta = G^-1(w)` with `G = w(0, .)`, and `W = W_en(theta)`.

use crate::grid::{bilinear, cumulative_r_integral, ddr, ddx, Field2D, GridError, Parity, RadialWeight};
use crate::profile::{MonotoneCubic, ProfileError, RadialProfile};
use thiserror::Error;

/// Threshold on `max |Mr / Mx|` above which a warning is raised.
pub const SLOPE_WARNING: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("axial mass flux not positive: min Mx = {0}")]
    NonPositiveFlux(f64),
    #[error("stream function not increasing in r at x = {x}, r = {r}")]
    NotMonotone { x: f64, r: f64 },
    #[error("characteristic left the domain at x = {x}, r = {r}")]
    LeftDomain { x: f64, r: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeridionalMomentum {
    pub mx: Field2D,
    pub mr: Field2D,
    pub nu_star: f64,
    /// Maximum of `|d_x(r Mx) + d_r(r Mr)|` over the nodes.
    pub div_defect: f64,
}

impl MeridionalMomentum {
    pub fn new(mx: Field2D, mut mr: Field2D) -> Self {
        let g = mr.grid;
        mr.parity = Parity::Odd;
        mr.enforce_parity();
        for i in 0..g.nx {
            mr.set(i, g.nr - 1, 0.0);
        }
        let nu_star = mx.values().iter().cloned().fold(f64::INFINITY, f64::min);
        let div_defect = divergence_defect(&mx, &mr);
        Self { mx, mr, nu_star, div_defect }
    }

    /// `max |Mr / Mx|`.
    pub fn max_slope(&self) -> f64 {
        self.mr
            .values()
            .iter()
            .zip(self.mx.values())
            .fold(0.0, |m, (a, b)| m.max((a / b).abs()))
    }
}

/// `max |d_x(r Mx) + d_r(r Mr)|` by centered differences.
pub fn divergence_defect(mx: &Field2D, mr: &Field2D) -> f64 {
    let g = mx.grid;
    let weighted = |f: &Field2D, parity: Parity| {
        let mut out = Field2D::zeros(g, parity);
        for i in 0..g.nx {
            for j in 0..g.nr {
                out.set(i, j, g.r(j) * f.get(i, j));
            }
        }
        out.enforce_parity();
        out
    };
    let a = ddx(&weighted(mx, Parity::Odd));
    let b = ddr(&weighted(mr, Parity::Even));
    a.values().iter().zip(b.values()).fold(0.0, |m, (p, q)| m.max((p + q).abs()))
}

/// Entrance stream function `G` as a function of `zeta = r^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamInverse {
    radii: Vec<f64>,
    g_of_zeta: MonotoneCubic,
}

impl StreamInverse {
    /// From entrance samples `G(r_j)` and `Mx(0, r_j)`, using `dG/dzeta = Mx / 2`.
    pub fn new(radii: Vec<f64>, g: Vec<f64>, mx0: &[f64]) -> Result<Self, ProfileError> {
        let zeta: Vec<f64> = radii.iter().map(|r| r * r).collect();
        let slopes: Vec<f64> = mx0.iter().map(|m| 0.5 * m).collect();
        let g_of_zeta = MonotoneCubic::with_slopes(zeta, g, slopes)?;
        Ok(Self { radii, g_of_zeta })
    }

    pub fn g_max(&self) -> f64 {
        *self.g_of_zeta.values().last().expect("non-empty")
    }

    /// Entrance radius carrying stream value `w`; node values map to node radii exactly.
    pub fn theta(&self, w: f64) -> Result<f64, ProfileError> {
        let vals = self.g_of_zeta.values();
        if let Ok(k) = vals.binary_search_by(|a| a.partial_cmp(&w).unwrap_or(std::cmp::Ordering::Less)) {
            return Ok(self.radii[k]);
        }
        Ok(self.g_of_zeta.inverse(w)?.max(0.0).sqrt())
    }

    /// `dG/dr` at radius `theta`.
    pub fn dg_dr(&self, theta: f64) -> f64 {
        2.0 * theta * self.g_of_zeta.deriv(theta * theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamMap {
    pub w: Field2D,
    pub inverse: StreamInverse,
    pub theta: Field2D,
    /// `d_r theta` by the chain rule.
    pub dtheta_dr: Field2D,
    /// Largest amount by which `w` was moved into the entrance range.
    pub max_clamp: f64,
}

pub fn build_stream_map(m: &MeridionalMomentum) -> Result<StreamMap, TransportError> {
    if !(m.nu_star > 0.0) {
        return Err(TransportError::NonPositiveFlux(m.nu_star));
    }
    let g = m.mx.grid;
    let w = cumulative_r_integral(&m.mx, RadialWeight::R);
    for i in 0..g.nx {
        for j in 1..g.nr {
            if !(w.get(i, j) > w.get(i, j - 1)) {
                return Err(TransportError::NotMonotone { x: g.x(i), r: g.r(j) });
            }
        }
    }
    let radii: Vec<f64> = (0..g.nr).map(|j| g.r(j)).collect();
    let inverse = StreamInverse::new(radii, w.column(0).to_vec(), m.mx.column(0))?;
    let gmax = inverse.g_max();
    let mut theta = Field2D::zeros(g, Parity::Even);
    let mut dtheta = Field2D::zeros(g, Parity::Odd);
    let mut max_clamp: f64 = 0.0;
    for i in 0..g.nx {
        for j in 1..g.nr {
            let raw = w.get(i, j);
            let wc = raw.clamp(0.0, gmax);
            max_clamp = max_clamp.max((raw - wc).abs());
            let th = inverse.theta(wc)?;
            theta.set(i, j, th);
            let slope = inverse.dg_dr(th);
            if th > 0.0 && slope > 0.0 {
                dtheta.set(i, j, g.r(j) * m.mx.get(i, j) / slope);
            }
        }
    }
    Ok(StreamMap { w, inverse, theta, dtheta_dr: dtheta, max_clamp })
}

/// Entrance label by RK4 along `dkappa/ds = Mr/Mx` backward from `(x, r)` to `s = 0`.
pub fn trace_characteristic(m: &MeridionalMomentum, x: f64, r: f64) -> Result<f64, TransportError> {
    let g = m.mx.grid;
    if !g.contains(x, r) {
        return Err(TransportError::Grid(GridError::OutOfDomain { x, r }));
    }
    let steps = ((2.0 * x / g.hx()).ceil() as usize).max(1);
    let h = -x / steps as f64;
    let tol = 1e-8;
    let slope = |s: f64, k: f64| -> Result<f64, TransportError> {
        if k < -tol || k > 1.0 + tol {
            return Err(TransportError::LeftDomain { x: s, r: k });
        }
        let kc = k.clamp(0.0, 1.0);
        let sc = s.clamp(0.0, g.length);
        Ok(bilinear(&m.mr, sc, kc)? / bilinear(&m.mx, sc, kc)?)
    };
    let mut s = x;
    let mut k = r;
    for _ in 0..steps {
        let k1 = slope(s, k)?;
        let k2 = slope(s + 0.5 * h, k + 0.5 * h * k1)?;
        let k3 = slope(s + 0.5 * h, k + 0.5 * h * k2)?;
        let k4 = slope(s + h, k + h * k3)?;
        k += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s += h;
    }
    if k < -tol || k > 1.0 + tol {
        return Err(TransportError::LeftDomain { x: 0.0, r: k });
    }
    Ok(k.clamp(0.0, 1.0))
}

/// Entrance data of the transported quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct EntranceProfiles {
    pub s_en: RadialProfile,
    /// Pseudo-Bernoulli entrance profile.
    pub k_en: RadialProfile,
    /// Entrance swirl velocity; `Lambda_en = r nu_en`.
    pub nu_en: RadialProfile,
}

/// Transported `S, K, Lambda`, the swirl velocity `V = Lambda / r` and radial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportedFields {
    pub s: Field2D,
    pub k: Field2D,
    pub lambda: Field2D,
    pub v: Field2D,
    pub ds_dr: Field2D,
    pub dk_dr: Field2D,
    pub dlambda_dr: Field2D,
}

impl TransportedFields {
    /// Uniform entrance state: `S = S0`, `K = K0`, no swirl.
    pub fn uniform(grid: crate::grid::Grid2D, s0: f64, k0: f64) -> Self {
        Self {
            s: Field2D::from_fn(grid, Parity::Even, |_, _| s0),
            k: Field2D::from_fn(grid, Parity::Even, |_, _| k0),
            lambda: Field2D::zeros(grid, Parity::Even),
            v: Field2D::zeros(grid, Parity::Odd),
            ds_dr: Field2D::zeros(grid, Parity::Odd),
            dk_dr: Field2D::zeros(grid, Parity::Odd),
            dlambda_dr: Field2D::zeros(grid, Parity::Odd),
        }
    }

    /// `self + relax (other - self)` for every field.
    pub fn relax_towards(&self, other: &Self, relax: f64) -> Self {
        let f = |a: &Field2D, b: &Field2D| a.lincomb(1.0 - relax, b, relax);
        Self {
            s: f(&self.s, &other.s),
            k: f(&self.k, &other.k),
            lambda: f(&self.lambda, &other.lambda),
            v: f(&self.v, &other.v),
            ds_dr: f(&self.ds_dr, &other.ds_dr),
            dk_dr: f(&self.dk_dr, &other.dk_dr),
            dlambda_dr: f(&self.dlambda_dr, &other.dlambda_dr),
        }
    }

    /// Sup-norm distance over `S, K, Lambda`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.s
            .max_abs_diff(&other.s)
            .max(self.k.max_abs_diff(&other.k))
            .max(self.lambda.max_abs_diff(&other.lambda))
    }
}

pub fn transport_solve(map: &StreamMap, en: &EntranceProfiles) -> TransportedFields {
    let g = map.theta.grid;
    let mut out = TransportedFields::uniform(g, 0.0, 0.0);
    for i in 0..g.nx {
        for j in 0..g.nr {
            let th = map.theta.get(i, j);
            let dth = map.dtheta_dr.get(i, j);
            let (s, ds) = en.s_en.eval_d(th);
            let (k, dk) = en.k_en.eval_d(th);
            let (nu, dnu) = en.nu_en.eval_d(th);
            out.s.set(i, j, s);
            out.k.set(i, j, k);
            out.lambda.set(i, j, th * nu);
            if j > 0 {
                out.ds_dr.set(i, j, ds * dth);
                out.dk_dr.set(i, j, dk * dth);
                out.dlambda_dr.set(i, j, (nu + th * dnu) * dth);
                out.v.set(i, j, th / g.r(j) * nu);
            }
        }
    }
    out
}
