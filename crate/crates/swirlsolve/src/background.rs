//! One-dimensional subsonic background state.
//!
//! Integrates `rho' = rho E / (c^2 - J0^2/rho^2)`, `E' = rho - b0` with fixed-step RK4 and
//! accumulates the potentials `Phi0 = int E` and `varphi0 = int J0/rho` with composite Simpson.

use crate::thermo::{GasParams, ThermoError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_NODES: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackgroundError {
    #[error("invalid entrance data: {0}")]
    InvalidEnv(String),
    #[error("sonic degeneracy at x = {x}: subsonicity margin {margin} is not positive")]
    SonicDegeneracy { x: f64, margin: f64 },
    #[error("background needs at least 16 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("background invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

/// Entrance data of the one-dimensional problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntranceEnv {
    pub b0: f64,
    pub j0: f64,
    pub s0: f64,
    pub rho0: f64,
    pub e0: f64,
    pub length: f64,
}

impl Default for EntranceEnv {
    fn default() -> Self {
        Self { b0: 2.2, j0: 1.0, s0: 0.0, rho0: 2.0, e0: 0.3, length: 1.0 }
    }
}

impl EntranceEnv {
    pub fn validate(&self, gas: &GasParams) -> Result<(), BackgroundError> {
        gas.validate()?;
        let mut problems = Vec::new();
        if !(self.b0 > 0.0 && self.b0.is_finite()) {
            problems.push(format!("b0 must be positive, got {}", self.b0));
        }
        if !(self.j0 > 0.0 && self.j0.is_finite()) {
            problems.push(format!("J0 must be positive, got {}", self.j0));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            problems.push(format!("L must be positive, got {}", self.length));
        }
        if !self.s0.is_finite() || !self.e0.is_finite() {
            problems.push("S0 and E0 must be finite".to_string());
        }
        if problems.is_empty() {
            let rc = rho_critical(self.j0, self.s0, gas);
            if !(self.rho0 > rc) {
                problems.push(format!(
                    "rho0 = {} is not above the critical density {rc}",
                    self.rho0
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(BackgroundError::InvalidEnv(problems.join("; ")))
        }
    }
}

/// Sonic density `(J0^2 / (gamma A e^{S0/cv}))^{1/(gamma+1)}`.
pub fn rho_critical(j0: f64, s0: f64, gas: &GasParams) -> f64 {
    (j0 * j0 / (gas.gamma * gas.entropy_factor(s0))).powf(1.0 / (gas.gamma + 1.0))
}

/// `gamma A e^{S0/cv} rho^{gamma-1} - J0^2/rho^2`.
pub fn subsonic_margin(rho: f64, env: &EntranceEnv, gas: &GasParams) -> f64 {
    gas.gamma * gas.entropy_factor(env.s0) * rho.powf(gas.gamma - 1.0) - env.j0 * env.j0 / (rho * rho)
}

pub fn background_rhs(
    rho: f64,
    e: f64,
    env: &EntranceEnv,
    gas: &GasParams,
) -> Result<(f64, f64), BackgroundError> {
    let margin = subsonic_margin(rho, env, gas);
    if !(margin > 0.0) {
        return Err(BackgroundError::SonicDegeneracy { x: f64::NAN, margin });
    }
    Ok((rho * e / margin, rho - env.b0))
}

/// Background Bernoulli constant `J0^2/(2 rho0^2) + tau(rho0, S0)`.
pub fn b0_const(env: &EntranceEnv, gas: &GasParams) -> Result<f64, BackgroundError> {
    let u0 = env.j0 / env.rho0;
    Ok(gas.bernoulli(env.rho0, u0 * u0, env.s0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundProfile {
    pub env: EntranceEnv,
    pub gas: GasParams,
    pub x: Vec<f64>,
    pub rho_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub e_bar: Vec<f64>,
    pub phi0: Vec<f64>,
    pub varphi0: Vec<f64>,
    pub margin: Vec<f64>,
    pub nu0_margin: f64,
    pub b0: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

pub fn solve_background(
    env: &EntranceEnv,
    gas: &GasParams,
    n_nodes: usize,
) -> Result<BackgroundProfile, BackgroundError> {
    if n_nodes < 16 {
        return Err(BackgroundError::TooFewNodes(n_nodes));
    }
    env.validate(gas)?;
    let h = env.length / (n_nodes - 1) as f64;
    let x: Vec<f64> = (0..n_nodes).map(|i| i as f64 * h).collect();
    let mut rho = vec![0.0; n_nodes];
    let mut e = vec![0.0; n_nodes];
    rho[0] = env.rho0;
    e[0] = env.e0;
    let rhs = |r: f64, ef: f64, xq: f64| {
        background_rhs(r, ef, env, gas).map_err(|err| match err {
            BackgroundError::SonicDegeneracy { margin, .. } => {
                BackgroundError::SonicDegeneracy { x: xq, margin }
            }
            other => other,
        })
    };
    for i in 0..n_nodes - 1 {
        let (r, ef, xi) = (rho[i], e[i], x[i]);
        let k1 = rhs(r, ef, xi)?;
        let k2 = rhs(r + 0.5 * h * k1.0, ef + 0.5 * h * k1.1, xi + 0.5 * h)?;
        let k3 = rhs(r + 0.5 * h * k2.0, ef + 0.5 * h * k2.1, xi + 0.5 * h)?;
        let k4 = rhs(r + h * k3.0, ef + h * k3.1, xi + h)?;
        rho[i + 1] = r + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        e[i + 1] = ef + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if !(rho[i + 1] > 0.0) {
            return Err(BackgroundError::SonicDegeneracy { x: x[i + 1], margin: f64::NAN });
        }
    }
    let u: Vec<f64> = rho.iter().map(|r| env.j0 / r).collect();
    let margin: Vec<f64> = rho.iter().map(|&r| subsonic_margin(r, env, gas)).collect();
    if let Some((i, m)) = margin.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
        return Err(BackgroundError::SonicDegeneracy { x: x[i], margin: *m });
    }
    let phi0 = cumulative_simpson(&e, h);
    let varphi0 = cumulative_simpson(&u, h);
    let profile = BackgroundProfile {
        env: *env,
        gas: *gas,
        nu0_margin: margin.iter().cloned().fold(f64::INFINITY, f64::min),
        b0: b0_const(env, gas)?,
        rho_lo: rho.iter().cloned().fold(f64::INFINITY, f64::min),
        rho_hi: rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        x,
        rho_bar: rho,
        u_bar: u,
        e_bar: e,
        phi0,
        varphi0,
        margin,
    };
    profile.check_invariants()?;
    Ok(profile)
}

/// Background sampled on `nx` uniform nodes, integrated internally on a grid of at least
/// [`DEFAULT_NODES`] intervals so that its error stays far below the 2-D discretization error.
pub fn solve_background_on_grid(
    env: &EntranceEnv,
    gas: &GasParams,
    nx: usize,
) -> Result<BackgroundProfile, BackgroundError> {
    if nx < 2 {
        return Err(BackgroundError::TooFewNodes(nx));
    }
    let intervals = nx - 1;
    let stride = DEFAULT_NODES.div_ceil(intervals).max(1);
    let fine = solve_background(env, gas, intervals * stride + 1)?;
    Ok(fine.subsample(stride))
}

/// Composite Simpson antiderivative from the first node. Odd nodes add a three-point partial panel.
pub fn cumulative_simpson(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
        }
        return out;
    }
    let mut i = 2;
    while i < n {
        out[i] = out[i - 2] + h / 3.0 * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
        i += 2;
    }
    let mut i = 1;
    while i < n {
        out[i] = if i + 1 < n {
            out[i - 1] + h / 12.0 * (5.0 * f[i - 1] + 8.0 * f[i] - f[i + 1])
        } else {
            out[i - 1] + h / 12.0 * (-f[i - 2] + 8.0 * f[i - 1] + 5.0 * f[i])
        };
        i += 2;
    }
    out
}

impl BackgroundProfile {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn length(&self) -> f64 {
        self.env.length
    }

    pub fn hx(&self) -> f64 {
        self.env.length / (self.n() - 1) as f64
    }

    /// `rho_bar'` from the ODE at node `i`.
    pub fn drho_dx(&self, i: usize) -> f64 {
        self.rho_bar[i] * self.e_bar[i] / self.margin[i]
    }

    pub fn du_dx(&self, i: usize) -> f64 {
        -self.u_bar[i] * self.drho_dx(i) / self.rho_bar[i]
    }

    /// `Phi0'' = rho_bar - b0`.
    pub fn d2phi0_dx2(&self, i: usize) -> f64 {
        self.rho_bar[i] - self.env.b0
    }

    pub fn exit_index(&self) -> usize {
        self.n() - 1
    }

    pub fn subsample(&self, stride: usize) -> BackgroundProfile {
        let pick = |v: &Vec<f64>| v.iter().step_by(stride).cloned().collect::<Vec<_>>();
        let margin = pick(&self.margin);
        let rho = pick(&self.rho_bar);
        BackgroundProfile {
            env: self.env,
            gas: self.gas,
            x: pick(&self.x),
            u_bar: pick(&self.u_bar),
            e_bar: pick(&self.e_bar),
            phi0: pick(&self.phi0),
            varphi0: pick(&self.varphi0),
            nu0_margin: margin.iter().cloned().fold(f64::INFINITY, f64::min),
            rho_lo: rho.iter().cloned().fold(f64::INFINITY, f64::min),
            rho_hi: rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            rho_bar: rho,
            margin,
            b0: self.b0,
        }
    }

    /// Maximum of `|B(x) - Phi0(x) - B0|` over the nodes.
    pub fn bernoulli_defect(&self) -> f64 {
        (0..self.n())
            .map(|i| {
                let u = self.u_bar[i];
                let b = self
                    .gas
                    .bernoulli(self.rho_bar[i], u * u, self.env.s0)
                    .unwrap_or(f64::NAN);
                (b - self.phi0[i] - self.b0).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn check_invariants(&self) -> Result<(), BackgroundError> {
        for i in 0..self.n() {
            let flux = self.rho_bar[i] * self.u_bar[i];
            if ((flux - self.env.j0) / self.env.j0).abs() > 1e-12 {
                return Err(BackgroundError::Invariant(format!(
                    "flux {flux} differs from J0 at x = {}",
                    self.x[i]
                )));
            }
            if !(self.margin[i] > 0.0) {
                return Err(BackgroundError::SonicDegeneracy { x: self.x[i], margin: self.margin[i] });
            }
        }
        if self.phi0[0] != 0.0 || self.varphi0[0] != 0.0 {
            return Err(BackgroundError::Invariant("potentials must vanish at the entrance".into()));
        }
        Ok(())
    }

    /// Rows `x,rho_bar,u_bar,E_bar,Phi0,varphi0,margin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,rho_bar,u_bar,E_bar,Phi0,varphi0,margin\n");
        for i in 0..self.n() {
            let row = [
                self.x[i],
                self.rho_bar[i],
                self.u_bar[i],
                self.e_bar[i],
                self.phi0[i],
                self.varphi0[i],
                self.margin[i],
            ];
            out.push_str(&crate::io::csv_row(&row));
        }
        out
    }
}
