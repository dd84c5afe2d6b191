//! Boundary and doping perturbations of the background, their compatibility checks and the
//! perturbation size `sigma`.
//!
//! `sigma` sums discrete surrogates of the Holder norms of the data: sup-norms of values and
//! derivatives plus Lipschitz quotients of the highest derivative, sampled on a fixed grid.

use crate::background::BackgroundProfile;
use crate::elliptic::background_state;
use crate::grid::{Field2D, Grid2D, Parity};
use crate::profile::{BumpShape, ProfileError, RadialProfile};
use crate::thermo::ThermoError;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Samples per direction used by the `sigma` surrogate.
const SIGMA_SAMPLES: usize = 201;
/// Tolerance of the axis and wall slope checks on tabulated data.
const TABLE_SLOPE_TOL: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbationError {
    #[error("{0}")]
    Compatibility(String),
    #[error("profile {name}: {source}")]
    Profile { name: String, source: ProfileError },
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeName {
    /// `nu_en = a r (1 - r^2)`
    SwirlBump,
    /// `S_en = S0 + a (1 - r^2)^2`
    EntropyBump,
    /// `p_ex = p_L (1 + a (1 - r^2)^2)`
    PressureBump,
    /// `b = b0 (1 + a sin(pi x / L) (1 - r^2)^2)`
    DopingBump,
    /// `B_en = B0 + a (1 - r^2)^2`
    BernoulliBump,
    /// `Phi_bd(L, r) = Phi0(L) + a (1 - r^2)^2`
    PotentialBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeTerm {
    pub name: ShapeName,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileTable {
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

/// Tabulated profiles replacing the analytic ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProfileTables {
    #[serde(rename = "S_en", default, skip_serializing_if = "Option::is_none")]
    pub s_en: Option<ProfileTable>,
    #[serde(rename = "B_en", default, skip_serializing_if = "Option::is_none")]
    pub b_en: Option<ProfileTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_en: Option<ProfileTable>,
    #[serde(rename = "Phi_bd0", default, skip_serializing_if = "Option::is_none")]
    pub phi_bd0: Option<ProfileTable>,
    #[serde(rename = "Phi_bdL", default, skip_serializing_if = "Option::is_none")]
    pub phi_bdl: Option<ProfileTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_ex: Option<ProfileTable>,
}

impl ProfileTables {
    pub fn entries(&self) -> Vec<(&'static str, &ProfileTable)> {
        [
            ("S_en", &self.s_en),
            ("B_en", &self.b_en),
            ("nu_en", &self.nu_en),
            ("Phi_bd0", &self.phi_bd0),
            ("Phi_bdL", &self.phi_bdl),
            ("p_ex", &self.p_ex),
        ]
        .into_iter()
        .filter_map(|(n, t)| t.as_ref().map(|t| (n, t)))
        .collect()
    }
}

/// Named shapes scaled by a common amplitude, optionally overridden by tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub shapes: Vec<ShapeTerm>,
    #[serde(default)]
    pub tables: ProfileTables,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self { amplitude: 0.0, shapes: vec![ShapeTerm { name: ShapeName::SwirlBump, weight: 1.0 }], tables: ProfileTables::default() }
    }
}

impl PerturbationSpec {
    pub fn single(name: ShapeName, amplitude: f64) -> Self {
        Self { amplitude, shapes: vec![ShapeTerm { name, weight: 1.0 }], tables: ProfileTables::default() }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { amplitude, ..self.clone() }
    }

    /// Field-path messages for every invalid entry, including incompatible tables.
    pub fn problems(&self, path: &str) -> Vec<String> {
        let mut out = Vec::new();
        if !self.amplitude.is_finite() {
            out.push(format!("{path}.amplitude: must be finite, got {}", self.amplitude));
        }
        for (k, term) in self.shapes.iter().enumerate() {
            if !term.weight.is_finite() {
                out.push(format!("{path}.shapes[{k}].weight: must be finite, got {}", term.weight));
            }
        }
        for (name, table) in self.tables.entries() {
            let at = format!("{path}.tables.{name}");
            if table.values.iter().any(|v| !v.is_finite()) || table.r.iter().any(|v| !v.is_finite()) {
                out.push(format!("{at}: entries must be finite"));
                continue;
            }
            if let Err(e) = table_profile(name, table) {
                out.push(format!("{at}: {e}"));
                continue;
            }
            if name == "nu_en" && table.values[0].abs() > 1e-12 {
                out.push(format!("{at}: swirl compatibility nu_en(0) = 0 violated: nu_en(0) = {}", table.values[0]));
            }
        }
        out
    }
}

/// Surrogate norms of the three data groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SigmaParts {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationInput {
    pub b_field: Field2D,
    pub b0: f64,
    pub s_en: RadialProfile,
    pub b_en: RadialProfile,
    pub nu_en: RadialProfile,
    pub phi_bd0: RadialProfile,
    pub phi_bdl: RadialProfile,
    pub p_ex: RadialProfile,
    /// Background exit pressure.
    pub p_l: f64,
    pub sigma: f64,
    pub parts: SigmaParts,
}

fn doping_shape(x: f64, r: f64, length: f64) -> f64 {
    let q = 1.0 - r * r;
    (PI * x / length).sin() * q * q
}

impl PerturbationInput {
    pub fn new(spec: &PerturbationSpec, bg: &BackgroundProfile, grid: Grid2D) -> Result<Self, PerturbationError> {
        let env = bg.env;
        let last = bg.exit_index();
        let exit = background_state(bg, last)?;
        let p_l = bg.gas.pressure(exit.rho, env.s0)?;
        let mut s_en = RadialProfile::constant(env.s0);
        let mut b_en = RadialProfile::constant(bg.b0);
        let mut nu_en = RadialProfile::constant(0.0);
        let phi_bd0 = RadialProfile::constant(bg.phi0[0]);
        let mut phi_bdl = RadialProfile::constant(bg.phi0[last]);
        let mut p_ex = RadialProfile::constant(p_l);
        let mut doping = 0.0;
        for term in &spec.shapes {
            let a = spec.amplitude * term.weight;
            match term.name {
                ShapeName::SwirlBump => nu_en.add_term(a, BumpShape::SwirlCubic),
                ShapeName::EntropyBump => s_en.add_term(a, BumpShape::Quartic),
                ShapeName::PressureBump => p_ex.add_term(a * p_l, BumpShape::Quartic),
                ShapeName::DopingBump => doping += a,
                ShapeName::BernoulliBump => b_en.add_term(a, BumpShape::Quartic),
                ShapeName::PotentialBump => phi_bdl.add_term(a, BumpShape::Quartic),
            }
        }
        let mut input = Self {
            b_field: Field2D::from_fn(grid, Parity::Even, |x, r| {
                env.b0 * (1.0 + doping * doping_shape(x, r, env.length))
            }),
            b0: env.b0,
            s_en,
            b_en,
            nu_en,
            phi_bd0,
            phi_bdl,
            p_ex,
            p_l,
            sigma: 0.0,
            parts: SigmaParts::default(),
        };
        for (name, table) in spec.tables.entries() {
            let profile = table_profile(name, table)?;
            match name {
                "S_en" => input.s_en = profile,
                "B_en" => input.b_en = profile,
                "nu_en" => input.nu_en = profile,
                "Phi_bd0" => input.phi_bd0 = profile,
                "Phi_bdL" => input.phi_bdl = profile,
                _ => input.p_ex = profile,
            }
        }
        input.check_compatibility()?;
        let base_phi_l = bg.phi0[last];
        let ds = doping_seminorms(env.length);
        input.parts = SigmaParts {
            omega1: env.b0 * doping.abs() * ds,
            omega2: c1_norm(&input.s_en, env.s0) + c1_norm(&input.b_en, bg.b0) + c1_norm(&input.nu_en, 0.0),
            omega3: c2_norm(&input.phi_bd0, bg.phi0[0]) + c2_norm(&input.phi_bdl, base_phi_l) + c1_norm(&input.p_ex, p_l),
        };
        input.sigma = input.parts.omega1 + input.parts.omega2 + input.parts.omega3;
        Ok(input)
    }

    /// Entrance pseudo-Bernoulli profile `B_en - Phi_bd(0, .)`.
    pub fn k_en(&self) -> RadialProfile {
        RadialProfile::Combination(vec![(1.0, self.b_en.clone()), (-1.0, self.phi_bd0.clone())])
    }

    pub fn entrance_profiles(&self) -> crate::transport::EntranceProfiles {
        crate::transport::EntranceProfiles { s_en: self.s_en.clone(), k_en: self.k_en(), nu_en: self.nu_en.clone() }
    }

    /// Checks `nu_en(0) = 0`, zero axis slopes of the even profiles and zero wall slope of
    /// the boundary potential. The swirl profile itself may have a nonzero axis slope: the
    /// transported quantity is `Lambda_en = r nu_en`, whose axis slope is `nu_en(0)`.
    pub fn check_compatibility(&self) -> Result<(), PerturbationError> {
        let mut problems = Vec::new();
        let nu0 = self.nu_en.eval(0.0);
        if nu0.abs() > 1e-12 {
            problems.push(format!("swirl compatibility nu_en(0) = 0 violated: nu_en(0) = {nu0}"));
        }
        for (name, p) in [
            ("S_en", &self.s_en),
            ("B_en", &self.b_en),
            ("Phi_bd0", &self.phi_bd0),
            ("Phi_bdL", &self.phi_bdl),
            ("p_ex", &self.p_ex),
        ] {
            let d = p.deriv(0.0);
            if d.abs() > 1e-10 {
                problems.push(format!("axis compatibility d_r {name}(0) = 0 violated: slope {d}"));
            }
        }
        for (name, p) in [("Phi_bd0", &self.phi_bd0), ("Phi_bdL", &self.phi_bdl)] {
            let d = p.deriv(1.0);
            if d.abs() > 1e-10 {
                problems.push(format!("corner compatibility d_r {name}(1) = 0 violated: slope {d}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PerturbationError::Compatibility(problems.join("; ")))
        }
    }
}

/// Monotone cubic through the table with the axis slope and the wall slope of the boundary
/// potentials pinned to zero, after checking that the data are compatible with that.
fn table_profile(name: &str, t: &ProfileTable) -> Result<RadialProfile, PerturbationError> {
    let wrap = |source| PerturbationError::Profile { name: name.to_string(), source };
    let profile = RadialProfile::table(t.r.clone(), t.values.clone()).map_err(wrap)?;
    let RadialProfile::Table(mut cubic) = profile else { unreachable!() };
    let n = t.r.len();
    let scale = 1.0
        + t.r
            .windows(2)
            .zip(t.values.windows(2))
            .map(|(r, v)| ((v[1] - v[0]) / (r[1] - r[0])).abs())
            .fold(0.0, f64::max);
    let one_sided = |a: usize, b: usize, c: usize| -> f64 {
        let (x0, x1, x2) = (t.r[a], t.r[b], t.r[c]);
        let (y0, y1, y2) = (t.values[a], t.values[b], t.values[c]);
        let (h1, h2) = (x1 - x0, x2 - x0);
        (y1 - y0) * h2 / (h1 * (h2 - h1)) - (y2 - y0) * h1 / (h2 * (h2 - h1))
    };
    let is_swirl = name == "nu_en";
    if n >= 3 && !is_swirl {
        let d0 = one_sided(0, 1, 2);
        if d0.abs() > TABLE_SLOPE_TOL * scale {
            return Err(PerturbationError::Compatibility(format!(
                "axis compatibility d_r {name}(0) = 0 violated by table: slope {d0}"
            )));
        }
        cubic.set_end_slopes(Some(0.0), None);
    }
    if n >= 3 && name.starts_with("Phi_bd") {
        let d1 = one_sided(n - 1, n - 2, n - 3);
        if d1.abs() > TABLE_SLOPE_TOL * scale {
            return Err(PerturbationError::Compatibility(format!(
                "corner compatibility d_r {name}(1) = 0 violated by table: slope {d1}"
            )));
        }
        cubic.set_end_slopes(None, Some(0.0));
    }
    Ok(RadialProfile::Table(cubic))
}

fn samples() -> impl Iterator<Item = f64> {
    (0..SIGMA_SAMPLES).map(|k| k as f64 / (SIGMA_SAMPLES - 1) as f64)
}

fn lipschitz(v: &[f64]) -> f64 {
    let h = 1.0 / (v.len() - 1) as f64;
    v.windows(2).fold(0.0, |m, w| m.max((w[1] - w[0]).abs() / h))
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `sup|f - base| + sup|f'| + Lip(f')`.
fn c1_norm(p: &RadialProfile, base: f64) -> f64 {
    let vals: Vec<f64> = samples().map(|r| p.eval(r) - base).collect();
    let d1: Vec<f64> = samples().map(|r| p.deriv(r)).collect();
    sup(&vals) + sup(&d1) + lipschitz(&d1)
}

/// `sup|f - base| + sup|f'| + sup|f''| + Lip(f'')`.
fn c2_norm(p: &RadialProfile, base: f64) -> f64 {
    let vals: Vec<f64> = samples().map(|r| p.eval(r) - base).collect();
    let d1: Vec<f64> = samples().map(|r| p.deriv(r)).collect();
    let d2: Vec<f64> = samples().map(|r| p.deriv2(r)).collect();
    sup(&vals) + sup(&d1) + sup(&d2) + lipschitz(&d2)
}

/// `sup + Lip` of the doping shape on the sampling grid.
fn doping_seminorms(length: f64) -> f64 {
    let n = SIGMA_SAMPLES;
    let hx = length / (n - 1) as f64;
    let hr = 1.0 / (n - 1) as f64;
    let f = |i: usize, j: usize| doping_shape(i as f64 * hx, j as f64 * hr, length);
    let mut s: f64 = 0.0;
    let mut lip: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = f(i, j);
            s = s.max(v.abs());
            if i + 1 < n {
                lip = lip.max((f(i + 1, j) - v).abs() / hx);
            }
            if j + 1 < n {
                lip = lip.max((f(i, j + 1) - v).abs() / hr);
            }
        }
    }
    s + lip
}
