//! Nested fixed-point iteration: an inner Picard loop for the elliptic unknowns at frozen
//! transported data, and an outer loop that refreshes `W = (S, K, Lambda)` by transport along
//! the current mass flux.

use crate::assembler::{
    assemble_f2, assemble_f_f1, assemble_g, assemble_m, boundary_psi, reconstruct_velocity, AssemblyError, BaseFlow,
    FlowIterate, Potentials,
};
use crate::background::{solve_background_on_grid, BackgroundError, EntranceEnv};
use crate::elliptic::{EllipticError, LinearMethod, PairRhs, PairSolver};
use crate::grid::{ddr, Field2D, Grid2D, GridError, Parity};
use crate::linear::SolveOptions;
use crate::perturbation::{PerturbationError, PerturbationInput, PerturbationSpec, SigmaParts};
use crate::swirl::{axis_diagnostics, AxisDiagnostics, SwirlForm, SwirlSolver};
use crate::thermo::GasParams;
use crate::transport::{build_stream_map, transport_solve, EntranceProfiles, TransportError, TransportedFields, SLOPE_WARNING};
use crate::verify::{residuals, PrimitiveState, ResidualReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Axis values of `f2` above this are reported before being removed.
const AXIS_F2_WARNING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub nx: usize,
    pub nr: usize,
    pub tol_inner: f64,
    pub tol_outer: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub relax_inner: f64,
    pub relax_outer: f64,
    pub linear_tol: f64,
    pub linear_method: LinearMethod,
    pub swirl_form: SwirlForm,
    /// Smallest admissible axial velocity.
    pub min_axial_velocity: f64,
    /// Smallest admissible `(c^2 - |u|^2) / c^2`.
    pub min_subsonic_margin: f64,
    /// Update size treated as divergence.
    pub divergence_limit: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            nx: 129,
            nr: 65,
            tol_inner: 1e-11,
            tol_outer: 1e-10,
            max_inner: 200,
            max_outer: 200,
            relax_inner: 0.7,
            relax_outer: 0.7,
            linear_tol: 1e-10,
            linear_method: LinearMethod::Separable,
            swirl_form: SwirlForm::Lifted,
            min_axial_velocity: 1e-3,
            min_subsonic_margin: 1e-3,
            divergence_limit: 1e2,
        }
    }
}

impl SolveConfig {
    pub fn with_grid(&self, nx: usize, nr: usize) -> Self {
        Self { nx, nr, ..self.clone() }
    }

    /// Field-path messages for every invalid entry.
    pub fn problems(&self, path: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.nx < 9 {
            out.push(format!("{path}.nx: must be at least 9, got {}", self.nx));
        }
        if self.nr < 9 {
            out.push(format!("{path}.nr: must be at least 9, got {}", self.nr));
        }
        for (name, v) in [
            ("tol_inner", self.tol_inner),
            ("tol_outer", self.tol_outer),
            ("linear_tol", self.linear_tol),
            ("divergence_limit", self.divergence_limit),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{path}.{name}: must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("relax_inner", self.relax_inner), ("relax_outer", self.relax_outer)] {
            if !(v > 0.0 && v <= 1.0) {
                out.push(format!("{path}.{name}: must lie in (0, 1], got {v}"));
            }
        }
        for (name, v) in [("max_inner", self.max_inner), ("max_outer", self.max_outer)] {
            if v == 0 {
                out.push(format!("{path}.{name}: must be at least 1"));
            }
        }
        if !(self.min_axial_velocity >= 0.0) {
            out.push(format!("{path}.min_axial_velocity: must be non-negative, got {}", self.min_axial_velocity));
        }
        if !(self.min_subsonic_margin >= 0.0 && self.min_subsonic_margin < 1.0) {
            out.push(format!("{path}.min_subsonic_margin: must lie in [0, 1), got {}", self.min_subsonic_margin));
        }
        out
    }

    fn linear_options(&self) -> SolveOptions {
        SolveOptions { tol: self.linear_tol, ..SolveOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum InitialGuess {
    /// Uniform `W0 = (S0, K0, 0)` and zero potentials.
    #[default]
    Background,
    /// Smooth random state of size `radius` around the background.
    Perturbed { seed: u64, radius: f64 },
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Background(#[from] BackgroundError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FailureReason {
    Vacuum { x: f64, r: f64 },
    SubsonicityLost { x: f64, r: f64, margin: f64 },
    AxialVelocity { x: f64, r: f64, ux: f64 },
    NonPositiveFlux { min_mx: f64 },
    NonFinite,
    Diverging { update: f64 },
    NotConverged { iterations: usize, update: f64 },
    Transport { message: String },
    Linear { message: String },
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureReason::Vacuum { x, r } => write!(f, "vacuum at x = {x}, r = {r}"),
            FailureReason::SubsonicityLost { x, r, margin } => {
                write!(f, "subsonicity lost at x = {x}, r = {r} (margin {margin})")
            }
            FailureReason::AxialVelocity { x, r, ux } => write!(f, "axial velocity {ux} too small at x = {x}, r = {r}"),
            FailureReason::NonPositiveFlux { min_mx } => write!(f, "axial mass flux not positive (min {min_mx})"),
            FailureReason::NonFinite => write!(f, "non-finite values in the iterate"),
            FailureReason::Diverging { update } => write!(f, "iteration diverging (update {update:e})"),
            FailureReason::NotConverged { iterations, update } => {
                write!(f, "not converged after {iterations} iterations (update {update:e})")
            }
            FailureReason::Transport { message } => write!(f, "transport failed: {message}"),
            FailureReason::Linear { message } => write!(f, "linear solve failed: {message}"),
        }
    }
}

/// Per-outer-iteration record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: usize,
    /// Sup-norm change of `(S, K, Lambda)` produced by the transport step.
    pub update: f64,
    pub inner_iterations: usize,
    pub inner_update: f64,
    /// Size of `W - W0` and its radial derivatives.
    pub delta1: f64,
    /// Size of `Psi`, `phi` and the gradient of `phi`.
    pub delta2: f64,
    /// Size of `psi` and its velocity contributions.
    pub delta3: f64,
    /// `max |M - J0 e_x|`.
    pub momentum_deviation: f64,
    pub div_defect: f64,
    pub max_clamp: f64,
    pub max_slope: f64,
}

/// Sup-norm distances from the background state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ErrorNorms {
    pub rho: f64,
    pub ux: f64,
    pub ur: f64,
    pub utheta: f64,
    pub s: f64,
    pub k: f64,
    pub phi: f64,
    /// Maximum over `rho, ux, ur, utheta, S, Phi`.
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub status: String,
    pub nx: usize,
    pub nr: usize,
    pub sigma: f64,
    pub sigma_parts: SigmaParts,
    pub outer_iterations: usize,
    pub inner_iterations_total: usize,
    pub outer_history: Vec<OuterRecord>,
    /// Inner update norms, one list per outer iteration followed by the final inner solve.
    pub inner_history: Vec<Vec<f64>>,
    pub error_vs_background: ErrorNorms,
    pub residuals: Option<ResidualReport>,
    pub axis: Option<AxisDiagnostics>,
    pub max_f2_axis_removed: f64,
    pub min_subsonic_margin: f64,
    pub min_axial_velocity: f64,
    pub max_clamp: f64,
    pub div_defect: f64,
    pub warnings: Vec<String>,
    pub flags: Vec<String>,
}

impl SolveReport {
    fn empty(cfg: &SolveConfig, pert: &PerturbationInput) -> Self {
        Self {
            converged: false,
            status: "running".into(),
            nx: cfg.nx,
            nr: cfg.nr,
            sigma: pert.sigma,
            sigma_parts: pert.parts,
            outer_iterations: 0,
            inner_iterations_total: 0,
            outer_history: Vec::new(),
            inner_history: Vec::new(),
            error_vs_background: ErrorNorms::default(),
            residuals: None,
            axis: None,
            max_f2_axis_removed: 0.0,
            min_subsonic_margin: f64::INFINITY,
            min_axial_velocity: f64::INFINITY,
            max_clamp: 0.0,
            div_defect: 0.0,
            warnings: Vec::new(),
            flags: Vec::new(),
        }
    }

    fn warn(&mut self, msg: String) {
        if !self.warnings.contains(&msg) {
            self.warnings.push(msg);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{reason}")]
pub struct SolveFailure {
    pub reason: FailureReason,
    pub report: Box<SolveReport>,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Failed(#[from] SolveFailure),
}

/// Everything that stays fixed during one solve.
#[derive(Debug, Clone)]
pub struct SolverContext {
    pub cfg: SolveConfig,
    pub base: BaseFlow,
    pub pert: PerturbationInput,
    pub entrance: EntranceProfiles,
    pair: PairSolver,
    swirl: SwirlSolver,
    psi_bd0: Vec<f64>,
    psi_bdl: Vec<f64>,
}

impl SolverContext {
    pub fn new(env: &EntranceEnv, gas: &GasParams, spec: &PerturbationSpec, cfg: &SolveConfig) -> Result<Self, SetupError> {
        let problems = cfg.problems("solver");
        if !problems.is_empty() {
            return Err(SetupError::Config(problems.join("; ")));
        }
        let grid = Grid2D::new(cfg.nx, cfg.nr, env.length)?;
        let bg = solve_background_on_grid(env, gas, cfg.nx)?;
        let pert = PerturbationInput::new(spec, &bg, grid)?;
        let base = BaseFlow::new(bg, grid)?;
        let pair = PairSolver::new(grid, &base.coeffs, cfg.linear_method, cfg.linear_options())?;
        let swirl = SwirlSolver::new(grid, cfg.swirl_form, cfg.linear_method, cfg.linear_options())?;
        let (psi_bd0, psi_bdl) = boundary_psi(&base, &pert);
        let entrance = pert.entrance_profiles();
        Ok(Self { cfg: cfg.clone(), base, pert, entrance, pair, swirl, psi_bd0, psi_bdl })
    }

    /// Same grid, background and factorizations with different perturbation data.
    pub fn with_perturbation(&self, spec: &PerturbationSpec) -> Result<Self, SetupError> {
        let pert = PerturbationInput::new(spec, &self.base.bg, self.base.grid)?;
        let (psi_bd0, psi_bdl) = boundary_psi(&self.base, &pert);
        let entrance = pert.entrance_profiles();
        Ok(Self { pert, entrance, psi_bd0, psi_bdl, ..self.clone() })
    }

    pub fn grid(&self) -> Grid2D {
        self.base.grid
    }

    pub fn uniform_w(&self) -> TransportedFields {
        TransportedFields::uniform(self.grid(), self.base.s0(), self.base.k0())
    }
}

/// Result of one inner solve.
#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub iterate: FlowIterate,
    pub history: Vec<f64>,
    pub max_f2_axis: f64,
}

fn node_failure(ctx: &SolverContext, it: &FlowIterate, report: &mut SolveReport) -> Option<FailureReason> {
    let g = ctx.grid();
    let gas = &ctx.base.bg.gas;
    let mut min_margin = f64::INFINITY;
    let mut min_ux = f64::INFINITY;
    let mut worst = None;
    for i in 0..g.nx {
        for j in 0..g.nr {
            let rho = it.rho.get(i, j);
            let ux = it.ux.get(i, j);
            let q2 = it.q_sq.get(i, j);
            if !(rho.is_finite() && ux.is_finite() && q2.is_finite()) {
                return Some(FailureReason::NonFinite);
            }
            let c2 = gas.sound_speed_sq(rho, it.w.s.get(i, j)).unwrap_or(0.0);
            let margin = if c2 > 0.0 { (c2 - q2) / c2 } else { f64::NEG_INFINITY };
            if margin < min_margin {
                min_margin = margin;
                if margin <= ctx.cfg.min_subsonic_margin {
                    worst = Some(FailureReason::SubsonicityLost { x: g.x(i), r: g.r(j), margin });
                }
            }
            if ux < min_ux {
                min_ux = ux;
                if ux <= ctx.cfg.min_axial_velocity {
                    worst = Some(FailureReason::AxialVelocity { x: g.x(i), r: g.r(j), ux });
                }
            }
        }
    }
    report.min_subsonic_margin = min_margin;
    report.min_axial_velocity = min_ux;
    worst
}

fn fail(reason: FailureReason, mut report: SolveReport) -> SolveFailure {
    report.converged = false;
    report.status = reason.to_string();
    SolveFailure { reason, report: Box::new(report) }
}

fn assembly_reason(e: AssemblyError) -> FailureReason {
    match e {
        AssemblyError::Vacuum { x, r } => FailureReason::Vacuum { x, r },
        other => FailureReason::Linear { message: other.to_string() },
    }
}

/// Picard iteration for `(Psi, phi, psi)` at frozen `W`.
pub fn inner_solve(
    ctx: &SolverContext,
    w: &TransportedFields,
    start: Potentials,
    report: &mut SolveReport,
) -> Result<InnerOutcome, FailureReason> {
    let cfg = &ctx.cfg;
    let mut pot = start;
    let mut history = Vec::new();
    let mut max_f2_axis: f64 = 0.0;
    let mut growth = 0;
    for _ in 0..cfg.max_inner {
        let it = reconstruct_velocity(&ctx.base, &pot, w).map_err(assembly_reason)?;
        if let Some(reason) = node_failure(ctx, &it, report) {
            return Err(reason);
        }
        let (fx, fr, f1) = assemble_f_f1(&ctx.base, &it, &ctx.pert);
        let g_exit = assemble_g(&ctx.base, &it, &ctx.pert);
        let (f2, axis) = assemble_f2(&ctx.base, &it);
        max_f2_axis = max_f2_axis.max(axis);
        let rhs = PairRhs { fx, fr, f1, g_exit, psi_bd0: ctx.psi_bd0.clone(), psi_bdl: ctx.psi_bdl.clone() };
        let (psi_pert, phi) = ctx.pair.solve(&rhs).map_err(|e| FailureReason::Linear { message: e.to_string() })?;
        let swirl = ctx.swirl.solve(&f2).map_err(|e| FailureReason::Linear { message: e.to_string() })?;
        let target = Potentials { psi_pert, phi, psi: swirl.psi };
        let update = pot.distance(&target);
        pot = pot.relax_towards(&target, cfg.relax_inner);
        history.push(update);
        report.inner_iterations_total += 1;
        if !update.is_finite() {
            return Err(FailureReason::NonFinite);
        }
        if update > cfg.divergence_limit {
            return Err(FailureReason::Diverging { update });
        }
        if history.len() > 1 && update > history[history.len() - 2] {
            growth += 1;
            if growth >= 10 {
                return Err(FailureReason::Diverging { update });
            }
        } else {
            growth = 0;
        }
        if update <= cfg.tol_inner {
            let iterate = reconstruct_velocity(&ctx.base, &pot, w).map_err(assembly_reason)?;
            if let Some(reason) = node_failure(ctx, &iterate, report) {
                return Err(reason);
            }
            return Ok(InnerOutcome { iterate, history, max_f2_axis });
        }
    }
    let update = history.last().copied().unwrap_or(f64::NAN);
    Err(FailureReason::NotConverged { iterations: cfg.max_inner, update })
}

/// Converged flow state with its report.
#[derive(Debug, Clone)]
pub struct Solution {
    pub base: BaseFlow,
    pub iterate: FlowIterate,
    pub b_field: Field2D,
    pub report: SolveReport,
}

impl Solution {
    pub fn grid(&self) -> Grid2D {
        self.base.grid
    }

    pub fn primitive(&self) -> PrimitiveState {
        PrimitiveState::from_iterate(&self.base, &self.iterate)
    }
}

fn random_guess(ctx: &SolverContext, seed: u64, radius: f64) -> (TransportedFields, Potentials) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = [0.0f64; 9];
    for v in c.iter_mut() {
        *v = rng.gen_range(-1.0..=1.0) * radius;
    }
    let g = ctx.grid();
    let l = g.length;
    let (s0, k0) = (ctx.base.s0(), ctx.base.k0());
    let q = |r: f64| (1.0 - r * r).powi(2);
    let dq = |r: f64| -4.0 * r * (1.0 - r * r);
    let ramp = |x: f64| 1.0 + 0.5 * x / l;
    let w = TransportedFields {
        s: Field2D::from_fn(g, Parity::Even, |x, r| s0 + c[0] * q(r) * ramp(x)),
        k: Field2D::from_fn(g, Parity::Even, |x, r| k0 + c[1] * q(r) * ramp(x)),
        lambda: Field2D::from_fn(g, Parity::Even, |x, r| c[2] * r * r * (1.0 - r * r) * ramp(x)),
        v: Field2D::from_fn(g, Parity::Odd, |x, r| c[2] * r * (1.0 - r * r) * ramp(x)),
        ds_dr: Field2D::from_fn(g, Parity::Odd, |x, r| c[0] * dq(r) * ramp(x)),
        dk_dr: Field2D::from_fn(g, Parity::Odd, |x, r| c[1] * dq(r) * ramp(x)),
        dlambda_dr: Field2D::from_fn(g, Parity::Odd, |x, r| c[2] * (2.0 * r - 4.0 * r.powi(3)) * ramp(x)),
    };
    let pot = Potentials {
        psi_pert: Field2D::from_fn(g, Parity::Even, |x, r| c[3] * q(r) * (PI * x / l).sin() + c[4] * x / l),
        phi: Field2D::from_fn(g, Parity::Even, |x, r| c[5] * x / l * q(r) + c[6] * x / l),
        psi: Field2D::from_fn(g, Parity::Odd, |x, r| c[7] * r * (1.0 - r * r) * (1.0 + c[8] * (PI * x / l).cos())),
    };
    (w, pot)
}

fn r_derivs_norm(w: &TransportedFields) -> f64 {
    w.ds_dr.max_abs().max(w.dk_dr.max_abs()).max(w.dlambda_dr.max_abs())
}

fn monitors(ctx: &SolverContext, it: &FlowIterate) -> (f64, f64, f64) {
    let (s0, k0) = (ctx.base.s0(), ctx.base.k0());
    let w = &it.w;
    let dev = |f: &Field2D, c: f64| f.values().iter().fold(0.0f64, |m, v| m.max((v - c).abs()));
    let delta1 = dev(&w.s, s0).max(dev(&w.k, k0)).max(w.lambda.max_abs()) + r_derivs_norm(w);
    let p = &it.pot;
    let delta2 = p.psi_pert.max_abs() + p.phi.max_abs() + it.dphi_dx.max_abs().max(it.dphi_dr.max_abs());
    let delta3 = p.psi.max_abs() + it.tx.max_abs().max(it.tr.max_abs()) + ddr(&p.psi).max_abs();
    (delta1, delta2, delta3)
}

pub fn error_vs_background(base: &BaseFlow, it: &FlowIterate) -> ErrorNorms {
    let g = base.grid;
    let mut e = ErrorNorms::default();
    let (s0, k0) = (base.s0(), base.k0());
    for i in 0..g.nx {
        for j in 0..g.nr {
            e.rho = e.rho.max((it.rho.get(i, j) - base.bg.rho_bar[i]).abs());
            e.ux = e.ux.max((it.ux.get(i, j) - base.bg.u_bar[i]).abs());
            e.ur = e.ur.max(it.ur.get(i, j).abs());
            e.utheta = e.utheta.max(it.utheta.get(i, j).abs());
            e.s = e.s.max((it.w.s.get(i, j) - s0).abs());
            e.k = e.k.max((it.w.k.get(i, j) - k0).abs());
            e.phi = e.phi.max(it.pot.psi_pert.get(i, j).abs());
        }
    }
    e.max = [e.rho, e.ux, e.ur, e.utheta, e.s, e.phi].into_iter().fold(0.0, f64::max);
    e
}

fn momentum_deviation(m: &crate::transport::MeridionalMomentum, j0: f64) -> f64 {
    let a = m.mx.values().iter().fold(0.0f64, |acc, v| acc.max((v - j0).abs()));
    a.max(m.mr.max_abs())
}

/// Outer iteration from the given initial guess.
pub fn outer_solve(ctx: &SolverContext, guess: InitialGuess) -> Result<Solution, SolveFailure> {
    let cfg = &ctx.cfg;
    let mut report = SolveReport::empty(cfg, &ctx.pert);
    let (mut w, mut pot) = match guess {
        InitialGuess::Background => (ctx.uniform_w(), Potentials::zeros(ctx.grid())),
        InitialGuess::Perturbed { seed, radius } => random_guess(ctx, seed, radius),
    };
    let mut converged = false;
    let mut last_update = f64::NAN;
    for k in 1..=cfg.max_outer {
        let inner = match inner_solve(ctx, &w, pot.clone(), &mut report) {
            Ok(v) => v,
            Err(reason) => return Err(fail(reason, report)),
        };
        report.max_f2_axis_removed = report.max_f2_axis_removed.max(inner.max_f2_axis);
        let m = assemble_m(&inner.iterate);
        if !(m.nu_star > 0.0) {
            return Err(fail(FailureReason::NonPositiveFlux { min_mx: m.nu_star }, report));
        }
        let map = match build_stream_map(&m) {
            Ok(map) => map,
            Err(e) => return Err(fail(transport_reason(e), report)),
        };
        let w_new = transport_solve(&map, &ctx.entrance);
        let update = w.distance(&w_new);
        let (delta1, delta2, delta3) = monitors(ctx, &inner.iterate);
        let slope = m.max_slope();
        report.outer_history.push(OuterRecord {
            iteration: k,
            update,
            inner_iterations: inner.history.len(),
            inner_update: inner.history.last().copied().unwrap_or(0.0),
            delta1,
            delta2,
            delta3,
            momentum_deviation: momentum_deviation(&m, ctx.base.bg.env.j0),
            div_defect: m.div_defect,
            max_clamp: map.max_clamp,
            max_slope: slope,
        });
        report.inner_history.push(inner.history);
        report.outer_iterations = k;
        report.max_clamp = report.max_clamp.max(map.max_clamp);
        report.div_defect = m.div_defect;
        if slope > SLOPE_WARNING {
            report.warn(format!("streamline slope max |Mr/Mx| = {slope:.3e} exceeds {SLOPE_WARNING}"));
        }
        if !update.is_finite() {
            return Err(fail(FailureReason::NonFinite, report));
        }
        if update > cfg.divergence_limit {
            return Err(fail(FailureReason::Diverging { update }, report));
        }
        w = w.relax_towards(&w_new, cfg.relax_outer);
        pot = inner.iterate.pot;
        last_update = update;
        if update <= cfg.tol_outer {
            converged = true;
            break;
        }
    }
    if !converged {
        let reason = FailureReason::NotConverged { iterations: cfg.max_outer, update: last_update };
        return Err(fail(reason, report));
    }
    let last = match inner_solve(ctx, &w, pot, &mut report) {
        Ok(v) => v,
        Err(reason) => return Err(fail(reason, report)),
    };
    report.max_f2_axis_removed = report.max_f2_axis_removed.max(last.max_f2_axis);
    report.inner_history.push(last.history);
    let iterate = last.iterate;
    finish_report(ctx, &iterate, &mut report);
    Ok(Solution { base: ctx.base.clone(), iterate, b_field: ctx.pert.b_field.clone(), report })
}

fn transport_reason(e: TransportError) -> FailureReason {
    match e {
        TransportError::NonPositiveFlux(v) => FailureReason::NonPositiveFlux { min_mx: v },
        other => FailureReason::Transport { message: other.to_string() },
    }
}

fn finish_report(ctx: &SolverContext, it: &FlowIterate, report: &mut SolveReport) {
    report.converged = true;
    report.status = "converged".into();
    report.error_vs_background = error_vs_background(&ctx.base, it);
    report.axis = Some(axis_diagnostics(&it.pot.psi));
    let state = PrimitiveState::from_iterate(&ctx.base, it);
    report.residuals = Some(residuals(&state, &ctx.base.bg, &ctx.pert.b_field));
    if report.max_f2_axis_removed > AXIS_F2_WARNING {
        report.warn(format!("swirl source had axis values up to {:.3e} before enforcement", report.max_f2_axis_removed));
    }
    if report.max_clamp > 1e-12 {
        report.warn(format!("stream function clamped into the entrance range by up to {:.3e}", report.max_clamp));
    }
    let updates: Vec<f64> = report.outer_history.iter().map(|r| r.update).collect();
    if updates.len() > 3
        && updates.windows(2).skip(2).any(|w| w[1] > w[0] * (1.0 + 1e-6) + 1e-14)
    {
        report.flags.push("outer update history is not monotone".into());
    }
}

/// Background, setup and outer iteration in one call.
pub fn solve(
    env: &EntranceEnv,
    gas: &GasParams,
    spec: &PerturbationSpec,
    cfg: &SolveConfig,
    guess: InitialGuess,
) -> Result<Solution, SolveError> {
    let ctx = SolverContext::new(env, gas, spec, cfg)?;
    Ok(outer_solve(&ctx, guess)?)
}
