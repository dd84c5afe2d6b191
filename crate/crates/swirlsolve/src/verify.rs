//! Independent checks of a computed flow: residuals of the steady equations, conservation
//! along traced streamlines, a sweep over the perturbation size and grid-convergence studies.

use crate::assembler::{BaseFlow, FlowIterate};
use crate::background::{solve_background_on_grid, BackgroundProfile, EntranceEnv};
use crate::elliptic::{build_coefficients, PairRhs, PairSolver};
use crate::grid::{bilinear, interp_column, Field2D, Grid2D, GridError, Parity};
use crate::iteration::{outer_solve, InitialGuess, SetupError, SolveConfig, SolveFailure, SolverContext};
use crate::linear::SolveOptions;
use crate::perturbation::PerturbationSpec;
use crate::swirl::{SwirlForm, SwirlSolver};
use crate::thermo::GasParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Primitive flow fields on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveState {
    pub grid: Grid2D,
    pub rho: Field2D,
    pub ux: Field2D,
    pub ur: Field2D,
    pub utheta: Field2D,
    pub s: Field2D,
    pub k: Field2D,
    pub lambda: Field2D,
    /// Total electric potential.
    pub phi: Field2D,
}

impl PrimitiveState {
    pub fn from_iterate(base: &BaseFlow, it: &FlowIterate) -> Self {
        Self {
            grid: base.grid,
            rho: it.rho.clone(),
            ux: it.ux.clone(),
            ur: it.ur.clone(),
            utheta: it.utheta.clone(),
            s: it.w.s.clone(),
            k: it.w.k.clone(),
            lambda: it.w.lambda.clone(),
            phi: it.phi_total(base),
        }
    }
}

/// Sup and root-mean-square of one residual over the interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EquationResidual {
    pub sup: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ResidualReport {
    pub nx: usize,
    pub nr: usize,
    /// Wall time of the evaluation; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub runtime: Duration,
    pub mass: EquationResidual,
    pub x_momentum: EquationResidual,
    pub r_momentum: EquationResidual,
    pub swirl: EquationResidual,
    pub entropy: EquationResidual,
    pub poisson: EquationResidual,
}

impl ResidualReport {
    pub fn entries(&self) -> [(&'static str, EquationResidual); 6] {
        [
            ("mass", self.mass),
            ("x_momentum", self.x_momentum),
            ("r_momentum", self.r_momentum),
            ("swirl", self.swirl),
            ("entropy", self.entropy),
            ("poisson", self.poisson),
        ]
    }

    pub fn max_sup(&self) -> f64 {
        self.entries().iter().fold(0.0, |m, (_, e)| m.max(e.sup))
    }
}

#[derive(Default)]
struct Accum {
    sup: f64,
    sq: f64,
    n: usize,
}

impl Accum {
    fn push(&mut self, v: f64) {
        self.sup = self.sup.max(v.abs());
        self.sq += v * v;
        self.n += 1;
    }

    fn finish(&self) -> EquationResidual {
        EquationResidual { sup: self.sup, rms: if self.n > 0 { (self.sq / self.n as f64).sqrt() } else { 0.0 } }
    }
}

/// Fourth-order centered differences with parity ghosts across the axis.
struct Stencil<'a> {
    f: &'a Field2D,
    sign: f64,
}

impl Stencil<'_> {
    fn new(f: &Field2D) -> Stencil<'_> {
        let sign = match f.parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        Stencil { f, sign }
    }

    fn at(&self, i: usize, j: isize) -> f64 {
        if j < 0 {
            self.sign * self.f.get(i, (-j) as usize)
        } else {
            self.f.get(i, j as usize)
        }
    }

    fn dx(&self, i: usize, j: usize, h: f64) -> f64 {
        let j = j as isize;
        (self.at(i - 2, j) - 8.0 * self.at(i - 1, j) + 8.0 * self.at(i + 1, j) - self.at(i + 2, j)) / (12.0 * h)
    }

    fn dxx(&self, i: usize, j: usize, h: f64) -> f64 {
        let j = j as isize;
        (-self.at(i - 2, j) + 16.0 * self.at(i - 1, j) - 30.0 * self.at(i, j) + 16.0 * self.at(i + 1, j)
            - self.at(i + 2, j))
            / (12.0 * h * h)
    }

    fn dr(&self, i: usize, j: usize, h: f64) -> f64 {
        let j = j as isize;
        (self.at(i, j - 2) - 8.0 * self.at(i, j - 1) + 8.0 * self.at(i, j + 1) - self.at(i, j + 2)) / (12.0 * h)
    }

    fn drr(&self, i: usize, j: usize, h: f64) -> f64 {
        let j = j as isize;
        (-self.at(i, j - 2) + 16.0 * self.at(i, j - 1) - 30.0 * self.at(i, j) + 16.0 * self.at(i, j + 1)
            - self.at(i, j + 2))
            / (12.0 * h * h)
    }
}

/// Nodes where the residuals are evaluated: two nodes in from the ends and the wall, one from
/// the axis.
pub fn residual_nodes(g: Grid2D) -> impl Iterator<Item = (usize, usize)> {
    (2..g.nx.saturating_sub(2)).flat_map(move |i| (1..g.nr.saturating_sub(2)).map(move |j| (i, j)))
}

/// Pointwise residuals of mass, both meridional momenta, swirl transport, entropy transport and
/// Poisson, in that order, by fourth-order centered differences. Nodes outside
/// [`residual_nodes`] are zero. The `x`-derivatives of the background parts of `rho, ux, p, Phi`
/// come from the background ODE; only the deviations are differenced.
pub fn residual_fields(state: &PrimitiveState, bg: &BackgroundProfile, b: &Field2D) -> [Field2D; 6] {
    let g = state.grid;
    let gas = &bg.gas;
    let s0 = bg.env.s0;
    let (hx, hr) = (g.hx(), g.hr());
    let mut p_dev = Field2D::zeros(g, Parity::Even);
    let mut ux_dev = Field2D::zeros(g, Parity::Even);
    let mut phi_dev = Field2D::zeros(g, Parity::Even);
    let mut flux_x = Field2D::zeros(g, Parity::Even);
    let mut flux_r = Field2D::zeros(g, Parity::Even);
    for i in 0..g.nx {
        let p_bar = gas.pressure(bg.rho_bar[i], s0).unwrap_or(f64::NAN);
        for j in 0..g.nr {
            let rho = state.rho.get(i, j);
            let p = gas.pressure(rho, state.s.get(i, j)).unwrap_or(f64::NAN);
            p_dev.set(i, j, p - p_bar);
            ux_dev.set(i, j, state.ux.get(i, j) - bg.u_bar[i]);
            phi_dev.set(i, j, state.phi.get(i, j) - bg.phi0[i]);
            flux_x.set(i, j, rho * state.ux.get(i, j));
            flux_r.set(i, j, g.r(j) * rho * state.ur.get(i, j));
        }
    }
    let (sp, sux, sphi) = (Stencil::new(&p_dev), Stencil::new(&ux_dev), Stencil::new(&phi_dev));
    let (sfx, sfr) = (Stencil::new(&flux_x), Stencil::new(&flux_r));
    let (sur, slam, ss) = (Stencil::new(&state.ur), Stencil::new(&state.lambda), Stencil::new(&state.s));
    let mut out: [Field2D; 6] = std::array::from_fn(|_| Field2D::zeros(g, Parity::Even));
    for (i, j) in residual_nodes(g) {
        let rb = bg.rho_bar[i];
        let c2_bar = gas.sound_speed_sq(rb, s0).unwrap_or(f64::NAN);
        let dp_bar = c2_bar * bg.drho_dx(i);
        let r = g.r(j);
        let rho = state.rho.get(i, j);
        let (vx, vr, vt) = (state.ux.get(i, j), state.ur.get(i, j), state.utheta.get(i, j));
        let mass = r * sfx.dx(i, j, hx) + sfr.dr(i, j, hr);
        let dux_dx = bg.du_dx(i) + sux.dx(i, j, hx);
        let dp_dx = dp_bar + sp.dx(i, j, hx);
        let dphi_dx = bg.e_bar[i] + sphi.dx(i, j, hx);
        let xm = rho * (vx * dux_dx + vr * sux.dr(i, j, hr)) + dp_dx - rho * dphi_dx;
        let rm = rho * (vx * sur.dx(i, j, hx) + vr * sur.dr(i, j, hr)) - rho * vt * vt / r + sp.dr(i, j, hr)
            - rho * sphi.dr(i, j, hr);
        let swirl = rho * (vx * slam.dx(i, j, hx) + vr * slam.dr(i, j, hr));
        let entropy = rho * (vx * ss.dx(i, j, hx) + vr * ss.dr(i, j, hr));
        let lap = bg.d2phi0_dx2(i) + sphi.dxx(i, j, hx) + sphi.drr(i, j, hr) + sphi.dr(i, j, hr) / r;
        for (k, v) in [mass, xm, rm, swirl, entropy, lap - rho + b.get(i, j)].into_iter().enumerate() {
            out[k].set(i, j, v);
        }
    }
    out
}

pub fn residuals(state: &PrimitiveState, bg: &BackgroundProfile, b: &Field2D) -> ResidualReport {
    residuals_at(state, bg, b, residual_nodes(state.grid))
}

/// Residuals restricted to the nodes shared with a grid coarsened `stride` times in each
/// direction, where that grid would evaluate them. Nested refinements then compare the same
/// physical points.
pub fn residuals_nested(state: &PrimitiveState, bg: &BackgroundProfile, b: &Field2D, stride: usize) -> ResidualReport {
    let g = state.grid;
    let coarse = Grid2D { nx: (g.nx - 1) / stride + 1, nr: (g.nr - 1) / stride + 1, ..g };
    residuals_at(state, bg, b, residual_nodes(coarse).map(|(i, j)| (i * stride, j * stride)))
}

fn residuals_at(
    state: &PrimitiveState,
    bg: &BackgroundProfile,
    b: &Field2D,
    nodes: impl Iterator<Item = (usize, usize)>,
) -> ResidualReport {
    let start = Instant::now();
    let fields = residual_fields(state, bg, b);
    let mut acc: [Accum; 6] = Default::default();
    for (i, j) in nodes {
        for (a, f) in acc.iter_mut().zip(&fields) {
            a.push(f.get(i, j));
        }
    }
    ResidualReport {
        nx: state.grid.nx,
        nr: state.grid.nr,
        runtime: start.elapsed(),
        mass: acc[0].finish(),
        x_momentum: acc[1].finish(),
        r_momentum: acc[2].finish(),
        swirl: acc[3].finish(),
        entropy: acc[4].finish(),
        poisson: acc[5].finish(),
    }
}

/// Variations of the transported quantities along one traced streamline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamlineSample {
    pub r_entrance: f64,
    pub r_exit: f64,
    pub var_s: f64,
    pub var_k: f64,
    pub var_lambda: f64,
    pub var_bernoulli: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamlineReport {
    pub lines: Vec<StreamlineSample>,
    pub max_var_s: f64,
    pub max_var_k: f64,
    pub max_var_lambda: f64,
    pub max_var_bernoulli: f64,
}

/// Traces `n_lines` streamlines from evenly spaced entrance radii by RK4 on `dr/dx = ur/ux`
/// and records the spread of `S`, `K`, `Lambda` and the Bernoulli function along each.
/// `K` and the Bernoulli function are recomputed from `rho`, `u`, `S` and `Phi`.
pub fn streamline_conservation(state: &PrimitiveState, gas: &GasParams, n_lines: usize) -> Result<StreamlineReport, GridError> {
    let g = state.grid;
    let hx = g.hx();
    let bern = Field2D::from_values(
        g,
        Parity::Even,
        (0..g.len())
            .map(|n| {
                let (vx, vr, vt) = (state.ux.values()[n], state.ur.values()[n], state.utheta.values()[n]);
                gas.bernoulli(state.rho.values()[n], vx * vx + vr * vr + vt * vt, state.s.values()[n])
                    .unwrap_or(f64::NAN)
            })
            .collect(),
    )?;
    let kfield = bern.zip_map(&state.phi, Parity::Even, |b, p| b - p);
    let slope = |x: f64, r: f64| -> Result<f64, GridError> {
        let rc = r.clamp(0.0, 1.0);
        let xc = x.clamp(0.0, g.length);
        Ok(bilinear(&state.ur, xc, rc)? / bilinear(&state.ux, xc, rc)?)
    };
    let spread = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let mut lines = Vec::with_capacity(n_lines);
    for k in 0..n_lines {
        let r0 = (k as f64 + 0.5) / n_lines as f64;
        let mut r = r0;
        let mut samples: [Vec<f64>; 4] = Default::default();
        for i in 0..g.nx {
            let rc = r.clamp(0.0, 1.0);
            samples[0].push(interp_column(&state.s, i, rc)?);
            samples[1].push(interp_column(&kfield, i, rc)?);
            samples[2].push(interp_column(&state.lambda, i, rc)?);
            samples[3].push(interp_column(&bern, i, rc)?);
            if i + 1 < g.nx {
                let x = g.x(i);
                let k1 = slope(x, r)?;
                let k2 = slope(x + 0.5 * hx, r + 0.5 * hx * k1)?;
                let k3 = slope(x + 0.5 * hx, r + 0.5 * hx * k2)?;
                let k4 = slope(x + hx, r + hx * k3)?;
                r += hx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        lines.push(StreamlineSample {
            r_entrance: r0,
            r_exit: r,
            var_s: spread(&samples[0]),
            var_k: spread(&samples[1]),
            var_lambda: spread(&samples[2]),
            var_bernoulli: spread(&samples[3]),
        });
    }
    let max = |f: fn(&StreamlineSample) -> f64| lines.iter().map(f).fold(0.0, f64::max);
    Ok(StreamlineReport {
        max_var_s: max(|l| l.var_s),
        max_var_k: max(|l| l.var_k),
        max_var_lambda: max(|l| l.var_lambda),
        max_var_bernoulli: max(|l| l.var_bernoulli),
        lines,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub amplitude: f64,
    /// Size of the perturbation data at this amplitude.
    pub sigma: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    /// Largest deviation from the background over the primitive fields.
    pub error: f64,
    /// `error / amplitude`.
    pub ratio: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub all_converged: bool,
    /// `max ratio / min ratio` over the converged rows.
    pub ratio_spread: f64,
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Failed(#[from] SolveFailure),
    #[error("perturbation shape has zero size")]
    ZeroShape,
    #[error("{0}")]
    Other(String),
}

/// Solves at each amplitude of `sigmas` in parallel and compares the deviation from the
/// background with the amplitude.
pub fn stability_sweep(
    env: &EntranceEnv,
    gas: &GasParams,
    spec: &PerturbationSpec,
    cfg: &SolveConfig,
    sigmas: &[f64],
) -> Result<SweepReport, StudyError> {
    let ctx = SolverContext::new(env, gas, &spec.with_amplitude(1.0), cfg)?;
    if !(ctx.pert.sigma > 0.0) {
        return Err(StudyError::ZeroShape);
    }
    let contexts = sigmas
        .iter()
        .map(|&s| ctx.with_perturbation(&spec.with_amplitude(s)))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<SweepRow> = std::thread::scope(|scope| {
        let handles: Vec<_> = contexts
            .iter()
            .zip(sigmas)
            .map(|(c, &amplitude)| {
                scope.spawn(move || match outer_solve(c, InitialGuess::Background) {
                    Ok(sol) => {
                        let error = sol.report.error_vs_background.max;
                        SweepRow {
                            amplitude,
                            sigma: c.pert.sigma,
                            converged: true,
                            outer_iterations: sol.report.outer_iterations,
                            error,
                            ratio: error / amplitude,
                            status: sol.report.status,
                        }
                    }
                    Err(f) => SweepRow {
                        amplitude,
                        sigma: c.pert.sigma,
                        converged: false,
                        outer_iterations: f.report.outer_iterations,
                        error: f64::NAN,
                        ratio: f64::NAN,
                        status: f.report.status,
                    },
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let ok: Vec<f64> = rows.iter().filter(|r| r.converged).map(|r| r.ratio).collect();
    let hi = ok.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ok.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SweepReport {
        all_converged: rows.iter().all(|r| r.converged),
        ratio_spread: if ok.is_empty() { f64::NAN } else { hi / lo },
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceCase {
    /// Swirl stream function against `r (1 - r^2) cos(pi x / L)`, both formulations.
    ManufacturedSwirl,
    /// Coupled `(Psi, phi)` block against a smooth exact pair on the background coefficients.
    ManufacturedElliptic,
    /// Unperturbed solve; the background is reproduced on every grid.
    Background,
    /// Perturbed solve; equation residuals at the nodes of the coarsest grid.
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub nr: usize,
    pub errors: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub case: ConvergenceCase,
    pub rows: Vec<ConvergenceRow>,
    /// Observed orders between consecutive rows; `None` where the error is at round-off level.
    pub orders: BTreeMap<String, Vec<Option<f64>>>,
}

/// Grids `n, 2n - 1, 4n - 3, ...` starting from the configured one.
pub fn convergence_grids(cfg: &SolveConfig, levels: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(levels);
    let (mut nx, mut nr) = (cfg.nx, cfg.nr);
    for _ in 0..levels {
        out.push((nx, nr));
        nx = 2 * nx - 1;
        nr = 2 * nr - 1;
    }
    out
}

fn orders(rows: &[ConvergenceRow]) -> BTreeMap<String, Vec<Option<f64>>> {
    let mut out = BTreeMap::new();
    if let Some(first) = rows.first() {
        for key in first.errors.keys() {
            let list = rows
                .windows(2)
                .map(|w| {
                    let (a, b) = (w[0].errors[key], w[1].errors[key]);
                    (a > 1e-13 && b > 1e-13).then(|| (a / b).log2())
                })
                .collect();
            out.insert(key.clone(), list);
        }
    }
    out
}

/// Exact swirl solution `r (1 - r^2) cos(pi x / L)` and its source.
pub fn manufactured_swirl(grid: Grid2D) -> (Field2D, Field2D) {
    let k = PI / grid.length;
    let exact = Field2D::from_fn(grid, Parity::Odd, |x, r| (r - r * r * r) * (k * x).cos());
    let source = Field2D::from_fn(grid, Parity::Odd, |x, r| (k * k * (r - r * r * r) + 8.0 * r) * (k * x).cos());
    (exact, source)
}

fn manufactured_elliptic_errors(bg: &BackgroundProfile, grid: Grid2D) -> Result<BTreeMap<String, f64>, StudyError> {
    let coeffs = build_coefficients(bg).map_err(|e| StudyError::Other(e.to_string()))?;
    let l = grid.length;
    let k = PI / l;
    let phi = |x: f64, r: f64| x * (1.0 + 0.5 * (PI * r).cos());
    let phi_x = |_x: f64, r: f64| 1.0 + 0.5 * (PI * r).cos();
    let phi_r = |x: f64, r: f64| -0.5 * PI * x * (PI * r).sin();
    let psi = |x: f64, r: f64| (k * x).cos() * (1.0 + 0.3 * (PI * r).cos());
    let lap_psi = |x: f64, r: f64| {
        let radial = if r == 0.0 {
            -0.3 * PI * PI * 2.0
        } else {
            -0.3 * PI * PI * (PI * r).cos() - 0.3 * PI * (PI * r).sin() / r
        };
        (k * x).cos() * (radial - k * k * (1.0 + 0.3 * (PI * r).cos()))
    };
    let station = |x: f64| ((x / grid.hx()).round() as usize).min(grid.nx - 1);
    let fx = Field2D::from_fn(grid, Parity::Even, |x, r| {
        let i = station(x);
        coeffs.a11[i] * phi_x(x, r) + coeffs.b1[i] * psi(x, r)
    });
    let fr = Field2D::from_fn(grid, Parity::Odd, |x, r| coeffs.a22[station(x)] * phi_r(x, r));
    let f1 = Field2D::from_fn(grid, Parity::Even, |x, r| {
        let i = station(x);
        lap_psi(x, r) - coeffs.c1[i] * phi_x(x, r) - coeffs.d[i] * psi(x, r)
    });
    let radii: Vec<f64> = (0..grid.nr).map(|j| grid.r(j)).collect();
    let rhs = PairRhs {
        fx,
        fr,
        f1,
        g_exit: radii.iter().map(|&r| phi_x(l, r)).collect(),
        psi_bd0: radii.iter().map(|&r| psi(0.0, r)).collect(),
        psi_bdl: radii.iter().map(|&r| psi(l, r)).collect(),
    };
    let solver = PairSolver::new(grid, &coeffs, Default::default(), SolveOptions::default())
        .map_err(|e| StudyError::Other(e.to_string()))?;
    let (psi_h, phi_h) = solver.solve(&rhs).map_err(|e| StudyError::Other(e.to_string()))?;
    let mut errors = BTreeMap::new();
    errors.insert("Psi".into(), psi_h.max_abs_diff(&Field2D::from_fn(grid, Parity::Even, psi)));
    errors.insert("phi".into(), phi_h.max_abs_diff(&Field2D::from_fn(grid, Parity::Even, phi)));
    Ok(errors)
}

pub fn convergence_study(
    case: ConvergenceCase,
    env: &EntranceEnv,
    gas: &GasParams,
    spec: &PerturbationSpec,
    cfg: &SolveConfig,
    levels: usize,
) -> Result<ConvergenceTable, StudyError> {
    let mut rows = Vec::with_capacity(levels);
    for (level, (nx, nr)) in convergence_grids(cfg, levels).into_iter().enumerate() {
        let level_cfg = cfg.with_grid(nx, nr);
        let grid = Grid2D::new(nx, nr, env.length).map_err(SetupError::from)?;
        let errors = match case {
            ConvergenceCase::ManufacturedSwirl => {
                let (exact, source) = manufactured_swirl(grid);
                let mut errors = BTreeMap::new();
                for (name, form) in [("psi_direct", SwirlForm::Direct), ("psi_lifted", SwirlForm::Lifted)] {
                    let solver = SwirlSolver::new(grid, form, cfg.linear_method, SolveOptions::default())
                        .map_err(|e| StudyError::Other(e.to_string()))?;
                    let sol = solver.solve(&source).map_err(|e| StudyError::Other(e.to_string()))?;
                    errors.insert(name.to_string(), sol.psi.max_abs_diff(&exact));
                }
                errors
            }
            ConvergenceCase::ManufacturedElliptic => {
                let bg = solve_background_on_grid(env, gas, nx).map_err(SetupError::from)?;
                manufactured_elliptic_errors(&bg, grid)?
            }
            ConvergenceCase::Background => {
                let ctx = SolverContext::new(env, gas, &spec.with_amplitude(0.0), &level_cfg)?;
                let sol = outer_solve(&ctx, InitialGuess::Background)?;
                let mut errors = BTreeMap::new();
                errors.insert("max_deviation".into(), sol.report.error_vs_background.max);
                errors
            }
            ConvergenceCase::Perturbed => {
                let ctx = SolverContext::new(env, gas, spec, &level_cfg)?;
                let sol = outer_solve(&ctx, InitialGuess::Background)?;
                let res = residuals_nested(&sol.primitive(), &sol.base.bg, &sol.b_field, 1 << level);
                res.entries()
                    .iter()
                    .flat_map(|(n, e)| [(format!("{n}_sup"), e.sup), (format!("{n}_l2"), e.rms)])
                    .collect()
            }
        };
        rows.push(ConvergenceRow { nx, nr, errors });
    }
    let orders = orders(&rows);
    Ok(ConvergenceTable { case, rows, orders })
}
