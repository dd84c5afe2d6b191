//! Run configuration, field and report files, and the subcommands behind the binary.

use crate::background::{rho_critical, solve_background_on_grid, BackgroundProfile, EntranceEnv};
use crate::grid::{Field2D, Grid2D, GridError, Parity};
use crate::iteration::{solve, InitialGuess, SolveConfig, SolveError, Solution};
use crate::perturbation::{PerturbationInput, PerturbationSpec};
use crate::thermo::GasParams;
use crate::verify::{
    convergence_study, residuals, stability_sweep, streamline_conservation, ConvergenceCase, ConvergenceTable,
    PrimitiveState, ResidualReport, StreamlineReport, SweepReport,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const REPORT_SCHEMA: &str = "swirlsolve-report-v1";
pub const FIELD_HEADER: &str = "x,r,rho,ux,ur,utheta,S,K,Lambda,Phi,psi,phi_pert,Psi_pert";
pub const FIELDS_FILE: &str = "fields.csv";
pub const REPORT_FILE: &str = "report.json";

/// Comma-separated row with 17 significant digits per value.
pub fn csv_row(values: &[f64]) -> String {
    let mut s = values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    /// Perturbation amplitudes.
    pub sigmas: Vec<f64>,
    /// Pass bound on `max / min` of `error / amplitude`.
    pub max_ratio_spread: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { sigmas: vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2], max_ratio_spread: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceOptions {
    pub case: ConvergenceCase,
    /// Number of grids, starting from the solver grid and halving the spacing each time.
    pub levels: usize,
    /// Pass bound on every observed order.
    pub min_order: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self { case: ConvergenceCase::Perturbed, levels: 3, min_order: 1.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub streamlines: usize,
    /// Pass bound on the largest sup residual.
    pub residual_tol: f64,
    /// Pass bound on the variation of `S`, `K` and `Lambda` along each streamline.
    pub streamline_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { streamlines: 20, residual_tol: 1e-3, streamline_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gas: GasParams,
    pub entrance: EntranceEnv,
    pub perturbation: PerturbationSpec,
    pub solver: SolveConfig,
    pub initial_guess: InitialGuess,
    pub sweep: SweepOptions,
    pub convergence: ConvergenceOptions,
    pub verify: VerifyOptions,
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gas: GasParams::default(),
            entrance: EntranceEnv::default(),
            perturbation: PerturbationSpec::default(),
            solver: SolveConfig::default(),
            initial_guess: InitialGuess::default(),
            sweep: SweepOptions::default(),
            convergence: ConvergenceOptions::default(),
            verify: VerifyOptions::default(),
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Command-line overrides applied on top of a parsed configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<String>,
    pub grid: Option<(usize, usize)>,
    pub sigma: Option<f64>,
    pub levels: Option<usize>,
}

impl RunConfig {
    /// Parses without validating.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "config".to_string() } else { path };
            ConfigError::Parse { path, message: e.into_inner().to_string() }
        })
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("configuration serializes");
        s.push('\n');
        s
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some((nx, nr)) = o.grid {
            self.solver.nx = nx;
            self.solver.nr = nr;
        }
        if let Some(s) = o.sigma {
            self.perturbation.amplitude = s;
        }
        if let Some(l) = o.levels {
            self.convergence.levels = l;
        }
    }

    /// Every invalid entry, each prefixed by its field path.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let g = &self.gas;
        if !(g.gamma.is_finite() && g.gamma > 1.0) {
            out.push(format!("gas.gamma: must exceed 1, got {}", g.gamma));
        }
        for (name, v) in [("a", g.a), ("cv", g.cv)] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("gas.{name}: must be positive, got {v}"));
            }
        }
        let gas_ok = out.is_empty();
        let e = &self.entrance;
        let before = out.len();
        for (name, v) in [("b0", e.b0), ("j0", e.j0), ("rho0", e.rho0), ("length", e.length)] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("entrance.{name}: must be positive, got {v}"));
            }
        }
        for (name, v) in [("s0", e.s0), ("e0", e.e0)] {
            if !v.is_finite() {
                out.push(format!("entrance.{name}: must be finite, got {v}"));
            }
        }
        let mut env_ok = gas_ok && out.len() == before;
        if env_ok {
            let rc = rho_critical(e.j0, e.s0, g);
            if !(e.rho0 > rc) {
                out.push(format!("entrance.rho0: must exceed the sonic density {rc}, got {}", e.rho0));
                env_ok = false;
            }
        }
        out.extend(self.perturbation.problems("perturbation"));
        let solver = self.solver.problems("solver");
        let solver_ok = solver.is_empty();
        out.extend(solver);
        if env_ok && solver_ok {
            if let Err(err) = solve_background_on_grid(e, g, self.solver.nx) {
                out.push(format!("entrance: no subsonic background on [0, L]: {err}"));
            }
        }
        if let InitialGuess::Perturbed { radius, .. } = self.initial_guess {
            if !(radius.is_finite() && radius >= 0.0) {
                out.push(format!("initial_guess.radius: must be non-negative, got {radius}"));
            }
        }
        if self.sweep.sigmas.is_empty() {
            out.push("sweep.sigmas: must not be empty".into());
        }
        for (k, s) in self.sweep.sigmas.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                out.push(format!("sweep.sigmas[{k}]: must be positive, got {s}"));
            }
        }
        if !(self.sweep.max_ratio_spread >= 1.0) {
            out.push(format!("sweep.max_ratio_spread: must be at least 1, got {}", self.sweep.max_ratio_spread));
        }
        if self.convergence.levels < 2 {
            out.push(format!("convergence.levels: must be at least 2, got {}", self.convergence.levels));
        }
        if !self.convergence.min_order.is_finite() {
            out.push("convergence.min_order: must be finite".into());
        }
        if self.verify.streamlines == 0 {
            out.push("verify.streamlines: must be at least 1".into());
        }
        for (name, v) in [("residual_tol", self.verify.residual_tol), ("streamline_tol", self.verify.streamline_tol)] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("verify.{name}: must be positive, got {v}"));
            }
        }
        if self.out_dir.is_empty() {
            out.push("out_dir: must not be empty".into());
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(p))
        }
    }
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg = RunConfig::from_json(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text =
        fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    RunConfig::from_json(&text)
}

/// Nodal fields in [`FIELD_HEADER`] order, `x` outer and `r` inner.
pub fn fields_csv(sol: &Solution) -> String {
    let g = sol.grid();
    let it = &sol.iterate;
    let phi = it.phi_total(&sol.base);
    let mut out = String::with_capacity(g.len() * 13 * 24);
    out.push_str(FIELD_HEADER);
    out.push('\n');
    for i in 0..g.nx {
        for j in 0..g.nr {
            out.push_str(&csv_row(&[
                g.x(i),
                g.r(j),
                it.rho.get(i, j),
                it.ux.get(i, j),
                it.ur.get(i, j),
                it.utheta.get(i, j),
                it.w.s.get(i, j),
                it.w.k.get(i, j),
                it.w.lambda.get(i, j),
                phi.get(i, j),
                it.pot.psi.get(i, j),
                it.pot.phi.get(i, j),
                it.pot.psi_pert.get(i, j),
            ]));
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum FieldsError {
    #[error("field file header must be `{FIELD_HEADER}`")]
    Header,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("node layout is not a tensor grid: {0}")]
    Layout(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Fields read back from a [`fields_csv`] file.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredFields {
    pub state: PrimitiveState,
    pub psi: Field2D,
    pub phi_pert: Field2D,
    pub psi_pert: Field2D,
}

pub fn read_fields_csv(text: &str) -> Result<StoredFields, FieldsError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(FIELD_HEADER) {
        return Err(FieldsError::Header);
    }
    let mut rows: Vec<[f64; 13]> = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0; 13];
        let mut n = 0;
        for (c, tok) in line.split(',').enumerate() {
            if c >= 13 {
                n = 14;
                break;
            }
            row[c] = tok.trim().parse().map_err(|e| FieldsError::Line { line: k + 2, message: format!("{e}") })?;
            n = c + 1;
        }
        if n != 13 {
            return Err(FieldsError::Line { line: k + 2, message: "expected 13 columns".into() });
        }
        rows.push(row);
    }
    let first_x = rows.first().ok_or_else(|| FieldsError::Layout("no data rows".into()))?[0];
    let nr = rows.iter().take_while(|r| r[0] == first_x).count();
    if nr == 0 || rows.len() % nr != 0 {
        return Err(FieldsError::Layout(format!("{} rows do not split into columns of {nr}", rows.len())));
    }
    let nx = rows.len() / nr;
    let length = rows[rows.len() - 1][0];
    let grid = Grid2D::new(nx, nr, length)?;
    for (k, row) in rows.iter().enumerate() {
        let (i, j) = (k / nr, k % nr);
        if (row[0] - grid.x(i)).abs() > 1e-12 * length.max(1.0) || (row[1] - grid.r(j)).abs() > 1e-12 {
            return Err(FieldsError::Layout(format!("node ({}, {}) is off the uniform grid", row[0], row[1])));
        }
    }
    let column = |c: usize, parity: Parity| {
        Field2D::from_values(grid, parity, rows.iter().map(|r| r[c]).collect()).expect("grid-sized column")
    };
    let state = PrimitiveState {
        grid,
        rho: column(2, Parity::Even),
        ux: column(3, Parity::Even),
        ur: column(4, Parity::Odd),
        utheta: column(5, Parity::Odd),
        s: column(6, Parity::Even),
        k: column(7, Parity::Even),
        lambda: column(8, Parity::Even),
        phi: column(9, Parity::Even),
    };
    Ok(StoredFields { state, psi: column(10, Parity::Odd), phi_pert: column(11, Parity::Even), psi_pert: column(12, Parity::Even) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Background,
    Solve,
    Sweep,
    Verify,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Background => "background",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
            Command::Convergence => "convergence",
        }
    }
}

/// Top-level JSON document written by every subcommand.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema: &'static str,
    pub command: &'static str,
    pub passed: bool,
    pub config: &'a RunConfig,
    pub result: T,
}

pub fn report_json<T: Serialize>(command: Command, passed: bool, cfg: &RunConfig, result: T) -> String {
    let env = Envelope { schema: REPORT_SCHEMA, command: command.name(), passed, config: cfg, result };
    let mut s = serde_json::to_string_pretty(&env).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackgroundSummary {
    pub nodes: usize,
    pub bernoulli_constant: f64,
    pub rho_critical: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub min_margin: f64,
    pub bernoulli_defect: f64,
    pub exit_rho: f64,
    pub exit_phi0: f64,
    pub invariants_hold: bool,
    pub invariant_error: Option<String>,
}

impl BackgroundSummary {
    pub fn new(bg: &BackgroundProfile) -> Self {
        let check = bg.check_invariants();
        let n = bg.exit_index();
        Self {
            nodes: bg.n(),
            bernoulli_constant: bg.b0,
            rho_critical: rho_critical(bg.env.j0, bg.env.s0, &bg.gas),
            rho_min: bg.rho_lo,
            rho_max: bg.rho_hi,
            min_margin: bg.nu0_margin,
            bernoulli_defect: bg.bernoulli_defect(),
            exit_rho: bg.rho_bar[n],
            exit_phi0: bg.phi0[n],
            invariants_hold: check.is_ok(),
            invariant_error: check.err().map(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyResult {
    /// `stored` when read from the field file, `solved` when computed for this run.
    pub source: String,
    pub residuals: ResidualReport,
    pub streamlines: StreamlineReport,
    pub residuals_pass: bool,
    pub streamlines_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub table: ConvergenceTable,
    /// Smallest observed order, if any order could be measured.
    pub min_order: Option<f64>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("cannot read stored fields {path}: {message}")]
    Fields { path: String, message: String },
    #[error("{0}")]
    Failed(String),
}

/// Result of one subcommand: pass flag, a human-readable summary and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, RunError> {
    let wrap = |path: &Path, source| RunError::Write { path: path.display().to_string(), source };
    fs::create_dir_all(dir).map_err(|e| wrap(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| wrap(&path, e))?;
    Ok(path)
}

#[derive(Serialize)]
struct FailureResult<'a> {
    error: &'a str,
}

/// Writes a failure report and returns a failed outcome.
fn failure(command: Command, cfg: &RunConfig, dir: &Path, message: String) -> Result<Outcome, RunError> {
    let json = report_json(command, false, cfg, FailureResult { error: &message });
    let path = write_file(dir, REPORT_FILE, &json)?;
    Ok(Outcome { passed: false, summary: message, files: vec![path] })
}

/// Runs one subcommand with a validated configuration and writes its artifacts to `cfg.out_dir`.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome, RunError> {
    let dir = PathBuf::from(&cfg.out_dir);
    match command {
        Command::Background => run_background(cfg, &dir),
        Command::Solve => run_solve(cfg, &dir),
        Command::Sweep => run_sweep(cfg, &dir),
        Command::Verify => run_verify(cfg, &dir),
        Command::Convergence => run_convergence(cfg, &dir),
    }
}

fn run_background(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    let bg = match solve_background_on_grid(&cfg.entrance, &cfg.gas, cfg.solver.nx) {
        Ok(bg) => bg,
        Err(e) => return failure(Command::Background, cfg, dir, e.to_string()),
    };
    let summary = BackgroundSummary::new(&bg);
    let passed = summary.invariants_hold;
    let text = format!(
        "background: {} nodes, rho in [{:.6}, {:.6}], rho_c = {:.6}, min margin {:.3e}",
        summary.nodes, summary.rho_min, summary.rho_max, summary.rho_critical, summary.min_margin
    );
    let files = vec![
        write_file(dir, "background.csv", &bg.to_csv())?,
        write_file(dir, REPORT_FILE, &report_json(Command::Background, passed, cfg, &summary))?,
    ];
    Ok(Outcome { passed, summary: text, files })
}

fn solve_config(cfg: &RunConfig) -> Result<Solution, SolveError> {
    solve(&cfg.entrance, &cfg.gas, &cfg.perturbation, &cfg.solver, cfg.initial_guess)
}

fn run_solve(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    match solve_config(cfg) {
        Ok(sol) => {
            let r = &sol.report;
            let text = format!(
                "solve: converged in {} outer iterations on {}x{}, sigma = {:.3e}, max deviation {:.3e}",
                r.outer_iterations, r.nx, r.nr, r.sigma, r.error_vs_background.max
            );
            let files = vec![
                write_file(dir, FIELDS_FILE, &fields_csv(&sol))?,
                write_file(dir, REPORT_FILE, &report_json(Command::Solve, true, cfg, r))?,
            ];
            Ok(Outcome { passed: true, summary: text, files })
        }
        Err(SolveError::Failed(f)) => {
            let text = format!("solve: failed after {} outer iterations: {}", f.report.outer_iterations, f.reason);
            let path = write_file(dir, REPORT_FILE, &report_json(Command::Solve, false, cfg, &*f.report))?;
            Ok(Outcome { passed: false, summary: text, files: vec![path] })
        }
        Err(e) => failure(Command::Solve, cfg, dir, e.to_string()),
    }
}

fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from("amplitude,sigma,converged,outer_iterations,error,ratio,status\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{},{},{:.16e},{:.16e},{}",
            r.amplitude, r.sigma, r.converged, r.outer_iterations, r.error, r.ratio, r.status
        );
    }
    out
}

fn run_sweep(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    let report = match stability_sweep(&cfg.entrance, &cfg.gas, &cfg.perturbation, &cfg.solver, &cfg.sweep.sigmas) {
        Ok(r) => r,
        Err(e) => return failure(Command::Sweep, cfg, dir, e.to_string()),
    };
    let passed = report.all_converged && report.ratio_spread <= cfg.sweep.max_ratio_spread;
    let text = format!(
        "sweep: {} rows, all converged: {}, ratio spread {:.4} (bound {})",
        report.rows.len(),
        report.all_converged,
        report.ratio_spread,
        cfg.sweep.max_ratio_spread
    );
    let files = vec![
        write_file(dir, "sweep.csv", &sweep_csv(&report))?,
        write_file(dir, REPORT_FILE, &report_json(Command::Sweep, passed, cfg, &report))?,
    ];
    Ok(Outcome { passed, summary: text, files })
}

fn run_verify(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    let stored = dir.join(FIELDS_FILE);
    let (state, source) = if stored.exists() {
        let fields_err = |message: String| RunError::Fields { path: stored.display().to_string(), message };
        let text = fs::read_to_string(&stored).map_err(|e| fields_err(e.to_string()))?;
        let fields = read_fields_csv(&text).map_err(|e| fields_err(e.to_string()))?;
        if (fields.state.grid.length - cfg.entrance.length).abs() > 1e-12 * cfg.entrance.length {
            return Err(fields_err(format!(
                "stored length {} differs from the configured {}",
                fields.state.grid.length, cfg.entrance.length
            )));
        }
        (fields.state, "stored")
    } else {
        match solve_config(cfg) {
            Ok(sol) => (sol.primitive(), "solved"),
            Err(e) => return failure(Command::Verify, cfg, dir, e.to_string()),
        }
    };
    let g = state.grid;
    let bg = match solve_background_on_grid(&cfg.entrance, &cfg.gas, g.nx) {
        Ok(bg) => bg,
        Err(e) => return failure(Command::Verify, cfg, dir, e.to_string()),
    };
    let b = match PerturbationInput::new(&cfg.perturbation, &bg, g) {
        Ok(p) => p.b_field,
        Err(e) => return failure(Command::Verify, cfg, dir, e.to_string()),
    };
    let res = residuals(&state, &bg, &b);
    let lines = match streamline_conservation(&state, &cfg.gas, cfg.verify.streamlines) {
        Ok(l) => l,
        Err(e) => return failure(Command::Verify, cfg, dir, e.to_string()),
    };
    let residuals_pass = res.max_sup() <= cfg.verify.residual_tol;
    let tol = cfg.verify.streamline_tol;
    let streamlines_pass = lines.max_var_s <= tol && lines.max_var_k <= tol && lines.max_var_lambda <= tol;
    let passed = residuals_pass && streamlines_pass;
    let text = format!(
        "verify ({source} {}x{}): max residual {:.3e} in {:.1?}, streamline variation S {:.2e} K {:.2e} Lambda {:.2e}",
        g.nx,
        g.nr,
        res.max_sup(),
        res.runtime,
        lines.max_var_s,
        lines.max_var_k,
        lines.max_var_lambda
    );
    let result = VerifyResult { source: source.into(), residuals: res, streamlines: lines, residuals_pass, streamlines_pass };
    let path = write_file(dir, REPORT_FILE, &report_json(Command::Verify, passed, cfg, &result))?;
    Ok(Outcome { passed, summary: text, files: vec![path] })
}

/// Long-format table `quantity,nx,nr,value,order`; the order column compares with the row above.
pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from("quantity,nx,nr,value,order\n");
    for (name, orders) in &table.orders {
        for (k, row) in table.rows.iter().enumerate() {
            let order = match k.checked_sub(1).and_then(|p| orders[p]) {
                Some(o) => format!("{o:.16e}"),
                None => String::new(),
            };
            let _ = writeln!(out, "{name},{},{},{:.16e},{order}", row.nx, row.nr, row.errors[name]);
        }
    }
    out
}

fn run_convergence(cfg: &RunConfig, dir: &Path) -> Result<Outcome, RunError> {
    let opts = &cfg.convergence;
    let table = match convergence_study(opts.case, &cfg.entrance, &cfg.gas, &cfg.perturbation, &cfg.solver, opts.levels)
    {
        Ok(t) => t,
        Err(e) => return failure(Command::Convergence, cfg, dir, e.to_string()),
    };
    let all: Vec<Option<f64>> = table.orders.values().flatten().cloned().collect();
    let min_order = all.iter().flatten().cloned().reduce(f64::min);
    let passed = match opts.case {
        ConvergenceCase::Background => table.rows.iter().all(|r| r.errors.values().all(|&e| e <= 1e-10)),
        _ => !all.is_empty() && all.iter().all(|o| o.is_some_and(|o| o >= opts.min_order)),
    };
    let text = format!(
        "convergence ({:?}, {} levels): smallest order {}",
        opts.case,
        table.rows.len(),
        min_order.map_or("n/a".to_string(), |o| format!("{o:.3}"))
    );
    let files = vec![
        write_file(dir, "convergence.csv", &convergence_csv(&table))?,
        write_file(dir, REPORT_FILE, &report_json(Command::Convergence, passed, cfg, &ConvergenceResult { table, min_order }))?,
    ];
    Ok(Outcome { passed, summary: text, files })
}
