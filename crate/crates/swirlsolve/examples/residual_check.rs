// Solves a small swirling perturbation and reports equation residuals and streamline invariants.

use swirlsolve::background::EntranceEnv;
use swirlsolve::iteration::{solve, InitialGuess, SolveConfig};
use swirlsolve::perturbation::{PerturbationSpec, ShapeName};
use swirlsolve::thermo::GasParams;
use swirlsolve::verify::{residuals, streamline_conservation, ResidualReport, StreamlineReport};

pub fn run_example() -> (ResidualReport, StreamlineReport) {
    let gas = GasParams::default();
    let spec = PerturbationSpec::single(ShapeName::SwirlBump, 1e-3);
    let cfg = SolveConfig { nx: 65, nr: 33, ..Default::default() };
    let sol = solve(&EntranceEnv::default(), &gas, &spec, &cfg, InitialGuess::Background).expect("small perturbation converges");
    println!("converged in {} outer iterations, sigma {:.3e}", sol.report.outer_iterations, sol.report.sigma);
    let state = sol.primitive();
    let res = residuals(&state, &sol.base.bg, &sol.b_field);
    for (name, e) in res.entries() {
        println!("{name:>12}: sup {:.3e}  rms {:.3e}", e.sup, e.rms);
    }
    let lines = streamline_conservation(&state, &gas, 10).expect("streamlines stay in the domain");
    println!(
        "streamline spread: S {:.2e}  K {:.2e}  Lambda {:.2e}  Bernoulli {:.2e}",
        lines.max_var_s, lines.max_var_k, lines.max_var_lambda, lines.max_var_bernoulli
    );
    (res, lines)
}

#[allow(dead_code)]
fn main() {
    run_example();
}
