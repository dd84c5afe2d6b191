// Solves the swirl stream equation for a manufactured source with both formulations.

use swirlsolve::elliptic::LinearMethod;
use swirlsolve::grid::Grid2D;
use swirlsolve::linear::SolveOptions;
use swirlsolve::swirl::{SwirlForm, SwirlSolver};
use swirlsolve::verify::manufactured_swirl;

pub fn run_example() -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for (nx, nr) in [(17, 9), (33, 17), (65, 33)] {
        let grid = Grid2D::new(nx, nr, 1.0).expect("valid grid");
        let (exact, source) = manufactured_swirl(grid);
        let err = |form| {
            let solver = SwirlSolver::new(grid, form, LinearMethod::Separable, SolveOptions::default()).expect("solver");
            solver.solve(&source).expect("solve").psi.max_abs_diff(&exact)
        };
        let (direct, lifted) = (err(SwirlForm::Direct), err(SwirlForm::Lifted));
        println!("{nx:>4} x {nr:<4} direct {direct:.3e}  lifted {lifted:.3e}");
        out.push((nx, direct, lifted));
    }
    out
}

#[allow(dead_code)]
fn main() {
    run_example();
}
