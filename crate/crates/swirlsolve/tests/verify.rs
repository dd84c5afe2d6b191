use swirlsolve::assembler::reconstruct_velocity;
use swirlsolve::background::EntranceEnv;
use swirlsolve::grid::{Field2D, Parity};
use swirlsolve::iteration::{solve, InitialGuess, SolveConfig, Solution};
use swirlsolve::perturbation::{PerturbationSpec, ShapeName, ShapeTerm};
use swirlsolve::thermo::GasParams;
use swirlsolve::verify::{
    convergence_study, residuals, stability_sweep, streamline_conservation, ConvergenceCase, PrimitiveState,
};

fn cfg(nx: usize, nr: usize) -> SolveConfig {
    SolveConfig { nx, nr, tol_inner: 1e-12, tol_outer: 1e-11, ..Default::default() }
}

fn spec(amplitude: f64, shapes: &[ShapeName]) -> PerturbationSpec {
    PerturbationSpec {
        amplitude,
        shapes: shapes.iter().map(|&name| ShapeTerm { name, weight: 1.0 }).collect(),
        ..Default::default()
    }
}

fn run(amplitude: f64, shapes: &[ShapeName], nx: usize, nr: usize) -> Solution {
    solve(&EntranceEnv::default(), &GasParams::default(), &spec(amplitude, shapes), &cfg(nx, nr), InitialGuess::Background)
        .unwrap()
}

#[test]
fn background_has_negligible_residuals() {
    let sol = run(0.0, &[ShapeName::SwirlBump], 65, 33);
    let res = residuals(&sol.primitive(), &sol.base.bg, &sol.b_field);
    for (name, e) in res.entries() {
        assert!(e.sup <= 1e-9, "{name}: {}", e.sup);
        assert!(e.rms <= e.sup);
    }
    assert_eq!((res.nx, res.nr), (65, 33));
}

#[test]
fn corrupted_solution_is_detected() {
    let sol = run(1e-3, &[ShapeName::SwirlBump, ShapeName::EntropyBump], 65, 33);
    let clean = residuals(&sol.primitive(), &sol.base.bg, &sol.b_field);
    let mut pot = sol.iterate.pot.clone();
    let bump = Field2D::from_fn(sol.grid(), Parity::Odd, |_, r| 1e-3 * r * (1.0 - r));
    pot.psi = pot.psi.lincomb(1.0, &bump, 1.0);
    let it = reconstruct_velocity(&sol.base, &pot, &sol.iterate.w).unwrap();
    let bad = residuals(&PrimitiveState::from_iterate(&sol.base, &it), &sol.base.bg, &sol.b_field);
    assert!(bad.mass.sup >= 10.0 * clean.mass.sup, "{} {}", bad.mass.sup, clean.mass.sup);
    assert!(bad.x_momentum.sup >= 10.0 * clean.x_momentum.sup);
    assert!(bad.max_sup() > clean.max_sup());
}

#[test]
fn transported_quantities_are_constant_on_streamlines() {
    let sol = run(1e-3, &[ShapeName::SwirlBump, ShapeName::PotentialBump], 129, 65);
    let rep = streamline_conservation(&sol.primitive(), &GasParams::default(), 20).unwrap();
    assert_eq!(rep.lines.len(), 20);
    assert!(rep.max_var_s <= 1e-4, "S {}", rep.max_var_s);
    assert!(rep.max_var_k <= 1e-4, "K {}", rep.max_var_k);
    assert!(rep.max_var_lambda <= 1e-4, "Lambda {}", rep.max_var_lambda);
    assert!(rep.max_var_bernoulli >= 1e-3, "Bernoulli {}", rep.max_var_bernoulli);
    for line in &rep.lines {
        assert!((0.0..=1.0).contains(&line.r_exit));
    }
}

#[test]
fn sweep_error_is_linear_in_amplitude() {
    let env = EntranceEnv::default();
    let rep = stability_sweep(&env, &GasParams::default(), &spec(1.0, &[ShapeName::SwirlBump]), &cfg(33, 17), &[1e-4, 1e-3, 1e-2])
        .unwrap();
    assert!(rep.all_converged);
    assert!(rep.ratio_spread <= 2.0, "{}", rep.ratio_spread);
    for w in rep.rows.windows(2) {
        assert!(w[1].error > w[0].error);
    }
}

#[test]
fn sweep_rejects_a_zero_shape() {
    let s = PerturbationSpec { shapes: vec![], ..Default::default() };
    assert!(stability_sweep(&EntranceEnv::default(), &GasParams::default(), &s, &cfg(17, 9), &[1e-3]).is_err());
}

#[test]
fn residuals_converge_at_second_order() {
    let all = [
        ShapeName::SwirlBump,
        ShapeName::EntropyBump,
        ShapeName::PressureBump,
        ShapeName::DopingBump,
        ShapeName::BernoulliBump,
        ShapeName::PotentialBump,
    ];
    let table = convergence_study(
        ConvergenceCase::Perturbed,
        &EntranceEnv::default(),
        &GasParams::default(),
        &spec(1e-3, &all),
        &cfg(33, 17),
        3,
    )
    .unwrap();
    assert_eq!(table.rows.len(), 3);
    for (name, orders) in &table.orders {
        if name.ends_with("_sup") {
            let last = orders.last().unwrap().unwrap();
            assert!(last >= 1.8, "{name}: {orders:?}");
        }
    }
}

#[test]
fn manufactured_swirl_study_reports_both_forms() {
    let table = convergence_study(
        ConvergenceCase::ManufacturedSwirl,
        &EntranceEnv::default(),
        &GasParams::default(),
        &PerturbationSpec::default(),
        &cfg(17, 9),
        4,
    )
    .unwrap();
    for key in ["psi_direct", "psi_lifted"] {
        let o = &table.orders[key];
        assert_eq!(o.len(), 3);
        assert!(o.iter().all(|v| v.unwrap() >= 1.9), "{key}: {o:?}");
    }
}

#[test]
fn background_study_stays_at_roundoff() {
    let table = convergence_study(
        ConvergenceCase::Background,
        &EntranceEnv::default(),
        &GasParams::default(),
        &PerturbationSpec::default(),
        &cfg(17, 9),
        3,
    )
    .unwrap();
    for row in &table.rows {
        assert!(row.errors["max_deviation"] <= 1e-10);
    }
}
