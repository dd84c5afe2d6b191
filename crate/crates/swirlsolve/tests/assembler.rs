mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use swirlsolve::assembler::{assemble_f2, assemble_f_f1, assemble_g, assemble_m, reconstruct_velocity, Potentials};
use swirlsolve::background::EntranceEnv;
use swirlsolve::grid::{ddr, ddx, Field2D, Parity};
use swirlsolve::iteration::{solve, InitialGuess, SolveConfig};
use swirlsolve::perturbation::{PerturbationSpec, ShapeName, ShapeTerm};
use swirlsolve::thermo::GasParams;
use swirlsolve::transport::TransportedFields;

#[test]
fn gauss_rule_is_exact_for_high_degree() {
    let rule = gauss_legendre_16();
    let s: f64 = rule.iter().map(|(_, w)| w).sum();
    assert!((s - 1.0).abs() < 1e-15);
    let m: f64 = rule.iter().map(|(t, w)| w * t.powi(31)).sum();
    assert!((m - 1.0 / 32.0).abs() < 1e-15);
}

#[test]
fn closed_forms_match_quadrature_of_integral_definitions() {
    let (nodewise, _) = closed_form_deviation(42, 100);
    assert!(nodewise <= 1e-10, "worst relative deviation {nodewise}");
}

#[test]
fn zero_perturbation_leaves_only_doping() {
    let base = base(17, 9);
    let spec = PerturbationSpec::single(ShapeName::DopingBump, 0.1);
    let pin = pert(&base, &spec);
    let it = background_iterate(&base);
    let (fx, fr, f1) = assemble_f_f1(&base, &it, &pin);
    assert!(fx.max_abs() < 1e-14 && fr.max_abs() < 1e-14);
    let g = base.grid;
    for i in 0..g.nx {
        for j in 0..g.nr {
            assert!((f1.get(i, j) + (pin.b_field.get(i, j) - pin.b0)).abs() < 1e-14);
        }
    }
}

#[test]
fn background_is_a_fixed_point() {
    let base = base(33, 17);
    let pin = pert(&base, &PerturbationSpec::default());
    let it = background_iterate(&base);
    let (fx, fr, f1) = assemble_f_f1(&base, &it, &pin);
    let (f2, axis) = assemble_f2(&base, &it);
    let gexit = assemble_g(&base, &it, &pin);
    let m = assemble_m(&it);
    for f in [&fx, &fr, &f1, &f2] {
        assert!(f.max_abs() <= 1e-12);
    }
    assert_eq!(axis, 0.0);
    assert!(gexit.iter().all(|v| v.abs() <= 1e-12));
    let j0 = base.bg.env.j0;
    assert!(m.mx.values().iter().all(|v| (v - j0).abs() <= 1e-12));
    assert!(m.mr.max_abs() <= 1e-12);
    assert!((m.nu_star - j0).abs() <= 1e-12);
    for i in 0..base.grid.nx {
        for j in 0..base.grid.nr {
            assert!((it.ux.get(i, j) - base.bg.u_bar[i]).abs() < 1e-14);
            assert_eq!(it.ur.get(i, j), 0.0);
        }
    }
}

#[test]
fn swirl_monomial_contributes_twice_its_coefficient() {
    let base = base(17, 17);
    let g = base.grid;
    let c = |x: f64| 0.01 * (1.0 + x * x);
    let mut pot = Potentials::zeros(g);
    pot.psi = Field2D::from_fn(g, Parity::Odd, |x, r| r * c(x));
    let w = TransportedFields::uniform(g, base.s0(), base.k0());
    let it = reconstruct_velocity(&base, &pot, &w).unwrap();
    for i in 0..g.nx {
        for j in 0..g.nr {
            assert!((it.tx.get(i, j) - 2.0 * c(g.x(i))).abs() < 1e-15);
            assert!((it.ux.get(i, j) - base.bg.u_bar[i] - 2.0 * c(g.x(i))).abs() < 1e-14);
            assert!((it.ur.get(i, j) + g.r(j) * 0.02 * g.x(i)).abs() < 1e-12);
        }
    }
    assert!(it.dphi_dr.max_abs() == 0.0);
}

#[test]
fn exit_back_pressure_decelerates() {
    let base = base(33, 17);
    let it = background_iterate(&base);
    let n = base.grid.nx - 1;
    let rho_l = base.states[n].rho;
    let u_l = base.bg.u_bar[n];
    for delta in [1e-4, 1e-3] {
        let pin = pert(&base, &PerturbationSpec::single(ShapeName::PressureBump, delta));
        let g = assemble_g(&base, &it, &pin);
        assert!(g.iter().take(base.grid.nr - 1).all(|&v| v < 0.0));
        let linear = -delta * pin.p_l / (rho_l * u_l);
        assert!(((g[0] - linear) / linear).abs() < 2.0 * delta);
    }
}

#[test]
fn quadratic_smallness_of_the_potential_part() {
    let base = base(33, 17);
    let g = base.grid;
    let pin = pert(&base, &PerturbationSpec::default());
    let w = TransportedFields::uniform(g, base.s0(), base.k0());
    let norms: Vec<[f64; 3]> = [1.0, 0.5, 0.25]
        .iter()
        .map(|&lam| {
            let pot = Potentials {
                psi_pert: Field2D::from_fn(g, Parity::Even, |x, r| lam * 0.005 * (2.0 * x).sin() * (1.0 - r * r)),
                phi: Field2D::from_fn(g, Parity::Even, |x, r| lam * 0.005 * x * (1.0 + (PI * r).cos())),
                psi: Field2D::zeros(g, Parity::Odd),
            };
            let it = reconstruct_velocity(&base, &pot, &w).unwrap();
            let (fx, fr, f1) = assemble_f_f1(&base, &it, &pin);
            [fx.max_abs(), fr.max_abs(), f1.max_abs()]
        })
        .collect();
    for k in 0..3 {
        for pair in norms.windows(2) {
            let exponent = (pair[0][k] / pair[1][k]).log2();
            assert!((exponent - 2.0).abs() < 0.1, "component {k}: exponent {exponent}");
        }
    }
}

#[test]
fn right_hand_sides_have_the_right_parity() {
    let base = base(17, 9);
    let pin = pert(&base, &PerturbationSpec::default());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let it = random_state(&base, 0.1, &mut rng);
    let (fx, fr, f1) = assemble_f_f1(&base, &it, &pin);
    let (f2, _) = assemble_f2(&base, &it);
    assert_eq!((fx.parity, fr.parity, f1.parity, f2.parity), (Parity::Even, Parity::Odd, Parity::Even, Parity::Odd));
    for i in 0..base.grid.nx {
        assert_eq!(fr.get(i, 0), 0.0);
        assert_eq!(f2.get(i, 0), 0.0);
        assert_eq!(it.ur.get(i, 0), 0.0);
        assert_eq!(it.utheta.get(i, 0), 0.0);
    }
}

#[test]
fn swirl_term_monomial_identity() {
    let base = base(17, 17);
    let g = base.grid;
    let mut it = background_iterate(&base);
    it.w.v = Field2D::from_fn(g, Parity::Odd, |_, r| r);
    it.w.lambda = Field2D::from_fn(g, Parity::Even, |_, r| r * r);
    it.w.dlambda_dr = Field2D::from_fn(g, Parity::Odd, |_, r| 2.0 * r);
    let (f2, axis) = assemble_f2(&base, &it);
    assert_eq!(axis, 0.0);
    for i in 0..g.nx {
        for j in 1..g.nr {
            assert!((f2.get(i, j) * it.ux.get(i, j) - 2.0 * g.r(j)).abs() < 1e-13);
        }
    }
}

fn vorticity_defect(sol: &swirlsolve::iteration::Solution, stride: usize) -> f64 {
    let it = &sol.iterate;
    let g = sol.grid();
    let omega = ddx(&it.ur).lincomb(1.0, &ddr(&it.ux), -1.0);
    let (f2, _) = assemble_f2(&sol.base, it);
    let mut worst: f64 = 0.0;
    for i in (stride..g.nx - stride).step_by(stride) {
        for j in (stride..g.nr - stride).step_by(stride) {
            worst = worst.max((omega.get(i, j) - f2.get(i, j)).abs());
        }
    }
    worst
}

#[test]
fn vorticity_matches_swirl_source() {
    let spec = PerturbationSpec {
        amplitude: 1e-2,
        shapes: vec![
            ShapeTerm { name: ShapeName::SwirlBump, weight: 1.0 },
            ShapeTerm { name: ShapeName::EntropyBump, weight: 1.0 },
            ShapeTerm { name: ShapeName::BernoulliBump, weight: 1.0 },
        ],
        ..Default::default()
    };
    let env = EntranceEnv::default();
    let gas = GasParams::default();
    let defects: Vec<f64> = [(33usize, 17usize), (65, 33), (129, 65)]
        .iter()
        .enumerate()
        .map(|(level, &(nx, nr))| {
            let cfg = SolveConfig { nx, nr, tol_outer: 1e-12, tol_inner: 1e-12, ..Default::default() };
            let sol = solve(&env, &gas, &spec, &cfg, InitialGuess::Background).unwrap();
            assert!(sol.report.converged);
            vorticity_defect(&sol, 1 << level)
        })
        .collect();
    for w in defects.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "defects {defects:?}");
    }
}
