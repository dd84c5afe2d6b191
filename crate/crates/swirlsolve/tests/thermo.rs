use proptest::prelude::*;
use swirlsolve::thermo::{GasParams, ThermoError};

fn unit_gas() -> GasParams {
    GasParams::new(2.0, 1.0, 1.0).unwrap()
}

#[test]
fn pressure_unit_normalization() {
    let gas = unit_gas();
    assert_eq!(gas.pressure(1.0, 0.0).unwrap(), 1.0);
    assert_eq!(gas.pressure(2.0, 0.0).unwrap(), 4.0);
}

#[test]
fn pressure_matches_scalar_evaluation() {
    let gas = GasParams::default();
    let expected = (0.1f64).exp() * 1.3f64.powf(1.4);
    let p = gas.pressure(1.3, 0.1).unwrap();
    assert!((p - expected).abs() <= 1e-15 * expected);
    assert!((p - 1.595695945044614).abs() < 1e-14);
}

#[test]
fn nonpositive_density_is_rejected() {
    let gas = GasParams::default();
    assert!(matches!(gas.pressure(0.0, 0.0), Err(ThermoError::NonPositiveDensity(_))));
    assert!(gas.temperature(-1.0, 0.0).is_err());
    assert!(gas.sound_speed_sq(f64::NAN, 0.0).is_err());
}

#[test]
fn vacuum_is_signalled() {
    let gas = GasParams::default();
    assert!(matches!(gas.density_h(0.0, 0.0), Err(ThermoError::Vacuum { .. })));
    assert!(gas.density_h(0.0, -1.0).is_err());
}

#[test]
fn density_h_with_gamma_two_is_half_tau() {
    assert_eq!(unit_gas().density_h(0.0, 3.0).unwrap(), 1.5);
}

#[test]
fn temperature_and_sound_speed_examples() {
    let gas = unit_gas();
    assert_eq!(gas.temperature(1.0, 0.0).unwrap(), 1.0);
    assert_eq!(gas.temperature(2.0, 0.0).unwrap(), 2.0);
    assert_eq!(gas.sound_speed_sq(1.0, 0.0).unwrap(), 2.0);
    assert_eq!(gas.bernoulli(1.0, 0.0, 0.0).unwrap(), 2.0);
}

#[test]
fn invalid_gas_parameters() {
    assert!(GasParams::new(1.0, 1.0, 1.0).is_err());
    assert!(GasParams::new(1.4, 0.0, 1.0).is_err());
    assert!(GasParams::new(1.4, 1.0, -2.0).is_err());
}

#[test]
fn enthalpy_from_pressure_consistent() {
    let gas = GasParams::default();
    let (rho, s) = (1.7, -0.3);
    let p = gas.pressure(rho, s).unwrap();
    let tau = gas.enthalpy_from_pressure(p, s).unwrap();
    assert!((tau - gas.enthalpy(rho, s).unwrap()).abs() < 1e-14 * tau);
}

fn gas_strategy() -> impl Strategy<Value = GasParams> {
    (1.05f64..3.0, 0.2f64..5.0, 0.3f64..3.0).prop_map(|(g, a, cv)| GasParams::new(g, a, cv).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn enthalpy_inverse_round_trip(gas in gas_strategy(), rho in 0.01f64..50.0, s in -2.0f64..2.0) {
        let tau = gas.enthalpy(rho, s).unwrap();
        let back = gas.density_h(s, tau).unwrap();
        prop_assert!(((back - rho) / rho).abs() < 1e-13);
    }

    #[test]
    fn temperature_formula(gas in gas_strategy(), rho in 0.01f64..50.0, s in -2.0f64..2.0) {
        let expected = gas.a / (gas.cv * (gas.gamma - 1.0)) * (s / gas.cv).exp() * rho.powf(gas.gamma - 1.0);
        let t = gas.temperature(rho, s).unwrap();
        prop_assert!(((t - expected) / expected).abs() < 1e-14);
    }

    #[test]
    fn bernoulli_enthalpy_identity(gas in gas_strategy(), rho in 0.01f64..50.0, q2 in 0.0f64..10.0, s in -2.0f64..2.0) {
        let b = gas.bernoulli(rho, q2, s).unwrap();
        let p = gas.pressure(rho, s).unwrap();
        let rhs = gas.gamma / (gas.gamma - 1.0) * p / rho;
        prop_assert!((b - 0.5 * q2 - rhs).abs() < 1e-12 * b.abs().max(1.0));
    }

    #[test]
    fn density_h_monotone(gas in gas_strategy(), xi in -2.0f64..2.0, tau in 0.05f64..20.0) {
        let h = |x: f64, t: f64| gas.density_h(x, t).unwrap();
        prop_assert!(h(xi, tau * 1.001) > h(xi, tau));
        prop_assert!(h(xi + 1e-3, tau) < h(xi, tau));
    }

    #[test]
    fn density_h_tau_matches_difference(gas in gas_strategy(), xi in -2.0f64..2.0, tau in 0.05f64..20.0) {
        let step = 1e-6 * tau;
        let fd = (gas.density_h(xi, tau + step).unwrap() - gas.density_h(xi, tau - step).unwrap()) / (2.0 * step);
        let exact = gas.density_h_tau(xi, tau).unwrap();
        prop_assert!(((fd - exact) / exact).abs() < 1e-6);
        let rho = gas.density_h(xi, tau).unwrap();
        let c2 = gas.sound_speed_sq(rho, xi).unwrap();
        prop_assert!(((exact - rho / c2) / exact).abs() < 1e-12);
    }
}
