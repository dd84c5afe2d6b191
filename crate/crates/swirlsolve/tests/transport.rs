mod common;

use common::{discrete_div_free, stream};
use swirlsolve::grid::{bilinear, Field2D, Grid2D, Parity};
use swirlsolve::profile::{BumpShape, RadialProfile};
use swirlsolve::transport::{
    build_stream_map, divergence_defect, trace_characteristic, transport_solve, EntranceProfiles,
    MeridionalMomentum, StreamInverse, TransportError,
};

fn grid(nx: usize, nr: usize) -> Grid2D {
    Grid2D::new(nx, nr, 1.0).unwrap()
}

fn uniform(g: Grid2D, c: f64) -> MeridionalMomentum {
    MeridionalMomentum::new(Field2D::from_fn(g, Parity::Even, |_, _| c), Field2D::zeros(g, Parity::Odd))
}

fn entrance(s_amp: f64) -> EntranceProfiles {
    let mut s_en = RadialProfile::constant(0.2);
    s_en.add_term(s_amp, BumpShape::Quartic);
    let mut k_en = RadialProfile::constant(3.0);
    k_en.add_term(-0.5 * s_amp, BumpShape::Quartic);
    let mut nu_en = RadialProfile::constant(0.0);
    nu_en.add_term(0.3, BumpShape::SwirlCubic);
    EntranceProfiles { s_en, k_en, nu_en }
}

#[test]
fn uniform_flow_is_identity_relabeling() {
    let g = grid(17, 17);
    for c in [1.0, 0.37, 4.0] {
        let map = build_stream_map(&uniform(g, c)).unwrap();
        for i in 0..g.nx {
            for j in 0..g.nr {
                assert!((map.theta.get(i, j) - g.r(j)).abs() < 1e-14);
                assert!((map.w.get(i, j) - c * 0.5 * g.r(j).powi(2)).abs() < 1e-14);
            }
        }
        assert_eq!(map.max_clamp, 0.0);
        assert!((trace_characteristic(&uniform(g, c), 0.7, 0.4).unwrap() - 0.4).abs() < 1e-15);
    }
}

#[test]
fn stream_inverse_round_trip() {
    let radii: Vec<f64> = (0..17).map(|j| j as f64 / 16.0).collect();
    let mx0: Vec<f64> = radii.iter().map(|r| 1.0 + 0.3 * r * r).collect();
    let g: Vec<f64> = radii.iter().map(|r| 0.5 * r * r + 0.075 * r.powi(4)).collect();
    let inv = StreamInverse::new(radii.clone(), g.clone(), &mx0).unwrap();
    for (r, w) in radii.iter().zip(&g) {
        assert_eq!(inv.theta(*w).unwrap(), *r);
    }
    for k in 0..50 {
        let r = 0.01 + 0.0197 * k as f64;
        let w = 0.5 * r * r + 0.075 * r.powi(4);
        assert!((inv.theta(w).unwrap() - r).abs() < 1e-6);
    }
}

#[test]
fn discrete_div_free_field_is_conservative() {
    let g = grid(65, 33);
    let m = discrete_div_free(g);
    assert!(m.nu_star > 0.5);
    let map = build_stream_map(&m).unwrap();
    for i in 0..g.nx {
        for j in 0..g.nr {
            assert!((map.w.get(i, j) - stream(g.x(i), g.r(j))).abs() < 1e-13);
        }
        assert!((map.w.get(i, g.nr - 1) - map.w.get(0, g.nr - 1)).abs() < 1e-13);
    }
    assert!(map.max_clamp < 1e-13);
    assert!(divergence_defect(&m.mx, &m.mr) < 0.05);
}

#[test]
fn level_set_matches_characteristics_on_div_free_field() {
    for (nx, nr) in [(33, 17), (65, 33)] {
        let g = grid(nx, nr);
        let m = discrete_div_free(g);
        let map = build_stream_map(&m).unwrap();
        let bound = 5.0 * (g.hx().powi(2) + g.hr().powi(2));
        let mut worst: f64 = 0.0;
        for i in 0..g.nx {
            for j in 0..g.nr {
                let ode = trace_characteristic(&m, g.x(i), g.r(j)).unwrap();
                worst = worst.max((map.theta.get(i, j) - ode).abs());
            }
        }
        assert!(worst <= bound, "{nx}x{nr}: {worst} > {bound}");
    }
}

#[test]
fn theta_structure() {
    let g = grid(33, 17);
    let map = build_stream_map(&discrete_div_free(g)).unwrap();
    for i in 0..g.nx {
        assert_eq!(map.theta.get(i, 0), 0.0);
        for j in 1..g.nr {
            assert!(map.theta.get(i, j) > map.theta.get(i, j - 1));
            assert!((0.0..=1.0).contains(&map.theta.get(i, j)));
        }
    }
    for j in 0..g.nr {
        assert!((map.theta.get(0, j) - g.r(j)).abs() < 1e-14);
    }
    let m = discrete_div_free(g);
    assert_eq!(trace_characteristic(&m, 0.8, 0.0).unwrap(), 0.0);
}

#[test]
fn transported_fields() {
    let g = grid(33, 17);
    let m = discrete_div_free(g);
    let map = build_stream_map(&m).unwrap();
    let flat = EntranceProfiles {
        s_en: RadialProfile::constant(0.4),
        k_en: RadialProfile::constant(2.5),
        nu_en: RadialProfile::constant(0.0),
    };
    let t = transport_solve(&map, &flat);
    assert!(t.s.values().iter().all(|&v| v == 0.4));
    assert!(t.k.values().iter().all(|&v| v == 2.5));
    assert_eq!(t.lambda.max_abs(), 0.0);

    let en = entrance(0.2);
    let t = transport_solve(&build_stream_map(&uniform(g, 1.0)).unwrap(), &en);
    for i in 0..g.nx {
        for j in 0..g.nr {
            let r = g.r(j);
            assert!((t.s.get(i, j) - en.s_en.eval(r)).abs() < 1e-14);
            assert!((t.lambda.get(i, j) - r * en.nu_en.eval(r)).abs() < 1e-14);
        }
        assert_eq!(t.v.get(i, 0), 0.0);
        assert_eq!(t.lambda.get(i, 0), 0.0);
    }
}

#[test]
fn entropy_constant_along_traced_characteristics() {
    let g = grid(65, 33);
    let m = discrete_div_free(g);
    let en = entrance(0.2);
    let t = transport_solve(&build_stream_map(&m).unwrap(), &en);
    let ds_max = (0..=100).map(|k| en.s_en.deriv(k as f64 / 100.0).abs()).fold(0.0, f64::max);
    let bound = 5.0 * (g.hx().powi(2) + g.hr().powi(2)) * ds_max;
    for r_end in [0.2, 0.5, 0.8] {
        let x_end = g.length;
        let theta = trace_characteristic(&m, x_end, r_end).unwrap();
        let s_start = en.s_en.eval(theta);
        for k in 0..=20 {
            let x = x_end * k as f64 / 20.0;
            let r = {
                let mut lo = 0.0;
                let mut hi = 1.0;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if stream(x, mid) < stream(0.0, theta) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let s = bilinear(&t.s, x, r).unwrap();
            assert!((s - s_start).abs() <= bound, "x {x} r {r}");
        }
    }
}

#[test]
fn nonpositive_flux_rejected() {
    let g = grid(17, 17);
    let m = uniform(g, -1.0);
    assert!(matches!(build_stream_map(&m), Err(TransportError::NonPositiveFlux(_))));
    assert!(trace_characteristic(&uniform(g, 1.0), 2.0, 0.5).is_err());
}

#[test]
fn slope_and_boundary_conditions() {
    let g = grid(17, 17);
    let mr = Field2D::from_fn(g, Parity::Even, |_, r| 0.2 + r);
    let m = MeridionalMomentum::new(Field2D::from_fn(g, Parity::Even, |_, _| 2.0), mr);
    for i in 0..g.nx {
        assert_eq!(m.mr.get(i, 0), 0.0);
        assert_eq!(m.mr.get(i, g.nr - 1), 0.0);
    }
    assert!((m.max_slope() - 0.5 * (0.2 + 15.0 / 16.0)).abs() < 1e-14);
}
