use proptest::prelude::*;
use std::process::Command as Proc;
use swirlsolve::background::EntranceEnv;
use swirlsolve::io::{
    fields_csv, parse_config, read_fields_csv, run, Command, ConfigError, FieldsError, Overrides, RunConfig,
    FIELD_HEADER, REPORT_SCHEMA,
};
use swirlsolve::iteration::{solve, InitialGuess, SolveConfig};
use swirlsolve::perturbation::PerturbationSpec;
use swirlsolve::thermo::GasParams;

fn small(dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.apply(&Overrides {
        out_dir: Some(dir.display().to_string()),
        grid: Some((33, 17)),
        sigma: Some(1e-3),
        levels: Some(2),
    });
    cfg
}

#[test]
fn empty_object_gives_valid_defaults() {
    let cfg = parse_config("{}").unwrap();
    assert_eq!(cfg, RunConfig::default());
    let partial = parse_config(r#"{"solver": {"nx": 33, "nr": 17}}"#).unwrap();
    assert_eq!((partial.solver.nx, partial.solver.nr), (33, 17));
    assert_eq!(partial.solver.relax_outer, SolveConfig::default().relax_outer);
}

#[test]
fn unknown_keys_are_reported_with_their_path() {
    match RunConfig::from_json(r#"{"solver": {"nx": 33, "bogus": 1}}"#) {
        Err(ConfigError::Parse { path, message }) => {
            assert!(path.starts_with("solver"), "{path}");
            assert!(message.contains("bogus"));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(RunConfig::from_json(r#"{"solver": {"nx": "many"}}"#), Err(ConfigError::Parse { .. })));
}

#[test]
fn every_invalid_entry_is_listed() {
    let text = r#"{
        "gas": {"gamma": 0.5},
        "solver": {"nr": 2, "tol_outer": 0},
        "sweep": {"sigmas": [1e-3, -1]},
        "verify": {"streamlines": 0},
        "out_dir": ""
    }"#;
    match parse_config(text) {
        Err(ConfigError::Invalid(problems)) => {
            for key in ["gas.gamma", "solver.nr", "solver.tol_outer", "sweep.sigmas[1]", "verify.streamlines", "out_dir"] {
                assert!(problems.iter().any(|p| p.starts_with(key)), "{key} not in {problems:?}");
            }
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn supersonic_entrance_is_rejected() {
    let mut cfg = RunConfig::default();
    cfg.entrance.rho0 = 0.1;
    let problems = cfg.problems();
    assert!(problems.iter().any(|p| p.starts_with("entrance.rho0")), "{problems:?}");
}

#[test]
fn overrides_replace_configured_values() {
    let mut cfg = RunConfig::default();
    cfg.apply(&Overrides { out_dir: Some("x".into()), grid: Some((17, 9)), sigma: Some(2e-3), levels: Some(5) });
    assert_eq!(cfg.out_dir, "x");
    assert_eq!((cfg.solver.nx, cfg.solver.nr), (17, 9));
    assert_eq!(cfg.perturbation.amplitude, 2e-3);
    assert_eq!(cfg.convergence.levels, 5);
    let before = cfg.clone();
    cfg.apply(&Overrides::default());
    assert_eq!(cfg, before);
}

proptest! {
    #[test]
    fn config_round_trip_is_byte_identical(
        nx in 9usize..300,
        nr in 5usize..150,
        amp in 0.0f64..0.05,
        gamma in 1.05f64..2.0,
        relax in 0.05f64..1.0,
        seed in any::<u64>(),
        radius in 0.0f64..0.01,
        sigmas in prop::collection::vec(1e-6f64..1e-1, 1..6),
    ) {
        let mut cfg = RunConfig::default();
        cfg.solver.nx = nx;
        cfg.solver.nr = nr;
        cfg.solver.relax_outer = relax;
        cfg.gas.gamma = gamma;
        cfg.perturbation.amplitude = amp;
        cfg.initial_guess = InitialGuess::Perturbed { seed, radius };
        cfg.sweep.sigmas = sigmas;
        let first = cfg.to_json();
        let back = RunConfig::from_json(&first).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json(), first);
    }
}

#[test]
fn field_file_round_trips() {
    let cfg = SolveConfig { nx: 33, nr: 17, ..Default::default() };
    let sol = solve(&EntranceEnv::default(), &GasParams::default(), &PerturbationSpec::default().with_amplitude(1e-3), &cfg, InitialGuess::Background)
        .unwrap();
    let text = fields_csv(&sol);
    assert_eq!(text.lines().next(), Some(FIELD_HEADER));
    assert_eq!(text.lines().count(), 1 + 33 * 17);
    let stored = read_fields_csv(&text).unwrap();
    let st = sol.primitive();
    assert_eq!(stored.state.grid, st.grid);
    for (a, b) in [(&stored.state.rho, &st.rho), (&stored.state.ux, &st.ux), (&stored.state.utheta, &st.utheta), (&stored.state.phi, &st.phi)] {
        assert!(a.max_abs_diff(b) <= 1e-15 * b.max_abs().max(1.0));
    }
    assert!(stored.psi.max_abs_diff(&sol.iterate.pot.psi) <= 1e-18);
}

#[test]
fn malformed_field_files_are_rejected() {
    assert_eq!(read_fields_csv("a,b\n1,2\n"), Err(FieldsError::Header));
    let short = format!("{FIELD_HEADER}\n0,0,1\n");
    assert!(matches!(read_fields_csv(&short), Err(FieldsError::Line { line: 2, .. })));
    assert!(matches!(read_fields_csv(&format!("{FIELD_HEADER}\n")), Err(FieldsError::Layout(_))));
}

#[test]
fn solve_writes_deterministic_reports() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let mut c1 = small(d1.path());
    let mut c2 = small(d2.path());
    c1.out_dir = "same".into();
    c2.out_dir = "same".into();
    let read = |cfg: &RunConfig, dir: &std::path::Path| {
        let mut cfg = cfg.clone();
        cfg.out_dir = dir.display().to_string();
        let out = run(Command::Solve, &cfg).unwrap();
        assert!(out.passed, "{}", out.summary);
        let report = std::fs::read_to_string(dir.join("report.json")).unwrap();
        report.replace(&cfg.out_dir, "OUT")
    };
    let (a, b) = (read(&c1, d1.path()), read(&c2, d2.path()));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema"], REPORT_SCHEMA);
    assert_eq!(v["command"], "solve");
    assert_eq!(v["passed"], true);
}

#[test]
fn verify_reads_stored_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    assert!(run(Command::Solve, &cfg).unwrap().passed);
    let out = run(Command::Verify, &cfg).unwrap();
    assert!(out.summary.contains("stored"), "{}", out.summary);
    assert!(out.passed, "{}", out.summary);
}

#[test]
fn background_and_sweep_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.sweep.sigmas = vec![1e-4, 1e-3];
    assert!(run(Command::Background, &cfg).unwrap().passed);
    assert!(dir.path().join("background.csv").exists());
    let out = run(Command::Sweep, &cfg).unwrap();
    assert!(out.passed, "{}", out.summary);
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_swirlsolve"))
}

#[test]
fn unknown_subcommand_exits_with_two() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"solver": {"nx": 1}}"#).unwrap();
    let out = bin().arg("solve").arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.nx"));
}

#[test]
fn unperturbed_solve_succeeds_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["solve", "--grid", "33,17", "--sigma", "0", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["outer_iterations"], 1);
    assert!(report["result"]["error_vs_background"]["max"].as_f64().unwrap() <= 1e-10);
}
