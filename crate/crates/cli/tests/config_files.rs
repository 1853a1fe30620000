use proptest::prelude::*;
use sgflow::ma_solver::Scheme;
use sgflow::mms::ProblemKind;
use sgflow::simulation::{InitMethod, SimConfig};
use sgflow::transport::{FootPolicy, TransportMethod};
use sgflow_cli::config::{
    cells_for_spacing, parse_config, parse_config_str, parse_list, parse_number, preset, render_config, ConfigError,
    PRESETS,
};

#[test]
fn blob_run_parameters() {
    let cfg = parse_config_str("epsilon = 0.01\ndt = 0.001\nh_cells = 120\ntest = 3\n").unwrap();
    assert_eq!(cfg.problem, ProblemKind::Test3);
    assert_eq!(cfg.cells, 120);
    assert_eq!(cfg.dt, 0.001);
    assert_eq!(cfg.solver.eps, 0.01);
    assert!((6.0 / cfg.cells as f64 - 0.05).abs() < 1e-15);
}

#[test]
fn documented_defaults() {
    let cfg = parse_config_str("test = 2").unwrap();
    assert_eq!(cfg.solver.eps, 0.01);
    assert_eq!(cfg.n_quad, 4);
    assert_eq!(cfg.degree, 3);
    assert_eq!(cfg.solver.newton_tol, 1e-10);
    assert_eq!(cfg.solver.scheme, Scheme::Newton);
    assert_eq!(cfg.transport, TransportMethod::L2Projection);
    assert_eq!(cfg.policy, FootPolicy::Clamp);
    assert_eq!(cfg.init, InitMethod::Interpolate);
}

#[test]
fn missing_test_names_the_key() {
    let e = parse_config_str("epsilon = 0.01\n").unwrap_err();
    assert!(matches!(e, ConfigError::Missing("test")), "{e}");
    assert!(e.to_string().contains("`test`"));
}

#[test]
fn negative_epsilon_is_rejected() {
    let e = parse_config_str("test = 1\nepsilon = -1\n").unwrap_err();
    match e {
        ConfigError::Invalid { key, .. } => assert_eq!(key, "epsilon"),
        other => panic!("{other}"),
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases = [
        ("test = 1\n# note\nwidth = 3\n", 3),
        ("test = 1\ntest = 2\n", 2),
        ("test = 1\ndt\n", 2),
        ("test = 4\n", 1),
        ("test = 1\n\nscheme = picard\n", 3),
        ("test = 1\ndt = 1/0\n", 2),
    ];
    for (text, want) in cases {
        match parse_config_str(text).unwrap_err() {
            ConfigError::Parse { line, .. } => assert_eq!(line, want, "{text:?}"),
            other => panic!("{text:?}: {other}"),
        }
    }
}

#[test]
fn fractions_and_spacing() {
    assert_eq!(parse_number("1/12").unwrap(), 1.0 / 12.0);
    assert_eq!(parse_list("1/12, 1/20,1/32").unwrap(), vec![1.0 / 12.0, 0.05, 1.0 / 32.0]);
    assert!(parse_number("abc").is_err());
    assert_eq!(cells_for_spacing(1.0, 1.0 / 12.0).unwrap(), 12);
    assert_eq!(cells_for_spacing(6.0, 0.05).unwrap(), 120);
    assert_eq!(cells_for_spacing(1.0, 0.023).unwrap(), 44);
    let cfg = parse_config_str("test = 2\nh = 1/20\ndt = 1/400\nt_final = 0.25\n").unwrap();
    assert_eq!(cfg.cells, 20);
    assert_eq!(cfg.num_steps(), 100);
}

#[test]
fn coarsest_sweep_step_count() {
    let cfg = parse_config_str("test = 2\nh = 1/12\ndt = 1/144\nt_final = 0.25\n").unwrap();
    assert_eq!(cfg.num_steps(), 36);
}

#[test]
fn h_and_h_cells_are_exclusive() {
    let e = parse_config_str("test = 1\nh = 0.1\nh_cells = 10\n").unwrap_err();
    assert!(matches!(e, ConfigError::Invalid { .. }), "{e}");
}

#[test]
fn presets_load_and_can_be_overridden() {
    for name in PRESETS {
        let cfg = preset(name).unwrap();
        assert_eq!(cfg.problem, ProblemKind::Test3);
        assert_eq!(cfg.cells, 120);
        assert_eq!(cfg.snapshots[..3], [0.0, 0.05, 0.1]);
    }
    assert_eq!(preset("test3-text").unwrap().dt, 0.001);
    assert_eq!(preset("test3-caption").unwrap().dt, 0.01);
    let cfg = parse_config_str("preset = test3-caption\nh_cells = 30\n").unwrap();
    assert_eq!((cfg.cells, cfg.dt), (30, 0.01));
    assert!(parse_config_str("preset = fig9\n").is_err());
}

#[test]
fn reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "test = 1 # radial\nh_cells = 8\n").unwrap();
    assert_eq!(parse_config(&path).unwrap().cells, 8);
    assert!(matches!(parse_config(dir.path().join("absent.cfg")), Err(ConfigError::Io { .. })));
}

fn config_strategy() -> impl Strategy<Value = SimConfig> {
    (
        prop_oneof![Just(ProblemKind::Test1), Just(ProblemKind::Test2), Just(ProblemKind::Test3)],
        1usize..200,
        1u32..1000,
        1u32..40,
        1usize..=3,
        1usize..=10,
        1e-3f64..1.0,
        any::<bool>(),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(problem, cells, steps, dt_inv, degree, n_quad, eps, fp, nodal, init)| {
            let dt = 1.0 / dt_inv as f64;
            let mut cfg = SimConfig {
                problem,
                cells,
                dt,
                t_final: steps as f64 * dt,
                degree,
                n_quad,
                transport: if nodal { TransportMethod::NodalInterpolation } else { TransportMethod::L2Projection },
                policy: if init { FootPolicy::ExtendByInitial } else { FootPolicy::Clamp },
                init: if init { InitMethod::Projection } else { InitMethod::Interpolate },
                snapshots: vec![0.0, dt],
                ..Default::default()
            };
            cfg.solver.eps = eps;
            cfg.solver.scheme = if fp { Scheme::FixedPoint } else { Scheme::Newton };
            cfg
        })
}

proptest! {
    #[test]
    fn render_parse_round_trip(cfg in config_strategy()) {
        let text = render_config(&cfg);
        let back = parse_config_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(render_config(&back), text);
    }
}
