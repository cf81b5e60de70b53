use wpmec_core::benchmarks::SchemeId;
use wpmec_harness::config::{ExperimentConfig, SweepVar, DEFAULT_REALIZATIONS};
use wpmec_harness::HarnessError;

fn parse(text: &str) -> Result<ExperimentConfig, HarnessError> {
    text.parse()
}

fn config_line(e: HarnessError) -> usize {
    match e {
        HarnessError::Config { line, .. } => line,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn defaults_match_the_homogeneous_setup() {
    let c = parse("").unwrap();
    let p = &c.base;
    assert_eq!(p.antennas, 4);
    assert_eq!(p.bandwidth, 2e6);
    assert_eq!(p.noise_power, 1e-9);
    assert_eq!(p.eh_efficiency, 0.3);
    assert_eq!(p.ap_energy_per_bit, 1e-4);
    let u = &p.users[0];
    assert_eq!((u.cycles_per_bit, u.capacitance, u.circuit_power, u.distance), (1e3, 1e-28, 1e-4, 5.0));
    assert_eq!(c.realizations, DEFAULT_REALIZATIONS);
    assert_eq!(c.schemes, SchemeId::ALL.to_vec());
    assert_eq!(c.reference_gain, 6.25e-4);
    assert_eq!(c.path_loss_exponent, 3.0);
    // No sweep: a single point at the base block length.
    assert_eq!(c.sweep_var, SweepVar::T);
    assert_eq!(c.sweep_values, vec![p.block_length]);
}

#[test]
fn full_file_round_trip() {
    let c = parse(
        "# comment line\n\
         antennas = 2\n\
         users = 3   # trailing comment\n\
         block_length = 0.2\n\
         bandwidth = 1e6\n\
         user.*.task_bits = 20e3\n\
         user.2.task_bits = 5e3\n\
         user.3.max_frequency = inf\n\
         sweep_var = d2\n\
         sweep_values = 2, 3.5, 8\n\
         realizations = 7\n\
         seed = 99\n\
         schemes = joint, local_only\n\
         output = out/x.csv\n\
         tol = 1e-9\n",
    )
    .unwrap();
    assert_eq!(c.base.antennas, 2);
    assert_eq!(c.users(), 3);
    assert_eq!(c.base.block_length, 0.2);
    assert_eq!(c.base.bandwidth, 1e6);
    let bits: Vec<f64> = c.base.users.iter().map(|u| u.task_bits).collect();
    assert_eq!(bits, vec![20e3, 5e3, 20e3]);
    assert!(c.base.users[2].max_frequency.is_infinite());
    assert_eq!(c.sweep_var, SweepVar::D2);
    assert_eq!(c.sweep_values, vec![2.0, 3.5, 8.0]);
    assert_eq!((c.realizations, c.seed), (7, 99));
    assert_eq!(c.schemes, vec![SchemeId::Joint, SchemeId::LocalOnly]);
    assert_eq!(c.output.to_str(), Some("out/x.csv"));
    assert_eq!(c.solve_options().tol, 1e-9);
    assert_eq!(c.params_at(3.5).unwrap().users[1].distance, 3.5);
}

#[test]
fn indexed_keys_beat_the_wildcard_in_any_order() {
    let c = parse("users = 2\nuser.1.distance = 2\nuser.*.distance = 7\n").unwrap();
    assert_eq!(c.base.users[0].distance, 2.0);
    assert_eq!(c.base.users[1].distance, 7.0);
}

#[test]
fn unknown_keys_are_errors_with_line_numbers() {
    assert_eq!(config_line(parse("users = 2\n\nbandwith = 1e6\n").unwrap_err()), 3);
    assert_eq!(config_line(parse("user.1.speed = 3\n").unwrap_err()), 1);
    assert_eq!(config_line(parse("sweep.var = T\n").unwrap_err()), 1);
    assert_eq!(config_line(parse("user.0.distance = 3\n").unwrap_err()), 1);
}

#[test]
fn malformed_lines_are_errors() {
    assert_eq!(config_line(parse("users 2\n").unwrap_err()), 1);
    assert_eq!(config_line(parse("block_length = fast\n").unwrap_err()), 1);
    assert_eq!(config_line(parse("users = -1\n").unwrap_err()), 1);
    assert_eq!(config_line(parse("seed =\n").unwrap_err()), 1);
    assert_eq!(config_line(parse("users = 2\nusers = 3\n").unwrap_err()), 2);
    assert_eq!(config_line(parse("sweep_var = Q\n").unwrap_err()), 1);
}

#[test]
fn empty_scheme_list_is_rejected() {
    assert!(parse("schemes = ,\n").is_err());
    assert!(parse("schemes = joint, beam\n").is_err());
}

#[test]
fn invalid_experiments_are_rejected() {
    assert!(parse("realizations = 0\n").is_err());
    assert!(parse("sweep_var = B\n").is_err(), "sweep_var without values");
    assert!(parse("sweep_var = T\nsweep_values = 0.1, -0.2\n").is_err());
    assert!(parse("users = 1\nsweep_var = d2\nsweep_values = 3\n").is_err());
    assert!(parse("users = 2\nuser.3.distance = 4\n").is_err());
    assert!(parse("sweep_var = K\nsweep_values = 2, 2.5\n").is_err());
    assert!(parse("eh_efficiency = 1.5\n").is_err());
    assert!(parse("tol = 0\n").is_err());
}

#[test]
fn user_count_sweep_expands_the_template() {
    let c = parse("users = 1\nuser.*.task_bits = 3e3\nuser.4.distance = 9\nsweep_var = K\nsweep_values = 2, 6\n").unwrap();
    let small = c.params_at(2.0).unwrap();
    let large = c.params_at(6.0).unwrap();
    assert_eq!(small.num_users(), 2);
    assert_eq!(large.num_users(), 6);
    assert!(large.users.iter().all(|u| u.task_bits == 3e3));
    assert_eq!(large.users[3].distance, 9.0);
    assert_eq!(large.users[2].distance, 5.0);
}

#[test]
fn other_sweep_variables_touch_one_field() {
    let base = "users = 2\nsweep_values = 1\n";
    for (var, check) in [
        ("T", Box::new(|p: &wpmec_core::model::SystemParams| p.block_length == 1.0) as Box<dyn Fn(&_) -> bool>),
        ("R", Box::new(|p: &wpmec_core::model::SystemParams| p.users.iter().all(|u| u.task_bits == 1.0))),
        ("B", Box::new(|p: &wpmec_core::model::SystemParams| p.bandwidth == 1.0)),
        ("R2", Box::new(|p: &wpmec_core::model::SystemParams| p.users[1].task_bits == 1.0 && p.users[0].task_bits == 10e3)),
    ] {
        let c = parse(&format!("{base}sweep_var = {var}\n")).unwrap();
        assert!(check(&c.params_at(1.0).unwrap()), "{var}");
    }
}
