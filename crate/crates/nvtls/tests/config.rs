use std::f64::consts::PI;

use nvtls::config::{params_from_kv, params_to_kv, parse_number, RunConfig};
use nvtls::CliError;
use nvtls_core::spin::SpinSystemParams;
use proptest::prelude::*;

#[test]
fn unspecified_keys_fall_back_to_defaults() {
    let c = RunConfig::parse("# empty\n\n").unwrap();
    assert_eq!((c.field.b, c.field.theta_deg, c.field.phi_deg), (28.9, 38.4, 0.0));
    assert_eq!((c.drive.omega0, c.drive.omega), (1.7, 1.7));
    assert_eq!(c.system, SpinSystemParams::default());
    assert_eq!(c.seed, 42);
}

#[test]
fn prefixed_keys_override() {
    let c = RunConfig::parse("field.B = 20\nsystem.A1xz = 3 # comment\nexperiment.flip = 0.5pi\nseed = 7\n").unwrap();
    assert_eq!(c.field.b, 20.0);
    assert_eq!((c.system.a1[0][2], c.system.a1[2][0]), (3.0, 3.0));
    assert!((c.experiment.flip - PI / 2.0).abs() < 1e-15);
    assert_eq!(c.seed, 7);
}

#[test]
fn bad_lines_are_usage_errors_with_line_numbers() {
    for (text, needle) in [
        ("field.B = 1\nfield.C = 2\n", "line 2"),
        ("nonsense\n", "line 1"),
        ("drive.omega1 = fast\n", "line 1"),
        ("seed = -3\n", "line 1"),
        ("experiment.rabi_samples = 2.5\n", "line 1"),
    ] {
        match RunConfig::parse(text) {
            Err(e @ CliError::Usage(_)) => {
                assert_eq!(e.exit_code(), 1);
                assert!(e.to_string().contains(needle), "{e}");
            }
            other => panic!("{text:?}: {other:?}"),
        }
    }
}

#[test]
fn pi_multiples() {
    for (s, v) in [("pi", PI), ("0.5pi", 0.5 * PI), ("-2*pi", -2.0 * PI), ("pi/2", PI / 2.0), ("3pi/4", 0.75 * PI), ("1.25", 1.25)] {
        assert!((parse_number(s).unwrap() - v).abs() < 1e-15, "{s}");
    }
    for s in ["", "pi2", "xpi", "pi/0", "1..2"] {
        assert!(parse_number(s).is_err(), "{s}");
    }
}

#[test]
fn asymmetric_tensor_rejected_by_validation() {
    let mut c = RunConfig::default();
    c.system.a1[0][1] = 1.0;
    assert!(matches!(c.validate(), Err(CliError::Usage(_))));
}

#[test]
fn bare_params_reject_prefixed_keys() {
    assert!(params_from_kv("system.D = 1\n").is_err());
    assert_eq!(params_from_kv("D = 2870.2\n").unwrap(), SpinSystemParams::default());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn params_round_trip(v in proptest::collection::vec(-500.0f64..3000.0, 12)) {
        let mut p = SpinSystemParams { d: v[0], p: v[1], gamma_e: v[2], gamma_n1: v[3], gamma_n2: v[4], ..SpinSystemParams::default() };
        p.a1[0][0] = v[5]; p.a1[1][1] = v[6]; p.a1[2][2] = v[7]; p.a1[0][2] = v[8]; p.a1[2][0] = v[8];
        p.a2[0][0] = v[9]; p.a2[1][1] = v[10]; p.a2[2][2] = v[11];
        prop_assert_eq!(params_from_kv(&params_to_kv(&p)).unwrap(), p);
    }

    #[test]
    fn run_config_round_trip(b in 0.0f64..100.0, theta in 0.0f64..180.0, w1 in 0.0f64..5.0, seed in any::<u64>(), n in 8usize..10000) {
        let mut c = RunConfig::default();
        c.field.b = b;
        c.field.theta_deg = theta;
        c.drive.omega1 = w1;
        c.seed = seed;
        c.experiment.ramsey_samples = n;
        c.experiment.at_lac = n % 2 == 0;
        prop_assert_eq!(RunConfig::parse(&c.to_kv()).unwrap(), c);
    }

    #[test]
    fn plain_numbers_parse_exactly(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(parse_number(&x.to_string()).unwrap(), x);
    }
}
