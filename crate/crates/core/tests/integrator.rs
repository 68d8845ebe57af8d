use num_complex::Complex64;
use proptest::prelude::*;
use riccati_kit::ode::{integrate, IntegratorConfig, Status};

fn quadratic(_t: f64, y: &[Complex64], dy: &mut [Complex64]) {
    dy[0] = -y[0] * y[0];
}

fn end_error(cfg: &IntegratorConfig<f64>) -> f64 {
    let traj = integrate(&quadratic, &[Complex64::new(1.0, 0.0)], 0.0, 9.0, cfg).unwrap();
    (traj.last_state()[0].re - 0.1).abs()
}

#[test]
fn fixed_step_order_is_at_least_four() {
    let errs: Vec<f64> = [0.5, 0.25, 0.125, 0.0625]
        .iter()
        .map(|&h| end_error(&IntegratorConfig::fixed(h)))
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 4.0, "observed order {order} from {errs:?}");
    }
}

#[test]
fn tighter_tolerances_reduce_error() {
    let mut prev = f64::INFINITY;
    for k in 0..5 {
        let tol = 1e-6 / 2f64.powi(k);
        let e = end_error(&IntegratorConfig::with_tolerances(tol, tol * 1e-2));
        assert!(e < prev, "tolerance {tol}: {e} !< {prev}");
        prev = e;
    }
    assert!(end_error(&IntegratorConfig::default()) < 1e-8);
}

#[test]
fn pole_of_negative_start_is_localised() {
    let traj = integrate(&quadratic, &[Complex64::new(-1.0, 0.0)], 0.0, 5.0, &IntegratorConfig::default()).unwrap();
    match traj.status() {
        Status::BlowUpAt { time, bracket, wide, .. } => {
            assert!((time - 1.0).abs() < 1e-3);
            assert!(bracket.0 <= 1.0 + 1e-6 && bracket.1 >= 1.0 - 1e-6);
            assert!(bracket.1 - bracket.0 <= 1e-6);
            assert!(!wide);
        }
        s => panic!("expected escape, got {s:?}"),
    }
}

proptest! {
    #[test]
    fn poles_are_localised_for_any_negative_start(z0 in -4.0f64..-0.25) {
        // z = z0/(1 + z0 t) escapes at t* = −1/z0
        let traj = integrate(&quadratic, &[Complex64::new(z0, 0.0)], 0.0, 10.0, &IntegratorConfig::default()).unwrap();
        let t_star = -1.0 / z0;
        let time = traj.status().blowup_time().expect("escape");
        prop_assert!((time - t_star).abs() < 1e-3);
    }

    #[test]
    fn dense_output_hits_knots_and_reruns_are_identical(z0 in 0.1f64..3.0, t_end in 1.0f64..20.0) {
        let cfg = IntegratorConfig::default();
        let a = integrate(&quadratic, &[Complex64::new(z0, 0.0)], 0.0, t_end, &cfg).unwrap();
        let b = integrate(&quadratic, &[Complex64::new(z0, 0.0)], 0.0, t_end, &cfg).unwrap();
        prop_assert_eq!(a.times(), b.times());
        for (i, &t) in a.times().iter().enumerate() {
            prop_assert_eq!(a.eval(t).unwrap()[0], a.knot_state(i)[0]);
            prop_assert_eq!(a.knot_state(i)[0].re.to_bits(), b.knot_state(i)[0].re.to_bits());
        }
        let mid = 0.5 * t_end;
        let exact = z0 / (1.0 + z0 * mid);
        prop_assert!((a.eval(mid).unwrap()[0].re - exact).abs() < 1e-8);
    }
}
