use approx::assert_relative_eq;
use eitmem_core::medium::{
    calibrate, derive_coupling, eit_bandwidth, group_velocity, storage_decay_factor,
};
use eitmem_core::{CalibrationAnchors, Error, MediumParams};
use proptest::prelude::*;

fn medium() -> impl Strategy<Value = MediumParams> {
    (0.0..200.0f64, 1e6..1e10f64, 0.0..1e4f64, 1e-3..1.0f64)
        .prop_map(|(a, g, gs, l)| MediumParams::new(a, g, gs, l).unwrap())
}

proptest! {
    #[test]
    fn coupling_identity(m in medium()) {
        let g = derive_coupling(&m).unwrap();
        prop_assert!((g * g * 2.0 * m.length / (m.gamma * m.light_speed) - m.alpha_l).abs() <= 1e-12 * m.alpha_l.max(1.0));
    }

    #[test]
    fn bandwidth_times_transit_is_sqrt_depth(m in medium(), rabi in 1e5..1e9f64) {
        prop_assume!(m.alpha_l > 1e-3);
        let vg = group_velocity(rabi, &m).unwrap();
        let bw = eit_bandwidth(rabi, &m).unwrap();
        prop_assert!((bw * m.length / vg / m.alpha_l.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_is_multiplicative(m in medium(), t1 in 0.0..1e-3f64, t2 in 0.0..1e-3f64) {
        let f = |t| storage_decay_factor(&m, t).unwrap();
        prop_assert!((f(t1 + t2) - f(t1) * f(t2)).abs() < 1e-14);
    }

    #[test]
    fn calibration_monotone(t1 in 40.0..80.0f64, t2 in 40.0..80.0f64, p1 in 0.0..50.0f64, p2 in 0.0..50.0f64) {
        let anchors = CalibrationAnchors::default();
        let (a1, r1) = calibrate(t1, p1, &anchors).unwrap();
        let (a2, r2) = calibrate(t2, p2, &anchors).unwrap();
        if t1 < t2 { prop_assert!(a1 <= a2); }
        if p1 < p2 { prop_assert!(r1 <= r2); }
    }

    #[test]
    fn transit_and_rabi_are_inverse(m in medium(), t in 0.01..100.0f64) {
        prop_assume!(m.alpha_l > 1e-3);
        prop_assert!((m.transit_time_us(m.rabi_for_transit_us(t)) / t - 1.0).abs() < 1e-12);
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(matches!(
        MediumParams::new(-1.0, 1.0, 0.0, 1.0),
        Err(Error::InvalidParameter { .. })
    ));
    assert!(MediumParams::new(1.0, 0.0, 0.0, 1.0).is_err());
    assert!(MediumParams::new(1.0, 1.0, -1.0, 1.0).is_err());
    assert!(MediumParams::new(1.0, 1.0, 0.0, 0.0).is_err());
    assert!(MediumParams::new(f64::NAN, 1.0, 0.0, 1.0).is_err());
    let m = MediumParams::rb_cell(24.0).unwrap();
    assert!(storage_decay_factor(&m, -1.0).is_err());
    assert!(CalibrationAnchors::default().rabi_for_power(-1.0).is_err());
    assert!(matches!(
        CalibrationAnchors::default().alpha_l_at(100.0),
        Err(Error::OutOfRange { .. })
    ));
}

#[test]
fn lab_anchors() {
    let anchors = CalibrationAnchors::default();
    let (a, r) = calibrate(60.5, 16.0, &anchors).unwrap();
    assert_relative_eq!(a, 24.0, max_relative = 1e-12);
    assert_relative_eq!(r, std::f64::consts::TAU * 6.13e6, max_relative = 1e-12);
    // 500 us spin coherence: exp(-100/500) after 100 us.
    let m = MediumParams::rb_cell(24.0).unwrap().with_gamma_s(1000.0);
    assert_relative_eq!(
        storage_decay_factor(&m, 100e-6).unwrap(),
        (-0.2f64).exp(),
        max_relative = 1e-14
    );
}
