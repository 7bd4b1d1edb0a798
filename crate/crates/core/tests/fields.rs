use eitmem_core::fields::shapes::Shape;
use eitmem_core::{SampledPulse, SpinWave};
use num_complex::Complex64 as C64;
use proptest::collection::vec;
use proptest::prelude::*;

fn pulse() -> impl Strategy<Value = SampledPulse> {
    (
        -10.0..10.0f64,
        0.1..20.0f64,
        vec((-5.0..5.0f64, -5.0..5.0f64), 2..200),
    )
        .prop_map(|(t0, len, s)| {
            let samples = s.into_iter().map(|(re, im)| C64::new(re, im)).collect();
            SampledPulse::new(t0, t0 + len, samples).unwrap()
        })
}

fn nonzero_pulse() -> impl Strategy<Value = SampledPulse> {
    pulse().prop_filter("nonzero energy", |p| p.energy() > 1e-6)
}

fn scalar() -> impl Strategy<Value = C64> {
    (-3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(re, im)| C64::new(re, im))
        .prop_filter("nonzero", |c| c.norm() > 1e-3)
}

proptest! {
    #[test]
    fn time_reverse_is_an_energy_preserving_involution(p in pulse()) {
        let r = p.time_reverse();
        prop_assert_eq!(r.window(), p.window());
        prop_assert!((r.energy() - p.energy()).abs() <= 1e-12 * p.energy().max(1.0));
        prop_assert_eq!(r.time_reverse(), p);
    }

    #[test]
    fn normalize_is_idempotent(p in nonzero_pulse()) {
        let n = p.normalize().unwrap();
        prop_assert!((n.energy() - 1.0).abs() < 1e-12);
        let nn = n.normalize().unwrap();
        for (a, b) in n.samples().iter().zip(nn.samples()) {
            prop_assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn energy_is_quadratic(p in pulse(), c in scalar()) {
        let e = p.energy();
        prop_assert!((p.scaled(c).energy() - c.norm_sqr() * e).abs() <= 1e-10 * (1.0 + e * c.norm_sqr()));
    }

    #[test]
    fn overlap_symmetric_and_scale_invariant(a in nonzero_pulse(), b in nonzero_pulse(), c in scalar(), d in scalar()) {
        let ab = SampledPulse::overlap(&a, &b).unwrap();
        let ba = SampledPulse::overlap(&b, &a).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-10);
        let scaled = SampledPulse::overlap(&a.scaled(c), &b.scaled(d)).unwrap();
        prop_assert!((scaled - ab).abs() < 1e-9);
    }

    #[test]
    fn overlap_of_proportional_pulses_is_one(a in nonzero_pulse(), c in scalar()) {
        let o = SampledPulse::overlap(&a, &a.scaled(c)).unwrap();
        prop_assert!((o - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip(p in pulse()) {
        let mut buf = Vec::new();
        p.write_csv(&mut buf, Some("run abc")).unwrap();
        let q = SampledPulse::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(q.len(), p.len());
        prop_assert!((q.t_start() - p.t_start()).abs() < 1e-12 && (q.t_end() - p.t_end()).abs() < 1e-9);
        for (a, b) in p.samples().iter().zip(q.samples()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn spin_wave_overlap_and_normalization(s in vec((-2.0..2.0f64, -2.0..2.0f64), 2..300), c in scalar()) {
        let samples: Vec<C64> = s.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        let w = SpinWave::new(samples).unwrap();
        prop_assume!(w.energy() > 1e-6);
        let n = w.normalize().unwrap();
        prop_assert!((n.energy() - 1.0).abs() < 1e-12);
        prop_assert!((SpinWave::overlap(&w, &w.scaled(c)).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn invalid_pulses_are_rejected() {
    assert!(SampledPulse::new(0.0, 1.0, vec![C64::new(1.0, 0.0)]).is_err());
    assert!(SampledPulse::new(1.0, 1.0, vec![C64::new(1.0, 0.0); 3]).is_err());
    assert!(SampledPulse::new(0.0, 1.0, vec![C64::new(f64::NAN, 0.0); 3]).is_err());
    assert!(SampledPulse::zeros(0.0, 1.0, 5)
        .unwrap()
        .normalize()
        .is_err());
    assert!(SpinWave::new(vec![C64::new(1.0, 0.0)]).is_err());
}

#[test]
fn shapes_are_nonnegative_and_nonzero() {
    for shape in Shape::ALL {
        let p = shape.sample(20.0, 2001).unwrap();
        assert_eq!(p.window(), (-20.0, 0.0));
        assert!(p.energy() > 0.0, "{}", shape.name());
        assert!(
            p.samples().iter().all(|s| s.re >= 0.0 && s.im == 0.0),
            "{}",
            shape.name()
        );
    }
}

#[test]
fn csv_rejects_uneven_spacing() {
    let text = "t_us,re,im\n0,1,0\n1,1,0\n3,1,0\n";
    assert!(SampledPulse::read_csv(text.as_bytes()).is_err());
}
