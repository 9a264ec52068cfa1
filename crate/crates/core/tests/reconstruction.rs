mod oracles;

use evdet::events::{canonicalize, Event, EventStream, Polarity, StreamHeader};
use evdet::reconstruction::{integrate, reconstruct, ReconConfig, ToneMap};
use evdet::representations::{build_ecm, EcmMode, Normalization};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(alpha: f64, contrast: f64, period: u64) -> ReconConfig<f64> {
    ReconConfig {
        alpha,
        contrast,
        sample_period: period,
        tone_map: ToneMap::default(),
    }
}

#[test]
fn impulse_response_at_many_instants() {
    let s = canonicalize(StreamHeader::new(1, 1, 0, 1_000_000), vec![Event::new(0, 0, 0, Polarity::On)]).unwrap();
    let frames = integrate(&s, &cfg(5.0, 0.2, 10_000)).unwrap();
    assert_eq!(frames.len(), 100);
    for (t, state) in frames {
        let want = 0.2 * (-5.0 * t as f64 * 1e-6).exp();
        assert!((state[0] - want).abs() < 1e-6);
    }
}

#[test]
fn single_pixel_matches_superposition_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut events: Vec<(u64, i8)> = (0..1000)
        .map(|_| (rng.gen_range(0..2_000_000u64), if rng.gen_bool(0.5) { 1 } else { -1 }))
        .collect();
    events.sort();
    events.dedup();
    let s = canonicalize(
        StreamHeader::new(1, 1, 0, 2_000_000),
        events
            .iter()
            .map(|(t, p)| Event::new(*t, 0, 0, Polarity::from_sign(i64::from(*p)).unwrap()))
            .collect(),
    )
    .unwrap();
    let frames = integrate(&s, &cfg(3.0, 0.15, 7_919)).unwrap();
    let worst = frames
        .iter()
        .map(|(t, st)| (st[0] - oracles::superposed_state(&events, *t, 3.0, 0.15)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "max discrepancy {worst}");
}

#[test]
fn pure_integrator_equals_scaled_ecm() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ev = oracles::random_events(&mut rng, 4000, 12, 9, 500_000);
    let s = canonicalize(StreamHeader::new(12, 9, 0, 500_000), ev).unwrap();
    let frames = integrate(&s, &cfg(0.0, 0.2, 100_000)).unwrap();
    let ecm = build_ecm(&s, 1_000_000, EcmMode::Signed, Normalization::PerSequence).unwrap();
    let last = &frames.last().unwrap().1;
    for (st, raw) in last.iter().zip(&ecm.bins[0].raw) {
        assert_eq!(*st, 0.2 * f64::from(*raw));
    }
}

#[test]
fn gray_is_monotone_in_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ev = oracles::random_events(&mut rng, 3000, 10, 10, 300_000);
    let s = canonicalize(StreamHeader::new(10, 10, 0, 300_000), ev).unwrap();
    for tone in [ToneMap::default(), ToneMap::Fixed { min: -0.5, max: 0.5 }] {
        let c = ReconConfig { tone_map: tone, ..cfg(2.0, 0.1, 50_000) };
        let frames = reconstruct(&s, &c).unwrap();
        let mut pairs: Vec<(f64, u8)> = frames
            .iter()
            .flat_map(|f| f.state.iter().copied().zip(f.gray.iter().copied()))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    }
}

fn arb_pixel_stream() -> impl Strategy<Value = EventStream> {
    prop::collection::vec((0u64..=400_000, 0u16..3, any::<bool>()), 0..80).prop_map(|v| {
        let events = v
            .into_iter()
            .map(|(t, x, on)| Event::new(t, x, 0, if on { Polarity::On } else { Polarity::Off }))
            .collect();
        canonicalize(StreamHeader::new(3, 1, 0, 400_000), events).unwrap()
    })
}

proptest! {
    #[test]
    fn decay_never_grows_without_events(alpha in 0.0f64..20.0) {
        let s = canonicalize(
            StreamHeader::new(1, 1, 0, 500_000),
            vec![Event::new(1000, 0, 0, Polarity::Off), Event::new(2000, 0, 0, Polarity::Off)],
        ).unwrap();
        let frames = integrate(&s, &cfg(alpha, 0.3, 25_000)).unwrap();
        for w in frames.windows(2) {
            prop_assert!(w[1].1[0].abs() <= w[0].1[0].abs());
        }
    }

    #[test]
    fn linear_in_contrast(s in arb_pixel_stream(), alpha in 0.0f64..10.0, c in 0.01f64..1.0) {
        let a = integrate(&s, &cfg(alpha, c, 40_000)).unwrap();
        let b = integrate(&s, &cfg(alpha, 2.0 * c, 40_000)).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            for (p, q) in x.iter().zip(y) {
                prop_assert!((2.0 * p - q).abs() <= 1e-12 * (1.0 + q.abs()));
            }
        }
    }

    #[test]
    fn time_shift_equivariance(s in arb_pixel_stream(), alpha in 0.0f64..10.0, shift in 0u64..1_000_000) {
        let (h, ev) = s.clone().into_parts();
        let moved = canonicalize(
            StreamHeader::new(h.width, h.height, h.t_start + shift, h.t_end + shift),
            ev.iter().map(|e| Event::new(e.t + shift, e.x, e.y, e.p)).collect(),
        ).unwrap();
        let a = integrate(&s, &cfg(alpha, 0.2, 30_000)).unwrap();
        let b = integrate(&moved, &cfg(alpha, 0.2, 30_000)).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for ((ta, x), (tb, y)) in a.iter().zip(&b) {
            prop_assert_eq!(ta + shift, *tb);
            for (p, q) in x.iter().zip(y) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }
    }
}
