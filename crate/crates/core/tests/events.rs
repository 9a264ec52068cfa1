mod oracles;

use evdet::events::{
    canonicalize, decode_binary, encode_binary, encode_text, read_events, read_text, write_events, Event,
    EventFormat, Polarity, StreamHeader,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn shuffled_events_match_naive_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut events = oracles::random_events(&mut rng, 1000, 32, 16, 500);
    // force some duplicates
    let dup = events[..20].to_vec();
    events.extend(dup);
    events.shuffle(&mut rng);
    let expected = oracles::naive_sort(events.clone());
    let s = canonicalize(StreamHeader::new(32, 16, 0, 500), events).unwrap();
    assert_eq!(s.events(), expected.as_slice());
}

#[test]
fn slice_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let events = oracles::random_events(&mut rng, 10_000, 64, 64, 1_000_000);
    let s = canonicalize(StreamHeader::new(64, 64, 0, 1_000_000), events).unwrap();
    for _ in 0..50 {
        let a = rand::Rng::gen_range(&mut rng, 0..=1_000_000u64);
        let b = rand::Rng::gen_range(&mut rng, a..=1_000_001u64);
        let got = s.slice(a, b).unwrap();
        assert_eq!(got.events(), oracles::linear_scan_slice(s.events(), a, b).as_slice());
    }
}

#[test]
fn million_event_binary_rewrite_is_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let events = oracles::random_events(&mut rng, 1_000_000, 640, 480, 10_000_000);
    let s = canonicalize(StreamHeader::new(640, 480, 0, 10_000_000), events).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.evb");
    let b = dir.path().join("b.evb");
    write_events(&s, &a, EventFormat::Binary).unwrap();
    let back = read_events(&a, EventFormat::Binary).unwrap();
    assert_eq!(back, s);
    write_events(&back, &b, EventFormat::Binary).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn text_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.evt");
    let s = canonicalize(
        StreamHeader::new(20, 10, 0, 2000),
        vec![Event::new(1000, 12, 7, Polarity::Off), Event::new(5, 0, 9, Polarity::On)],
    )
    .unwrap();
    write_events(&s, &path, EventFormat::Text).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "# EVT 20 10 0 2000\n5 0 9 1\n1000 12 7 -1\n"
    );
    assert_eq!(read_events(&path, EventFormat::Text).unwrap(), s);
}

fn arb_events() -> impl Strategy<Value = Vec<Event>> {
    prop::collection::vec(
        (0u64..200, 0u16..8, 0u16..6, any::<bool>()).prop_map(|(t, x, y, on)| {
            Event::new(t, x, y, if on { Polarity::On } else { Polarity::Off })
        }),
        0..200,
    )
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent(events in arb_events()) {
        let h = StreamHeader::new(8, 6, 0, 200);
        let once = canonicalize(h, events).unwrap();
        let twice = once.clone().canonicalize().unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn slices_partition_the_stream(events in arb_events(), cuts in prop::collection::vec(0u64..=200, 0..6)) {
        let h = StreamHeader::new(8, 6, 0, 200);
        let s = canonicalize(h, events).unwrap();
        let mut edges = cuts;
        edges.push(0);
        edges.push(201);
        edges.sort_unstable();
        let mut joined = Vec::new();
        for w in edges.windows(2) {
            joined.extend_from_slice(s.slice(w[0], w[1]).unwrap().events());
        }
        prop_assert_eq!(canonicalize(h, joined).unwrap(), s);
    }

    #[test]
    fn both_formats_conserve_events(events in arb_events()) {
        let s = canonicalize(StreamHeader::new(8, 6, 0, 200), events).unwrap();
        let text = read_text(&encode_text(&s)[..]).unwrap();
        let bin = decode_binary(&encode_binary(&s)).unwrap();
        prop_assert_eq!(text.len(), s.len());
        prop_assert_eq!(&bin, &s);
        prop_assert_eq!(&text, &s);
    }
}
