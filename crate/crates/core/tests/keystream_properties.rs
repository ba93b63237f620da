use proptest::prelude::*;

use y00::keystream::{
    bits_from_hex, bits_to_hex, lfsr_sequence, lfsr_step, linear_complexity, running_keys, seed_from_u64,
    seed_to_u64, KeystreamState, LfsrSpec,
};

/// Number of distinct nonzero register windows visited before the start
/// window recurs; equals the period.
fn period(spec: &LfsrSpec) -> usize {
    let d = spec.degree();
    let seed = seed_from_u64(spec, 1).unwrap();
    let full = (1usize << d) - 1;
    let bits = lfsr_sequence(spec, &seed, full + d).unwrap();
    let window = |t: usize| bits[t..t + d].iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
    let start = window(0);
    let mut seen = vec![false; 1 << d];
    for t in 0..=full {
        let w = window(t);
        if t > 0 && w == start {
            return t;
        }
        assert!(
            !seen[w as usize],
            "window {w:#x} repeats before the start at degree {d}"
        );
        seen[w as usize] = true;
    }
    unreachable!("period exceeds 2^d - 1")
}

#[test]
fn primitive_registers_have_maximal_period() {
    for d in (2..=16).chain([17, 20]) {
        let spec = LfsrSpec::primitive(d).unwrap();
        assert_eq!(period(&spec), (1 << d) - 1, "degree {d}");
    }
}

#[test]
fn shift_and_add() {
    for d in 2..=8 {
        let spec = LfsrSpec::primitive(d).unwrap();
        let p = (1usize << d) - 1;
        let s = lfsr_sequence(&spec, &seed_from_u64(&spec, 1).unwrap(), p).unwrap();
        let rot = |k: usize| -> Vec<u8> { (0..p).map(|t| s[(t + k) % p]).collect() };
        let shifts: Vec<Vec<u8>> = (0..p).map(rot).collect();
        for k in 1..p {
            let sum: Vec<u8> = s.iter().zip(&shifts[k]).map(|(a, b)| a ^ b).collect();
            assert!(shifts.contains(&sum), "degree {d} shift {k}");
        }
    }
}

#[test]
fn linear_complexity_of_every_seed() {
    for d in 2..=10 {
        let spec = LfsrSpec::primitive(d).unwrap();
        for v in 1..(1u64 << d) {
            let seed = seed_from_u64(&spec, v).unwrap();
            let bits = lfsr_sequence(&spec, &seed, 2 * d).unwrap();
            assert_eq!(linear_complexity(&bits).unwrap(), d, "degree {d} seed {v}");
        }
    }
}

fn spec_and_seed() -> impl Strategy<Value = (LfsrSpec, Vec<u8>)> {
    (2usize..=24)
        .prop_flat_map(|d| {
            (
                Just(d),
                proptest::collection::btree_set(1..d, 1..d.min(5)),
                proptest::collection::vec(0u8..=1, d),
            )
        })
        .prop_filter("nonzero seed", |(_, _, seed)| seed.contains(&1))
        .prop_map(|(d, taps, seed)| {
            let spec = LfsrSpec::new(d, std::iter::once(d).chain(taps)).unwrap();
            (spec, seed)
        })
}

proptest! {
    #[test]
    fn sequence_obeys_recurrence((spec, seed) in spec_and_seed(), n in 0usize..200) {
        let bits = lfsr_sequence(&spec, &seed, n).unwrap();
        prop_assert_eq!(bits.len(), n);
        for t in spec.degree()..n {
            let expected = spec.taps().iter().fold(0, |acc, &e| acc ^ bits[t - e]);
            prop_assert_eq!(bits[t], expected);
        }
    }

    #[test]
    fn stepping_matches_sequence((spec, seed) in spec_and_seed(), n in 1usize..100) {
        let bits = lfsr_sequence(&spec, &seed, n).unwrap();
        let mut state = KeystreamState::new(&spec, seed).unwrap();
        for &expected in &bits {
            let (out, next) = lfsr_step(&state, &spec).unwrap();
            prop_assert_eq!(out, expected);
            state = next;
        }
        prop_assert_eq!(state.step_count(), n as u64);
    }

    #[test]
    fn running_keys_reassemble(bits in proptest::collection::vec(0u8..=1, 0..300), log_m in 1u32..=8) {
        let m = 1u32 << log_m;
        let w = log_m as usize;
        let rk = running_keys(&bits, m).unwrap();
        prop_assert_eq!(rk.len(), bits.len() / w);
        prop_assert_eq!(rk.discarded_bits(), bits.len() % w);
        prop_assert!(rk.symbols().iter().all(|&s| s < m));
        prop_assert_eq!(rk.to_bits(), bits[..bits.len() - bits.len() % w].to_vec());
    }

    #[test]
    fn integer_seed_roundtrip(d in 2usize..=64, v in 1u64..) {
        let spec = LfsrSpec::new(d, [d, 1]).unwrap();
        let masked = if d == 64 { v } else { v & ((1u64 << d) - 1) };
        prop_assume!(masked != 0);
        let seed = seed_from_u64(&spec, v).unwrap();
        prop_assert_eq!(seed_to_u64(&seed), masked);
    }

    #[test]
    fn hex_roundtrip(bits in proptest::collection::vec(0u8..=1, 0..200)) {
        let hex = bits_to_hex(&bits);
        prop_assert_eq!(hex.len(), bits.len().div_ceil(4));
        prop_assert_eq!(bits_from_hex(&hex, bits.len()).unwrap(), bits);
    }
}
