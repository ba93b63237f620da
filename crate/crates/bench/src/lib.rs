//! Fixtures shared by the criterion benchmarks in `benches/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use y00::attack::bsc_flip;
use y00::keystream::{lfsr_sequence, running_keys, seed_from_u64, LfsrSpec};
use y00::mapping::Constellation;
use y00::physical::{transmit, SlotRecord};

/// `n` bits of the register `spec` seeded with 1, flipped with probability `p`.
pub fn noisy_stream(spec: &LfsrSpec, n: usize, p: f64, seed: u64) -> Vec<u8> {
    let clean = lfsr_sequence(spec, &seed_from_u64(spec, 1).expect("nonzero seed"), n).expect("valid seed");
    bsc_flip(&clean, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `n` transmitted slots on an `m`-point constellation with alternating data,
/// pattern-randomized when `randomized`.
pub fn slot_batch(m: u32, n: usize, randomized: bool) -> (Constellation, Vec<u8>, Vec<SlotRecord>) {
    let c = Constellation::new(m).expect("power of two");
    let width = c.bits_per_symbol() as usize;
    let keys = |text: &str, seed: u64| {
        let spec: LfsrSpec = text.parse().expect("valid spec");
        let bits =
            lfsr_sequence(&spec, &seed_from_u64(&spec, seed).expect("nonzero"), n * width).expect("valid");
        running_keys(&bits, m).expect("power of two")
    };
    let data: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let rk1 = keys("17:17,3", 0x1d);
    let rk2 = randomized.then(|| keys("20:20,3", 0x2b));
    let slots = transmit(&data, &rk1, rk2.as_ref(), &c).expect("matching lengths");
    (c, data, slots)
}
