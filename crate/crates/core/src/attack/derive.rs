//! Turning Eve's phase measurements into an estimate of the basis-driver
//! keystream under known plaintext.

use std::f64::consts::{PI, TAU};

use crate::attack::channel::BscEstimate;
use crate::error::{argument, Result};
use crate::keystream::push_symbol_bits;
use crate::mapping::{wrap_phase, Constellation};
use crate::physical::{eve_nearest, NoiseModel, SlotRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedKeystream {
    /// Eve's estimate of the first register's output, MSB-first per slot.
    pub bits: Vec<u8>,
    /// Estimated running keys, 1-based.
    pub keys: Vec<u32>,
    /// Bit crossover against the slots' true running keys.
    pub estimate: BscEstimate,
    pub symbol_errors: usize,
}

impl DerivedKeystream {
    pub fn symbol_error_rate(&self) -> f64 {
        self.symbol_errors as f64 / self.keys.len().max(1) as f64
    }

    /// The true keystream these slots carried.
    pub fn truth(slots: &[SlotRecord], c: &Constellation) -> Vec<u8> {
        let width = c.bits_per_symbol();
        let mut bits = Vec::with_capacity(slots.len() * width as usize);
        for s in slots {
            push_symbol_bits(&mut bits, s.running_key - 1, width);
        }
        bits
    }
}

/// Per slot: undo the known data bit, estimate the running key, emit its bits.
///
/// With the fixed mapping the key comes from the nearest coarse point. With
/// pattern randomization the unknown pattern is marginalized under a uniform
/// prior: the key whose fine points fill the noise window most wins, ties
/// going to the nearest fine point's key and then to the smaller key.
pub fn derive_noisy_keystream(
    slots: &[SlotRecord],
    plaintext: &[u8],
    c: &Constellation,
    randomized: bool,
    noise: &NoiseModel,
) -> Result<DerivedKeystream> {
    if plaintext.len() != slots.len() {
        return argument(format!(
            "{} plaintext bits for {} slots",
            plaintext.len(),
            slots.len()
        ));
    }
    if slots.is_empty() {
        return argument("no slots to derive a keystream from");
    }
    let width = c.bits_per_symbol();
    let window = noise.window();
    let mut counter = WindowCounter::new(c);
    let mut bits = Vec::with_capacity(slots.len() * width as usize);
    let mut keys = Vec::with_capacity(slots.len());
    let mut symbol_errors = 0;
    for (s, &bit) in slots.iter().zip(plaintext) {
        let measured = s
            .measured_phase
            .ok_or_else(|| crate::Error::Argument(format!("slot {} was never measured", s.index)))?;
        let folded = wrap_phase(measured - if bit == 1 { PI } else { 0.0 });
        let k = if randomized {
            counter.map_key(folded, window)
        } else {
            eve_nearest(folded, c, false).key
        };
        if k != s.running_key {
            symbol_errors += 1;
        }
        keys.push(k);
        push_symbol_bits(&mut bits, k - 1, width);
    }
    let truth = DerivedKeystream::truth(slots, c);
    let estimate = BscEstimate::compare(&bits, &truth)?;
    Ok(DerivedKeystream {
        bits,
        keys,
        estimate,
        symbol_errors,
    })
}

/// Counts bit-0 fine points per key label inside a phase window.
///
/// The bit-0 points form the grid `theta_1 + n delta`, `n < M^2`, and point `n`
/// carries key `(n / M + n % M) mod M`. Each block of `M` consecutive points
/// holds every key once, so a window count is a whole-block term plus two
/// cyclic runs.
pub(crate) struct WindowCounter {
    c: Constellation,
    counts: Vec<u32>,
}

impl WindowCounter {
    pub(crate) fn new(c: &Constellation) -> Self {
        Self {
            c: *c,
            counts: vec![0; c.m() as usize],
        }
    }

    /// Per-label counts for the window `[phase - half, phase + half]`,
    /// counting every `2 pi` image of the grid.
    pub(crate) fn count(&mut self, phase: f64, half: f64) -> &[u32] {
        let m = self.c.m() as i64;
        let total = m * m;
        let delta = self.c.delta();
        let first = self.c.base_phase(1);
        self.counts.iter_mut().for_each(|v| *v = 0);
        let reach = ((half + PI) / TAU).ceil() as i64 + 1;
        for r in -reach..=reach {
            let origin = first + TAU * r as f64;
            let lo = (((phase - half) - origin) / delta).ceil().max(0.0);
            let hi = (((phase + half) - origin) / delta)
                .floor()
                .min((total - 1) as f64);
            if lo > hi {
                continue;
            }
            self.add_range(lo as i64, hi as i64);
        }
        &self.counts
    }

    fn add_range(&mut self, a: i64, b: i64) {
        let m = self.c.m() as i64;
        let (qa, ra) = (a / m, a % m);
        let (qb, rb) = (b / m, b % m);
        if qa == qb {
            self.add_run((qa + ra) % m, rb - ra + 1);
            return;
        }
        self.add_run((qa + ra) % m, m - ra);
        self.add_run(qb % m, rb + 1);
        let full = (qb - qa - 1) as u32;
        if full > 0 {
            self.counts.iter_mut().for_each(|v| *v += full);
        }
    }

    fn add_run(&mut self, start: i64, len: i64) {
        let m = self.c.m() as i64;
        for x in 0..len {
            self.counts[((start + x) % m) as usize] += 1;
        }
    }

    /// Most populated key (1-based) for a folded measurement.
    pub(crate) fn map_key(&mut self, folded: f64, half: f64) -> u32 {
        let nearest = eve_nearest(folded, &self.c, true);
        // a point of the opposite bit is nearest: its key is still the best
        // local guess for the grid continuation
        let nearest_key = nearest.key;
        let counts = self.count(folded, half);
        let best = counts.iter().copied().max().unwrap_or(0);
        if best == 0 || counts[(nearest_key - 1) as usize] == best {
            return nearest_key;
        }
        counts.iter().position(|&v| v == best).expect("max exists") as u32 + 1
    }
}
