//! Exact key posterior under known plaintext for small key spaces.

use std::f64::consts::{LN_2, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{argument, refused, Result};
use crate::keystream::LfsrSpec;
use crate::mapping::{pattern_map_unchecked, phase_offset, signal_phase, Constellation};
use crate::physical::{NoiseModel, SlotRecord};

/// Largest joint key space the exact posterior will enumerate.
pub const EQUIVOCATION_MAX_KEYS: u64 = 1 << 20;
/// Longest observation the exact posterior will process.
pub const EQUIVOCATION_MAX_SLOTS: usize = 1000;
/// Entropy (bits) below which the key counts as determined.
const UNICITY_EPS: f64 = 1e-6;

/// Registers driving the running key and, optionally, the pattern selector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySpace {
    pub spec1: LfsrSpec,
    pub spec2: Option<LfsrSpec>,
}

impl KeySpace {
    /// Number of nonzero joint initial states.
    pub fn size(&self) -> u128 {
        let count = |s: &LfsrSpec| (1u128 << s.degree()) - 1;
        count(&self.spec1) * self.spec2.as_ref().map_or(1, count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivocationCurve {
    /// `H(K | Y_1..Y_n, X_1..X_n)` in bits for `n = 0..=N`.
    pub entropy_bits: Vec<f64>,
    /// First `n` at which the posterior is concentrated on one key.
    pub unicity_distance: Option<usize>,
}

/// Packed register stepping, cell `i` in bit `i`.
struct PackedLfsr {
    degree: u32,
    mask: u64,
}

impl PackedLfsr {
    fn new(spec: &LfsrSpec) -> Self {
        let d = spec.degree();
        Self {
            degree: d as u32,
            mask: spec.taps().iter().fold(0, |m, &e| m | 1 << (d - e)),
        }
    }

    /// Emit `width` bits MSB-first as a symbol, advancing the register.
    #[inline]
    fn symbol(&self, state: &mut u64, width: u32) -> u32 {
        let mut v = 0;
        for _ in 0..width {
            v = (v << 1) | (*state & 1) as u32;
            let fb = (*state & self.mask).count_ones() as u64 & 1;
            *state = (*state >> 1) | fb << (self.degree - 1);
        }
        v
    }
}

/// Log-density of measuring `y` when `x` was sent.
fn log_likelihood(noise: &NoiseModel, c: &Constellation, y: f64, x: f64) -> f64 {
    let off = phase_offset(y, x);
    match noise {
        NoiseModel::Noiseless => {
            if off.abs() < 1e-9 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        NoiseModel::GaussianPhase { sigma } => {
            let reach = (5.0 * sigma / TAU).ceil() as i32 + 1;
            let density: f64 = (-reach..=reach)
                .map(|r| {
                    let z = (off + TAU * r as f64) / sigma;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                / (sigma * (TAU).sqrt());
            density.ln()
        }
        NoiseModel::Wedge { sigma } => {
            let reach = (sigma / TAU).ceil() as i32 + 1;
            let hits = (-reach..=reach)
                .filter(|&r| (off + TAU * r as f64).abs() <= *sigma)
                .count();
            (hits as f64 / (2.0 * sigma)).ln()
        }
        NoiseModel::DiscreteNeighbor { probs } => {
            let steps = off / c.spacing();
            let e = steps.round();
            if (steps - e).abs() > 1e-6 {
                return f64::NEG_INFINITY;
            }
            let period = 2 * c.m() as i32;
            let mass: f64 = (-2..=2)
                .filter(|d| (d - e as i32).rem_euclid(period) == 0)
                .map(|d| probs.mass(d))
                .sum();
            mass.ln()
        }
    }
}

/// Shannon entropy (bits) of the normalized posterior `exp(log_post)`.
fn entropy(log_post: &[f64]) -> f64 {
    let top = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return 0.0;
    }
    let (z, weighted) = log_post
        .par_iter()
        .filter(|l| l.is_finite())
        .map(|&l| {
            let w = (l - top).exp();
            (w, w * (l - top))
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    (z.ln() - weighted / z).max(0.0) / LN_2
}

/// Posterior over all joint initial states with a uniform prior, updated one
/// slot at a time. The likelihood is the exact density of the noise model,
/// wrapped to the circle.
pub fn key_equivocation(
    slots: &[SlotRecord],
    plaintext: &[u8],
    keys: &KeySpace,
    noise: &NoiseModel,
    c: &Constellation,
) -> Result<EquivocationCurve> {
    noise.validate()?;
    let size = keys.size();
    if size > EQUIVOCATION_MAX_KEYS as u128 {
        return refused(format!(
            "joint key space of {size} states exceeds {EQUIVOCATION_MAX_KEYS}"
        ));
    }
    if slots.len() > EQUIVOCATION_MAX_SLOTS {
        return refused(format!(
            "{} slots exceed the {EQUIVOCATION_MAX_SLOTS}-slot limit",
            slots.len()
        ));
    }
    if plaintext.len() != slots.len() {
        return argument(format!(
            "{} plaintext bits for {} slots",
            plaintext.len(),
            slots.len()
        ));
    }
    let measured: Vec<f64> = slots
        .iter()
        .map(|s| {
            s.measured_phase
                .ok_or_else(|| crate::Error::Argument(format!("slot {} was never measured", s.index)))
        })
        .collect::<Result<_>>()?;

    let m = c.m();
    let width = c.bits_per_symbol();
    let reg1 = PackedLfsr::new(&keys.spec1);
    let mut states1: Vec<u64> = (1..1u64 << keys.spec1.degree()).collect();
    let reg2 = keys.spec2.as_ref().map(PackedLfsr::new);
    let mut states2: Vec<u64> = match &keys.spec2 {
        Some(s) => (1..1u64 << s.degree()).collect(),
        None => vec![0],
    };
    let n2 = states2.len();
    let mut log_post = vec![0.0f64; states1.len() * n2];
    let mut entropy_bits = Vec::with_capacity(slots.len() + 1);
    entropy_bits.push((log_post.len() as f64).log2());
    let mut table = vec![0.0f64; (m * m) as usize];
    let mut key_sym = vec![0u32; states1.len()];
    let mut pat_sym = vec![0u32; n2];

    for (&y, &bit) in measured.iter().zip(plaintext) {
        // table[(j - 1) * M + (k - 1)]: likelihood of pattern j, key k
        for j in 1..=m {
            for k in 1..=m {
                let x = signal_phase(pattern_map_unchecked(c, j, k), bit);
                table[((j - 1) * m + (k - 1)) as usize] = log_likelihood(noise, c, y, x);
            }
        }
        for (s, out) in states1.iter_mut().zip(key_sym.iter_mut()) {
            *out = reg1.symbol(s, width);
        }
        match &reg2 {
            Some(r) => {
                for (s, out) in states2.iter_mut().zip(pat_sym.iter_mut()) {
                    *out = r.symbol(s, width);
                }
            }
            None => pat_sym[0] = 0,
        }
        log_post
            .par_chunks_mut(n2)
            .zip(key_sym.par_iter())
            .for_each(|(row, &k)| {
                for (lp, &j) in row.iter_mut().zip(&pat_sym) {
                    if *lp != f64::NEG_INFINITY {
                        *lp += table[(j * m + k) as usize];
                    }
                }
            });
        let h = entropy(&log_post);
        entropy_bits.push(h);
    }
    let unicity_distance = entropy_bits
        .iter()
        .skip(1)
        .position(|&h| h < UNICITY_EPS)
        .map(|i| i + 1);
    Ok(EquivocationCurve {
        entropy_bits,
        unicity_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keystream::{lfsr_sequence, running_keys, seed_from_u64};
    use crate::physical::{measure, transmit, NeighborProbs};
    use std::f64::consts::PI;

    #[test]
    fn packed_matches_reference() {
        let spec = LfsrSpec::primitive(9).unwrap();
        let reg = PackedLfsr::new(&spec);
        let seed = seed_from_u64(&spec, 0x15b).unwrap();
        let bits = lfsr_sequence(&spec, &seed, 60).unwrap();
        let want = running_keys(&bits, 8).unwrap();
        let mut state = 0x15b;
        for &k in want.symbols() {
            assert_eq!(reg.symbol(&mut state, 3), k);
        }
    }

    #[test]
    fn wrapped_densities_integrate_to_one() {
        let c = Constellation::new(4).unwrap();
        for noise in [
            NoiseModel::GaussianPhase { sigma: 0.7 },
            NoiseModel::GaussianPhase { sigma: 4.0 },
            NoiseModel::Wedge { sigma: 0.5 },
            NoiseModel::Wedge { sigma: PI },
            NoiseModel::Wedge { sigma: 4.5 },
        ] {
            let steps = 200_000;
            let h = TAU / steps as f64;
            let total: f64 = (0..steps)
                .map(|i| log_likelihood(&noise, &c, (i as f64 + 0.5) * h, 1.0).exp() * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-4, "{noise:?}: {total}");
        }
        let probs = NeighborProbs::new(0.6, 0.15, 0.05).unwrap();
        let noise = NoiseModel::DiscreteNeighbor { probs };
        let total: f64 = (-3..=4)
            .map(|e| log_likelihood(&noise, &c, 1.0 + e as f64 * c.spacing(), 1.0).exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        // M = 2: +2 and -2 spacings land on the same phase
        let c2 = Constellation::new(2).unwrap();
        let l = log_likelihood(&noise, &c2, 1.0 + PI, 1.0).exp();
        assert!((l - 0.1).abs() < 1e-12);
    }

    fn scenario(
        keys: &KeySpace,
        c: &Constellation,
        noise: NoiseModel,
        n: usize,
    ) -> (Vec<SlotRecord>, Vec<u8>) {
        let width = c.bits_per_symbol() as usize;
        let s1 = seed_from_u64(&keys.spec1, 0x5a).unwrap();
        let rk1 = running_keys(&lfsr_sequence(&keys.spec1, &s1, n * width).unwrap(), c.m()).unwrap();
        let rk2 = keys.spec2.as_ref().map(|s| {
            let seed = seed_from_u64(s, 0x33).unwrap();
            running_keys(&lfsr_sequence(s, &seed, n * width).unwrap(), c.m()).unwrap()
        });
        let data: Vec<u8> = (0..n).map(|i| (i % 3 == 1) as u8).collect();
        let slots = transmit(&data, &rk1, rk2.as_ref(), c).unwrap();
        (measure(&slots, &noise, c, 8).unwrap(), data)
    }

    #[test]
    fn noiseless_deterministic_reaches_unicity() {
        let c = Constellation::new(4).unwrap();
        let keys = KeySpace {
            spec1: LfsrSpec::primitive(10).unwrap(),
            spec2: None,
        };
        let (slots, data) = scenario(&keys, &c, NoiseModel::Noiseless, 20);
        let curve = key_equivocation(&slots, &data, &keys, &NoiseModel::Noiseless, &c).unwrap();
        assert!((curve.entropy_bits[0] - 1023f64.log2()).abs() < 1e-12);
        // each slot reveals two key bits; the seed's first two cells are not both zero
        assert!((curve.entropy_bits[1] - 8.0).abs() < 1e-9);
        assert_eq!(curve.unicity_distance, Some(5));
        for w in curve.entropy_bits.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn uninformative_wedge_keeps_full_entropy() {
        let c = Constellation::new(4).unwrap();
        let keys = KeySpace {
            spec1: LfsrSpec::primitive(6).unwrap(),
            spec2: Some(LfsrSpec::primitive(5).unwrap()),
        };
        let noise = NoiseModel::Wedge { sigma: PI };
        let (slots, data) = scenario(&keys, &c, noise, 200);
        let curve = key_equivocation(&slots, &data, &keys, &noise, &c).unwrap();
        let h0 = (63.0f64 * 31.0).log2();
        assert!(curve.entropy_bits.iter().all(|h| (h - h0).abs() < 1e-9));
        assert_eq!(curve.unicity_distance, None);
    }

    #[test]
    fn guards() {
        let c = Constellation::new(4).unwrap();
        let keys = KeySpace {
            spec1: LfsrSpec::primitive(12).unwrap(),
            spec2: Some(LfsrSpec::primitive(10).unwrap()),
        };
        assert!(matches!(
            key_equivocation(&[], &[], &keys, &NoiseModel::Noiseless, &c),
            Err(crate::Error::Refused(_))
        ));
    }
}
