//! Exhaustive maximum-likelihood key search: the register whose output
//! agrees with the noisy observation in the most positions.

use rayon::prelude::*;

use super::{pack_bits, AttackMethod, AttackReport};
use crate::error::{argument, refused, Result};
use crate::keystream::{extend_sequence, seed_from_u64, LfsrSpec};

/// Largest register degree the brute force accepts.
pub const ML_MAX_DEGREE: usize = 24;

const CHUNKS: u64 = 256;

/// Enumerates all `2^d - 1` nonzero initial states in Gray-code order, so
/// each candidate stream is the previous one XOR a unit-seed stream. Ties go
/// to the numerically smaller seed (cell 0 = bit 0).
///
/// With `truth`, success means exact recovery. Without it, success means the
/// best agreement is significant: its z-score against a random stream beats
/// the expected maximum over the key space by three.
pub fn ml_bruteforce(noisy: &[u8], spec: &LfsrSpec, truth: Option<&[u8]>) -> Result<AttackReport> {
    let d = spec.degree();
    if d > ML_MAX_DEGREE {
        return refused(format!(
            "exhaustive search over 2^{d} states exceeds the 2^{ML_MAX_DEGREE} limit"
        ));
    }
    let n = noisy.len();
    if n < d {
        return argument(format!(
            "{n} observed bits cannot determine a degree-{d} register"
        ));
    }
    if let Some(t) = truth {
        if t.len() != d {
            return argument(format!("truth has {} cells, register has {d}", t.len()));
        }
    }

    let target = pack_bits(noisy);
    let words = target.len();
    let tail_mask = if n.is_multiple_of(64) {
        u64::MAX
    } else {
        (1u64 << (n % 64)) - 1
    };
    let basis: Vec<Vec<u64>> = (0..d)
        .map(|i| {
            let mut unit = vec![0u8; d];
            unit[i] = 1;
            pack_bits(&extend_sequence(spec, &unit, n))
        })
        .collect();

    let mismatches = |stream: &[u64]| -> u32 {
        let mut total = 0;
        for w in 0..words {
            let mut x = stream[w] ^ target[w];
            if w + 1 == words {
                x &= tail_mask;
            }
            total += x.count_ones();
        }
        total
    };

    let space = 1u64 << d;
    let chunk = space.div_ceil(CHUNKS).max(1);
    // (mismatches, seed) minimized lexicographically
    let best = (0..space.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let start = (c * chunk).max(1);
            let end = ((c + 1) * chunk).min(space);
            let mut best = (u32::MAX, u64::MAX);
            if start >= end {
                return best;
            }
            let mut gray = start ^ (start >> 1);
            let mut stream = vec![0u64; words];
            for (i, b) in basis.iter().enumerate() {
                if gray >> i & 1 == 1 {
                    stream.iter_mut().zip(b).for_each(|(s, v)| *s ^= v);
                }
            }
            for idx in start..end {
                if idx > start {
                    let bit = idx.trailing_zeros() as usize;
                    gray ^= 1 << bit;
                    stream.iter_mut().zip(&basis[bit]).for_each(|(s, v)| *s ^= v);
                }
                let cand = (mismatches(&stream), gray);
                if cand < best {
                    best = cand;
                }
            }
            best
        })
        .reduce(|| (u32::MAX, u64::MAX), |a, b| a.min(b));

    let (errors, seed) = best;
    let recovered = seed_from_u64(spec, seed)?;
    let agreement = n as f64 - errors as f64;
    let success = match truth {
        Some(t) => t == recovered.as_slice(),
        None => {
            let z = (2.0 * agreement - n as f64) / (n as f64).sqrt();
            z > (2.0 * d as f64 * std::f64::consts::LN_2).sqrt() + 3.0
        }
    };
    Ok(AttackReport {
        method: AttackMethod::MaximumLikelihood,
        success,
        recovered_state: Some(recovered),
        iterations_used: 0,
        parity_checks_used: 0,
        residual_mismatch: errors as f64 / n as f64,
        work_units: (space - 1) * n as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::bsc_flip;
    use crate::keystream::lfsr_sequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct enumeration with freshly generated streams.
    fn oracle(noisy: &[u8], spec: &LfsrSpec) -> (u64, usize) {
        let mut best = (usize::MAX, 0u64);
        for v in 1..(1u64 << spec.degree()) {
            let seed = seed_from_u64(spec, v).unwrap();
            let s = lfsr_sequence(spec, &seed, noisy.len()).unwrap();
            let e = s.iter().zip(noisy).filter(|(a, b)| a != b).count();
            if (e, v) < best {
                best = (e, v);
            }
        }
        (best.1, best.0)
    }

    #[test]
    fn matches_direct_enumeration() {
        let spec = LfsrSpec::primitive(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (trial, n) in [(0u64, 20usize), (1, 64), (2, 100), (3, 129)] {
            let seed = seed_from_u64(&spec, 17 + trial * 31).unwrap();
            let clean = lfsr_sequence(&spec, &seed, n).unwrap();
            let noisy = bsc_flip(&clean, 0.3, &mut rng);
            let r = ml_bruteforce(&noisy, &spec, None).unwrap();
            let (want_seed, want_err) = oracle(&noisy, &spec);
            assert_eq!(
                r.recovered_state.unwrap(),
                seed_from_u64(&spec, want_seed).unwrap()
            );
            assert!((r.residual_mismatch - want_err as f64 / n as f64).abs() < 1e-12);
            assert_eq!(r.work_units, 255 * n as u64);
        }
    }

    #[test]
    fn recovers_d17_at_three_critical_lengths() {
        // p = 0.25: n0 = 17 / 0.1887 ~ 90
        let spec = LfsrSpec::primitive(17).unwrap();
        let seed = seed_from_u64(&spec, 0x1_5a5a).unwrap();
        let clean = lfsr_sequence(&spec, &seed, 270).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noisy = bsc_flip(&clean, 0.25, &mut rng);
        let r = ml_bruteforce(&noisy, &spec, Some(&seed)).unwrap();
        assert!(r.success);
        assert_eq!(r.method, AttackMethod::MaximumLikelihood);
    }

    #[test]
    fn guards() {
        let spec = LfsrSpec::primitive(25).unwrap();
        assert!(matches!(
            ml_bruteforce(&[0; 100], &spec, None),
            Err(crate::Error::Refused(_))
        ));
        let spec = LfsrSpec::primitive(8).unwrap();
        assert!(matches!(
            ml_bruteforce(&[0; 5], &spec, None),
            Err(crate::Error::Argument(_))
        ));
    }

    #[test]
    fn random_noise_not_significant() {
        let spec = LfsrSpec::primitive(12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let noise = bsc_flip(&vec![0u8; 300], 0.5, &mut rng);
        assert!(!ml_bruteforce(&noise, &spec, None).unwrap().success);
    }
}
