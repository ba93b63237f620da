//! Eve's side: keystream derivation from measurements, the BSC model of that
//! keystream, and key-recovery attacks against an LFSR observed through it.

mod channel;
mod derive;
mod equivocation;
mod fca;
mod ml;

pub use channel::{binary_entropy, feasibility, BscEstimate, FeasibilityEstimate};
pub use derive::{derive_noisy_keystream, DerivedKeystream};
pub use equivocation::{
    key_equivocation, EquivocationCurve, KeySpace, EQUIVOCATION_MAX_KEYS, EQUIVOCATION_MAX_SLOTS,
};
pub use fca::{fast_correlation, FcaConfig};
pub use ml::{ml_bruteforce, ML_MAX_DEGREE};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::keystream::bits_to_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackMethod {
    #[serde(rename = "ML")]
    MaximumLikelihood,
    #[serde(rename = "FCA")]
    FastCorrelation,
}

/// Outcome of a key-recovery attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub method: AttackMethod,
    pub success: bool,
    /// Recovered initial register, hex of the cell sequence; absent when no
    /// candidate survived verification.
    #[serde(with = "hex_state")]
    pub recovered_state: Option<Vec<u8>>,
    pub iterations_used: usize,
    pub parity_checks_used: usize,
    /// Fraction of observed bits disagreeing with the recovered register's stream.
    pub residual_mismatch: f64,
    pub work_units: u64,
}

impl AttackReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

mod hex_state {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bits) => s.serialize_some(&format!("{}:{}", bits.len(), bits_to_hex(bits))),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        let v: Option<String> = Option::deserialize(d)?;
        v.map(|text| {
            let (len, hex) = text
                .split_once(':')
                .ok_or_else(|| serde::de::Error::custom("state must be <bits>:<hex>"))?;
            let len: usize = len.parse().map_err(serde::de::Error::custom)?;
            crate::keystream::bits_from_hex(hex, len).map_err(serde::de::Error::custom)
        })
        .transpose()
    }
}

/// Pass `bits` through a binary symmetric channel with crossover `p`.
pub fn bsc_flip<R: Rng + ?Sized>(bits: &[u8], p: f64, rng: &mut R) -> Vec<u8> {
    bits.iter()
        .map(|&b| b ^ u8::from(rng.random::<f64>() < p))
        .collect()
}

/// Pack bits LSB-first into 64-bit words.
pub(crate) fn pack_bits(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        words[i / 64] |= (b as u64) << (i % 64);
    }
    words
}

/// Agreement threshold a candidate's regenerated stream must reach against
/// `n` bits observed through crossover `p`: three standard deviations below
/// the expected agreement.
pub(crate) fn verification_floor(p: f64, n: usize) -> f64 {
    1.0 - p - 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn report_json_roundtrip() {
        let r = AttackReport {
            method: AttackMethod::FastCorrelation,
            success: true,
            recovered_state: Some(vec![1, 0, 1, 1, 0]),
            iterations_used: 3,
            parity_checks_used: 1200,
            residual_mismatch: 0.25,
            work_units: 99,
        };
        let text = r.to_json();
        assert!(text.contains("\"FCA\""));
        assert!(text.contains("\"5:b0\""));
        let back: AttackReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        let none = AttackReport {
            recovered_state: None,
            ..r
        };
        let back: AttackReport = serde_json::from_str(&none.to_json()).unwrap();
        assert_eq!(back.recovered_state, None);
    }

    #[test]
    fn bsc_flip_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bits = vec![0u8; 200_000];
        let noisy = bsc_flip(&bits, 0.2, &mut rng);
        let rate = noisy.iter().filter(|&&b| b == 1).count() as f64 / bits.len() as f64;
        assert!((rate - 0.2).abs() < 0.005);
        assert_eq!(bsc_flip(&bits[..10], 0.0, &mut rng), vec![0u8; 10]);
    }

    #[test]
    fn packing() {
        let bits: Vec<u8> = (0..130).map(|i| (i % 3 == 0) as u8).collect();
        let w = pack_bits(&bits);
        assert_eq!(w.len(), 3);
        for (i, &b) in bits.iter().enumerate() {
            assert_eq!(((w[i / 64] >> (i % 64)) & 1) as u8, b);
        }
    }
}
