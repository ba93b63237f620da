//! M-ary phase constellation, the fixed key-to-basis map, and the keyed
//! shift-permutation pattern family.
//!
//! Bases sit at `theta_i = (2i - 1) pi / (2M)` for `i = 1..=M`, so neighbours are
//! `pi / M` apart. Pattern `j` cyclically shifts the key column by `j - 1` and
//! rotates every phase by `(j - 1) delta` with `delta = pi / M^2`. Across all
//! patterns the signal points form a uniform grid of spacing `delta`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{argument, Result};
use crate::keystream::log2_modulus;

/// Reduce a phase to `[0, 2 pi)`.
#[inline]
pub fn wrap_phase(phase: f64) -> f64 {
    let r = phase.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed offset `a - b` reduced to `(-pi, pi]`.
#[inline]
pub fn phase_offset(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Circular distance `min(|a - b|, 2 pi - |a - b|)`.
#[inline]
pub fn phase_distance(a: f64, b: f64) -> f64 {
    phase_offset(a, b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Constellation {
    m: u32,
}

impl Constellation {
    pub fn new(m: u32) -> Result<Self> {
        log2_modulus(m)?;
        Ok(Self { m })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.m.trailing_zeros()
    }

    /// Neighbour spacing `pi / M`.
    pub fn spacing(&self) -> f64 {
        PI / self.m as f64
    }

    /// Fine pattern shift `spacing / M`.
    pub fn delta(&self) -> f64 {
        self.spacing() / self.m as f64
    }

    /// `theta_i` for `i` in `1..=M` (unchecked).
    #[inline]
    pub fn base_phase(&self, i: u32) -> f64 {
        (2 * i - 1) as f64 * PI / (2 * self.m) as f64
    }

    pub fn base_phases(&self) -> Vec<f64> {
        (1..=self.m).map(|i| self.base_phase(i)).collect()
    }

    fn check_index(&self, what: &str, v: u32) -> Result<()> {
        if v == 0 || v > self.m {
            return argument(format!("{what} {v} outside 1..={}", self.m));
        }
        Ok(())
    }

    /// Key label carried by the fine grid point with coarse index `i` and
    /// pattern `j` (all 1-based).
    #[inline]
    pub(crate) fn key_of(&self, i: u32, j: u32) -> u32 {
        (i - 1 + j - 1) % self.m + 1
    }
}

impl Serialize for Constellation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u32(self.m)
    }
}

impl<'de> Deserialize<'de> for Constellation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let m = u32::deserialize(d)?;
        Constellation::new(m).map_err(serde::de::Error::custom)
    }
}

/// Pattern `L_j` of the keyed randomization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MappingPattern {
    index: u32,
}

impl MappingPattern {
    pub fn new(c: &Constellation, index: u32) -> Result<Self> {
        c.check_index("pattern index", index)?;
        Ok(Self { index })
    }

    pub fn identity() -> Self {
        Self { index: 1 }
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn offset(&self, c: &Constellation) -> f64 {
        (self.index - 1) as f64 * c.delta()
    }

    pub fn key_shift(&self) -> u32 {
        self.index - 1
    }
}

/// Fixed map: running key `k` to basis phase `theta_k`.
pub fn deterministic_map(c: &Constellation, k: u32) -> Result<f64> {
    c.check_index("running key", k)?;
    Ok(c.base_phase(k))
}

/// Pattern `j` applied to running key `k`: `theta_{((k - j) mod M) + 1} + (j - 1) delta`.
pub fn pattern_map(c: &Constellation, j: u32, k: u32) -> Result<f64> {
    c.check_index("pattern index", j)?;
    c.check_index("running key", k)?;
    Ok(pattern_map_unchecked(c, j, k))
}

#[inline]
pub(crate) fn pattern_map_unchecked(c: &Constellation, j: u32, k: u32) -> f64 {
    let m = c.m;
    let i = (k + m - j) % m + 1;
    c.base_phase(i) + (j - 1) as f64 * c.delta()
}

/// Antipodal encoding of a data bit on a basis.
pub fn signal_phase(basis_phase: f64, data_bit: u8) -> f64 {
    wrap_phase(basis_phase + if data_bit == 0 { 0.0 } else { PI })
}

/// One point of the full `2 M^2` signal set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinePoint {
    pub phase: f64,
    pub pattern: u32,
    pub key: u32,
    pub bit: u8,
}

/// Every signal point over all patterns, sorted by wrapped phase.
pub fn fine_constellation(c: &Constellation) -> Vec<FinePoint> {
    let m = c.m;
    let mut points = Vec::with_capacity(2 * (m * m) as usize);
    for bit in 0..2u8 {
        for j in 1..=m {
            for k in 1..=m {
                points.push(FinePoint {
                    phase: signal_phase(pattern_map_unchecked(c, j, k), bit),
                    pattern: j,
                    key: k,
                    bit,
                });
            }
        }
    }
    points.sort_by(|a, b| a.phase.total_cmp(&b.phase));
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn base_phases_m4() {
        let c = Constellation::new(4).unwrap();
        assert!((deterministic_map(&c, 1).unwrap() - PI / 8.0).abs() < EPS);
        assert!((deterministic_map(&c, 4).unwrap() - 7.0 * PI / 8.0).abs() < EPS);
        assert!(deterministic_map(&c, 0).is_err());
        assert!(deterministic_map(&c, 5).is_err());
        assert!((c.delta() - PI / 16.0).abs() < EPS);
        assert!(Constellation::new(3).is_err());
        assert!(Constellation::new(1).is_err());
    }

    #[test]
    fn neighbour_spacing() {
        for m in [2u32, 4, 16, 512] {
            let c = Constellation::new(m).unwrap();
            let th = c.base_phases();
            assert!(th[0] > 0.0 && th[m as usize - 1] < PI);
            for w in th.windows(2) {
                assert!((w[1] - w[0] - PI / m as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pattern_rows() {
        let c = Constellation::new(4).unwrap();
        for k in 1..=4 {
            assert_eq!(pattern_map(&c, 1, k).unwrap(), deterministic_map(&c, k).unwrap());
        }
        let d = c.delta();
        assert!((pattern_map(&c, 2, 2).unwrap() - (c.base_phase(1) + d)).abs() < EPS);
        assert!((pattern_map(&c, 2, 1).unwrap() - (c.base_phase(4) + d)).abs() < EPS);
        assert!(pattern_map(&c, 0, 1).is_err());
        assert!(pattern_map(&c, 1, 5).is_err());
        let p = MappingPattern::new(&c, 3).unwrap();
        assert_eq!(p.key_shift(), 2);
        assert!((p.offset(&c) - 2.0 * d).abs() < EPS);
        assert_eq!(MappingPattern::identity().offset(&c), 0.0);
    }

    #[test]
    fn signal_phase_examples() {
        assert!((signal_phase(PI / 8.0, 0) - PI / 8.0).abs() < EPS);
        assert!((signal_phase(PI / 8.0, 1) - 9.0 * PI / 8.0).abs() < EPS);
        assert!((signal_phase(7.0 * PI / 8.0, 1) - 15.0 * PI / 8.0).abs() < EPS);
    }

    #[test]
    fn fine_constellation_small() {
        let c = Constellation::new(2).unwrap();
        let pts = fine_constellation(&c);
        assert_eq!(pts.len(), 8);
        for w in pts.windows(2) {
            assert!((w[1].phase - w[0].phase - PI / 4.0).abs() < 1e-12);
        }

        let c = Constellation::new(4).unwrap();
        let pts = fine_constellation(&c);
        assert_eq!(pts.len(), 32);
        // brute-force minimum gap over all pairs, including the wrap
        let mut min_gap = f64::INFINITY;
        for a in &pts {
            for b in &pts {
                if a != b {
                    min_gap = min_gap.min(phase_distance(a.phase, b.phase));
                }
            }
        }
        assert!((min_gap - PI / 16.0).abs() < 1e-12);

        for m in [2u32, 4, 8, 32] {
            let c = Constellation::new(m).unwrap();
            assert!(fine_constellation(&c).iter().any(|p| p.pattern == 1
                && p.key == 1
                && p.bit == 0
                && (p.phase - c.base_phase(1)).abs() < EPS));
        }
    }

    #[test]
    fn key_of_matches_pattern_map() {
        let c = Constellation::new(8).unwrap();
        for j in 1..=8 {
            for k in 1..=8 {
                let i = (k + 8 - j) % 8 + 1;
                assert_eq!(c.key_of(i, j), k);
            }
        }
    }

    #[test]
    fn wrap_helpers() {
        assert_eq!(wrap_phase(TAU), 0.0);
        assert!((wrap_phase(-0.5) - (TAU - 0.5)).abs() < EPS);
        assert!((phase_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert!((phase_offset(0.1, TAU - 0.1) - 0.2).abs() < 1e-12);
        assert!((phase_offset(TAU - 0.1, 0.1) + 0.2).abs() < 1e-12);
    }
}
