//! Transmitter, measurement channels, and the two receivers.
//!
//! Phase noise is calibrated as `sigma = 1 / alpha`, which makes the Gaussian
//! channel reproduce the heterodyne neighbour error `1/2 - Phi_0(t0)` with
//! `t0 = pi alpha / (2M)` exactly.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{argument, config, Result};
use crate::keystream::RunningKeySequence;
use crate::mapping::{pattern_map_unchecked, phase_distance, signal_phase, wrap_phase, Constellation};
use crate::report::fmt_sig12;

/// Amplitude `|alpha|` and constellation size. `m` only enters formulas here,
/// so it need not be a power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    alpha: f64,
    m: u32,
}

impl SignalParams {
    pub fn new(alpha: f64, m: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return config(format!("alpha must be positive and finite, got {alpha}"));
        }
        if m < 2 {
            return config(format!("M must be at least 2, got {m}"));
        }
        Ok(Self { alpha, m })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Phase-noise standard deviation in radians.
    pub fn sigma(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn t0(&self) -> f64 {
        PI * self.alpha / (2.0 * self.m as f64)
    }

    /// `sigma > 2 M delta = 2 pi / M`, i.e. `alpha < M / (2 pi)`.
    pub fn hides_both_keys(&self) -> bool {
        let m = self.m as f64;
        let delta = PI / (m * m);
        self.sigma() > 2.0 * m * delta
    }
}

/// Probabilities of landing `e` coarse bases away, `e = 0, +-1, +-2`.
/// `p1` and `p2` are per side: `p0 + 2 p1 + 2 p2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborProbs {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl NeighborProbs {
    pub fn new(p0: f64, p1: f64, p2: f64) -> Result<Self> {
        let probs = Self { p0, p1, p2 };
        probs.validate()?;
        Ok(probs)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.p0, self.p1, self.p2]
            .iter()
            .any(|p| !(*p >= 0.0 && p.is_finite()))
        {
            return config("neighbor probabilities must be non-negative");
        }
        let total = self.p0 + 2.0 * self.p1 + 2.0 * self.p2;
        if (total - 1.0).abs() > 1e-9 {
            return config(format!("neighbor probabilities sum to {total}, not 1"));
        }
        Ok(())
    }

    /// Gaussian mass over each coarse decision region at `t0`, truncated at
    /// `|e| = 2` and renormalized.
    pub fn from_t0(t0: f64) -> Self {
        let q = |x: f64| 0.5 * erfc(x / SQRT_2);
        let p0 = 1.0 - 2.0 * q(t0);
        let p1 = q(t0) - q(3.0 * t0);
        let p2 = q(3.0 * t0) - q(5.0 * t0);
        let total = p0 + 2.0 * (p1 + p2);
        Self {
            p0: p0 / total,
            p1: p1 / total,
            p2: p2 / total,
        }
    }

    /// Mass of offset `e`.
    pub fn mass(&self, e: i32) -> f64 {
        match e.abs() {
            0 => self.p0,
            1 => self.p1,
            2 => self.p2,
            _ => 0.0,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> i32 {
        let u: f64 = rng.random();
        let mut acc = self.p0;
        if u < acc {
            return 0;
        }
        for (e, p) in [(1, self.p1), (-1, self.p1), (2, self.p2), (-2, self.p2)] {
            acc += p;
            if u < acc {
                return e;
            }
        }
        -2
    }
}

/// Measurement channel seen by a keyless receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Noiseless,
    /// `N(0, sigma^2)` phase noise, wrapped.
    GaussianPhase {
        sigma: f64,
    },
    /// Uniform on `[-sigma, sigma]`, wrapped.
    Wedge {
        sigma: f64,
    },
    /// Jump by `e` coarse spacings; only meaningful without pattern randomization.
    DiscreteNeighbor {
        probs: NeighborProbs,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Noiseless => Ok(()),
            NoiseModel::GaussianPhase { sigma } | NoiseModel::Wedge { sigma } => {
                if *sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    config(format!("noise sigma must be positive, got {sigma}"))
                }
            }
            NoiseModel::DiscreteNeighbor { probs } => probs.validate(),
        }
    }

    /// Half-width of the window a keyless receiver searches, in radians.
    pub fn window(&self) -> f64 {
        match self {
            NoiseModel::GaussianPhase { sigma } | NoiseModel::Wedge { sigma } => *sigma,
            _ => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Noiseless => "noiseless",
            NoiseModel::GaussianPhase { .. } => "gaussian",
            NoiseModel::Wedge { .. } => "wedge",
            NoiseModel::DiscreteNeighbor { .. } => "discrete",
        }
    }
}

/// One signal slot. `running_key` and `pattern_index` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    pub index: u64,
    pub data_bit: u8,
    pub running_key: u32,
    pub pattern_index: u32,
    pub true_phase: f64,
    pub measured_phase: Option<f64>,
}

/// Emit one slot per data bit. Without `rk2` every slot uses pattern 1.
pub fn transmit(
    data: &[u8],
    rk1: &RunningKeySequence,
    rk2: Option<&RunningKeySequence>,
    c: &Constellation,
) -> Result<Vec<SlotRecord>> {
    if data.len() != rk1.len() {
        return argument(format!("{} data bits but {} running keys", data.len(), rk1.len()));
    }
    if rk1.m() != c.m() {
        return argument(format!(
            "running keys mod {} on an M = {} constellation",
            rk1.m(),
            c.m()
        ));
    }
    if let Some(rk2) = rk2 {
        if rk2.len() != data.len() {
            return argument(format!(
                "{} data bits but {} pattern selectors",
                data.len(),
                rk2.len()
            ));
        }
        if rk2.m() != c.m() {
            return argument("pattern selector modulus differs from M");
        }
    }
    if data.iter().any(|&b| b > 1) {
        return argument("data bits must be 0 or 1");
    }
    Ok(data
        .iter()
        .enumerate()
        .map(|(i, &bit)| {
            let k = rk1.symbols()[i] + 1;
            let j = rk2.map_or(1, |r| r.symbols()[i] + 1);
            SlotRecord {
                index: i as u64,
                data_bit: bit,
                running_key: k,
                pattern_index: j,
                true_phase: signal_phase(pattern_map_unchecked(c, j, k), bit),
                measured_phase: None,
            }
        })
        .collect())
}

/// Slots per independently seeded partition of [`measure`].
pub const MEASURE_PARTITION: usize = 1 << 16;

/// Apply the noise model. Partition `p` of [`MEASURE_PARTITION`] slots draws
/// from a generator seeded with `seed + p`, so output does not depend on
/// thread count.
pub fn measure(
    slots: &[SlotRecord],
    noise: &NoiseModel,
    c: &Constellation,
    seed: u64,
) -> Result<Vec<SlotRecord>> {
    noise.validate()?;
    if matches!(noise, NoiseModel::DiscreteNeighbor { .. }) && slots.iter().any(|s| s.pattern_index != 1) {
        return config("discrete-neighbor noise is defined only for the deterministic mapping");
    }
    let spacing = c.spacing();
    let mut out = slots.to_vec();
    out.par_chunks_mut(MEASURE_PARTITION)
        .enumerate()
        .for_each(|(p, chunk)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(p as u64));
            match noise {
                NoiseModel::Noiseless => {
                    for s in chunk {
                        s.measured_phase = Some(s.true_phase);
                    }
                }
                NoiseModel::GaussianPhase { sigma } => {
                    let normal = Normal::new(0.0, *sigma).expect("validated sigma");
                    for s in chunk {
                        s.measured_phase = Some(wrap_phase(s.true_phase + normal.sample(&mut rng)));
                    }
                }
                NoiseModel::Wedge { sigma } => {
                    for s in chunk {
                        let n = rng.random_range(-*sigma..=*sigma);
                        s.measured_phase = Some(wrap_phase(s.true_phase + n));
                    }
                }
                NoiseModel::DiscreteNeighbor { probs } => {
                    for s in chunk {
                        let e = probs.sample(&mut rng);
                        s.measured_phase = Some(wrap_phase(s.true_phase + e as f64 * spacing));
                    }
                }
            }
        });
    Ok(out)
}

/// Heterodyne error towards one neighbour: `1/2 - Phi_0(t0)`.
pub fn neighbor_error_prob(p: &SignalParams) -> f64 {
    0.5 * erfc(p.t0() / SQRT_2)
}

/// `|<alpha e^{i a} | alpha e^{i b}>|^2`.
pub fn coherent_overlap(p: &SignalParams, phase_a: f64, phase_b: f64) -> f64 {
    let a2 = p.alpha * p.alpha;
    (-2.0 * a2 * (1.0 - (phase_a - phase_b).cos())).exp()
}

/// Keyed binary decision. Exactly `pi/2` away resolves to 1.
pub fn bob_decode(slot: &SlotRecord, running_key: u32, pattern_index: u32, c: &Constellation) -> Result<u8> {
    let measured = slot
        .measured_phase
        .ok_or_else(|| crate::Error::Argument(format!("slot {} was never measured", slot.index)))?;
    let basis = crate::mapping::pattern_map(c, pattern_index, running_key)?;
    Ok(if phase_distance(measured, basis) < FRAC_PI_2 {
        0
    } else {
        1
    })
}

/// Keyless nearest-point decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EveEstimate {
    pub key: u32,
    pub pattern: Option<u32>,
    pub bit: u8,
}

/// Nearest of the `2M` coarse points, or of the `2M^2` fine points when
/// `randomized`. Ties go to the lower grid index.
pub fn eve_nearest(measured_phase: f64, c: &Constellation, randomized: bool) -> EveEstimate {
    let m = c.m() as u64;
    let first = c.base_phase(1);
    let (step, count) = if randomized {
        (c.delta(), 2 * m * m)
    } else {
        (c.spacing(), 2 * m)
    };
    let x = (wrap_phase(measured_phase - first)) / step;
    // round half down, then wrap the index around the circle
    let n = ((x - 0.5).ceil() as u64) % count;
    if randomized {
        let per_bit = m * m;
        let bit = (n / per_bit) as u8;
        let r = n % per_bit;
        let i = (r / m) as u32 + 1;
        let j = (r % m) as u32 + 1;
        EveEstimate {
            key: c.key_of(i, j),
            pattern: Some(j),
            bit,
        }
    } else {
        EveEstimate {
            key: (n % m) as u32 + 1,
            pattern: None,
            bit: (n / m) as u8,
        }
    }
}

/// Slot trace as CSV: `index,data_bit,running_key,pattern_index,true_phase,measured_phase`.
pub fn write_slot_csv<W: Write>(slots: &[SlotRecord], mut w: W) -> io::Result<()> {
    w.write_all(b"index,data_bit,running_key,pattern_index,true_phase,measured_phase\n")?;
    for s in slots {
        let measured = s.measured_phase.map(fmt_sig12).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.index,
            s.data_bit,
            s.running_key,
            s.pattern_index,
            fmt_sig12(s.true_phase),
            measured
        )?;
    }
    Ok(())
}
