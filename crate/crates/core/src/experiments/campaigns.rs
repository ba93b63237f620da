//! Monte Carlo campaigns. Trials run in parallel, each pure in its derived
//! seed; aggregation sums integer counts in trial order, so results do not
//! depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{trial_seed, AttackKind, Campaign, ExperimentConfig, NoiseKind};
use super::table::{MetricRow, MetricsTable};
use crate::attack::{
    derive_noisy_keystream, fast_correlation, feasibility, ml_bruteforce, AttackReport, DerivedKeystream,
};
use crate::error::{config, refused, Error, Result};
use crate::keystream::{lfsr_sequence, running_keys, LfsrSpec};
use crate::mapping::{phase_offset, signal_phase, Constellation};
use crate::physical::{eve_nearest, measure, neighbor_error_prob, transmit, SlotRecord};

/// Run whichever campaign the configuration names.
pub fn run_campaign(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    match cfg.campaign {
        Campaign::BitProfile => run_bit_position_profile(cfg),
        Campaign::Immunity => run_immunity_curve(cfg),
        Campaign::AttackSweep => run_attack_sweep(cfg),
        Campaign::NeighborError => run_neighbor_error(cfg),
    }
}

/// One simulated trial: measured slots, the data bits, and the secret
/// initial state of the basis-driving register.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub slots: Vec<SlotRecord>,
    pub data: Vec<u8>,
    pub seed1: Vec<u8>,
}

fn random_seed<R: Rng>(spec: &LfsrSpec, rng: &mut R) -> Vec<u8> {
    loop {
        let seed: Vec<u8> = (0..spec.degree()).map(|_| rng.random::<bool>() as u8).collect();
        if seed.contains(&1) {
            return seed;
        }
    }
}

/// Fresh keys, random data, transmission and measurement for one trial.
fn simulate(cfg: &ExperimentConfig, seed: u64, slots: usize) -> Result<Transmission> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = cfg.constellation();
    let width = c.bits_per_symbol() as usize;
    let seed1 = random_seed(&cfg.spec1, &mut rng);
    let rk1 = running_keys(&lfsr_sequence(&cfg.spec1, &seed1, slots * width)?, c.m())?;
    let rk2 = match &cfg.spec2 {
        Some(spec) => {
            let seed2 = random_seed(spec, &mut rng);
            Some(running_keys(&lfsr_sequence(spec, &seed2, slots * width)?, c.m())?)
        }
        None => None,
    };
    let data: Vec<u8> = (0..slots).map(|_| rng.random::<bool>() as u8).collect();
    let sent = transmit(&data, &rk1, rk2.as_ref(), &c)?;
    let slots = measure(&sent, &cfg.noise_model(), &c, rng.random())?;
    Ok(Transmission { slots, data, seed1 })
}

/// Trial `index` of `cfg` with `slots_per_trial` slots, exactly as the
/// campaigns draw it.
pub fn simulate_trial(cfg: &ExperimentConfig, index: u64) -> Result<Transmission> {
    let slots = usize::try_from(cfg.slots_per_trial)
        .map_err(|_| Error::Config("slots_per_trial too large".into()))?;
    simulate(cfg, trial_seed(cfg.master_seed, index), slots)
}

/// Run the configured attack on `n` bits of Eve's keystream from trial
/// `index`. Returns the report and the crossover measured against the truth.
pub fn attack_trial(cfg: &ExperimentConfig, index: u64, n: usize) -> Result<(AttackReport, f64)> {
    let c = cfg.constellation();
    let width = c.bits_per_symbol() as usize;
    let tx = simulate(cfg, trial_seed(cfg.master_seed, index), n.div_ceil(width))?;
    let d = derive_noisy_keystream(&tx.slots, &tx.data, &c, cfg.randomized(), &cfg.noise_model())?;
    let truth = DerivedKeystream::truth(&tx.slots, &c);
    let observed = &d.bits[..n];
    let errors = observed.iter().zip(&truth[..n]).filter(|(a, b)| a != b).count();
    let crossover = errors as f64 / n as f64;
    let report = match cfg.attack {
        AttackKind::Ml => ml_bruteforce(observed, &cfg.spec1, Some(&tx.seed1)),
        AttackKind::Fca => fast_correlation(
            observed,
            &cfg.spec1,
            &cfg.fca(crossover.min(0.499)),
            Some(&tx.seed1),
        ),
    }?;
    Ok((report, crossover))
}

/// Keystream bits an attack sees: `observed_bits`, else every derived bit.
pub fn observed_length(cfg: &ExperimentConfig) -> usize {
    let width = cfg.constellation().bits_per_symbol() as u64;
    cfg.observed_bits.unwrap_or(cfg.slots_per_trial * width) as usize
}

/// Eve's symbol errors and per-position bit errors (index 0 = LSB).
#[derive(Debug, Clone, Default)]
struct ErrorCounts {
    slots: u64,
    symbol_errors: u64,
    position_errors: Vec<u64>,
}

impl ErrorCounts {
    fn from_derived(d: &DerivedKeystream, slots: &[SlotRecord], c: &Constellation) -> Self {
        let width = c.bits_per_symbol() as usize;
        let truth = DerivedKeystream::truth(slots, c);
        let mut position_errors = vec![0u64; width];
        for (i, (a, b)) in d.bits.iter().zip(&truth).enumerate() {
            if a != b {
                position_errors[width - 1 - i % width] += 1;
            }
        }
        Self {
            slots: slots.len() as u64,
            symbol_errors: d.symbol_errors as u64,
            position_errors,
        }
    }

    fn merge(mut self, other: &Self) -> Self {
        self.slots += other.slots;
        self.symbol_errors += other.symbol_errors;
        if self.position_errors.is_empty() {
            self.position_errors = vec![0; other.position_errors.len()];
        }
        for (a, b) in self.position_errors.iter_mut().zip(&other.position_errors) {
            *a += b;
        }
        self
    }

    fn bit_errors(&self) -> u64 {
        self.position_errors.iter().sum()
    }
}

fn eve_error_counts(cfg: &ExperimentConfig) -> Result<ErrorCounts> {
    let slots = usize::try_from(cfg.slots_per_trial)
        .map_err(|_| Error::Config("slots_per_trial too large".into()))?;
    let c = cfg.constellation();
    let noise = cfg.noise_model();
    let per_trial = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let tx = simulate(cfg, trial_seed(cfg.master_seed, t), slots)?;
            let d = derive_noisy_keystream(&tx.slots, &tx.data, &c, cfg.randomized(), &noise)?;
            Ok(ErrorCounts::from_derived(&d, &tx.slots, &c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_trial.iter().fold(ErrorCounts::default(), ErrorCounts::merge))
}

fn push_error_rows(rows: &mut Vec<MetricRow>, point: &str, counts: &ErrorCounts) -> (f64, f64) {
    rows.push(MetricRow::rate(
        point,
        "symbol_error",
        counts.symbol_errors,
        counts.slots,
    ));
    let width = counts.position_errors.len() as u64;
    let bit = MetricRow::rate(point, "bit_error", counts.bit_errors(), counts.slots * width);
    let (p, se) = (bit.value, bit.std_error);
    rows.push(bit);
    let mut lo = (f64::INFINITY, 0.0);
    let mut hi = (f64::NEG_INFINITY, 0.0);
    for (b, &e) in counts.position_errors.iter().enumerate() {
        let r = MetricRow::rate(point, format!("bit_error_b{b}"), e, counts.slots);
        if r.value < lo.0 {
            lo = (r.value, r.std_error);
        }
        if r.value > hi.0 {
            hi = (r.value, r.std_error);
        }
        rows.push(r);
    }
    let spread = hi.0 - lo.0;
    let combined = (hi.1 * hi.1 + lo.1 * lo.1).sqrt();
    rows.push(MetricRow::new(
        point,
        "flatness_spread",
        spread,
        combined,
        counts.slots,
    ));
    rows.push(MetricRow::exact(
        point,
        "flatness_z",
        if combined > 0.0 { spread / combined } else { 0.0 },
    ));
    (p, se)
}

/// Per-position error rates of Eve's keystream under the fixed mapping.
pub fn run_bit_position_profile(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    let mut rows = Vec::new();
    for (label, point) in cfg.points()? {
        if point.randomized() {
            return refused(format!(
                "point {label}: the bit-position profile applies to the fixed mapping; drop spec2"
            ));
        }
        if point.noise == NoiseKind::Wedge {
            return config(format!(
                "point {label}: bit-position profile needs gaussian, discrete or noiseless noise"
            ));
        }
        let counts = eve_error_counts(&point)?;
        push_error_rows(&mut rows, &label, &counts);
    }
    Ok(MetricsTable {
        config: cfg.clone(),
        rows,
    })
}

/// Eve's symbol and bit error under pattern randomization, per point. Points
/// violating the noise-hiding condition are flagged and not run.
pub fn run_immunity_curve(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    let mut rows = Vec::new();
    for (label, point) in cfg.points()? {
        if !point.randomized() || point.noise != NoiseKind::Wedge {
            return config(format!(
                "point {label}: immunity runs need pattern randomization (spec2) and wedge noise"
            ));
        }
        let holds = point.hiding_condition();
        rows.push(MetricRow::exact(
            &label,
            "hiding_condition",
            f64::from(u8::from(holds)),
        ));
        if !holds {
            continue;
        }
        let m = point.m as f64;
        rows.push(MetricRow::exact(&label, "reference_symbol_error", 1.0 - 1.0 / m));
        rows.push(MetricRow::exact(
            &label,
            "reference_bit_error",
            0.5 * (1.0 - 1.0 / m),
        ));
        let counts = eve_error_counts(&point)?;
        let (p, se) = push_error_rows(&mut rows, &label, &counts);
        rows.push(MetricRow::new(
            &label,
            "epsilon",
            0.5 - p,
            se,
            counts.slots * counts.position_errors.len() as u64,
        ));
    }
    Ok(MetricsTable {
        config: cfg.clone(),
        rows,
    })
}

enum AttackOutcome {
    Refused,
    Ran {
        success: bool,
        crossover: f64,
        work: u64,
        iterations: usize,
    },
}

/// Success rate of key recovery from Eve's derived keystream versus the
/// observed length, with fresh keys every trial.
pub fn run_attack_sweep(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    let mut rows = Vec::new();
    for (label, point) in cfg.points()? {
        let n = observed_length(&point);
        let outcomes = (0..point.trials as u64)
            .into_par_iter()
            .map(|t| match attack_trial(&point, t, n) {
                Ok((r, crossover)) => Ok(AttackOutcome::Ran {
                    success: r.success,
                    crossover,
                    work: r.work_units,
                    iterations: r.iterations_used,
                }),
                Err(Error::Refused(_)) => Ok(AttackOutcome::Refused),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;

        let trials = outcomes.len() as u64;
        let mut successes = 0;
        let mut refusals = 0;
        let mut crossovers = Vec::new();
        let mut work = Vec::new();
        let mut iterations = Vec::new();
        for o in &outcomes {
            match o {
                AttackOutcome::Refused => refusals += 1,
                AttackOutcome::Ran {
                    success,
                    crossover,
                    work: w,
                    iterations: it,
                } => {
                    successes += u64::from(*success);
                    crossovers.push(*crossover);
                    work.push(*w as f64);
                    iterations.push(*it as f64);
                }
            }
        }
        rows.push(MetricRow::exact(&label, "observed_bits", n as f64));
        rows.push(MetricRow::rate(&label, "success_rate", successes, trials));
        rows.push(MetricRow::rate(&label, "refused_rate", refusals, trials));
        let crossover = MetricRow::mean(&label, "crossover", &crossovers);
        if !crossovers.is_empty() {
            let f = feasibility(
                point.spec1.degree() as u32,
                point.spec1.tap_count() as u32 + 1,
                crossover.value.min(0.5),
            )?;
            rows.push(MetricRow::exact(&label, "n0", f.n0));
        }
        rows.push(crossover);
        rows.push(MetricRow::mean(&label, "work_units", &work));
        rows.push(MetricRow::mean(&label, "iterations", &iterations));
    }
    Ok(MetricsTable {
        config: cfg.clone(),
        rows,
    })
}

/// Rate at which Eve's nearest-basis decision lands on a neighbour above
/// (and below) the true basis, against the Gaussian tail at `t0`.
pub fn run_neighbor_error(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    let mut rows = Vec::new();
    for (label, point) in cfg.points()? {
        if point.randomized() || point.noise != NoiseKind::Gaussian {
            return config(format!(
                "point {label}: neighbour-error runs need the fixed mapping and gaussian noise"
            ));
        }
        let c = point.constellation();
        let slots = point.slots_per_trial as usize;
        let per_trial = (0..point.trials as u64)
            .into_par_iter()
            .map(|t| {
                let tx = simulate(&point, trial_seed(point.master_seed, t), slots)?;
                let (mut up, mut down) = (0u64, 0u64);
                for s in &tx.slots {
                    let est = eve_nearest(s.measured_phase.expect("measured"), &c, false);
                    let decided = signal_phase(c.base_phase(est.key), est.bit);
                    let off = phase_offset(decided, s.true_phase);
                    if off > 1e-12 {
                        up += 1;
                    } else if off < -1e-12 {
                        down += 1;
                    }
                }
                Ok((up, down))
            })
            .collect::<Result<Vec<_>>>()?;
        let (up, down) = per_trial.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let total = slots as u64 * point.trials as u64;
        let signal = point.signal();
        rows.push(MetricRow::exact(&label, "t0", signal.t0()));
        rows.push(MetricRow::exact(
            &label,
            "reference",
            neighbor_error_prob(&signal),
        ));
        rows.push(MetricRow::rate(&label, "neighbor_error_up", up, total));
        rows.push(MetricRow::rate(&label, "neighbor_error_down", down, total));
    }
    Ok(MetricsTable {
        config: cfg.clone(),
        rows,
    })
}
