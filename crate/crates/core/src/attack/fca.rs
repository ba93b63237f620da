//! Iterative fast correlation attack: low-weight parity checks from powers of
//! the connection polynomial, decoded by belief propagation.

use serde::{Deserialize, Serialize};

use super::{verification_floor, AttackMethod, AttackReport};
use crate::error::{argument, refused, Result};
use crate::keystream::{extend_sequence, rewind, LfsrSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcaConfig {
    /// Outer rounds; each ends with a hard decision that replaces the observation.
    pub max_iterations: usize,
    /// Belief-propagation sweeps per round.
    pub parity_rounds: usize,
    /// Assumed crossover of the observation.
    pub crossover: f64,
}

impl Default for FcaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            parity_rounds: 10,
            crossover: 0.25,
        }
    }
}

/// Minimum mean number of checks per observed bit.
const MIN_CHECKS_PER_BIT: f64 = 3.0;
const CANDIDATE_WINDOWS: usize = 8;
const LLR_CAP: f64 = 40.0;

/// Flattened check-to-variable incidence.
struct Checks {
    weight: usize,
    /// Variable of each edge, `weight` consecutive edges per check.
    vars: Vec<u32>,
    /// CSR offsets into `var_edges`.
    var_start: Vec<u32>,
    var_edges: Vec<u32>,
}

impl Checks {
    /// Every shift of `C(x)^(2^i)` that fits in `n` bits: `a_t` plus
    /// `a_{t - e 2^i}` over the taps `e` sums to zero.
    fn build(spec: &LfsrSpec, n: usize) -> Self {
        let weight = spec.tap_count() + 1;
        let mut vars = Vec::new();
        let mut scale = 1usize;
        while spec.degree() * scale < n {
            for t in spec.degree() * scale..n {
                vars.push(t as u32);
                vars.extend(spec.taps().iter().map(|&e| (t - e * scale) as u32));
            }
            scale *= 2;
        }
        let mut var_start = vec![0u32; n + 1];
        for &v in &vars {
            var_start[v as usize + 1] += 1;
        }
        for i in 0..n {
            var_start[i + 1] += var_start[i];
        }
        let mut fill = var_start.clone();
        let mut var_edges = vec![0u32; vars.len()];
        for (e, &v) in vars.iter().enumerate() {
            var_edges[fill[v as usize] as usize] = e as u32;
            fill[v as usize] += 1;
        }
        Self {
            weight,
            vars,
            var_start,
            var_edges,
        }
    }

    fn count(&self) -> usize {
        self.vars.len() / self.weight
    }

    fn unsatisfied(&self, bits: &[u8]) -> usize {
        self.vars
            .chunks_exact(self.weight)
            .filter(|c| c.iter().fold(0u8, |acc, &v| acc ^ bits[v as usize]) == 1)
            .count()
    }
}

fn llr(p: f64) -> f64 {
    let p = p.clamp(1e-12, 0.5);
    ((1.0 - p) / p).ln()
}

/// Crossover implied by the fraction of unsatisfied weight-`w` checks.
fn crossover_from_unsatisfied(u: f64, w: usize) -> f64 {
    let s = 1.0 - 2.0 * u;
    if s <= 0.0 {
        0.5
    } else {
        (1.0 - s.powf(1.0 / w as f64)) / 2.0
    }
}

/// Sum-product sweeps on the current hard observation. Returns the posterior
/// LLRs (positive favours 0) and the edge visits spent.
fn propagate(checks: &Checks, bits: &[u8], p: f64, sweeps: usize) -> (Vec<f64>, u64) {
    let n = bits.len();
    let w = checks.weight;
    let prior = llr(p);
    let channel: Vec<f64> = bits
        .iter()
        .map(|&b| if b == 0 { prior } else { -prior })
        .collect();
    let mut msg = vec![0.0f64; checks.vars.len()];
    let mut total = channel.clone();
    let mut tanhs = vec![0.0f64; w];
    let mut work = 0u64;
    for _ in 0..sweeps {
        for (c, edges) in checks.vars.chunks_exact(w).enumerate() {
            let base = c * w;
            let mut zeros = 0;
            let mut prod = 1.0;
            for k in 0..w {
                let q = (total[edges[k] as usize] - msg[base + k]).clamp(-LLR_CAP, LLR_CAP);
                let t = (q / 2.0).tanh();
                tanhs[k] = t;
                if t == 0.0 {
                    zeros += 1;
                } else {
                    prod *= t;
                }
            }
            for k in 0..w {
                let others = match zeros {
                    0 => prod / tanhs[k],
                    1 if tanhs[k] == 0.0 => prod,
                    _ => 0.0,
                };
                let others = others.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                msg[base + k] = 2.0 * others.atanh();
            }
        }
        for v in 0..n {
            let (a, b) = (checks.var_start[v] as usize, checks.var_start[v + 1] as usize);
            total[v] = channel[v]
                + checks.var_edges[a..b]
                    .iter()
                    .map(|&e| msg[e as usize])
                    .sum::<f64>();
        }
        work += 2 * checks.vars.len() as u64;
        let decided: Vec<u8> = total.iter().map(|&l| u8::from(l < 0.0)).collect();
        if checks.unsatisfied(&decided) == 0 {
            break;
        }
    }
    (total, work)
}

/// Starting positions of up to `count` non-overlapping length-`d` windows
/// with the largest minimum reliability.
fn reliable_windows(reliability: &[f64], d: usize, count: usize) -> Vec<usize> {
    let n = reliability.len();
    let mut mins: Vec<(f64, usize)> = (0..=n - d)
        .map(|s| {
            let m = reliability[s..s + d]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            (m, s)
        })
        .collect();
    mins.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = Vec::new();
    for (_, s) in mins {
        if chosen.iter().all(|&c| c.abs_diff(s) >= d) {
            chosen.push(s);
            if chosen.len() == count {
                break;
            }
        }
    }
    chosen
}

/// Requires at least `10 d` observed bits and on average three parity checks
/// per bit; refuses otherwise. Each outer round runs the configured sweeps,
/// takes the hard decision, and re-estimates the crossover from the
/// unsatisfied-check fraction. Rounds stop once every check holds or the
/// unsatisfied count stops falling.
///
/// The initial state comes from the most reliable windows of the final
/// decision, each rewound to time 0. A candidate is accepted when its stream
/// agrees with the observation at least as well as a correct register would
/// at the configured crossover, less three standard deviations. With `truth`,
/// success additionally requires exact recovery.
pub fn fast_correlation(
    noisy: &[u8],
    spec: &LfsrSpec,
    cfg: &FcaConfig,
    truth: Option<&[u8]>,
) -> Result<AttackReport> {
    let d = spec.degree();
    let n = noisy.len();
    if n < 10 * d {
        return argument(format!("{n} observed bits; at least {} needed", 10 * d));
    }
    if !(0.0..0.5).contains(&cfg.crossover) {
        return argument(format!("crossover {} outside [0, 0.5)", cfg.crossover));
    }
    if cfg.max_iterations == 0 || cfg.parity_rounds == 0 {
        return argument("iteration counts must be positive");
    }
    if let Some(t) = truth {
        if t.len() != d {
            return argument(format!("truth has {} cells, register has {d}", t.len()));
        }
    }
    let checks = Checks::build(spec, n);
    let per_bit = checks.count() as f64 / n as f64;
    if per_bit < MIN_CHECKS_PER_BIT {
        return refused(format!(
            "only {per_bit:.2} parity checks per bit (need {MIN_CHECKS_PER_BIT}); observe more bits"
        ));
    }

    let mut current = noisy.to_vec();
    let mut p = cfg.crossover;
    let mut unsat = checks.unsatisfied(&current);
    let mut reliability = vec![1.0; n];
    let mut iterations = 0;
    let mut work = 0u64;
    while unsat > 0 && iterations < cfg.max_iterations {
        iterations += 1;
        let (post, spent) = propagate(&checks, &current, p, cfg.parity_rounds);
        work += spent;
        let next: Vec<u8> = post.iter().map(|&l| u8::from(l < 0.0)).collect();
        let next_unsat = checks.unsatisfied(&next);
        work += checks.vars.len() as u64;
        reliability = post.iter().map(|l| l.abs()).collect();
        if next_unsat >= unsat {
            break;
        }
        current = next;
        unsat = next_unsat;
        p = crossover_from_unsatisfied(unsat as f64 / checks.count() as f64, checks.weight);
    }

    let observed_floor = verification_floor(cfg.crossover, n);
    let mut best: Option<(usize, Vec<u8>)> = None;
    for start in reliable_windows(&reliability, d, CANDIDATE_WINDOWS) {
        let seed = rewind(spec, &current[start..start + d], start);
        if seed.iter().all(|&b| b == 0) {
            continue;
        }
        let stream = extend_sequence(spec, &seed, n);
        work += n as u64;
        let errors = stream.iter().zip(noisy).filter(|(a, b)| a != b).count();
        if best.as_ref().is_none_or(|(e, _)| errors < *e) {
            best = Some((errors, seed));
        }
    }
    let (errors, seed) = best.unwrap_or((n, Vec::new()));
    let verified = !seed.is_empty() && (n - errors) as f64 / n as f64 >= observed_floor;
    let success = verified && truth.is_none_or(|t| t == seed.as_slice());
    Ok(AttackReport {
        method: AttackMethod::FastCorrelation,
        success,
        recovered_state: verified.then_some(seed),
        iterations_used: iterations,
        parity_checks_used: checks.count(),
        residual_mismatch: errors as f64 / n as f64,
        work_units: work,
    })
}
