//! LFSR keystreams.
//!
//! Registers use the Fibonacci (external XOR) convention. A spec lists the
//! exponents of the connection polynomial `C(x) = 1 + sum x^e`, so the output
//! sequence obeys `a[t] = XOR_{e in taps} a[t - e]`. Register cell 0 holds the
//! next output bit; cell `degree - e` is the one tapped by exponent `e`.
//!
//! Bit vectors are plain `Vec<u8>` holding 0 or 1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{argument, config, Error, Result};

/// Feedback polynomial of a shift register, serialized as `"degree:taps"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LfsrSpec {
    degree: usize,
    /// Descending, distinct, always starts with `degree`.
    taps: Vec<usize>,
}

impl LfsrSpec {
    pub fn new(degree: usize, taps: impl IntoIterator<Item = usize>) -> Result<Self> {
        if degree < 2 {
            return config(format!("LFSR degree must be at least 2, got {degree}"));
        }
        let mut taps: Vec<usize> = taps.into_iter().collect();
        taps.sort_unstable_by(|a, b| b.cmp(a));
        let before = taps.len();
        taps.dedup();
        if taps.len() != before {
            return config("LFSR tap exponents must be distinct");
        }
        if let Some(&bad) = taps.iter().find(|&&e| e == 0 || e > degree) {
            return config(format!("tap exponent {bad} outside 1..={degree}"));
        }
        if taps.first() != Some(&degree) {
            return config(format!("tap set must include the degree {degree}"));
        }
        if taps.len() < 2 {
            return config("single-tap registers are degenerate");
        }
        Ok(Self { degree, taps })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    /// Feedback weight `t`.
    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }

    /// A known primitive feedback polynomial of the given degree, if tabulated.
    pub fn primitive(degree: usize) -> Option<Self> {
        let taps: &[usize] = match degree {
            2 => &[2, 1],
            3 => &[3, 1],
            4 => &[4, 1],
            5 => &[5, 2],
            6 => &[6, 1],
            7 => &[7, 1],
            8 => &[8, 4, 3, 2],
            9 => &[9, 4],
            10 => &[10, 3],
            11 => &[11, 2],
            12 => &[12, 6, 4, 1],
            13 => &[13, 4, 3, 1],
            14 => &[14, 5, 3, 1],
            15 => &[15, 1],
            16 => &[16, 5, 3, 2],
            17 => &[17, 3],
            18 => &[18, 7],
            19 => &[19, 5, 2, 1],
            20 => &[20, 3],
            21 => &[21, 2],
            22 => &[22, 1],
            23 => &[23, 5],
            24 => &[24, 7, 2, 1],
            25 => &[25, 3],
            28 => &[28, 3],
            29 => &[29, 2],
            31 => &[31, 3],
            _ => return None,
        };
        Some(Self::new(degree, taps.iter().copied()).expect("tabulated polynomial"))
    }

    /// Next output bit from a window holding the previous `degree` bits,
    /// oldest first.
    #[inline]
    pub(crate) fn feedback(&self, window: &[u8]) -> u8 {
        let d = self.degree;
        self.taps.iter().fold(0, |acc, &e| acc ^ window[d - e])
    }

    /// Recover the bit `degree` positions before the window (inverse step).
    #[inline]
    pub(crate) fn predecessor(&self, window: &[u8]) -> u8 {
        // a[t] = a[t+d] ^ XOR_{e != d} a[t+d-e], with window = a[t+1..=t+d]
        let d = self.degree;
        let mut bit = window[d - 1];
        for &e in &self.taps[1..] {
            bit ^= window[d - e - 1];
        }
        bit
    }
}

impl fmt::Display for LfsrSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.degree)?;
        for (i, e) in self.taps.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl FromStr for LfsrSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (deg, taps) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("LFSR spec {s:?} is not of the form degree:taps")))?;
        let degree = deg
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad LFSR degree {deg:?}")))?;
        let taps = taps
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad tap exponent {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(degree, taps)
    }
}

impl Serialize for LfsrSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for LfsrSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Register contents; the initial state is the secret key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeystreamState {
    register: Vec<u8>,
    step_count: u64,
}

impl KeystreamState {
    pub fn new(spec: &LfsrSpec, register: Vec<u8>) -> Result<Self> {
        validate_seed(spec, &register)?;
        Ok(Self {
            register,
            step_count: 0,
        })
    }

    pub fn register(&self) -> &[u8] {
        &self.register
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

fn validate_seed(spec: &LfsrSpec, seed: &[u8]) -> Result<()> {
    if seed.len() != spec.degree {
        return config(format!(
            "register length {} does not match degree {}",
            seed.len(),
            spec.degree
        ));
    }
    if seed.iter().any(|&b| b > 1) {
        return config("register cells must be 0 or 1");
    }
    if seed.iter().all(|&b| b == 0) {
        return config("all-zero register produces a constant stream");
    }
    Ok(())
}

/// One clock of the register: emits cell 0, shifts, appends the feedback bit.
pub fn lfsr_step(state: &KeystreamState, spec: &LfsrSpec) -> Result<(u8, KeystreamState)> {
    if state.register.len() != spec.degree {
        return config(format!(
            "register length {} does not match degree {}",
            state.register.len(),
            spec.degree
        ));
    }
    let out = state.register[0];
    let fb = spec.feedback(&state.register);
    let mut register = Vec::with_capacity(spec.degree);
    register.extend_from_slice(&state.register[1..]);
    register.push(fb);
    Ok((
        out,
        KeystreamState {
            register,
            step_count: state.step_count + 1,
        },
    ))
}

/// First `n` output bits from `seed`.
pub fn lfsr_sequence(spec: &LfsrSpec, seed: &[u8], n: usize) -> Result<Vec<u8>> {
    validate_seed(spec, seed)?;
    Ok(extend_sequence(spec, seed, n))
}

/// Same as [`lfsr_sequence`] without seed validation (zero seeds allowed).
pub(crate) fn extend_sequence(spec: &LfsrSpec, seed: &[u8], n: usize) -> Vec<u8> {
    let d = spec.degree;
    let mut out = Vec::with_capacity(n.max(d));
    out.extend_from_slice(seed);
    while out.len() < n {
        let t = out.len();
        let bit = spec.feedback(&out[t - d..t]);
        out.push(bit);
    }
    out.truncate(n);
    out
}

/// Walk a register state observed at time `offset` back to time 0.
pub(crate) fn rewind(spec: &LfsrSpec, window: &[u8], offset: usize) -> Vec<u8> {
    let d = spec.degree;
    let mut buf = vec![0u8; offset + d];
    buf[offset..].copy_from_slice(window);
    for t in (0..offset).rev() {
        buf[t] = spec.predecessor(&buf[t + 1..t + 1 + d]);
    }
    buf.truncate(d);
    buf
}

/// Seed register from the low `degree` bits of an integer, cell 0 = bit 0.
pub fn seed_from_u64(spec: &LfsrSpec, value: u64) -> Result<Vec<u8>> {
    if spec.degree > 64 {
        return argument("integer seeds only cover degree <= 64");
    }
    let seed: Vec<u8> = (0..spec.degree).map(|i| ((value >> i) & 1) as u8).collect();
    validate_seed(spec, &seed)?;
    Ok(seed)
}

pub fn seed_to_u64(seed: &[u8]) -> u64 {
    seed.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
}

/// Keystream split into `log2(M)`-bit running keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunningKeySequence {
    symbols: Vec<u32>,
    m: u32,
    bits_per_symbol: u32,
    discarded_bits: usize,
}

impl RunningKeySequence {
    pub fn from_symbols(symbols: Vec<u32>, m: u32) -> Result<Self> {
        let bits_per_symbol = log2_modulus(m)?;
        if let Some(s) = symbols.iter().find(|&&s| s >= m) {
            return argument(format!("symbol {s} out of range for M = {m}"));
        }
        Ok(Self {
            symbols,
            m,
            bits_per_symbol,
            discarded_bits: 0,
        })
    }

    /// Symbols in `0..M`.
    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    /// Trailing bits that did not fill a whole block.
    pub fn discarded_bits(&self) -> usize {
        self.discarded_bits
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Reassemble the consumed keystream bits, MSB first.
    pub fn to_bits(&self) -> Vec<u8> {
        let mut bits = Vec::with_capacity(self.symbols.len() * self.bits_per_symbol as usize);
        for &s in &self.symbols {
            push_symbol_bits(&mut bits, s, self.bits_per_symbol);
        }
        bits
    }
}

pub(crate) fn push_symbol_bits(out: &mut Vec<u8>, symbol: u32, width: u32) {
    for b in (0..width).rev() {
        out.push(((symbol >> b) & 1) as u8);
    }
}

/// `log2(m)` for a power of two `m >= 2`.
pub fn log2_modulus(m: u32) -> Result<u32> {
    if m < 2 || !m.is_power_of_two() {
        return config(format!("M must be a power of two (>= 2), got {m}"));
    }
    Ok(m.trailing_zeros())
}

/// Block a keystream into running keys, MSB first. A trailing partial block
/// is dropped and reported.
pub fn running_keys(bits: &[u8], m: u32) -> Result<RunningKeySequence> {
    let width = log2_modulus(m)?;
    let w = width as usize;
    let symbols = bits
        .chunks_exact(w)
        .map(|block| block.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32) % m)
        .collect();
    Ok(RunningKeySequence {
        symbols,
        m,
        bits_per_symbol: width,
        discarded_bits: bits.len() % w,
    })
}

/// Length of the shortest LFSR generating `bits` (Berlekamp-Massey over GF(2)).
pub fn linear_complexity(bits: &[u8]) -> Result<usize> {
    if bits.is_empty() {
        return argument("linear complexity of an empty sequence is undefined");
    }
    let n = bits.len();
    let mut c = vec![0u8; n + 1];
    let mut b = vec![0u8; n + 1];
    c[0] = 1;
    b[0] = 1;
    let mut l = 0usize;
    let mut m: isize = -1;
    for i in 0..n {
        let mut disc = bits[i];
        for j in 1..=l {
            disc ^= c[j] & bits[i - j];
        }
        if disc == 1 {
            let t = c.clone();
            let shift = (i as isize - m) as usize;
            for j in 0..=n - shift {
                c[j + shift] ^= b[j];
            }
            if 2 * l <= i {
                l = i + 1 - l;
                m = i as isize;
                b = t;
            }
        }
    }
    Ok(l)
}

/// Boolean combining function given by its truth table. Row index bit `i`
/// holds the output of register `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombiningFunction {
    arity: usize,
    table: Vec<u8>,
}

impl CombiningFunction {
    pub fn new(arity: usize, table: Vec<u8>) -> Result<Self> {
        if arity == 0 || arity > 16 {
            return config(format!("combiner arity {arity} outside 1..=16"));
        }
        if table.len() != 1 << arity {
            return config(format!(
                "truth table has {} rows, arity {arity} needs {}",
                table.len(),
                1 << arity
            ));
        }
        if table.iter().any(|&b| b > 1) {
            return config("truth table entries must be 0 or 1");
        }
        Ok(Self { arity, table })
    }

    pub fn identity() -> Self {
        Self {
            arity: 1,
            table: vec![0, 1],
        }
    }

    pub fn xor(arity: usize) -> Result<Self> {
        let table = (0..1usize << arity).map(|r| (r.count_ones() & 1) as u8).collect();
        Self::new(arity, table)
    }

    pub fn majority3() -> Self {
        let table = (0..8usize).map(|r| (r.count_ones() >= 2) as u8).collect();
        Self { arity: 3, table }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, inputs: &[u8]) -> u8 {
        let row = inputs
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | ((b as usize) << i));
        self.table[row]
    }
}

/// Nonlinear combination generator: bit `i` is `f` of the component bits `i`.
pub fn combiner_sequence(
    specs: &[LfsrSpec],
    seeds: &[Vec<u8>],
    f: &CombiningFunction,
    n: usize,
) -> Result<Vec<u8>> {
    if specs.len() != f.arity() || seeds.len() != f.arity() {
        return config(format!(
            "combiner of arity {} given {} specs and {} seeds",
            f.arity(),
            specs.len(),
            seeds.len()
        ));
    }
    let streams = specs
        .iter()
        .zip(seeds)
        .map(|(spec, seed)| lfsr_sequence(spec, seed, n))
        .collect::<Result<Vec<_>>>()?;
    let mut row = vec![0u8; f.arity()];
    Ok((0..n)
        .map(|i| {
            for (r, s) in row.iter_mut().zip(&streams) {
                *r = s[i];
            }
            f.eval(&row)
        })
        .collect())
}

/// Hex form of a bit vector, MSB first, zero-padded to a whole nibble.
pub fn bits_to_hex(bits: &[u8]) -> String {
    bits.chunks(4)
        .map(|c| {
            let v = c
                .iter()
                .chain(std::iter::repeat(&0))
                .take(4)
                .fold(0u32, |acc, &b| (acc << 1) | b as u32);
            char::from_digit(v, 16).expect("nibble")
        })
        .collect()
}

/// Inverse of [`bits_to_hex`] for a known bit length.
pub fn bits_from_hex(hex: &str, len: usize) -> Result<Vec<u8>> {
    let hex = hex.trim();
    if hex.len() != len.div_ceil(4) {
        return argument(format!(
            "hex string of {} digits cannot hold exactly {len} bits",
            hex.len()
        ));
    }
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for ch in hex.chars() {
        let v = ch
            .to_digit(16)
            .ok_or_else(|| Error::Argument(format!("invalid hex digit {ch:?}")))?;
        push_symbol_bits(&mut bits, v, 4);
    }
    if bits[len..].iter().any(|&b| b != 0) {
        return argument("nonzero padding bits in hex string");
    }
    bits.truncate(len);
    Ok(bits)
}
