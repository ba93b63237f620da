//! Campaign configuration: field-by-field parsing that reports every
//! problem at once, sweep resolution, and per-trial seed derivation.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::attack::FcaConfig;
use crate::error::Result;
use crate::keystream::LfsrSpec;
use crate::mapping::Constellation;
use crate::physical::{NeighborProbs, NoiseModel, SignalParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Campaign {
    BitProfile,
    Immunity,
    AttackSweep,
    NeighborError,
}

impl Campaign {
    pub const NAMES: [&'static str; 4] = ["bit_profile", "immunity", "attack_sweep", "neighbor_error"];

    pub fn name(&self) -> &'static str {
        match self {
            Campaign::BitProfile => "bit_profile",
            Campaign::Immunity => "immunity",
            Campaign::AttackSweep => "attack_sweep",
            Campaign::NeighborError => "neighbor_error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::NAMES.iter().position(|n| *n == s).map(|i| {
            [
                Self::BitProfile,
                Self::Immunity,
                Self::AttackSweep,
                Self::NeighborError,
            ][i]
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Noiseless,
    Gaussian,
    Wedge,
    Discrete,
}

impl NoiseKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "noiseless" => Some(Self::Noiseless),
            "gaussian" => Some(Self::Gaussian),
            "wedge" => Some(Self::Wedge),
            "discrete" => Some(Self::Discrete),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Ml,
    Fca,
}

/// One problem found while reading a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub campaign: Campaign,
    pub m: u32,
    pub alpha: f64,
    pub spec1: LfsrSpec,
    pub spec2: Option<LfsrSpec>,
    pub noise: NoiseKind,
    /// Discrete-noise jump probabilities; derived from `alpha` when absent.
    pub neighbor_probs: Option<NeighborProbs>,
    pub trials: u32,
    pub slots_per_trial: u64,
    pub master_seed: u64,
    pub attack: AttackKind,
    /// Keystream bits handed to the attack; defaults to every derived bit.
    pub observed_bits: Option<u64>,
    pub fca_max_iterations: usize,
    pub fca_parity_rounds: usize,
    /// Each entry overrides base fields for one sweep point.
    pub sweep: Vec<Map<String, Value>>,
}

pub const FIELDS: [&str; 15] = [
    "campaign",
    "m",
    "alpha",
    "spec1",
    "spec2",
    "noise",
    "neighbor_probs",
    "trials",
    "slots_per_trial",
    "master_seed",
    "attack",
    "observed_bits",
    "fca_max_iterations",
    "fca_parity_rounds",
    "sweep",
];

struct Reader<'a> {
    map: &'a Map<String, Value>,
    errors: Vec<FieldError>,
}

impl<'a> Reader<'a> {
    fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    /// `None` for absent or null fields.
    fn get(&self, field: &str) -> Option<&'a Value> {
        self.map.get(field).filter(|v| !v.is_null())
    }

    fn required<T>(&mut self, field: &str, read: impl FnOnce(&mut Self, &Value) -> Option<T>) -> Option<T> {
        match self.get(field) {
            Some(v) => read(self, v),
            None => {
                self.fail(field, "missing required field");
                None
            }
        }
    }

    fn optional<T>(
        &mut self,
        field: &str,
        read: impl FnOnce(&mut Self, &Value) -> Option<T>,
    ) -> Option<Option<T>> {
        match self.get(field) {
            Some(v) => read(self, v).map(Some),
            None => Some(None),
        }
    }

    fn unsigned(&mut self, field: &str, v: &Value) -> Option<u64> {
        let r = v.as_u64();
        if r.is_none() {
            self.fail(field, format!("expected a non-negative integer, got {v}"));
        }
        r
    }

    fn number(&mut self, field: &str, v: &Value) -> Option<f64> {
        let r = v.as_f64();
        if r.is_none() {
            self.fail(field, format!("expected a number, got {v}"));
        }
        r
    }

    fn string(&mut self, field: &str, v: &Value) -> Option<&'a str> {
        // borrow from the map, not the temporary
        let r = self.map.get(field).and_then(Value::as_str);
        if r.is_none() {
            self.fail(field, format!("expected a string, got {v}"));
        }
        r
    }

    fn spec(&mut self, field: &str, v: &Value) -> Option<LfsrSpec> {
        let s = self.string(field, v)?;
        match s.parse() {
            Ok(spec) => Some(spec),
            Err(e) => {
                self.fail(field, e.to_string());
                None
            }
        }
    }
}

impl ExperimentConfig {
    /// Read and validate a configuration object, collecting every failure.
    pub fn from_value(value: &Value) -> Result<Self, Vec<FieldError>> {
        let Some(map) = value.as_object() else {
            return Err(vec![FieldError {
                field: "<root>".into(),
                message: "configuration must be a JSON object".into(),
            }]);
        };
        let mut r = Reader {
            map,
            errors: Vec::new(),
        };
        for key in map.keys() {
            if !FIELDS.contains(&key.as_str()) {
                r.fail(key, "unknown field");
            }
        }

        let campaign = r.optional("campaign", |r, v| {
            let s = r.string("campaign", v)?;
            let c = Campaign::parse(s);
            if c.is_none() {
                r.fail(
                    "campaign",
                    format!("unknown campaign {s:?}; expected one of {:?}", Campaign::NAMES),
                );
            }
            c
        });
        let m = r.required("m", |r, v| {
            let m = r.unsigned("m", v)?;
            match u32::try_from(m)
                .map_err(|_| ())
                .and_then(|m| Constellation::new(m).map_err(|_| ()))
            {
                Ok(c) => Some(c.m()),
                Err(()) => {
                    r.fail("m", format!("M must be a power of two (>= 2), got {m}"));
                    None
                }
            }
        });
        let alpha = r.required("alpha", |r, v| {
            let a = r.number("alpha", v)?;
            if a > 0.0 && a.is_finite() {
                Some(a)
            } else {
                r.fail("alpha", format!("amplitude must be positive and finite, got {a}"));
                None
            }
        });
        let spec1 = r.required("spec1", |r, v| r.spec("spec1", v));
        let spec2 = r.optional("spec2", |r, v| r.spec("spec2", v));
        let noise = r.required("noise", |r, v| {
            let s = r.string("noise", v)?;
            let n = NoiseKind::parse(s);
            if n.is_none() {
                r.fail(
                    "noise",
                    format!("unknown noise model {s:?}; expected noiseless, gaussian, wedge or discrete"),
                );
            }
            n
        });
        let neighbor_probs = r.optional("neighbor_probs", |r, v| {
            match serde_json::from_value::<NeighborProbs>(v.clone()) {
                Ok(p) => match p.validate() {
                    Ok(()) => Some(p),
                    Err(e) => {
                        r.fail("neighbor_probs", e.to_string());
                        None
                    }
                },
                Err(e) => {
                    r.fail("neighbor_probs", e.to_string());
                    None
                }
            }
        });
        let trials = r.required("trials", |r, v| {
            let t = r.unsigned("trials", v)?;
            if (1..=u32::MAX as u64).contains(&t) {
                Some(t as u32)
            } else {
                r.fail("trials", format!("need at least one trial, got {t}"));
                None
            }
        });
        let slots_per_trial = r.required("slots_per_trial", |r, v| {
            let s = r.unsigned("slots_per_trial", v)?;
            if s >= 1 {
                Some(s)
            } else {
                r.fail("slots_per_trial", "need at least one slot per trial");
                None
            }
        });
        let master_seed = r.required("master_seed", |r, v| r.unsigned("master_seed", v));
        let attack = r.optional("attack", |r, v| match r.string("attack", v)? {
            "ml" => Some(AttackKind::Ml),
            "fca" => Some(AttackKind::Fca),
            other => {
                r.fail("attack", format!("unknown attack {other:?}; expected ml or fca"));
                None
            }
        });
        let observed_bits = r.optional("observed_bits", |r, v| {
            let n = r.unsigned("observed_bits", v)?;
            if n >= 1 {
                Some(n)
            } else {
                r.fail("observed_bits", "need at least one observed bit");
                None
            }
        });
        let positive = |r: &mut Reader, field: &str, v: &Value| {
            let n = r.unsigned(field, v)?;
            if n >= 1 {
                Some(n as usize)
            } else {
                r.fail(field, "must be at least 1");
                None
            }
        };
        let fca_max_iterations =
            r.optional("fca_max_iterations", |r, v| positive(r, "fca_max_iterations", v));
        let fca_parity_rounds = r.optional("fca_parity_rounds", |r, v| positive(r, "fca_parity_rounds", v));
        let sweep = r.optional("sweep", |r, v| {
            let Some(items) = v.as_array() else {
                r.fail("sweep", "expected an array of override objects");
                return None;
            };
            let mut points = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                match item.as_object() {
                    Some(o) => {
                        for key in o.keys() {
                            if key == "sweep" || !FIELDS.contains(&key.as_str()) {
                                r.fail(&format!("sweep[{i}].{key}"), "not an overridable field");
                            }
                        }
                        points.push(o.clone());
                    }
                    None => r.fail(&format!("sweep[{i}]"), "expected an object"),
                }
            }
            Some(points)
        });

        if !r.errors.is_empty() {
            return Err(r.errors);
        }
        let defaults = FcaConfig::default();
        let cfg = ExperimentConfig {
            campaign: campaign.flatten().unwrap_or(Campaign::Immunity),
            m: m.expect("checked"),
            alpha: alpha.expect("checked"),
            spec1: spec1.expect("checked"),
            spec2: spec2.flatten(),
            noise: noise.expect("checked"),
            neighbor_probs: neighbor_probs.flatten(),
            trials: trials.expect("checked"),
            slots_per_trial: slots_per_trial.expect("checked"),
            master_seed: master_seed.expect("checked"),
            attack: attack.flatten().unwrap_or(AttackKind::Fca),
            observed_bits: observed_bits.flatten(),
            fca_max_iterations: fca_max_iterations.flatten().unwrap_or(defaults.max_iterations),
            fca_parity_rounds: fca_parity_rounds.flatten().unwrap_or(defaults.parity_rounds),
            sweep: sweep.flatten().unwrap_or_default(),
        };
        // every sweep point must itself be a valid configuration
        let mut errors = Vec::new();
        for (i, overrides) in cfg.sweep.iter().enumerate() {
            if let Err(point_errors) = cfg.resolve(overrides) {
                errors.extend(point_errors.into_iter().map(|e| FieldError {
                    field: format!("sweep[{i}].{}", e.field),
                    message: e.message,
                }));
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Base fields with `overrides` applied; the result has no sweep.
    pub fn resolve(&self, overrides: &Map<String, Value>) -> Result<Self, Vec<FieldError>> {
        let mut value = self.to_value();
        let map = value.as_object_mut().expect("object");
        map.insert("sweep".into(), Value::Array(Vec::new()));
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_value(&value)
    }

    /// `(label, resolved config)` per sweep point; the base alone when the
    /// sweep is empty.
    pub fn points(&self) -> Result<Vec<(String, Self)>> {
        if self.sweep.is_empty() {
            let mut base = self.clone();
            base.sweep.clear();
            return Ok(vec![("base".into(), base)]);
        }
        self.sweep
            .iter()
            .map(|o| {
                let cfg = self.resolve(o).map_err(|errs| {
                    crate::Error::Config(
                        errs.iter()
                            .map(ToString::to_string)
                            .collect::<Vec<_>>()
                            .join("; "),
                    )
                })?;
                Ok((point_label(o), cfg))
            })
            .collect()
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.m).expect("validated modulus")
    }

    pub fn signal(&self) -> SignalParams {
        SignalParams::new(self.alpha, self.m).expect("validated amplitude")
    }

    pub fn randomized(&self) -> bool {
        self.spec2.is_some()
    }

    pub fn noise_model(&self) -> NoiseModel {
        let sigma = self.signal().sigma();
        match self.noise {
            NoiseKind::Noiseless => NoiseModel::Noiseless,
            NoiseKind::Gaussian => NoiseModel::GaussianPhase { sigma },
            NoiseKind::Wedge => NoiseModel::Wedge { sigma },
            NoiseKind::Discrete => NoiseModel::DiscreteNeighbor {
                probs: self
                    .neighbor_probs
                    .unwrap_or_else(|| NeighborProbs::from_t0(self.signal().t0())),
            },
        }
    }

    pub fn fca(&self, crossover: f64) -> FcaConfig {
        FcaConfig {
            max_iterations: self.fca_max_iterations,
            parity_rounds: self.fca_parity_rounds,
            crossover,
        }
    }

    /// Noise-hiding condition `alpha < M / (2 pi)`: the noise spread exceeds
    /// the span of all `M` pattern offsets around a basis.
    pub fn hiding_condition(&self) -> bool {
        self.alpha < self.m as f64 / TAU
    }

    /// Human-readable notes on immunity points that violate the
    /// noise-hiding condition.
    pub fn warnings(&self) -> Vec<String> {
        let Ok(points) = self.points() else {
            return Vec::new();
        };
        points
            .iter()
            .filter(|(_, p)| p.campaign == Campaign::Immunity && !p.hiding_condition())
            .map(|(label, p)| {
                format!(
                    "point {label}: alpha {} violates the noise-hiding condition alpha < M/(2 pi) = {:.6}",
                    p.alpha,
                    p.m as f64 / TAU
                )
            })
            .collect()
    }
}

/// `key=value` pairs in key order, `;`-separated.
pub fn point_label(overrides: &Map<String, Value>) -> String {
    let mut keys: Vec<&String> = overrides.keys().collect();
    keys.sort();
    keys.iter()
        .map(|k| {
            let v = &overrides[k.as_str()];
            match v {
                Value::String(s) => format!("{k}={s}"),
                other => format!("{k}={other}"),
            }
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Seed of trial `index` under `master`: a SplitMix64 step keyed by both, so
/// adding trials never changes earlier ones.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
