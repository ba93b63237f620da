//! Simulation and cryptanalysis of the Y-00 quantum-noise randomized stream
//! cipher.
//!
//! The pipeline runs from keystream generation ([`keystream`]) through the
//! phase constellation and its keyed randomization ([`mapping`]), the noisy
//! physical channel and the legitimate and eavesdropping receivers
//! ([`physical`]), to key-recovery attacks on the eavesdropper's noisy
//! keystream ([`attack`]) and reproducible Monte Carlo campaigns
//! ([`experiments`]).

pub mod attack;
mod error;
pub mod experiments;
pub mod keystream;
pub mod mapping;
pub mod physical;
pub mod report;

pub use attack::{AttackMethod, AttackReport, BscEstimate, FcaConfig, FeasibilityEstimate, KeySpace};
pub use error::{Error, Result};
pub use keystream::{CombiningFunction, KeystreamState, LfsrSpec, RunningKeySequence};
pub use mapping::{Constellation, FinePoint, MappingPattern};
pub use physical::{EveEstimate, NeighborProbs, NoiseModel, SignalParams, SlotRecord};
