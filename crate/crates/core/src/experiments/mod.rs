//! Reproducible Monte Carlo campaigns over the simulator and the attacks,
//! reported as metric tables.

mod campaigns;
mod config;
mod table;

pub use campaigns::{
    attack_trial, observed_length, run_attack_sweep, run_bit_position_profile, run_campaign,
    run_immunity_curve, run_neighbor_error, simulate_trial, Transmission,
};
pub use config::{
    point_label, trial_seed, AttackKind, Campaign, ExperimentConfig, FieldError, NoiseKind, FIELDS,
};
pub use table::{emit_report, parse_report, Format, MetricRow, MetricsTable, VERSION};
