//! Experiment orchestration: configuration, the three sampling studies and
//! network validation, with CSV output per topology.

mod config;
mod experiments;
mod output;

pub use config::{parse_kv, ComparatorKind, Experiment, ExperimentConfig, SetKind};
pub use experiments::{
    run_blr2d, run_logreg, run_logreg_on, run_sample1d, tracked_agents, validate_network,
    BlrOutcome, BlrRun, ComparatorSummary, LogregOutcome, LogregRun, NetworkEntry, NetworkSummary,
    Sample1dOutcome, TopologyRun, BLR_NOISE_VAR, BLR_TRUE_BETA, QUANTILE_GRID, RADIUS_FRACTION,
};
pub use output::{write_run, RunFiles, SampleDump};
