//! Scenario configuration, seeded Monte Carlo sweeps and result files.
//!
//! Trial `t` of sweep cell `c` draws its channel, data and noise from
//! ChaCha streams derived from `(seed, c, t)` only, so results do not
//! depend on scheduling.

pub mod config;
pub mod output;
pub mod sweep;
pub mod trial;

pub use config::{apply_override, Csi, FtnConfig, Modulation, SeConvention};
pub use output::{emit_results, mse_theory_csv, read_csv, OutputFormat, CSV_COLUMNS};
pub use sweep::{run_cell, run_sweep, CellAccumulator, SweepRow, SweepTable};
pub use trial::{
    noise_variance, run_trial, spectral_efficiency, spectral_efficiency_with, trial_stream,
    CeTrial, Scenario, TrialResult,
};
