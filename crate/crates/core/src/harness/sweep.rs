use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::FtnConfig;
use super::trial::{spectral_efficiency, trial_stream, Scenario, TrialResult};
use crate::error::{Error, Result};

/// Per-cell counters; merging is a plain sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellAccumulator {
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub block_errors: u64,
    pub sq_err_sum: f64,
    pub sq_err_sq_sum: f64,
    pub tx_power_sum: f64,
    pub flagged_trials: u64,
}

impl CellAccumulator {
    pub fn push(&mut self, r: &TrialResult) {
        self.trials += 1;
        self.bits += r.bits;
        self.bit_errors += r.bit_errors;
        self.block_errors += r.block_error as u64;
        self.sq_err_sum += r.sq_err;
        self.sq_err_sq_sum += r.sq_err * r.sq_err;
        self.tx_power_sum += r.tx_power;
        self.flagged_trials += (r.flagged > 0) as u64;
    }
}

/// One `(τ, Eb/N0)` cell of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario_hash: String,
    pub tau: f64,
    pub ebn0_db: f64,
    pub snr_db: f64,
    pub trials: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ber_ci95: f64,
    pub mse_sim: f64,
    pub mse_ci95: f64,
    pub mse_theory: Option<f64>,
    pub measured_tx_power: f64,
    pub wall_s: f64,
    /// BER denominator.
    pub bits: u64,
    pub block_errors: u64,
    pub flagged_trials: u64,
}

impl SweepRow {
    fn from_cell(
        hash: &str,
        tau: f64,
        ebn0_db: f64,
        snr_db: f64,
        acc: &CellAccumulator,
        theory: Option<f64>,
        wall_s: f64,
    ) -> Self {
        let n = acc.trials as f64;
        let ber = if acc.bits > 0 {
            acc.bit_errors as f64 / acc.bits as f64
        } else {
            0.0
        };
        let ber_ci95 = if acc.bits > 0 {
            1.96 * (ber * (1.0 - ber) / acc.bits as f64).sqrt()
        } else {
            0.0
        };
        let mse = if acc.trials > 0 {
            acc.sq_err_sum / n
        } else {
            0.0
        };
        let mse_ci95 = if acc.trials > 1 {
            let var = ((acc.sq_err_sq_sum - n * mse * mse) / (n - 1.0)).max(0.0);
            1.96 * (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            scenario_hash: hash.to_string(),
            tau,
            ebn0_db,
            snr_db,
            trials: acc.trials,
            bit_errors: acc.bit_errors,
            ber,
            ber_ci95,
            mse_sim: mse,
            mse_ci95,
            mse_theory: theory,
            measured_tx_power: if acc.trials > 0 {
                acc.tx_power_sum / n
            } else {
                0.0
            },
            wall_s,
            bits: acc.bits,
            block_errors: acc.block_errors,
            flagged_trials: acc.flagged_trials,
        }
    }

    pub fn flagged_fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.flagged_trials as f64 / self.trials as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub scenario_hash: String,
    pub config: FtnConfig,
    pub rows: Vec<SweepRow>,
}

/// Runs trials of one cell in batches until the stopping rule fires.
pub fn run_cell(sc: &Scenario, sigma_v2: f64, cell: usize) -> Result<CellAccumulator> {
    let s = &sc.config().sweep;
    let mut acc = CellAccumulator::default();
    while acc.trials < s.max_trials {
        let start = acc.trials;
        let end = (start + s.batch_size).min(s.max_trials);
        let batch: Vec<TrialResult> = (start..end)
            .into_par_iter()
            .map(|t| sc.run_trial(sigma_v2, trial_stream(cell, t)))
            .collect::<Result<_>>()?;
        batch.iter().for_each(|r| acc.push(r));
        if acc.trials >= s.min_trials && acc.bit_errors >= s.target_bit_errors {
            break;
        }
    }
    Ok(acc)
}

fn sweep_cells(cfg: &FtnConfig) -> Result<SweepTable> {
    let cfg = cfg.clone().resolved();
    cfg.validate()?;
    let hash = cfg.scenario_hash();
    let mut cells = Vec::new();
    for tau in cfg.taus() {
        let sc = Scenario::new(&cfg, tau)?;
        for &ebn0 in &cfg.sweep.ebn0_grid_db {
            cells.push((sc.clone(), ebn0));
        }
    }
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(idx, (sc, ebn0))| {
            let clock = Instant::now();
            let se = spectral_efficiency(&cfg, sc.tau());
            let snr_db = ebn0 + 10.0 * se.log10();
            let sigma_v2 = sc.noise_variance(*ebn0);
            let acc = run_cell(sc, sigma_v2, idx)?;
            let wall = if cfg.sweep.record_wall_time {
                clock.elapsed().as_secs_f64()
            } else {
                0.0
            };
            Ok(SweepRow::from_cell(
                &hash,
                sc.tau(),
                *ebn0,
                snr_db,
                &acc,
                sc.theoretical_mse(sigma_v2),
                wall,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        scenario_hash: hash,
        config: cfg,
        rows,
    })
}

/// Runs every `(τ, Eb/N0)` cell on a pool of `workers` threads
/// (`0` = rayon default). The table does not depend on `workers`.
pub fn run_sweep(cfg: &FtnConfig, workers: usize) -> Result<SweepTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| sweep_cells(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FtnConfig {
        let mut c = FtnConfig::default();
        c.sweep.ebn0_grid_db = vec![2.0, 8.0];
        c.sweep.min_trials = 50;
        c.sweep.max_trials = 400;
        c.sweep.batch_size = 50;
        c.sweep.target_bit_errors = 100;
        c
    }

    #[test]
    fn empty_grid_gives_empty_table() {
        let mut c = small();
        c.sweep.ebn0_grid_db.clear();
        assert!(run_sweep(&c, 1).unwrap().rows.is_empty());
    }

    #[test]
    fn stopping_rule_and_bookkeeping() {
        let c = small();
        let t = run_sweep(&c, 2).unwrap();
        assert_eq!(t.rows.len(), 2);
        for r in &t.rows {
            assert!(r.bit_errors >= c.sweep.target_bit_errors || r.trials == c.sweep.max_trials);
            assert!(r.trials >= c.sweep.min_trials);
            assert_eq!(r.bits, r.trials * 256);
            assert_eq!(r.ber, r.bit_errors as f64 / r.bits as f64);
            assert!(r.mse_theory.is_some());
        }
        assert!(t.rows[0].ber > t.rows[1].ber);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let c = small();
        let a = run_sweep(&c, 1).unwrap();
        let b = run_sweep(&c, 3).unwrap();
        assert_eq!(a, b);
    }
}
