use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{FtnConfig, SeConvention};
use super::sweep::{SweepRow, SweepTable};
use super::trial::spectral_efficiency_with;
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 13] = [
    "scenario_hash",
    "tau",
    "ebn0_db",
    "snr_db",
    "trials",
    "bit_errors",
    "ber",
    "ber_ci95",
    "mse_sim",
    "mse_ci95",
    "mse_theory",
    "measured_tx_power",
    "wall_s",
];

pub const CSV_FILE: &str = "results.csv";
pub const JSON_FILE: &str = "results.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// CSV text in the fixed column order, 17 significant digits.
pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in rows {
        w.write_record([
            r.scenario_hash.clone(),
            num(r.tau),
            num(r.ebn0_db),
            num(r.snr_db),
            r.trials.to_string(),
            r.bit_errors.to_string(),
            num(r.ber),
            num(r.ber_ci95),
            num(r.mse_sim),
            num(r.mse_ci95),
            r.mse_theory.map(num).unwrap_or_default(),
            num(r.measured_tx_power),
            num(r.wall_s),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// JSON document with the resolved config, both SE conventions and all rows.
pub fn json_value(table: &SweepTable) -> serde_json::Value {
    let se: Vec<_> = table
        .config
        .taus()
        .into_iter()
        .map(|tau| {
            json!({
                "tau": tau,
                "info_dims": spectral_efficiency_with(&table.config, tau, SeConvention::InfoDims),
                "paper_all_n": spectral_efficiency_with(&table.config, tau, SeConvention::PaperAllN),
            })
        })
        .collect();
    json!({
        "scenario_hash": table.scenario_hash,
        "config": table.config,
        "spectral_efficiency": se,
        "rows": table.rows,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Writes `results.csv` and/or `results.json` into `dir`, which must exist.
pub fn emit_results(table: &SweepTable, format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "output directory does not exist",
            ),
        });
    }
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let path = dir.join(CSV_FILE);
        write_file(&path, csv_string(&table.rows).as_bytes())?;
        written.push(path);
    }
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let path = dir.join(JSON_FILE);
        let mut text = serde_json::to_string_pretty(&json_value(table)).expect("table serializes");
        text.push('\n');
        write_file(&path, text.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Reads rows back from a results CSV. Columns outside the CSV schema
/// (`bits`, `block_errors`, `flagged_trials`) are left at zero.
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let header = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(parse_err(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("column {}: {e}", CSV_COLUMNS[i])))
        };
        let u = |i: usize| -> Result<u64> {
            rec[i]
                .parse::<u64>()
                .map_err(|e| parse_err(format!("column {}: {e}", CSV_COLUMNS[i])))
        };
        rows.push(SweepRow {
            scenario_hash: rec[0].to_string(),
            tau: f(1)?,
            ebn0_db: f(2)?,
            snr_db: f(3)?,
            trials: u(4)?,
            bit_errors: u(5)?,
            ber: f(6)?,
            ber_ci95: f(7)?,
            mse_sim: f(8)?,
            mse_ci95: f(9)?,
            mse_theory: if rec[10].is_empty() {
                None
            } else {
                Some(f(10)?)
            },
            measured_tx_power: f(11)?,
            wall_s: f(12)?,
            bits: 0,
            block_errors: 0,
            flagged_trials: 0,
        });
    }
    Ok(rows)
}

/// Theoretical LS/MMSE CE curves over the configured grid, as CSV.
pub fn mse_theory_csv(cfg: &FtnConfig) -> Result<String> {
    use super::trial::Scenario;
    use crate::detector::Criterion;
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let io = |e: csv::Error| Error::Contract(e.to_string());
    w.write_record(["tau", "ebn0_db", "snr_db", "sigma_v2", "mse_ls", "mse_mmse"])
        .map_err(io)?;
    for tau in cfg.taus() {
        let sc = Scenario::new(cfg, tau)?;
        let se = super::trial::spectral_efficiency(cfg, tau);
        for &e in &cfg.sweep.ebn0_grid_db {
            let v2 = sc.noise_variance(e);
            w.write_record([
                num(tau),
                num(e),
                num(e + 10.0 * se.log10()),
                num(v2),
                num(sc.theoretical_mse_for(Criterion::Ls, v2)),
                num(sc.theoretical_mse_for(Criterion::Mmse, v2)),
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Contract(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}
