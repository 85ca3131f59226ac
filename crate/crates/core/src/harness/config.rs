use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::{Constellation, Criterion};
use crate::error::{Error, Result};
use crate::pilot::{sia_pilot_power, PilotConfig};
use crate::waveform::FtnParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn order(self) -> usize {
        match self {
            Modulation::Qpsk => 4,
            Modulation::Qam16 => 16,
            Modulation::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.order().trailing_zeros() as usize
    }

    pub fn constellation(self, power: f64) -> Result<Constellation<f64>> {
        Constellation::square_qam(self.order(), power)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Csi {
    Estimated,
    Perfect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeConvention {
    /// `bps · (N − P) / ((N + 2ν) τ)` with SIA, `bps · N / ((N + 2ν) τ)` without.
    InfoDims,
    /// `bps · N / ((N + 2ν) τ)` for every scheme.
    PaperAllN,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveformSection {
    pub tau: f64,
    /// Packing ratios to sweep; empty means `[tau]`.
    pub tau_sweep: Vec<f64>,
    pub beta: f64,
    pub nu: usize,
    pub block_len: usize,
    pub modulation: Modulation,
}

impl Default for WaveformSection {
    fn default() -> Self {
        Self {
            tau: 0.8,
            tau_sweep: Vec::new(),
            beta: 0.5,
            nu: 10,
            block_len: 128,
            modulation: Modulation::Qpsk,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotSection {
    pub period: usize,
    pub repetitions: usize,
    pub sia: bool,
    pub chu_root: usize,
    /// `σ_p²`; unset means `(1 − 1/Q) σ_s²`.
    pub pilot_power: Option<f64>,
}

impl Default for PilotSection {
    fn default() -> Self {
        Self {
            period: 8,
            repetitions: 16,
            sia: true,
            chu_root: 1,
            pilot_power: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Channel length `L`.
    pub taps: usize,
    /// Data symbol power `σ_s²`.
    pub data_power: f64,
    /// Power that Eb/N0 is referred to: `σ_v² = reference_power / SNR`.
    pub reference_power: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            taps: 8,
            data_power: 1.0,
            reference_power: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverSection {
    pub ce_criterion: Criterion,
    pub eq_criterion: Criterion,
    pub csi: Csi,
    pub n_ista: usize,
    /// Relative floor on `|γ|` for LS estimation and LS equalization.
    pub ls_floor: f64,
    /// Relative clip level for slightly negative ISI eigenvalues.
    pub clip_eps: f64,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        Self {
            ce_criterion: Criterion::Mmse,
            eq_criterion: Criterion::Mmse,
            csi: Csi::Estimated,
            n_ista: 3,
            ls_floor: 1e-6,
            clip_eps: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub ebn0_grid_db: Vec<f64>,
    pub min_trials: u64,
    pub max_trials: u64,
    pub target_bit_errors: u64,
    /// Trials per scheduling batch; stopping is checked between batches.
    pub batch_size: u64,
    pub seed: u64,
    pub se_convention: SeConvention,
    /// Writes measured wall time into `wall_s` (otherwise 0, keeping
    /// output byte-reproducible).
    pub record_wall_time: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            ebn0_grid_db: (0..=10).map(|i| 2.0 * i as f64).collect(),
            min_trials: 1000,
            max_trials: 200_000,
            target_bit_errors: 200,
            batch_size: 1000,
            seed: 1,
            se_convention: SeConvention::InfoDims,
            record_wall_time: false,
        }
    }
}

/// Full scenario description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FtnConfig {
    pub waveform: WaveformSection,
    pub pilot: PilotSection,
    pub channel: ChannelSection,
    pub receiver: ReceiverSection,
    pub sweep: SweepSection,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl FtnConfig {
    /// Parses TOML text. Unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// Reads a TOML file, applies `key.path=value` overrides, resolves and
    /// validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: FtnConfig =
            toml::Value::Table(value)
                .try_into()
                .map_err(|e: toml::de::Error| Error::Parse {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
        let cfg = cfg.resolved();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills derived defaults (`tau_sweep`, `pilot_power`).
    pub fn resolved(mut self) -> Self {
        if self.waveform.tau_sweep.is_empty() {
            self.waveform.tau_sweep = vec![self.waveform.tau];
        }
        if self.pilot.pilot_power.is_none() {
            self.pilot.pilot_power = Some(sia_pilot_power(
                self.pilot.repetitions.max(1),
                self.channel.data_power,
            ));
        }
        self
    }

    pub fn pilot_power(&self) -> f64 {
        self.pilot.pilot_power.unwrap_or_else(|| {
            sia_pilot_power(self.pilot.repetitions.max(1), self.channel.data_power)
        })
    }

    pub fn taus(&self) -> Vec<f64> {
        if self.waveform.tau_sweep.is_empty() {
            vec![self.waveform.tau]
        } else {
            self.waveform.tau_sweep.clone()
        }
    }

    pub fn pilot_config(&self) -> Result<PilotConfig<f64>> {
        PilotConfig::new(
            self.pilot.period,
            self.pilot.repetitions,
            self.pilot_power(),
            self.pilot.sia,
        )?
        .with_root(self.pilot.chu_root)
    }

    pub fn ftn_params(&self, tau: f64) -> Result<FtnParams<f64>> {
        FtnParams::new(
            tau,
            self.waveform.beta,
            self.waveform.nu,
            self.waveform.block_len,
        )
    }

    /// Checks every cross-module invariant.
    pub fn validate(&self) -> Result<()> {
        let w = &self.waveform;
        let p = &self.pilot;
        let l = self.channel.taps;
        for tau in self.taus() {
            self.ftn_params(tau)?;
        }
        if p.period * p.repetitions != w.block_len {
            return Err(config_err(format!(
                "N = {} must equal P·Q = {}·{}",
                w.block_len, p.period, p.repetitions
            )));
        }
        if l == 0 || l > w.nu {
            return Err(config_err(format!(
                "channel length L = {l} must satisfy 1 <= L <= nu = {}",
                w.nu
            )));
        }
        let pilot = self.pilot_config()?;
        pilot.check_taps(l)?;
        let c = &self.channel;
        if !(c.data_power >= 0.0 && c.data_power.is_finite()) {
            return Err(config_err(format!(
                "data_power must be non-negative, got {}",
                c.data_power
            )));
        }
        if !(c.reference_power > 0.0 && c.reference_power.is_finite()) {
            return Err(config_err(format!(
                "reference_power must be positive, got {}",
                c.reference_power
            )));
        }
        let r = &self.receiver;
        if r.csi == Csi::Estimated {
            if !p.sia && r.ce_criterion == Criterion::Mmse {
                return Err(config_err(
                    "MMSE channel estimation needs SIA; use ce_criterion = \"ls\" without SIA",
                ));
            }
            if self.pilot_power() <= 0.0 {
                return Err(config_err("estimated CSI needs a positive pilot power"));
            }
        }
        if !(r.ls_floor >= 0.0 && r.ls_floor < 1.0) {
            return Err(config_err(format!(
                "ls_floor must lie in [0, 1), got {}",
                r.ls_floor
            )));
        }
        if !(r.clip_eps >= 0.0 && r.clip_eps < 1.0) {
            return Err(config_err(format!(
                "clip_eps must lie in [0, 1), got {}",
                r.clip_eps
            )));
        }
        let s = &self.sweep;
        if s.ebn0_grid_db.iter().any(|x| !x.is_finite()) {
            return Err(config_err("ebn0_grid_db entries must be finite"));
        }
        if s.max_trials == 0 || s.batch_size == 0 {
            return Err(config_err("max_trials and batch_size must be positive"));
        }
        if s.min_trials > s.max_trials {
            return Err(config_err(format!(
                "min_trials = {} exceeds max_trials = {}",
                s.min_trials, s.max_trials
            )));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON of the
    /// resolved config.
    pub fn scenario_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.clone().resolved()).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest
            .iter()
            .take(8)
            .fold(String::with_capacity(16), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Applies `a.b.c=value`. The value is read as a TOML literal and falls back
/// to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{spec}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("override key `{key}` is malformed")));
    }
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            config_err(format!("override path `{key}` crosses a non-table value"))
        })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
