//! Chu pilot comb, pilot superimposition and spectral interference
//! alignment (SIA).
//!
//! A pilot made of `Q` copies of a length-`P` Chu sequence lives only on the
//! DFT bins `k = iQ`. SIA subtracts from the data its cyclic mean
//! `Υ_i = (1/Q) Σ_m s_{i+mP}`, i.e. applies the projector
//! `Ψ = I − J` with `J = (1/Q) 1_Q ⊗ I_P`, which zeros the data spectrum on
//! exactly those bins.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Pilot comb parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PilotConfig<T> {
    /// Pilot period `P` (number of comb bins).
    pub period: usize,
    /// Repetition count `Q`; the block length is `P·Q`.
    pub repetitions: usize,
    /// Pilot power per symbol `σ_p²`.
    pub pilot_power: T,
    pub sia: bool,
    /// Chu root index, co-prime with `P`.
    pub chu_root: usize,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl<T: Real> PilotConfig<T> {
    pub fn new(period: usize, repetitions: usize, pilot_power: T, sia: bool) -> Result<Self> {
        let cfg = Self {
            period,
            repetitions,
            pilot_power,
            sia,
            chu_root: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// SIA configuration with the pilot power rule `σ_p² = (1 − 1/Q) σ_s²`.
    pub fn with_sia(period: usize, repetitions: usize, data_power: T) -> Result<Self> {
        Self::new(
            period,
            repetitions,
            sia_pilot_power(repetitions, data_power),
            true,
        )
    }

    pub fn with_root(mut self, root: usize) -> Result<Self> {
        self.chu_root = root;
        self.validate()?;
        Ok(self)
    }

    pub fn block_len(&self) -> usize {
        self.period * self.repetitions
    }

    pub fn validate(&self) -> Result<()> {
        if self.period == 0 || self.repetitions == 0 {
            return Err(Error::Config(
                "pilot period and repetition count must be positive".into(),
            ));
        }
        if self.sia && self.repetitions < 2 {
            return Err(Error::Config(
                "SIA needs Q >= 2 (Q = 1 annihilates the data)".into(),
            ));
        }
        if !(self.pilot_power >= T::zero()) || !self.pilot_power.is_finite() {
            return Err(Error::Config(format!(
                "pilot power must be non-negative, got {}",
                self.pilot_power
            )));
        }
        if self.chu_root == 0 || gcd(self.chu_root, self.period) != 1 {
            return Err(Error::Config(format!(
                "Chu root {} is not co-prime with P = {}",
                self.chu_root, self.period
            )));
        }
        Ok(())
    }

    /// Checks `P ≥ L`, needed to recover `L` taps from `P` comb bins.
    pub fn check_taps(&self, taps: usize) -> Result<()> {
        if self.period < taps {
            return Err(Error::Config(format!(
                "pilot period P = {} is shorter than the channel length L = {taps}",
                self.period
            )));
        }
        Ok(())
    }
}

/// `(1 − 1/Q) σ_s²`.
pub fn sia_pilot_power<T: Real>(repetitions: usize, data_power: T) -> T {
    (T::one() - T::one() / T::from_usize_lossy(repetitions)) * data_power
}

/// Cyclic-mean projector `Ψ = I − (1/Q) 1_Q ⊗ I_P`, applied in `O(N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiaProjector {
    period: usize,
    repetitions: usize,
}

impl SiaProjector {
    pub fn new(period: usize, repetitions: usize) -> Result<Self> {
        if period == 0 || repetitions == 0 {
            return Err(Error::Config(
                "projector dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            period,
            repetitions,
        })
    }

    pub fn from_config<T: Real>(cfg: &PilotConfig<T>) -> Result<Self> {
        Self::new(cfg.period, cfg.repetitions)
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn block_len(&self) -> usize {
        self.period * self.repetitions
    }

    /// `rank Ψ = N − P`.
    pub fn rank(&self) -> usize {
        self.block_len() - self.period
    }

    /// Data-dependent sequence `Υ = J v` (one period; it repeats `Q` times).
    pub fn cyclic_mean<T: Real>(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.block_len(), v.len())?;
        let q = T::from_usize_lossy(self.repetitions);
        let mut mean = vec![Complex::new(T::zero(), T::zero()); self.period];
        for chunk in v.chunks_exact(self.period) {
            mean.iter_mut().zip(chunk).for_each(|(m, x)| *m += *x);
        }
        mean.iter_mut().for_each(|m| *m /= q);
        Ok(mean)
    }

    /// `Ψ v`.
    pub fn apply<T: Real>(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let mean = self.cyclic_mean(v)?;
        Ok(v.iter()
            .enumerate()
            .map(|(i, x)| *x - mean[i % self.period])
            .collect())
    }

    /// Dense `Ψ`, for verification at small sizes.
    pub fn dense<T: Real>(&self) -> DMatrix<T> {
        let n = self.block_len();
        let inv_q = T::one() / T::from_usize_lossy(self.repetitions);
        DMatrix::from_fn(n, n, |r, c| {
            let j = if r % self.period == c % self.period {
                inv_q
            } else {
                T::zero()
            };
            let i = if r == c { T::one() } else { T::zero() };
            i - j
        })
    }
}

/// Chu sequence of length `P` and root `u` with per-symbol power `power`:
/// `e^{jπ u n² / P}` for even `P`, `e^{jπ u n(n+1) / P}` for odd `P`.
pub fn chu_sequence<T: Real>(period: usize, root: usize, power: T) -> Vec<Complex<T>> {
    let amp = power.sqrt();
    (0..period)
        .map(|n| {
            let quad = if period.is_multiple_of(2) {
                n * n
            } else {
                n * (n + 1)
            };
            // reduce mod 2P before converting to keep the phase argument small
            let k = (root * quad) % (2 * period);
            let phase = T::PI() * T::from_usize_lossy(k) / T::from_usize_lossy(period);
            Complex::from_polar(amp, phase)
        })
        .collect()
}

/// Pilot block `x_p`: `Q` repetitions of one Chu sequence.
pub fn chu_pilot<T: Real>(cfg: &PilotConfig<T>) -> Vec<Complex<T>> {
    let c = chu_sequence(cfg.period, cfg.chu_root, cfg.pilot_power);
    c.iter().copied().cycle().take(cfg.block_len()).collect()
}

/// `(I − J) s`.
pub fn sia_transform<T: Real>(s: &[Complex<T>], proj: &SiaProjector) -> Result<Vec<Complex<T>>> {
    proj.apply(s)
}

/// `Ψ v`; `Ψ` is its own pseudo-inverse.
pub fn apply_projector<T: Real>(v: &[Complex<T>], proj: &SiaProjector) -> Result<Vec<Complex<T>>> {
    proj.apply(v)
}

/// Transmit block: `(I − J) s + x_p` with SIA, `s + x_p` without.
pub fn compose_tx<T: Real>(
    s: &[Complex<T>],
    pilot: &[Complex<T>],
    cfg: &PilotConfig<T>,
) -> Result<Vec<Complex<T>>> {
    check_len(cfg.block_len(), s.len())?;
    check_len(cfg.block_len(), pilot.len())?;
    let data = if cfg.sia {
        SiaProjector::from_config(cfg)?.apply(s)?
    } else {
        s.to_vec()
    };
    Ok(data.iter().zip(pilot).map(|(a, b)| a + b).collect())
}
