//! Frequency-domain equalization and SIA-aware symbol detection.

mod constellation;

pub use constellation::{demap_bits, Constellation};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dsp::Dft;
use crate::error::{check_len, Error, Result};
use crate::pilot::SiaProjector;
use crate::scalar::Real;

/// Estimation / equalization criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Ls,
    Mmse,
}

/// Diagonal FD equalizer.
#[derive(Clone, Debug)]
pub struct EqualizerWeights<T> {
    pub weights: Vec<Complex<T>>,
    pub criterion: Criterion,
    /// LS bins whose gain fell below the floor and were clamped.
    pub flagged: Vec<usize>,
}

/// FDE weights for `Γ_eq = Λ̂_h Λ_g`.
///
/// - LS: `w_k = 1/γ_eq,k`; bins with `|γ_eq,k| < rel_floor · max|γ_eq|` are
///   clamped to magnitude `1/(rel_floor · max|γ_eq|)` and flagged.
/// - MMSE: `w_k = γ_eq,k* / (|γ_eq,k|² + (σ_v²/σ_s²) Φ_k)`, which whitens the
///   colored FD noise. With the true `λ_h` and unscaled powers this is the
///   perfect-CSI receiver.
pub fn fde_weights<T: Real>(
    lambda_eq: &[Complex<T>],
    lambda_g: &[Complex<T>],
    phi: &[T],
    sigma_s2: T,
    sigma_v2: T,
    criterion: Criterion,
    rel_floor: T,
) -> Result<EqualizerWeights<T>> {
    check_len(lambda_eq.len(), lambda_g.len())?;
    check_len(lambda_eq.len(), phi.len())?;
    if !(sigma_s2 >= T::zero()) || !(sigma_v2 >= T::zero()) {
        return Err(Error::Domain(
            "signal and noise powers must be non-negative".into(),
        ));
    }
    let gamma: Vec<Complex<T>> = lambda_eq.iter().zip(lambda_g).map(|(a, b)| a * b).collect();
    let zero = Complex::new(T::zero(), T::zero());
    let mut flagged = Vec::new();
    let weights = match criterion {
        Criterion::Ls => {
            let max = gamma.iter().map(|g| g.norm()).fold(T::zero(), T::max);
            let floor = rel_floor * max;
            gamma
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let mag = g.norm();
                    if mag >= floor && mag > T::zero() {
                        g.inv()
                    } else {
                        flagged.push(k);
                        if mag > T::zero() {
                            g.conj() * (T::one() / (mag * floor))
                        } else {
                            zero
                        }
                    }
                })
                .collect()
        }
        Criterion::Mmse => {
            let rho = if sigma_v2 == T::zero() {
                T::zero()
            } else {
                sigma_v2 / sigma_s2
            };
            gamma
                .iter()
                .zip(phi)
                .map(|(g, &p)| {
                    let den = g.norm_sqr() + rho * p;
                    if den > T::zero() {
                        g.conj() * (T::one() / den)
                    } else {
                        zero
                    }
                })
                .collect()
        }
    };
    Ok(EqualizerWeights {
        weights,
        criterion,
        flagged,
    })
}

/// Copy of `ỹ` with the comb bins `k = iQ` set to zero.
pub fn zero_pilot_bins<T: Real>(
    y: &[Complex<T>],
    period: usize,
    repetitions: usize,
) -> Result<Vec<Complex<T>>> {
    check_len(period * repetitions, y.len())?;
    let mut z = y.to_vec();
    z.iter_mut()
        .step_by(repetitions)
        .for_each(|v| *v = Complex::new(T::zero(), T::zero()));
    Ok(z)
}

/// `u = F^H W z̃`.
pub fn equalize<T: Real>(
    z: &[Complex<T>],
    weights: &EqualizerWeights<T>,
    dft: &Dft<T>,
) -> Result<Vec<Complex<T>>> {
    check_len(weights.weights.len(), z.len())?;
    let mut buf: Vec<Complex<T>> = z.iter().zip(&weights.weights).map(|(a, w)| a * w).collect();
    dft.inverse_in_place(&mut buf)?;
    Ok(buf)
}

/// Output of [`ista_detect`].
#[derive(Clone, Debug)]
pub struct Detection<T> {
    pub symbols: Vec<Complex<T>>,
    pub indices: Vec<usize>,
    pub bits: Vec<u8>,
    /// `‖u − Ψ ŝ⁽ⁱ⁾‖` for the hard iterates `i = 1..=n_iter`.
    pub residuals: Vec<T>,
}

fn detection_from_indices<T: Real>(
    indices: Vec<usize>,
    cons: &Constellation<T>,
    residuals: Vec<T>,
) -> Detection<T> {
    let symbols = indices.iter().map(|&i| cons.points()[i]).collect();
    let mut bits = Vec::with_capacity(indices.len() * cons.bits_per_symbol());
    for &i in &indices {
        cons.push_label(i, &mut bits);
    }
    Detection {
        symbols,
        indices,
        bits,
        residuals,
    }
}

/// Hard slicing without the projector (non-SIA receiver).
pub fn slice_detect<T: Real>(u: &[Complex<T>], cons: &Constellation<T>) -> Detection<T> {
    let indices = u.iter().map(|&z| cons.nearest(z)).collect();
    detection_from_indices(indices, cons, Vec::new())
}

/// Iterative projection detector for SIA blocks, `u ≈ Ψ s`.
///
/// Starts from `ŝ⁽⁰⁾ = Ψ⁺u = Ψu` and iterates
/// `r = u − Ψŝ`, `ŝ ← slice(ŝ + Ψr)`. The constellation constraint fills the
/// `P` cyclic-mean dimensions removed by `Ψ`. With `n_iter = 0` the result is
/// `slice(Ψu)`.
pub fn ista_detect<T: Real>(
    u: &[Complex<T>],
    proj: &SiaProjector,
    cons: &Constellation<T>,
    n_iter: usize,
) -> Result<Detection<T>> {
    check_len(proj.block_len(), u.len())?;
    let mut s_hat = proj.apply(u)?;
    let mut indices: Vec<usize> = s_hat.iter().map(|&z| cons.nearest(z)).collect();
    let mut residuals = Vec::with_capacity(n_iter);
    for _ in 0..n_iter {
        let psi_s = proj.apply(&s_hat)?;
        let r: Vec<Complex<T>> = u.iter().zip(&psi_s).map(|(a, b)| a - b).collect();
        let step = proj.apply(&r)?;
        indices = s_hat
            .iter()
            .zip(&step)
            .map(|(s, d)| cons.nearest(*s + *d))
            .collect();
        s_hat = indices.iter().map(|&i| cons.points()[i]).collect();
        let psi_s = proj.apply(&s_hat)?;
        let res: T = u
            .iter()
            .zip(&psi_s)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<T>()
            .sqrt();
        residuals.push(res);
    }
    Ok(detection_from_indices(indices, cons, residuals))
}
