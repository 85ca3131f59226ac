//! Channel estimation on the pilot comb and its closed-form MSE.
//!
//! On comb bin `i` (DFT bin `iQ`) the SIA receive model is
//! `ỹ'_i = γ_i d_i + η̃'_i` with `γ_i = λ_{g,iQ} x̃_{p,iQ}`,
//! `d_i = λ_{h,iQ}` and `E|η̃'_i|² = σ_v² Φ'_i`. The taps follow from
//! `ĥ = (1/√P) F_{P,L}^H d̂`.

use num_complex::Complex;

use crate::dsp::Dft;
use crate::error::{check_len, Error, Result};
use crate::pilot::{chu_pilot, PilotConfig};
use crate::scalar::Real;
use crate::waveform::IsiKernel;

/// Default relative floor on `|γ_i|` for the LS estimator.
pub const DEFAULT_COMB_FLOOR: f64 = 1e-6;

/// Picks `[y[0], y[Q], …, y[(P−1)Q]]`.
pub fn extract_comb<T: Real>(
    y: &[Complex<T>],
    period: usize,
    repetitions: usize,
) -> Result<Vec<Complex<T>>> {
    check_len(period * repetitions, y.len())?;
    Ok(y.iter().step_by(repetitions.max(1)).copied().collect())
}

/// Scenario-constant comb quantities: `γ` and the noise profile `Φ'`.
#[derive(Clone, Debug)]
pub struct PilotComb<T: Real> {
    period: usize,
    repetitions: usize,
    gamma: Vec<Complex<T>>,
    noise_profile: Vec<T>,
    pilot_spectrum: Vec<Complex<T>>,
}

impl<T: Real> PilotComb<T> {
    pub fn new(kernel: &IsiKernel<T>, cfg: &PilotConfig<T>) -> Result<Self> {
        cfg.validate()?;
        check_len(kernel.block_len(), cfg.block_len())?;
        let pilot_spectrum = kernel.dft().forward(&chu_pilot(cfg))?;
        let q = cfg.repetitions;
        let lambda = kernel.eigenvalues();
        let phi = kernel.noise_profile();
        let gamma = (0..cfg.period)
            .map(|i| lambda[i * q] * pilot_spectrum[i * q])
            .collect();
        let noise_profile = (0..cfg.period).map(|i| phi[i * q]).collect();
        Ok(Self {
            period: cfg.period,
            repetitions: q,
            gamma,
            noise_profile,
            pilot_spectrum,
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    /// `γ_i = λ'_{g,i} x̃'_{p,i}`.
    pub fn gamma(&self) -> &[Complex<T>] {
        &self.gamma
    }

    /// `Φ'_i`, the FD noise variance at comb bin `i` per unit `σ_v²`.
    pub fn noise_profile(&self) -> &[T] {
        &self.noise_profile
    }

    /// Full unitary DFT of the pilot block `x̃_p`.
    pub fn pilot_spectrum(&self) -> &[Complex<T>] {
        &self.pilot_spectrum
    }

    /// Comb indices with `|γ_i| < floor · max |γ|`.
    pub fn ill_conditioned(&self, rel_floor: T) -> Vec<usize> {
        let floor = rel_floor * self.max_gamma();
        (0..self.period)
            .filter(|&i| self.gamma[i].norm() < floor)
            .collect()
    }

    fn max_gamma(&self) -> T {
        self.gamma.iter().map(|g| g.norm()).fold(T::zero(), T::max)
    }

    /// Comb observation from a received spectrum `ỹ`.
    pub fn observe(&self, y_tilde: &[Complex<T>]) -> Result<CombObservation<T>> {
        Ok(CombObservation {
            received: extract_comb(y_tilde, self.period, self.repetitions)?,
            gamma: self.gamma.clone(),
            noise_profile: self.noise_profile.clone(),
        })
    }
}

/// Received comb samples together with the known comb gains.
#[derive(Clone, Debug)]
pub struct CombObservation<T: Real> {
    pub received: Vec<Complex<T>>,
    pub gamma: Vec<Complex<T>>,
    pub noise_profile: Vec<T>,
}

impl<T: Real> CombObservation<T> {
    fn check(&self) -> Result<()> {
        check_len(self.gamma.len(), self.received.len())?;
        check_len(self.gamma.len(), self.noise_profile.len())
    }
}

/// LS estimate `d̂ = Γ⁻¹ ỹ'` with the default conditioning floor.
pub fn ce_ls<T: Real>(obs: &CombObservation<T>) -> Result<Vec<Complex<T>>> {
    ce_ls_with_floor(obs, T::lit(DEFAULT_COMB_FLOOR))
}

/// LS estimate; fails when some `|γ_i|` falls below `rel_floor · max |γ|`.
pub fn ce_ls_with_floor<T: Real>(
    obs: &CombObservation<T>,
    rel_floor: T,
) -> Result<Vec<Complex<T>>> {
    obs.check()?;
    let max = obs.gamma.iter().map(|g| g.norm()).fold(T::zero(), T::max);
    let floor = rel_floor * max;
    obs.gamma
        .iter()
        .zip(&obs.received)
        .enumerate()
        .map(|(i, (g, y))| {
            if g.norm() < floor || max == T::zero() {
                Err(Error::IllConditionedComb {
                    index: i,
                    magnitude: g.norm().to_f64_lossy(),
                    floor: floor.to_f64_lossy(),
                })
            } else {
                Ok(*y / *g)
            }
        })
        .collect()
}

/// LS estimate with sub-floor gains raised to the floor (phase kept).
pub fn ce_ls_clamped<T: Real>(obs: &CombObservation<T>, rel_floor: T) -> Result<Vec<Complex<T>>> {
    obs.check()?;
    let max = obs.gamma.iter().map(|g| g.norm()).fold(T::zero(), T::max);
    let floor = rel_floor * max;
    Ok(obs
        .gamma
        .iter()
        .zip(&obs.received)
        .map(|(g, y)| {
            let mag = g.norm();
            if mag >= floor && mag > T::zero() {
                *y / *g
            } else if mag > T::zero() {
                *y / (*g * (floor / mag))
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
        .collect())
}

/// Per-bin MMSE regularizer `ρ = σ_v² / (P σ_h²)`, i.e. the noise-to-prior
/// ratio for comb responses with `R_d = P σ_h² I`.
pub fn mmse_regularizer<T: Real>(period: usize, sigma_v2: T, sigma_h2: T) -> T {
    sigma_v2 / (T::from_usize_lossy(period) * sigma_h2)
}

/// Diagonal MMSE weights `w_i = γ_i* / (|γ_i|² + ρ Φ'_i)`.
pub fn mmse_weights<T: Real>(
    obs: &CombObservation<T>,
    sigma_v2: T,
    sigma_h2: T,
) -> Vec<Complex<T>> {
    let rho = mmse_regularizer(obs.gamma.len(), sigma_v2, sigma_h2);
    obs.gamma
        .iter()
        .zip(&obs.noise_profile)
        .map(|(g, &phi)| g.conj() * (T::one() / (g.norm_sqr() + rho * phi)))
        .collect()
}

/// MMSE estimate `d̂ = Γ^H (Γ Γ^H + ρ Φ')⁻¹ ỹ'`, `O(P)`.
pub fn ce_mmse<T: Real>(
    obs: &CombObservation<T>,
    sigma_v2: T,
    sigma_h2: T,
) -> Result<Vec<Complex<T>>> {
    obs.check()?;
    if !(sigma_v2 >= T::zero()) || !(sigma_h2 > T::zero()) {
        return Err(Error::Domain(
            "MMSE needs sigma_v2 >= 0 and sigma_h2 > 0".into(),
        ));
    }
    Ok(mmse_weights(obs, sigma_v2, sigma_h2)
        .iter()
        .zip(&obs.received)
        .map(|(w, y)| *w * *y)
        .collect())
}

/// `ĥ = (1/√P) F_{P,L}^H d̂`, with `F_{P,L}` the first `L` columns of the
/// unitary `P`-point DFT matrix.
pub fn fd_to_td<T: Real>(
    d_hat: &[Complex<T>],
    period: usize,
    taps: usize,
) -> Result<Vec<Complex<T>>> {
    check_len(period, d_hat.len())?;
    if taps > period {
        return Err(Error::Config(format!(
            "cannot recover L = {taps} taps from P = {period} comb bins"
        )));
    }
    let inv_p = T::one() / T::from_usize_lossy(period);
    let two_pi = T::PI() + T::PI();
    Ok((0..taps)
        .map(|l| {
            d_hat
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    let phase = two_pi * T::from_usize_lossy((i * l) % period) * inv_p;
                    *d * Complex::from_polar(T::one(), phase)
                })
                .sum::<Complex<T>>()
                * inv_p
        })
        .collect())
}

/// Interpolated full-band response `λ̂^eq_k = Σ_l ĥ_l e^{-j2πkl/N}`.
pub fn full_band_response<T: Real>(taps: &[Complex<T>], dft: &Dft<T>) -> Result<Vec<Complex<T>>> {
    dft.unnormalized(taps)
}

/// Channel estimate at the three stages of the recovery chain.
#[derive(Clone, Debug)]
pub struct ChannelEstimate<T: Real> {
    pub comb_response: Vec<Complex<T>>,
    pub taps: Vec<Complex<T>>,
    pub full_response: Vec<Complex<T>>,
}

impl<T: Real> ChannelEstimate<T> {
    pub fn from_comb(comb_response: Vec<Complex<T>>, taps: usize, dft: &Dft<T>) -> Result<Self> {
        let h = fd_to_td(&comb_response, comb_response.len(), taps)?;
        let full_response = full_band_response(&h, dft)?;
        Ok(Self {
            comb_response,
            taps: h,
            full_response,
        })
    }
}

/// Closed-form LS MSE `(L σ_v² / P²) Tr{Γ⁻¹ Φ' Γ^{-H}}`.
pub fn theoretical_mse_ls<T: Real>(comb: &PilotComb<T>, taps: usize, sigma_v2: T) -> T {
    let p = T::from_usize_lossy(comb.period);
    let trace: T = comb
        .gamma
        .iter()
        .zip(&comb.noise_profile)
        .map(|(g, &phi)| phi / g.norm_sqr())
        .sum();
    T::from_usize_lossy(taps) * sigma_v2 / (p * p) * trace
}

/// Closed-form MSE of the tap estimate produced by arbitrary diagonal comb
/// weights `w`:
/// `(L/P²) Tr{R_d − R_d Γ^H W^H − W Γ R_d + W (Γ R_d Γ^H + σ_v² Φ') W^H}`
/// with `R_d = P σ_h² I`. Exact when `P = L`.
pub fn theoretical_mse_weights<T: Real>(
    comb: &PilotComb<T>,
    weights: &[Complex<T>],
    taps: usize,
    sigma_v2: T,
    sigma_h2: T,
) -> Result<T> {
    check_len(comb.period, weights.len())?;
    let p = T::from_usize_lossy(comb.period);
    let r = p * sigma_h2;
    let mut trace = T::zero();
    for ((w, g), &phi) in weights.iter().zip(&comb.gamma).zip(&comb.noise_profile) {
        let wg = *w * *g;
        let cross = (wg * r).re + (wg * r).re;
        trace += r - cross + w.norm_sqr() * (g.norm_sqr() * r + sigma_v2 * phi);
    }
    Ok(T::from_usize_lossy(taps) / (p * p) * trace)
}

/// Closed-form MSE of [`ce_mmse`].
pub fn theoretical_mse_mmse<T: Real>(
    comb: &PilotComb<T>,
    taps: usize,
    sigma_v2: T,
    sigma_h2: T,
) -> T {
    let obs = CombObservation {
        received: vec![Complex::new(T::zero(), T::zero()); comb.period],
        gamma: comb.gamma.clone(),
        noise_profile: comb.noise_profile.clone(),
    };
    let w = mmse_weights(&obs, sigma_v2, sigma_h2);
    theoretical_mse_weights(comb, &w, taps, sigma_v2, sigma_h2).expect("weights match comb")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        colored_noise, sample_channel, transmit_fast, ChannelRealization, ColoredNoiseGen,
    };
    use crate::dsp::{complex_gaussian, dft_matrix, RngStream};
    use crate::pilot::{compose_tx, SiaProjector};
    use crate::scalar::max_abs_diff;
    use crate::waveform::FtnParams;

    type C = Complex<f64>;

    fn setup(tau: f64) -> (IsiKernel<f64>, PilotConfig<f64>, PilotComb<f64>) {
        let k = IsiKernel::new(FtnParams::new(tau, 0.5, 10, 128).unwrap()).unwrap();
        let cfg = PilotConfig::with_sia(8, 16, 1.0).unwrap();
        let comb = PilotComb::new(&k, &cfg).unwrap();
        (k, cfg, comb)
    }

    fn data(n: usize, seed: u64) -> Vec<C> {
        complex_gaussian(n, 1.0, &mut RngStream::new(seed, 1)).unwrap()
    }

    fn received(
        k: &IsiKernel<f64>,
        cfg: &PilotConfig<f64>,
        ch: &ChannelRealization<f64>,
        seed: u64,
        noise: Option<&[C]>,
    ) -> Vec<C> {
        let x = compose_tx(&data(128, seed), &chu_pilot(cfg), cfg).unwrap();
        k.dft()
            .forward(&transmit_fast(&x, ch, k, noise).unwrap())
            .unwrap()
    }

    #[test]
    fn comb_extraction() {
        let y = data(16, 3);
        assert_eq!(extract_comb(&y, 16, 1).unwrap(), y);
        let mut e = vec![C::new(0.0, 0.0); 128];
        e[16] = C::new(1.0, 0.0);
        let got = extract_comb(&e, 8, 16).unwrap();
        assert_eq!(got[1], C::new(1.0, 0.0));
        assert_eq!(got.iter().filter(|z| z.norm() > 0.0).count(), 1);
        let y = data(128, 4);
        let got = extract_comb(&y, 8, 16).unwrap();
        for i in 0..8 {
            assert_eq!(got[i], y[16 * i]);
        }
        assert!(extract_comb(&y, 8, 8).is_err());
    }

    #[test]
    fn noise_free_ls_recovers_comb_response_and_taps() {
        let (k, cfg, comb) = setup(0.8);
        for seed in 0..10 {
            let ch = sample_channel(8, &k, &mut RngStream::new(seed, 0)).unwrap();
            let obs = comb.observe(&received(&k, &cfg, &ch, seed, None)).unwrap();
            let d = ce_ls(&obs).unwrap();
            let want: Vec<C> = (0..8).map(|i| ch.eigenvalues()[16 * i]).collect();
            assert!(max_abs_diff(&d, &want) < 1e-10);
            let est = ChannelEstimate::from_comb(d, 8, k.dft()).unwrap();
            assert!(max_abs_diff(&est.taps, ch.taps()) < 1e-9);
            assert!(max_abs_diff(&est.full_response, ch.eigenvalues()) < 1e-9);
        }
    }

    #[test]
    fn flat_channel_gives_unit_comb_response() {
        let (k, cfg, comb) = setup(0.9);
        let ch = ChannelRealization::from_taps(vec![C::new(1.0, 0.0)], &k).unwrap();
        let d = ce_ls(&comb.observe(&received(&k, &cfg, &ch, 1, None)).unwrap()).unwrap();
        for z in d {
            assert!((z - C::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn short_channels_are_recovered_exactly() {
        let (k, cfg, comb) = setup(0.7);
        for l in 1..=8 {
            let ch = sample_channel(l, &k, &mut RngStream::new(40 + l as u64, 0)).unwrap();
            let d = ce_ls(&comb.observe(&received(&k, &cfg, &ch, 2, None)).unwrap()).unwrap();
            let h = fd_to_td(&d, 8, l).unwrap();
            assert!(max_abs_diff(&h, ch.taps()) < 1e-9, "L = {l}");
        }
    }

    #[test]
    fn mmse_limits() {
        let (k, cfg, comb) = setup(0.8);
        let ch = sample_channel(8, &k, &mut RngStream::new(3, 0)).unwrap();
        let obs = comb.observe(&received(&k, &cfg, &ch, 3, None)).unwrap();
        let ls = ce_ls(&obs).unwrap();
        let mmse = ce_mmse(&obs, 0.0, 0.125).unwrap();
        assert!(max_abs_diff(&ls, &mmse) < 1e-10);
        let shrunk = ce_mmse(&obs, 1e12, 0.125).unwrap();
        assert!(shrunk.iter().all(|z| z.norm() < 1e-9));
        assert!(ce_mmse(&obs, 1.0, 0.0).is_err());
    }

    #[test]
    fn ls_floor_flags_dead_comb_bins() {
        let obs = CombObservation {
            received: vec![C::new(1.0, 0.0); 3],
            gamma: vec![C::new(1.0, 0.0), C::new(1e-9, 0.0), C::new(0.5, 0.5)],
            noise_profile: vec![1.0; 3],
        };
        assert!(matches!(
            ce_ls(&obs),
            Err(Error::IllConditionedComb { index: 1, .. })
        ));
        let clamped = ce_ls_clamped(&obs, 1e-6).unwrap();
        assert!((clamped[1].norm() - 1e6).abs() < 1.0);
    }

    #[test]
    fn fd_to_td_flat_and_round_trip() {
        let ones = vec![C::new(1.0, 0.0); 8];
        let h = fd_to_td(&ones, 8, 4).unwrap();
        assert!((h[0] - C::new(1.0, 0.0)).norm() < 1e-15);
        assert!(h[1..].iter().all(|z| z.norm() < 1e-15));
        // √P F_{P,L} h, built densely
        for &l in &[1usize, 3, 8] {
            let h = data(l, 50 + l as u64);
            let f = dft_matrix::<f64>(8);
            let d: Vec<C> = (0..8)
                .map(|i| (0..l).map(|j| f[(i, j)] * h[j]).sum::<C>() * 8f64.sqrt())
                .collect();
            assert!(max_abs_diff(&fd_to_td(&d, 8, l).unwrap(), &h) < 1e-12);
        }
        // L = P: (1/√P) F_P^H
        let d = data(8, 60);
        let f = dft_matrix::<f64>(8);
        let want: Vec<C> = (f.adjoint() * nalgebra::DVector::from_column_slice(&d)
            / C::new(8f64.sqrt(), 0.0))
        .iter()
        .copied()
        .collect();
        assert!(max_abs_diff(&fd_to_td(&d, 8, 8).unwrap(), &want) < 1e-12);
        assert!(fd_to_td(&d, 8, 9).is_err());
    }

    #[test]
    fn theory_is_linear_and_vanishes_without_noise() {
        let (_, _, comb) = setup(0.8);
        assert_eq!(theoretical_mse_ls(&comb, 8, 0.0), 0.0);
        assert!(theoretical_mse_mmse(&comb, 8, 0.0, 0.125).abs() < 1e-12);
        let a = theoretical_mse_ls(&comb, 8, 0.01);
        let b = theoretical_mse_ls(&comb, 8, 0.02);
        assert!((b - 2.0 * a).abs() < 1e-15 * b.max(1.0));
    }

    #[test]
    fn ls_trace_matches_scalar_evaluation() {
        let (_, _, comb) = setup(0.8);
        let sigma_v2 = 0.03;
        let scalar: f64 = (0..8)
            .map(|i| comb.noise_profile()[i] / comb.gamma()[i].norm_sqr())
            .sum::<f64>()
            * sigma_v2
            / 8.0
            * (8.0 / 8.0);
        assert!((theoretical_mse_ls(&comb, 8, sigma_v2) - scalar).abs() < 1e-12);
        // LS weights plugged into the generic trace expression
        let w: Vec<C> = comb.gamma().iter().map(|g| g.inv()).collect();
        let generic = theoretical_mse_weights(&comb, &w, 8, sigma_v2, 0.125).unwrap();
        assert!((generic - scalar).abs() < 1e-12);
    }

    #[test]
    fn mmse_theory_below_ls_theory() {
        let (_, _, comb) = setup(0.8);
        for &snr_db in &[0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 30.0] {
            let sigma_v2 = 10f64.powf(-snr_db / 10.0);
            assert!(
                theoretical_mse_mmse(&comb, 8, sigma_v2, 0.125)
                    <= theoretical_mse_ls(&comb, 8, sigma_v2)
            );
        }
    }

    #[test]
    fn monte_carlo_matches_theory_at_small_scale() {
        let (k, cfg, comb) = setup(0.8);
        let sigma_v2 = 0.1;
        let gen = ColoredNoiseGen::new(&k, sigma_v2, 1e-10).unwrap();
        let trials = 20_000;
        let (mut ls_acc, mut mmse_acc) = (Vec::new(), Vec::new());
        for t in 0..trials {
            let ch = sample_channel(8, &k, &mut RngStream::new(77, 3 * t)).unwrap();
            let eta = colored_noise(&gen, &mut RngStream::new(77, 3 * t + 1)).unwrap();
            let obs = comb
                .observe(&received(&k, &cfg, &ch, t, Some(&eta)))
                .unwrap();
            for (acc, d) in [
                (&mut ls_acc, ce_ls(&obs).unwrap()),
                (&mut mmse_acc, ce_mmse(&obs, sigma_v2, 0.125).unwrap()),
            ] {
                let h = fd_to_td(&d, 8, 8).unwrap();
                acc.push(
                    h.iter()
                        .zip(ch.taps())
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum::<f64>(),
                );
            }
        }
        for (acc, theory) in [
            (ls_acc, theoretical_mse_ls(&comb, 8, sigma_v2)),
            (mmse_acc, theoretical_mse_mmse(&comb, 8, sigma_v2, 0.125)),
        ] {
            let n = acc.len() as f64;
            let mean = acc.iter().sum::<f64>() / n;
            let var = acc.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            assert!(
                (mean - theory).abs() < 4.0 * se,
                "mean {mean} theory {theory} se {se}"
            );
        }
    }

    #[test]
    fn sia_projector_consistent_with_comb() {
        // data spectrum under SIA never reaches the comb observation
        let (k, cfg, comb) = setup(0.8);
        let ch = sample_channel(8, &k, &mut RngStream::new(5, 0)).unwrap();
        let proj = SiaProjector::from_config(&cfg).unwrap();
        let s = proj.apply(&data(128, 9)).unwrap();
        let y = k
            .dft()
            .forward(&transmit_fast(&s, &ch, &k, None).unwrap())
            .unwrap();
        let obs = comb.observe(&y).unwrap();
        assert!(obs.received.iter().all(|z| z.norm() < 1e-12));
    }
}
