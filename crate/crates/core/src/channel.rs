//! Frequency-selective block fading, colored matched-filter noise and the
//! through-channel operators.

use num_complex::Complex;

use crate::dsp::{complex_gaussian, RngStream};
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;
use crate::waveform::IsiKernel;

/// One block-fading channel draw.
#[derive(Clone, Debug)]
pub struct ChannelRealization<T: Real> {
    taps: Vec<Complex<T>>,
    eigenvalues: Vec<Complex<T>>,
    tap_power: T,
}

impl<T: Real> ChannelRealization<T> {
    /// Builds a realization from explicit taps (no normalization applied).
    pub fn from_taps(taps: Vec<Complex<T>>, kernel: &IsiKernel<T>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Config("channel needs at least one tap".into()));
        }
        if taps.len() > kernel.block_len() {
            return Err(Error::Dimension {
                expected: kernel.block_len(),
                got: taps.len(),
            });
        }
        let eigenvalues = kernel.dft().unnormalized(&taps)?;
        let tap_power = T::one() / T::from_usize_lossy(taps.len());
        Ok(Self {
            taps,
            eigenvalues,
            tap_power,
        })
    }

    pub fn taps(&self) -> &[Complex<T>] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// `λ_{h,k} = Σ_l h_l e^{-j2πkl/N}`.
    pub fn eigenvalues(&self) -> &[Complex<T>] {
        &self.eigenvalues
    }

    /// Prior per-tap power `σ_h² = 1/L`.
    pub fn tap_power(&self) -> T {
        self.tap_power
    }
}

/// Draws i.i.d. `CN(0, 1/L)` taps and rescales them so that `Σ|h_l|² = 1`.
pub fn sample_channel<T: Real>(
    taps: usize,
    kernel: &IsiKernel<T>,
    rng: &mut RngStream,
) -> Result<ChannelRealization<T>> {
    if taps == 0 || taps > kernel.nu() {
        return Err(Error::Config(format!(
            "channel length must satisfy 1 <= L <= nu = {}, got {taps}",
            kernel.nu()
        )));
    }
    let mut h: Vec<Complex<T>> = complex_gaussian(taps, T::one() / T::from_usize_lossy(taps), rng)?;
    let energy: T = h.iter().map(|z| z.norm_sqr()).sum();
    let scale = T::one() / energy.sqrt();
    h.iter_mut().for_each(|z| *z *= scale);
    ChannelRealization::from_taps(h, kernel)
}

/// Sampler for matched-filter noise with covariance `σ_v² G`.
///
/// With `G = F^H diag(λ_g) F`, the factor `B = F^H diag(√λ_g) F` is applied
/// through the FFT.
#[derive(Clone, Debug)]
pub struct ColoredNoiseGen<T: Real> {
    spectrum_sqrt: Vec<T>,
    sigma_v2: T,
    clipped: usize,
    kernel_dft: crate::dsp::Dft<T>,
}

impl<T: Real> ColoredNoiseGen<T> {
    /// `clip_eps` follows the same rule as [`crate::dsp::psd_factor`].
    pub fn new(kernel: &IsiKernel<T>, sigma_v2: T, clip_eps: T) -> Result<Self> {
        if !(sigma_v2 >= T::zero()) || !sigma_v2.is_finite() {
            return Err(Error::Domain(format!(
                "noise density must be non-negative, got {sigma_v2}"
            )));
        }
        let lam = kernel.noise_profile();
        let max = lam.iter().copied().fold(T::zero(), T::max);
        let floor = clip_eps * max;
        let mut clipped = 0;
        let mut spectrum_sqrt = Vec::with_capacity(lam.len());
        for &l in &lam {
            if l < -floor {
                return Err(Error::NotPsd {
                    eigenvalue: l.to_f64_lossy(),
                    threshold: floor.to_f64_lossy(),
                });
            }
            if l < floor {
                clipped += 1;
                spectrum_sqrt.push(floor.sqrt());
            } else {
                spectrum_sqrt.push(l.sqrt());
            }
        }
        Ok(Self {
            spectrum_sqrt,
            sigma_v2,
            clipped,
            kernel_dft: kernel.dft().clone(),
        })
    }

    pub fn sigma_v2(&self) -> T {
        self.sigma_v2
    }

    /// Number of ISI eigenvalues raised to the clipping floor.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    pub fn block_len(&self) -> usize {
        self.spectrum_sqrt.len()
    }

    /// Colors an arbitrary white vector: returns `√σ_v² · B w`.
    pub fn color(&self, white: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_len(self.block_len(), white.len())?;
        let mut buf = white.to_vec();
        self.kernel_dft.forward_in_place(&mut buf)?;
        let amp = self.sigma_v2.sqrt();
        for (z, &s) in buf.iter_mut().zip(&self.spectrum_sqrt) {
            *z *= s * amp;
        }
        self.kernel_dft.inverse_in_place(&mut buf)?;
        Ok(buf)
    }
}

/// Draws one colored noise block `η = √σ_v² · B w`, `w ~ CN(0, I)`.
pub fn colored_noise<T: Real>(
    gen: &ColoredNoiseGen<T>,
    rng: &mut RngStream,
) -> Result<Vec<Complex<T>>> {
    let w = complex_gaussian(gen.block_len(), T::one(), rng)?;
    gen.color(&w)
}

fn add_noise<T: Real>(y: &mut [Complex<T>], noise: Option<&[Complex<T>]>) -> Result<()> {
    if let Some(eta) = noise {
        check_len(y.len(), eta.len())?;
        y.iter_mut().zip(eta).for_each(|(a, b)| *a += *b);
    }
    Ok(())
}

/// Physical CP/CS path: prepends the last `guard` symbols and appends the
/// first `guard`, applies the banded channel `H` and the banded ISI `G` on
/// the extended block, adds `noise` and strips `guard` samples at each end.
///
/// The result coincides with [`transmit_fast`] whenever
/// `guard ≥ ν + L − 1`. With `guard = ν` and `L > 1` the first `L − 1`
/// output rows miss part of the channel memory.
pub fn transmit_exact<T: Real>(
    x: &[Complex<T>],
    chan: &ChannelRealization<T>,
    kernel: &IsiKernel<T>,
    guard: usize,
    noise: Option<&[Complex<T>]>,
) -> Result<Vec<Complex<T>>> {
    let n = kernel.block_len();
    check_len(n, x.len())?;
    if guard > n {
        return Err(Error::Config(format!(
            "guard length {guard} exceeds block length {n}"
        )));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let ext_len = n + 2 * guard;
    let mut ext = Vec::with_capacity(ext_len);
    ext.extend_from_slice(&x[n - guard..]);
    ext.extend_from_slice(x);
    ext.extend_from_slice(&x[..guard]);

    // H_{N+2ν}: lower-triangular Toeplitz, no wrap-around
    let h = chan.taps();
    let mut through_h = vec![zero; ext_len];
    for (m, out) in through_h.iter_mut().enumerate() {
        for (l, &hl) in h.iter().enumerate().take(m + 1) {
            *out += hl * ext[m - l];
        }
    }

    // G_{N+2ν}: symmetric band of half-width ν, evaluated only on kept rows
    let nu = kernel.nu() as isize;
    let mut y = vec![zero; n];
    for (i, out) in y.iter_mut().enumerate() {
        let row = (i + guard) as isize;
        for k in -nu..=nu {
            let col = row - k;
            if col >= 0 && (col as usize) < ext_len {
                *out += through_h[col as usize] * kernel.tap(k);
            }
        }
    }
    add_noise(&mut y, noise)?;
    Ok(y)
}

/// Circulant path `y = F^H Λ_g Λ_h F x + η`.
pub fn transmit_fast<T: Real>(
    x: &[Complex<T>],
    chan: &ChannelRealization<T>,
    kernel: &IsiKernel<T>,
    noise: Option<&[Complex<T>]>,
) -> Result<Vec<Complex<T>>> {
    let n = kernel.block_len();
    check_len(n, x.len())?;
    check_len(n, chan.eigenvalues().len())?;
    let dft = kernel.dft();
    let mut buf = x.to_vec();
    dft.forward_in_place(&mut buf)?;
    for ((z, lg), lh) in buf
        .iter_mut()
        .zip(kernel.eigenvalues())
        .zip(chan.eigenvalues())
    {
        *z = *z * *lg * *lh;
    }
    dft.inverse_in_place(&mut buf)?;
    add_noise(&mut buf, noise)?;
    Ok(buf)
}
