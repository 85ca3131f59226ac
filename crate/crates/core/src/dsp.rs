//! Numerical primitives shared by the signal chain.
//!
//! Two DFT conventions coexist and are kept apart on purpose:
//!
//! - [`Dft::forward`] / [`Dft::inverse`] are the unitary transforms
//!   `F_N` / `F_N^H` with `(F_N)_{mn} = e^{-j2πmn/N} / √N`. Symbol vectors
//!   (`s̃ = F s`, `ỹ = F y`, `x̃_p = F x_p`) always use this form.
//! - [`circulant_eigenvalues`] is the unnormalized sum
//!   `λ_k = Σ_n c_n e^{-j2πkn/N}`, so that `circ(c) = F^H diag(λ) F`.
//!   The ISI eigenvalues `λ_g`, channel eigenvalues `λ_h` and the
//!   equalizer response `λ̂_eq` use this form.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, RealField};
use num_complex::Complex;
use num_traits::Float;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Planned unitary DFT of a fixed length.
#[derive(Clone)]
pub struct Dft<T: Real> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> fmt::Debug for Dft<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

impl<T: Real> Dft<T> {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Domain("DFT length must be at least 1".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            scale: T::one() / T::from_usize_lossy(len).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place unitary forward transform.
    pub fn forward_in_place(&self, buf: &mut [Complex<T>]) -> Result<()> {
        check_len(self.len, buf.len())?;
        self.forward.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
        Ok(())
    }

    /// In-place unitary inverse transform.
    pub fn inverse_in_place(&self, buf: &mut [Complex<T>]) -> Result<()> {
        check_len(self.len, buf.len())?;
        self.inverse.process(buf);
        buf.iter_mut().for_each(|z| *z *= self.scale);
        Ok(())
    }

    pub fn forward(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let mut buf = x.to_vec();
        self.forward_in_place(&mut buf)?;
        Ok(buf)
    }

    pub fn inverse(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let mut buf = x.to_vec();
        self.inverse_in_place(&mut buf)?;
        Ok(buf)
    }

    /// Unnormalized forward sum `Σ_n x_n e^{-j2πkn/N}`. Inputs shorter than
    /// the transform length are zero-padded.
    pub fn unnormalized(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if x.len() > self.len {
            return Err(Error::Dimension {
                expected: self.len,
                got: x.len(),
            });
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.len];
        buf[..x.len()].copy_from_slice(x);
        self.forward.process(&mut buf);
        Ok(buf)
    }
}

/// Unitary DFT `F_N x`.
pub fn dft<T: Real>(x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    Dft::new(x.len())?.forward(x)
}

/// Unitary inverse DFT `F_N^H x`.
pub fn idft<T: Real>(x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    Dft::new(x.len())?.inverse(x)
}

/// Eigenvalues of the circulant matrix with first column `c`, such that
/// `circ(c) = F_N^H diag(λ) F_N`.
pub fn circulant_eigenvalues<T: Real>(c: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    Dft::new(c.len())?.unnormalized(c)
}

/// Dense unitary DFT matrix, built entry by entry.
pub fn dft_matrix<T: Real>(n: usize) -> DMatrix<Complex<T>> {
    let scale = T::one() / T::from_usize_lossy(n).sqrt();
    let two_pi = T::PI() + T::PI();
    DMatrix::from_fn(n, n, |m, k| {
        let phase = -two_pi * T::from_usize_lossy((m * k) % n) / T::from_usize_lossy(n);
        Complex::from_polar(scale, phase)
    })
}

/// Dense circulant matrix with first column `c`: `C[m, n] = c[(m - n) mod N]`.
pub fn circulant_matrix<T: Real>(c: &[Complex<T>]) -> DMatrix<Complex<T>> {
    let n = c.len();
    DMatrix::from_fn(n, n, |row, col| c[(row + n - col) % n])
}

/// Result of [`psd_factor`].
#[derive(Clone, Debug)]
pub struct PsdFactor<T: Real> {
    /// `B` with `B B^H` equal to the (clipped) input.
    pub factor: DMatrix<Complex<T>>,
    /// Number of eigenvalues raised to the clipping floor.
    pub clipped: usize,
}

/// Factorizes a Hermitian, numerically PSD matrix as `M = B B^H`.
///
/// Eigenvalues below `clip_eps * λ_max` are raised to that floor and
/// counted; eigenvalues below `-clip_eps * λ_max` are rejected.
pub fn psd_factor<T>(m: &DMatrix<Complex<T>>, clip_eps: T) -> Result<PsdFactor<T>>
where
    T: Real + RealField,
{
    let n = m.nrows();
    check_len(n, m.ncols())?;
    if !(clip_eps >= T::zero()) {
        return Err(Error::Domain("clip_eps must be non-negative".into()));
    }
    let scale = m.iter().map(|z| z.norm()).fold(T::zero(), Float::max);
    let asym = (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(T::zero(), Float::max);
    if asym > T::lit(1e-9) * Float::max(scale, T::one()) {
        return Err(Error::Domain(format!(
            "matrix is not Hermitian (asymmetry {asym:e})"
        )));
    }
    if n == 0 {
        return Ok(PsdFactor {
            factor: m.clone(),
            clipped: 0,
        });
    }

    let eig = m.clone().symmetric_eigen();
    let max_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(T::neg_infinity(), Float::max);
    let floor = clip_eps * Float::max(max_eig, T::zero());
    let mut clipped = 0;
    let mut roots = Vec::with_capacity(n);
    for &ev in eig.eigenvalues.iter() {
        if ev < -floor {
            return Err(Error::NotPsd {
                eigenvalue: ev.to_f64_lossy(),
                threshold: floor.to_f64_lossy(),
            });
        }
        let v = if ev < floor {
            clipped += 1;
            floor
        } else {
            ev
        };
        roots.push(Float::sqrt(v));
    }
    let mut factor = eig.eigenvectors;
    for (j, r) in roots.into_iter().enumerate() {
        factor.column_mut(j).iter_mut().for_each(|z| *z *= r);
    }
    Ok(PsdFactor { factor, clipped })
}

/// Reproducible random stream keyed by `(seed, stream)`.
///
/// Backed by ChaCha8, whose 2^64 independent streams let every Monte Carlo
/// trial own its generator without coordination.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub(crate) fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Draws `n` i.i.d. circularly-symmetric complex Gaussian samples with
/// per-entry variance `variance` (each real part carries half of it).
///
/// Samples are drawn in `f64` and converted, so `f32` and `f64` callers see
/// the same underlying sequence.
pub fn complex_gaussian<T: Real>(
    n: usize,
    variance: T,
    rng: &mut RngStream,
) -> Result<Vec<Complex<T>>> {
    if !(variance >= T::zero()) || !variance.is_finite() {
        return Err(Error::Domain(format!(
            "variance must be finite and non-negative, got {variance}"
        )));
    }
    let sd = (variance.to_f64_lossy() / 2.0).sqrt();
    Ok((0..n)
        .map(|_| {
            let re = rng.standard_normal() * sd;
            let im = rng.standard_normal() * sd;
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect())
}
