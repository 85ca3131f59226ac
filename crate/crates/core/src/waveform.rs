//! FTN ISI kernel.
//!
//! The matched-filter output of an RRC pulse is a raised-cosine pulse. Its
//! samples at the FTN interval `T = τ T₀` form the ISI taps `g(nT)`, which
//! are truncated to `|n| ≤ ν`.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::dsp::Dft;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Waveform parameters of an FTN block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FtnParams<T> {
    /// Packing ratio, `0 < τ ≤ 1`.
    pub tau: T,
    /// RRC roll-off, `0 ≤ β ≤ 1`.
    pub beta: T,
    /// Effective ISI length in symbols.
    pub nu: usize,
    /// Block length `N`.
    pub block_len: usize,
}

impl<T: Real> FtnParams<T> {
    pub fn new(tau: T, beta: T, nu: usize, block_len: usize) -> Result<Self> {
        let p = Self {
            tau,
            beta,
            nu,
            block_len,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero() && self.tau <= T::one()) {
            return Err(Error::Config(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return Err(Error::Config(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.nu < 1 {
            return Err(Error::Config("nu must be at least 1".into()));
        }
        if 2 * self.nu + 1 > self.block_len {
            return Err(Error::Config(format!(
                "block length {} is shorter than 2*nu + 1 = {}",
                self.block_len,
                2 * self.nu + 1
            )));
        }
        Ok(())
    }
}

fn sinc<T: Real>(x: T) -> T {
    if x == T::zero() {
        T::one()
    } else {
        let px = T::PI() * x;
        px.sin() / px
    }
}

/// Raised-cosine pulse at `t / T₀ = x`, normalized to 1 at the origin.
///
/// The removable singularity at `2βx = ±1` evaluates to `(π/4) sinc(1/(2β))`.
pub fn raised_cosine<T: Real>(x: T, beta: T) -> T {
    if x == T::zero() {
        return T::one();
    }
    let two_bx = (beta + beta) * x;
    let denom = T::one() - two_bx * two_bx;
    if beta > T::zero() && denom.abs() < T::epsilon().sqrt() {
        return T::FRAC_PI_4() * sinc(T::one() / (beta + beta));
    }
    sinc(x) * (T::PI() * beta * x).cos() / denom
}

/// ISI tap `g(nT)`; zero beyond the truncation length `ν`.
pub fn rc_autocorrelation<T: Real>(params: &FtnParams<T>, n: isize) -> T {
    if n.unsigned_abs() > params.nu {
        return T::zero();
    }
    let x = T::from_isize(n).expect("small index") * params.tau;
    raised_cosine(x, params.beta)
}

/// Precomputed ISI kernel for one `(τ, β, ν, N)`.
#[derive(Clone, Debug)]
pub struct IsiKernel<T: Real> {
    params: FtnParams<T>,
    taps: Vec<T>,
    column: Vec<Complex<T>>,
    eigenvalues: Vec<Complex<T>>,
    dft: Dft<T>,
}

impl<T: Real> IsiKernel<T> {
    pub fn new(params: FtnParams<T>) -> Result<Self> {
        params.validate()?;
        let taps: Vec<T> = (0..=params.nu as isize)
            .map(|n| rc_autocorrelation(&params, n))
            .collect();
        let column = circulant_column(&taps, params.block_len);
        let dft = Dft::new(params.block_len)?;
        let eigenvalues = dft.unnormalized(&column)?;
        Ok(Self {
            params,
            taps,
            column,
            eigenvalues,
            dft,
        })
    }

    pub fn params(&self) -> &FtnParams<T> {
        &self.params
    }

    pub fn block_len(&self) -> usize {
        self.params.block_len
    }

    pub fn nu(&self) -> usize {
        self.params.nu
    }

    /// One-sided taps `[g(0), g(T), …, g(νT)]`.
    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    /// Symmetric tap lookup `g(nT) = g(-nT)`, zero beyond `ν`.
    pub fn tap(&self, n: isize) -> T {
        self.taps
            .get(n.unsigned_abs())
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// First column of the circulant ISI matrix `G`.
    pub fn circulant_column(&self) -> &[Complex<T>] {
        &self.column
    }

    /// Eigenvalues `λ_g` of `G` (unnormalized DFT of its first column).
    pub fn eigenvalues(&self) -> &[Complex<T>] {
        &self.eigenvalues
    }

    /// Diagonal of `F G F^H`, i.e. the per-bin FD noise variance profile
    /// `Φ` for unit noise density. `G` is circulant, so this is `Re λ_g`.
    pub fn noise_profile(&self) -> Vec<T> {
        self.eigenvalues.iter().map(|l| l.re).collect()
    }

    /// Unitary DFT plan of the block length, shared by the signal chain.
    pub fn dft(&self) -> &Dft<T> {
        &self.dft
    }

    /// Banded symmetric Toeplitz ISI matrix `G_N`.
    pub fn toeplitz(&self) -> DMatrix<Complex<T>> {
        toeplitz_of(&self.taps, self.params.block_len)
    }

    /// Sum of squared off-center taps `Σ_{n≠0} g(nT)²`.
    pub fn isi_energy(&self) -> T {
        self.taps[1..].iter().map(|&g| g * g).sum::<T>() * T::lit(2.0)
    }
}

fn circulant_column<T: Real>(taps: &[T], n: usize) -> Vec<Complex<T>> {
    let nu = taps.len() - 1;
    let mut col = vec![Complex::new(T::zero(), T::zero()); n];
    col[0] = Complex::new(taps[0], T::zero());
    for k in 1..=nu {
        col[k] = Complex::new(taps[k], T::zero());
        col[n - k] = Complex::new(taps[k], T::zero());
    }
    col
}

fn toeplitz_of<T: Real>(taps: &[T], n: usize) -> DMatrix<Complex<T>> {
    DMatrix::from_fn(n, n, |r, c| {
        let d = r.abs_diff(c);
        Complex::new(taps.get(d).copied().unwrap_or_else(T::zero), T::zero())
    })
}

/// Banded Toeplitz ISI matrix `G_N` with first column `[g(0), …, g(νT), 0, …]`.
pub fn build_isi_toeplitz<T: Real>(params: &FtnParams<T>) -> Result<DMatrix<Complex<T>>> {
    params.validate()?;
    let taps: Vec<T> = (0..=params.nu as isize)
        .map(|n| rc_autocorrelation(params, n))
        .collect();
    Ok(toeplitz_of(&taps, params.block_len))
}

/// First column and eigenvalues of a circulant matrix.
pub type CirculantParts<T> = (Vec<Complex<T>>, Vec<Complex<T>>);

/// First column and eigenvalues of the circulant ISI matrix `G`.
pub fn build_isi_circulant<T: Real>(params: &FtnParams<T>) -> Result<CirculantParts<T>> {
    let k = IsiKernel::new(*params)?;
    Ok((k.column, k.eigenvalues))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{
        circulant_eigenvalues, circulant_matrix, complex_gaussian, dft_matrix, psd_factor,
        RngStream,
    };

    type C = Complex<f64>;

    fn params(tau: f64, beta: f64, nu: usize, n: usize) -> FtnParams<f64> {
        FtnParams::new(tau, beta, nu, n).unwrap()
    }

    /// Unit-energy RRC impulse response with `T₀ = 1`.
    fn rrc(t: f64, beta: f64) -> f64 {
        use std::f64::consts::PI;
        if t == 0.0 {
            return 1.0 - beta + 4.0 * beta / PI;
        }
        if beta > 0.0 && ((4.0 * beta * t).abs() - 1.0).abs() < 1e-12 {
            let a = PI / (4.0 * beta);
            return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
        }
        let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
        num / (PI * t * (1.0 - (4.0 * beta * t).powi(2)))
    }

    /// Simpson rule for ∫ q(ξ) q(ξ − t) dξ over ±32 T₀ with step T₀/512.
    fn rrc_self_convolution(t: f64, beta: f64) -> f64 {
        let steps = 64 * 512;
        let h = 64.0 / steps as f64;
        let f = |i: usize| {
            let xi = -32.0 + i as f64 * h;
            rrc(xi, beta) * rrc(xi - t, beta)
        };
        let mut acc = f(0) + f(steps);
        for i in 1..steps {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i);
        }
        acc * h / 3.0
    }

    #[test]
    fn quadrature_oracle_is_unit_energy() {
        assert!((rrc_self_convolution(0.0, 0.5) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn tap_zero_is_one() {
        let p = params(0.8, 0.5, 10, 128);
        assert_eq!(rc_autocorrelation(&p, 0), 1.0);
    }

    #[test]
    fn nyquist_taps_vanish() {
        for &beta in &[0.0, 0.22, 0.5, 1.0] {
            let p = params(1.0, beta, 10, 64);
            for n in 1..=10 {
                assert!(rc_autocorrelation(&p, n).abs() < 1e-12, "beta {beta} n {n}");
                assert!(rc_autocorrelation(&p, -n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let p = params(0.8, 0.5, 10, 128);
        let want = rrc_self_convolution(0.8, 0.5);
        let got = rc_autocorrelation(&p, 1);
        assert!((got - want).abs() < 1e-6, "got {got}, quadrature {want}");
        for n in 2..=4 {
            let want = rrc_self_convolution(0.8 * n as f64, 0.5);
            assert!((rc_autocorrelation(&p, n) - want).abs() < 1e-6);
        }
    }

    #[test]
    fn singular_point_uses_limit() {
        // 2βx = 1 at x = 1 for β = 0.5: τ = 0.5, n = 2
        let p = params(0.5, 0.5, 4, 16);
        let at = rc_autocorrelation(&p, 2);
        let near = raised_cosine(1.0 + 1e-5, 0.5);
        assert!((at - near).abs() < 1e-4);
        assert!((at - rrc_self_convolution(1.0, 0.5)).abs() < 1e-6);
    }

    #[test]
    fn taps_bounded_and_symmetric() {
        for &tau in &[0.5, 0.7, 0.8, 0.9, 1.0] {
            let k = IsiKernel::new(params(tau, 0.5, 10, 64)).unwrap();
            for n in -10isize..=10 {
                assert!(k.tap(n).abs() <= 1.0);
                assert_eq!(k.tap(n), k.tap(-n));
            }
            assert_eq!(k.tap(11), 0.0);
        }
    }

    #[test]
    fn toeplitz_nyquist_is_identity() {
        let g = build_isi_toeplitz(&params(1.0, 0.5, 3, 12)).unwrap();
        let diff = g - DMatrix::<C>::identity(12, 12);
        assert!(diff.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn toeplitz_symmetry_and_band() {
        let p = params(0.8, 0.5, 2, 6);
        let g = build_isi_toeplitz(&p).unwrap();
        let g2 = rc_autocorrelation(&p, 2);
        assert_eq!(g[(0, 2)].re, g2);
        assert_eq!(g[(2, 0)].re, g2);
        assert_eq!(g[(0, 3)].re, 0.0);
        assert_eq!(g, g.transpose());
    }

    #[test]
    fn toeplitz_matches_sampled_model_sum() {
        let p = params(0.7, 0.5, 10, 40);
        let g = build_isi_toeplitz(&p).unwrap();
        let s = complex_gaussian::<f64>(40, 1.0, &mut RngStream::new(8, 0)).unwrap();
        let y = &g * nalgebra::DVector::from_column_slice(&s);
        for n in 0..40 {
            let direct: C = (0..40)
                .map(|m| s[m] * rc_autocorrelation(&p, n as isize - m as isize))
                .sum();
            assert!((direct - y[n]).norm() < 1e-10);
        }
    }

    #[test]
    fn circulant_nyquist_is_identity() {
        let (col, lam) = build_isi_circulant(&params(1.0, 0.5, 10, 32)).unwrap();
        assert!((col[0] - C::new(1.0, 0.0)).norm() < 1e-15);
        assert!(col[1..].iter().all(|z| z.norm() < 1e-12));
        assert!(lam.iter().all(|l| (l - C::new(1.0, 0.0)).norm() < 1e-11));
    }

    #[test]
    fn circulant_interior_rows_match_toeplitz() {
        let p = params(0.8, 0.5, 4, 20);
        let k = IsiKernel::new(p).unwrap();
        let circ = circulant_matrix(k.circulant_column());
        let toep = k.toeplitz();
        for r in p.nu..p.block_len - p.nu {
            for c in 0..p.block_len {
                assert_eq!(circ[(r, c)], toep[(r, c)], "row {r} col {c}");
            }
        }
    }

    #[test]
    fn circulant_eigen_reconstruction_dense() {
        let k = IsiKernel::new(params(0.8, 0.5, 10, 32)).unwrap();
        assert_eq!(
            k.eigenvalues(),
            circulant_eigenvalues(k.circulant_column())
                .unwrap()
                .as_slice()
        );
        let f = dft_matrix::<f64>(32);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(k.eigenvalues()));
        let recon = f.adjoint() * d * &f;
        let err = (recon - circulant_matrix(k.circulant_column()))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10);
        // diag(F G F^H) is the noise profile
        let gt = &f * circulant_matrix(k.circulant_column()) * f.adjoint();
        for (i, phi) in k.noise_profile().iter().enumerate() {
            assert!((gt[(i, i)].re - phi).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalues_are_real() {
        for &tau in &[0.6, 0.7, 0.8, 0.9, 1.0] {
            let k = IsiKernel::new(params(tau, 0.5, 10, 128)).unwrap();
            let im = k
                .eigenvalues()
                .iter()
                .map(|l| l.im.abs())
                .fold(0.0, f64::max);
            assert!(im < 1e-10);
        }
    }

    #[test]
    fn isi_energy_non_increasing_in_tau() {
        let e: Vec<f64> = [0.7, 0.8, 0.9, 1.0]
            .iter()
            .map(|&t| {
                IsiKernel::new(params(t, 0.5, 10, 128))
                    .unwrap()
                    .isi_energy()
            })
            .collect();
        for w in e.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{e:?}");
        }
    }

    #[test]
    fn psd_factor_of_isi_matrix() {
        let g = build_isi_toeplitz(&params(0.8, 0.5, 10, 32)).unwrap();
        let f = psd_factor(&g, 1e-10).unwrap();
        let recon = &f.factor * f.factor.adjoint();
        let err = (recon - &g).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(FtnParams::new(0.0, 0.5, 10, 128).is_err());
        assert!(FtnParams::new(1.2, 0.5, 10, 128).is_err());
        assert!(FtnParams::new(0.8, -0.1, 10, 128).is_err());
        assert!(FtnParams::new(0.8, 0.5, 0, 128).is_err());
        assert!(FtnParams::new(0.8, 0.5, 10, 20).is_err());
        assert!(FtnParams::new(0.8, 0.5, 10, 21).is_ok());
    }

    #[test]
    fn single_precision_kernel() {
        let k = IsiKernel::<f32>::new(FtnParams::new(0.8f32, 0.5, 10, 128).unwrap()).unwrap();
        let k64 = IsiKernel::new(params(0.8, 0.5, 10, 128)).unwrap();
        for (a, b) in k.taps().iter().zip(k64.taps()) {
            assert!((*a as f64 - b).abs() < 1e-6);
        }
    }
}
