use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gray-labelled square QAM constellation (QPSK is the 4-point case).
///
/// Point `i` carries label `i`, written MSB first. The upper half of the
/// label selects the in-phase level and the lower half the quadrature
/// level, each through a Gray-coded PAM axis where bit `0` maps to the
/// positive side. For QPSK with `a = √(σ_s²/2)`:
///
/// | label | point      |
/// |-------|------------|
/// | 00    | (+a, +a)   |
/// | 01    | (+a, −a)   |
/// | 10    | (−a, +a)   |
/// | 11    | (−a, −a)   |
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation<T> {
    points: Vec<Complex<T>>,
    bits_per_symbol: usize,
    power: T,
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

impl<T: Real> Constellation<T> {
    pub fn qpsk(power: T) -> Result<Self> {
        Self::square_qam(4, power)
    }

    /// Square `order`-QAM (4, 16, 64, …) with mean power `power`.
    pub fn square_qam(order: usize, power: T) -> Result<Self> {
        let bits = order.trailing_zeros() as usize;
        if order < 4 || !order.is_power_of_two() || !bits.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "{order}-QAM is not a square power-of-four constellation"
            )));
        }
        if !(power >= T::zero()) || !power.is_finite() {
            return Err(Error::Config(format!(
                "constellation power must be non-negative, got {power}"
            )));
        }
        let axis_bits = bits / 2;
        let m = 1usize << axis_bits;
        // mean energy of the unscaled odd-integer grid is 2(m² − 1)/3
        let unit = T::lit(2.0 * ((m * m - 1) as f64) / 3.0);
        let scale = (power / unit).sqrt();
        let level = |g: usize| {
            let pos = gray_decode(g);
            T::from_usize_lossy(m - 1) - T::lit(2.0) * T::from_usize_lossy(pos)
        };
        let points = (0..order)
            .map(|label| {
                let i = label >> axis_bits;
                let q = label & (m - 1);
                Complex::new(level(i) * scale, level(q) * scale)
            })
            .collect();
        Ok(Self {
            points,
            bits_per_symbol: bits,
            power,
        })
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn power(&self) -> T {
        self.power
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Index of the nearest point; ties go to the smallest index.
    pub fn nearest(&self, z: Complex<T>) -> usize {
        let mut best = 0;
        let mut best_d = (z - self.points[0]).norm_sqr();
        for (i, p) in self.points.iter().enumerate().skip(1) {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Entrywise nearest-point projection.
    pub fn slice(&self, z: &[Complex<T>]) -> Vec<Complex<T>> {
        z.iter().map(|&v| self.points[self.nearest(v)]).collect()
    }

    /// Maps a bit stream (one `0`/`1` per entry, MSB first per symbol).
    pub fn map(&self, bits: &[u8]) -> Result<Vec<Complex<T>>> {
        if !bits.len().is_multiple_of(self.bits_per_symbol) {
            return Err(Error::Dimension {
                expected: bits.len().div_ceil(self.bits_per_symbol) * self.bits_per_symbol,
                got: bits.len(),
            });
        }
        bits.chunks_exact(self.bits_per_symbol)
            .map(|chunk| {
                let mut label = 0usize;
                for &b in chunk {
                    if b > 1 {
                        return Err(Error::Contract(format!("bit value {b} is not 0 or 1")));
                    }
                    label = (label << 1) | b as usize;
                }
                Ok(self.points[label])
            })
            .collect()
    }

    /// Appends the label bits of `index` to `out`.
    pub fn push_label(&self, index: usize, out: &mut Vec<u8>) {
        for j in (0..self.bits_per_symbol).rev() {
            out.push(((index >> j) & 1) as u8);
        }
    }
}

/// Gray demapping of symbols that must already be constellation points.
pub fn demap_bits<T: Real>(symbols: &[Complex<T>], cons: &Constellation<T>) -> Result<Vec<u8>> {
    let tol = T::lit(1e-6) * cons.power().sqrt().max(T::one());
    let mut out = Vec::with_capacity(symbols.len() * cons.bits_per_symbol());
    for (n, &z) in symbols.iter().enumerate() {
        let idx = cons.nearest(z);
        if (z - cons.points()[idx]).norm() > tol {
            return Err(Error::Contract(format!(
                "symbol {n} ({z}) is not a constellation point"
            )));
        }
        cons.push_label(idx, &mut out);
    }
    Ok(out)
}
