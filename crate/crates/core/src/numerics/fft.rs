use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::rng::RandomStream;
use crate::error::{domain, Error, Result};
use crate::C64;

/// Radix-2 complex FFT of a fixed power-of-two length.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    twiddles: Vec<C64>,
    rev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(domain("FFT length must be a power of two"));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n).map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) }).collect();
        let twiddles = (0..n / 2).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64)).collect();
        Ok(Self { n, twiddles, rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In place `x_j <- sum_k x_k e^{sign 2 pi i jk/n}` with `sign = +1` when
    /// `inverse` is set and `-1` otherwise. No normalization.
    pub fn process(&self, x: &mut [C64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let j = self.rev[i];
            if j > i {
                x.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let w = if inverse { w } else { w.conj() };
                    let a = x[start + k];
                    let b = x[start + k + half] * w;
                    x[start + k] = a + b;
                    x[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Two-dimensional transform of an `n x n` row-major grid.
    pub fn process_2d(&self, x: &mut [C64], inverse: bool, scratch: &mut Vec<C64>) {
        let n = self.n;
        debug_assert_eq!(x.len(), n * n);
        for row in x.chunks_exact_mut(n) {
            self.process(row, inverse);
        }
        scratch.resize(n, C64::new(0.0, 0.0));
        for c in 0..n {
            for r in 0..n {
                scratch[r] = x[r * n + c];
            }
            self.process(scratch, inverse);
            for r in 0..n {
                x[r * n + c] = scratch[r];
            }
        }
    }
}

/// Stationary Gaussian field on the periodic `n x n` grid whose covariance is
/// `C(j) = n^{-2} sum_k spectrum_k e^{2 pi i k.j/n}`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    n: usize,
    amplitude: Vec<f64>,
    fft: Fft,
}

impl SpectralField {
    /// `spectrum` is row-major over wavevector indices `k = (k1, k2)` in FFT
    /// order; it must be even under `k -> -k` for the field to be real.
    pub fn new(n: usize, spectrum: &[f64]) -> Result<Self> {
        if spectrum.len() != n * n {
            return Err(domain("spectrum length must be n^2"));
        }
        for (i, &s) in spectrum.iter().enumerate() {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::Domain(alloc::format!("negative or non-finite spectrum entry {s:e} at index {i}")));
            }
        }
        for k1 in 0..n {
            for k2 in 0..n {
                let m1 = (n - k1) % n;
                let m2 = (n - k2) % n;
                let a = spectrum[k1 * n + k2];
                let b = spectrum[m1 * n + m2];
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(domain("spectrum is not even under k -> -k"));
                }
            }
        }
        let norm = 1.0 / n as f64;
        Ok(Self { n, amplitude: spectrum.iter().map(|s| libm::sqrt(*s) * norm).collect(), fft: Fft::new(n)? })
    }

    pub fn grid(&self) -> usize {
        self.n
    }

    /// Two independent samples from one transform: complex white noise is
    /// shaped by the spectrum and its real and imaginary parts are returned.
    pub fn sample_pair(
        &self,
        stream: RandomStream,
        work: &mut Vec<C64>,
        scratch: &mut Vec<C64>,
    ) -> (Vec<f64>, Vec<f64>) {
        let n2 = self.n * self.n;
        work.clear();
        let mut g = stream.generator();
        for a in &self.amplitude {
            let re = g.normal();
            let im = g.normal();
            work.push(C64::new(re * a, im * a));
        }
        self.fft.process_2d(work, true, scratch);
        let mut f1 = Vec::with_capacity(n2);
        let mut f2 = Vec::with_capacity(n2);
        for z in work.iter() {
            f1.push(z.re);
            f2.push(z.im);
        }
        (f1, f2)
    }

    pub fn exact_covariance(&self, shift: (usize, usize)) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for k1 in 0..n {
            for k2 in 0..n {
                let a = self.amplitude[k1 * n + k2];
                let ph = 2.0 * PI * ((k1 * shift.0 + k2 * shift.1) % n) as f64 / n as f64;
                acc += a * a * libm::cos(ph);
            }
        }
        acc
    }
}

/// One real field sample with the covariance described by `spectrum`.
pub fn spectral_synthesize(n: usize, spectrum: &[f64], stream: RandomStream) -> Result<Vec<f64>> {
    let f = SpectralField::new(n, spectrum)?;
    let mut work = vec![];
    let mut scratch = vec![];
    Ok(f.sample_pair(stream, &mut work, &mut scratch).0)
}
