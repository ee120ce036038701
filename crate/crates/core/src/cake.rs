//! Cake-wavelet orientation bank and image lifting.
//!
//! Each filter is an angular wedge in the Fourier plane. Wedge `k` collects
//! the frequencies whose normal direction corresponds to structures oriented
//! along `theta_k = k pi / K`; its angular profile is a cardinal B-spline of
//! degree `bw` in units of `pi / K`, wrapped with period `pi`. Because the
//! wedge is defined on orientations rather than directions, every filter is
//! even in frequency and therefore real in space. B-spline translates sum to
//! one, the DC term is split evenly across the `K` filters, and a raised
//! cosine taper in the max-norm of the frequency rolls every filter off
//! between `0.95` Nyquist and Nyquist.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cortical::{CorticalStack, Image};
use crate::error::{Error, Result};
use crate::fft::{frequency, Fft2};

const NYQUIST: f64 = 0.5;
const TAPER_START: f64 = 0.95 * NYQUIST;
const CACHE_MAGIC: &[u8; 5] = b"CAKE1";

#[derive(Debug, Clone)]
pub struct WaveletBank {
    n: usize,
    k: usize,
    bw: usize,
    /// Fourier-domain filters laid out `[k, row_freq, col_freq]`.
    filters: Array3<Complex64>,
    pou_residual: f64,
}

/// Centered cardinal B-spline of degree `degree`, supported on
/// `[-(degree + 1) / 2, (degree + 1) / 2]`.
pub fn bspline(degree: usize, x: f64) -> f64 {
    let half = (degree + 1) as f64 / 2.0;
    if x.abs() >= half {
        return 0.0;
    }
    let shifted = x + half;
    let mut binom = 1.0;
    let mut acc = 0.0;
    let mut factorial = 1.0;
    for d in 2..=degree {
        factorial *= d as f64;
    }
    for j in 0..=degree + 1 {
        let t = shifted - j as f64;
        if t > 0.0 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * t.powi(degree as i32);
        }
        binom = binom * (degree + 1 - j) as f64 / (j + 1) as f64;
    }
    acc / factorial
}

/// Periodic angular weight of wedge `k` at orientation coordinate `x`
/// (in units of `pi / K`, period `K`).
fn wedge_weight(degree: usize, k_count: usize, k: usize, x: f64) -> f64 {
    let half = (degree + 1) as f64 / 2.0;
    let period = k_count as f64;
    let mut u = (x - k as f64).rem_euclid(period);
    // walk back to the leftmost periodic image still inside the support
    while u - period > -half {
        u -= period;
    }
    while u < -half {
        u += period;
    }
    let mut w = 0.0;
    while u < half {
        w += bspline(degree, u);
        u += period;
    }
    w
}

fn taper(rho: f64) -> f64 {
    if rho <= TAPER_START {
        1.0
    } else if rho >= NYQUIST {
        0.0
    } else {
        0.5 * (1.0 + (PI * (rho - TAPER_START) / (NYQUIST - TAPER_START)).cos())
    }
}

/// Max-norm of the frequency, so the taper only touches the band next to
/// the Nyquist rows and columns and keeps the spectrum corners.
fn radius(row: usize, col: usize, n: usize) -> f64 {
    frequency(row, n).abs().max(frequency(col, n).abs())
}

fn retained(row: usize, col: usize, n: usize) -> bool {
    radius(row, col, n) <= TAPER_START
}

impl WaveletBank {
    pub fn build(n: usize, k: usize, bw: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::param("N", format!("must be even and >= 8, got {n}")));
        }
        if k < 2 {
            return Err(Error::param("K", format!("must be >= 2, got {k}")));
        }
        if bw < 1 {
            return Err(Error::param("bw", "must be >= 1"));
        }
        let dtheta = PI / k as f64;
        let mut filters = Array3::<Complex64>::zeros((k, n, n));
        for row in 0..n {
            for col in 0..n {
                let (fy, fx) = (frequency(row, n), frequency(col, n));
                if row == 0 && col == 0 {
                    for kk in 0..k {
                        filters[[kk, 0, 0]] = Complex64::new(1.0 / k as f64, 0.0);
                    }
                    continue;
                }
                let gain = taper(radius(row, col, n));
                if gain == 0.0 {
                    continue;
                }
                // structures along theta have their spectrum along theta + pi/2
                let orientation = (fy.atan2(fx) - PI / 2.0).rem_euclid(PI);
                let x = orientation / dtheta;
                for kk in 0..k {
                    let w = wedge_weight(bw, k, kk, x);
                    filters[[kk, row, col]] = Complex64::new(gain * w, 0.0);
                }
            }
        }
        Ok(Self::from_filters(bw, filters))
    }

    /// All-pass bank with a single orientation.
    pub fn identity(n: usize) -> Self {
        let filters = Array3::from_elem((1, n, n), Complex64::new(1.0, 0.0));
        Self::from_filters(0, filters)
    }

    /// Wraps arbitrary Fourier-domain filters `[k, row_freq, col_freq]` and
    /// measures their partition-of-unity residual.
    pub fn from_filters(bw: usize, filters: Array3<Complex64>) -> Self {
        let (k, n, _) = filters.dim();
        let mut bank = WaveletBank {
            n,
            k,
            bw,
            filters,
            pou_residual: 0.0,
        };
        bank.pou_residual = pou_check(&bank);
        bank
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn orientations(&self) -> usize {
        self.k
    }

    pub fn bw(&self) -> usize {
        self.bw
    }

    pub fn pou_residual(&self) -> f64 {
        self.pou_residual
    }

    pub fn filters(&self) -> &Array3<Complex64> {
        &self.filters
    }

    pub fn into_filters(self) -> Array3<Complex64> {
        self.filters
    }

    /// Writes the bank as `CAKE1`, then `N`, `K`, `bw` as little-endian u64,
    /// the residual as f64, then every filter value as (re, im) f64 pairs.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(48 + 16 * self.filters.len());
        buf.extend_from_slice(CACHE_MAGIC);
        for v in [self.n, self.k, self.bw] {
            buf.extend_from_slice(&(v as u64).to_le_bytes());
        }
        buf.extend_from_slice(&self.pou_residual.to_le_bytes());
        for c in self.filters.iter() {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Format {
            what: "cake bank cache",
            reason: reason.to_string(),
        };
        if bytes.len() < 37 || &bytes[..5] != CACHE_MAGIC {
            return Err(bad("missing CAKE1 header"));
        }
        let word = |i: usize| {
            let start = 5 + 8 * i;
            <[u8; 8]>::try_from(&bytes[start..start + 8]).unwrap()
        };
        let n = u64::from_le_bytes(word(0)) as usize;
        let k = u64::from_le_bytes(word(1)) as usize;
        let bw = u64::from_le_bytes(word(2)) as usize;
        let pou_residual = f64::from_le_bytes(word(3));
        let body = &bytes[37..];
        if body.len() != 16 * k * n * n {
            return Err(bad("payload length does not match header"));
        }
        let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let filters = Array3::from_shape_simple_fn((k, n, n), || {
            let re = vals.next().unwrap();
            let im = vals.next().unwrap();
            Complex64::new(re, im)
        });
        Ok(WaveletBank {
            n,
            k,
            bw,
            filters,
            pou_residual,
        })
    }

    /// Loads a cached bank when its key matches, otherwise builds and caches it.
    pub fn load_or_build(path: impl AsRef<Path>, n: usize, k: usize, bw: usize) -> Result<Self> {
        let path = path.as_ref();
        if let Ok(bank) = Self::load(path) {
            if (bank.n, bank.k, bank.bw) == (n, k, bw) {
                return Ok(bank);
            }
        }
        let bank = Self::build(n, k, bw)?;
        bank.save(path)?;
        Ok(bank)
    }
}

/// Max over retained frequencies of `|sum_k psi_k - 1|`.
pub fn pou_check(bank: &WaveletBank) -> f64 {
    let n = bank.n;
    let total = bank.filters.sum_axis(Axis(0));
    let mut worst = 0.0f64;
    for row in 0..n {
        for col in 0..n {
            if retained(row, col, n) {
                worst = worst.max((total[[row, col]] - 1.0).norm());
            }
        }
    }
    worst
}

/// Correlates `f` with every wavelet via the convolution theorem and keeps
/// the real part.
pub fn lift(f: &Image, bank: &WaveletBank) -> Result<CorticalStack> {
    let n = f.size();
    if n != bank.n {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} image", bank.n, bank.n),
            got: format!("{n}x{n}"),
        });
    }
    let fft = Fft2::new(n);
    let mut spectrum: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut spectrum);

    let slices: Vec<Array2<f64>> = (0..bank.k)
        .into_par_iter()
        .map(|k| {
            let psi = bank.filters.index_axis(Axis(0), k);
            let mut buf: Vec<Complex64> = spectrum
                .iter()
                .zip(psi.iter())
                .map(|(s, p)| s * p)
                .collect();
            fft.inverse(&mut buf);
            Array2::from_shape_vec((n, n), buf.into_iter().map(|c| c.re).collect()).unwrap()
        })
        .collect();

    let mut values = Array3::zeros((bank.k, n, n));
    for (k, s) in slices.into_iter().enumerate() {
        values.index_axis_mut(Axis(0), k).assign(&s.view());
    }
    Ok(CorticalStack::from_array_unchecked(values))
}
