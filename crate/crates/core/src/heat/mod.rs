//! Sub-Riemannian heat semigroup `exp(tau L)`, `L = X1^2 + beta^2 X2^2`.
//!
//! The spatial derivative along `X1 = cos(theta) d/dx + sin(theta) d/dy` is a
//! central difference with spacing `h`. After a 2D DFT in `(row, col)` every
//! spatial mode `(r, s)` evolves independently under the `K x K` generator
//!
//! ```text
//! B_rs = Lambda_K - diag_k(d[r, s, k]^2) / h^2
//! d[r, s, k] = cos(theta_k) sin(2 pi r / N) + sin(theta_k) sin(2 pi s / N)
//! ```
//!
//! where `r` is the column (x) frequency, `s` the row (y) frequency and
//! `Lambda_K` the periodic second difference in `theta` scaled by
//! `beta^2 / dtheta^2`. Time stepping is Crank-Nicolson, whose implicit half
//! is a cyclic tridiagonal solve.

mod tridiag;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

pub use tridiag::{cyclic_tridiagonal_mul, solve_cyclic_tridiagonal, CyclicFactor};

use crate::cortical::CorticalStack;
use crate::error::{Error, Result};
use crate::fft::Fft2;

/// `(Lambda g)[k] = beta^2 (g[k-1] - 2 g[k] + g[k+1]) / dtheta^2`, periodic in `k`.
pub fn angular_second_difference(g: &[f64], beta: f64, dtheta: f64) -> Vec<f64> {
    let k = g.len();
    let c = beta * beta / (dtheta * dtheta);
    (0..k)
        .map(|i| c * (g[(i + k - 1) % k] - 2.0 * g[i] + g[(i + 1) % k]))
        .collect()
}

/// Spectral symbol of the discrete `X1` at column frequency `r`, row
/// frequency `s` and orientation `k` (all zero-based). Multiply by `i / h`
/// to obtain the Fourier multiplier of the central difference.
pub fn spectral_symbol(r: usize, s: usize, k: usize, n: usize, k_count: usize) -> f64 {
    let theta = k as f64 * PI / k_count as f64;
    let w = 2.0 * PI / n as f64;
    theta.cos() * (w * r as f64).sin() + theta.sin() * (w * s as f64).sin()
}

/// Number of heat steps `m` with `tau = m * dtau`.
pub fn step_count(tau: f64, dtau: f64) -> Result<usize> {
    if !(dtau > 0.0) || !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::NotMultipleOfStep { tau, dtau });
    }
    let m = (tau / dtau).round();
    if (m * dtau - tau).abs() > 1e-9 * tau.max(dtau) {
        return Err(Error::NotMultipleOfStep { tau, dtau });
    }
    Ok(m as usize)
}

/// `sin(2 pi r / n)` with the symmetries `r -> n - r` and `r -> n/2 - r`
/// holding bit-for-bit, so modes that share a generator share it exactly.
fn symmetric_sines(n: usize) -> Vec<f64> {
    (0..n)
        .map(|r| {
            let (sign, mut q) = if 2 * r <= n { (1.0, r) } else { (-1.0, n - r) };
            if n % 2 == 0 && 4 * q > n {
                q = n / 2 - q;
            }
            let v = sign * (2.0 * PI * q as f64 / n as f64).sin();
            v + 0.0
        })
        .collect()
}

/// Per-mode Crank-Nicolson data for the sub-Riemannian heat equation.
#[derive(Debug, Clone)]
pub struct HeatPropagator {
    n: usize,
    k: usize,
    beta: f64,
    dtau: f64,
    h: f64,
    /// Angular coupling `beta^2 / dtheta^2`.
    coupling: f64,
    /// Unique-generator index of each mode, row-major `[s * n + r]`.
    mode_class: Arc<Vec<u32>>,
    /// Diagonal of `B` for each unique generator.
    class_diag: Vec<Vec<f64>>,
    fft: Fft2,
}

impl HeatPropagator {
    pub fn build(n: usize, k: usize, beta: f64, dtau: f64, h: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N", "must be >= 1"));
        }
        if k == 0 {
            return Err(Error::param("K", "must be >= 1"));
        }
        for (name, v) in [("beta", beta), ("dtau", dtau), ("h", h)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        let dtheta = PI / k as f64;
        let coupling = if k == 1 { 0.0 } else { beta * beta / (dtheta * dtheta) };
        let sines = symmetric_sines(n);
        let (cos_t, sin_t): (Vec<f64>, Vec<f64>) = (0..k)
            .map(|kk| {
                let t = kk as f64 * dtheta;
                (t.cos(), t.sin())
            })
            .unzip();

        let mut classes: HashMap<(u64, u64), u32> = HashMap::new();
        let mut class_diag = Vec::new();
        let mut mode_class = Vec::with_capacity(n * n);
        for s in 0..n {
            for r in 0..n {
                let (mut sx, mut sy) = (sines[r], sines[s]);
                // d^2 is invariant under joint negation of both sines
                if sx < 0.0 || (sx == 0.0 && sy < 0.0) {
                    sx = -sx + 0.0;
                    sy = -sy + 0.0;
                }
                let key = (sx.to_bits(), sy.to_bits());
                let id = *classes.entry(key).or_insert_with(|| {
                    let diag = (0..k)
                        .map(|kk| {
                            let d = cos_t[kk] * sx + sin_t[kk] * sy;
                            -2.0 * coupling - d * d / (h * h)
                        })
                        .collect();
                    class_diag.push(diag);
                    (class_diag.len() - 1) as u32
                });
                mode_class.push(id);
            }
        }
        Ok(HeatPropagator {
            n,
            k,
            beta,
            dtau,
            h,
            coupling,
            mode_class: Arc::new(mode_class),
            class_diag,
            fft: Fft2::new(n),
        })
    }

    /// Builds the propagator for an `n x n x k` grid from a model config.
    pub fn for_config(n: usize, k: usize, cfg: &crate::config::ModelConfig) -> Result<Self> {
        Self::build(n, k, cfg.beta_for(n, k), cfg.dtau, cfg.h_for(n))
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn orientations(&self) -> usize {
        self.k
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Number of distinct per-mode generators after symmetry reduction.
    pub fn distinct_generators(&self) -> usize {
        self.class_diag.len()
    }

    fn generator_parts(&self, r: usize, s: usize) -> (&[f64], Vec<f64>, f64) {
        let diag = &self.class_diag[self.mode_class[s * self.n + r] as usize];
        let (off, corner) = match self.k {
            1 => (vec![], 0.0),
            _ => (vec![self.coupling; self.k - 1], self.coupling),
        };
        (diag, off, corner)
    }

    /// Dense `B_rs` for column frequency `r` and row frequency `s`.
    pub fn generator_matrix(&self, r: usize, s: usize) -> Array2<f64> {
        let (diag, off, corner) = self.generator_parts(r, s);
        dense_cyclic(diag, &off, corner)
    }

    /// Dense Crank-Nicolson one-step map `M_-^{-1} M_+` for mode `(r, s)`.
    pub fn step_matrix(&self, r: usize, s: usize) -> Result<Array2<f64>> {
        let class = self.mode_class[s * self.n + r] as usize;
        let stepper = self.stepper(class)?;
        Ok(stepper.dense())
    }

    fn stepper(&self, class: usize) -> Result<CnStepper> {
        let diag = &self.class_diag[class];
        let half = 0.5 * self.dtau;
        let plus: Vec<f64> = diag.iter().map(|d| 1.0 + half * d).collect();
        let minus: Vec<f64> = diag.iter().map(|d| 1.0 - half * d).collect();
        let k = self.k;
        let (off, corner) = if k == 1 {
            (0.0, 0.0)
        } else {
            (self.coupling, self.coupling)
        };
        let factor = CyclicFactor::new(&minus, &vec![-half * off; k - 1], -half * corner)?;
        Ok(CnStepper {
            plus,
            off_plus: half * off,
            corner_plus: half * corner,
            factor,
        })
    }

    /// Applies `m = tau / dtau` Crank-Nicolson steps per spatial mode.
    pub fn evolve(&self, a: &CorticalStack, tau: f64) -> Result<CorticalStack> {
        self.check_stack(a)?;
        let steps = step_count(tau, self.dtau)?;
        if steps == 0 {
            return Ok(a.clone());
        }
        let steppers = self
            .class_diag
            .par_iter()
            .enumerate()
            .map(|(c, _)| self.stepper(c))
            .collect::<Result<Vec<_>>>()?;
        let k = self.k;
        Ok(self.spectral_map(a, |mode, v| {
            let stepper = &steppers[self.mode_class[mode] as usize];
            let mut re: Vec<f64> = v.iter().map(|c| c.re).collect();
            let mut im: Vec<f64> = v.iter().map(|c| c.im).collect();
            let mut tmp = vec![0.0; k];
            for _ in 0..steps {
                stepper.step(&mut re, &mut tmp);
                stepper.step(&mut im, &mut tmp);
            }
            for (c, (x, y)) in v.iter_mut().zip(re.into_iter().zip(im)) {
                *c = Complex64::new(x, y);
            }
        }))
    }

    /// Precomputes `exp_tau` as one dense `K x K` matrix per distinct mode
    /// generator, equal to `m` Crank-Nicolson steps.
    pub fn operator(&self, tau: f64) -> Result<HeatOperator> {
        let steps = step_count(tau, self.dtau)?;
        let mats = self
            .class_diag
            .par_iter()
            .enumerate()
            .map(|(c, _)| {
                let one = self.stepper(c)?.dense();
                Ok(matrix_power(&one, steps))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HeatOperator {
            n: self.n,
            k: self.k,
            steps,
            tau,
            mode_class: Arc::clone(&self.mode_class),
            mats,
            fft: self.fft.clone(),
        })
    }

    fn check_stack(&self, a: &CorticalStack) -> Result<()> {
        if a.dim() != (self.n, self.k) {
            return Err(Error::ShapeMismatch {
                expected: format!("N={}, K={}", self.n, self.k),
                got: format!("N={}, K={}", a.size(), a.orientations()),
            });
        }
        Ok(())
    }

    fn spectral_map<F>(&self, a: &CorticalStack, per_mode: F) -> CorticalStack
    where
        F: Fn(usize, &mut [Complex64]) + Sync,
    {
        spectral_map(&self.fft, self.n, self.k, a, per_mode)
    }
}

/// `exp_tau` frozen for one inner time, applied with one dense product per mode.
#[derive(Debug, Clone)]
pub struct HeatOperator {
    n: usize,
    k: usize,
    steps: usize,
    tau: f64,
    mode_class: Arc<Vec<u32>>,
    mats: Vec<Array2<f64>>,
    fft: Fft2,
}

impl HeatOperator {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.n, self.k)
    }

    pub fn apply(&self, a: &CorticalStack) -> Result<CorticalStack> {
        if a.dim() != (self.n, self.k) {
            return Err(Error::ShapeMismatch {
                expected: format!("N={}, K={}", self.n, self.k),
                got: format!("N={}, K={}", a.size(), a.orientations()),
            });
        }
        if self.steps == 0 {
            return Ok(a.clone());
        }
        let k = self.k;
        Ok(spectral_map(&self.fft, self.n, k, a, |mode, v| {
            let p = &self.mats[self.mode_class[mode] as usize];
            let input: Vec<Complex64> = v.to_vec();
            for (row, out) in v.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (w, x) in p.row(row).iter().zip(&input) {
                    acc += x * *w;
                }
                *out = acc;
            }
        }))
    }
}

struct CnStepper {
    plus: Vec<f64>,
    off_plus: f64,
    corner_plus: f64,
    factor: CyclicFactor,
}

impl CnStepper {
    fn step(&self, x: &mut [f64], tmp: &mut [f64]) {
        let k = x.len();
        for i in 0..k {
            tmp[i] = self.plus[i] * x[i];
        }
        if k >= 2 {
            for i in 0..k - 1 {
                tmp[i] += self.off_plus * x[i + 1];
                tmp[i + 1] += self.off_plus * x[i];
            }
            tmp[0] += self.corner_plus * x[k - 1];
            tmp[k - 1] += self.corner_plus * x[0];
        }
        x.copy_from_slice(tmp);
        self.factor.solve_in_place(x);
    }

    fn dense(&self) -> Array2<f64> {
        let k = self.plus.len();
        let mut out = Array2::zeros((k, k));
        let mut col = vec![0.0; k];
        let mut tmp = vec![0.0; k];
        for j in 0..k {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.step(&mut col, &mut tmp);
            out.column_mut(j).assign(&ndarray::ArrayView1::from(&col[..]));
        }
        out
    }
}

fn dense_cyclic(diag: &[f64], off: &[f64], corner: f64) -> Array2<f64> {
    let k = diag.len();
    let mut m = Array2::zeros((k, k));
    for i in 0..k {
        m[[i, i]] += diag[i];
    }
    for (i, &o) in off.iter().enumerate() {
        m[[i, i + 1]] += o;
        m[[i + 1, i]] += o;
    }
    if k >= 2 {
        m[[0, k - 1]] += corner;
        m[[k - 1, 0]] += corner;
    }
    m
}

fn matrix_power(base: &Array2<f64>, mut exp: usize) -> Array2<f64> {
    let k = base.nrows();
    let mut result = Array2::eye(k);
    let mut square = base.clone();
    let mut first = true;
    while exp > 0 {
        if exp & 1 == 1 {
            result = if first { square.clone() } else { result.dot(&square) };
            first = false;
        }
        exp >>= 1;
        if exp > 0 {
            square = square.dot(&square);
        }
    }
    result
}

/// Forward DFT of each orientation slice, `per_mode` on every length-`K`
/// spectral vector (mode index `s * n + r`), inverse DFT, real part.
fn spectral_map<F>(fft: &Fft2, n: usize, k: usize, a: &CorticalStack, per_mode: F) -> CorticalStack
where
    F: Fn(usize, &mut [Complex64]) + Sync,
{
    let nn = n * n;
    let slices: Vec<Vec<Complex64>> = (0..k)
        .into_par_iter()
        .map(|kk| {
            let slice = a.values().index_axis(Axis(0), kk);
            let mut buf: Vec<Complex64> = slice.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.forward(&mut buf);
            buf
        })
        .collect();

    let mut modes = vec![Complex64::default(); nn * k];
    for (kk, slice) in slices.iter().enumerate() {
        for (m, v) in slice.iter().enumerate() {
            modes[m * k + kk] = *v;
        }
    }
    modes
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(m, v)| per_mode(m, v));

    let out: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|kk| {
            let mut buf: Vec<Complex64> = (0..nn).map(|m| modes[m * k + kk]).collect();
            fft.inverse(&mut buf);
            buf.into_iter().map(|c| c.re).collect()
        })
        .collect();
    let flat: Vec<f64> = out.into_iter().flatten().collect();
    CorticalStack::from_array_unchecked(Array3::from_shape_vec((k, n, n), flat).unwrap())
}

/// `exp(tau L) a` through explicit Crank-Nicolson stepping.
pub fn heat_evolve(a: &CorticalStack, prop: &HeatPropagator, tau: f64) -> Result<CorticalStack> {
    prop.evolve(a, tau)
}

/// Column of the discrete heat kernel: the evolution of a unit delta at `(i, j, k)`.
pub fn kernel_column(
    prop: &HeatPropagator,
    i: usize,
    j: usize,
    k: usize,
    tau: f64,
) -> Result<CorticalStack> {
    let delta = CorticalStack::delta(prop.n, prop.k, i, j, k)?;
    prop.evolve(&delta, tau)
}
