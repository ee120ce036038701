//! Odd polynomial surrogate for `sigma_hat` and its expansion by powers of
//! the far-end activation.
//!
//! Writing `p(a(x) - a(y)) = sum_i C_i(x) a(y)^i` turns the contrast
//! nonlinearity into `n + 1` linear filterings of the powers `a^i`.

use nalgebra::{DMatrix, DVector};
use ndarray::Zip;

use super::sigmoid::sigmoid_hat;
use crate::cortical::CorticalStack;
use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 15;
const FIT_SAMPLES: usize = 2001;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyCoeffs {
    alpha: f64,
    /// `c_0 ..= c_n`; even entries are zero.
    coeffs: Vec<f64>,
    /// Max `|p(r) - sigma_hat(r)|` over the fit samples.
    sup_error: f64,
}

pub(crate) fn check_degree(n: usize) -> Result<()> {
    if n % 2 == 0 || n == 0 {
        return Err(Error::param("poly_degree", format!("must be odd, got {n}")));
    }
    if n > MAX_DEGREE {
        return Err(Error::IllConditioned(format!(
            "degree {n} exceeds the cap of {MAX_DEGREE}"
        )));
    }
    Ok(())
}

impl PolyCoeffs {
    /// Wraps explicit coefficients `c_0 ..= c_n`.
    pub fn from_coeffs(alpha: f64, coeffs: Vec<f64>) -> Self {
        let mut p = PolyCoeffs {
            alpha,
            coeffs,
            sup_error: 0.0,
        };
        p.sup_error = samples().map(|r| (p.eval(r) - sigmoid_hat(r, alpha)).abs()).fold(0.0, f64::max);
        p
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn sup_error(&self) -> f64 {
        self.sup_error
    }

    pub fn eval(&self, r: f64) -> f64 {
        horner(&self.coeffs, r)
    }

    /// Coefficients of the even primitive `S` with `S' = p` and `S(0) = 0`.
    pub fn primitive(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.coeffs.len() + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            out[j + 1] = c / (j + 1) as f64;
        }
        out
    }
}

pub(crate) fn horner(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
}

fn samples() -> impl Iterator<Item = f64> {
    (0..FIT_SAMPLES).map(|i| -1.0 + 2.0 * i as f64 / (FIT_SAMPLES - 1) as f64)
}

/// Least-squares fit of `sigma_hat` on `[-1, 1]` by odd monomials up to degree `n`.
pub fn fit_polynomial(alpha: f64, n: usize) -> Result<PolyCoeffs> {
    if !(alpha > 1.0) {
        return Err(Error::param("alpha", "must be > 1"));
    }
    check_degree(n)?;
    let powers: Vec<usize> = (1..=n).step_by(2).collect();
    let xs: Vec<f64> = samples().collect();
    let design = DMatrix::from_fn(xs.len(), powers.len(), |i, j| xs[i].powi(powers[j] as i32));
    let target = DVector::from_iterator(xs.len(), xs.iter().map(|&r| sigmoid_hat(r, alpha)));

    let svd = design.svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    if !(smin > smax * 1e-12) {
        return Err(Error::IllConditioned(format!(
            "condition number {:.3e} at degree {n}",
            smax / smin
        )));
    }
    let sol = svd
        .solve(&target, 0.0)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;

    let mut coeffs = vec![0.0; n + 1];
    for (p, c) in powers.iter().zip(sol.iter()) {
        coeffs[*p] = *c;
    }
    Ok(PolyCoeffs::from_coeffs(alpha, coeffs))
}

fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; n + 1]; n + 1];
    for j in 0..=n {
        t[j][0] = 1.0;
        for i in 1..=j {
            t[j][i] = t[j - 1][i - 1] + if i < j { t[j - 1][i] } else { 0.0 };
        }
    }
    t
}

/// `C_i(x) = (-1)^i sum_{j >= i} c_j binom(j, i) a(x)^(j - i)` for an arbitrary
/// coefficient list.
pub fn expand_with(a: &CorticalStack, coeffs: &[f64]) -> Vec<CorticalStack> {
    let n = coeffs.len() - 1;
    let binom = binomial_table(n);
    (0..=n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let local: Vec<f64> = (i..=n).map(|j| sign * coeffs[j] * binom[j][i]).collect();
            a.map(|v| horner(&local, v))
        })
        .collect()
}

/// Coefficient stacks `C_0 ..= C_n` of the expansion of `p(a(x) - a(y))`.
pub fn expand_coefficients(a: &CorticalStack, c: &PolyCoeffs) -> Vec<CorticalStack> {
    expand_with(a, &c.coeffs)
}

/// `sum_i C_i * powers_i`, voxelwise.
pub(crate) fn contract(cs: &[CorticalStack], powers: &[CorticalStack]) -> CorticalStack {
    let mut out = cs[0].values().clone();
    for (c, p) in cs.iter().zip(powers).skip(1) {
        Zip::from(&mut out)
            .and(c.values())
            .and(p.values())
            .for_each(|o, &ci, &pi| *o += ci * pi);
    }
    CorticalStack::from_array_unchecked(out)
}
