use ndarray::{Array2, Axis};

use crate::cortical::CorticalStack;
use crate::error::{Error, Result};

/// Normalized Gaussian taps for offsets `-R..=R`, `R = ceil(4 sigma)`.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|w| w / total).collect()
}

fn blur_rows(src: &Array2<f64>, taps: &[f64]) -> Array2<f64> {
    let (h, w) = src.dim();
    let radius = (taps.len() / 2) as i64;
    Array2::from_shape_fn((h, w), |(i, j)| {
        taps.iter()
            .enumerate()
            .map(|(t, wt)| {
                let jj = (j as i64 + t as i64 - radius).rem_euclid(w as i64) as usize;
                wt * src[[i, jj]]
            })
            .sum()
    })
}

/// Periodic 2D Gaussian blur of every orientation slice (std `sigma_mu` pixels).
pub fn local_mean(a0: &CorticalStack, sigma_mu: f64) -> Result<CorticalStack> {
    if !(sigma_mu.is_finite() && sigma_mu > 0.0) {
        return Err(Error::param("sigma_mu", "must be positive"));
    }
    let taps = gaussian_taps(sigma_mu);
    let mut out = a0.values().clone();
    for mut slice in out.axis_iter_mut(Axis(0)) {
        let horizontal = blur_rows(&slice.to_owned(), &taps);
        let vertical = blur_rows(&horizontal.t().to_owned(), &taps);
        slice.assign(&vertical.t());
    }
    Ok(CorticalStack::from_array_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_fixed() {
        let a = CorticalStack::filled(12, 3, 0.4);
        let m = local_mean(&a, 2.0).unwrap();
        assert!(m.max_abs_diff(&a).unwrap() < 1e-15);
    }

    #[test]
    fn mass_is_preserved() {
        let a = CorticalStack::from_fn(16, 2, |i, j, k| ((i * 7 + j * 3 + k) % 5) as f64);
        let m = local_mean(&a, 1.3).unwrap();
        for k in 0..2 {
            let before = a.slice(k).sum();
            let after = m.slice(k).sum();
            assert!((before - after).abs() < 1e-10 * before);
        }
    }

    #[test]
    fn delta_response_moments() {
        let n = 32;
        let sigma = 2.0;
        let a = CorticalStack::delta(n, 1, 16, 16, 0).unwrap();
        let m = local_mean(&a, sigma).unwrap();
        let taps = gaussian_taps(sigma);
        let peak = taps[taps.len() / 2].powi(2);
        assert!((m.get(16, 16, 0) - peak).abs() < 1e-15);
        let mut second = 0.0;
        for i in 0..n {
            for j in 0..n {
                let dx = j as f64 - 16.0;
                second += m.get(i, j, 0) * dx * dx;
            }
        }
        assert!((second - sigma * sigma).abs() < 0.05 * sigma * sigma, "{second}");
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(local_mean(&CorticalStack::zeros(4, 1), 0.0).is_err());
    }
}
