//! Piecewise-linear saturations used by the WC and LHE interaction terms.

/// `sigma(r) = -min(1, max(alpha (r - 1/2), -1))`: decreasing, values in `[-1, 1]`.
pub fn sigmoid(r: f64, alpha: f64) -> f64 {
    -(alpha * (r - 0.5)).clamp(-1.0, 1.0)
}

/// `sigma_hat(r) = -sigma(r + 1/2) = min(1, max(alpha r, -1))`: odd, increasing.
pub fn sigmoid_hat(r: f64, alpha: f64) -> f64 {
    (alpha * r).clamp(-1.0, 1.0)
}
