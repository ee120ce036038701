use ndarray::Zip;

use super::interaction::filtered_powers;
use super::poly::{expand_with, PolyCoeffs};
use crate::config::{Forcing, ModelConfig};
use crate::cortical::CorticalStack;
use crate::error::Result;
use crate::heat::HeatOperator;

fn sq_dist(a: &CorticalStack, b: &CorticalStack) -> f64 {
    Zip::from(a.values())
        .and(b.values())
        .fold(0.0, |acc, x, y| acc + (x - y) * (x - y))
}

/// Energy whose negative gradient is the sR-LHE drift:
///
/// ```text
/// E(a) = lambda/2 |a - a0|^2 + 1/2 |a - mu|^2 - s/(4M) sum_x sum_y k(x, y) S(a(x) - a(y))
/// ```
///
/// with `S` the even primitive of the fitted polynomial (`S(0) = 0`) and `s`
/// the sigma sign factor. With the discrete forcing variant the two fidelity
/// weights swap.
pub fn lhe_energy(
    a: &CorticalStack,
    a0: &CorticalStack,
    mu: &CorticalStack,
    cfg: &ModelConfig,
    heat: &HeatOperator,
    c: &PolyCoeffs,
) -> Result<f64> {
    a.check_same_shape(a0)?;
    a.check_same_shape(mu)?;
    let (w0, wmu) = match cfg.forcing {
        Forcing::Continuous => (cfg.lambda, 1.0),
        Forcing::DiscretePaper => (1.0, cfg.lambda),
    };
    let fidelity = 0.5 * w0 * sq_dist(a, a0) + 0.5 * wmu * sq_dist(a, mu);

    let primitive = c.primitive();
    let ds = expand_with(a, &primitive);
    let powers = filtered_powers(a, heat, primitive.len() - 1)?;
    let double_sum: f64 = ds
        .iter()
        .zip(&powers)
        .map(|(d, p)| Zip::from(d.values()).and(p.values()).fold(0.0, |acc, x, y| acc + x * y))
        .sum();
    let s = cfg.sigma_sign.factor();
    Ok(fidelity - s * double_sum / (4.0 * cfg.m))
}
