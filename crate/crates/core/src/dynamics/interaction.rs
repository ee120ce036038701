use super::poly::{contract, expand_coefficients, PolyCoeffs};
use super::sigmoid::sigmoid;
use crate::cortical::CorticalStack;
use crate::error::Result;
use crate::heat::HeatOperator;

/// `exp(tau L)[sigma(a)]`.
pub fn wc_interaction(a: &CorticalStack, heat: &HeatOperator, alpha: f64) -> Result<CorticalStack> {
    heat.apply(&a.map(|v| sigmoid(v, alpha)))
}

/// Heat-filtered powers `exp(tau L)[a^i]` for `i = 0..=n`; the zeroth power
/// is the constant one, which the semigroup leaves unchanged.
pub fn filtered_powers(a: &CorticalStack, heat: &HeatOperator, n: usize) -> Result<Vec<CorticalStack>> {
    let (size, k) = a.dim();
    let mut out = Vec::with_capacity(n + 1);
    out.push(CorticalStack::filled(size, k, 1.0));
    let mut power = a.clone();
    for i in 1..=n {
        if i > 1 {
            power = CorticalStack::from_array_unchecked(power.values() * a.values());
        }
        out.push(heat.apply(&power)?);
    }
    Ok(out)
}

/// `sum_i C_i(x) exp(tau L)[a^i](x)`, the polynomial surrogate of
/// `int k_tau(x, y) sigma_hat(a(x) - a(y)) dy`.
pub fn lhe_interaction(a: &CorticalStack, heat: &HeatOperator, c: &PolyCoeffs) -> Result<CorticalStack> {
    let cs = expand_coefficients(a, c);
    let powers = filtered_powers(a, heat, c.degree())?;
    Ok(contract(&cs, &powers))
}
