use ndarray::Zip;

use super::energy::lhe_energy;
use super::interaction::{lhe_interaction, wc_interaction};
use super::local_mean::local_mean;
use super::poly::{fit_polynomial, PolyCoeffs};
use crate::cake::{lift, WaveletBank};
use crate::config::{Forcing, Model, ModelConfig};
use crate::cortical::{project, relative_change, CorticalStack, Image};
use crate::error::{Error, Result};
use crate::heat::{HeatOperator, HeatPropagator};

/// Iteration state of the gradient descent.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    /// Current activation `A_p`.
    pub a: CorticalStack,
    /// Lifted stimulus `A_0`.
    pub a0: CorticalStack,
    /// Local mean `U`.
    pub mu: CorticalStack,
    pub p: usize,
    pub last_change: f64,
}

impl EvolutionState {
    pub fn new(a0: CorticalStack, mu: CorticalStack) -> Result<Self> {
        a0.check_same_shape(&mu)?;
        Ok(EvolutionState {
            a: a0.clone(),
            a0,
            mu,
            p: 0,
            last_change: f64::INFINITY,
        })
    }
}

/// Right-hand side `-(1+lambda) a + forcing + s/(2M) * interaction`.
pub fn drift(
    state: &EvolutionState,
    cfg: &ModelConfig,
    interaction: &CorticalStack,
) -> Result<CorticalStack> {
    state.a.check_same_shape(interaction)?;
    let (w0, wmu) = match cfg.forcing {
        Forcing::Continuous => (cfg.lambda, 1.0),
        Forcing::DiscretePaper => (1.0, cfg.lambda),
    };
    let decay = 1.0 + cfg.lambda;
    let gain = cfg.sigma_sign.factor() / (2.0 * cfg.m);
    let mut out = state.a.values().clone();
    Zip::from(&mut out)
        .and(state.a0.values())
        .and(state.mu.values())
        .and(interaction.values())
        .for_each(|a, &a0, &mu, &s| *a = -decay * *a + w0 * a0 + wmu * mu + gain * s);
    Ok(CorticalStack::from_array_unchecked(out))
}

/// One explicit gradient-descent update `A_p = A_{p-1} + dt * drift`.
pub fn gd_step(
    state: &EvolutionState,
    cfg: &ModelConfig,
    interaction: &CorticalStack,
) -> Result<CorticalStack> {
    let d = drift(state, cfg, interaction)?;
    state.a.scaled_add(cfg.dt, &d)
}

/// Evaluates the model's interaction term at `a`.
#[derive(Debug, Clone)]
pub struct Interaction {
    model: Model,
    alpha: f64,
    poly: Option<PolyCoeffs>,
}

impl Interaction {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        let poly = match cfg.model {
            Model::Wc => None,
            Model::Lhe => Some(fit_polynomial(cfg.alpha, cfg.poly_degree)?),
        };
        Ok(Interaction {
            model: cfg.model,
            alpha: cfg.alpha,
            poly,
        })
    }

    pub fn poly(&self) -> Option<&PolyCoeffs> {
        self.poly.as_ref()
    }

    pub fn eval(&self, a: &CorticalStack, heat: &HeatOperator) -> Result<CorticalStack> {
        match (&self.model, &self.poly) {
            (Model::Wc, _) => wc_interaction(a, heat, self.alpha),
            (Model::Lhe, Some(c)) => lhe_interaction(a, heat, c),
            (Model::Lhe, None) => unreachable!("LHE interaction without coefficients"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub p: usize,
    pub relative_change: f64,
    /// LHE energy after the step, when requested.
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Evaluate the LHE energy at every iterate (extra heat filterings).
    pub trace_energy: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub image: Image,
    pub stack: CorticalStack,
    pub iterations: usize,
    pub converged: bool,
    pub final_change: f64,
    /// Energy of the initial state, when traced.
    pub initial_energy: Option<f64>,
    pub trace: Vec<TraceRow>,
}

/// Lift, evolve to the stopping criterion (or `max_iters`), project.
pub fn run_model(
    f0: &Image,
    cfg: &ModelConfig,
    bank: &WaveletBank,
    prop: &HeatPropagator,
) -> Result<RunOutcome> {
    let heat = prop.operator(cfg.tau)?;
    run_model_with(f0, cfg, bank, &heat, RunOptions::default())
}

pub fn run_model_with(
    f0: &Image,
    cfg: &ModelConfig,
    bank: &WaveletBank,
    heat: &HeatOperator,
    opts: RunOptions,
) -> Result<RunOutcome> {
    cfg.validate()?;
    if heat.dim() != (bank.size(), bank.orientations()) {
        return Err(Error::ShapeMismatch {
            expected: format!("heat operator for N={}, K={}", bank.size(), bank.orientations()),
            got: format!("N={}, K={}", heat.dim().0, heat.dim().1),
        });
    }
    if (heat.tau() - cfg.tau).abs() > 1e-12 * cfg.tau.max(1.0) {
        return Err(Error::param("tau", "heat operator was built for a different inner time"));
    }
    let a0 = lift(f0, bank)?;
    let mu = local_mean(&a0, cfg.sigma_mu)?;
    let mut state = EvolutionState::new(a0, mu)?;
    let interaction = Interaction::new(cfg)?;
    let energy_of = |a: &CorticalStack, state: &EvolutionState| -> Result<Option<f64>> {
        match (opts.trace_energy, interaction.poly()) {
            (true, Some(c)) => Ok(Some(lhe_energy(a, &state.a0, &state.mu, cfg, heat, c)?)),
            _ => Ok(None),
        }
    };
    let initial_energy = energy_of(&state.a, &state)?;

    let mut trace = Vec::new();
    let mut converged = false;
    while state.p < cfg.max_iters {
        let s = interaction.eval(&state.a, heat)?;
        let next = gd_step(&state, cfg, &s)?;
        let change = relative_change(&next, &state.a)?;
        if !change.is_finite() && next.norm() != 0.0 {
            return Err(Error::param("dt", "iteration diverged to non-finite values"));
        }
        state.a = next;
        state.p += 1;
        state.last_change = change;
        trace.push(TraceRow {
            p: state.p,
            relative_change: change,
            energy: energy_of(&state.a, &state)?,
        });
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(RunOutcome {
        image: project(&state.a),
        iterations: state.p,
        converged,
        final_change: state.last_change,
        initial_energy,
        trace,
        stack: state.a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(n: usize, k: usize) -> EvolutionState {
        let a0 = CorticalStack::from_fn(n, k, |i, j, kk| ((i + j + kk) % 3) as f64 * 0.1);
        let mu = CorticalStack::from_fn(n, k, |i, _, _| i as f64 * 0.01);
        EvolutionState::new(a0, mu).unwrap()
    }

    #[test]
    fn fixed_point_is_stationary() {
        let cfg = ModelConfig::lhe_gratings();
        let mut st = state(4, 2);
        let target = st
            .a0
            .map(|v| v * cfg.lambda)
            .scaled_add(1.0, &st.mu)
            .unwrap()
            .map(|v| v / (1.0 + cfg.lambda));
        st.a = target.clone();
        let zero = CorticalStack::zeros(4, 2);
        let next = gd_step(&st, &cfg, &zero).unwrap();
        assert!(next.max_abs_diff(&target).unwrap() < 1e-15);
    }

    #[test]
    fn zero_step_changes_nothing() {
        let cfg = ModelConfig {
            dt: 0.0,
            ..ModelConfig::lhe_gratings()
        };
        let st = state(4, 2);
        let s = CorticalStack::filled(4, 2, 0.3);
        assert_eq!(gd_step(&st, &cfg, &s).unwrap(), st.a);
    }

    #[test]
    fn pure_decay() {
        let cfg = ModelConfig {
            lambda: 0.0,
            dt: 0.2,
            ..ModelConfig::lhe_gratings()
        };
        let mut st = state(4, 2);
        st.mu = CorticalStack::zeros(4, 2);
        st.a = CorticalStack::filled(4, 2, 1.5);
        let next = gd_step(&st, &cfg, &CorticalStack::zeros(4, 2)).unwrap();
        assert!(next.values().iter().all(|&v| (v - 1.2).abs() < 1e-15));
    }

    #[test]
    fn discrete_forcing_swaps_weights() {
        let cfg = ModelConfig {
            forcing: Forcing::DiscretePaper,
            lambda: 0.5,
            dt: 0.1,
            ..ModelConfig::lhe_gratings()
        };
        let mut st = state(3, 1);
        st.a = CorticalStack::zeros(3, 1);
        st.a0 = CorticalStack::filled(3, 1, 1.0);
        st.mu = CorticalStack::filled(3, 1, 2.0);
        let next = gd_step(&st, &cfg, &CorticalStack::zeros(3, 1)).unwrap();
        // dt * (a0 + lambda * mu) = 0.1 * 2
        assert!(next.values().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }
}
