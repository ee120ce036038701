//! Wilson-Cowan and LHE dynamics driven by the sub-Riemannian heat kernel.

mod energy;
mod gd;
mod interaction;
mod local_mean;
mod poly;
mod sigmoid;

pub use energy::lhe_energy;
pub use gd::{
    drift, gd_step, run_model, run_model_with, EvolutionState, Interaction, RunOptions,
    RunOutcome, TraceRow,
};
pub use interaction::{filtered_powers, lhe_interaction, wc_interaction};
pub use local_mean::{gaussian_taps, local_mean};
pub use poly::{expand_coefficients, expand_with, fit_polynomial, PolyCoeffs, MAX_DEGREE};
pub use sigmoid::{sigmoid, sigmoid_hat};

pub(crate) use poly::check_degree;
