//! Cortical models of orientation-dependent visual illusions.
//!
//! Images are lifted to positions x orientations with a cake-wavelet bank,
//! evolved by a Wilson-Cowan or local-histogram-equalization gradient flow
//! whose lateral interaction is the sub-Riemannian heat kernel, and projected
//! back to the image plane. Poggendorff stimuli and a completion-offset probe
//! are included for running the illusion experiments.

pub mod cake;
pub mod config;
pub mod cortical;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod heat;
pub mod pgm;
pub mod stimuli;

pub use cake::{lift, pou_check, WaveletBank};
pub use config::{Forcing, Model, ModelConfig, SigmaSign};
pub use cortical::{project, relative_change, renormalize, CorticalStack, Image};
pub use error::{Error, Result};
pub use heat::{heat_evolve, kernel_column, HeatOperator, HeatPropagator};
pub use dynamics::{run_model, run_model_with, RunOptions, RunOutcome};
pub use experiment::{measure_offset, run_experiment, ExperimentConfig, Offset, Report, Source, Sweep};
pub use stimuli::{poggendorff_classic, poggendorff_gratings, StimulusSpec};
