use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Wilson-Cowan: sigmoid on activity, then heat diffusion.
    Wc,
    /// Local histogram equalization: sigmoid on local contrast.
    Lhe,
}

/// Which constant forcing enters the gradient-descent update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Forcing {
    /// `lambda * a0 + mu`, as in the continuous equations.
    Continuous,
    /// `a0 + lambda * mu`, as printed in the discrete update.
    DiscretePaper,
}

/// Sign convention for the saturating nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaSign {
    /// `sigma(r) = -clamp(alpha (r - 1/2))`, decreasing.
    Paper,
    /// Opposite sign on the interaction nonlinearity.
    Flipped,
}

impl SigmaSign {
    pub fn factor(self) -> f64 {
        match self {
            SigmaSign::Paper => 1.0,
            SigmaSign::Flipped => -1.0,
        }
    }
}

macro_rules! enum_str {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::Format {
                        what: stringify!($ty),
                        reason: format!("unknown value `{other}`"),
                    }),
                }
            }
        }
    };
}

enum_str!(Model { Model::Wc => "wc", Model::Lhe => "lhe" });
enum_str!(Forcing { Forcing::Continuous => "continuous", Forcing::DiscretePaper => "discrete-paper" });
enum_str!(SigmaSign { SigmaSign::Paper => "paper", SigmaSign::Flipped => "flipped" });

/// All scalar parameters of one model run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: Model,
    /// Fidelity weight.
    pub lambda: f64,
    /// Sigmoid slope.
    pub alpha: f64,
    /// Standard deviation (pixels) of the local-mean blur.
    pub sigma_mu: f64,
    /// Interaction normalizer.
    pub m: f64,
    /// Spatial/angular coherency. `None` means `K / (N^2 sqrt 2)`.
    pub beta: Option<f64>,
    /// Grid spacing used in the spectral symbol. `None` means `1 / sqrt N`.
    pub h: Option<f64>,
    /// Gradient-descent step.
    pub dt: f64,
    /// Heat step.
    pub dtau: f64,
    /// Inner heat time (kernel width).
    pub tau: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Polynomial degree for the LHE contrast term.
    pub poly_degree: usize,
    pub forcing: Forcing,
    pub sigma_sign: SigmaSign,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: Model::Lhe,
            lambda: 2.0,
            alpha: 8.0,
            sigma_mu: 1.0,
            m: 1.0,
            beta: None,
            h: None,
            dt: 0.15,
            dtau: 0.01,
            tau: 5.0,
            tol: 1e-4,
            max_iters: 500,
            poly_degree: 9,
            forcing: Forcing::Continuous,
            sigma_sign: SigmaSign::Paper,
        }
    }
}

impl ModelConfig {
    /// sR-WC on the gratings (lambda 0.01, alpha 20, sigma_mu 6.5, dt 0.1, dtau 0.01, tau 5).
    pub fn wc_gratings() -> Self {
        ModelConfig {
            model: Model::Wc,
            lambda: 0.01,
            alpha: 20.0,
            sigma_mu: 6.5,
            dt: 0.1,
            dtau: 0.01,
            tau: 5.0,
            ..Default::default()
        }
    }

    /// sR-LHE on the gratings (alpha 8, tau 5, lambda 2, sigma_mu 1, dt 0.15, dtau 0.01).
    pub fn lhe_gratings() -> Self {
        ModelConfig {
            model: Model::Lhe,
            lambda: 2.0,
            alpha: 8.0,
            sigma_mu: 1.0,
            dt: 0.15,
            dtau: 0.01,
            tau: 5.0,
            ..Default::default()
        }
    }

    /// sR-LHE inpainting/perception sweep base (alpha 6); `tau` varies.
    pub fn lhe_tau_sweep(tau: f64) -> Self {
        ModelConfig {
            alpha: 6.0,
            tau,
            ..Self::lhe_gratings()
        }
    }

    /// sR-LHE on the classic Poggendorff figure.
    pub fn lhe_classic() -> Self {
        ModelConfig {
            model: Model::Lhe,
            lambda: 0.5,
            alpha: 8.0,
            sigma_mu: 2.5,
            dt: 0.15,
            dtau: 0.1,
            tau: 2.5,
            ..Default::default()
        }
    }

    pub fn beta_for(&self, n: usize, k: usize) -> f64 {
        self.beta
            .unwrap_or_else(|| k as f64 / ((n * n) as f64 * std::f64::consts::SQRT_2))
    }

    pub fn h_for(&self, n: usize) -> f64 {
        self.h.unwrap_or_else(|| 1.0 / (n as f64).sqrt())
    }

    /// Largest step for which the explicit update is guaranteed stable.
    pub fn max_stable_dt(&self) -> f64 {
        1.0 / (1.0 + self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::param("lambda", "must be >= 0"));
        }
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return Err(Error::param("alpha", "must be > 1"));
        }
        positive("sigma_mu", self.sigma_mu)?;
        positive("M", self.m)?;
        positive("dt", self.dt)?;
        positive("dtau", self.dtau)?;
        positive("tol", self.tol)?;
        if let Some(b) = self.beta {
            positive("beta", b)?;
        }
        if let Some(h) = self.h {
            positive("h", h)?;
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::param("tau", "must be >= 0"));
        }
        let bound = self.max_stable_dt();
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::param(
                "dt",
                format!("{} exceeds the stability bound 1/(1+lambda) = {bound}", self.dt),
            ));
        }
        crate::heat::step_count(self.tau, self.dtau)?;
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be >= 1"));
        }
        if self.model == Model::Lhe {
            crate::dynamics::check_degree(self.poly_degree)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for cfg in [
            ModelConfig::default(),
            ModelConfig::wc_gratings(),
            ModelConfig::lhe_gratings(),
            ModelConfig::lhe_tau_sweep(0.1),
            ModelConfig::lhe_tau_sweep(0.5),
            ModelConfig::lhe_tau_sweep(2.5),
            ModelConfig::lhe_classic(),
        ] {
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn stability_bound_enforced() {
        let mut cfg = ModelConfig::lhe_gratings();
        cfg.dt = 1.0 / 3.0;
        cfg.validate().unwrap();
        cfg.dt = 0.34;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tau_must_be_multiple_of_dtau() {
        let cfg = ModelConfig {
            tau: 0.015,
            dtau: 0.01,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(Error::NotMultipleOfStep { .. })
        ));
    }

    #[test]
    fn default_beta_and_h() {
        let cfg = ModelConfig::default();
        let beta = cfg.beta_for(200, 16);
        assert!((beta - 16.0 / (40000.0 * 2f64.sqrt())).abs() < 1e-18);
        assert!((cfg.h_for(100) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn enum_round_trip() {
        for s in ["wc", "lhe"] {
            assert_eq!(s.parse::<Model>().unwrap().to_string(), s);
        }
        for s in ["continuous", "discrete-paper"] {
            assert_eq!(s.parse::<Forcing>().unwrap().to_string(), s);
        }
        assert!("sideways".parse::<SigmaSign>().is_err());
    }
}
