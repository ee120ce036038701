//! `neurogeom`: run the cortical models on Poggendorff stimuli or PGM images.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use neurogeom_core::experiment::{run_experiment, ExperimentConfig, Source, Sweep, DEFAULT_BAND};
use neurogeom_core::{Forcing, Model, ModelConfig, SigmaSign, StimulusSpec};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stimulus {
    Classic,
    Gratings,
}

#[derive(Debug, Parser)]
#[command(name = "neurogeom", version, about = "Sub-Riemannian Wilson-Cowan / LHE models of orientation illusions")]
struct Cli {
    /// wc or lhe.
    #[arg(long, value_parser = parse_enum::<Model>, default_value = "lhe")]
    model: Model,

    /// Generated stimulus (ignored with --input).
    #[arg(long, value_enum, default_value = "gratings")]
    stimulus: Stimulus,

    /// Binary PGM input instead of a generated stimulus.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Image size for generated stimuli.
    #[arg(long = "N", default_value_t = 200)]
    n: usize,

    /// Number of orientations.
    #[arg(long = "K", default_value_t = 16)]
    k: usize,

    /// Cake-wavelet angular B-spline degree.
    #[arg(long, default_value_t = 5)]
    bw: usize,

    /// Fidelity weight. Unset model parameters come from the preset for
    /// the chosen model and stimulus.
    #[arg(long)]
    lambda: Option<f64>,
    /// Sigmoid slope.
    #[arg(long)]
    alpha: Option<f64>,
    /// Width of the Gaussian local mean.
    #[arg(long)]
    sigma_mu: Option<f64>,
    /// Gradient-descent step.
    #[arg(long)]
    dt: Option<f64>,
    /// Heat-solver time step.
    #[arg(long)]
    dtau: Option<f64>,
    /// Heat-kernel time.
    #[arg(long)]
    tau: Option<f64>,
    /// Stop when the relative change drops below this.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Odd degree of the LHE polynomial surrogate.
    #[arg(long)]
    poly_degree: Option<usize>,
    /// Coherency; defaults to K / (N^2 sqrt 2).
    #[arg(long)]
    beta: Option<f64>,

    /// Parameter sweep, e.g. `tau=0.1,0.5,2.5`.
    #[arg(long, value_parser = parse_enum::<Sweep>)]
    sweep: Option<Sweep>,

    /// Half-height (pixels) of the offset search band.
    #[arg(long, default_value_t = DEFAULT_BAND)]
    band: f64,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// continuous or discrete-paper.
    #[arg(long, value_parser = parse_enum::<Forcing>, default_value = "continuous")]
    forcing: Forcing,

    /// paper or flipped.
    #[arg(long, value_parser = parse_enum::<SigmaSign>, default_value = "paper")]
    sigma_sign: SigmaSign,
}

fn parse_enum<T>(s: &str) -> Result<T, String>
where
    T: std::str::FromStr<Err = neurogeom_core::Error>,
{
    s.parse().map_err(|e: neurogeom_core::Error| e.to_string())
}

impl Cli {
    fn model_config(&self) -> ModelConfig {
        let mut cfg = match (self.model, self.stimulus) {
            (Model::Wc, _) => ModelConfig::wc_gratings(),
            (Model::Lhe, Stimulus::Gratings) => ModelConfig::lhe_gratings(),
            (Model::Lhe, Stimulus::Classic) => ModelConfig::lhe_classic(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.lambda, self.lambda);
        set(&mut cfg.alpha, self.alpha);
        set(&mut cfg.sigma_mu, self.sigma_mu);
        set(&mut cfg.dt, self.dt);
        set(&mut cfg.dtau, self.dtau);
        set(&mut cfg.tau, self.tau);
        set(&mut cfg.tol, self.tol);
        cfg.max_iters = self.max_iters.unwrap_or(cfg.max_iters);
        cfg.poly_degree = self.poly_degree.unwrap_or(cfg.poly_degree);
        cfg.beta = self.beta.or(cfg.beta);
        cfg.forcing = self.forcing;
        cfg.sigma_sign = self.sigma_sign;
        cfg
    }

    fn experiment(&self) -> ExperimentConfig {
        let source = match &self.input {
            Some(path) => Source::File(path.clone()),
            None => Source::Stimulus(match self.stimulus {
                Stimulus::Classic => StimulusSpec::classic(self.n),
                Stimulus::Gratings => StimulusSpec::gratings(self.n),
            }),
        };
        let mut exp = ExperimentConfig::new(self.model_config(), source, &self.out);
        exp.orientations = self.k;
        exp.bw = self.bw;
        exp.sweep = self.sweep.clone();
        exp.band = self.band;
        exp
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let exp = cli.experiment();
    if let Err(e) = exp.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run_experiment(&exp) {
        Ok(reports) => {
            for report in reports {
                println!("# {}", report.out_dir.display());
                print!("{}", report.to_kv());
                if !report.converged {
                    eprintln!(
                        "warning: {} stopped at max_iters without converging",
                        report.out_dir.display()
                    );
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
