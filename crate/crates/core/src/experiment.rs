//! End-to-end runs: stimulus, lift, evolve, project, measure, write artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cake::WaveletBank;
use crate::config::ModelConfig;
use crate::cortical::{renormalize, Image};
use crate::dynamics::{run_model_with, RunOptions, RunOutcome};
use crate::error::{Error, Result};
use crate::heat::HeatPropagator;
use crate::pgm;
use crate::stimuli::{self, StimulusSpec};

/// Default half-height of the search band around the continuation, in pixels.
pub const DEFAULT_BAND: f64 = 10.0;
/// Mean normalized contrast below which no path is reported.
pub const CONTRAST_THRESHOLD: f64 = 0.05;

/// Result of the completion probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Offset {
    /// Signed perpendicular distance (pixels) of the completed path from the
    /// geometric continuation at the right edge of the bar. Positive values
    /// mean the path crosses the bar more perpendicularly than the true line,
    /// which is the direction of the perceived misalignment.
    Path {
        pixels: f64,
        /// Slope `dy/dx` of the fitted path.
        slope: f64,
        contrast: f64,
    },
    NoCompletion { contrast: f64 },
}

impl Offset {
    pub fn pixels(&self) -> Option<f64> {
        match self {
            Offset::Path { pixels, .. } => Some(*pixels),
            Offset::NoCompletion { .. } => None,
        }
    }

    pub fn contrast(&self) -> f64 {
        match self {
            Offset::Path { contrast, .. } | Offset::NoCompletion { contrast } => *contrast,
        }
    }
}

/// [`measure_offset_with_band`] with the default band.
pub fn measure_offset(output: &Image, spec: &StimulusSpec) -> Result<Offset> {
    measure_offset_with_band(output, spec, DEFAULT_BAND)
}

/// Traces the darkest row of every bar column inside a band around the
/// analytic continuation, fits a line and compares it with the true one at
/// the bar's right edge.
pub fn measure_offset_with_band(output: &Image, spec: &StimulusSpec, band: f64) -> Result<Offset> {
    spec.validate()?;
    if output.size() != spec.n {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", spec.n),
            got: format!("{0}x{0}", output.size()),
        });
    }
    if !(band > 0.0 && band.is_finite()) {
        return Err(Error::param("band", "must be positive"));
    }
    let (lo, hi) = output.min_max();
    let range = hi - lo;
    let line = spec.reference_line();
    let (bar_lo, bar_hi) = spec.bar_columns();
    let n = spec.n;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut contrast_sum = 0.0;
    let mut columns = 0usize;
    for col in bar_lo..bar_hi {
        let x = col as f64 + 0.5;
        let center = line.y_at(x);
        let first = (center - band - 0.5).ceil().max(0.0) as usize;
        let last = ((center + band - 0.5).floor() as isize).min(n as isize - 1);
        if last < first as isize {
            continue;
        }
        let rows = first..=last as usize;
        let (mut best, mut cmax) = (first, f64::NEG_INFINITY);
        let mut cmin = f64::INFINITY;
        for row in rows.clone() {
            let v = output.get(row, col);
            if v < cmin {
                cmin = v;
                best = row;
            }
            cmax = cmax.max(v);
        }
        columns += 1;
        contrast_sum += if range > 0.0 { (cmax - cmin) / range } else { 0.0 };
        xs.push(x);
        ys.push(best as f64 + 0.5 + parabolic_shift(output, best, col, rows));
    }
    let contrast = if columns == 0 { 0.0 } else { contrast_sum / columns as f64 };
    if columns < 2 || contrast < CONTRAST_THRESHOLD {
        return Ok(Offset::NoCompletion { contrast });
    }

    let (slope, intercept) = fit_line(&xs, &ys);
    let right = bar_hi as f64;
    let cos = spec.incidence_angle.cos();
    let sign = cos.signum();
    let pixels = sign * (slope * right + intercept - line.y_at(right)) * cos.abs();
    Ok(Offset::Path {
        pixels,
        slope,
        contrast,
    })
}

/// Sub-pixel position of a discrete minimum from its two neighbours.
fn parabolic_shift(img: &Image, row: usize, col: usize, rows: std::ops::RangeInclusive<usize>) -> f64 {
    if row == *rows.start() || row == *rows.end() {
        return 0.0;
    }
    let (a, b, c) = (img.get(row - 1, col), img.get(row, col), img.get(row + 1, col));
    let curvature = a - 2.0 * b + c;
    if curvature <= 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
}

fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Where the input image comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Stimulus(StimulusSpec),
    /// A PGM file; no offset is measured since its geometry is unknown.
    File(PathBuf),
}

/// Model parameters that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Lambda,
    Alpha,
    SigmaMu,
    M,
    Beta,
    Dt,
    Dtau,
    Tau,
    Tol,
    MaxIters,
    PolyDegree,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Alpha => "alpha",
            SweepParam::SigmaMu => "sigma_mu",
            SweepParam::M => "m",
            SweepParam::Beta => "beta",
            SweepParam::Dt => "dt",
            SweepParam::Dtau => "dtau",
            SweepParam::Tau => "tau",
            SweepParam::Tol => "tol",
            SweepParam::MaxIters => "max_iters",
            SweepParam::PolyDegree => "poly_degree",
        }
    }

    /// Returns `cfg` with this parameter set to `value`.
    pub fn apply(self, cfg: &ModelConfig, value: f64) -> Result<ModelConfig> {
        let mut out = cfg.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::param("sweep", format!("{} needs integer values, got {v}", self.name())))
            }
        };
        match self {
            SweepParam::Lambda => out.lambda = value,
            SweepParam::Alpha => out.alpha = value,
            SweepParam::SigmaMu => out.sigma_mu = value,
            SweepParam::M => out.m = value,
            SweepParam::Beta => out.beta = Some(value),
            SweepParam::Dt => out.dt = value,
            SweepParam::Dtau => out.dtau = value,
            SweepParam::Tau => out.tau = value,
            SweepParam::Tol => out.tol = value,
            SweepParam::MaxIters => out.max_iters = as_count(value)?,
            SweepParam::PolyDegree => out.poly_degree = as_count(value)?,
        }
        Ok(out)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            SweepParam::Lambda,
            SweepParam::Alpha,
            SweepParam::SigmaMu,
            SweepParam::M,
            SweepParam::Beta,
            SweepParam::Dt,
            SweepParam::Dtau,
            SweepParam::Tau,
            SweepParam::Tol,
            SweepParam::MaxIters,
            SweepParam::PolyDegree,
        ];
        let key = s.replace('-', "_");
        all.into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| Error::Format {
                what: "sweep parameter",
                reason: format!("unknown parameter `{s}`"),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = Error;

    /// Parses `PARAM=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            what: "sweep",
            reason,
        };
        let (name, list) = s
            .split_once('=')
            .ok_or_else(|| bad(format!("expected PARAM=v1,v2,..., got `{s}`")))?;
        let param = name.trim().parse()?;
        let values = list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad value `{v}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(bad("no values".into()));
        }
        Ok(Sweep { param, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub source: Source,
    pub orientations: usize,
    pub bw: usize,
    pub out_dir: PathBuf,
    pub sweep: Option<Sweep>,
    /// Reserved; the pipeline is deterministic.
    pub seed: u64,
    pub band: f64,
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig, source: Source, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            model,
            source,
            orientations: 16,
            bw: 5,
            out_dir: out_dir.into(),
            sweep: None,
            seed: 0,
            band: DEFAULT_BAND,
        }
    }

    /// Model configurations of every run, with the subdirectory for each.
    pub fn runs(&self) -> Result<Vec<(ModelConfig, PathBuf)>> {
        match &self.sweep {
            None => Ok(vec![(self.model.clone(), self.out_dir.clone())]),
            Some(sweep) => sweep
                .values
                .iter()
                .map(|&v| {
                    let cfg = sweep.param.apply(&self.model, v)?;
                    Ok((cfg, self.out_dir.join(format!("{}={v}", sweep.param.name()))))
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Source::Stimulus(spec) = &self.source {
            spec.validate()?;
        }
        if !(self.band > 0.0 && self.band.is_finite()) {
            return Err(Error::param("band", "must be positive"));
        }
        for (cfg, _) in self.runs()? {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// Machine-readable summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ModelConfig,
    pub n: usize,
    pub orientations: usize,
    pub bw: usize,
    pub beta: f64,
    pub h: f64,
    pub pou_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_change: f64,
    pub offset: Option<Offset>,
    pub out_dir: PathBuf,
}

impl Report {
    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("model", c.model.to_string());
        kv("forcing", c.forcing.to_string());
        kv("sigma_sign", c.sigma_sign.to_string());
        kv("n", self.n.to_string());
        kv("k", self.orientations.to_string());
        kv("bw", self.bw.to_string());
        kv("lambda", c.lambda.to_string());
        kv("alpha", c.alpha.to_string());
        kv("sigma_mu", c.sigma_mu.to_string());
        kv("m", c.m.to_string());
        kv("beta", self.beta.to_string());
        kv("h", self.h.to_string());
        kv("dt", c.dt.to_string());
        kv("dtau", c.dtau.to_string());
        kv("tau", c.tau.to_string());
        kv("tol", c.tol.to_string());
        kv("max_iters", c.max_iters.to_string());
        kv("poly_degree", c.poly_degree.to_string());
        kv("pou_residual", self.pou_residual.to_string());
        kv("iterations", self.iterations.to_string());
        kv("converged", self.converged.to_string());
        kv("final_change", self.final_change.to_string());
        match self.offset {
            Some(Offset::Path {
                pixels,
                slope,
                contrast,
            }) => {
                kv("offset", pixels.to_string());
                kv("offset_slope", slope.to_string());
                kv("offset_contrast", contrast.to_string());
            }
            Some(Offset::NoCompletion { contrast }) => {
                kv("offset", "none".into());
                kv("offset_contrast", contrast.to_string());
            }
            None => kv("offset", "n/a".into()),
        }
        s
    }
}

/// Loads or renders the input image.
pub fn load_input(source: &Source) -> Result<Image> {
    match source {
        Source::Stimulus(spec) => stimuli::render(spec),
        Source::File(path) => pgm::read(path),
    }
}

/// Runs every configured experiment and writes its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Report>> {
    cfg.validate()?;
    let input = load_input(&cfg.source)?;
    let n = input.size();
    let bank = WaveletBank::build(n, cfg.orientations, cfg.bw)?;
    let spec = match &cfg.source {
        Source::Stimulus(s) => Some(s),
        Source::File(_) => None,
    };
    cfg.runs()?
        .into_par_iter()
        .map(|(model, dir)| run_single(&input, spec, &bank, &model, &dir, cfg.band))
        .collect()
}

/// Runs one configuration on a prepared input and bank.
pub fn run_single(
    input: &Image,
    spec: Option<&StimulusSpec>,
    bank: &WaveletBank,
    model: &ModelConfig,
    dir: &Path,
    band: f64,
) -> Result<Report> {
    let (outcome, report) = evaluate(input, spec, bank, model, band)?;
    write_artifacts(dir, input, &outcome, &report)?;
    Ok(Report {
        out_dir: dir.to_path_buf(),
        ..report
    })
}

/// Runs the model without touching the file system.
pub fn evaluate(
    input: &Image,
    spec: Option<&StimulusSpec>,
    bank: &WaveletBank,
    model: &ModelConfig,
    band: f64,
) -> Result<(RunOutcome, Report)> {
    let n = bank.size();
    let k = bank.orientations();
    let prop = HeatPropagator::for_config(n, k, model)?;
    let heat = prop.operator(model.tau)?;
    let outcome = run_model_with(input, model, bank, &heat, RunOptions::default())?;
    let offset = match spec {
        Some(s) => Some(measure_offset_with_band(&outcome.image, s, band)?),
        None => None,
    };
    let report = Report {
        config: model.clone(),
        n,
        orientations: k,
        bw: bank.bw(),
        beta: prop.beta(),
        h: prop.spacing(),
        pou_residual: bank.pou_residual(),
        iterations: outcome.iterations,
        converged: outcome.converged,
        final_change: outcome.final_change,
        offset,
        out_dir: PathBuf::new(),
    };
    Ok((outcome, report))
}

fn write_artifacts(dir: &Path, input: &Image, outcome: &RunOutcome, report: &Report) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = input.size();
    pgm::write(dir.join("input.pgm"), input)?;
    pgm::write(dir.join("output.pgm"), &renormalize(&outcome.image))?;
    let side = n / 2;
    let crop = outcome.image.crop((n - side) / 2, (n - side) / 2, side)?;
    pgm::write(dir.join("crop.pgm"), &renormalize(&crop))?;

    let mut trace = String::from("p,relative_change,energy\n");
    for row in &outcome.trace {
        let energy = row.energy.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(trace, "{},{},{}", row.p, row.relative_change, energy);
    }
    write_text(&dir.join("trace.csv"), &trace)?;
    write_text(&dir.join("report.txt"), &report.to_kv())?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Format {
        what: "report",
        reason: e.to_string(),
    })?;
    write_text(&dir.join("report.json"), &json)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn paint_line(spec: &StimulusSpec, shift: f64) -> Image {
        // draws the continuation through the bar, displaced vertically by `shift`
        let line = spec.reference_line();
        let base = stimuli::render(spec).unwrap();
        let (lo, hi) = spec.bar_columns();
        Image::from_fn(spec.n, |(row, col)| {
            if (lo..hi).contains(&col) {
                let y = line.y_at(col as f64 + 0.5) + shift;
                let d = (row as f64 + 0.5 - y).abs();
                if d < 1.0 {
                    return 0.1 + 0.4 * d;
                }
            }
            base.get(row, col)
        })
    }

    #[test]
    fn raw_stimulus_has_no_completion() {
        for spec in [StimulusSpec::classic(200), StimulusSpec::gratings(200)] {
            let img = stimuli::render(&spec).unwrap();
            assert!(matches!(
                measure_offset(&img, &spec).unwrap(),
                Offset::NoCompletion { .. }
            ));
        }
    }

    #[test]
    fn painted_continuation_has_zero_offset() {
        let spec = StimulusSpec::classic(200);
        let off = measure_offset(&paint_line(&spec, 0.0), &spec).unwrap();
        assert!(off.pixels().unwrap().abs() < 0.5, "{off:?}");
    }

    #[test]
    fn shifted_path_gives_signed_offset() {
        let spec = StimulusSpec::classic(200);
        let down = measure_offset(&paint_line(&spec, 3.0), &spec).unwrap();
        let expected = 3.0 * FRAC_PI_3.cos();
        assert!((down.pixels().unwrap() - expected).abs() < 0.3, "{down:?}");
        let up = measure_offset(&paint_line(&spec, -3.0), &spec).unwrap();
        assert!((up.pixels().unwrap() + expected).abs() < 0.3, "{up:?}");
    }

    #[test]
    fn offset_is_invariant_under_affine_rescaling() {
        let spec = StimulusSpec::classic(200);
        let img = paint_line(&spec, 2.0);
        let scaled = Image::new(img.values().mapv(|v| 3.5 * v - 0.7)).unwrap();
        assert_eq!(
            measure_offset(&img, &spec).unwrap(),
            measure_offset(&scaled, &spec).unwrap()
        );
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let spec = StimulusSpec::classic(200);
        assert!(measure_offset(&Image::filled(64, 1.0), &spec).is_err());
    }

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "tau=0.1,0.5,2.5".parse().unwrap();
        assert_eq!(s.param, SweepParam::Tau);
        assert_eq!(s.values, vec![0.1, 0.5, 2.5]);
        assert_eq!("sigma-mu=1".parse::<Sweep>().unwrap().param, SweepParam::SigmaMu);
        assert!("tau".parse::<Sweep>().is_err());
        assert!("speed=1".parse::<Sweep>().is_err());
        assert!("tau=a".parse::<Sweep>().is_err());
        let cfg = ModelConfig::default();
        assert!(SweepParam::MaxIters.apply(&cfg, 2.5).is_err());
        assert_eq!(SweepParam::PolyDegree.apply(&cfg, 7.0).unwrap().poly_degree, 7);
    }

    #[test]
    fn sweep_runs_get_own_directories() {
        let mut cfg = ExperimentConfig::new(
            ModelConfig::default(),
            Source::Stimulus(StimulusSpec::gratings(64)),
            "/tmp/x",
        );
        cfg.sweep = Some("tau=0.1,0.5".parse().unwrap());
        let runs = cfg.runs().unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[1].0.tau, 0.5);
        assert!(runs[0].1.ends_with("tau=0.1"));
        cfg.sweep = Some("dt=5".parse().unwrap());
        assert!(cfg.validate().is_err());
    }
}
