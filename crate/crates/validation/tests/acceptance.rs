//! Acceptance suite: runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any fails. Criteria 7 and 8 run the
//! full-size experiments and take several minutes.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::time::Instant;

use neurogeom_core::dynamics::{
    drift, expand_coefficients, fit_polynomial, lhe_energy, lhe_interaction, local_mean, run_model_with,
    EvolutionState, RunOptions,
};
use neurogeom_core::experiment::{evaluate, DEFAULT_BAND};
use neurogeom_core::heat::kernel_column;
use neurogeom_core::stimuli::{self, StimulusSpec};
use neurogeom_core::{
    lift, project, CorticalStack, Forcing, HeatPropagator, Image, Model, ModelConfig, Offset, SigmaSign,
    WaveletBank,
};
use rand::{rngs::StdRng, Rng, SeedableRng};

use common::{brute_force, dense_exponential_error, moments, random_stack};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn heat_oracle() -> Verdict {
    let start = Instant::now();
    let err = dense_exponential_error(8, 4, 4.0 / (64.0 * 2f64.sqrt()), 0.5, 0.01);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        err < 1e-3 && secs < 5.0,
        format!("dense exponential relative error {err:.3e} (< 1e-3), {secs:.2} s (< 5 s)"),
    )
}

fn conservation_and_symmetry() -> Verdict {
    let start = Instant::now();
    let (n, k) = (16usize, 8usize);
    let prop = HeatPropagator::build(n, k, 0.5, 0.01, 0.25).unwrap();
    let a = random_stack(n, k, 3, -0.7, 1.3);

    let mut mass = 0.0f64;
    for tau in [0.01, 0.2, 1.0] {
        let out = prop.evolve(&a, tau).unwrap();
        mass = mass.max((out.sum() - a.sum()).abs() / a.sum().abs());
    }

    let mut rng = StdRng::seed_from_u64(5);
    let mut voxel = || (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..k));
    let mut symmetry = 0.0f64;
    for _ in 0..20 {
        let (p, q) = (voxel(), voxel());
        let kp = kernel_column(&prop, p.0, p.1, p.2, 0.3).unwrap();
        let kq = kernel_column(&prop, q.0, q.1, q.2, 0.3).unwrap();
        symmetry = symmetry.max((kp.get(q.0, q.1, q.2) - kq.get(p.0, p.1, p.2)).abs());
    }

    let two = prop.evolve(&prop.evolve(&a, 0.13).unwrap(), 0.29).unwrap();
    let semigroup = two.max_abs_diff(&prop.evolve(&a, 0.42).unwrap()).unwrap();

    let contraction = (0..5).all(|seed| {
        let b = random_stack(n, k, seed, -1.0, 1.0);
        prop.evolve(&b, 0.25).unwrap().norm() <= b.norm() * (1.0 + 1e-12)
    });
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mass < 1e-10 && symmetry < 1e-10 && semigroup < 1e-12 && contraction && secs < 10.0,
        format!(
            "mass {mass:.1e}, symmetry {symmetry:.1e}, semigroup {semigroup:.1e}, contraction {contraction}, {secs:.2} s"
        ),
    )
}

fn anisotropy() -> Verdict {
    let (n, k) = (32usize, 8usize);
    let h = 1.0 / (n as f64).sqrt();
    // along-orientation spread of 3 px
    let tau = 9.0 * h * h / 2.0;
    let prop = HeatPropagator::build(n, k, k as f64 / ((n * n) as f64 * 2f64.sqrt()), tau / 20.0, h).unwrap();
    let worst = (0..k)
        .map(|kk| {
            let col = kernel_column(&prop, 16, 16, kk, tau).unwrap();
            let (along, across) = moments(&col, kk, 16.0, kk as f64 * PI / k as f64);
            along / across
        })
        .fold(f64::INFINITY, f64::min);
    verdict(worst > 2.0, format!("smallest along/across second-moment ratio {worst:.2} (> 2)"))
}

fn lhe_interaction_oracle() -> Verdict {
    let prop = HeatPropagator::build(6, 3, 0.4, 0.02, 0.5).unwrap();
    let tau = 0.4;
    let heat = prop.operator(tau).unwrap();
    let mut worst = 0.0f64;
    for degree in [3usize, 5] {
        let c = fit_polynomial(6.0, degree).unwrap();
        let a = random_stack(6, 3, degree as u64, -0.5, 0.8);
        let got = lhe_interaction(&a, &heat, &c).unwrap();
        let expected = brute_force(&prop, tau, &a, |x, y| c.eval(x - y));
        worst = worst.max(got.max_abs_diff(&expected).unwrap());
    }

    let c = fit_polynomial(8.0, 9).unwrap();
    let a = random_stack(4, 2, 8, 0.0, 1.0);
    let cs = expand_coefficients(&a, &c);
    let mut identity = 0.0f64;
    // activations live in [0, 1], so contrasts stay inside the fit domain
    for y in [0.0, 0.2, 0.45, 0.8, 1.0] {
        for ((k, i, j), &x) in a.values().indexed_iter() {
            let expanded: f64 = cs.iter().enumerate().map(|(d, ci)| ci.get(i, j, k) * f64::powi(y, d as i32)).sum();
            identity = identity.max((expanded - c.eval(x - y)).abs());
        }
    }
    verdict(
        worst < 1e-8 && identity < 1e-12,
        format!("double-sum deviation {worst:.1e} (< 1e-8), expansion identity {identity:.1e} (< 1e-12)"),
    )
}

fn gratings(n: usize) -> Image {
    stimuli::render(&StimulusSpec::gratings(n)).unwrap()
}

fn energy_descent() -> Verdict {
    let (n, k) = (64usize, 8usize);
    let bank = WaveletBank::build(n, k, 5).unwrap();
    let cfg = ModelConfig {
        dt: 0.5 / (1.0 + 2.0),
        ..ModelConfig::lhe_gratings()
    };
    let heat = HeatPropagator::for_config(n, k, &cfg).unwrap().operator(cfg.tau).unwrap();
    let out = run_model_with(&gratings(n), &cfg, &bank, &heat, RunOptions { trace_energy: true }).unwrap();
    let energies: Vec<f64> = std::iter::once(out.initial_energy.unwrap())
        .chain(out.trace.iter().map(|r| r.energy.unwrap()))
        .collect();
    let worst_rise = energies
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].abs())
        .fold(f64::NEG_INFINITY, f64::max);
    let monotone = worst_rise <= 1e-6;

    let small = HeatPropagator::build(6, 3, 0.4, 0.02, 0.5).unwrap().operator(0.4).unwrap();
    let mut fd_worst = 0.0f64;
    for forcing in [Forcing::Continuous, Forcing::DiscretePaper] {
        for sign in [SigmaSign::Paper, SigmaSign::Flipped] {
            let cfg = ModelConfig {
                lambda: 0.7,
                forcing,
                sigma_sign: sign,
                m: 1.3,
                poly_degree: 5,
                ..ModelConfig::lhe_gratings()
            };
            let a0 = random_stack(6, 3, 1, 0.0, 0.5);
            let mu = local_mean(&a0, 1.0).unwrap();
            let mut state = EvolutionState::new(a0, mu).unwrap();
            state.a = random_stack(6, 3, 2, 0.0, 0.5);
            let c = fit_polynomial(cfg.alpha, cfg.poly_degree).unwrap();
            let d = drift(&state, &cfg, &lhe_interaction(&state.a, &small, &c).unwrap()).unwrap();
            let energy = |a: &CorticalStack| lhe_energy(a, &state.a0, &state.mu, &cfg, &small, &c).unwrap();
            for seed in 0..3 {
                let v = random_stack(6, 3, 100 + seed, -1.0, 1.0);
                let eps = 1e-5;
                let fd = (energy(&state.a.scaled_add(eps, &v).unwrap()) - energy(&state.a.scaled_add(-eps, &v).unwrap()))
                    / (2.0 * eps);
                let analytic: f64 = -d.values().iter().zip(v.values()).map(|(x, y)| x * y).sum::<f64>();
                fd_worst = fd_worst.max((fd - analytic).abs() / analytic.abs());
            }
        }
    }
    verdict(
        monotone && out.converged && fd_worst < 1e-4,
        format!(
            "{} steps, converged {}, largest relative energy rise {worst_rise:.1e} (<= 1e-6), gradient check {fd_worst:.1e} (< 1e-4)",
            out.iterations, out.converged
        ),
    )
}

fn reconstruction() -> Verdict {
    let bank = WaveletBank::build(200, 16, 5).unwrap();
    let errors: Vec<f64> = [StimulusSpec::classic(200), StimulusSpec::gratings(200)]
        .iter()
        .map(|spec| {
            let f = stimuli::render(spec).unwrap();
            let back = project(&lift(&f, &bank).unwrap());
            (back.values() - f.values()).mapv(|v| v * v).sum().sqrt() / f.norm()
        })
        .collect();
    verdict(
        errors.iter().all(|&e| e < 1e-2),
        format!("classic {:.2e}, gratings {:.2e} (< 1e-2)", errors[0], errors[1]),
    )
}

fn describe(offset: &Offset) -> String {
    match offset {
        Offset::Path { pixels, contrast, .. } => format!("offset {pixels:+.2} px (contrast {contrast:.3})"),
        Offset::NoCompletion { contrast } => format!("no completion (contrast {contrast:.3})"),
    }
}

fn run_gratings(bank: &WaveletBank, cfg: &ModelConfig) -> (Offset, f64) {
    let spec = StimulusSpec::gratings(bank.size());
    let start = Instant::now();
    let (_, report) = evaluate(&stimuli::render(&spec).unwrap(), Some(&spec), bank, cfg, DEFAULT_BAND).unwrap();
    (report.offset.unwrap(), start.elapsed().as_secs_f64())
}

fn grating_completion(bank: &WaveletBank) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, cfg) in [("WC", ModelConfig::wc_gratings()), ("LHE", ModelConfig::lhe_gratings())] {
        let (offset, secs) = run_gratings(bank, &cfg);
        let ok = offset.pixels().is_some_and(|p| p != 0.0) && secs < 300.0;
        pass &= ok;
        parts.push(format!("{name}: {}, {secs:.0} s", describe(&offset)));
    }
    verdict(pass, parts.join("; "))
}

fn tau_transition(bank: &WaveletBank) -> Verdict {
    let offsets: Vec<Offset> = [0.1, 0.5, 2.5]
        .iter()
        .map(|&tau| run_gratings(bank, &ModelConfig::lhe_tau_sweep(tau)).0)
        .collect();
    let pixels: Option<Vec<f64>> = offsets.iter().map(Offset::pixels).collect();
    let pass = pixels
        .as_ref()
        .is_some_and(|p| p.windows(2).all(|w| w[1] >= w[0]) && p[0].abs() <= 1.0);
    let parts: Vec<String> = [0.1, 0.5, 2.5]
        .iter()
        .zip(&offsets)
        .map(|(tau, o)| format!("tau {tau}: {}", describe(o)))
        .collect();
    verdict(pass, format!("{} (nondecreasing, |tau 0.1| <= 1 px)", parts.join("; ")))
}

fn stability_boundary() -> Verdict {
    let (n, k) = (64usize, 16usize);
    let bank = WaveletBank::build(n, k, 5).unwrap();
    let img = gratings(n);
    let mut pass = true;
    let mut parts = Vec::new();
    for base in [ModelConfig::wc_gratings(), ModelConfig::lhe_gratings()] {
        let cfg = ModelConfig {
            dt: base.max_stable_dt(),
            ..base
        };
        let heat = HeatPropagator::for_config(n, k, &cfg).unwrap().operator(cfg.tau).unwrap();
        let out = run_model_with(&img, &cfg, &bank, &heat, RunOptions::default()).unwrap();
        pass &= out.converged;
        let name = if cfg.model == Model::Wc { "WC" } else { "LHE" };
        parts.push(format!(
            "{name} dt {:.4}: converged {} after {} steps (last change {:.2e})",
            cfg.dt, out.converged, out.iterations, out.final_change
        ));
    }
    verdict(pass, parts.join("; "))
}

fn main() {
    let bank200 = WaveletBank::build(200, 16, 5).unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        ("heat solver vs dense exponential", Box::new(heat_oracle)),
        ("conservation and symmetry", Box::new(conservation_and_symmetry)),
        ("anisotropic diffusion", Box::new(anisotropy)),
        ("LHE interaction vs double sum", Box::new(lhe_interaction_oracle)),
        ("energy descent", Box::new(energy_descent)),
        ("reconstruction", Box::new(reconstruction)),
        ("grating completion with offset", Box::new(|| grating_completion(&bank200))),
        ("inpainting to perception in tau", Box::new(|| tau_transition(&bank200))),
        ("stability at dt = 1/(1+lambda)", Box::new(stability_boundary)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("{} criterion {} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
