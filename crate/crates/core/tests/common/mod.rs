//! Oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use neurogeom_core::heat::kernel_column;
use neurogeom_core::{CorticalStack, HeatPropagator};
use rand::{rngs::StdRng, Rng, SeedableRng};
use std::f64::consts::PI;

pub fn random_stack(n: usize, k: usize, seed: u64, lo: f64, hi: f64) -> CorticalStack {
    let mut rng = StdRng::seed_from_u64(seed);
    CorticalStack::from_fn(n, k, |_, _, _| rng.random_range(lo..hi))
}

pub fn flat(a: &CorticalStack) -> DVector<f64> {
    DVector::from_iterator(a.values().len(), a.values().iter().copied())
}

/// Real-space generator: per orientation the squared periodic central
/// difference along `(cos theta, sin theta)` plus the angular second
/// difference coupling equal pixels across orientations.
pub fn dense_generator(n: usize, k: usize, beta: f64, h: f64) -> DMatrix<f64> {
    let dim = n * n * k;
    let idx = |kk: usize, row: usize, col: usize| kk * n * n + row * n + col;
    let dtheta = PI / k as f64;
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    for kk in 0..k {
        let theta = kk as f64 * dtheta;
        let (c, s) = (theta.cos(), theta.sin());
        let mut d = DMatrix::<f64>::zeros(n * n, n * n);
        for row in 0..n {
            for col in 0..n {
                let here = row * n + col;
                d[(here, row * n + (col + 1) % n)] += c / (2.0 * h);
                d[(here, row * n + (col + n - 1) % n)] -= c / (2.0 * h);
                d[(here, ((row + 1) % n) * n + col)] += s / (2.0 * h);
                d[(here, ((row + n - 1) % n) * n + col)] -= s / (2.0 * h);
            }
        }
        let d2 = &d * &d;
        for a in 0..n * n {
            for b in 0..n * n {
                g[(kk * n * n + a, kk * n * n + b)] += d2[(a, b)];
            }
        }
    }
    if k >= 2 {
        let coupling = beta * beta / (dtheta * dtheta);
        for kk in 0..k {
            for row in 0..n {
                for col in 0..n {
                    let me = idx(kk, row, col);
                    g[(me, me)] -= 2.0 * coupling;
                    g[(me, idx((kk + 1) % k, row, col))] += coupling;
                    g[(me, idx((kk + k - 1) % k, row, col))] += coupling;
                }
            }
        }
    }
    g
}

/// Relative Euclidean error of `evolve` against `exp(tau G) a` on a random stack.
pub fn dense_exponential_error(n: usize, k: usize, beta: f64, tau: f64, dtau: f64) -> f64 {
    let h = 1.0 / (n as f64).sqrt();
    let prop = HeatPropagator::build(n, k, beta, dtau, h).unwrap();
    let a = random_stack(n, k, 11, -1.0, 1.0);
    let got = flat(&prop.evolve(&a, tau).unwrap());
    let expected = (dense_generator(n, k, beta, h) * tau).exp() * flat(&a);
    (&got - &expected).norm() / expected.norm()
}

/// `sum_y k(x, y) f(a(x), a(y))` by materializing every kernel column.
pub fn brute_force(
    prop: &HeatPropagator,
    tau: f64,
    a: &CorticalStack,
    f: impl Fn(f64, f64) -> f64,
) -> CorticalStack {
    let (n, k) = a.dim();
    let columns: Vec<CorticalStack> = (0..n * n * k)
        .map(|idx| {
            let (kk, rest) = (idx / (n * n), idx % (n * n));
            kernel_column(prop, rest / n, rest % n, kk, tau).unwrap()
        })
        .collect();
    CorticalStack::from_fn(n, k, |i, j, kk| {
        let ax = a.get(i, j, kk);
        columns
            .iter()
            .enumerate()
            .map(|(idx, col)| {
                let (l, rest) = (idx / (n * n), idx % (n * n));
                // column of the source voxel y, read at x
                col.get(i, j, kk) * f(ax, a.get(rest / n, rest % n, l))
            })
            .sum()
    })
}

/// Second moments of orientation slice `k` about `(c, c)` along and across `theta`.
pub fn moments(a: &CorticalStack, k: usize, c: f64, theta: f64) -> (f64, f64) {
    let (u, v) = (theta.cos(), theta.sin());
    let s = a.slice(k);
    let (mut along, mut across, mut mass) = (0.0, 0.0, 0.0);
    for ((row, col), &w) in s.indexed_iter() {
        let (x, y) = (col as f64 - c, row as f64 - c);
        let p = x * u + y * v;
        let q = -x * v + y * u;
        along += w * p * p;
        across += w * q * q;
        mass += w;
    }
    (along / mass, across / mass)
}
