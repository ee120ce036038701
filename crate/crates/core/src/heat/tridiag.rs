//! Symmetric periodic tridiagonal systems.
//!
//! The matrix has `diag` on the main diagonal, `off[i]` at `(i, i+1)` and
//! `(i+1, i)`, and `corner` at `(0, K-1)` and `(K-1, 0)`. For `K >= 3` the
//! corner is removed by a Sherman-Morrison rank-one update so that two
//! plain Thomas sweeps give the solution in `O(K)`.

use crate::error::{Error, Result};

/// Pre-factorized cyclic tridiagonal matrix, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct CyclicFactor {
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Scalar(f64),
    Pair { inv: [[f64; 2]; 2] },
    Cyclic(Cyclic),
}

#[derive(Debug, Clone)]
struct Cyclic {
    thomas: Thomas,
    /// `T^{-1} u` for the rank-one correction vector `u`.
    z: Vec<f64>,
    /// Second nonzero of `v`, i.e. `corner / gamma`.
    v_last: f64,
    denom: f64,
}

/// LU factors of a symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
struct Thomas {
    lower: Vec<f64>,
    pivots: Vec<f64>,
    off: Vec<f64>,
}

impl Thomas {
    fn new(diag: &[f64], off: &[f64]) -> Result<Self> {
        let n = diag.len();
        let scale = diag.iter().chain(off).fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * 16.0;
        let mut lower = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        pivots[0] = diag[0];
        if pivots[0].abs() <= tiny {
            return Err(Error::SingularSystem { row: 0 });
        }
        for i in 1..n {
            lower[i] = off[i - 1] / pivots[i - 1];
            pivots[i] = diag[i] - lower[i] * off[i - 1];
            if pivots[i].abs() <= tiny {
                return Err(Error::SingularSystem { row: i });
            }
        }
        Ok(Thomas {
            lower,
            pivots,
            off: off.to_vec(),
        })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 1..n {
            x[i] -= self.lower[i] * x[i - 1];
        }
        x[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] - self.off[i] * x[i + 1]) / self.pivots[i];
        }
    }
}

impl CyclicFactor {
    pub fn new(diag: &[f64], off: &[f64], corner: f64) -> Result<Self> {
        let k = diag.len();
        assert!(k >= 1, "empty system");
        assert_eq!(off.len(), k.saturating_sub(1), "off-diagonal length");
        let kind = match k {
            1 => {
                if diag[0] == 0.0 {
                    return Err(Error::SingularSystem { row: 0 });
                }
                Kind::Scalar(1.0 / diag[0])
            }
            2 => {
                let o = off[0] + corner;
                let det = diag[0] * diag[1] - o * o;
                if det == 0.0 || !det.is_finite() {
                    return Err(Error::SingularSystem { row: 1 });
                }
                Kind::Pair {
                    inv: [[diag[1] / det, -o / det], [-o / det, diag[0] / det]],
                }
            }
            _ => {
                let gamma = if diag[0] != 0.0 { -diag[0] } else { 1.0 };
                let mut reduced = diag.to_vec();
                reduced[0] -= gamma;
                reduced[k - 1] -= corner * corner / gamma;
                let thomas = Thomas::new(&reduced, off)?;
                let mut z = vec![0.0; k];
                z[0] = gamma;
                z[k - 1] = corner;
                thomas.solve_in_place(&mut z);
                let v_last = corner / gamma;
                let denom = 1.0 + z[0] + v_last * z[k - 1];
                let size = 1.0 + z[0].abs() + (v_last * z[k - 1]).abs();
                if denom.abs() <= 1e-12 * size {
                    return Err(Error::SingularSystem { row: k - 1 });
                }
                Kind::Cyclic(Cyclic {
                    thomas,
                    z,
                    v_last,
                    denom,
                })
            }
        };
        Ok(CyclicFactor { kind })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        match &self.kind {
            Kind::Scalar(inv) => x[0] *= inv,
            Kind::Pair { inv } => {
                let (a, b) = (x[0], x[1]);
                x[0] = inv[0][0] * a + inv[0][1] * b;
                x[1] = inv[1][0] * a + inv[1][1] * b;
            }
            Kind::Cyclic(c) => {
                c.thomas.solve_in_place(x);
                let k = x.len();
                let factor = (x[0] + c.v_last * x[k - 1]) / c.denom;
                for (xi, zi) in x.iter_mut().zip(&c.z) {
                    *xi -= factor * zi;
                }
            }
        }
    }
}

/// Solves the cyclic tridiagonal system in `O(K)`.
pub fn solve_cyclic_tridiagonal(
    diag: &[f64],
    off: &[f64],
    corner: f64,
    rhs: &[f64],
) -> Result<Vec<f64>> {
    if rhs.len() != diag.len() || off.len() + 1 != diag.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("diag {0}, off {1}, rhs {0}", diag.len(), diag.len().saturating_sub(1)),
            got: format!("diag {}, off {}, rhs {}", diag.len(), off.len(), rhs.len()),
        });
    }
    let factor = CyclicFactor::new(diag, off, corner)?;
    let mut x = rhs.to_vec();
    factor.solve_in_place(&mut x);
    Ok(x)
}

/// Multiplies the cyclic tridiagonal matrix by `x`.
pub fn cyclic_tridiagonal_mul(diag: &[f64], off: &[f64], corner: f64, x: &[f64]) -> Vec<f64> {
    let k = diag.len();
    let mut y: Vec<f64> = diag.iter().zip(x).map(|(d, v)| d * v).collect();
    for i in 0..k.saturating_sub(1) {
        y[i] += off[i] * x[i + 1];
        y[i + 1] += off[i] * x[i];
    }
    if k >= 2 {
        y[0] += corner * x[k - 1];
        y[k - 1] += corner * x[0];
    }
    y
}
