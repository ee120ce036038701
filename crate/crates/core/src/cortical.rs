//! Retinal images and cortical activation stacks.
//!
//! An [`Image`] is an `N x N` grid indexed `[row, col]`, with `x = col`
//! pointing right and `y = row` pointing down. A [`CorticalStack`] holds
//! one `N x N` slice per orientation `theta_k = k * pi / K`, `k = 0..K`,
//! stored slice-major as `values[[k, row, col]]`. Orientations are measured
//! from the `+x` axis towards `+y`.

use std::f64::consts::PI;

use ndarray::{Array2, Array3, Axis, Zip};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    values: Array2<f64>,
}

impl Image {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (h, w) = values.dim();
        if h != w {
            return Err(Error::ShapeMismatch {
                expected: "square image".into(),
                got: format!("{h}x{w}"),
            });
        }
        if h == 0 {
            return Err(Error::param("N", "image must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "image contains non-finite values"));
        }
        Ok(Image { values })
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Image {
            values: Array2::from_elem((n, n), value),
        }
    }

    pub fn from_fn(n: usize, f: impl FnMut((usize, usize)) -> f64) -> Self {
        Image {
            values: Array2::from_shape_fn((n, n), f),
        }
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[[row, col]]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Square sub-image with top-left corner at (`row`, `col`).
    pub fn crop(&self, row: usize, col: usize, size: usize) -> Result<Image> {
        let n = self.size();
        if size == 0 || row + size > n || col + size > n {
            return Err(Error::param(
                "crop",
                format!("{size}x{size} window at ({row}, {col}) exceeds {n}x{n} image"),
            ));
        }
        let values = self
            .values
            .slice(ndarray::s![row..row + size, col..col + size])
            .to_owned();
        Ok(Image { values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorticalStack {
    values: Array3<f64>,
}

impl CorticalStack {
    /// Wraps an array laid out as `[k, row, col]`.
    pub fn new(values: Array3<f64>) -> Result<Self> {
        let (k, h, w) = values.dim();
        if k == 0 {
            return Err(Error::param("K", "need at least one orientation"));
        }
        if h != w || h == 0 {
            return Err(Error::ShapeMismatch {
                expected: "square slices".into(),
                got: format!("{h}x{w}"),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "stack contains non-finite values"));
        }
        Ok(CorticalStack { values })
    }

    pub(crate) fn from_array_unchecked(values: Array3<f64>) -> Self {
        CorticalStack { values }
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        CorticalStack {
            values: Array3::zeros((k, n, n)),
        }
    }

    pub fn filled(n: usize, k: usize, value: f64) -> Self {
        CorticalStack {
            values: Array3::from_elem((k, n, n), value),
        }
    }

    /// Builds a stack from `f(i, j, k)` where `i` is the row and `j` the column.
    pub fn from_fn(n: usize, k: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        CorticalStack {
            values: Array3::from_shape_fn((k, n, n), |(kk, i, j)| f(i, j, kk)),
        }
    }

    /// Unit mass at voxel `(i, j, k)`.
    pub fn delta(n: usize, k_count: usize, i: usize, j: usize, k: usize) -> Result<Self> {
        if i >= n || j >= n || k >= k_count {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                k,
                n,
                kk: k_count,
            });
        }
        let mut s = CorticalStack::zeros(n, k_count);
        s.values[[k, i, j]] = 1.0;
        Ok(s)
    }

    pub fn size(&self) -> usize {
        self.values.dim().1
    }

    pub fn orientations(&self) -> usize {
        self.values.dim().0
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.size(), self.orientations())
    }

    pub fn delta_theta(&self) -> f64 {
        PI / self.orientations() as f64
    }

    pub fn theta(&self, k: usize) -> f64 {
        k as f64 * self.delta_theta()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[[k, i, j]]
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array3<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array3<f64> {
        self.values
    }

    pub fn slice(&self, k: usize) -> ndarray::ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), k)
    }

    pub fn sum(&self) -> f64 {
        self.values.sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CorticalStack {
        CorticalStack {
            values: self.values.mapv(f),
        }
    }

    pub fn check_same_shape(&self, other: &CorticalStack) -> Result<()> {
        if self.values.dim() != other.values.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.values.dim()),
                got: format!("{:?}", other.values.dim()),
            });
        }
        Ok(())
    }

    /// `self + s * other`, elementwise.
    pub fn scaled_add(&self, s: f64, other: &CorticalStack) -> Result<CorticalStack> {
        self.check_same_shape(other)?;
        let mut out = self.values.clone();
        out.scaled_add(s, &other.values);
        Ok(CorticalStack { values: out })
    }

    pub fn max_abs_diff(&self, other: &CorticalStack) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(Zip::from(&self.values)
            .and(&other.values)
            .fold(0.0f64, |m, a, b| m.max((a - b).abs())))
    }
}

/// Sums a stack over orientations: `F[i, j] = sum_k a[i, j, k]`.
///
/// No `dtheta` quadrature weight is applied; the resulting global scale is
/// removed by [`renormalize`] where it matters.
pub fn project(a: &CorticalStack) -> Image {
    Image {
        values: a.values.sum_axis(Axis(0)),
    }
}

/// `||a - b|| / ||a||` over all voxels.
///
/// Returns `0` when both stacks vanish and `+inf` when only `a` does.
pub fn relative_change(a: &CorticalStack, b: &CorticalStack) -> Result<f64> {
    a.check_same_shape(b)?;
    let diff = Zip::from(&a.values)
        .and(&b.values)
        .fold(0.0, |acc, x, y| acc + (x - y) * (x - y))
        .sqrt();
    let na = a.norm();
    if na == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(diff / na)
}

/// Affine rescale onto `[0, 1]`. Constant images map to `0.5` everywhere.
pub fn renormalize(img: &Image) -> Image {
    let (lo, hi) = img.min_max();
    let span = hi - lo;
    if !(span > 0.0) {
        return Image::filled(img.size(), 0.5);
    }
    Image {
        values: img.values.mapv(|v| ((v - lo) / span).clamp(0.0, 1.0)),
    }
}
