//! Poggendorff test figures.
//!
//! Pixel `(row, col)` covers `[col, col+1] x [row, row+1]` in continuous
//! coordinates with `y` pointing down. An incidence angle `phi` means the
//! drawn lines rise to the right at `phi` from the horizontal, i.e. they run
//! along `(cos phi, -sin phi)`. The reference diagonal passes through the
//! image center; grating lines are spaced `grating_period` apart along the
//! horizontal, so every scan line crosses about `N / grating_period` of them. Pixel values are area coverages estimated on
//! a 4x4 subpixel grid.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cortical::Image;
use crate::error::{Error, Result};

const SUBSAMPLES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub n: usize,
    pub bar_width: usize,
    /// Radians from the horizontal, in `(0, pi)` excluding `pi/2`.
    pub incidence_angle: f64,
    pub line_thickness: f64,
    /// Horizontal line spacing in pixels; `0` draws the classic figure.
    pub grating_period: f64,
    pub bar_gray: f64,
    pub background: f64,
    pub line_value: f64,
}

/// A straight line `point + t * direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub point: (f64, f64),
    pub direction: (f64, f64),
}

impl Line {
    /// Row coordinate where the line crosses the vertical `x`.
    pub fn y_at(&self, x: f64) -> f64 {
        let (px, py) = self.point;
        let (dx, dy) = self.direction;
        py + (x - px) * dy / dx
    }

    /// Unsigned distance from `(x, y)` to the line.
    pub fn distance(&self, x: f64, y: f64) -> f64 {
        let (px, py) = self.point;
        let (dx, dy) = self.direction;
        ((x - px) * dy - (y - py) * dx).abs()
    }
}

impl StimulusSpec {
    /// Classic figure: 30 px bar, diagonal at pi/3, scaled from a 200 px canvas.
    pub fn classic(n: usize) -> Self {
        let scale = n as f64 / 200.0;
        StimulusSpec {
            n,
            bar_width: scaled_bar(n, 30.0 * scale),
            incidence_angle: std::f64::consts::FRAC_PI_3,
            line_thickness: (2.0 * scale).max(1.0),
            grating_period: 0.0,
            bar_gray: 0.5,
            background: 1.0,
            line_value: 0.0,
        }
    }

    /// Classic figure with a background grating of period 25 px (at 200 px).
    pub fn gratings(n: usize) -> Self {
        let scale = n as f64 / 200.0;
        StimulusSpec {
            grating_period: 25.0 * scale,
            ..Self::classic(n)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::param("N", "must be >= 8"));
        }
        if self.bar_width == 0 || 2 * self.bar_width >= self.n {
            return Err(Error::param("bar_width", "must satisfy 0 < bar_width < N/2"));
        }
        let phi = self.incidence_angle;
        if !(phi > 0.0 && phi < std::f64::consts::PI) || (phi - FRAC_PI_2).abs() < 1e-9 {
            return Err(Error::param(
                "incidence_angle",
                "must lie in (0, pi) and differ from pi/2",
            ));
        }
        if !(self.line_thickness > 0.0 && self.line_thickness.is_finite()) {
            return Err(Error::param("line_thickness", "must be positive"));
        }
        if !(self.grating_period >= 0.0 && self.grating_period.is_finite()) {
            return Err(Error::param("grating_period", "must be >= 0"));
        }
        if self.grating_period > 0.0 && self.perpendicular_period() <= self.line_thickness {
            return Err(Error::param("grating_period", "must exceed the line thickness"));
        }
        for (name, v) in [
            ("bar_gray", self.bar_gray),
            ("background", self.background),
            ("line_value", self.line_value),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, "gray values must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// First and one-past-last bar columns.
    pub fn bar_columns(&self) -> (usize, usize) {
        let left = (self.n - self.bar_width) / 2;
        (left, left + self.bar_width)
    }

    /// The reference diagonal through the image center; on the right of the
    /// bar it is the exact geometric continuation of the left segment.
    pub fn reference_line(&self) -> Line {
        let c = self.n as f64 / 2.0;
        Line {
            point: (c, c),
            direction: (self.incidence_angle.cos(), -self.incidence_angle.sin()),
        }
    }

    /// Distance between neighbouring grating lines measured across them.
    pub fn perpendicular_period(&self) -> f64 {
        self.grating_period * self.incidence_angle.sin()
    }

    /// Signed perpendicular offsets of every grating line from the reference.
    fn line_offsets(&self) -> Vec<f64> {
        if self.grating_period == 0.0 {
            return vec![0.0];
        }
        let spacing = self.perpendicular_period();
        // the square's extent along the normal is at most n * sqrt(2)
        let reach = (self.n as f64 * std::f64::consts::SQRT_2 / spacing).ceil() as i64;
        (-reach..=reach).map(|m| m as f64 * spacing).collect()
    }

    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        format!(
            "n={}\nbar_width={}\nincidence_angle={}\nline_thickness={}\ngrating_period={}\nbar_gray={}\nbackground={}\nline_value={}\n",
            self.n,
            self.bar_width,
            self.incidence_angle,
            self.line_thickness,
            self.grating_period,
            self.bar_gray,
            self.background,
            self.line_value
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map = parse_kv(text)?;
        let get = |key: &'static str| -> Result<&str> {
            map.get(key).map(String::as_str).ok_or_else(|| Error::Format {
                what: "stimulus spec",
                reason: format!("missing key `{key}`"),
            })
        };
        fn num<T: FromStr>(key: &'static str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Format {
                what: "stimulus spec",
                reason: format!("bad value `{v}` for `{key}`"),
            })
        }
        let spec = StimulusSpec {
            n: num("n", get("n")?)?,
            bar_width: num("bar_width", get("bar_width")?)?,
            incidence_angle: num("incidence_angle", get("incidence_angle")?)?,
            line_thickness: num("line_thickness", get("line_thickness")?)?,
            grating_period: num("grating_period", get("grating_period")?)?,
            bar_gray: num("bar_gray", get("bar_gray")?)?,
            background: num("background", get("background")?)?,
            line_value: num("line_value", get("line_value")?)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn render(&self) -> Image {
        let reference = self.reference_line();
        let (nx, ny) = (-reference.direction.1, reference.direction.0);
        let (cx, cy) = reference.point;
        let offsets = self.line_offsets();
        let half = self.line_thickness / 2.0;
        let (bar_lo, bar_hi) = self.bar_columns();
        let step = 1.0 / SUBSAMPLES as f64;
        Image::from_fn(self.n, |(row, col)| {
            if (bar_lo..bar_hi).contains(&col) {
                return self.bar_gray;
            }
            let mut covered = 0usize;
            for sy in 0..SUBSAMPLES {
                for sx in 0..SUBSAMPLES {
                    let x = col as f64 + (sx as f64 + 0.5) * step;
                    let y = row as f64 + (sy as f64 + 0.5) * step;
                    let signed = (x - cx) * nx + (y - cy) * ny;
                    if offsets.iter().any(|o| (signed - o).abs() <= half) {
                        covered += 1;
                    }
                }
            }
            let frac = covered as f64 / (SUBSAMPLES * SUBSAMPLES) as f64;
            frac * self.line_value + (1.0 - frac) * self.background
        })
    }
}

fn scaled_bar(n: usize, width: f64) -> usize {
    // keep n - bar even so the bar is centered exactly
    let mut w = width.round().max(2.0) as usize;
    if (n - w.min(n)) % 2 != 0 {
        w += 1;
    }
    w
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
            what: "key=value block",
            reason: format!("line without `=`: {line}"),
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl fmt::Display for StimulusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_kv())
    }
}

/// White field, gray vertical bar, one diagonal interrupted by the bar.
pub fn poggendorff_classic(spec: &StimulusSpec) -> Result<Image> {
    spec.validate()?;
    if spec.grating_period != 0.0 {
        return Err(Error::param("grating_period", "classic figure needs period 0"));
    }
    Ok(spec.render())
}

/// Parallel diagonal grating occluded by the central bar.
pub fn poggendorff_gratings(spec: &StimulusSpec) -> Result<Image> {
    spec.validate()?;
    if spec.grating_period <= 0.0 {
        return Err(Error::param("grating_period", "gratings need a positive period"));
    }
    Ok(spec.render())
}

/// Dispatches on `grating_period`.
pub fn render(spec: &StimulusSpec) -> Result<Image> {
    if spec.grating_period > 0.0 {
        poggendorff_gratings(spec)
    } else {
        poggendorff_classic(spec)
    }
}
