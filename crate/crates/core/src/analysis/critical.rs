//! Critical-point location from the peak of the susceptibility `∂⟨n⟩/∂Δ`,
//! estimated with cubic fits over a family of windows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalPointOptions {
    /// Unit for the window bounds (pass `Ω` to give windows in `Δ/Ω`).
    pub scale: f64,
    /// Fit windows `[lo, hi]` in units of `scale`.
    pub windows: Vec<(f64, f64)>,
    /// Minimum number of data points inside a window.
    pub min_points: usize,
}

impl Default for CriticalPointOptions {
    /// Windows spanning roughly `Δ/Ω ∈ [0, 2]`, with each end shifted by up
    /// to ±0.2 in steps of 0.1 (25 windows).
    fn default() -> Self {
        let shifts = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let windows = shifts
            .iter()
            .flat_map(|&a| shifts.iter().map(move |&b| (a, 2.0 + b)))
            .collect();
        CriticalPointOptions {
            scale: 1.0,
            windows,
            min_points: 6,
        }
    }
}

impl CriticalPointOptions {
    pub fn with_scale(scale: f64) -> Self {
        CriticalPointOptions {
            scale,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
    /// Susceptibility peak, or `None` when the fit derivative has no
    /// interior maximum.
    pub peak: Option<f64>,
    pub rss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// Mean peak location over accepted windows (same units as the input).
    pub delta_c: f64,
    /// Sample standard deviation of the per-window peaks.
    pub uncertainty: f64,
    pub windows: Vec<WindowFit>,
}

/// Fits `a + b u + c u² + d u³` with `u = (x − mid)/half` and returns the
/// maximum of the derivative if it lies strictly inside the window.
fn fit_window(x: &[f64], y: &[f64], lo: f64, hi: f64) -> (Option<f64>, f64) {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let n = x.len();
    let a = DMatrix::from_fn(n, 4, |i, j| ((x[i] - mid) / half).powi(j as i32));
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let Ok(coef) = svd.solve(&b, 1e-14) else {
        return (None, f64::NAN);
    };
    let rss = (&a * &coef - &b).norm_squared();
    let (c2, c3) = (coef[2], coef[3]);
    let size = coef.iter().map(|v| v.abs()).sum::<f64>() + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // derivative b + 2cu + 3du² has a maximum only for d < 0
    if c3 >= -1e-9 * size {
        return (None, rss);
    }
    let u = -c2 / (3.0 * c3);
    if u.abs() >= 1.0 {
        return (None, rss);
    }
    (Some(mid + u * half), rss)
}

/// Locates the susceptibility peak of `density(delta)`.
///
/// Each window gives a cubic fit; windows whose fitted derivative peaks in
/// their interior contribute, and the result is their mean and spread.
pub fn critical_point(delta: &[f64], density: &[f64], options: &CriticalPointOptions) -> Result<CriticalPoint> {
    if delta.len() != density.len() {
        return Err(Error::DimensionMismatch {
            expected: delta.len(),
            got: density.len(),
        });
    }
    if delta.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 (Δ, ⟨n⟩) points, got {}",
            delta.len()
        )));
    }
    if delta.iter().chain(density).any(|v| !v.is_finite()) || !(options.scale > 0.0) {
        return Err(Error::InvalidArgument("non-finite input".into()));
    }
    let mut fits = Vec::with_capacity(options.windows.len());
    for &(lo, hi) in &options.windows {
        let (lo, hi) = (lo * options.scale, hi * options.scale);
        let (xs, ys): (Vec<f64>, Vec<f64>) = delta
            .iter()
            .zip(density)
            .filter(|(x, _)| **x >= lo && **x <= hi)
            .map(|(x, y)| (*x, *y))
            .unzip();
        let (peak, rss) = if xs.len() >= options.min_points.max(5) {
            fit_window(&xs, &ys, lo, hi)
        } else {
            (None, f64::NAN)
        };
        fits.push(WindowFit {
            lo,
            hi,
            n_points: xs.len(),
            peak,
            rss,
        });
    }
    let peaks: Vec<f64> = fits.iter().filter_map(|f| f.peak).collect();
    if peaks.is_empty() {
        return Err(Error::Fit("no window yields an interior susceptibility maximum".into()));
    }
    let n = peaks.len() as f64;
    let mean = peaks.iter().sum::<f64>() / n;
    let spread = if peaks.len() > 1 {
        (peaks.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(CriticalPoint {
        delta_c: mean,
        uncertainty: spread,
        windows: fits,
    })
}
