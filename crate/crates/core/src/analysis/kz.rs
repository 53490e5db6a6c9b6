//! Kibble-Zurek rescaling of correlation-length growth curves and the
//! collapse distance used to fit the exponent `ν`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Correlation length versus detuning for one sweep rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KzCurve {
    /// Sweep rate; any positive unit shared by all curves.
    pub rate: f64,
    pub delta: Vec<f64>,
    pub xi: Vec<f64>,
    pub xi_err: Vec<f64>,
}

impl KzCurve {
    pub fn new(rate: f64, delta: Vec<f64>, xi: Vec<f64>, xi_err: Vec<f64>) -> Result<Self> {
        let c = KzCurve {
            rate,
            delta,
            xi,
            xi_err,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("sweep rate must be positive, got {}", self.rate)));
        }
        let n = self.delta.len();
        if self.xi.len() != n || self.xi_err.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.xi.len().min(self.xi_err.len()),
            });
        }
        if n < 5 {
            return Err(Error::InvalidArgument(format!("curve at rate {} has {n} points (need 5)", self.rate)));
        }
        if self.delta.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("detunings must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Linear interpolation of `ξ(Δ)`; `None` outside the sampled range.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let d = &self.delta;
        if x < d[0] || x > d[d.len() - 1] {
            return None;
        }
        let j = d.partition_point(|&v| v <= x).clamp(1, d.len() - 1);
        let t = (x - d[j - 1]) / (d[j] - d[j - 1]);
        Some(self.xi[j - 1] + t * (self.xi[j] - self.xi[j - 1]))
    }
}

/// `(µ, κ) = (ν/(1+zν), −1/(1+zν))`.
pub fn kz_exponents(z: f64, nu: f64) -> (f64, f64) {
    let denom = 1.0 + z * nu;
    (nu / denom, -1.0 / denom)
}

/// `ξ̃ = ξ (s/s₀)^µ`, `Δ̃ = (Δ − Δ_c)(s/s₀)^κ` for every curve.
pub fn kz_rescale(curves: &[KzCurve], s0: f64, z: f64, nu: f64, delta_c: f64) -> Result<Vec<KzCurve>> {
    if !(s0 > 0.0) {
        return Err(Error::InvalidArgument(format!("reference rate must be positive, got {s0}")));
    }
    let (mu, kappa) = kz_exponents(z, nu);
    curves
        .iter()
        .map(|c| {
            c.validate()?;
            let ratio = c.rate / s0;
            let fx = ratio.powf(kappa);
            let fy = ratio.powf(mu);
            Ok(KzCurve {
                rate: c.rate,
                delta: c.delta.iter().map(|d| (d - delta_c) * fx).collect(),
                xi: c.xi.iter().map(|x| x * fy).collect(),
                xi_err: c.xi_err.iter().map(|x| x * fy).collect(),
            })
        })
        .collect()
}

/// Root-mean-square distance between every curve's points and every other
/// curve's linear interpolant, restricted to the common overlap domain.
pub fn collapse_distance(rescaled: &[KzCurve]) -> Result<f64> {
    if rescaled.len() < 2 {
        return Err(Error::InvalidArgument("collapse needs at least two curves".into()));
    }
    // canonical order makes the sum independent of input order
    let mut curves: Vec<&KzCurve> = rescaled.iter().collect();
    curves.sort_by(|a, b| {
        a.rate
            .total_cmp(&b.rate)
            .then_with(|| a.delta.iter().zip(&b.delta).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal))
            .then_with(|| a.xi.iter().zip(&b.xi).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal))
    });
    let lo = curves.iter().map(|c| c.delta[0]).fold(f64::NEG_INFINITY, f64::max);
    let hi = curves.iter().map(|c| c.delta[c.delta.len() - 1]).fold(f64::INFINITY, f64::min);
    if !(lo <= hi) {
        return Err(Error::Fit("rescaled curves have no common overlap".into()));
    }
    let mut sum = 0.0;
    let mut terms = 0usize;
    for (i, f) in curves.iter().enumerate() {
        for (ip, other) in curves.iter().enumerate() {
            if ip == i {
                continue;
            }
            for (&x, &y) in other.delta.iter().zip(&other.xi) {
                if x < lo || x > hi {
                    continue;
                }
                let fx = f.interpolate(x).expect("overlap point inside every curve");
                sum += (y - fx).powi(2);
                terms += 1;
            }
        }
    }
    if terms == 0 {
        return Err(Error::Fit("no data points inside the overlap domain".into()));
    }
    Ok((sum / terms as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuScan {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for NuScan {
    fn default() -> Self {
        NuScan {
            lo: 0.3,
            hi: 1.2,
            step: 0.005,
        }
    }
}

impl NuScan {
    fn grid(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuFit {
    pub nu: f64,
    /// Combined uncertainty `√(σ_curv² + σ_Δc²)`.
    pub nu_err: f64,
    /// Half-width where `D` grows by 50% above its minimum, from the local curvature.
    pub nu_err_curvature: f64,
    /// Half the shift of the optimum when `Δ_c` moves by `±σ_Δc`.
    pub nu_err_delta_c: f64,
    pub delta_c: f64,
    pub d_min: f64,
    /// True when the optimum sits on the edge of the scan range.
    pub at_boundary: bool,
    /// `(ν, D)` over the scan grid; `D` is `NaN` where no overlap exists.
    pub scan: Vec<(f64, f64)>,
}

fn scan_distance(curves: &[KzCurve], s0: f64, z: f64, delta_c: f64, grid: &[f64]) -> Vec<f64> {
    grid.par_iter()
        .map(|&nu| {
            kz_rescale(curves, s0, z, nu, delta_c)
                .and_then(|r| collapse_distance(&r))
                .unwrap_or(f64::NAN)
        })
        .collect()
}

/// Grid argmin refined by the vertex of the parabola through its neighbors.
fn refine(grid: &[f64], d: &[f64]) -> Option<(f64, f64, f64, bool)> {
    let (k, &dmin) = d
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    if k == 0 || k + 1 == grid.len() || !d[k - 1].is_finite() || !d[k + 1].is_finite() {
        return Some((grid[k], dmin, f64::NAN, true));
    }
    let h = grid[1] - grid[0];
    let curv = (d[k - 1] - 2.0 * dmin + d[k + 1]) / (h * h);
    if curv <= 0.0 {
        return Some((grid[k], dmin, f64::NAN, false));
    }
    let shift = -(d[k + 1] - d[k - 1]) / (2.0 * h * curv);
    let nu = grid[k] + shift.clamp(-h, h);
    let d_vertex = (dmin - 0.5 * curv * shift * shift).max(0.0);
    Some((nu, d_vertex, curv, false))
}

/// Scans `ν`, returning the collapse optimum with uncertainties from the
/// curvature of `D` and from `delta_c_err`.
pub fn fit_nu(
    curves: &[KzCurve],
    s0: f64,
    z: f64,
    delta_c: f64,
    delta_c_err: f64,
    scan: NuScan,
) -> Result<NuFit> {
    if curves.len() < 2 {
        return Err(Error::InvalidArgument("collapse needs at least two curves".into()));
    }
    for c in curves {
        c.validate()?;
    }
    if !(scan.step > 0.0 && scan.hi > scan.lo) {
        return Err(Error::InvalidArgument(format!("bad ν scan {scan:?}")));
    }
    let grid = scan.grid();
    let d = scan_distance(curves, s0, z, delta_c, &grid);
    let (nu, d_min, curv, at_boundary) =
        refine(&grid, &d).ok_or_else(|| Error::Fit("no ν in the scan gives an overlap domain".into()))?;
    // D(ν) ≈ D_min + ½ D'' (ν − ν*)²  →  +50% at ±√(D_min/D'')
    let nu_err_curvature = if curv.is_finite() && curv > 0.0 {
        (d_min.max(f64::EPSILON) / curv).sqrt()
    } else {
        f64::NAN
    };
    let nu_err_delta_c = if delta_c_err > 0.0 {
        let shifted: Vec<f64> = [delta_c - delta_c_err, delta_c + delta_c_err]
            .iter()
            .map(|&dc| {
                let ds = scan_distance(curves, s0, z, dc, &grid);
                refine(&grid, &ds).map_or(f64::NAN, |r| r.0)
            })
            .collect();
        0.5 * (shifted[1] - shifted[0]).abs()
    } else {
        0.0
    };
    let combine = |x: f64| if x.is_finite() { x * x } else { 0.0 };
    Ok(NuFit {
        nu,
        nu_err: (combine(nu_err_curvature) + combine(nu_err_delta_c)).sqrt(),
        nu_err_curvature,
        nu_err_delta_c,
        delta_c,
        d_min,
        at_boundary,
        scan: grid.into_iter().zip(d).collect(),
    })
}

/// Scaling function of the synthetic family, `g(x) = 1 + ln(1 + e^{2x})`.
pub fn synthetic_scaling_function(x: f64) -> f64 {
    1.0 + (2.0 * x).exp().ln_1p()
}

/// Curves obeying exact Kibble-Zurek scaling with exponents `(z, ν)`:
/// `ξ = (s/s₀)^{−µ} g((Δ − Δ_c)(s/s₀)^κ)`.
pub fn synthetic_curves(rates: &[f64], delta: &[f64], s0: f64, z: f64, nu: f64, delta_c: f64) -> Result<Vec<KzCurve>> {
    let (mu, kappa) = kz_exponents(z, nu);
    rates
        .iter()
        .map(|&s| {
            let ratio = s / s0;
            let xi: Vec<f64> = delta
                .iter()
                .map(|d| ratio.powf(-mu) * synthetic_scaling_function((d - delta_c) * ratio.powf(kappa)))
                .collect();
            KzCurve::new(s, delta.to_vec(), xi, vec![0.0; delta.len()])
        })
        .collect()
}
