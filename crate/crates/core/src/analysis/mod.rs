//! Estimators computed from shot sets, each paired with an exact
//! state-vector counterpart for validation.
//!
//! Every estimator is a weighted average over configurations. Shots carry
//! equal weights; the exact variants weight each basis configuration by its
//! Born probability, so both paths share one implementation.

pub mod conditional;
pub mod correlation;
pub mod critical;
pub mod fourier;
pub mod kz;
pub mod patterns;

pub use conditional::{conditional_densities, conditional_density, conditional_density_exact, ConditionalDensity};
pub use correlation::{
    fit_correlation_length, g2_density, g2_density_exact, g2_m, g2_m_exact, staggered_field, CorrelationLength,
    CorrelationMap, Direction, FitWindow, MapKind,
};
pub use critical::{critical_point, CriticalPoint, CriticalPointOptions};
pub use fourier::{fourier, fourier_exact, order_parameters, order_parameters_exact, FourierSpectrum, OrderParameters};
pub use kz::{
    collapse_distance, fit_nu, kz_exponents, kz_rescale, synthetic_curves, synthetic_scaling_function, KzCurve, NuFit,
    NuScan,
};

use rayon::prelude::*;

use crate::hilbert::StateVector;
use crate::measure::{bit, ShotSet};
use crate::{Error, Result};

/// A weighted set of occupation images on a `cols × rows` grid.
pub(crate) struct Ensemble {
    pub cols: usize,
    pub rows: usize,
    occ: Vec<f64>,
    weights: Vec<f64>,
    /// True for shot data; false for exact Born weights (no sampling error).
    pub sampled: bool,
}

impl Ensemble {
    pub fn from_shots(shots: &ShotSet) -> Result<Self> {
        let (cols, rows) = shots.require_grid()?;
        if shots.is_empty() {
            return Err(Error::InvalidArgument("no shots".into()));
        }
        let n = shots.n_sites;
        let mut occ = Vec::with_capacity(shots.len() * n);
        for s in shots.iter() {
            occ.extend((0..n).map(|i| if bit(s, i) { 1.0 } else { 0.0 }));
        }
        let w = 1.0 / shots.len() as f64;
        Ok(Ensemble {
            cols,
            rows,
            occ,
            weights: vec![w; shots.len()],
            sampled: true,
        })
    }

    pub fn from_state(state: &StateVector, grid: (usize, usize)) -> Result<Self> {
        let basis = state.basis();
        let n = basis.n_sites();
        if grid.0 * grid.1 != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: grid.0 * grid.1,
            });
        }
        state.check_normalized(1e-6)?;
        let mut occ = Vec::new();
        let mut weights = Vec::new();
        for (&c, a) in basis.configs().iter().zip(state.amplitudes()) {
            let p = a.norm_sqr();
            if p > 0.0 {
                occ.extend((0..n).map(|i| ((c >> i) & 1) as f64));
                weights.push(p);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Ensemble {
            cols: grid.0,
            rows: grid.1,
            occ,
            weights,
            sampled: false,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.cols * self.rows
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn occupation(&self, s: usize) -> &[f64] {
        let n = self.n_sites();
        &self.occ[s * n..(s + 1) * n]
    }

    /// Weighted means and standard errors of a vector-valued quantity.
    ///
    /// `f(s, out)` writes the `dim` values for configuration `s` into a zeroed
    /// buffer. Partial sums are combined in a fixed order so results do not
    /// depend on the thread count.
    pub fn reduce<F>(&self, dim: usize, f: F) -> (Vec<f64>, Vec<f64>)
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        const CHUNK: usize = 256;
        let m = self.len();
        let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..m.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut s1 = vec![0.0; dim];
                let mut s2 = vec![0.0; dim];
                let mut v = vec![0.0; dim];
                for s in c * CHUNK..((c + 1) * CHUNK).min(m) {
                    v.iter_mut().for_each(|x| *x = 0.0);
                    f(s, &mut v);
                    // shots are summed unweighted and divided once at the end
                    let w = if self.sampled { 1.0 } else { self.weights[s] };
                    for ((a, b), x) in s1.iter_mut().zip(s2.iter_mut()).zip(&v) {
                        *a += w * x;
                        *b += w * x * x;
                    }
                }
                (s1, s2)
            })
            .collect();
        let mut mean = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for (s1, s2) in &partials {
            mean.iter_mut().zip(s1).for_each(|(a, x)| *a += x);
            sq.iter_mut().zip(s2).for_each(|(a, x)| *a += x);
        }
        if self.sampled {
            let inv = 1.0 / m as f64;
            mean.iter_mut().for_each(|x| *x *= inv);
            sq.iter_mut().for_each(|x| *x *= inv);
        }
        let err = if self.sampled && m > 1 {
            let mf = m as f64;
            mean.iter()
                .zip(&sq)
                .map(|(mu, q)| ((q - mu * mu).max(0.0) * mf / (mf - 1.0) / mf).sqrt())
                .collect()
        } else {
            vec![0.0; dim]
        };
        (mean, err)
    }
}
