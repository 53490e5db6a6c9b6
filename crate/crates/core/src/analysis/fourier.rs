//! Single-shot Fourier amplitudes `F(k) = |Σ_i e^{i k·x_i} n_i| / √N` and the
//! order parameters built from their symmetrized ensemble means.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::Ensemble;
use crate::hilbert::StateVector;
use crate::measure::ShotSet;
use crate::Result;

/// Ensemble-mean `F` at a list of `(k₁, k₂)` points, `k₁` conjugate to the
/// column index and `k₂` to the row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSpectrum {
    pub kpoints: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// When set, each value is `½[F(k₁,k₂) + F(k₂,k₁)]`.
    pub symmetrized: bool,
}

impl FourierSpectrum {
    /// Value at the requested point, matched to 1e-9.
    pub fn at(&self, k1: f64, k2: f64) -> Option<f64> {
        self.kpoints
            .iter()
            .position(|&(a, b)| (a - k1).abs() < 1e-9 && (b - k2).abs() < 1e-9)
            .map(|i| self.values[i])
    }
}

/// The discrete grid `2π m / cols × 2π m' / rows`.
pub fn discrete_kpoints(cols: usize, rows: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(cols * rows);
    for m2 in 0..rows {
        for m1 in 0..cols {
            out.push((2.0 * PI * m1 as f64 / cols as f64, 2.0 * PI * m2 as f64 / rows as f64));
        }
    }
    out
}

struct Phases {
    // per k-point, per site: (cos, sin)
    table: Vec<Vec<(f64, f64)>>,
    inv_sqrt_n: f64,
}

impl Phases {
    fn new(cols: usize, rows: usize, kpoints: &[(f64, f64)]) -> Self {
        let table = kpoints
            .iter()
            .map(|&(k1, k2)| {
                (0..cols * rows)
                    .map(|i| {
                        let ph = k1 * (i % cols) as f64 + k2 * (i / cols) as f64;
                        (ph.cos(), ph.sin())
                    })
                    .collect()
            })
            .collect();
        Phases {
            table,
            inv_sqrt_n: 1.0 / ((cols * rows) as f64).sqrt(),
        }
    }

    fn amplitude(&self, q: usize, occ: &[f64]) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (&n, &(c, s)) in occ.iter().zip(&self.table[q]) {
            if n != 0.0 {
                re += n * c;
                im += n * s;
            }
        }
        re.hypot(im) * self.inv_sqrt_n
    }
}

fn spectrum(ens: &Ensemble, kpoints: Option<&[(f64, f64)]>, symmetrize: bool) -> FourierSpectrum {
    let kpoints = kpoints.map_or_else(|| discrete_kpoints(ens.cols, ens.rows), <[_]>::to_vec);
    let mut all = kpoints.clone();
    if symmetrize {
        all.extend(kpoints.iter().map(|&(a, b)| (b, a)));
    }
    let phases = Phases::new(ens.cols, ens.rows, &all);
    let nk = kpoints.len();
    let (values, stderr) = ens.reduce(nk, |s, out| {
        let occ = ens.occupation(s);
        for (q, o) in out.iter_mut().enumerate() {
            *o = if symmetrize {
                0.5 * (phases.amplitude(q, occ) + phases.amplitude(q + nk, occ))
            } else {
                phases.amplitude(q, occ)
            };
        }
    });
    FourierSpectrum {
        kpoints,
        values,
        stderr,
        symmetrized: symmetrize,
    }
}

/// Shot-averaged `F` (or `F̃` when `symmetrize`) at `kpoints`, defaulting to
/// the discrete grid.
pub fn fourier(shots: &ShotSet, kpoints: Option<&[(f64, f64)]>, symmetrize: bool) -> Result<FourierSpectrum> {
    Ok(spectrum(&Ensemble::from_shots(shots)?, kpoints, symmetrize))
}

/// Born-weighted counterpart of [`fourier`].
pub fn fourier_exact(
    state: &StateVector,
    grid: (usize, usize),
    kpoints: Option<&[(f64, f64)]>,
    symmetrize: bool,
) -> Result<FourierSpectrum> {
    Ok(spectrum(&Ensemble::from_state(state, grid)?, kpoints, symmetrize))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderParameters {
    /// `F̃(π,π) − F̃(0,π)`
    pub checkerboard: f64,
    /// `F̃(0,π) − F̃(π/2,π)`
    pub striated: f64,
    /// `F̃(π,π/2)`
    pub star: f64,
    pub checkerboard_err: f64,
    pub striated_err: f64,
    pub star_err: f64,
}

const ORDER_KPOINTS: [(f64, f64); 4] = [(PI, PI), (0.0, PI), (FRAC_PI_2, PI), (PI, FRAC_PI_2)];

fn order(ens: &Ensemble) -> OrderParameters {
    let mut all = ORDER_KPOINTS.to_vec();
    all.extend(ORDER_KPOINTS.iter().map(|&(a, b)| (b, a)));
    let phases = Phases::new(ens.cols, ens.rows, &all);
    // per shot: the three differences, so errors include the covariance
    let (m, e) = ens.reduce(3, |s, out| {
        let occ = ens.occupation(s);
        let f: Vec<f64> = (0..4)
            .map(|q| 0.5 * (phases.amplitude(q, occ) + phases.amplitude(q + 4, occ)))
            .collect();
        out[0] = f[0] - f[1];
        out[1] = f[1] - f[2];
        out[2] = f[3];
    });
    OrderParameters {
        checkerboard: m[0],
        striated: m[1],
        star: m[2],
        checkerboard_err: e[0],
        striated_err: e[1],
        star_err: e[2],
    }
}

/// Checkerboard, striated and star order parameters from shots.
pub fn order_parameters(shots: &ShotSet) -> Result<OrderParameters> {
    Ok(order(&Ensemble::from_shots(shots)?))
}

/// Born-weighted counterpart of [`order_parameters`].
pub fn order_parameters_exact(state: &StateVector, grid: (usize, usize)) -> Result<OrderParameters> {
    Ok(order(&Ensemble::from_state(state, grid)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::patterns;

    fn ensemble(pattern: Vec<u64>, cols: usize, rows: usize) -> ShotSet {
        ShotSet::from_patterns(cols * rows, Some((cols, rows)), &vec![pattern; 4]).unwrap()
    }

    #[test]
    fn checkerboard_peak() {
        let (a, b) = patterns::checkerboard_pair(12, 12);
        let shots = ShotSet::from_patterns(144, Some((12, 12)), &[a, b]).unwrap();
        let f = fourier(&shots, Some(&[(PI, PI), (0.0, 0.0)]), false).unwrap();
        assert!((f.values[0] - 6.0).abs() < 1e-12);
        assert!((f.values[1] - 6.0).abs() < 1e-12);
        let op = order_parameters(&shots).unwrap();
        assert!((op.checkerboard - 6.0).abs() < 1e-12);
        assert!(op.striated.abs() < 1e-12 && op.star.abs() < 1e-12);
    }

    #[test]
    fn striated_peaks() {
        let shots = ensemble(patterns::striated(12, 12), 12, 12);
        let f = fourier(&shots, Some(&[(PI, 0.0), (0.0, PI), (PI, PI)]), false).unwrap();
        for v in f.values {
            assert!((v - 3.0).abs() < 1e-12);
        }
        let op = order_parameters(&shots).unwrap();
        assert!(op.checkerboard.abs() < 1e-12);
        assert!((op.striated - 3.0).abs() < 1e-12);
        assert!(op.star.abs() < 1e-12);
    }

    #[test]
    fn star_value_matches_enumeration() {
        let (cols, rows) = (12, 12);
        let pat = patterns::star(cols, rows);
        // brute-force sum over the drawn sites
        let direct = |k1: f64, k2: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (c, r) in patterns::sites(&pat, cols, rows) {
                let ph = k1 * c as f64 + k2 * r as f64;
                re += ph.cos();
                im += ph.sin();
            }
            re.hypot(im) / 12.0
        };
        let expected = 0.5 * (direct(PI, FRAC_PI_2) + direct(FRAC_PI_2, PI));
        let op = order_parameters(&ensemble(pat, cols, rows)).unwrap();
        assert!((op.star - expected).abs() < 1e-12);
        assert!((expected - 1.5).abs() < 1e-12);
    }

    #[test]
    fn symmetrized_is_symmetric() {
        let shots = ensemble(patterns::star(8, 6), 8, 6);
        let k = [(0.3, 1.9), (1.9, 0.3)];
        let f = fourier(&shots, Some(&k), true).unwrap();
        assert_eq!(f.values[0], f.values[1]);
        let grid = fourier(&shots, None, false).unwrap();
        assert_eq!(grid.kpoints.len(), 48);
        assert!(grid.values.iter().all(|&v| v >= 0.0));
        // F(0,0) = N_exc / √N
        assert!((grid.at(0.0, 0.0).unwrap() - 12.0 / 48f64.sqrt()).abs() < 1e-12);
    }
}
