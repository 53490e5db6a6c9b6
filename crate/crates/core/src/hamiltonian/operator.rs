use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::DriveParams;
use crate::hilbert::{Basis, StateVector};
use crate::lattice::InteractionMatrix;
use crate::{Error, Result};

/// Bases up to this many configurations keep a precomputed flip table.
const FLIP_CACHE_LIMIT: usize = 1 << 16;
const ABSENT: u32 = u32::MAX;
const PAR_CHUNK: usize = 4096;

/// Matrix-free Rydberg Hamiltonian over a fixed basis.
///
/// Diagonals are precomputed; the drive `(Ω, Δ, φ)` is supplied per call so
/// one operator serves a whole schedule.
#[derive(Debug, Clone)]
pub struct HamiltonianOperator {
    basis: Arc<Basis>,
    interaction_diag: Vec<f64>,
    popcount: Vec<u32>,
    // flips[k * n + i] = index of config k with bit i toggled
    flips: Option<Vec<u32>>,
}

impl HamiltonianOperator {
    pub fn new(basis: Arc<Basis>, interactions: &InteractionMatrix) -> Result<Self> {
        let n = basis.n_sites();
        if interactions.n_sites != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: interactions.n_sites,
            });
        }
        let interaction_diag = basis
            .configs()
            .par_iter()
            .map(|&c| {
                interactions
                    .pair_terms
                    .iter()
                    .filter(|&&(i, j, _)| (c >> i) & (c >> j) & 1 == 1)
                    .map(|t| t.2)
                    .sum()
            })
            .collect();
        let popcount = basis.configs().iter().map(|c| c.count_ones()).collect();
        let flips = (basis.len() <= FLIP_CACHE_LIMIT).then(|| {
            basis
                .configs()
                .par_iter()
                .flat_map_iter(|&c| {
                    let basis = &basis;
                    (0..n).map(move |i| basis.index_of(c ^ (1 << i)).map_or(ABSENT, |k| k as u32))
                })
                .collect()
        });
        Ok(HamiltonianOperator {
            basis,
            interaction_diag,
            popcount,
            flips,
        })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `Σ_{i<j} V_ij n_i n_j` for every configuration.
    pub fn interaction_diagonal(&self) -> &[f64] {
        &self.interaction_diag
    }

    pub fn popcounts(&self) -> &[u32] {
        &self.popcount
    }

    /// Diagonal element of configuration `k` at detuning `delta`.
    pub fn diagonal(&self, k: usize, delta: f64) -> f64 {
        self.interaction_diag[k] - delta * self.popcount[k] as f64
    }

    #[inline]
    fn flip(&self, k: usize, site: usize) -> Option<usize> {
        match &self.flips {
            Some(table) => {
                let v = table[k * self.basis.n_sites() + site];
                (v != ABSENT).then_some(v as usize)
            }
            None => self.basis.index_of(self.basis.config(k) ^ (1 << site)),
        }
    }

    /// `y = H x` for raw amplitude slices.
    pub fn apply_into(&self, params: &DriveParams, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.basis.n_sites();
        let half = 0.5 * params.omega;
        // ⟨r|H|g⟩ = (Ω/2) e^{-iφ}, ⟨g|H|r⟩ = (Ω/2) e^{iφ}
        let raise = Complex64::from_polar(half, -params.phi);
        let lower = raise.conj();
        let configs = self.basis.configs();
        let drive = params.omega != 0.0;
        y.par_chunks_mut(PAR_CHUNK).enumerate().for_each(|(chunk, out)| {
            let base = chunk * PAR_CHUNK;
            for (off, yk) in out.iter_mut().enumerate() {
                let k = base + off;
                let mut acc = x[k] * self.diagonal(k, params.delta);
                if drive {
                    let c = configs[k];
                    for i in 0..n {
                        if let Some(kk) = self.flip(k, i) {
                            let coeff = if (c >> i) & 1 == 1 { raise } else { lower };
                            acc += coeff * x[kk];
                        }
                    }
                }
                *yk = acc;
            }
        });
    }

    /// `H ψ` (unnormalized).
    pub fn apply(&self, params: &DriveParams, state: &StateVector) -> Result<StateVector> {
        self.check_basis(state)?;
        let mut out = StateVector::zeros(self.basis.clone());
        self.apply_into(params, state.amplitudes(), out.amplitudes_mut());
        Ok(out)
    }

    /// `⟨ψ|H|ψ⟩`; real for Hermitian `H`, the imaginary part is returned for checks.
    pub fn expectation(&self, params: &DriveParams, state: &StateVector) -> Result<Complex64> {
        let h = self.apply(params, state)?;
        Ok(state.inner(&h))
    }

    /// Gershgorin bound on the spectral norm.
    pub fn norm_bound(&self, params: &DriveParams) -> f64 {
        let n = self.basis.n_sites();
        let half = 0.5 * params.omega.abs();
        (0..self.dim())
            .into_par_iter()
            .map(|k| {
                let off = (0..n).filter(|&i| self.flip(k, i).is_some()).count() as f64 * half;
                self.diagonal(k, params.delta).abs() + off
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Dense matrix assembled column by column from [`apply_into`](Self::apply_into).
    pub fn to_dense(&self, params: &DriveParams) -> Vec<Vec<Complex64>> {
        let d = self.dim();
        let mut cols = Vec::with_capacity(d);
        let mut e = vec![Complex64::new(0.0, 0.0); d];
        let mut y = vec![Complex64::new(0.0, 0.0); d];
        for j in 0..d {
            e[j] = Complex64::new(1.0, 0.0);
            self.apply_into(params, &e, &mut y);
            cols.push(y.clone());
            e[j] = Complex64::new(0.0, 0.0);
        }
        // transpose to row-major
        (0..d).map(|i| (0..d).map(|j| cols[j][i]).collect()).collect()
    }

    pub(crate) fn check_basis(&self, state: &StateVector) -> Result<()> {
        if !Arc::ptr_eq(state.basis(), &self.basis) && **state.basis() != *self.basis {
            return Err(Error::InvalidArgument("state and operator use different bases".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{BasisConfig, Constraint};
    use crate::lattice::Lattice;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn op_for(l: &Lattice, constraint: Constraint, v0: f64, range: f64) -> HamiltonianOperator {
        let basis = Arc::new(Basis::enumerate(&BasisConfig::for_lattice(l, constraint)).unwrap());
        let v = InteractionMatrix::new(l, v0, range).unwrap();
        HamiltonianOperator::new(basis, &v).unwrap()
    }

    #[test]
    fn single_site_matrix() {
        let l = Lattice::square(1, 1, 1.0).unwrap();
        let op = op_for(&l, Constraint::Full, 1.0, 1.0);
        let m = op.to_dense(&DriveParams::new(3.0, 0.0, 0.0));
        assert_eq!(m, vec![vec![c(0.0, 0.0), c(1.5, 0.0)], vec![c(1.5, 0.0), c(0.0, 0.0)]]);

        let psi = StateVector::ground(op.basis().clone());
        let out = op.apply(&DriveParams::new(2.0, 0.7, 0.0), &psi).unwrap();
        assert_eq!(out.amplitudes(), &[c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn pair_diagonal() {
        let l = Lattice::square(2, 1, 1.0).unwrap();
        let op = op_for(&l, Constraint::Full, 5.0, 1.0);
        let delta = 1.3;
        let diag: Vec<f64> = (0..4).map(|k| op.diagonal(k, delta)).collect();
        assert_eq!(diag, vec![0.0, -delta, -delta, -2.0 * delta + 5.0]);
    }

    #[test]
    fn plaquette_interaction() {
        let l = Lattice::square(2, 2, 1.0).unwrap();
        let op = op_for(&l, Constraint::Full, 1.0, 2.0);
        // brute force over pairs of the full plaquette
        let mut expected = 0.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                expected += 1.0 / l.distance(i, j).powi(6);
            }
        }
        assert!((op.interaction_diagonal()[0b1111] - expected).abs() < 1e-14);
        assert!((expected - 4.25).abs() < 1e-14);
    }

    #[test]
    fn zero_maps_to_zero() {
        let l = Lattice::square(2, 2, 1.0).unwrap();
        let op = op_for(&l, Constraint::Full, 1.0, 2.0);
        let z = StateVector::zeros(op.basis().clone());
        let out = op.apply(&DriveParams::new(1.0, 2.0, 0.3), &z).unwrap();
        assert!(out.amplitudes().iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn expectation_is_real() {
        let l = Lattice::square(3, 3, 1.0).unwrap();
        let op = op_for(&l, Constraint::Full, 2.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let psi = StateVector::random(op.basis().clone(), &mut rng);
            let e = op.expectation(&DriveParams::new(1.1, 0.4, 0.9), &psi).unwrap();
            assert!(e.im.abs() < 1e-12, "imaginary part {}", e.im);
        }
    }

    #[test]
    fn blockade_basis_is_hermitian() {
        let l = Lattice::square(3, 2, 1.0).unwrap();
        let op = op_for(&l, Constraint::NnBlockade, 2.0, 2.0);
        let m = op.to_dense(&DriveParams::new(1.0, 0.5, 1.2));
        for i in 0..m.len() {
            for j in 0..m.len() {
                assert!((m[i][j] - m[j][i].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn mismatched_basis_rejected() {
        let l = Lattice::square(2, 2, 1.0).unwrap();
        let op = op_for(&l, Constraint::Full, 1.0, 2.0);
        let other = Arc::new(Basis::enumerate(&BasisConfig::full(3)).unwrap());
        let psi = StateVector::ground(other);
        assert!(op.apply(&DriveParams::new(1.0, 0.0, 0.0), &psi).is_err());
        let v3 = InteractionMatrix::new(&Lattice::square(3, 1, 1.0).unwrap(), 1.0, 1.0).unwrap();
        assert!(HamiltonianOperator::new(op.basis().clone(), &v3).is_err());
    }
}
