//! Many-body bases over occupation bit patterns and complex state vectors.
//!
//! Bit `i` of a configuration is the occupation `n_i` of site `i`. Bases are
//! stored in ascending numeric order so that serialized amplitudes are
//! portable between implementations.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lattice::Lattice;
use crate::{Error, Result};

pub const FULL_BASIS_CAP: usize = 24;
pub const BLOCKADE_BASIS_CAP: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Full,
    NnBlockade,
}

impl Constraint {
    fn code(self) -> u8 {
        match self {
            Constraint::Full => 0,
            Constraint::NnBlockade => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisConfig {
    pub n_sites: usize,
    pub constraint: Constraint,
    pub neighbor_pairs: Vec<(usize, usize)>,
}

impl BasisConfig {
    pub fn full(n_sites: usize) -> Self {
        BasisConfig {
            n_sites,
            constraint: Constraint::Full,
            neighbor_pairs: Vec::new(),
        }
    }

    pub fn for_lattice(lattice: &Lattice, constraint: Constraint) -> Self {
        let neighbor_pairs = match constraint {
            Constraint::Full => Vec::new(),
            Constraint::NnBlockade => lattice.nearest_neighbor_pairs(),
        };
        BasisConfig {
            n_sites: lattice.len(),
            constraint,
            neighbor_pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    n_sites: usize,
    constraint: Constraint,
    neighbor_masks: Vec<u64>,
    configs: Vec<u64>,
}

impl Basis {
    pub fn enumerate(config: &BasisConfig) -> Result<Self> {
        let n = config.n_sites;
        if n == 0 {
            return Err(Error::InvalidArgument("basis needs at least one site".into()));
        }
        let mut neighbor_masks = vec![0u64; n];
        match config.constraint {
            Constraint::Full => {
                if n > FULL_BASIS_CAP {
                    return Err(Error::SizeCap {
                        what: "full basis sites (2^N)",
                        requested: n,
                        cap: FULL_BASIS_CAP,
                    });
                }
            }
            Constraint::NnBlockade => {
                if n > BLOCKADE_BASIS_CAP {
                    return Err(Error::SizeCap {
                        what: "blockade basis sites",
                        requested: n,
                        cap: BLOCKADE_BASIS_CAP,
                    });
                }
                for &(i, j) in &config.neighbor_pairs {
                    if i >= n || j >= n || i == j {
                        return Err(Error::InvalidArgument(format!(
                            "neighbour pair ({i}, {j}) invalid for {n} sites"
                        )));
                    }
                    neighbor_masks[i] |= 1 << j;
                    neighbor_masks[j] |= 1 << i;
                }
            }
        }
        let configs = match config.constraint {
            Constraint::Full => (0..(1u64 << n)).collect(),
            Constraint::NnBlockade => independent_sets(n, &neighbor_masks),
        };
        Ok(Basis {
            n_sites: n,
            constraint: config.constraint,
            neighbor_masks,
            configs,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn config(&self, k: usize) -> u64 {
        self.configs[k]
    }

    /// Position of a bit pattern in the basis, if present.
    #[inline]
    pub fn index_of(&self, bits: u64) -> Option<usize> {
        match self.constraint {
            Constraint::Full => {
                if bits < self.configs.len() as u64 {
                    Some(bits as usize)
                } else {
                    None
                }
            }
            Constraint::NnBlockade => self.configs.binary_search(&bits).ok(),
        }
    }

    /// Whether a pattern satisfies this basis' constraint.
    pub fn admits(&self, bits: u64) -> bool {
        if self.n_sites < 64 && bits >> self.n_sites != 0 {
            return false;
        }
        match self.constraint {
            Constraint::Full => true,
            Constraint::NnBlockade => (0..self.n_sites)
                .all(|i| bits & (1 << i) == 0 || bits & self.neighbor_masks[i] == 0),
        }
    }
}

// Depth-first over sites from the most significant bit down; choosing 0
// before 1 at every level yields the patterns in ascending numeric order.
fn independent_sets(n: usize, masks: &[u64]) -> Vec<u64> {
    fn recurse(remaining: usize, bits: u64, masks: &[u64], out: &mut Vec<u64>) {
        if remaining == 0 {
            out.push(bits);
            return;
        }
        let site = remaining - 1;
        recurse(site, bits, masks, out);
        if bits & masks[site] == 0 {
            recurse(site, bits | (1 << site), masks, out);
        }
    }
    let mut out = Vec::new();
    recurse(n, 0, masks, &mut out);
    out
}

/// Occupation `n_i` of `site` in a configuration.
pub fn occupation(bits: u64, site: usize, n_sites: usize) -> Result<u8> {
    if site >= n_sites || site >= 64 {
        return Err(Error::InvalidArgument(format!(
            "site {site} out of range for {n_sites} sites"
        )));
    }
    Ok(((bits >> site) & 1) as u8)
}

/// Fraction of excited sites.
pub fn hamming_density(bits: u64, n_sites: usize) -> f64 {
    bits.count_ones() as f64 / n_sites as f64
}

/// A pure state over a shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: Arc<Basis>,
    amplitudes: Vec<Complex64>,
}

const STATE_MAGIC: &[u8; 4] = b"RYSV";

impl StateVector {
    pub fn new(basis: Arc<Basis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: amplitudes.len(),
            });
        }
        Ok(StateVector { basis, amplitudes })
    }

    pub fn zeros(basis: Arc<Basis>) -> Self {
        let n = basis.len();
        StateVector {
            basis,
            amplitudes: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// The product state given by a bit pattern.
    pub fn basis_state(basis: Arc<Basis>, bits: u64) -> Result<Self> {
        let k = basis.index_of(bits).ok_or_else(|| {
            Error::InvalidArgument(format!("pattern {bits:#b} is not in the basis"))
        })?;
        let mut s = Self::zeros(basis);
        s.amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// All atoms in the ground state.
    pub fn ground(basis: Arc<Basis>) -> Self {
        Self::basis_state(basis, 0).expect("empty pattern is always admitted")
    }

    /// Normalized random state, used for seeded iterative solvers and tests.
    pub fn random<R: Rng>(basis: Arc<Basis>, rng: &mut R) -> Self {
        let amplitudes = (0..basis.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut s = StateVector { basis, amplitudes };
        s.normalize();
        s
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescales to unit norm and returns the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        }
        n
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Born-rule probabilities per basis configuration.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn check_normalized(&self, tol: f64) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > tol {
            return Err(Error::NotNormalized(n));
        }
        Ok(())
    }

    /// Binary snapshot: magic, version, `n_sites: u32`, constraint, bytes per
    /// component, `n_configs: u64`, then little-endian `(re, im)` pairs.
    pub fn write_binary<W: Write>(&self, mut w: W, single_precision: bool) -> Result<()> {
        w.write_all(STATE_MAGIC)?;
        w.write_all(&[1u8])?;
        w.write_all(&(self.basis.n_sites() as u32).to_le_bytes())?;
        w.write_all(&[self.basis.constraint().code()])?;
        w.write_all(&[if single_precision { 4 } else { 8 }])?;
        w.write_all(&(self.basis.len() as u64).to_le_bytes())?;
        for a in &self.amplitudes {
            if single_precision {
                w.write_all(&(a.re as f32).to_le_bytes())?;
                w.write_all(&(a.im as f32).to_le_bytes())?;
            } else {
                w.write_all(&a.re.to_le_bytes())?;
                w.write_all(&a.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a snapshot written by [`write_binary`](Self::write_binary); the
    /// header must match `basis`.
    pub fn read_binary<R: Read>(mut r: R, basis: Arc<Basis>) -> Result<Self> {
        let mut head = [0u8; 19];
        r.read_exact(&mut head)?;
        if &head[..4] != STATE_MAGIC || head[4] != 1 {
            return Err(Error::InvalidArgument("not a state vector snapshot".into()));
        }
        let n_sites = u32::from_le_bytes(head[5..9].try_into().unwrap()) as usize;
        let constraint = head[9];
        let width = head[10];
        let n_configs = u64::from_le_bytes(head[11..19].try_into().unwrap()) as usize;
        if n_sites != basis.n_sites()
            || constraint != basis.constraint().code()
            || n_configs != basis.len()
        {
            return Err(Error::InvalidArgument("snapshot header does not match basis".into()));
        }
        let mut amplitudes = Vec::with_capacity(n_configs);
        match width {
            8 => {
                let mut buf = [0u8; 16];
                for _ in 0..n_configs {
                    r.read_exact(&mut buf)?;
                    amplitudes.push(Complex64::new(
                        f64::from_le_bytes(buf[..8].try_into().unwrap()),
                        f64::from_le_bytes(buf[8..].try_into().unwrap()),
                    ));
                }
            }
            4 => {
                let mut buf = [0u8; 8];
                for _ in 0..n_configs {
                    r.read_exact(&mut buf)?;
                    amplitudes.push(Complex64::new(
                        f32::from_le_bytes(buf[..4].try_into().unwrap()) as f64,
                        f32::from_le_bytes(buf[4..].try_into().unwrap()) as f64,
                    ));
                }
            }
            w => return Err(Error::InvalidArgument(format!("unsupported component width {w}"))),
        }
        Self::new(basis, amplitudes)
    }
}
