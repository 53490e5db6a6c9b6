//! Projective read-out: Born-rule shot sampling and the detection-error channel.
//!
//! Sampling is sharded: shard `k` draws its shots from a ChaCha8 stream seeded
//! with `seed + k`, so results are identical regardless of thread count.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hilbert::StateVector;
use crate::{Error, Result};

pub const SHARD_SIZE: usize = 4096;

/// Independent per-site read-out errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionModel {
    /// Probability that a ground-state atom is read as Rydberg (lost).
    pub p_g_loss: f64,
    /// Probability that a Rydberg atom is read as ground (recaptured).
    pub p_r_recapture: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        DetectionModel {
            p_g_loss: 0.01,
            p_r_recapture: 0.009,
        }
    }
}

impl DetectionModel {
    /// Read-out without microwave-enhanced Rydberg detection.
    pub fn without_mw_enhancement() -> Self {
        DetectionModel {
            p_g_loss: 0.01,
            p_r_recapture: 0.15,
        }
    }

    pub fn perfect() -> Self {
        DetectionModel {
            p_g_loss: 0.0,
            p_r_recapture: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..1.0).contains(&p);
        if !ok(self.p_g_loss) || !ok(self.p_r_recapture) {
            return Err(Error::InvalidArgument(format!(
                "detection probabilities must lie in [0, 1), got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShotMetadata {
    pub seed: u64,
    pub schedule_hash: Option<String>,
    pub noise: Option<DetectionModel>,
    pub noise_seed: Option<u64>,
}

/// Number of 64-bit words needed for `n_sites` bits.
pub fn words_for(n_sites: usize) -> usize {
    n_sites.div_ceil(64).max(1)
}

#[inline]
pub fn bit(words: &[u64], site: usize) -> bool {
    (words[site / 64] >> (site % 64)) & 1 == 1
}

#[inline]
pub fn set_bit(words: &mut [u64], site: usize, value: bool) {
    let (w, b) = (site / 64, site % 64);
    if value {
        words[w] |= 1 << b;
    } else {
        words[w] &= !(1 << b);
    }
}

/// Single-shot occupation images, stored as packed bit strings (site `i` is
/// bit `i % 64` of word `i / 64`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSet {
    pub n_sites: usize,
    /// `(cols, rows)` for square grids, row-major site order.
    pub grid: Option<(usize, usize)>,
    words: usize,
    data: Vec<u64>,
    pub metadata: ShotMetadata,
}

impl ShotSet {
    pub fn empty(n_sites: usize, grid: Option<(usize, usize)>) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidArgument("shot set needs at least one site".into()));
        }
        if let Some((c, r)) = grid {
            if c * r != n_sites {
                return Err(Error::DimensionMismatch {
                    expected: n_sites,
                    got: c * r,
                });
            }
        }
        Ok(ShotSet {
            n_sites,
            grid,
            words: words_for(n_sites),
            data: Vec::new(),
            metadata: ShotMetadata::default(),
        })
    }

    /// Builds a shot set from single-word patterns (`n_sites <= 64`).
    pub fn new(n_sites: usize, grid: Option<(usize, usize)>, shots: Vec<u64>) -> Result<Self> {
        if n_sites > 64 {
            return Err(Error::InvalidArgument(
                "single-word shots need n_sites <= 64; use from_patterns".into(),
            ));
        }
        let mut set = Self::empty(n_sites, grid)?;
        for s in shots {
            set.push(&[s])?;
        }
        Ok(set)
    }

    /// Builds a shot set from multi-word patterns.
    pub fn from_patterns(n_sites: usize, grid: Option<(usize, usize)>, shots: &[Vec<u64>]) -> Result<Self> {
        let mut set = Self::empty(n_sites, grid)?;
        for s in shots {
            set.push(s)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, shot: &[u64]) -> Result<()> {
        if shot.len() != self.words {
            return Err(Error::DimensionMismatch {
                expected: self.words,
                got: shot.len(),
            });
        }
        let tail = self.n_sites % 64;
        if tail != 0 && shot[self.words - 1] >> tail != 0 {
            return Err(Error::InvalidArgument(format!("shot has bits beyond {} sites", self.n_sites)));
        }
        self.data.extend_from_slice(shot);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.words
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn words_per_shot(&self) -> usize {
        self.words
    }

    pub fn shot(&self, k: usize) -> &[u64] {
        &self.data[k * self.words..(k + 1) * self.words]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u64]> + '_ {
        self.data.chunks_exact(self.words)
    }

    /// Occupation of `site` in shot `k`.
    pub fn get(&self, k: usize, site: usize) -> bool {
        bit(self.shot(k), site)
    }

    /// Shot `k` as 0/1 values.
    pub fn occupations(&self, k: usize) -> Vec<f64> {
        let s = self.shot(k);
        (0..self.n_sites).map(|i| if bit(s, i) { 1.0 } else { 0.0 }).collect()
    }

    /// Single-word view of every shot; only valid for `n_sites <= 64`.
    pub fn single_words(&self) -> Option<&[u64]> {
        (self.words == 1).then_some(self.data.as_slice())
    }

    pub fn require_grid(&self) -> Result<(usize, usize)> {
        self.grid
            .ok_or_else(|| Error::NotSquareGrid("shot set without grid dimensions".into()))
    }

    /// One row per shot, columns `site_0..site_{N-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.n_sites).map(|i| format!("site_{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::with_capacity(2 * self.n_sites);
        for s in self.iter() {
            line.clear();
            for i in 0..self.n_sites {
                if i > 0 {
                    line.push(',');
                }
                line.push(if bit(s, i) { '1' } else { '0' });
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`write_csv`](Self::write_csv). Grid and
    /// metadata come from the JSON sidecar. Lines starting with `#` are
    /// skipped.
    pub fn read_csv<R: BufRead>(r: R, grid: Option<(usize, usize)>) -> Result<Self> {
        let mut lines = r
            .lines()
            .filter(|l| !matches!(l, Ok(text) if text.starts_with('#')));
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty shot file".into()))??;
        let n_sites = header.split(',').count();
        for (i, col) in header.split(',').enumerate() {
            if col.trim() != format!("site_{i}") {
                return Err(Error::InvalidArgument(format!("unexpected column '{col}'")));
            }
        }
        let mut set = Self::empty(n_sites, grid)?;
        let mut buf = vec![0u64; set.words];
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            buf.iter_mut().for_each(|w| *w = 0);
            let mut count = 0;
            for (i, v) in line.split(',').enumerate() {
                match v.trim() {
                    "0" => {}
                    "1" if i < n_sites => set_bit(&mut buf, i, true),
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "row {}: value '{other}' is not 0 or 1",
                            row + 2
                        )))
                    }
                }
                count += 1;
            }
            if count != n_sites {
                return Err(Error::InvalidArgument(format!(
                    "row {} has {count} columns, expected {n_sites}",
                    row + 2
                )));
            }
            set.push(&buf)?;
        }
        Ok(set)
    }

    /// JSON sidecar: grid dimensions, shot count and provenance.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "n_sites": self.n_sites,
            "grid": self.grid,
            "n_shots": self.len(),
            "metadata": self.metadata,
        })
    }

    /// Per-site empirical excitation frequency.
    pub fn site_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_sites];
        for s in self.iter() {
            for (i, mi) in m.iter_mut().enumerate() {
                if bit(s, i) {
                    *mi += 1.0;
                }
            }
        }
        let inv = 1.0 / self.len().max(1) as f64;
        m.iter_mut().for_each(|x| *x *= inv);
        m
    }
}

fn shard_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(SHARD_SIZE))
        .map(|k| (k, (SHARD_SIZE).min(n - k * SHARD_SIZE)))
        .collect()
}

/// Draws `n_shots` configurations with probability `|ψ_c|²`.
pub fn sample(state: &StateVector, n_shots: usize, seed: u64) -> Result<ShotSet> {
    if n_shots == 0 {
        return Err(Error::InvalidArgument("n_shots must be at least 1".into()));
    }
    state.check_normalized(1e-6)?;
    let basis = state.basis();
    let mut cdf = Vec::with_capacity(basis.len());
    let mut acc = 0.0;
    for a in state.amplitudes() {
        acc += a.norm_sqr();
        cdf.push(acc);
    }
    let total = acc;
    let configs = basis.configs();
    let shots: Vec<u64> = shard_ranges(n_shots)
        .into_par_iter()
        .flat_map_iter(|(k, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let cdf = &cdf;
            (0..len).map(move |_| {
                let u = rng.random::<f64>() * total;
                let idx = cdf.partition_point(|&c| c <= u).min(configs.len() - 1);
                configs[idx]
            })
        })
        .collect();
    let mut set = ShotSet::new(basis.n_sites(), None, shots)?;
    set.metadata.seed = seed;
    Ok(set)
}

/// Like [`sample`], tagging the shots with square-grid dimensions.
pub fn sample_grid(state: &StateVector, grid: (usize, usize), n_shots: usize, seed: u64) -> Result<ShotSet> {
    let mut s = sample(state, n_shots, seed)?;
    if grid.0 * grid.1 != s.n_sites {
        return Err(Error::DimensionMismatch {
            expected: s.n_sites,
            got: grid.0 * grid.1,
        });
    }
    s.grid = Some(grid);
    Ok(s)
}

/// Flips each read bit independently: `0 → 1` with `p_g_loss`, `1 → 0` with
/// `p_r_recapture`.
pub fn apply_detection_noise(shots: &ShotSet, model: &DetectionModel, seed: u64) -> Result<ShotSet> {
    model.validate()?;
    let n = shots.n_sites;
    let w = shots.words;
    let noisy: Vec<u64> = shard_ranges(shots.len())
        .into_par_iter()
        .flat_map_iter(|(k, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let chunk = &shots.data[k * SHARD_SIZE * w..(k * SHARD_SIZE + len) * w];
            chunk.chunks_exact(w).flat_map(move |s| {
                let mut out = s.to_vec();
                for i in 0..n {
                    let u: f64 = rng.random();
                    if bit(s, i) {
                        if u < model.p_r_recapture {
                            set_bit(&mut out, i, false);
                        }
                    } else if u < model.p_g_loss {
                        set_bit(&mut out, i, true);
                    }
                }
                out
            })
        })
        .collect();
    let mut out = shots.clone();
    out.data = noisy;
    out.metadata.noise = Some(*model);
    out.metadata.noise_seed = Some(seed);
    Ok(out)
}

/// Fraction of shots exactly equal to either pattern of the pair.
pub fn perfect_order_probability(shots: &ShotSet, pattern_pair: (&[u64], &[u64])) -> Result<f64> {
    shots.require_grid()?;
    for p in [pattern_pair.0, pattern_pair.1] {
        if p.len() != shots.words {
            return Err(Error::DimensionMismatch {
                expected: shots.words,
                got: p.len(),
            });
        }
    }
    if shots.is_empty() {
        return Err(Error::InvalidArgument("no shots".into()));
    }
    let hits = shots
        .iter()
        .filter(|&s| s == pattern_pair.0 || s == pattern_pair.1)
        .count();
    Ok(hits as f64 / shots.len() as f64)
}
