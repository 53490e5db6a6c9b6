//! Array geometries and the truncated van der Waals interaction matrix.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const DIST_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    Honeycomb,
    Triangular,
}

impl std::fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LatticeKind::Square => "square",
            LatticeKind::Honeycomb => "honeycomb",
            LatticeKind::Triangular => "triangular",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(LatticeKind::Square),
            "honeycomb" => Ok(LatticeKind::Honeycomb),
            "triangular" => Ok(LatticeKind::Triangular),
            other => Err(Error::InvalidArgument(format!("unknown lattice kind '{other}'"))),
        }
    }
}

/// A finite array of trap sites.
///
/// Coordinates are stored in units of the lattice spacing; physical distances
/// are `spacing_a` times the coordinate distance. Square lattices are ordered
/// row-major (`index = row * nx + col`) and carry integer grid indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeRecord", into = "LatticeRecord")]
pub struct Lattice {
    kind: LatticeKind,
    nx: usize,
    ny: usize,
    spacing_a: f64,
    sites: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct LatticeRecord {
    kind: LatticeKind,
    nx: usize,
    ny: usize,
    spacing_a: f64,
    sites: Vec<[f64; 2]>,
}

impl From<Lattice> for LatticeRecord {
    fn from(l: Lattice) -> Self {
        LatticeRecord {
            kind: l.kind,
            nx: l.nx,
            ny: l.ny,
            spacing_a: l.spacing_a,
            sites: l.sites,
        }
    }
}

impl TryFrom<LatticeRecord> for Lattice {
    type Error = Error;

    fn try_from(r: LatticeRecord) -> Result<Self> {
        let built = Lattice::new(r.kind, r.nx, r.ny, r.spacing_a)?;
        let consistent = built.sites.len() == r.sites.len()
            && built
                .sites
                .iter()
                .zip(&r.sites)
                .all(|(a, b)| (a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
        if !consistent {
            return Err(Error::InvalidArgument(
                "site list does not match the declared geometry".into(),
            ));
        }
        Ok(built)
    }
}

impl Lattice {
    pub fn new(kind: LatticeKind, nx: usize, ny: usize, spacing_a: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "lattice dimensions must be positive, got {nx}x{ny}"
            )));
        }
        if !(spacing_a > 0.0 && spacing_a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lattice spacing must be positive, got {spacing_a}"
            )));
        }
        let sites = match kind {
            LatticeKind::Square => (0..ny)
                .flat_map(|r| (0..nx).map(move |c| [c as f64, r as f64]))
                .collect(),
            // rhombic patch: each row shifted by half a spacing
            LatticeKind::Triangular => {
                let h = 3f64.sqrt() / 2.0;
                (0..ny)
                    .flat_map(|r| (0..nx).map(move |c| [c as f64 + 0.5 * r as f64, h * r as f64]))
                    .collect()
            }
            // nx * ny unit cells of two sites, nearest-neighbour distance 1
            LatticeKind::Honeycomb => {
                let s3 = 3f64.sqrt();
                let mut v = Vec::with_capacity(2 * nx * ny);
                for r in 0..ny {
                    for c in 0..nx {
                        let x = s3 * c as f64 + 0.5 * s3 * r as f64;
                        let y = 1.5 * r as f64;
                        v.push([x, y]);
                        v.push([x, y + 1.0]);
                    }
                }
                v
            }
        };
        Ok(Lattice {
            kind,
            nx,
            ny,
            spacing_a,
            sites,
        })
    }

    pub fn square(nx: usize, ny: usize, spacing_a: f64) -> Result<Self> {
        Self::new(LatticeKind::Square, nx, ny, spacing_a)
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_a
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Site coordinates in units of the spacing.
    pub fn sites(&self) -> &[[f64; 2]] {
        &self.sites
    }

    /// Returns a copy with a different spacing and identical site ordering.
    pub fn with_spacing(&self, spacing_a: f64) -> Result<Self> {
        Self::new(self.kind, self.nx, self.ny, spacing_a)
    }

    /// Distance between two sites in physical units.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distance_sq(i, j).sqrt()
    }

    pub fn distance_sq(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.sites[i], self.sites[j]);
        self.spacing_a * self.spacing_a * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
    }

    /// `(col, row)` of a site; `None` for lattices without a grid.
    pub fn grid_index(&self, i: usize) -> Option<(usize, usize)> {
        match self.kind {
            LatticeKind::Square => Some((i % self.nx, i / self.nx)),
            _ => None,
        }
    }

    /// Grid dimensions `(cols, rows)`, or a typed error for non-square lattices.
    pub fn require_grid(&self) -> Result<(usize, usize)> {
        match self.kind {
            LatticeKind::Square => Ok((self.nx, self.ny)),
            k => Err(Error::NotSquareGrid(k.to_string())),
        }
    }

    /// Pairs `(i, j)`, `i < j`, at the minimum inter-site distance.
    pub fn nearest_neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.distance(i, j) / self.spacing_a - 1.0).abs() < DIST_EPS {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Number of nearest neighbours of every site.
    pub fn coordination(&self) -> Vec<usize> {
        let mut c = vec![0; self.len()];
        for (i, j) in self.nearest_neighbor_pairs() {
            c[i] += 1;
            c[j] += 1;
        }
        c
    }
}

/// Pairwise `V_ij = v0 / r_ij^6` with all pairs beyond `truncation_range` dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionMatrix {
    pub n_sites: usize,
    pub v0: f64,
    pub truncation_range: f64,
    pub pair_terms: Vec<(usize, usize, f64)>,
}

impl InteractionMatrix {
    /// Builds the truncated interaction list. `truncation_range` is a physical
    /// length; pass `f64::INFINITY` to keep every pair.
    pub fn new(lattice: &Lattice, v0: f64, truncation_range: f64) -> Result<Self> {
        if !(v0 > 0.0 && v0.is_finite()) {
            return Err(Error::InvalidArgument(format!("v0 must be positive, got {v0}")));
        }
        if !(truncation_range >= lattice.spacing() * (1.0 - DIST_EPS)) {
            return Err(Error::InvalidArgument(format!(
                "truncation range {truncation_range} is shorter than the spacing {}",
                lattice.spacing()
            )));
        }
        let n = lattice.len();
        let cutoff = truncation_range * (1.0 + DIST_EPS);
        let mut pair_terms = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let r2 = lattice.distance_sq(i, j);
                if r2.sqrt() <= cutoff {
                    pair_terms.push((i, j, v0 / (r2 * r2 * r2)));
                }
            }
        }
        Ok(InteractionMatrix {
            n_sites: n,
            v0,
            truncation_range,
            pair_terms,
        })
    }

    /// Default truncation: third-nearest neighbour on the square lattice (2a).
    pub fn third_neighbor(lattice: &Lattice, v0: f64) -> Result<Self> {
        Self::new(lattice, v0, 2.0 * lattice.spacing())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pair_terms
            .iter()
            .find(|&&(p, q, _)| p == a && q == b)
            .map_or(0.0, |t| t.2)
    }

    /// Dense symmetric matrix, zero diagonal.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n_sites]; self.n_sites];
        for &(i, j, v) in &self.pair_terms {
            m[i][j] = v;
            m[j][i] = v;
        }
        m
    }
}

/// `R_b = (v0 / omega)^(1/6)`.
pub fn blockade_radius(v0: f64, omega: f64) -> Result<f64> {
    if !(v0 > 0.0 && omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "blockade radius needs v0 > 0 and omega > 0, got {v0}, {omega}"
        )));
    }
    Ok((v0 / omega).powf(1.0 / 6.0))
}

/// The `v0` that puts the blockade radius at `rb_over_a` spacings.
pub fn v0_for_blockade(rb_over_a: f64, omega: f64, spacing_a: f64) -> f64 {
    omega * (rb_over_a * spacing_a).powi(6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{mhz, to_mhz};
    use approx::assert_relative_eq;

    #[test]
    fn square_two_by_two() {
        let l = Lattice::square(2, 2, 1.0).unwrap();
        assert_eq!(l.sites(), &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        assert_eq!(l.grid_index(3), Some((1, 1)));
    }

    #[test]
    fn sixteen_by_sixteen() {
        assert_eq!(Lattice::square(16, 16, 6.7).unwrap().len(), 256);
    }

    #[test]
    fn triangular_interior_has_six_neighbours() {
        let l = Lattice::new(LatticeKind::Triangular, 3, 3, 1.0).unwrap();
        assert_eq!(l.len(), 9);
        // brute force: count sites at unit distance from the centre site
        let centre = 4;
        let count = (0..9)
            .filter(|&j| j != centre && (l.distance(centre, j) - 1.0).abs() < 1e-9)
            .count();
        assert_eq!(count, 6);
        assert_eq!(l.coordination()[centre], 6);
    }

    #[test]
    fn honeycomb_geometry() {
        let l = Lattice::new(LatticeKind::Honeycomb, 3, 3, 1.0).unwrap();
        assert_eq!(l.len(), 18);
        assert!(l.coordination().iter().all(|&c| c <= 3));
        assert!(l.coordination().contains(&3));
        assert!(l.require_grid().is_err());
    }

    #[test]
    fn min_distance_is_spacing() {
        for kind in [LatticeKind::Square, LatticeKind::Honeycomb, LatticeKind::Triangular] {
            let l = Lattice::new(kind, 4, 3, 2.5).unwrap();
            let mut min = f64::INFINITY;
            for i in 0..l.len() {
                for j in (i + 1)..l.len() {
                    min = min.min(l.distance(i, j));
                }
            }
            assert_relative_eq!(min, 2.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Lattice::square(0, 3, 1.0).is_err());
        assert!(Lattice::square(3, 3, 0.0).is_err());
        assert!("hexagonal".parse::<LatticeKind>().is_err());
    }

    #[test]
    fn interaction_values_square() {
        let l = Lattice::square(3, 3, 1.0).unwrap();
        let v = InteractionMatrix::new(&l, 1.0, 2.0).unwrap();
        assert_relative_eq!(v.get(0, 1), 1.0);
        assert_relative_eq!(v.get(0, 4), 1.0 / 8.0, epsilon = 1e-14);
        assert_relative_eq!(v.get(0, 2), 1.0 / 64.0, epsilon = 1e-14);
        // sqrt(5) is beyond 2a
        assert_eq!(v.get(0, 5), 0.0);
        assert!(v.pair_terms.iter().all(|&(i, j, _)| i < j));
    }

    #[test]
    fn interaction_from_blockade_radius() {
        let omega = mhz(4.3);
        let v0 = v0_for_blockade(1.15, omega, 1.0);
        assert_relative_eq!(to_mhz(v0), 9.95, epsilon = 0.01);
        // striated point: diagonal interaction 1.47^6 / 8 * 4.2 MHz
        let v_diag = v0_for_blockade(1.47, mhz(4.2), 1.0) / 8.0;
        assert_relative_eq!(to_mhz(v_diag), 5.3, epsilon = 0.05);
    }

    #[test]
    fn blockade_radius_examples() {
        assert_relative_eq!(blockade_radius(3.0, 3.0).unwrap(), 1.0);
        let a: f64 = 6.7;
        let v0 = mhz(9.95) * a.powi(6);
        assert_relative_eq!(blockade_radius(v0, mhz(4.3)).unwrap() / a, 1.15, epsilon = 5e-4);
        assert_relative_eq!(blockade_radius(64.0 * 2.0 * a.powi(6), 2.0).unwrap(), 2.0 * a, epsilon = 1e-12);
        assert!(blockade_radius(0.0, 1.0).is_err());
    }

    #[test]
    fn json_shape() {
        let l = Lattice::square(2, 1, 6.7).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"square","nx":2,"ny":1,"spacing_a":6.7,"sites":[[0.0,0.0],[1.0,0.0]]}"#
        );
        let back: Lattice = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
        let tampered = s.replace("[1.0,0.0]", "[5.0,0.0]");
        assert!(serde_json::from_str::<Lattice>(&tampered).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn truncation_is_monotone(nx in 1usize..5, ny in 1usize..5, r1 in 1.0f64..3.0, dr in 0.0f64..2.0) {
                let l = Lattice::square(nx, ny, 1.0).unwrap();
                let small = InteractionMatrix::new(&l, 2.0, r1).unwrap();
                let big = InteractionMatrix::new(&l, 2.0, r1 + dr).unwrap();
                for &(i, j, v) in &small.pair_terms {
                    prop_assert_eq!(big.get(i, j), v);
                }
                prop_assert!(big.pair_terms.len() >= small.pair_terms.len());
            }

            #[test]
            fn spacing_scales_as_inverse_sixth(c in 0.5f64..3.0) {
                let l = Lattice::square(3, 3, 1.0).unwrap();
                let lc = l.with_spacing(c).unwrap();
                let v = InteractionMatrix::new(&l, 1.0, f64::INFINITY).unwrap();
                let vc = InteractionMatrix::new(&lc, 1.0, f64::INFINITY).unwrap();
                for (a, b) in v.pair_terms.iter().zip(&vc.pair_terms) {
                    prop_assert_eq!((a.0, a.1), (b.0, b.1));
                    prop_assert!((b.2 - a.2 * c.powi(-6)).abs() <= 1e-13 * b.2.abs());
                }
            }
        }
    }
}
