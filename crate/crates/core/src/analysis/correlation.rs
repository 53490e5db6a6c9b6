//! Connected two-point correlators on the square grid and exponential
//! correlation-length fits.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Ensemble;
use crate::hilbert::StateVector;
use crate::measure::ShotSet;
use crate::{Error, Result};

/// Radial averaging bin width in sites.
pub const RADIAL_BIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// Correlator of the occupations `n_i`; rectified with `(−1)^{k+l}`.
    Density,
    /// Correlator of the staggered field `m_i`; already sign-free.
    Magnetization,
}

/// `G(k, l)` on displacements `−(cols−1)..=cols−1 × −(rows−1)..=rows−1`,
/// with `k` along columns and `l` along rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMap {
    pub kind: MapKind,
    pub cols: usize,
    pub rows: usize,
    values: Vec<f64>,
    stderr: Vec<f64>,
}

impl CorrelationMap {
    fn width(cols: usize) -> usize {
        2 * cols - 1
    }

    fn slot(&self, k: isize, l: isize) -> Option<usize> {
        let (kk, ll) = (self.cols as isize - 1, self.rows as isize - 1);
        (k.abs() <= kk && l.abs() <= ll).then(|| ((l + ll) as usize) * Self::width(self.cols) + (k + kk) as usize)
    }

    /// Map with `G(k, l) = f(k, l)` and zero errors, for synthetic data.
    pub fn from_fn(kind: MapKind, cols: usize, rows: usize, f: impl Fn(isize, isize) -> f64) -> Self {
        let (kk, ll) = (cols as isize - 1, rows as isize - 1);
        let mut values = Vec::with_capacity(Self::width(cols) * Self::width(rows));
        for l in -ll..=ll {
            for k in -kk..=kk {
                values.push(f(k, l));
            }
        }
        let stderr = vec![0.0; values.len()];
        CorrelationMap {
            kind,
            cols,
            rows,
            values,
            stderr,
        }
    }

    /// `N_(k,l)`: number of ordered site pairs at displacement `(k, l)`.
    pub fn count(&self, k: isize, l: isize) -> usize {
        if self.slot(k, l).is_none() {
            return 0;
        }
        (self.cols - k.unsigned_abs()) * (self.rows - l.unsigned_abs())
    }

    pub fn get(&self, k: isize, l: isize) -> Option<f64> {
        self.slot(k, l).map(|s| self.values[s])
    }

    pub fn stderr(&self, k: isize, l: isize) -> Option<f64> {
        self.slot(k, l).map(|s| self.stderr[s])
    }

    /// `(−1)^{k+l} G` for density maps, `G` otherwise.
    pub fn rectified(&self, k: isize, l: isize) -> Option<f64> {
        let sign = match self.kind {
            MapKind::Density if (k + l).rem_euclid(2) == 1 => -1.0,
            _ => 1.0,
        };
        self.get(k, l).map(|g| sign * g)
    }

    /// All displacements in storage order.
    pub fn displacements(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        let (kk, ll) = (self.cols as isize - 1, self.rows as isize - 1);
        (-ll..=ll).flat_map(move |l| (-kk..=kk).map(move |k| (k, l)))
    }

    /// Long format: `k,l,value,stderr,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,l,value,stderr,count")?;
        for (k, l) in self.displacements() {
            let s = self.slot(k, l).unwrap();
            writeln!(w, "{k},{l},{},{},{}", self.values[s], self.stderr[s], self.count(k, l))?;
        }
        Ok(())
    }
}

/// Staggered magnetization `m_i = (−1)^{c+r} / N_i Σ_⟨j⟩ (n_i − n_j)` of one
/// shot, with `N_i` the actual number of nearest neighbors.
pub fn staggered_field(shot: &[u64], grid: (usize, usize)) -> Result<Vec<f64>> {
    let (cols, rows) = grid;
    let n = cols * rows;
    if n == 0 || shot.len() * 64 < n {
        return Err(Error::InvalidArgument("shot does not cover the grid".into()));
    }
    if cols < 2 && rows < 2 {
        return Err(Error::NotSquareGrid("staggered field needs at least two sites".into()));
    }
    let occ: Vec<f64> = (0..n)
        .map(|i| if crate::measure::bit(shot, i) { 1.0 } else { 0.0 })
        .collect();
    let mut m = vec![0.0; n];
    staggered_into(&occ, cols, rows, &mut m);
    Ok(m)
}

pub(crate) fn staggered_into(occ: &[f64], cols: usize, rows: usize, out: &mut [f64]) {
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            let mut sum = 0.0;
            let mut count = 0usize;
            let mut add = |j: usize| {
                sum += occ[i] - occ[j];
                count += 1;
            };
            if c > 0 {
                add(i - 1);
            }
            if c + 1 < cols {
                add(i + 1);
            }
            if r > 0 {
                add(i - cols);
            }
            if r + 1 < rows {
                add(i + cols);
            }
            let sign = if (c + r) % 2 == 0 { 1.0 } else { -1.0 };
            out[i] = if count == 0 { 0.0 } else { sign * sum / count as f64 };
        }
    }
}

/// Connected correlator of a per-configuration site field.
///
/// Per configuration, `φ(k,l) = (1/N_kl) Σ_{pairs} δf_i δf_j` with `δf` the
/// deviation from the ensemble mean; `G` is the mean of `φ`, and the spread of
/// `φ` across shots gives the standard error.
fn connected(ens: &Ensemble, kind: MapKind, field: impl Fn(&[f64], &mut [f64]) + Sync) -> Result<CorrelationMap> {
    if ens.sampled && ens.len() < 2 {
        return Err(Error::InvalidArgument("correlators need at least two shots".into()));
    }
    let (cols, rows) = (ens.cols, ens.rows);
    let n = cols * rows;
    let (means, _) = ens.reduce(n, |s, out| field(ens.occupation(s), out));
    let template = CorrelationMap::from_fn(kind, cols, rows, |_, _| 0.0);
    let dim = template.values.len();
    let width = CorrelationMap::width(cols);
    let (kk, ll) = (cols - 1, rows - 1);
    let inv_count: Vec<f64> = template
        .displacements()
        .map(|(k, l)| 1.0 / template.count(k, l) as f64)
        .collect();
    let (values, stderr) = ens.reduce(dim, |s, out| {
        let mut f = vec![0.0; n];
        field(ens.occupation(s), &mut f);
        f.iter_mut().zip(&means).for_each(|(x, m)| *x -= m);
        for i in 0..n {
            if f[i] == 0.0 {
                continue;
            }
            let (ci, ri) = (i % cols, i / cols);
            for j in 0..n {
                let (cj, rj) = (j % cols, j / cols);
                let slot = (rj + ll - ri) * width + (cj + kk - ci);
                out[slot] += f[i] * f[j];
            }
        }
        out.iter_mut().zip(&inv_count).for_each(|(o, w)| *o *= w);
    });
    Ok(CorrelationMap {
        values,
        stderr,
        ..template
    })
}

fn occupation_field(occ: &[f64], out: &mut [f64]) {
    out.copy_from_slice(occ);
}

/// `G²(k,l)` of the occupations from shots.
pub fn g2_density(shots: &ShotSet) -> Result<CorrelationMap> {
    connected(&Ensemble::from_shots(shots)?, MapKind::Density, occupation_field)
}

/// `G²(k,l)` evaluated exactly from the Born distribution of `state`.
pub fn g2_density_exact(state: &StateVector, grid: (usize, usize)) -> Result<CorrelationMap> {
    connected(&Ensemble::from_state(state, grid)?, MapKind::Density, occupation_field)
}

/// `G_m(k,l)` of the staggered field from shots.
pub fn g2_m(shots: &ShotSet) -> Result<CorrelationMap> {
    let ens = Ensemble::from_shots(shots)?;
    let (cols, rows) = (ens.cols, ens.rows);
    connected(&ens, MapKind::Magnetization, move |occ, out| staggered_into(occ, cols, rows, out))
}

/// `G_m(k,l)` evaluated exactly from the Born distribution of `state`.
pub fn g2_m_exact(state: &StateVector, grid: (usize, usize)) -> Result<CorrelationMap> {
    let ens = Ensemble::from_state(state, grid)?;
    connected(&ens, MapKind::Magnetization, move |occ, out| staggered_into(occ, grid.0, grid.1, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Horizontal,
    Vertical,
    Radial,
}

/// Distance range (in sites) used by the exponential fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitWindow {
    pub r_min: f64,
    /// Upper bound; `None` means half the linear extent along the fit direction.
    pub r_max: Option<f64>,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow {
            r_min: 1.0,
            r_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationLength {
    /// Sites; infinite when the data do not decay.
    pub xi: f64,
    pub stderr: f64,
    pub infinite: bool,
    /// `(r, G_rect(r))` points that entered the fit.
    pub points: Vec<(f64, f64)>,
}

/// Fits `log G_rect(r) = c − r/ξ` by ordinary least squares.
///
/// Non-positive rectified values are dropped; at least three points must
/// remain. A slope of `−1e−6` or above is reported as `infinite`.
pub fn fit_correlation_length(
    map: &CorrelationMap,
    direction: Direction,
    window: FitWindow,
) -> Result<CorrelationLength> {
    let extent = match direction {
        Direction::Horizontal => map.cols,
        Direction::Vertical => map.rows,
        Direction::Radial => map.cols.min(map.rows),
    };
    let r_max = window.r_max.unwrap_or((extent / 2) as f64);
    let in_window = |r: f64| r >= window.r_min - 1e-12 && r <= r_max + 1e-12;
    let mut raw: Vec<(f64, f64)> = Vec::new();
    match direction {
        Direction::Horizontal | Direction::Vertical => {
            for r in 1..extent as isize {
                let (k, l) = if direction == Direction::Horizontal { (r, 0) } else { (0, r) };
                if in_window(r as f64) {
                    raw.push((r as f64, map.rectified(k, l).unwrap()));
                }
            }
        }
        Direction::Radial => {
            // count-weighted bins of width RADIAL_BIN
            let mut bins: Vec<(usize, f64, f64, f64)> = Vec::new();
            for (k, l) in map.displacements() {
                let d = ((k * k + l * l) as f64).sqrt();
                if d == 0.0 || !in_window(d) {
                    continue;
                }
                let b = (d / RADIAL_BIN + 1e-9).floor() as usize;
                let w = map.count(k, l) as f64;
                let g = map.rectified(k, l).unwrap();
                match bins.iter_mut().find(|e| e.0 == b) {
                    Some(e) => {
                        e.1 += w;
                        e.2 += w * d;
                        e.3 += w * g;
                    }
                    None => bins.push((b, w, w * d, w * g)),
                }
            }
            bins.sort_by_key(|e| e.0);
            raw = bins.iter().map(|e| (e.2 / e.1, e.3 / e.1)).collect();
        }
    }
    let points: Vec<(f64, f64)> = raw.into_iter().filter(|p| p.1 > 0.0).collect();
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "only {} positive points in the fit window (need 3)",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all fit points at the same distance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1.ln() - intercept - slope * p.0).powi(2))
        .sum();
    let slope_err = if points.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    if slope >= -1e-6 {
        return Ok(CorrelationLength {
            xi: f64::INFINITY,
            stderr: f64::INFINITY,
            infinite: true,
            points,
        });
    }
    Ok(CorrelationLength {
        xi: -1.0 / slope,
        stderr: slope_err / (slope * slope),
        infinite: false,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::patterns;

    fn af_mixture(cols: usize, rows: usize, n: usize) -> ShotSet {
        let (a, b) = patterns::checkerboard_pair(cols, rows);
        let shots: Vec<Vec<u64>> = (0..n).map(|k| if k % 2 == 0 { a.clone() } else { b.clone() }).collect();
        ShotSet::from_patterns(cols * rows, Some((cols, rows)), &shots).unwrap()
    }

    #[test]
    fn af_mixture_g2() {
        let shots = af_mixture(4, 3, 100);
        let g = g2_density(&shots).unwrap();
        for (k, l) in g.displacements() {
            let expect = if (k + l).rem_euclid(2) == 0 { 0.25 } else { -0.25 };
            assert!((g.get(k, l).unwrap() - expect).abs() < 1e-12, "({k},{l})");
            assert!((g.rectified(k, l).unwrap() - 0.25).abs() < 1e-12);
        }
        assert_eq!(g.count(0, 0), 12);
        assert_eq!(g.count(-3, 2), 1);
        assert_eq!(g.count(4, 0), 0);
    }

    #[test]
    fn repeated_shot_has_no_correlations() {
        let (a, _) = patterns::checkerboard_pair(3, 3);
        let shots = ShotSet::from_patterns(9, Some((3, 3)), &vec![a; 10]).unwrap();
        let g = g2_density(&shots).unwrap();
        assert!(g.displacements().all(|(k, l)| g.get(k, l).unwrap() == 0.0));
        assert!(g2_density(&ShotSet::from_patterns(9, Some((3, 3)), &[vec![0]]).unwrap()).is_err());
    }

    #[test]
    fn staggered_extremes() {
        let (a, b) = patterns::checkerboard_pair(4, 5);
        assert!(staggered_field(&a, (4, 5)).unwrap().iter().all(|&m| m == 1.0));
        assert!(staggered_field(&b, (4, 5)).unwrap().iter().all(|&m| m == -1.0));
        assert!(staggered_field(&[0], (4, 5)).unwrap().iter().all(|&m| m == 0.0));

        let gm = g2_m(&af_mixture(4, 4, 50)).unwrap();
        assert!(gm.displacements().all(|(k, l)| (gm.get(k, l).unwrap() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn fit_recovers_generator() {
        let map = CorrelationMap::from_fn(MapKind::Density, 12, 12, |k, l| {
            let r = ((k * k + l * l) as f64).sqrt();
            let sign = if (k + l).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            sign * 0.25 * (-r / 3.0).exp()
        });
        for dir in [Direction::Horizontal, Direction::Vertical] {
            let fit = fit_correlation_length(&map, dir, FitWindow::default()).unwrap();
            assert!((fit.xi - 3.0).abs() < 0.01, "{fit:?}");
            assert_eq!(fit.points.len(), 6);
        }
        let radial = fit_correlation_length(&map, Direction::Radial, FitWindow::default()).unwrap();
        assert!((radial.xi - 3.0).abs() < 0.05, "{radial:?}");
    }

    #[test]
    fn no_decay_is_infinite() {
        let g = g2_density(&af_mixture(8, 8, 20)).unwrap();
        let fit = fit_correlation_length(&g, Direction::Horizontal, FitWindow::default()).unwrap();
        assert!(fit.infinite);
    }

    #[test]
    fn too_few_points() {
        let map = CorrelationMap::from_fn(MapKind::Magnetization, 4, 4, |_, _| 0.1);
        assert!(fit_correlation_length(&map, Direction::Horizontal, FitWindow::default()).is_err());
        let wide = FitWindow {
            r_min: 1.0,
            r_max: Some(3.0),
        };
        assert!(fit_correlation_length(&map, Direction::Horizontal, wide).unwrap().infinite);
    }

    #[test]
    fn csv_layout() {
        let map = CorrelationMap::from_fn(MapKind::Density, 2, 1, |k, _| k as f64);
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "k,l,value,stderr,count\n-1,0,-1,0,1\n0,0,0,0,2\n1,0,1,0,1\n"
        );
    }
}
