//! Conditional Rydberg density `P^(d)`: probability that a bulk site is
//! excited given all four nearest neighbors in `|g⟩` and exactly `d` of its
//! four diagonal neighbors in `|r⟩`.

use serde::{Deserialize, Serialize};

use super::Ensemble;
use crate::hilbert::StateVector;
use crate::measure::ShotSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDensity {
    pub d: usize,
    /// `None` when no site ever satisfied the condition.
    pub p: Option<f64>,
    /// Delta-method standard error of the ratio (zero for exact values).
    pub stderr: f64,
    /// Mean number of conditioning events per configuration, `Σ_i ⟨O_i^(d)⟩`.
    pub denominator: f64,
}

/// Per configuration and `d`: `(Σ_i n_i O_i, Σ_i O_i)` over bulk sites.
fn events(occ: &[f64], cols: usize, rows: usize, out: &mut [f64]) {
    let at = |c: usize, r: usize| occ[r * cols + c] != 0.0;
    for r in 1..rows - 1 {
        for c in 1..cols - 1 {
            if at(c - 1, r) || at(c + 1, r) || at(c, r - 1) || at(c, r + 1) {
                continue;
            }
            let d = [at(c - 1, r - 1), at(c + 1, r - 1), at(c - 1, r + 1), at(c + 1, r + 1)]
                .iter()
                .filter(|&&x| x)
                .count();
            out[2 * d + 1] += 1.0;
            if at(c, r) {
                out[2 * d] += 1.0;
            }
        }
    }
}

fn compute(ens: &Ensemble) -> Result<[ConditionalDensity; 5]> {
    let (cols, rows) = (ens.cols, ens.rows);
    if cols < 3 || rows < 3 {
        return Err(Error::InvalidArgument(format!(
            "conditional densities need bulk sites; grid {cols}×{rows} has none"
        )));
    }
    let (means, _) = ens.reduce(10, |s, out| events(ens.occupation(s), cols, rows, out));
    let ratios: Vec<Option<f64>> = (0..5)
        .map(|d| (means[2 * d + 1] > 0.0).then(|| means[2 * d] / means[2 * d + 1]))
        .collect();
    // linearized residuals (num − R·den)/⟨den⟩ carry the ratio's sampling error
    let (_, errs) = ens.reduce(5, |s, out| {
        let mut ev = [0.0; 10];
        events(ens.occupation(s), cols, rows, &mut ev);
        for d in 0..5 {
            if let Some(r) = ratios[d] {
                out[d] = (ev[2 * d] - r * ev[2 * d + 1]) / means[2 * d + 1];
            }
        }
    });
    Ok(std::array::from_fn(|d| ConditionalDensity {
        d,
        p: ratios[d],
        stderr: errs[d],
        denominator: means[2 * d + 1],
    }))
}

fn check_d(d: usize) -> Result<()> {
    if d > 4 {
        return Err(Error::InvalidArgument(format!("d must be in 0..=4, got {d}")));
    }
    Ok(())
}

/// `P^(d)` from shots.
pub fn conditional_density(shots: &ShotSet, d: usize) -> Result<ConditionalDensity> {
    check_d(d)?;
    Ok(compute(&Ensemble::from_shots(shots)?)?[d])
}

/// `P^(0)..P^(4)` from shots in one pass.
pub fn conditional_densities(shots: &ShotSet) -> Result<[ConditionalDensity; 5]> {
    compute(&Ensemble::from_shots(shots)?)
}

/// `P^(d)` from the Born distribution of `state`.
pub fn conditional_density_exact(state: &StateVector, grid: (usize, usize), d: usize) -> Result<ConditionalDensity> {
    check_d(d)?;
    Ok(compute(&Ensemble::from_state(state, grid)?)?[d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::patterns;

    #[test]
    fn striated_pattern() {
        let shots = ShotSet::from_patterns(64, Some((8, 8)), &vec![patterns::striated(8, 8); 3]).unwrap();
        let all = conditional_densities(&shots).unwrap();
        assert_eq!(all[0].p, Some(1.0));
        assert_eq!(all[4].p, Some(0.0));
        // bulk even-even sites in 1..7: (2,2),(2,4),(2,6),(4,*),(6,*) → 9
        assert_eq!(all[0].denominator, 9.0);
        assert_eq!(all[1].p, None);
        assert_eq!(all[0].stderr, 0.0);
    }

    #[test]
    fn small_grid_and_bad_d() {
        let shots = ShotSet::new(4, Some((2, 2)), vec![0]).unwrap();
        assert!(conditional_density(&shots, 0).is_err());
        let shots = ShotSet::new(9, Some((3, 3)), vec![0]).unwrap();
        assert!(conditional_density(&shots, 5).is_err());
        let p0 = conditional_density(&shots, 0).unwrap();
        assert_eq!((p0.p, p0.denominator), (Some(0.0), 1.0));
    }
}
