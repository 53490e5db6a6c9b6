//! Mean-field picture of the striated phase and the single-atom quench model
//! used to read out Bloch vectors.
//!
//! The ansatz is a product state on the square lattice: sublattices `A₁`
//! (even column, even row) and `A₂` (odd, odd) carry `cos a|g⟩ + sin a|r⟩`,
//! and the remaining half `B` is pinned to `|g⟩` by the nearest-neighbor
//! blockade. The drive enters as `−(Ω/2) sin 2a` per site, i.e. the laser
//! phase is chosen so that positive mixing angles lower the energy.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEnergies {
    pub checkerboard: f64,
    pub star: f64,
    pub striated: f64,
    /// Detuning where checkerboard and star energies cross, `4[V(√2a) + V(2a)]`.
    pub delta_star: f64,
}

/// Classical (`Ω = 0`) energies per site, neglecting interactions beyond `2a`.
pub fn classical_energies(v_sqrt2a: f64, v_2a: f64, delta: f64) -> Result<ClassicalEnergies> {
    if !(v_sqrt2a >= 0.0 && v_2a >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "interactions must be non-negative, got V(√2a) = {v_sqrt2a}, V(2a) = {v_2a}"
        )));
    }
    Ok(ClassicalEnergies {
        checkerboard: -delta / 2.0 + v_sqrt2a + v_2a,
        star: -delta / 4.0,
        striated: -delta / 4.0 + v_2a / 2.0,
        delta_star: 4.0 * (v_sqrt2a + v_2a),
    })
}

/// Interactions entering the ansatz energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "range", rename_all = "snake_case")]
pub enum Couplings {
    /// Only the `√2a` (between `A₁` and `A₂`) and `2a` (within each) terms.
    ThirdNeighbor { v_sqrt2a: f64, v_2a: f64 },
    /// All pairs of `V(x) = c6 / x⁶`, `x` in units of `a`.
    AllPairs { c6: f64 },
}

/// Cutoff (in lattice cells) for the all-pairs lattice sums.
const LATTICE_SUM_CELLS: i64 = 40;

impl Couplings {
    /// `V(x) = c6/x⁶` truncated at the third neighbor.
    pub fn third_neighbor_from_c6(c6: f64) -> Self {
        Couplings::ThirdNeighbor {
            v_sqrt2a: c6 / 8.0,
            v_2a: c6 / 64.0,
        }
    }

    /// Couplings at blockade ratio `R_b/a` in units of `Ω`: `c6 = Ω (R_b/a)⁶`.
    pub fn c6_for_blockade(rb_over_a: f64, omega: f64) -> f64 {
        omega * rb_over_a.powi(6)
    }

    /// `(S_same, S_cross)`: sums of `V` over displacements within one
    /// sublattice and from `A₁` to `A₂`.
    fn lattice_sums(&self) -> (f64, f64) {
        match *self {
            Couplings::ThirdNeighbor { v_sqrt2a, v_2a } => (4.0 * v_2a, 4.0 * v_sqrt2a),
            Couplings::AllPairs { c6 } => {
                let cache = lattice_sums_unit();
                (c6 * cache.0, c6 * cache.1)
            }
        }
    }
}

fn lattice_sums_unit() -> &'static (f64, f64) {
    static SUMS: OnceLock<(f64, f64)> = OnceLock::new();
    SUMS.get_or_init(|| {
        let (mut same, mut cross) = (0.0, 0.0);
        let m = LATTICE_SUM_CELLS;
        // sum far shells first to limit rounding
        for r in (0..=m).rev() {
            for x in -r..=r {
                for y in -r..=r {
                    if x.abs().max(y.abs()) != r {
                        continue;
                    }
                    if r > 0 {
                        let d2 = (4 * (x * x + y * y)) as f64;
                        same += 1.0 / (d2 * d2 * d2);
                    }
                    let (cx, cy) = (2 * x + 1, 2 * y + 1);
                    let d2 = (cx * cx + cy * cy) as f64;
                    cross += 1.0 / (d2 * d2 * d2);
                }
            }
        }
        (same, cross)
    })
}

/// Mixing angles of the two excitable sublattices, with `a₁ ≥ a₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SublatticeAnsatz {
    pub a1: f64,
    pub a2: f64,
    pub energy: f64,
    /// `|a₁ − a₂| > 1e−4`.
    pub striated: bool,
    /// Gradient norm at the returned point (zero gradient components along
    /// active box constraints are not counted).
    pub gradient_norm: f64,
}

struct Model {
    omega: f64,
    delta: f64,
    same: f64,
    cross: f64,
}

impl Model {
    fn new(omega: f64, delta: f64, couplings: &Couplings) -> Self {
        let (same, cross) = couplings.lattice_sums();
        Model {
            omega,
            delta,
            same,
            cross,
        }
    }

    fn energy(&self, a1: f64, a2: f64) -> f64 {
        let (p1, p2) = (a1.sin().powi(2), a2.sin().powi(2));
        let single = |a: f64, p: f64| -self.delta * p - 0.5 * self.omega * (2.0 * a).sin();
        0.25 * (single(a1, p1) + single(a2, p2))
            + 0.125 * (self.same * (p1 * p1 + p2 * p2) + 2.0 * self.cross * p1 * p2)
    }

    fn gradient(&self, a1: f64, a2: f64) -> [f64; 2] {
        let (p1, p2) = (a1.sin().powi(2), a2.sin().powi(2));
        let g = |a: f64, p: f64, q: f64| {
            0.25 * (-self.delta * (2.0 * a).sin() - self.omega * (2.0 * a).cos())
                + 0.25 * (self.same * p + self.cross * q) * (2.0 * a).sin()
        };
        [g(a1, p1, p2), g(a2, p2, p1)]
    }

    fn hessian(&self, a1: f64, a2: f64) -> [[f64; 2]; 2] {
        let (p1, p2) = (a1.sin().powi(2), a2.sin().powi(2));
        let h = |a: f64, p: f64, q: f64| {
            let (s2, c2) = ((2.0 * a).sin(), (2.0 * a).cos());
            0.25 * (-2.0 * self.delta * c2 + 2.0 * self.omega * s2)
                + 0.25 * self.same * s2 * s2
                + 0.5 * (self.same * p + self.cross * q) * c2
        };
        let off = 0.25 * self.cross * (2.0 * a1).sin() * (2.0 * a2).sin();
        [[h(a1, p1, p2), off], [off, h(a2, p2, p1)]]
    }
}

/// Energy per site of the ansatz.
pub fn striated_energy(a1: f64, a2: f64, omega: f64, delta: f64, couplings: &Couplings) -> f64 {
    Model::new(omega, delta, couplings).energy(a1, a2)
}

/// Second-order striated energy per site as quoted for the perturbative
/// picture:
/// `−Δ/4 + V(2a)/2 − Ω²/[4(4V(√2a)−Δ)] + Ω² V(√2a)/[2(4V(√2a)−Δ)²]`.
pub fn perturbative_striated_energy(omega: f64, delta: f64, v_sqrt2a: f64, v_2a: f64) -> Result<f64> {
    let gap = 4.0 * v_sqrt2a - delta;
    if gap.abs() <= 1e-12 * (4.0 * v_sqrt2a.abs() + delta.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::Pole);
    }
    let w2 = omega * omega;
    Ok(-delta / 4.0 + v_2a / 2.0 - w2 / (4.0 * gap) + w2 * v_sqrt2a / (2.0 * gap * gap))
}

const BOX: (f64, f64) = (0.0, FRAC_PI_2);

fn projected_gradient_norm(m: &Model, a: [f64; 2]) -> f64 {
    let g = m.gradient(a[0], a[1]);
    g.iter()
        .zip(a)
        .map(|(&gi, ai)| {
            // a component pushing outward at an active bound is not a violation
            if (ai <= BOX.0 && gi > 0.0) || (ai >= BOX.1 && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Projected Newton iteration with backtracking, falling back to gradient
/// steps where the Hessian is not positive definite.
fn local_minimize(m: &Model, start: [f64; 2]) -> [f64; 2] {
    let clamp = |v: f64| v.clamp(BOX.0, BOX.1);
    let mut a = start;
    let mut e = m.energy(a[0], a[1]);
    for _ in 0..200 {
        let g = m.gradient(a[0], a[1]);
        let h = m.hessian(a[0], a[1]);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let mut dir = if h[0][0] > 0.0 && det > 0.0 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
            ]
        } else {
            [-g[0], -g[1]]
        };
        // freeze coordinates pinned at a bound by the gradient
        for i in 0..2 {
            if (a[i] <= BOX.0 && g[i] > 0.0) || (a[i] >= BOX.1 && g[i] < 0.0) {
                dir[i] = 0.0;
            }
        }
        if dir[0] * g[0] + dir[1] * g[1] >= 0.0 {
            dir = [-g[0], -g[1]];
        }
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-14 {
            let cand = [clamp(a[0] + step * dir[0]), clamp(a[1] + step * dir[1])];
            let ec = m.energy(cand[0], cand[1]);
            if ec < e || (ec <= e && cand != a) {
                moved = cand != a;
                a = cand;
                e = ec;
                break;
            }
            step *= 0.5;
        }
        if !moved || projected_gradient_norm(m, a) < 1e-13 {
            break;
        }
    }
    a
}

/// Minimizes the ansatz energy over `(a₁, a₂) ∈ [0, π/2]²`.
///
/// A 33×33 grid supplies seeds (the best point of each of its 4 quadrants
/// plus the global best); each is refined locally and the lowest result is
/// returned, ordered so that `a₁ ≥ a₂`.
pub fn minimize_striated(omega: f64, delta: f64, couplings: &Couplings) -> Result<SublatticeAnsatz> {
    if !(omega.is_finite() && delta.is_finite()) {
        return Err(Error::InvalidArgument("non-finite drive parameters".into()));
    }
    let m = Model::new(omega, delta, couplings);
    const G: usize = 33;
    let at = |i: usize| BOX.1 * i as f64 / (G - 1) as f64;
    let mut seeds: Vec<(f64, [f64; 2])> = Vec::new();
    for quadrant in 0..4 {
        let (ri, rj) = (quadrant / 2, quadrant % 2);
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in (ri * G / 2)..((ri + 1) * G / 2 + ri) {
            for j in (rj * G / 2)..((rj + 1) * G / 2 + rj) {
                let e = m.energy(at(i), at(j));
                if e < best.0 {
                    best = (e, [at(i), at(j)]);
                }
            }
        }
        seeds.push(best);
    }
    let mut best: Option<(f64, [f64; 2])> = None;
    for (_, s) in seeds {
        let a = local_minimize(&m, s);
        let e = m.energy(a[0], a[1]);
        if best.is_none_or(|b| e < b.0 - 1e-15) {
            best = Some((e, a));
        }
    }
    let (energy, mut a) = best.unwrap();
    if a[1] > a[0] {
        a.swap(0, 1);
    }
    Ok(SublatticeAnsatz {
        a1: a[0],
        a2: a[1],
        energy,
        striated: (a[0] - a[1]).abs() > 1e-4,
        gradient_norm: projected_gradient_norm(&m, a),
    })
}

/// Single-atom Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` with `σz = +1` on `|r⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochVector {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Self {
        BlochVector { sx, sy, sz }
    }

    pub fn norm(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }

    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.sx, self.sy, self.sz)
    }
}

/// Gaussian fluctuations averaged over by [`quench_sigma_z_averaged`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    /// Standard deviation of the detuning, rad/s.
    pub delta_sigma: f64,
    /// Relative standard deviation of the pulse area (applied to `Ω`).
    pub area_fraction: f64,
}

impl Jitter {
    /// 15% fluctuations of an interaction shift plus 10% pulse-area noise.
    pub fn for_interaction_shift(shift: f64) -> Self {
        Jitter {
            delta_sigma: 0.15 * shift.abs(),
            area_fraction: 0.10,
        }
    }
}

/// Square pulse `H = Ω(cos φ σx + sin φ σy)/2 + Δ σz/2` applied for `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchModel {
    pub omega: f64,
    /// Detuning from the (interaction-shifted) resonance.
    pub delta: f64,
    pub tau: f64,
    pub phi_q: f64,
    #[serde(default)]
    pub jitter: Jitter,
}

impl QuenchModel {
    pub fn new(omega: f64, delta: f64, tau: f64, phi_q: f64) -> Self {
        QuenchModel {
            omega,
            delta,
            tau,
            phi_q,
            jitter: Jitter::default(),
        }
    }

    pub fn with_jitter(self, jitter: Jitter) -> Self {
        QuenchModel { jitter, ..self }
    }

    pub fn with_phase(self, phi_q: f64) -> Self {
        QuenchModel { phi_q, ..self }
    }

    /// Coefficients `c` with `⟨σz′⟩ = c · s` for a fixed pulse.
    fn coefficients_at(omega: f64, delta: f64, tau: f64, phi: f64) -> Vector3<f64> {
        let w = omega.hypot(delta);
        if w == 0.0 {
            return Vector3::new(0.0, 0.0, 1.0);
        }
        let (dt, ot) = (delta / w, omega / w);
        let alpha = 0.5 * tau * w;
        let (s2a, sa2, ca2) = ((2.0 * alpha).sin(), alpha.sin().powi(2), alpha.cos().powi(2));
        let (sp, cp) = phi.sin_cos();
        Vector3::new(
            -ot * s2a * sp + 2.0 * dt * ot * sa2 * cp,
            ot * s2a * cp + 2.0 * dt * ot * sa2 * sp,
            ca2 - (1.0 - 2.0 * dt * dt) * sa2,
        )
    }

    fn coefficients(&self) -> Vector3<f64> {
        Self::coefficients_at(self.omega, self.delta, self.tau, self.phi_q)
    }

    fn averaged_coefficients(&self) -> Vector3<f64> {
        let (x, w) = gauss_hermite();
        let j = self.jitter;
        let d_nodes: Vec<(f64, f64)> = if j.delta_sigma > 0.0 {
            x.iter().zip(w).map(|(&xi, &wi)| (self.delta + SQRT_2 * j.delta_sigma * xi, wi / PI.sqrt())).collect()
        } else {
            vec![(self.delta, 1.0)]
        };
        let a_nodes: Vec<(f64, f64)> = if j.area_fraction > 0.0 {
            x.iter()
                .zip(w)
                .map(|(&xi, &wi)| (self.omega * (1.0 + SQRT_2 * j.area_fraction * xi), wi / PI.sqrt()))
                .collect()
        } else {
            vec![(self.omega, 1.0)]
        };
        let mut acc = Vector3::zeros();
        for &(d, wd) in &d_nodes {
            for &(o, wo) in &a_nodes {
                acc += wd * wo * Self::coefficients_at(o, d, self.tau, self.phi_q);
            }
        }
        acc
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const GH_NODES: usize = 16;

/// Gauss-Hermite nodes and weights (weight `e^{−x²}`) from the eigenproblem
/// of the Jacobi matrix.
pub fn gauss_hermite() -> &'static (Vec<f64>, Vec<f64>) {
    static GH: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GH.get_or_init(|| {
        let n = GH_NODES;
        let j = DMatrix::from_fn(n, n, |r, c| {
            if r.abs_diff(c) == 1 {
                (r.max(c) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (eig.eigenvalues[k], PI.sqrt() * eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    })
}

/// `⟨σz′⟩` after the quench for initial Bloch vector `s`.
pub fn quench_sigma_z(model: &QuenchModel, s: &BlochVector) -> f64 {
    model.coefficients().dot(&s.as_vector())
}

/// [`quench_sigma_z`] averaged over the model's Gaussian detuning and
/// pulse-area jitter with 16-node Gauss-Hermite quadrature per variable.
pub fn quench_sigma_z_averaged(model: &QuenchModel, s: &BlochVector) -> f64 {
    model.averaged_coefficients().dot(&s.as_vector())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochFit {
    pub bloch: BlochVector,
    /// Standard errors of `(sx, sy, sz)` from the residual variance.
    pub errs: [f64; 3],
    /// Root-mean-square residual in `⟨σz⟩`.
    pub residual: f64,
    /// Set when the norm constraint was active.
    pub constrained: bool,
    /// Set when `residual` exceeds the threshold passed to [`fit_bloch`].
    pub poor_fit: bool,
}

impl BlochFit {
    /// `{sx, sy, sz, errs, residual}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "sx": self.bloch.sx,
            "sy": self.bloch.sy,
            "sz": self.bloch.sz,
            "errs": self.errs,
            "residual": self.residual,
            "constrained": self.constrained,
            "poor_fit": self.poor_fit,
        })
    }
}

/// Least-squares Bloch vector from excitation probabilities `P(φ_q)` under
/// the jitter-averaged quench model, subject to `‖s‖ ≤ 1`.
pub fn fit_bloch(phi: &[f64], p: &[f64], model: &QuenchModel, residual_threshold: f64) -> Result<BlochFit> {
    if phi.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            got: p.len(),
        });
    }
    let mut distinct: Vec<f64> = phi.iter().map(|x| x.rem_euclid(2.0 * PI)).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if distinct.len() < 6 {
        return Err(Error::Fit(format!("need at least 6 distinct φ_q values, got {}", distinct.len())));
    }
    let rows: Vec<Vector3<f64>> = phi.iter().map(|&f| model.with_phase(f).averaged_coefficients()).collect();
    let z: Vec<f64> = p.iter().map(|&pk| 2.0 * pk - 1.0).collect();
    let mut ata = Matrix3::zeros();
    let mut atz = Vector3::zeros();
    for (r, &zk) in rows.iter().zip(&z) {
        ata += r * r.transpose();
        atz += r * zk;
    }
    let scale = ata.trace().max(f64::MIN_POSITIVE);
    let eig = SymmetricEigen::new(ata);
    if eig.eigenvalues.min() <= 1e-10 * scale {
        return Err(Error::Fit("quench model does not resolve all three Bloch components".into()));
    }
    let solve = |lambda: f64| -> Vector3<f64> {
        let inv = Matrix3::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / (e + lambda)));
        eig.eigenvectors * inv * eig.eigenvectors.transpose() * atz
    };
    let mut s = solve(0.0);
    let constrained = s.norm() > 1.0;
    if constrained {
        // ‖s(λ)‖ decreases monotonically in λ; bisect for ‖s‖ = 1
        let (mut lo, mut hi) = (0.0, scale);
        while solve(hi).norm() > 1.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if solve(mid).norm() > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        s = solve(hi);
    }
    let rss: f64 = rows.iter().zip(&z).map(|(r, zk)| (zk - r.dot(&s)).powi(2)).sum();
    let n = z.len() as f64;
    let sigma2 = if z.len() > 3 { rss / (n - 3.0) } else { 0.0 };
    let cov = eig.eigenvectors * Matrix3::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e)) * eig.eigenvectors.transpose();
    let errs = [0, 1, 2].map(|i| (sigma2 * cov[(i, i)]).sqrt());
    let residual = (rss / n).sqrt();
    Ok(BlochFit {
        bloch: BlochVector::new(s[0], s[1], s[2]),
        errs,
        residual,
        constrained,
        poor_fit: residual > residual_threshold,
    })
}
