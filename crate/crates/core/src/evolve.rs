//! Time evolution, ground states and static expectation values.
//!
//! Evolution treats the Hamiltonian as constant over each substep (drive
//! evaluated at the substep midpoint) and propagates each substep either with
//! a Lanczos approximation of `exp(-i H dt)` or with classical RK4.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hamiltonian::{DriveParams, DriveSchedule, HamiltonianOperator};
use crate::hilbert::StateVector;
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const DIVERGENCE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KrylovExpm,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Substep length in seconds; `None` means `duration / 2000`.
    pub substep_dt: Option<f64>,
    pub krylov_dim: usize,
    pub norm_tol: f64,
    pub method: Method,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            substep_dt: None,
            krylov_dim: 16,
            norm_tol: 1e-9,
            method: Method::KrylovExpm,
        }
    }
}

impl EvolveOptions {
    fn validate(&self) -> Result<()> {
        if let Some(dt) = self.substep_dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument(format!("substep_dt must be positive, got {dt}")));
            }
        }
        if self.krylov_dim < 2 {
            return Err(Error::InvalidArgument("krylov_dim must be at least 2".into()));
        }
        Ok(())
    }
}

/// Output of [`evolve`].
#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: StateVector,
    /// Accumulated `|‖ψ‖ - 1|` removed by per-substep renormalization.
    pub norm_drift: f64,
    pub substeps: usize,
}

// Reductions use fixed chunks combined in order, so results do not depend
// on thread scheduling.
const REDUCE_CHUNK: usize = 4096;

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let partial: Vec<Complex64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(x, y)| x.conj() * y).sum())
        .collect();
    partial.iter().sum()
}

fn norm(a: &[Complex64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .map(|x| x.iter().map(|x| x.norm_sqr()).sum())
        .collect();
    partial.iter().sum::<f64>().sqrt()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.par_iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn scale(alpha: f64, x: &mut [Complex64]) {
    x.par_iter_mut().for_each(|xi| *xi *= alpha);
}

/// Lanczos tridiagonalization with full reorthogonalization, started from a
/// normalized `v0`. Stops early on an invariant subspace.
struct Krylov {
    basis: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// Norm of the residual vector after the last step.
    beta_last: f64,
}

fn lanczos(op: &HamiltonianOperator, params: &DriveParams, v0: &[Complex64], m: usize) -> Krylov {
    let dim = v0.len();
    let m = m.min(dim).max(1);
    let mut basis: Vec<Vec<Complex64>> = vec![v0.to_vec()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m);
    let mut w = vec![ZERO; dim];
    let mut beta_last = 0.0;
    for j in 0..m {
        op.apply_into(params, &basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let b = norm(&w);
        beta_last = b;
        let scale_ref = a.abs().max(beta.last().copied().unwrap_or(0.0)).max(1e-300);
        if j + 1 == m || b <= 1e-13 * scale_ref {
            break;
        }
        beta.push(b);
        let mut next = std::mem::replace(&mut w, vec![ZERO; dim]);
        scale(1.0 / b, &mut next);
        basis.push(next);
    }
    Krylov {
        basis,
        alpha,
        beta,
        beta_last,
    }
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    SymmetricEigen::new(t)
}

/// `exp(-i H dt) v` for normalized `v`; splits the step when the Krylov error
/// estimate exceeds `tol`.
fn krylov_step(
    op: &HamiltonianOperator,
    params: &DriveParams,
    v: &[Complex64],
    dt: f64,
    m: usize,
    tol: f64,
    depth: usize,
) -> Vec<Complex64> {
    let kr = lanczos(op, params, v, m);
    let k = kr.alpha.len();
    let eig = tridiagonal_eigen(&kr.alpha, &kr.beta);
    // c = Q exp(-i Λ dt) Qᵀ e1
    let coeffs: Vec<Complex64> = (0..k)
        .map(|r| {
            (0..k)
                .map(|s| {
                    let q = eig.eigenvectors[(r, s)] * eig.eigenvectors[(0, s)];
                    Complex64::from_polar(q, -eig.eigenvalues[s] * dt)
                })
                .sum()
        })
        .collect();
    let invariant = k < m.min(v.len()) || kr.beta_last == 0.0;
    // a-posteriori estimate dt · β_m · |[exp(-i T dt)]_{m,1}|
    let err = if invariant { 0.0 } else { dt.abs() * kr.beta_last * coeffs[k - 1].norm() };
    if err > tol && depth < 20 {
        let half = krylov_step(op, params, v, 0.5 * dt, m, tol, depth + 1);
        return krylov_step(op, params, &half, 0.5 * dt, m, tol, depth + 1);
    }
    let mut out = vec![ZERO; v.len()];
    for (c, q) in coeffs.iter().zip(&kr.basis) {
        axpy(*c, q, &mut out);
    }
    out
}

fn rk4_step(op: &HamiltonianOperator, params: &DriveParams, v: &[Complex64], dt: f64) -> Vec<Complex64> {
    let bound = op.norm_bound(params);
    let n_inner = ((bound * dt / 0.05).ceil() as usize).max(1);
    let h = dt / n_inner as f64;
    let dim = v.len();
    let mi = Complex64::new(0.0, -1.0);
    let mut y = v.to_vec();
    let mut k = [vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim], vec![ZERO; dim]];
    let mut tmp = vec![ZERO; dim];
    for _ in 0..n_inner {
        op.apply_into(params, &y, &mut k[0]);
        k[0].par_iter_mut().for_each(|x| *x *= mi);
        for stage in 1..4 {
            let c = if stage == 3 { h } else { 0.5 * h };
            let (prev, rest) = k.split_at_mut(stage);
            tmp.par_iter_mut()
                .zip(&y)
                .zip(&prev[stage - 1])
                .for_each(|((t, yi), ki)| *t = yi + ki * c);
            op.apply_into(params, &tmp, &mut rest[0]);
            rest[0].par_iter_mut().for_each(|x| *x *= mi);
        }
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi += (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]) * (h / 6.0);
        });
    }
    y
}

/// Evolves `state` under `schedule` with a piecewise-constant Hamiltonian.
pub fn evolve(
    state: &StateVector,
    op: &HamiltonianOperator,
    schedule: &DriveSchedule,
    options: &EvolveOptions,
) -> Result<Evolution> {
    options.validate()?;
    op.check_basis(state)?;
    state.check_normalized(options.norm_tol.max(1e-9))?;
    let duration = schedule.duration();
    if !duration.is_finite() || duration < 0.0 {
        return Err(Error::InvalidArgument(format!("schedule duration {duration} is not finite")));
    }
    let dt_target = options.substep_dt.unwrap_or(duration / 2000.0);
    let n_steps = if duration == 0.0 { 0 } else { (duration / dt_target).ceil().max(1.0) as usize };
    let mut psi = state.amplitudes().to_vec();
    let mut drift = 0.0;
    for step in 0..n_steps {
        let t0 = duration * step as f64 / n_steps as f64;
        let t1 = duration * (step + 1) as f64 / n_steps as f64;
        let params = schedule.eval(0.5 * (t0 + t1))?;
        psi = propagate(op, &params, &psi, t1 - t0, options);
        let nrm = norm(&psi);
        drift += (nrm - 1.0).abs();
        if drift > DIVERGENCE_LIMIT || !nrm.is_finite() {
            return Err(Error::Integration {
                drift,
                limit: DIVERGENCE_LIMIT,
            });
        }
        scale(1.0 / nrm, &mut psi);
    }
    Ok(Evolution {
        state: StateVector::new(op.basis().clone(), psi)?,
        norm_drift: drift,
        substeps: n_steps,
    })
}

/// `exp(-i H t) ψ` for constant drive parameters, without renormalization.
pub fn evolve_constant(
    state: &StateVector,
    op: &HamiltonianOperator,
    params: &DriveParams,
    t: f64,
    options: &EvolveOptions,
) -> Result<StateVector> {
    options.validate()?;
    op.check_basis(state)?;
    if t == 0.0 {
        return Ok(state.clone());
    }
    let mut psi = state.amplitudes().to_vec();
    let n = match options.substep_dt {
        Some(dt) => (t / dt).ceil().max(1.0) as usize,
        None => 1,
    };
    for _ in 0..n {
        psi = propagate(op, params, &psi, t / n as f64, options);
    }
    StateVector::new(op.basis().clone(), psi)
}

fn propagate(
    op: &HamiltonianOperator,
    params: &DriveParams,
    psi: &[Complex64],
    dt: f64,
    options: &EvolveOptions,
) -> Vec<Complex64> {
    match options.method {
        Method::KrylovExpm => {
            let nrm = norm(psi);
            if nrm == 0.0 {
                return psi.to_vec();
            }
            let mut v = psi.to_vec();
            scale(1.0 / nrm, &mut v);
            let mut out = krylov_step(op, params, &v, dt, options.krylov_dim, 1e-13, 0);
            scale(nrm, &mut out);
            out
        }
        Method::Rk4 => rk4_step(op, params, psi, dt),
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub energy: f64,
    pub state: StateVector,
    /// `‖Hψ − Eψ‖`.
    pub residual: f64,
    /// Estimated gap to the next Ritz value.
    pub gap: f64,
    /// Set when the estimated gap is below `1e-10 · max(1, |E|)`.
    pub degenerate: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateOptions {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub seed: u64,
    /// Relative residual target, scaled by `max(1, |E|)`.
    pub tol: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            krylov_dim: 80,
            max_restarts: 400,
            seed: 0x5eed,
            tol: 1e-9,
        }
    }
}

/// Lowest eigenpair by restarted Lanczos with full reorthogonalization.
pub fn ground_state(op: &HamiltonianOperator, params: &DriveParams) -> Result<GroundStateResult> {
    ground_state_with(op, params, &GroundStateOptions::default())
}

pub fn ground_state_with(
    op: &HamiltonianOperator,
    params: &DriveParams,
    options: &GroundStateOptions,
) -> Result<GroundStateResult> {
    let basis = op.basis().clone();
    let dim = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut v = StateVector::random(basis.clone(), &mut rng).into_amplitudes();
    let mut hv = vec![ZERO; dim];
    let mut residual = f64::INFINITY;
    for iteration in 1..=options.max_restarts {
        let kr = lanczos(op, params, &v, options.krylov_dim);
        let eig = tridiagonal_eigen(&kr.alpha, &kr.beta);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let lo = order[0];
        let mut energy = eig.eigenvalues[lo];
        let gap = order.get(1).map_or(f64::INFINITY, |&s| eig.eigenvalues[s] - energy);
        let mut ritz = vec![ZERO; dim];
        for (r, q) in kr.basis.iter().enumerate() {
            axpy(Complex64::new(eig.eigenvectors[(r, lo)], 0.0), q, &mut ritz);
        }
        let nrm = norm(&ritz);
        scale(1.0 / nrm, &mut ritz);
        op.apply_into(params, &ritz, &mut hv);
        energy = dot(&ritz, &hv).re;
        axpy(Complex64::new(-energy, 0.0), &ritz, &mut hv);
        residual = norm(&hv);
        v = ritz;
        if residual < options.tol * energy.abs().max(1.0) {
            let degenerate = gap < 1e-10 * energy.abs().max(1.0);
            return Ok(GroundStateResult {
                energy,
                state: StateVector::new(basis, v)?,
                residual,
                gap,
                degenerate,
                iterations: iteration,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_restarts,
        residual,
    })
}

/// `⟨n_i⟩` for every site.
pub fn site_densities(state: &StateVector) -> Vec<f64> {
    let basis = state.basis();
    let n = basis.n_sites();
    let partial: Vec<Vec<f64>> = basis
        .configs()
        .par_chunks(REDUCE_CHUNK)
        .zip(state.amplitudes().par_chunks(REDUCE_CHUNK))
        .map(|(cs, amps)| {
            let mut acc = vec![0.0; n];
            for (&c, a) in cs.iter().zip(amps) {
                let p = a.norm_sqr();
                let mut bits = c;
                while bits != 0 {
                    let i = bits.trailing_zeros() as usize;
                    acc[i] += p;
                    bits &= bits - 1;
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; n];
    for acc in partial {
        out.iter_mut().zip(&acc).for_each(|(x, y)| *x += y);
    }
    out
}

/// `⟨n⟩`, the mean excitation density.
pub fn mean_density(state: &StateVector) -> f64 {
    let d = site_densities(state);
    d.iter().sum::<f64>() / d.len() as f64
}

/// `⟨n_i n_j⟩` as a dense matrix (diagonal holds `⟨n_i⟩`).
pub fn pair_densities(state: &StateVector) -> Vec<Vec<f64>> {
    let basis = state.basis();
    let n = basis.n_sites();
    let mut m = vec![vec![0.0; n]; n];
    for (&c, a) in basis.configs().iter().zip(state.amplitudes()) {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let sites: Vec<usize> = (0..n).filter(|&i| (c >> i) & 1 == 1).collect();
        for &i in &sites {
            for &j in &sites {
                m[i][j] += p;
            }
        }
    }
    m
}
