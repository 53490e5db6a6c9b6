pub mod kz;
pub mod phase_diagram;
pub mod quench;
pub mod rearrange;
pub mod sweep;

use std::sync::Arc;

use rydsim::hamiltonian::{DriveSchedule, HamiltonianOperator};
use rydsim::hilbert::{Basis, BasisConfig};
use rydsim::lattice::Lattice;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Seed for detection noise, kept clear of the shot shard seeds `seed + k`.
pub fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

pub fn basis(cfg: &ExperimentConfig, lattice: &Lattice) -> Result<Arc<Basis>, CliError> {
    let bc = BasisConfig::for_lattice(lattice, cfg.basis.constraint);
    Ok(Arc::new(Basis::enumerate(&bc)?))
}

pub fn operator(
    cfg: &ExperimentConfig,
    lattice: &Lattice,
    basis: &Arc<Basis>,
    omega: f64,
    rb_over_a: Option<f64>,
) -> Result<HamiltonianOperator, CliError> {
    let v = cfg.interactions(lattice, omega, rb_over_a)?;
    Ok(HamiltonianOperator::new(basis.clone(), &v)?)
}

/// The Rabi frequency that sets the blockade radius for a schedule.
pub fn schedule_omega(s: &DriveSchedule) -> f64 {
    match *s {
        DriveSchedule::LinearSweep { omega, .. } | DriveSchedule::SplineSweep { omega, .. } => omega,
        DriveSchedule::Quench { omega_q, .. } => omega_q,
    }
}
