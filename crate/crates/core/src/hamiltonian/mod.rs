//! The driven Ising-type Rydberg Hamiltonian
//!
//! `H = (Ω/2) Σ_i (e^{iφ}|g_i⟩⟨r_i| + e^{-iφ}|r_i⟩⟨g_i|) - Δ Σ_i n_i + Σ_{i<j} V_ij n_i n_j`
//!
//! applied matrix-free over a [`Basis`](crate::hilbert::Basis), together with
//! the time-dependent drive programs that set `(Ω, Δ, φ)`.

mod operator;
mod schedule;

pub use operator::HamiltonianOperator;
pub use schedule::{DriveParams, DriveSchedule, NaturalSpline, ScheduleSpec};
