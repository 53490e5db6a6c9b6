//! TOML experiment configuration. Frequencies are in MHz (meaning
//! `2π × MHz`), times in µs, lengths in µm.

use std::path::Path;

use rydsim::analysis::{Direction, FitWindow, NuScan};
use rydsim::evolve::{EvolveOptions, Method};
use rydsim::hamiltonian::{DriveSchedule, ScheduleSpec};
use rydsim::hilbert::Constraint;
use rydsim::lattice::{InteractionMatrix, Lattice, LatticeKind};
use rydsim::measure::DetectionModel;
use rydsim::units::{mhz, us};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: Option<LatticeConfig>,
    pub interaction: Option<InteractionConfig>,
    #[serde(default)]
    pub basis: BasisConfig,
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub shots: ShotsConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub phase_diagram: Option<PhaseDiagramConfig>,
    pub kz: Option<KzConfig>,
    pub quench: Option<QuenchConfig>,
    pub rearrange: Option<RearrangeConfig>,
    /// Worker threads; `--workers` overrides, default is all cores.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(default = "square")]
    pub kind: LatticeKind,
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "one")]
    pub spacing_um: f64,
}

fn square() -> LatticeKind {
    LatticeKind::Square
}

fn one() -> f64 {
    1.0
}

/// Give exactly one of `rb_over_a` (blockade radius in lattice spacings at
/// the drive's `Ω`) or `c6_mhz_um6`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionConfig {
    pub rb_over_a: Option<f64>,
    pub c6_mhz_um6: Option<f64>,
    /// Pairs beyond this many spacings are dropped; default 2 (third neighbor).
    pub truncation_a: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub constraint: Constraint,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            constraint: Constraint::NnBlockade,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotsConfig {
    pub n: usize,
    pub seed: u64,
}

impl Default for ShotsConfig {
    fn default() -> Self {
        ShotsConfig { n: 1000, seed: 1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "enabled")]
    pub enabled: bool,
    #[serde(default = "default_p_g")]
    pub p_g_loss: f64,
    #[serde(default = "default_p_r")]
    pub p_r_recapture: f64,
}

fn enabled() -> bool {
    true
}

fn default_p_g() -> f64 {
    DetectionModel::default().p_g_loss
}

fn default_p_r() -> f64 {
    DetectionModel::default().p_r_recapture
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            enabled: true,
            p_g_loss: default_p_g(),
            p_r_recapture: default_p_r(),
        }
    }
}

impl NoiseConfig {
    pub fn model(&self) -> DetectionModel {
        if self.enabled {
            DetectionModel {
                p_g_loss: self.p_g_loss,
                p_r_recapture: self.p_r_recapture,
            }
        } else {
            DetectionModel::perfect()
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub substep_us: Option<f64>,
    pub krylov_dim: Option<usize>,
    pub method: Option<Method>,
}

impl EvolveConfig {
    pub fn options(&self) -> EvolveOptions {
        let d = EvolveOptions::default();
        EvolveOptions {
            substep_dt: self.substep_us.map(us),
            krylov_dim: self.krylov_dim.unwrap_or(d.krylov_dim),
            method: self.method.unwrap_or(d.method),
            ..d
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "one")]
    pub fit_r_min: f64,
    pub fit_r_max: Option<f64>,
    #[serde(default = "radial")]
    pub fit_direction: Direction,
}

fn radial() -> Direction {
    Direction::Radial
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            fit_r_min: 1.0,
            fit_r_max: None,
            fit_direction: Direction::Radial,
        }
    }
}

impl AnalysisConfig {
    pub fn window(&self) -> FitWindow {
        FitWindow {
            r_min: self.fit_r_min,
            r_max: self.fit_r_max,
        }
    }
}

/// Inclusive `[lo, hi]` with `n` evenly spaced points.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        match self.n {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub omega_mhz: f64,
    pub rb_over_a: Range,
    pub delta_over_omega: Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KzMode {
    /// Linear sweeps simulated on the configured lattice.
    Simulate,
    /// Curves drawn from an exact scaling family with a planted `ν`.
    Synthetic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KzConfig {
    pub mode: KzMode,
    pub rates_mhz_per_us: Vec<f64>,
    /// Detunings where `ξ` is recorded, in units of `Ω`.
    pub delta_over_omega: Range,
    pub omega_mhz: f64,
    /// Start of every sweep, in units of `Ω` (simulate mode).
    #[serde(default = "kz_start")]
    pub delta_start_over_omega: f64,
    /// Reference rate `s₀`; defaults to the slowest rate.
    pub s0_mhz_per_us: Option<f64>,
    #[serde(default = "one")]
    pub z: f64,
    /// Fixes `Δ_c/Ω`; otherwise it is extracted from the slowest sweep.
    pub delta_c_over_omega: Option<f64>,
    #[serde(default)]
    pub delta_c_err_over_omega: f64,
    /// Planted exponent (synthetic mode).
    pub nu: Option<f64>,
    /// Relative Gaussian noise on synthetic `ξ`.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub scan: Option<NuScan>,
}

fn kz_start() -> f64 {
    -2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuenchConfig {
    pub omega_mhz: f64,
    pub t_us: f64,
    /// `Δ_q` values for the detuning scan (at `phi`).
    pub delta_mhz: Vec<f64>,
    #[serde(default)]
    pub phi: f64,
    /// `φ_q` values for the phase scans used by the Bloch fits.
    #[serde(default)]
    pub phi_scan: Vec<f64>,
    #[serde(default)]
    pub fits: Vec<BlochFitConfig>,
    #[serde(default = "enabled")]
    pub jitter: bool,
}

/// Bloch-vector fit for sites with `d` excited diagonal neighbors, driven at
/// `delta_mhz`. The single-atom model sees `Δ_q − d·V(√2 a)` unless
/// `delta_eff_mhz` is given.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochFitConfig {
    pub d: usize,
    pub delta_mhz: f64,
    pub delta_eff_mhz: Option<f64>,
    #[serde(default = "residual_threshold")]
    pub residual_threshold: f64,
}

fn residual_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RearrangeConfig {
    pub rows: usize,
    pub cols: usize,
    pub target_rows: usize,
    pub target_cols: usize,
    pub load_probability: f64,
    pub instances: usize,
    #[serde(default)]
    pub two_rounds: bool,
    #[serde(default = "pitch")]
    pub site_pitch_um: f64,
    #[serde(default = "pickup")]
    pub pickup_ms: f64,
    #[serde(default = "speed")]
    pub speed_um_per_ms: f64,
    /// Background lifetime in s; omit to disable loss.
    pub lifetime_s: Option<f64>,
    /// Number of leading instances whose plans are exported.
    #[serde(default = "one_usize")]
    pub export_plans: usize,
}

fn pitch() -> f64 {
    5.0
}

fn pickup() -> f64 {
    0.03
}

fn speed() -> f64 {
    75.0
}

fn one_usize() -> usize {
    1
}

/// Parsed configuration together with the hash of its source text.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(text.as_bytes());
    let hash = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(Loaded { config, hash })
}

pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

impl ExperimentConfig {
    pub fn lattice(&self) -> Result<Lattice, CliError> {
        let l = require(&self.lattice, "lattice")?;
        Ok(Lattice::new(l.kind, l.nx, l.ny, l.spacing_um)?)
    }

    pub fn drive_schedule(&self) -> Result<DriveSchedule, CliError> {
        let spec = require(&self.schedule, "schedule")?.clone();
        let schedule = DriveSchedule::try_from(spec)?;
        for w in schedule.validate()? {
            eprintln!("warning: {w}");
        }
        Ok(schedule)
    }

    /// Interactions for a drive of strength `omega` (rad/s), with an optional
    /// override of the blockade radius.
    pub fn interactions(&self, lattice: &Lattice, omega: f64, rb_over_a: Option<f64>) -> Result<InteractionMatrix, CliError> {
        let cfg = self.interaction.as_ref();
        let from_rb = |rb: f64| {
            if omega > 0.0 {
                Ok(rydsim::lattice::v0_for_blockade(rb, omega, lattice.spacing()))
            } else {
                Err(CliError::Config("rb_over_a needs a positive Rabi frequency".into()))
            }
        };
        let v0 = match (rb_over_a, cfg.and_then(|c| c.rb_over_a), cfg.and_then(|c| c.c6_mhz_um6)) {
            (Some(rb), _, _) | (None, Some(rb), None) => from_rb(rb)?,
            (None, None, Some(c6)) => mhz(c6),
            _ => {
                return Err(CliError::Config(
                    "[interaction] needs exactly one of rb_over_a or c6_mhz_um6".into(),
                ))
            }
        };
        let range = cfg.and_then(|c| c.truncation_a).unwrap_or(2.0) * lattice.spacing();
        Ok(InteractionMatrix::new(lattice, v0, range)?)
    }
}
