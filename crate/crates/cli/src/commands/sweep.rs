use rydsim::analysis::{fit_correlation_length, g2_density, order_parameters, patterns, Direction};
use rydsim::evolve::{evolve, mean_density};
use rydsim::hilbert::StateVector;
use rydsim::measure::{apply_detection_noise, perfect_order_probability, sample_grid};
use serde_json::json;

use super::{basis, noise_seed, operator, schedule_omega};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Output;

pub fn run(cfg: &ExperimentConfig, seed: u64, out: &Output) -> Result<(), CliError> {
    let lattice = cfg.lattice()?;
    let grid = lattice.require_grid()?;
    let schedule = cfg.drive_schedule()?;
    if cfg.shots.n == 0 {
        return Err(CliError::Config("shots.n must be at least 1".into()));
    }
    let basis = basis(cfg, &lattice)?;
    let op = operator(cfg, &lattice, &basis, schedule_omega(&schedule), None)?;
    let evo = evolve(&StateVector::ground(basis), &op, &schedule, &cfg.evolve.options())?;

    let shots = sample_grid(&evo.state, grid, cfg.shots.n, seed)?;
    let shots = apply_detection_noise(&shots, &cfg.noise.model(), noise_seed(seed))?;
    out.csv("shots.csv", |w| Ok(shots.write_csv(w)?))?;
    out.json("shots.json", shots.sidecar())?;

    let g2 = g2_density(&shots)?;
    out.csv("g2_density.csv", |w| Ok(g2.write_csv(w)?))?;

    let mut fits = serde_json::Map::new();
    for (name, dir) in [
        ("horizontal", Direction::Horizontal),
        ("vertical", Direction::Vertical),
        ("radial", Direction::Radial),
    ] {
        let v = match fit_correlation_length(&g2, dir, cfg.analysis.window()) {
            Ok(f) => serde_json::to_value(f)?,
            Err(e) => json!({ "error": e.to_string() }),
        };
        fits.insert(name.into(), v);
    }
    out.json("xi.json", json!({ "window": cfg.analysis.window(), "fits": fits }))?;

    let (af1, af2) = patterns::checkerboard_pair(grid.0, grid.1);
    let p = perfect_order_probability(&shots, (&af1, &af2))?;
    let m = shots.len() as f64;
    out.json(
        "perfect_order.json",
        json!({
            "pattern": "checkerboard",
            "probability": p,
            "stderr": (p * (1.0 - p) / m).sqrt(),
            "n_shots": shots.len(),
        }),
    )?;

    out.json(
        "summary.json",
        json!({
            "n_sites": lattice.len(),
            "basis_dim": op.dim(),
            "norm_drift": evo.norm_drift,
            "substeps": evo.substeps,
            "mean_density_exact": mean_density(&evo.state),
            "order_parameters": order_parameters(&shots)?,
            "noise": cfg.noise.model(),
        }),
    )?;
    Ok(())
}
