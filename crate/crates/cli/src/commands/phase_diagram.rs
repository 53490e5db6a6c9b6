use rayon::prelude::*;
use rydsim::analysis::order_parameters_exact;
use rydsim::evolve::{ground_state, mean_density};
use rydsim::hamiltonian::DriveParams;
use rydsim::units::mhz;
use serde_json::json;

use super::{basis, operator};
use crate::config::{require, ExperimentConfig};
use crate::error::CliError;
use crate::output::{num, Output};

struct Point {
    rb: f64,
    delta: f64,
    checkerboard: f64,
    striated: f64,
    star: f64,
    density: f64,
    energy: f64,
    degenerate: bool,
}

pub fn run(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let pd = require(&cfg.phase_diagram, "phase_diagram")?;
    let lattice = cfg.lattice()?;
    let grid = lattice.require_grid()?;
    let omega = mhz(pd.omega_mhz);
    if !(omega > 0.0) {
        return Err(CliError::Config("phase_diagram.omega_mhz must be positive".into()));
    }
    let raster: Vec<(f64, f64)> = pd
        .rb_over_a
        .points()
        .into_iter()
        .flat_map(|rb| pd.delta_over_omega.points().into_iter().map(move |d| (rb, d)))
        .collect();
    if raster.is_empty() {
        return Err(CliError::Config("empty raster: rb_over_a and delta_over_omega need n ≥ 1".into()));
    }
    let basis = basis(cfg, &lattice)?;
    let points: Vec<Point> = raster
        .par_iter()
        .map(|&(rb, d)| -> Result<Point, CliError> {
            let op = operator(cfg, &lattice, &basis, omega, Some(rb))?;
            let gs = ground_state(&op, &DriveParams::new(omega, d * omega, 0.0))?;
            let o = order_parameters_exact(&gs.state, grid)?;
            Ok(Point {
                rb,
                delta: d,
                checkerboard: o.checkerboard,
                striated: o.striated,
                star: o.star,
                density: mean_density(&gs.state),
                energy: gs.energy / (omega * lattice.len() as f64),
                degenerate: gs.degenerate,
            })
        })
        .collect::<Result<_, _>>()?;

    out.csv("phase_diagram.csv", |w| {
        writeln!(w, "rb_over_a,delta_over_omega,checkerboard,striated,star,mean_density,energy_per_site_over_omega,degenerate")?;
        for p in &points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                num(p.rb),
                num(p.delta),
                num(p.checkerboard),
                num(p.striated),
                num(p.star),
                num(p.density),
                num(p.energy),
                p.degenerate
            )?;
        }
        Ok(())
    })?;

    let argmax = |f: fn(&Point) -> f64| {
        let p = points.iter().max_by(|a, b| f(a).total_cmp(&f(b))).unwrap();
        json!({ "rb_over_a": p.rb, "delta_over_omega": p.delta, "value": f(p) })
    };
    out.json(
        "phase_diagram.json",
        json!({
            "grid": [grid.0, grid.1],
            "basis_dim": basis.len(),
            "omega_mhz": pd.omega_mhz,
            "n_points": points.len(),
            "max_checkerboard": argmax(|p| p.checkerboard),
            "max_striated": argmax(|p| p.striated),
            "max_star": argmax(|p| p.star),
        }),
    )?;
    Ok(())
}
