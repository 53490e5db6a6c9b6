use rayon::prelude::*;
use rydsim::analysis::conditional_density_exact;
use rydsim::evolve::{evolve, evolve_constant};
use rydsim::hamiltonian::DriveParams;
use rydsim::hilbert::StateVector;
use rydsim::meanfield::{fit_bloch, Jitter, QuenchModel};
use rydsim::units::{mhz, us};
use serde_json::json;

use super::{basis, operator, schedule_omega};
use crate::config::{require, ExperimentConfig};
use crate::error::CliError;
use crate::output::{num, Output};

/// `P^(d)` for `d = 0..=4` as `(p, stderr)`; `p` is `NaN` without events.
type Conditional = Vec<(f64, f64)>;

pub fn run(cfg: &ExperimentConfig, out: &Output) -> Result<(), CliError> {
    let q = require(&cfg.quench, "quench")?;
    let lattice = cfg.lattice()?;
    let grid = lattice.require_grid()?;
    let schedule = cfg.drive_schedule()?;
    let basis = basis(cfg, &lattice)?;
    let interactions = cfg.interactions(&lattice, schedule_omega(&schedule), None)?;
    let op = operator(cfg, &lattice, &basis, schedule_omega(&schedule), None)?;
    let prepared = evolve(&StateVector::ground(basis), &op, &schedule, &cfg.evolve.options())?.state;
    let (omega_q, t_q) = (mhz(q.omega_mhz), us(q.t_us));
    if omega_q < 0.0 || t_q < 0.0 {
        return Err(CliError::Config("quench needs omega_mhz ≥ 0 and t_us ≥ 0".into()));
    }

    let quench = |delta_mhz: f64, phi: f64| -> Result<Conditional, CliError> {
        let params = DriveParams::new(omega_q, mhz(delta_mhz), phi);
        let s = evolve_constant(&prepared, &op, &params, t_q, &cfg.evolve.options())?;
        (0..=4)
            .map(|d| {
                let c = conditional_density_exact(&s, grid, d)?;
                Ok((c.p.unwrap_or(f64::NAN), c.stderr))
            })
            .collect()
    };

    let delta_scan: Vec<Conditional> = q.delta_mhz.par_iter().map(|&d| quench(d, q.phi)).collect::<Result<_, _>>()?;
    out.csv("quench_delta.csv", |w| {
        writeln!(w, "delta_mhz,phi,d,p,stderr")?;
        for (dq, row) in q.delta_mhz.iter().zip(&delta_scan) {
            for (d, (p, e)) in row.iter().enumerate() {
                writeln!(w, "{},{},{d},{},{}", num(*dq), num(q.phi), num(*p), num(*e))?;
            }
        }
        Ok(())
    })?;

    let mut fit_deltas: Vec<f64> = q.fits.iter().map(|f| f.delta_mhz).collect();
    fit_deltas.sort_by(f64::total_cmp);
    fit_deltas.dedup();
    let jobs: Vec<(f64, f64)> = fit_deltas
        .iter()
        .flat_map(|&d| q.phi_scan.iter().map(move |&phi| (d, phi)))
        .collect();
    let phi_scan: Vec<Conditional> = jobs.par_iter().map(|&(d, phi)| quench(d, phi)).collect::<Result<_, _>>()?;
    out.csv("quench_phi.csv", |w| {
        writeln!(w, "delta_mhz,phi,d,p,stderr")?;
        for ((dq, phi), row) in jobs.iter().zip(&phi_scan) {
            for (d, (p, e)) in row.iter().enumerate() {
                writeln!(w, "{},{},{d},{},{}", num(*dq), num(*phi), num(*p), num(*e))?;
            }
        }
        Ok(())
    })?;

    // V(√2 a): the shift from each excited diagonal neighbor
    let v_diag = interactions.v0 / (2.0f64.sqrt() * lattice.spacing()).powi(6);
    let mut fits = Vec::new();
    for f in &q.fits {
        if f.d > 4 {
            return Err(CliError::Config(format!("fit d = {} must be at most 4", f.d)));
        }
        let shift = f.d as f64 * v_diag;
        let delta_eff = f.delta_eff_mhz.map_or(mhz(f.delta_mhz) - shift, mhz);
        // the single-atom model puts +Δ on |r⟩, the many-body drive −Δ
        let mut model = QuenchModel::new(omega_q, -delta_eff, t_q, 0.0);
        if q.jitter {
            model = model.with_jitter(Jitter::for_interaction_shift(shift));
        }
        let (phis, ps): (Vec<f64>, Vec<f64>) = jobs
            .iter()
            .zip(&phi_scan)
            .filter(|((d, _), row)| *d == f.delta_mhz && row[f.d].0.is_finite())
            .map(|((_, phi), row)| (*phi, row[f.d].0))
            .unzip();
        let result = match fit_bloch(&phis, &ps, &model, f.residual_threshold) {
            Ok(b) => b.to_json(),
            Err(e) => json!({ "error": e.to_string() }),
        };
        fits.push(json!({
            "d": f.d,
            "delta_mhz": f.delta_mhz,
            "delta_eff_mhz": delta_eff / mhz(1.0),
            "jitter": q.jitter,
            "n_points": phis.len(),
            "fit": result,
        }));
    }
    out.json(
        "bloch_fits.json",
        json!({
            "omega_q_mhz": q.omega_mhz,
            "t_q_us": q.t_us,
            "v_diag_mhz": v_diag / mhz(1.0),
            "fits": fits,
        }),
    )?;
    Ok(())
}
