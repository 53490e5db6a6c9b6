use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rydsim::analysis::{
    critical_point, fit_correlation_length, fit_nu, g2_density_exact, synthetic_curves, CriticalPointOptions, KzCurve,
};
use rydsim::evolve::{evolve, mean_density};
use rydsim::hamiltonian::DriveSchedule;
use rydsim::hilbert::StateVector;
use rydsim::units::{mhz, mhz_per_us};
use serde_json::{json, Value};

use super::{basis, operator};
use crate::config::{require, ExperimentConfig, KzConfig, KzMode};
use crate::error::CliError;
use crate::output::{num, Output};

/// One recorded point of a sweep: `(Δ/Ω, ξ, σ_ξ, ⟨n⟩)`; `ξ` is `NaN` where
/// the fit failed or diverged.
type Record = (f64, f64, f64, f64);

pub fn run(cfg: &ExperimentConfig, seed: u64, out: &Output) -> Result<(), CliError> {
    let kz = require(&cfg.kz, "kz")?;
    if kz.rates_mhz_per_us.len() < 2 || kz.rates_mhz_per_us.iter().any(|r| !(*r > 0.0)) {
        return Err(CliError::Config("kz needs at least two positive rates".into()));
    }
    let deltas = kz.delta_over_omega.points();
    if deltas.len() < 5 {
        return Err(CliError::Config("kz.delta_over_omega needs at least 5 points".into()));
    }
    let records: Vec<(f64, Vec<Record>)> = match kz.mode {
        KzMode::Synthetic => synthetic(kz, &deltas, seed)?,
        KzMode::Simulate => simulate(cfg, kz, &deltas)?,
    };

    out.csv("kz_curves.csv", |w| {
        writeln!(w, "rate_mhz_per_us,delta_over_omega,xi,xi_err,mean_density")?;
        for (rate, rec) in &records {
            for &(d, xi, err, n) in rec {
                writeln!(w, "{},{},{},{},{}", num(*rate), num(d), num(xi), num(err), num(n))?;
            }
        }
        Ok(())
    })?;

    let (delta_c, delta_c_err, critical) = match kz.delta_c_over_omega {
        Some(dc) => (dc, kz.delta_c_err_over_omega, Value::Null),
        None => {
            // slowest sweep is closest to adiabatic
            let (_, rec) = records
                .iter()
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("at least two rates");
            let x: Vec<f64> = rec.iter().map(|r| r.0).collect();
            let y: Vec<f64> = rec.iter().map(|r| r.3).collect();
            if y.iter().any(|v| v.is_nan()) {
                return Err(CliError::Config("kz.delta_c_over_omega is required in synthetic mode".into()));
            }
            let cp = critical_point(&x, &y, &CriticalPointOptions::default())?;
            (cp.delta_c, cp.uncertainty, serde_json::to_value(&cp)?)
        }
    };

    let curves: Vec<KzCurve> = records
        .iter()
        .map(|(rate, rec)| {
            let ok: Vec<&Record> = rec.iter().filter(|r| r.1.is_finite()).collect();
            KzCurve::new(
                *rate,
                ok.iter().map(|r| r.0).collect(),
                ok.iter().map(|r| r.1).collect(),
                ok.iter().map(|r| r.2).collect(),
            )
        })
        .collect::<Result<_, _>>()?;
    let s0 = kz
        .s0_mhz_per_us
        .unwrap_or_else(|| kz.rates_mhz_per_us.iter().copied().fold(f64::INFINITY, f64::min));
    let fit = fit_nu(&curves, s0, kz.z, delta_c, delta_c_err, kz.scan.unwrap_or_default())?;

    out.csv("kz_scan.csv", |w| {
        writeln!(w, "nu,collapse_distance")?;
        for &(nu, d) in &fit.scan {
            writeln!(w, "{},{}", num(nu), num(d))?;
        }
        Ok(())
    })?;
    out.json(
        "kz_fit.json",
        json!({
            "mode": match kz.mode { KzMode::Simulate => "simulate", KzMode::Synthetic => "synthetic" },
            "nu": fit.nu,
            "nu_err": fit.nu_err,
            "nu_err_curvature": fit.nu_err_curvature,
            "nu_err_delta_c": fit.nu_err_delta_c,
            "collapse_distance": fit.d_min,
            "at_boundary": fit.at_boundary,
            "z": kz.z,
            "s0_mhz_per_us": s0,
            "delta_c_over_omega": delta_c,
            "delta_c_err_over_omega": delta_c_err,
            "critical_point": critical,
            "planted_nu": kz.nu,
        }),
    )?;
    Ok(())
}

fn synthetic(kz: &KzConfig, deltas: &[f64], seed: u64) -> Result<Vec<(f64, Vec<Record>)>, CliError> {
    let nu = kz.nu.ok_or_else(|| CliError::Config("synthetic kz needs nu".into()))?;
    let dc = kz
        .delta_c_over_omega
        .ok_or_else(|| CliError::Config("synthetic kz needs delta_c_over_omega".into()))?;
    let s0 = kz.s0_mhz_per_us.unwrap_or_else(|| kz.rates_mhz_per_us.iter().copied().fold(f64::INFINITY, f64::min));
    let curves = synthetic_curves(&kz.rates_mhz_per_us, deltas, s0, kz.z, nu, dc)?;
    let noise = Normal::new(0.0, kz.noise.max(0.0)).map_err(|e| CliError::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(curves
        .iter()
        .map(|c| {
            let rec = c
                .delta
                .iter()
                .zip(&c.xi)
                .map(|(&d, &xi)| {
                    let eps = if kz.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    (d, xi * (1.0 + eps), xi * kz.noise, f64::NAN)
                })
                .collect();
            (c.rate, rec)
        })
        .collect())
}

/// Linear sweeps at constant `Ω` from `delta_start_over_omega`, recording the
/// exact correlation length at every detuning of the grid.
fn simulate(cfg: &ExperimentConfig, kz: &KzConfig, deltas: &[f64]) -> Result<Vec<(f64, Vec<Record>)>, CliError> {
    let lattice = cfg.lattice()?;
    let grid = lattice.require_grid()?;
    let omega = mhz(kz.omega_mhz);
    if !(omega > 0.0) {
        return Err(CliError::Config("kz.omega_mhz must be positive".into()));
    }
    if !(kz.delta_start_over_omega < deltas[0]) {
        return Err(CliError::Config("kz.delta_start_over_omega must lie below the recorded detunings".into()));
    }
    let basis = basis(cfg, &lattice)?;
    let op = operator(cfg, &lattice, &basis, omega, None)?;
    let window = cfg.analysis.window();
    kz.rates_mhz_per_us
        .par_iter()
        .map(|&rate| -> Result<(f64, Vec<Record>), CliError> {
            // unless configured, Δ moves by at most Ω/50 per substep
            let mut options = cfg.evolve.options();
            if options.substep_dt.is_none() {
                options.substep_dt = Some(omega / (50.0 * mhz_per_us(rate)));
            }
            let mut state = StateVector::ground(basis.clone());
            let mut from = kz.delta_start_over_omega;
            let mut rec = Vec::with_capacity(deltas.len());
            for &d in deltas {
                let leg = DriveSchedule::linear_sweep(from * omega, d * omega, mhz_per_us(rate), omega, 0.0)?;
                state = evolve(&state, &op, &leg, &options)?.state;
                from = d;
                let g2 = g2_density_exact(&state, grid)?;
                let (xi, err) = match fit_correlation_length(&g2, cfg.analysis.fit_direction, window) {
                    Ok(f) if !f.infinite => (f.xi, f.stderr),
                    _ => (f64::NAN, f64::NAN),
                };
                rec.push((d, xi, err, mean_density(&state)));
            }
            Ok((rate, rec))
        })
        .collect()
}
