use rayon::prelude::*;
use rydsim::rearrange::{plan_and_simulate, random_load, CostModel, RearrangeOutcome};
use serde_json::json;

use crate::config::{require, ExperimentConfig};
use crate::error::CliError;
use crate::output::{num, Output};

pub fn run(cfg: &ExperimentConfig, seed: u64, out: &Output) -> Result<(), CliError> {
    let r = require(&cfg.rearrange, "rearrange")?;
    if r.instances == 0 {
        return Err(CliError::Config("rearrange.instances must be at least 1".into()));
    }
    let cost = CostModel {
        pickup_ms: r.pickup_ms,
        speed_um_per_ms: r.speed_um_per_ms,
        site_pitch_um: r.site_pitch_um,
        background_lifetime_s: r.lifetime_s,
    };
    cost.validate()?;
    // instance k loads and loses atoms with seed + k
    let outcomes: Vec<(usize, RearrangeOutcome)> = (0..r.instances)
        .into_par_iter()
        .map(|k| -> Result<_, CliError> {
            let s = seed.wrapping_add(k as u64);
            let g = random_load(r.rows, r.cols, r.load_probability, s)?.with_centered_target(r.target_rows, r.target_cols)?;
            let atoms = g.atom_count();
            Ok((atoms, plan_and_simulate(&g, &cost, r.two_rounds, s)?))
        })
        .collect::<Result<_, _>>()?;

    out.csv("rearrange_instances.csv", |w| {
        writeln!(w, "instance,seed,atoms,filling_fraction,est_time_ms,losses,n_scans,n_pickups,unresolved_columns")?;
        for (k, (atoms, o)) in outcomes.iter().enumerate() {
            let unresolved: usize = o.plan.rounds.iter().map(|r| r.unresolved_columns.len()).sum();
            writeln!(
                w,
                "{k},{},{atoms},{},{},{},{},{},{unresolved}",
                seed.wrapping_add(k as u64),
                num(o.filling_fraction),
                num(o.est_time_ms),
                o.losses,
                o.plan.cost.n_scans,
                o.plan.cost.n_pickups,
            )?;
        }
        Ok(())
    })?;

    for (k, (_, o)) in outcomes.iter().enumerate().take(r.export_plans) {
        out.json(&format!("plan_{k:04}.json"), serde_json::to_value(&o.plan)?)?;
        out.csv(&format!("plan_{k:04}_events.csv"), |w| Ok(o.plan.write_event_log(w)?))?;
    }

    let n = outcomes.len() as f64;
    let fill: Vec<f64> = outcomes.iter().map(|(_, o)| o.filling_fraction).collect();
    let mean = fill.iter().sum::<f64>() / n;
    let std = if outcomes.len() > 1 {
        (fill.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let perfect = fill.iter().filter(|&&f| f == 1.0).count();
    out.json(
        "rearrange_summary.json",
        json!({
            "instances": outcomes.len(),
            "grid": [r.rows, r.cols],
            "target": [r.target_rows, r.target_cols],
            "load_probability": r.load_probability,
            "two_rounds": r.two_rounds,
            "cost_model": cost,
            "mean_filling": mean,
            "std_filling": std,
            "stderr_filling": std / n.sqrt(),
            "perfect_fraction": perfect as f64 / n,
            "mean_est_time_ms": outcomes.iter().map(|(_, o)| o.est_time_ms).sum::<f64>() / n,
            "mean_losses": outcomes.iter().map(|(_, o)| o.losses as f64).sum::<f64>() / n,
        }),
    )?;
    Ok(())
}
