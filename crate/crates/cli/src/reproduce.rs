//! The twelve built-in figure experiments.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{AlgorithmConfig, ExperimentConfig, ObjectiveConfig};
use crate::error::{CliError, CliResult};
use crate::experiment::Experiment;
use crate::output::OutputSet;
use crate::svg::{line_plot, Series};

pub const FIGURE_IDS: [&str; 12] = [
    "scsc-sgda",
    "scsc-sppm",
    "scsc-gda",
    "scsc-ppm",
    "scsc-gdmax",
    "scsc-sgdmax",
    "bilinear-sgda",
    "bilinear-sppm",
    "bilinear-gda",
    "bilinear-ppm",
    "bilinear-gdmax",
    "bilinear-sgdmax",
];

pub const DIM: usize = 50;
pub const SAMPLES: usize = 1000;
pub const MU: f64 = 0.1;
pub const STEP: f64 = 0.02;
pub const ITERATIONS: usize = 20_000;
pub const RADIUS: f64 = 100.0;
pub const STRIDE: usize = 10;

/// Configuration of a figure. The seed draws both the dataset and the
/// sampling stream; the population mean is zero.
pub fn figure_config(id: &str, seed: u64) -> CliResult<ExperimentConfig> {
    let (objective, algo) = id.split_once('-').filter(|_| FIGURE_IDS.contains(&id)).ok_or_else(|| {
        CliError::invalid("figure_id", format!("unknown figure {id:?}; expected one of {}", FIGURE_IDS.join(", ")))
    })?;
    let objective = match objective {
        "scsc" => ObjectiveConfig::ScscQuadratic { mu: MU },
        _ => ObjectiveConfig::Bilinear,
    };
    let (mode, family) = match algo.strip_prefix('s') {
        Some(rest) => ("stochastic", rest),
        None => ("full_batch", algo),
    };
    let step = Some(format!("constant:{STEP}"));
    let algorithm = match family {
        "gda" => AlgorithmConfig {
            family: family.into(),
            mode: mode.into(),
            step_w: step.clone(),
            step_theta: step,
            eta: None,
        },
        "gdmax" => {
            AlgorithmConfig { family: family.into(), mode: mode.into(), step_w: step, step_theta: None, eta: None }
        }
        _ => AlgorithmConfig { family: family.into(), mode: mode.into(), step_w: None, step_theta: None, eta: step },
    };
    Ok(ExperimentConfig {
        objective,
        d: DIM,
        n: SAMPLES,
        seed,
        run_seed: None,
        algorithm,
        iterations: ITERATIONS,
        stride: STRIDE,
        rho_w: Some(RADIUS),
        rho_theta: Some(RADIUS),
        constants: None,
        w0: None,
        theta0: None,
        population_mean: None,
        output_dir: None,
        stability: None,
    })
}

/// Runs one figure and writes `<id>.csv`, `<id>_bound.csv` when a bound
/// applies, `<id>.svg` and the `<id>.done` marker.
pub fn reproduce_figure(id: &str, seed: u64, out: &Path) -> CliResult<Vec<PathBuf>> {
    let config = figure_config(id, seed)?;
    let mut files = OutputSet::create(out, config.hash())?;
    let ex = Experiment::new(config)?;
    let curve = ex.gen_risk_curve()?;
    let overlay = ex.gen_risk_overlay(&curve.t)?;

    files.write_csv(&format!("{id}.csv"), |b| curve.write_csv(b))?;
    if let Some(ov) = &overlay {
        files.write_csv(&format!("{id}_bound.csv"), |b| {
            b.extend_from_slice(format!("t,{}\n", ov.name).as_bytes());
            for (t, v) in curve.t.iter().zip(&ov.values) {
                b.extend_from_slice(format!("{t},{}\n", mmlab_core::data::format_f64(*v)).as_bytes());
            }
            Ok(())
        })?;
    }

    let xs = curve.t.iter().map(|&t| t as f64);
    let signed: Vec<_> = xs.clone().zip(curve.gen_risk.iter().copied()).collect();
    let absolute: Vec<_> = signed.iter().map(|&(x, y)| (x, y.abs())).collect();
    let mut series = vec![Series::new("eps_gen", signed), Series::new("|eps_gen|", absolute)];
    let mut notes = vec![format!("seed {seed}"), format!("max |eps_gen| = {:.4e}", curve.max_abs())];
    if let Some(ov) = overlay {
        let top = ov.values.iter().copied().fold(0.0, f64::max);
        // A bound orders of magnitude above the curve would flatten it.
        if top > 100.0 * curve.max_abs().max(f64::MIN_POSITIVE) {
            notes.push(format!("{} up to {top:.4e} (off scale)", ov.name));
        } else {
            series.push(Series::new(ov.name, xs.zip(ov.values).collect()).dashed());
        }
    }
    let svg = line_plot(&format!("{id}: generalization risk"), "iteration t", "eps_gen", &series, &notes);
    files.write_text(&format!("{id}.svg"), &svg)?;
    files.finish(id)
}

/// Runs `id`, or every figure in parallel when `id` is `all`.
pub fn reproduce(id: &str, seed: u64, out: &Path, pool: &rayon::ThreadPool) -> CliResult<Vec<PathBuf>> {
    if id != "all" {
        return pool.install(|| reproduce_figure(id, seed, out));
    }
    let nested: Vec<Vec<PathBuf>> =
        pool.install(|| FIGURE_IDS.par_iter().map(|id| reproduce_figure(id, seed, out)).collect::<CliResult<_>>())?;
    Ok(nested.into_iter().flatten().collect())
}
