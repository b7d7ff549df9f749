//! A validated configuration bound to its dataset, plus the runs and bound
//! overlays the subcommands emit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mmlab_core::bounds;
use mmlab_core::data::{gaussian_vector, make_gaussian_dataset};
use mmlab_core::optimizers::{run, Family, Mode, RunOptions, Schedule};
use mmlab_core::oracles::{bilinear_accumulated_delta, bilinear_exact_delta};
use mmlab_core::stability::{gen_risk_curve, make_neighbor_dataset, paired_run};
use mmlab_core::{AlgorithmSpec, Dataset, GenRiskCurve, Objective, ObjectiveKind, StabilityTrace, Trajectory, Vector};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// A named curve aligned with the `t` values it was computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct Overlay {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub objective: Objective,
    pub dataset: Dataset,
    pub spec: AlgorithmSpec,
    pub w0: Vector,
    pub theta0: Vector,
    pub population_mean: Vector,
}

impl Experiment {
    /// Validates `config`, draws the dataset and resolves the constants.
    ///
    /// Constants come from the config when given. Otherwise, with both radii
    /// finite, they are the analytic region bounds for data within the largest
    /// sample norm; with an unbounded set only `ℓ` is finite.
    pub fn new(config: ExperimentConfig) -> CliResult<Self> {
        config.validate()?;
        let mut objective = config.objective()?;
        let spec = config.algorithm_spec()?;
        let dataset = make_gaussian_dataset(config.d, config.n, config.seed)?;
        let constants = match config.explicit_constants(objective.kind.mu())? {
            Some(c) => Some(c),
            None if objective.w_radius.is_some() && objective.theta_radius.is_some() => {
                let data_radius = dataset.samples().iter().map(Vector::norm).fold(0.0, f64::max);
                Some(objective.region_constants(data_radius)?)
            }
            None => None,
        };
        if let Some(c) = constants {
            objective = objective.with_constants(c).map_err(|e| CliError::invalid("constants", e))?;
        }
        let w0 = config.vector("w0", &config.w0)?;
        let theta0 = config.vector("theta0", &config.theta0)?;
        let population_mean = config.vector("population_mean", &config.population_mean)?;
        Ok(Self { config, objective, dataset, spec, w0, theta0, population_mean })
    }

    pub fn options(&self) -> RunOptions {
        RunOptions::new(self.config.iterations, self.config.sampling_seed()).with_stride(self.config.stride)
    }

    pub fn trajectory(&self) -> CliResult<Trajectory> {
        Ok(run(self.spec, &self.objective, &self.dataset, &self.w0, &self.theta0, &self.options())?)
    }

    pub fn supports_gen_risk(&self) -> bool {
        !matches!(self.objective.kind, ObjectiveKind::ToyNcSc { .. })
    }

    pub fn gen_risk_curve(&self) -> CliResult<GenRiskCurve> {
        Ok(gen_risk_curve(
            self.spec,
            &self.objective,
            &self.dataset,
            &self.population_mean,
            &self.w0,
            &self.theta0,
            &self.options(),
        )?)
    }

    fn constants_finite(&self) -> bool {
        let c = &self.objective.constants;
        c.lipschitz.is_finite() && c.lipschitz_w.is_finite() && c.smoothness.is_finite()
    }

    /// Theoretical bound on `|ε_gen|` at each `t`, when one applies:
    /// the strongly-convex strongly-concave bounds for constant steps, the
    /// proximal bound linear in `Σ η_t` and the geometric-series GDA bound for
    /// the bilinear objective.
    pub fn gen_risk_overlay(&self, ts: &[usize]) -> CliResult<Option<Overlay>> {
        if !self.constants_finite() {
            return Ok(None);
        }
        let c = &self.objective.constants;
        let n = self.config.n;
        let constant_line = |name: String, v: f64| Some(Overlay { name, values: vec![v; ts.len()] });
        let overlay = match (self.objective.kind, self.spec.family) {
            (ObjectiveKind::ScScQuadratic { .. }, family) => {
                let (alg, step) = match family {
                    Family::Gda { step_w: Schedule::Constant(a), .. } => (bounds::Algorithm::Gda, a),
                    Family::GdMax { step_w: Schedule::Constant(a) } => (bounds::Algorithm::GdMax, a),
                    Family::Ppm { eta: Schedule::Constant(e) } => (bounds::Algorithm::Ppm, e),
                    Family::PpMax { eta: Schedule::Constant(e) } => (bounds::Algorithm::PpMax, e),
                    _ => return Ok(None),
                };
                let r = bounds::thm2_bound(alg, c, n, step)?;
                constant_line(r.name, r.value)
            }
            (ObjectiveKind::Bilinear, Family::Ppm { eta }) => Some(Overlay {
                name: "thm3_ppm".into(),
                values: ts.iter().map(|&t| bounds::thm3_bound(eta, c, n, t)).collect::<Result<_, _>>()?,
            }),
            (ObjectiveKind::Bilinear, Family::PpMax { eta }) => Some(Overlay {
                name: "thm3_ppmax".into(),
                values: ts.iter().map(|&t| bounds::thm3_ppmax_bound(eta, c, n, t)).collect::<Result<_, _>>()?,
            }),
            (
                ObjectiveKind::Bilinear,
                Family::Gda { step_w: Schedule::Constant(a), step_theta: Schedule::Constant(b) },
            ) if a == b => Some(Overlay {
                name: "remark1_proof_exact".into(),
                values: ts
                    .iter()
                    .map(|&t| bounds::remark1_bound(a, c, n, t).map(|r| r.value))
                    .collect::<Result<_, _>>()?,
            }),
            _ => None,
        };
        Ok(overlay)
    }

    /// Neighbor dataset from the `stability` section (index 0 and a standard
    /// normal replacement drawn from `seed + 1` by default).
    pub fn neighbor(&self) -> CliResult<(Dataset, usize)> {
        let st = self.config.stability.clone().unwrap_or(crate::config::StabilityConfig {
            replaced_index: 0,
            replacement: None,
            num_seeds: 1,
        });
        let z = match st.replacement {
            Some(z) => Vector::new(z).map_err(|e| CliError::invalid("stability.replacement", e))?,
            None => gaussian_vector(&mut ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(1)), self.config.d),
        };
        Ok((make_neighbor_dataset(&self.dataset, st.replaced_index, z)?, st.replaced_index))
    }

    pub fn num_seeds(&self) -> usize {
        self.config.stability.as_ref().map_or(1, |s| s.num_seeds)
    }

    /// One coupled run per seed `run_seed + k`, fanned out over the pool.
    pub fn stability_traces(&self, pool: &rayon::ThreadPool) -> CliResult<Vec<StabilityTrace>> {
        let (neighbor, _) = self.neighbor()?;
        let base = self.config.sampling_seed();
        let stride = self.config.stride;
        pool.install(|| {
            (0..self.num_seeds() as u64)
                .into_par_iter()
                .map(|k| {
                    let opts = RunOptions::new(self.config.iterations, base.wrapping_add(k)).with_stride(stride);
                    paired_run(self.spec, &self.objective, &self.dataset, &neighbor, &self.w0, &self.theta0, &opts)
                        .map_err(CliError::from)
                })
                .collect()
        })
    }

    /// Reference divergence curves for a stability run.
    pub fn stability_overlays(&self, ts: &[usize]) -> CliResult<Vec<Overlay>> {
        let mut out = Vec::new();
        let c = &self.objective.constants;
        let n = self.config.n;
        let unprojected = self.objective.w_radius.is_none() && self.objective.theta_radius.is_none();
        match (self.objective.kind, self.spec.family, self.spec.mode) {
            (
                ObjectiveKind::Bilinear,
                Family::Gda { step_w: Schedule::Constant(a), step_theta: Schedule::Constant(b) },
                Mode::FullBatch,
            ) if a == b && unprojected => {
                let (neighbor, i) = self.neighbor()?;
                let dz = &self.dataset.samples()[i] - &neighbor.samples()[i];
                out.push(Overlay {
                    name: "exact_delta".into(),
                    values: ts.iter().map(|&t| bilinear_exact_delta(a, n, t, &dz)).collect(),
                });
                out.push(Overlay {
                    name: "accumulated_delta".into(),
                    values: ts.iter().map(|&t| bilinear_accumulated_delta(a, n, t, &dz)).collect(),
                });
            }
            (ObjectiveKind::ScScQuadratic { .. }, Family::Gda { step_w: Schedule::Constant(a), .. }, _)
                if self.constants_finite() =>
            {
                let limit = bounds::thm2_gda_delta_limit(c, n, a)?;
                out.push(Overlay { name: "thm2_delta_limit".into(), values: vec![limit; ts.len()] });
            }
            (_, Family::Ppm { eta } | Family::PpMax { eta }, _) if self.constants_finite() => {
                out.push(Overlay {
                    name: "thm3_delta".into(),
                    values: ts.iter().map(|&t| 2.0 * c.lipschitz / n as f64 * eta.sum(t)).collect(),
                });
            }
            _ => {}
        }
        Ok(out)
    }
}

/// Mean of `δ_t` over traces recorded at the same iterations.
pub fn mean_delta(traces: &[StabilityTrace]) -> Vec<f64> {
    let k = traces.len() as f64;
    (0..traces[0].t.len()).map(|j| traces.iter().map(|tr| tr.delta[j]).sum::<f64>() / k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn region_constants_used_when_radii_are_finite() {
        let cfg = config(
            r#"{"objective": {"kind": "bilinear"}, "d": 2, "n": 5, "seed": 0,
                "algorithm": {"family": "ppm", "mode": "stochastic", "eta": "constant:0.1"},
                "iterations": 3, "rho_w": 2, "rho_theta": 3}"#,
        );
        let ex = Experiment::new(cfg).unwrap();
        let r = ex.dataset.samples().iter().map(Vector::norm).fold(0.0, f64::max);
        assert!((ex.objective.constants.lipschitz_w - (r + 3.0)).abs() < 1e-12);
        let ov = ex.gen_risk_overlay(&[0, 1, 2]).unwrap().unwrap();
        assert_eq!(ov.name, "thm3_ppm");
        assert_eq!(ov.values[0], 0.0);
    }

    #[test]
    fn unbounded_sets_have_no_gen_overlay() {
        let cfg = config(
            r#"{"objective": {"kind": "scsc_quadratic", "mu": 0.1}, "d": 2, "n": 5, "seed": 0,
                "algorithm": {"family": "gda", "mode": "full_batch", "step_w": "constant:0.01", "step_theta": "constant:0.01"},
                "iterations": 3}"#,
        );
        let ex = Experiment::new(cfg).unwrap();
        assert!(ex.gen_risk_overlay(&[0]).unwrap().is_none());
    }

    #[test]
    fn bilinear_full_batch_overlays() {
        let cfg = config(
            r#"{"objective": {"kind": "bilinear"}, "d": 2, "n": 10, "seed": 0,
                "algorithm": {"family": "gda", "mode": "full_batch", "step_w": "constant:0.1", "step_theta": "constant:0.1"},
                "iterations": 20, "stability": {"replaced_index": 3, "replacement": [1.0, -1.0]}}"#,
        );
        let ex = Experiment::new(cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let traces = ex.stability_traces(&pool).unwrap();
        let ov = ex.stability_overlays(&traces[0].t).unwrap();
        assert_eq!(ov.len(), 2);
        for (d, a) in traces[0].delta.iter().zip(&ov[1].values).skip(1) {
            assert!((d - a).abs() <= 1e-9 * a);
        }
    }
}
