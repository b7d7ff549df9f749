//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mmlab_core::optimizers::{AlgorithmSpec, Mode, Schedule};
use mmlab_core::{Constants, Objective, ObjectiveKind, Vector};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    Bilinear,
    ScscQuadratic { mu: f64 },
    ToyNcsc { mu: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    /// `gda`, `gdmax`, `ppm` or `ppmax`.
    pub family: String,
    /// `full_batch` or `stochastic`.
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_w: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_theta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "L_w")]
    pub lipschitz_w: f64,
    pub ell: f64,
}

/// A vector given in full or as one value repeated `d` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Fill(f64),
    Entries(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default)]
    pub replaced_index: usize,
    /// Replacement sample; a standard normal draw when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub num_seeds: usize,
}

fn one() -> usize {
    1
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveConfig,
    pub d: usize,
    pub n: usize,
    /// Seed of the Gaussian dataset.
    pub seed: u64,
    /// Seed of the sampling stream; defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_seed: Option<u64>,
    pub algorithm: AlgorithmConfig,
    pub iterations: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_theta: Option<f64>,
    /// Bound-overlay constants. Derived from the feasible balls and the data
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_mean: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    pub fn sampling_seed(&self) -> u64 {
        self.run_seed.unwrap_or(self.seed)
    }

    pub fn objective_kind(&self) -> CliResult<ObjectiveKind> {
        let positive_mu = |mu: f64| {
            if mu > 0.0 && mu.is_finite() {
                Ok(mu)
            } else {
                Err(CliError::invalid("objective.mu", format!("must be > 0, got {mu}")))
            }
        };
        Ok(match self.objective {
            ObjectiveConfig::Bilinear => ObjectiveKind::Bilinear,
            ObjectiveConfig::ScscQuadratic { mu } => ObjectiveKind::ScScQuadratic { mu: positive_mu(mu)? },
            ObjectiveConfig::ToyNcsc { mu } => ObjectiveKind::ToyNcSc { mu: positive_mu(mu)? },
        })
    }

    /// Objective with radii applied; constants are resolved by the caller.
    pub fn objective(&self) -> CliResult<Objective> {
        if self.d == 0 {
            return Err(CliError::invalid("d", "must be >= 1"));
        }
        for (key, r) in [("rho_w", self.rho_w), ("rho_theta", self.rho_theta)] {
            if let Some(r) = r {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(CliError::invalid(key, format!("must be > 0, got {r}")));
                }
            }
        }
        Objective::new(self.objective_kind()?, self.d)
            .and_then(|o| o.with_radii(self.rho_w, self.rho_theta))
            .map_err(|e| CliError::invalid("objective", e))
    }

    pub fn explicit_constants(&self, mu: f64) -> CliResult<Option<Constants>> {
        self.constants
            .as_ref()
            .map(|c| {
                Constants::new(c.lipschitz, c.lipschitz_w, c.ell, mu).map_err(|e| CliError::invalid("constants", e))
            })
            .transpose()
    }

    pub fn algorithm_spec(&self) -> CliResult<AlgorithmSpec> {
        let a = &self.algorithm;
        let mode = match a.mode.as_str() {
            "full_batch" => Mode::FullBatch,
            "stochastic" => Mode::Stochastic,
            other => return Err(CliError::invalid("algorithm.mode", format!("unknown mode {other:?}"))),
        };
        let sched = |key: &str, value: &Option<String>| -> CliResult<Schedule> {
            let text = value.as_deref().ok_or_else(|| {
                CliError::invalid(&format!("algorithm.{key}"), format!("required for family {}", a.family))
            })?;
            text.parse().map_err(|e| CliError::invalid(&format!("algorithm.{key}"), e))
        };
        let spec = match a.family.as_str() {
            "gda" => AlgorithmSpec::gda(mode, sched("step_w", &a.step_w)?, sched("step_theta", &a.step_theta)?),
            "gdmax" => AlgorithmSpec::gdmax(mode, sched("step_w", &a.step_w)?),
            "ppm" => AlgorithmSpec::ppm(mode, sched("eta", &a.eta)?),
            "ppmax" => AlgorithmSpec::ppmax(mode, sched("eta", &a.eta)?),
            other => return Err(CliError::invalid("algorithm.family", format!("unknown family {other:?}"))),
        };
        Ok(spec)
    }

    pub fn vector(&self, key: &str, spec: &Option<VectorSpec>) -> CliResult<Vector> {
        match spec {
            None => Ok(Vector::zeros(self.d)),
            Some(VectorSpec::Fill(x)) => Vector::new(vec![*x; self.d]).map_err(|e| CliError::invalid(key, e)),
            Some(VectorSpec::Entries(xs)) => {
                if xs.len() != self.d {
                    return Err(CliError::invalid(key, format!("has {} entries, expected d={}", xs.len(), self.d)));
                }
                Vector::new(xs.clone()).map_err(|e| CliError::invalid(key, e))
            }
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> CliResult<()> {
        let obj = self.objective()?;
        if self.n == 0 {
            return Err(CliError::invalid("n", "must be >= 1"));
        }
        if self.stride == 0 {
            return Err(CliError::invalid("stride", "must be >= 1"));
        }
        self.algorithm_spec()?;
        self.explicit_constants(obj.kind.mu())?;
        let w0 = self.vector("w0", &self.w0)?;
        let t0 = self.vector("theta0", &self.theta0)?;
        self.vector("population_mean", &self.population_mean)?;
        if let Some(r) = self.rho_w {
            if w0.norm() > r {
                return Err(CliError::invalid("w0", "lies outside the w-ball"));
            }
        }
        if let Some(r) = self.rho_theta {
            if t0.norm() > r {
                return Err(CliError::invalid("theta0", "lies outside the θ-ball"));
            }
        }
        if let Some(st) = &self.stability {
            if st.replaced_index >= self.n {
                return Err(CliError::invalid("stability.replaced_index", format!("must be < n={}", self.n)));
            }
            if st.num_seeds == 0 {
                return Err(CliError::invalid("stability.num_seeds", "must be >= 1"));
            }
            if let Some(z) = &st.replacement {
                if z.len() != self.d {
                    return Err(CliError::invalid("stability.replacement", format!("expected {} entries", self.d)));
                }
                Vector::new(z.clone()).map_err(|e| CliError::invalid("stability.replacement", e))?;
            }
        }
        Ok(())
    }
}
