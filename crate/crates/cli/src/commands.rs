//! Subcommand implementations; `main` only parses arguments and maps errors to
//! exit codes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use mmlab_core::bounds::{self, Algorithm, BoundReport, Lemma1Regime};
use mmlab_core::data::format_f64;
use mmlab_core::optimizers::Schedule;
use mmlab_core::{Constants, LabError};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::experiment::{mean_delta, Experiment};
use crate::output::OutputSet;

pub const WORKERS_VAR: &str = "MMLAB_WORKERS";
pub const DEFAULT_OUTPUT_DIR: &str = "mmlab-out";

/// Thread pool sized by `MMLAB_WORKERS`, or by rayon's default when unset.
pub fn worker_pool() -> CliResult<rayon::ThreadPool> {
    let threads = match std::env::var(WORKERS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => k,
            _ => return Err(CliError::invalid(WORKERS_VAR, format!("must be a positive integer, got {v:?}"))),
        },
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}

fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

/// Writes `trajectory.csv`, `gen_risk.csv` (when the objective has a closed
/// form), `config.json` and the `run.done` marker.
pub fn cmd_run(config_path: &Path) -> CliResult<Vec<PathBuf>> {
    let config = ExperimentConfig::load(config_path)?;
    let ex = Experiment::new(config)?;
    let mut files = OutputSet::create(&output_dir(&ex.config), ex.config.hash())?;
    files.write_text("config.json", &ex.config.to_json())?;
    let traj = ex.trajectory()?;
    files.write_csv("trajectory.csv", |b| traj.write_csv(b))?;
    if ex.supports_gen_risk() {
        let curve = ex.gen_risk_curve()?;
        files.write_csv("gen_risk.csv", |b| curve.write_csv(b))?;
    }
    files.finish("run")
}

/// Writes one `trace_seed<k>.csv` per seed, `trace_mean.csv`, `bound.csv`
/// when reference curves apply, and the `stability.done` marker.
pub fn cmd_stability(config_path: &Path, pool: &rayon::ThreadPool) -> CliResult<Vec<PathBuf>> {
    let config = ExperimentConfig::load(config_path)?;
    let ex = Experiment::new(config)?;
    let mut files = OutputSet::create(&output_dir(&ex.config), ex.config.hash())?;
    files.write_text("config.json", &ex.config.to_json())?;
    let traces = ex.stability_traces(pool)?;
    for (k, trace) in traces.iter().enumerate() {
        files.write_csv(&format!("trace_seed{k}.csv"), |b| trace.write_csv(b))?;
    }
    let ts = &traces[0].t;
    let mean = mean_delta(&traces);
    files.write_csv("trace_mean.csv", |b| {
        b.extend_from_slice(b"t,delta\n");
        for (t, d) in ts.iter().zip(&mean) {
            b.extend_from_slice(format!("{t},{}\n", format_f64(*d)).as_bytes());
        }
        Ok(())
    })?;
    let overlays = ex.stability_overlays(ts)?;
    if !overlays.is_empty() {
        files.write_csv("bound.csv", |b| {
            let names: Vec<&str> = overlays.iter().map(|o| o.name.as_str()).collect();
            b.extend_from_slice(format!("t,{}\n", names.join(",")).as_bytes());
            for (j, t) in ts.iter().enumerate() {
                let row: Vec<String> = overlays.iter().map(|o| format_f64(o.values[j])).collect();
                b.extend_from_slice(format!("{t},{}\n", row.join(",")).as_bytes());
            }
            Ok(())
        })?;
    }
    files.finish("stability")
}

pub const THEOREMS: [&str; 10] = ["lemma1", "thm2", "remark1", "thm3", "thm4", "cor1", "thm5", "thm6", "lemma6", "all"];
const PARAM_KEYS: [&str; 14] =
    ["L", "L_w", "ell", "mu", "n", "T", "alpha", "alpha_w", "alpha_theta", "eta", "c", "r", "D", "dz"];

/// Parsed `k=v,...` list.
#[derive(Clone, Debug)]
pub struct BoundParams(BTreeMap<String, f64>);

impl BoundParams {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| CliError::invalid("params", format!("expected key=value, got {item:?}")))?;
            let k = k.trim();
            if !PARAM_KEYS.contains(&k) {
                return Err(CliError::invalid(k, format!("unknown parameter; known: {}", PARAM_KEYS.join(", "))));
            }
            let v: f64 = v.trim().parse().map_err(|e| CliError::invalid(k, format!("{e} ({v:?})")))?;
            if !v.is_finite() {
                return Err(CliError::invalid(k, "must be finite"));
            }
            if map.insert(k.to_string(), v).is_some() {
                return Err(CliError::invalid(k, "given twice"));
            }
        }
        Ok(Self(map))
    }

    fn get(&self, key: &str) -> Option<f64> {
        self.0.get(key).copied()
    }

    fn need(&self, key: &str, theorem: &str) -> CliResult<f64> {
        self.get(key).ok_or_else(|| CliError::invalid(key, format!("required by {theorem}")))
    }

    fn count(&self, key: &str, theorem: &str) -> CliResult<usize> {
        let v = self.need(key, theorem)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(CliError::invalid(key, format!("must be a non-negative integer, got {v}")));
        }
        Ok(v as usize)
    }

    /// Constants with absent entries unbounded (`L_w` defaults to `L`) and
    /// `μ` zero; each theorem asks for the keys it reads.
    fn constants(&self) -> CliResult<Constants> {
        Constants::new(
            self.get("L").unwrap_or(f64::INFINITY),
            self.get("L_w").or(self.get("L")).unwrap_or(f64::INFINITY),
            self.get("ell").unwrap_or(f64::INFINITY),
            self.get("mu").unwrap_or(0.0),
        )
        .map_err(|e| CliError::invalid("params", e))
    }

    fn canonical(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
    }
}

fn bound_error(e: LabError) -> CliError {
    CliError::invalid("params", e)
}

fn row(name: impl Into<String>, value: f64) -> BoundReport {
    BoundReport { name: name.into(), value, conditions: Vec::new() }
}

fn reports(theorem: &str, p: &BoundParams) -> CliResult<Vec<BoundReport>> {
    if !THEOREMS.contains(&theorem) {
        return Err(CliError::invalid(
            "theorem",
            format!("unknown theorem {theorem:?}; expected one of {}", THEOREMS.join(", ")),
        ));
    }
    let need = |k: &str| p.need(k, theorem);
    let c = p.constants()?;
    let mut out = Vec::new();
    match theorem {
        "lemma1" => {
            need("ell")?;
            let alpha = p.get("alpha");
            let (aw, at) = (p.get("alpha_w").or(alpha), p.get("alpha_theta").or(alpha));
            if let (Some(aw), Some(at)) = (aw, at) {
                out.push(bounds::lemma1_coefficient(Lemma1Regime::NonconvexGda { alpha_w: aw, alpha_theta: at }, &c));
            }
            if let Some(a) = alpha {
                out.push(bounds::lemma1_coefficient(Lemma1Regime::ConvexConcaveGda { alpha: a }, &c));
                if c.mu > 0.0 {
                    out.push(bounds::lemma1_coefficient(Lemma1Regime::ScScGda { alpha: a }, &c));
                }
            }
            if let Some(eta) = p.get("eta") {
                out.push(bounds::lemma1_coefficient(Lemma1Regime::NonconvexPpm { eta }, &c));
                out.push(bounds::lemma1_coefficient(Lemma1Regime::ConvexConcavePpm { eta }, &c));
                if c.mu > 0.0 {
                    out.push(bounds::lemma1_coefficient(Lemma1Regime::ScScPpm { eta }, &c));
                }
            }
            if out.is_empty() {
                return Err(CliError::invalid("alpha", "lemma1 needs alpha, alpha_w/alpha_theta or eta"));
            }
        }
        "thm2" => {
            for k in ["L", "L_w", "ell", "mu"] {
                need(k)?;
            }
            let n = p.count("n", theorem)?;
            if let Some(a) = p.get("alpha_w").or(p.get("alpha")) {
                for alg in [Algorithm::Gda, Algorithm::GdMax] {
                    out.push(bounds::thm2_bound(alg, &c, n, a).map_err(bound_error)?);
                }
            }
            if let Some(eta) = p.get("eta") {
                for alg in [Algorithm::Ppm, Algorithm::PpMax] {
                    out.push(bounds::thm2_bound(alg, &c, n, eta).map_err(bound_error)?);
                }
            }
            if out.is_empty() {
                return Err(CliError::invalid("alpha", "thm2 needs alpha or eta"));
            }
        }
        "remark1" => {
            for k in ["L", "L_w", "ell"] {
                need(k)?;
            }
            let (alpha, n, t) = (need("alpha")?, p.count("n", theorem)?, p.count("T", theorem)?);
            out.push(bounds::remark1_bound(alpha, &c, n, t).map_err(bound_error)?);
            if let Some(dz) = p.get("dz") {
                out.push(row("remark1_exact_delta", bounds::remark1_exact_bilinear_delta(alpha, n, t, dz)));
            }
        }
        "thm3" => {
            need("L")?;
            need("L_w")?;
            let (n, t) = (p.count("n", theorem)?, p.count("T", theorem)?);
            let schedule = match (p.get("eta"), p.get("c")) {
                (Some(eta), _) => Schedule::Constant(eta),
                (None, Some(cc)) => Schedule::InverseT(cc),
                (None, None) => return Err(CliError::invalid("eta", "thm3 needs eta or c")),
            };
            schedule.validate().map_err(bound_error)?;
            out.push(row("thm3_ppm", bounds::thm3_bound(schedule, &c, n, t).map_err(bound_error)?));
            out.push(row("thm3_ppmax", bounds::thm3_ppmax_bound(schedule, &c, n, t).map_err(bound_error)?));
        }
        "thm4" => {
            let (d, eta, t) = (need("D")?, need("eta")?, p.count("T", theorem)?);
            out.push(row("thm4_ppm", bounds::thm4_bound(d, eta, t).map_err(bound_error)?));
        }
        "cor1" => {
            need("L")?;
            need("L_w")?;
            let (n, d, eta) = (p.count("n", theorem)?, need("D")?, need("eta")?);
            let ppm = bounds::cor1_schedule(n, d, eta, &c).map_err(bound_error)?;
            let ppmax = bounds::cor1_schedule_ppmax(n, d, eta, &c).map_err(bound_error)?;
            out.push(row("cor1_ppm_iterations", ppm.t_ppm));
            out.push(row("cor1_ppm_excess", ppm.excess_bound));
            out.push(row("cor1_ppmax_iterations", ppmax.t_ppm));
            out.push(row("cor1_ppmax_excess", ppmax.excess_bound));
        }
        "thm5" => {
            for k in ["L", "L_w", "ell", "mu"] {
                need(k)?;
            }
            let (cc, r) = (need("c")?, need("r")?);
            let (n, t) = (p.count("n", theorem)?, p.count("T", theorem)?);
            let b = bounds::thm5_bounds(cc, r, &c, n, t).map_err(bound_error)?;
            let kappa = c.smoothness / c.mu;
            out.push(b.sgda);
            out.push(b.sgdmax);
            out.push(row("thm5_sgda_exponent", bounds::thm5_sgda_exponent(cc, r, c.smoothness)));
            out.push(row("thm5_sgdmax_exponent", bounds::thm5_sgdmax_exponent(cc, kappa, c.smoothness)));
        }
        "thm6" => {
            for k in ["L", "L_w", "ell"] {
                need(k)?;
            }
            let cc = need("c")?;
            let (n, t) = (p.count("n", theorem)?, p.count("T", theorem)?);
            out.push(bounds::thm6_bound(cc, &c, n, t).map_err(bound_error)?);
            out.push(row("thm6_exponent", bounds::thm6_exponent(cc, c.smoothness)));
        }
        "lemma6" => {
            need("ell")?;
            need("mu")?;
            out.push(row("lemma6_smoothness", bounds::lemma6_smoothness(&c).map_err(bound_error)?));
        }
        "all" => {
            // Every theorem whose inputs are complete; the others are skipped.
            for th in &THEOREMS[..THEOREMS.len() - 1] {
                if let Ok(mut rs) = reports(th, p) {
                    out.append(&mut rs);
                }
            }
            if out.is_empty() {
                return Err(CliError::invalid("params", "no theorem has a complete parameter set"));
            }
        }
        _ => unreachable!("theorem names are checked above"),
    }
    Ok(out)
}

/// Fixed six decimals in the usual range, scientific notation outside it.
pub fn format_bound_value(v: f64) -> String {
    if v == 0.0 || (1e-4..1e6).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.6e}")
    }
}

/// CSV table `name,value,conditions_ok` for `theorem`, preceded by the
/// `# config_hash=` line of the normalized request.
pub fn cmd_bounds(theorem: &str, params: &str) -> CliResult<String> {
    let p = BoundParams::parse(params)?;
    let rows = reports(theorem, &p)?;
    let request = format!("{theorem}:{}", p.canonical());
    let mut out =
        format!("# config_hash={}\nname,value,conditions_ok\n", hex::encode(Sha256::digest(request.as_bytes())));
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.name, format_bound_value(r.value), r.conditions_ok()));
    }
    Ok(out)
}
