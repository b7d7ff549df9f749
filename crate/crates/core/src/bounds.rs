//! Closed-form evaluators for expansivity coefficients, generalization bounds,
//! optimization bounds and derived constants.
//!
//! Bounds whose preconditions fail are still evaluated; the failed conditions
//! are listed in the returned [`BoundReport`].

use std::fmt;

use crate::error::{LabError, Result};
use crate::objectives::Constants;
use crate::optimizers::Schedule;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    /// Each precondition with whether it holds for the given inputs.
    pub conditions: Vec<(String, bool)>,
}

impl BoundReport {
    fn new(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), value, conditions: Vec::new() }
    }

    fn condition(mut self, label: impl Into<String>, holds: bool) -> Self {
        self.conditions.push((label.into(), holds));
        self
    }

    pub fn conditions_ok(&self) -> bool {
        self.conditions.iter().all(|(_, ok)| *ok)
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.name, self.value)?;
        for (label, ok) in &self.conditions {
            write!(f, " [{label}: {}]", if *ok { "ok" } else { "violated" })?;
        }
        Ok(())
    }
}

/// The algorithm families the generalization bounds distinguish.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Gda,
    GdMax,
    Ppm,
    PpMax,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gda => "gda",
            Algorithm::GdMax => "gdmax",
            Algorithm::Ppm => "ppm",
            Algorithm::PpMax => "ppmax",
        }
    }
}

/// Update map and convexity regime with its stepsize.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Lemma1Regime {
    NonconvexGda { alpha_w: f64, alpha_theta: f64 },
    NonconvexPpm { eta: f64 },
    ConvexConcaveGda { alpha: f64 },
    ConvexConcavePpm { eta: f64 },
    ScScGda { alpha: f64 },
    ScScPpm { eta: f64 },
}

impl Lemma1Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Lemma1Regime::NonconvexGda { .. } => "nonconvex_gda",
            Lemma1Regime::NonconvexPpm { .. } => "nonconvex_ppm",
            Lemma1Regime::ConvexConcaveGda { .. } => "cc_gda",
            Lemma1Regime::ConvexConcavePpm { .. } => "cc_ppm",
            Lemma1Regime::ScScGda { .. } => "scsc_gda",
            Lemma1Regime::ScScPpm { .. } => "scsc_ppm",
        }
    }
}

/// Expansivity coefficient of the update map in the given regime.
pub fn lemma1_coefficient(regime: Lemma1Regime, c: &Constants) -> BoundReport {
    let (ell, mu) = (c.smoothness, c.mu);
    let name = format!("lemma1_{}", regime.name());
    match regime {
        Lemma1Regime::NonconvexGda { alpha_w, alpha_theta } => {
            BoundReport::new(name, 1.0 + ell * alpha_w.max(alpha_theta))
                .condition("alpha > 0", alpha_w > 0.0 && alpha_theta > 0.0)
        }
        Lemma1Regime::NonconvexPpm { eta } => BoundReport::new(name, 1.0 / (1.0 - ell * eta))
            .condition("eta > 0", eta > 0.0)
            .condition("eta < 1/ell", eta * ell < 1.0),
        Lemma1Regime::ConvexConcaveGda { alpha } => {
            BoundReport::new(name, (1.0 + ell * ell * alpha * alpha).sqrt()).condition("alpha > 0", alpha > 0.0)
        }
        Lemma1Regime::ConvexConcavePpm { eta } => BoundReport::new(name, 1.0).condition("eta > 0", eta > 0.0),
        Lemma1Regime::ScScGda { alpha } => BoundReport::new(name, 1.0 - alpha * mu + alpha * alpha * ell * ell / 2.0)
            .condition("mu > 0", mu > 0.0)
            .condition("alpha > 0", alpha > 0.0)
            .condition("alpha <= 2mu/ell^2", alpha <= 2.0 * mu / (ell * ell)),
        Lemma1Regime::ScScPpm { eta } => {
            BoundReport::new(name, 1.0 / (1.0 + mu * eta)).condition("mu > 0", mu > 0.0).condition("eta > 0", eta > 0.0)
        }
    }
}

fn require_mu(c: &Constants, what: &str) -> Result<f64> {
    if c.mu > 0.0 {
        Ok(c.mu)
    } else {
        Err(LabError::UndefinedBound(format!("{what} needs mu > 0")))
    }
}

fn require_n(n: usize) -> Result<f64> {
    if n == 0 {
        Err(LabError::InvalidParameter("n must be >= 1".into()))
    } else {
        Ok(n as f64)
    }
}

/// Generalization bound in the strongly-convex strongly-concave case.
/// `step` is `α_w` for GDA/GDmax and `η` for PPM/PPmax.
pub fn thm2_bound(alg: Algorithm, c: &Constants, n: usize, step: f64) -> Result<BoundReport> {
    let mu = require_mu(c, "thm2")?;
    let n = require_n(n)?;
    let (l, lw, ell) = (c.lipschitz, c.lipschitz_w, c.smoothness);
    let name = format!("thm2_{}", alg.name());
    Ok(match alg {
        Algorithm::Gda => BoundReport::new(name, 2.0 * l * lw / ((mu - step * ell * ell / 2.0) * n))
            .condition("alpha_w <= mu/ell^2", step <= mu / (ell * ell)),
        Algorithm::GdMax => {
            BoundReport::new(name, 2.0 * lw * lw / (mu * n)).condition("alpha_w <= mu/ell^2", step <= mu / (ell * ell))
        }
        Algorithm::Ppm => BoundReport::new(name, 2.0 * l * lw / (mu * n)).condition("eta > 0", step > 0.0),
        Algorithm::PpMax => BoundReport::new(name, 2.0 * lw * lw / (mu * n)).condition("eta > 0", step > 0.0),
    })
}

/// Limit `2L/((μ − α_wℓ²/2)n)` of the expected-divergence recursion behind the
/// GDA case of [`thm2_bound`]; the bound itself is `L_w` times this.
pub fn thm2_gda_delta_limit(c: &Constants, n: usize, alpha_w: f64) -> Result<f64> {
    let mu = require_mu(c, "thm2")?;
    Ok(2.0 * c.lipschitz / ((mu - alpha_w * c.smoothness * c.smoothness / 2.0) * require_n(n)?))
}

/// Geometric-series bound for full-batch GDA on a convex-concave objective:
/// `(2αL/n)·((1+α²ℓ²)^{(T+1)/2} − 1)/(√(1+α²ℓ²) − 1)·L_w`.
pub fn remark1_bound(alpha: f64, c: &Constants, n: usize, iterations: usize) -> Result<BoundReport> {
    let n = require_n(n)?;
    let q = (1.0 + alpha * alpha * c.smoothness * c.smoothness).sqrt();
    let value = 2.0 * alpha * c.lipschitz / n * (q.powf(iterations as f64 + 1.0) - 1.0) / (q - 1.0) * c.lipschitz_w;
    Ok(BoundReport::new("remark1_proof_exact", value).condition("alpha > 0", alpha > 0.0))
}

/// `(α/n)(1+α²)^{T/2}‖Δz‖`, the eigenvalue-growth form of the bilinear
/// divergence. Zero at `T = 0`.
pub fn remark1_exact_bilinear_delta(alpha: f64, n: usize, iterations: usize, dz_norm: f64) -> f64 {
    if iterations == 0 {
        return 0.0;
    }
    alpha / n as f64 * (1.0 + alpha * alpha).powf(iterations as f64 / 2.0) * dz_norm
}

/// `(2LL_w/n)·Σ_{t=1..T} η_t`, for PPM.
pub fn thm3_bound(eta: Schedule, c: &Constants, n: usize, iterations: usize) -> Result<f64> {
    Ok(2.0 * c.lipschitz * c.lipschitz_w / require_n(n)? * eta.sum(iterations))
}

/// PPmax form of [`thm3_bound`], with `L_w²` in place of `LL_w`.
pub fn thm3_ppmax_bound(eta: Schedule, c: &Constants, n: usize, iterations: usize) -> Result<f64> {
    Ok(2.0 * c.lipschitz_w * c.lipschitz_w / require_n(n)? * eta.sum(iterations))
}

/// `D²/(2ηT)`, the optimization-gap bound of averaged PPM iterates.
pub fn thm4_bound(d: f64, eta: f64, iterations: usize) -> Result<f64> {
    if !(eta > 0.0) || iterations == 0 {
        return Err(LabError::InvalidParameter(format!("thm4 needs eta > 0 and T >= 1 (eta={eta}, T={iterations})")));
    }
    Ok(d * d / (2.0 * eta * iterations as f64))
}

/// Iteration count balancing the generalization and optimization terms, and
/// the resulting excess-risk bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cor1 {
    pub t_ppm: f64,
    pub excess_bound: f64,
}

fn cor1_with(n: usize, d: f64, eta: f64, product: f64) -> Result<Cor1> {
    let n = require_n(n)?;
    if !(d > 0.0 && eta > 0.0 && product > 0.0) {
        return Err(LabError::InvalidParameter("cor1 needs D, eta and Lipschitz constants > 0".into()));
    }
    Ok(Cor1 {
        t_ppm: (n * d * d / (2.0 * eta * eta * product)).sqrt(),
        excess_bound: (2.0 * d * d * product / n).sqrt(),
    })
}

/// `T_ppm = √(nD²/(2η²LL_w))`, bound `√(2D²LL_w/n)`.
pub fn cor1_schedule(n: usize, d: f64, eta: f64, c: &Constants) -> Result<Cor1> {
    cor1_with(n, d, eta, c.lipschitz * c.lipschitz_w)
}

/// PPmax form of [`cor1_schedule`], with `L_w²` in place of `LL_w`.
pub fn cor1_schedule_ppmax(n: usize, d: f64, eta: f64, c: &Constants) -> Result<Cor1> {
    cor1_with(n, d, eta, c.lipschitz_w * c.lipschitz_w)
}

/// Nonconvex strongly-concave bounds for stochastic GDA and GDmax with
/// `c/t` stepsizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Thm5 {
    pub sgda: BoundReport,
    pub sgdmax: BoundReport,
}

/// T-exponent `(r+1)cℓ/((r+1)cℓ+1)` of the SGDA bound.
pub fn thm5_sgda_exponent(c: f64, r: f64, ell: f64) -> f64 {
    let x = (r + 1.0) * c * ell;
    x / (x + 1.0)
}

/// T-exponent `(κ+2)ℓc/((κ+2)ℓc+2)` of the SGDmax bound.
pub fn thm5_sgdmax_exponent(c: f64, kappa: f64, ell: f64) -> f64 {
    let x = (kappa + 2.0) * ell * c;
    x / (x + 2.0)
}

pub fn thm5_bounds(c: f64, r: f64, k: &Constants, n: usize, iterations: usize) -> Result<Thm5> {
    let mu = require_mu(k, "thm5")?;
    let nf = require_n(n)?;
    if !(c > 0.0) {
        return Err(LabError::InvalidParameter(format!("thm5 needs c > 0, got {c}")));
    }
    let (l, lw, ell) = (k.lipschitz, k.lipschitz_w, k.smoothness);
    let kappa = ell / mu;
    let t = iterations as f64;

    let x = (r + 1.0) * c * ell;
    let sgda = (1.0 + 1.0 / x) / nf * (12.0 * (r + 1.0) * c * l * lw).powf(1.0 / (x + 1.0)) * t.powf(x / (x + 1.0));
    let y = (kappa + 2.0) * ell * c;
    let sgdmax = (1.0 + 2.0 / y) / nf * (2.0 * c * lw * lw).powf(2.0 / (y + 2.0)) * t.powf(y / (y + 2.0));

    let r_ok = (1.0..=kappa).contains(&r);
    Ok(Thm5 {
        sgda: BoundReport::new("thm5_sgda", sgda).condition("1 <= r <= kappa", r_ok),
        sgdmax: BoundReport::new("thm5_sgdmax", sgdmax),
    })
}

/// T-exponent `ℓc/(ℓc+1)` of the nonconvex-nonconcave SGDA bound.
pub fn thm6_exponent(c: f64, ell: f64) -> f64 {
    c * ell / (c * ell + 1.0)
}

/// `((1+1/(ℓc))/n)(2cLL_w)^{1/(ℓc+1)}T^{ℓc/(ℓc+1)}`.
pub fn thm6_bound(c: f64, k: &Constants, n: usize, iterations: usize) -> Result<BoundReport> {
    let nf = require_n(n)?;
    if !(c > 0.0) {
        return Err(LabError::InvalidParameter(format!("thm6 needs c > 0, got {c}")));
    }
    let x = k.smoothness * c;
    let value = (1.0 + 1.0 / x) / nf
        * (2.0 * c * k.lipschitz * k.lipschitz_w).powf(1.0 / (x + 1.0))
        * (iterations as f64).powf(x / (x + 1.0));
    Ok(BoundReport::new("thm6_sgda", value))
}

/// Smoothness `ℓ + ℓ²/(2μ)` of `f_max(w) = max_θ f(w, θ)`.
pub fn lemma6_smoothness(c: &Constants) -> Result<f64> {
    let mu = require_mu(c, "lemma6")?;
    Ok(c.smoothness + c.smoothness * c.smoothness / (2.0 * mu))
}

/// Matrix `B` with `[‖Δw'‖, ‖Δθ'‖] ≤ B·[‖Δw‖, ‖Δθ‖]` componentwise for GDA on
/// a nonconvex strongly-concave objective.
pub fn lemma4_matrix(alpha_w: f64, alpha_theta: f64, c: &Constants) -> [[f64; 2]; 2] {
    let (ell, mu) = (c.smoothness, c.mu);
    [[1.0 + alpha_w * ell, alpha_w * ell], [alpha_theta * ell, 1.0 - alpha_theta * mu / 2.0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(l: f64, lw: f64, ell: f64, mu: f64) -> Constants {
        Constants::new(l, lw, ell, mu).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn lemma1_examples() {
        let c = k(1.0, 1.0, 2.0, 0.0);
        let r = lemma1_coefficient(Lemma1Regime::NonconvexGda { alpha_w: 0.1, alpha_theta: 0.05 }, &c);
        assert!(close(r.value, 1.2, 1e-15));
        assert_eq!(lemma1_coefficient(Lemma1Regime::ConvexConcavePpm { eta: 7.0 }, &c).value, 1.0);
        let c = k(1.0, 1.0, 1.0, 1.0);
        let r = lemma1_coefficient(Lemma1Regime::ScScGda { alpha: 0.1 }, &c);
        assert!(close(r.value, 0.905, 1e-15) && r.conditions_ok());
        let r = lemma1_coefficient(Lemma1Regime::ScScGda { alpha: 3.0 }, &c);
        assert!(!r.conditions_ok());
        let r = lemma1_coefficient(Lemma1Regime::NonconvexPpm { eta: 2.0 }, &c);
        assert!(!r.conditions_ok() && r.value < 0.0);
        assert!(close(lemma1_coefficient(Lemma1Regime::ScScPpm { eta: 1.0 }, &c).value, 0.5, 1e-15));
        assert!(close(
            lemma1_coefficient(Lemma1Regime::ConvexConcaveGda { alpha: 0.3 }, &c).value,
            1.09f64.sqrt(),
            1e-15
        ));
    }

    #[test]
    fn thm2_examples() {
        let c = k(1.0, 1.0, 1.0, 0.1);
        let r = thm2_bound(Algorithm::Gda, &c, 1000, 0.05).unwrap();
        assert!(close(r.value, 2.0 / 75.0, 1e-12) && r.conditions_ok());
        assert!(close(thm2_bound(Algorithm::GdMax, &c, 1000, 0.05).unwrap().value, 0.02, 1e-12));
        assert!(!thm2_bound(Algorithm::Gda, &c, 1000, 0.2).unwrap().conditions_ok());
        for alg in [Algorithm::Gda, Algorithm::GdMax, Algorithm::Ppm, Algorithm::PpMax] {
            let a = thm2_bound(alg, &c, 500, 0.05).unwrap().value;
            let b = thm2_bound(alg, &c, 1000, 0.05).unwrap().value;
            assert!(close(a, 2.0 * b, 1e-15));
        }
        let ppm = thm2_bound(Algorithm::Ppm, &c, 1000, 0.05).unwrap().value;
        let gda = thm2_bound(Algorithm::Gda, &c, 1000, 1e-12).unwrap().value;
        assert!(close(gda, ppm, 1e-10));
        assert!(matches!(
            thm2_bound(Algorithm::Gda, &k(1.0, 1.0, 1.0, 0.0), 10, 0.1),
            Err(LabError::UndefinedBound(_))
        ));
        let lim = thm2_gda_delta_limit(&c, 1000, 0.05).unwrap();
        assert!(close(lim * c.lipschitz_w, 2.0 / 75.0, 1e-12));
    }

    #[test]
    fn remark1_examples() {
        assert!(close(remark1_exact_bilinear_delta(0.1, 10, 2, 1.0), 0.0101, 1e-12));
        assert!(close(remark1_exact_bilinear_delta(0.1, 10, 1, 1.0), 0.01 * 1.01f64.sqrt(), 1e-12));
        assert_eq!(remark1_exact_bilinear_delta(0.1, 10, 0, 1.0), 0.0);
        assert_eq!(remark1_exact_bilinear_delta(0.1, 10, 5, 0.0), 0.0);
        // Direct summation of the series (2αL/n)·L_w·Σ_{t=0..T} q^t.
        let c = k(2.0, 1.5, 1.0, 0.0);
        let (alpha, n, t) = (0.1, 10, 7);
        let q = (1.0f64 + alpha * alpha).sqrt();
        let direct: f64 = (0..=t).map(|s| q.powi(s)).sum::<f64>() * 2.0 * alpha * 2.0 / n as f64 * 1.5;
        assert!(close(remark1_bound(alpha, &c, n, t as usize).unwrap().value, direct, 1e-12));
    }

    #[test]
    fn thm3_thm4_examples() {
        let c = k(2.0, 1.0, 1.0, 0.0);
        assert!(close(thm3_bound(Schedule::Constant(0.02), &c, 1000, 1000).unwrap(), 0.08, 1e-12));
        assert_eq!(thm3_bound(Schedule::Constant(0.02), &c, 1000, 0).unwrap(), 0.0);
        let a = thm3_bound(Schedule::Constant(0.04), &c, 1000, 100).unwrap();
        let b = thm3_bound(Schedule::Constant(0.02), &c, 1000, 100).unwrap();
        assert!(close(a, 2.0 * b, 1e-15));
        assert!(close(thm3_ppmax_bound(Schedule::Constant(0.02), &c, 1000, 1000).unwrap(), 0.04, 1e-12));
        assert!(close(thm4_bound(1.0, 0.1, 100).unwrap(), 0.05, 1e-15));
        assert_eq!(thm4_bound(0.0, 0.1, 100).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for t in [1, 10, 100, 1000] {
            let v = thm4_bound(1.0, 0.1, t).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(thm4_bound(1.0, 0.1, 0).is_err());
    }

    #[test]
    fn cor1_examples() {
        let c = k(1.0, 1.0, 1.0, 0.1);
        let r = cor1_schedule(1000, 10.0, 0.02, &c).unwrap();
        assert!(close(r.t_ppm, 1.25e8f64.sqrt(), 1e-12));
        assert!((r.t_ppm - 11180.34).abs() < 0.01);
        assert!((r.excess_bound - 0.44721).abs() < 1e-5);
        let r4 = cor1_schedule(4000, 10.0, 0.02, &c).unwrap();
        assert!(close(r4.excess_bound, r.excess_bound / 2.0, 1e-12));
        // Balanced decomposition: at T_ppm the averaged-iterate generalization
        // term (half the thm3 bound) equals the thm4 term.
        let c = k(3.0, 2.0, 1.0, 0.1);
        let r = cor1_schedule(500, 4.0, 0.05, &c).unwrap();
        let gen = 2.0 * c.lipschitz * c.lipschitz_w * 0.05 * r.t_ppm / 500.0 / 2.0;
        let opt = 16.0 / (2.0 * 0.05 * r.t_ppm);
        assert!(close(gen, opt, 1e-12));
        assert!(close(gen, r.excess_bound / 2.0, 1e-12));
        assert!(cor1_schedule(500, 0.0, 0.05, &c).is_err());
        let p = cor1_schedule_ppmax(500, 4.0, 0.05, &c).unwrap();
        assert!(close(p.excess_bound, (2.0 * 16.0 * 4.0 / 500.0f64).sqrt(), 1e-12));
    }

    #[test]
    fn thm5_thm6_worked_values() {
        let c = k(1.0, 1.0, 1.0, 1.0);
        let t5 = thm5_bounds(1.0, 1.0, &c, 1000, 1000).unwrap();
        assert!((t5.sgda.value - 0.43267).abs() < 1e-4);
        assert!(close(t5.sgda.value, 0.0015 * 24f64.cbrt() * 100.0, 1e-12));
        let c2 = k(1.0, 1.0, 1.0, 0.5);
        let t5 = thm5_bounds(1.0, 1.0, &c2, 1000, 1000).unwrap();
        assert!((t5.sgdmax.value - 0.18899).abs() < 1e-4);
        assert!(close(t5.sgdmax.value, 0.0015 * 2f64.cbrt() * 100.0, 1e-12));
        assert!(t5.sgda.conditions_ok());
        assert!(!thm5_bounds(1.0, 3.0, &c2, 1000, 1000).unwrap().sgda.conditions_ok());
        let t6 = thm6_bound(1.0, &c, 1000, 1000).unwrap();
        assert!((t6.value - 0.089443).abs() < 1e-4);
        assert!(close(t6.value, 0.002 * 2f64.sqrt() * 1000f64.sqrt(), 1e-12));
    }

    #[test]
    fn exponent_properties() {
        for i in 1..=20 {
            let c = i as f64 * 0.25;
            assert!(thm6_exponent(c, 1.0) < 1.0);
            assert!(thm6_exponent(c + 0.25, 1.0) > thm6_exponent(c, 1.0));
        }
    }

    #[test]
    fn lemma6_examples() {
        assert!(close(lemma6_smoothness(&k(1.0, 1.0, 1.0, 0.5)).unwrap(), 2.0, 1e-15));
        assert!(close(lemma6_smoothness(&k(1.0, 1.0, 3.0, 3.0)).unwrap(), 4.5, 1e-15));
        assert!(lemma6_smoothness(&k(1.0, 1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn lemma4_matrix_entries() {
        let b = lemma4_matrix(0.1, 0.2, &k(1.0, 1.0, 2.0, 0.5));
        assert_eq!(b, [[1.2, 0.2], [0.4, 0.95]]);
    }
}
