//! Gradient descent ascent (GDA), GDmax, the proximal point method (PPM) and
//! PPmax, in full-batch and stochastic modes.
//!
//! Every step returns the new `(w, θ)` pair and projects onto the objective's
//! feasible balls after the update when the radii are finite. Proximal steps
//! solve the unconstrained proximal saddle problem first and project the
//! result.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{project_optional, Dataset, Vector};
use crate::error::{check_dim, LabError, Result};
use crate::objectives::{Data, Objective, ObjectiveKind};

/// Damping of the fixed-point iteration used by the proximal solvers.
pub const PROX_DAMPING: f64 = 0.5;
/// Residual at which the proximal fixed-point iteration stops.
pub const PROX_TOLERANCE: f64 = 1e-10;
pub const PROX_MAX_ITERATIONS: usize = 10_000;

/// Stepsize at iteration `t` (1-indexed).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    InverseT(f64),
}

impl Schedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            Schedule::Constant(a) => a,
            Schedule::InverseT(c) => c / t.max(1) as f64,
        }
    }

    /// `Σ_{t=1..T}` of the stepsizes.
    pub fn sum(&self, iterations: usize) -> f64 {
        match *self {
            Schedule::Constant(a) => a * iterations as f64,
            Schedule::InverseT(c) => (1..=iterations).map(|t| c / t as f64).sum(),
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            Schedule::Constant(a) | Schedule::InverseT(a) => a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.parameter();
        if p > 0.0 && p.is_finite() {
            Ok(())
        } else {
            Err(LabError::InvalidParameter(format!("schedule parameter must be > 0, got {self}")))
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Schedule::Constant(a) => write!(f, "constant:{a}"),
            Schedule::InverseT(c) => write!(f, "inverse_t:{c}"),
        }
    }
}

impl FromStr for Schedule {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, value) =
            s.split_once(':').ok_or_else(|| LabError::Parse(format!("schedule {s:?} is not `<kind>:<value>`")))?;
        let value: f64 = value.trim().parse().map_err(|e| LabError::Parse(format!("schedule value {value:?}: {e}")))?;
        let sched = match tag.trim() {
            "constant" => Schedule::Constant(value),
            "inverse_t" => Schedule::InverseT(value),
            other => return Err(LabError::Parse(format!("unknown schedule kind {other:?}"))),
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// Algorithm family together with the parameters that family uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Gda { step_w: Schedule, step_theta: Schedule },
    GdMax { step_w: Schedule },
    Ppm { eta: Schedule },
    PpMax { eta: Schedule },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gda { .. } => "gda",
            Family::GdMax { .. } => "gdmax",
            Family::Ppm { .. } => "ppm",
            Family::PpMax { .. } => "ppmax",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    FullBatch,
    Stochastic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgorithmSpec {
    pub family: Family,
    pub mode: Mode,
}

impl AlgorithmSpec {
    pub fn gda(mode: Mode, step_w: Schedule, step_theta: Schedule) -> Self {
        Self { family: Family::Gda { step_w, step_theta }, mode }
    }

    pub fn gdmax(mode: Mode, step_w: Schedule) -> Self {
        Self { family: Family::GdMax { step_w }, mode }
    }

    pub fn ppm(mode: Mode, eta: Schedule) -> Self {
        Self { family: Family::Ppm { eta }, mode }
    }

    pub fn ppmax(mode: Mode, eta: Schedule) -> Self {
        Self { family: Family::PpMax { eta }, mode }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::Gda { step_w, step_theta } => {
                step_w.validate()?;
                step_theta.validate()
            }
            Family::GdMax { step_w } => step_w.validate(),
            Family::Ppm { eta } | Family::PpMax { eta } => eta.validate(),
        }
    }

    /// Applies one update at iteration `t` (1-indexed).
    pub fn step(
        &self,
        obj: &Objective,
        w: &Vector,
        theta: &Vector,
        data: Data<'_>,
        t: usize,
    ) -> Result<(Vector, Vector)> {
        match self.family {
            Family::Gda { step_w, step_theta } => gda_step(obj, w, theta, data, step_w.at(t), step_theta.at(t)),
            Family::GdMax { step_w } => gdmax_step(obj, w, data, step_w.at(t)),
            Family::Ppm { eta } => ppm_step(obj, w, theta, data, eta.at(t)),
            Family::PpMax { eta } => ppmax_step(obj, w, data, eta.at(t)),
        }
    }
}

fn check_pair(obj: &Objective, w: &Vector, theta: &Vector, data: Data<'_>) -> Result<()> {
    check_dim(obj.dim, w.dim())?;
    check_dim(obj.dim, theta.dim())?;
    check_dim(obj.dim, data.point().dim())
}

fn check_step(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("{name} must be >= 0, got {value}")))
    }
}

/// Simultaneous descent on `w` and ascent on `θ`.
pub fn gda_step(
    obj: &Objective,
    w: &Vector,
    theta: &Vector,
    data: Data<'_>,
    alpha_w: f64,
    alpha_theta: f64,
) -> Result<(Vector, Vector)> {
    check_pair(obj, w, theta, data)?;
    check_step("alpha_w", alpha_w)?;
    check_step("alpha_theta", alpha_theta)?;
    let z = data.point();
    let gw = obj.grad_w_unchecked(w, theta, z);
    let gt = obj.grad_theta_unchecked(w, theta, z);
    Ok((
        project_optional(w.add_scaled(-alpha_w, &gw), obj.w_radius),
        project_optional(theta.add_scaled(alpha_theta, &gt), obj.theta_radius),
    ))
}

/// Descent on `w` using the gradient at the exact inner maximizer. Returns the
/// new `w` and the maximizer at the incoming `w`.
pub fn gdmax_step(obj: &Objective, w: &Vector, data: Data<'_>, alpha_w: f64) -> Result<(Vector, Vector)> {
    check_dim(obj.dim, w.dim())?;
    check_step("alpha_w", alpha_w)?;
    let (g, inner) = obj.max_grad_w(w, data)?;
    Ok((project_optional(w.add_scaled(-alpha_w, &g), obj.w_radius), inner.theta))
}

/// Saddle point of `f(w̃, θ̃) + ‖w̃ − w‖²/(2η) − ‖θ̃ − θ‖²/(2η)`, projected.
pub fn ppm_step(obj: &Objective, w: &Vector, theta: &Vector, data: Data<'_>, eta: f64) -> Result<(Vector, Vector)> {
    let (w1, t1) = ppm_solve(obj, w, theta, data, eta)?;
    Ok((project_optional(w1, obj.w_radius), project_optional(t1, obj.theta_radius)))
}

/// Unprojected proximal saddle point.
///
/// The optimality system is `w̃ = w − η∇_w f(w̃, θ̃)`, `θ̃ = θ + η∇_θ f(w̃, θ̃)`.
/// For the linear-quadratic objectives it decouples into one 2×2 linear
/// system per coordinate, solved in closed form. The non-convex objective uses
/// damped fixed-point iteration, which contracts when `η·ℓ < 1`.
pub fn ppm_solve(obj: &Objective, w: &Vector, theta: &Vector, data: Data<'_>, eta: f64) -> Result<(Vector, Vector)> {
    check_pair(obj, w, theta, data)?;
    check_step("eta", eta)?;
    let z = data.point();
    match obj.kind {
        ObjectiveKind::Bilinear => Ok(linear_prox(w, theta, z, eta, 0.0)),
        ObjectiveKind::ScScQuadratic { mu } => Ok(linear_prox(w, theta, z, eta, mu)),
        ObjectiveKind::ToyNcSc { .. } => {
            let ell = obj.constants.smoothness;
            if eta * ell >= 1.0 {
                return Err(LabError::InvalidParameter(format!(
                    "proximal step on a non-convex objective needs eta < 1/ell (eta={eta}, ell={ell})"
                )));
            }
            damped_fixed_point(w, theta, |wc, tc| {
                (
                    w.add_scaled(-eta, &obj.grad_w_unchecked(wc, tc, z)),
                    theta.add_scaled(eta, &obj.grad_theta_unchecked(wc, tc, z)),
                )
            })
        }
    }
}

// (1+ημ)w̃ − ηθ̃ = w − ηz ;  ηw̃ + (1+ημ)θ̃ = θ
fn linear_prox(w: &Vector, theta: &Vector, z: &Vector, eta: f64, mu: f64) -> (Vector, Vector) {
    let a = 1.0 + eta * mu;
    let det = a * a + eta * eta;
    let rhs_w = w.add_scaled(-eta, z);
    let w_new = rhs_w.zip_map(theta, |r, t| (a * r + eta * t) / det);
    let t_new = rhs_w.zip_map(theta, |r, t| (a * t - eta * r) / det);
    (w_new, t_new)
}

fn damped_fixed_point(
    w0: &Vector,
    theta0: &Vector,
    map: impl Fn(&Vector, &Vector) -> (Vector, Vector),
) -> Result<(Vector, Vector)> {
    let (mut w, mut theta) = (w0.clone(), theta0.clone());
    let mut residual = f64::INFINITY;
    for _ in 0..PROX_MAX_ITERATIONS {
        let (mw, mt) = map(&w, &theta);
        residual = crate::data::joint_distance(&mw, &mt, &w, &theta);
        if residual <= PROX_TOLERANCE {
            return Ok((mw, mt));
        }
        if !residual.is_finite() {
            break;
        }
        w = w.zip_map(&mw, |a, b| (1.0 - PROX_DAMPING) * a + PROX_DAMPING * b);
        theta = theta.zip_map(&mt, |a, b| (1.0 - PROX_DAMPING) * a + PROX_DAMPING * b);
    }
    Err(LabError::InnerSolveFailed { residual, iterations: PROX_MAX_ITERATIONS })
}

/// Proximal step on `f_max(w) = max_θ f(w, θ)`: solves `w' = w − η∇f_max(w')`,
/// projects, and returns the inner maximizer at the new point.
pub fn ppmax_step(obj: &Objective, w: &Vector, data: Data<'_>, eta: f64) -> Result<(Vector, Vector)> {
    check_dim(obj.dim, w.dim())?;
    check_dim(obj.dim, data.point().dim())?;
    check_step("eta", eta)?;
    let w_new = if eta == 0.0 { w.clone() } else { ppmax_solve(obj, w, data, eta)? };
    let w_new = project_optional(w_new, obj.w_radius);
    let theta = obj.inner_max(&w_new, data)?.theta;
    Ok((w_new, theta))
}

fn ppmax_solve(obj: &Objective, w: &Vector, data: Data<'_>, eta: f64) -> Result<Vector> {
    let z = data.point();
    match obj.kind {
        ObjectiveKind::Bilinear => {
            // f_max(w) = wᵀz + ρ‖w‖: block soft-thresholding of w − ηz.
            let rho = obj.theta_radius.ok_or(LabError::NoClosedFormMaximizer("bilinear objective with unbounded θ"))?;
            let v = w.add_scaled(-eta, z);
            let n = v.norm();
            Ok(if n <= eta * rho { Vector::zeros(w.dim()) } else { v.scale(1.0 - eta * rho / n) })
        }
        ObjectiveKind::ScScQuadratic { mu } => {
            // Interior regime: f_max(w) = wᵀz + (μ/2 + 1/(2μ))‖w‖².
            let interior = w.add_scaled(-eta, z).scale(1.0 / (1.0 + eta * (mu + 1.0 / mu)));
            let inside = obj.theta_radius.is_none_or(|rho| interior.norm() / mu <= rho);
            if inside {
                Ok(interior)
            } else {
                fixed_point_on_fmax(obj, w, data, eta)
            }
        }
        ObjectiveKind::ToyNcSc { .. } => fixed_point_on_fmax(obj, w, data, eta),
    }
}

fn fixed_point_on_fmax(obj: &Objective, w0: &Vector, data: Data<'_>, eta: f64) -> Result<Vector> {
    let mut w = w0.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..PROX_MAX_ITERATIONS {
        let (g, _) = obj.max_grad_w(&w, data)?;
        let mapped = w0.add_scaled(-eta, &g);
        residual = mapped.distance(&w);
        if residual <= PROX_TOLERANCE {
            return Ok(mapped);
        }
        if !residual.is_finite() {
            break;
        }
        w = w.zip_map(&mapped, |a, b| (1.0 - PROX_DAMPING) * a + PROX_DAMPING * b);
    }
    Err(LabError::InnerSolveFailed { residual, iterations: PROX_MAX_ITERATIONS })
}

/// Uniform-with-replacement sample indices. Two streams built from the same
/// seed and dataset size produce the same sequence.
#[derive(Clone, Debug)]
pub struct IndexStream {
    rng: ChaCha8Rng,
    n: usize,
}

impl IndexStream {
    pub fn new(seed: u64, n: usize) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), n }
    }

    pub fn next_index(&mut self) -> usize {
        self.rng.random_range(0..self.n)
    }
}

/// Iteration count, sampling seed and recording stride of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub iterations: usize,
    pub seed: u64,
    pub stride: usize,
}

impl RunOptions {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self { iterations, seed, stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    /// Whether iteration `t` is recorded: every `stride`-th iterate plus the last.
    pub fn records(&self, t: usize) -> bool {
        t.is_multiple_of(self.stride) || t == self.iterations
    }
}

/// An in-progress optimizer run over a dataset.
#[derive(Clone, Debug)]
pub struct Runner<'a> {
    spec: AlgorithmSpec,
    obj: &'a Objective,
    data: &'a Dataset,
    w: Vector,
    theta: Vector,
    t: usize,
    stream: Option<IndexStream>,
}

impl<'a> Runner<'a> {
    pub fn new(
        spec: AlgorithmSpec,
        obj: &'a Objective,
        data: &'a Dataset,
        w0: &Vector,
        theta0: &Vector,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        check_dim(obj.dim, data.dim())?;
        check_dim(obj.dim, w0.dim())?;
        check_dim(obj.dim, theta0.dim())?;
        let stream = (spec.mode == Mode::Stochastic).then(|| IndexStream::new(seed, data.len()));
        Ok(Self { spec, obj, data, w: w0.clone(), theta: theta0.clone(), t: 0, stream })
    }

    /// Advances one iteration; returns the sampled index in stochastic mode.
    pub fn step(&mut self) -> Result<Option<usize>> {
        let t = self.t + 1;
        let index = self.stream.as_mut().map(IndexStream::next_index);
        let data = match index {
            Some(i) => Data::Sample(&self.data.samples()[i]),
            None => Data::Batch(self.data),
        };
        let (w, theta) = self
            .spec
            .step(self.obj, &self.w, &self.theta, data, t)
            .map_err(|e| LabError::StepFailed { iteration: t, source: Box::new(e) })?;
        self.w = w;
        self.theta = theta;
        self.t = t;
        Ok(index)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn w(&self) -> &Vector {
        &self.w
    }

    pub fn theta(&self) -> &Vector {
        &self.theta
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub t: usize,
    pub w: Vector,
    pub theta: Vector,
}

/// Recorded iterates of one run. `iterates[0]` is the initialization at `t = 0`;
/// `averages[k]` is the running average `(1/t)Σ_{s=1..t}` at `iterates[k + 1].t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub iterates: Vec<Iterate>,
    pub averages: Vec<Iterate>,
    pub sampled_indices: Vec<usize>,
    pub seed: u64,
    pub stride: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Iterate {
        self.iterates.last().expect("trajectory always holds the initialization")
    }

    /// Number of iterations run.
    pub fn len(&self) -> usize {
        self.last().t
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trajectory CSV: header `t,w_0..w_{d-1},theta_0..theta_{d-1}`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let dim = self.iterates[0].w.dim();
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((0..dim).map(|i| format!("w_{i}")));
        header.extend((0..dim).map(|i| format!("theta_{i}")));
        out.write_record(&header)?;
        for it in &self.iterates {
            let mut row = vec![it.t.to_string()];
            row.extend(it.w.iter().chain(it.theta.iter()).map(|v| crate::data::format_f64(*v)));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Runs `opts.iterations` steps from `(w0, θ0)`.
pub fn run(
    spec: AlgorithmSpec,
    obj: &Objective,
    data: &Dataset,
    w0: &Vector,
    theta0: &Vector,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let mut runner = Runner::new(spec, obj, data, w0, theta0, opts.seed)?;
    let mut iterates = vec![Iterate { t: 0, w: w0.clone(), theta: theta0.clone() }];
    let mut averages = Vec::new();
    let mut sampled_indices = Vec::new();
    let mut sum_w = Vector::zeros(obj.dim);
    let mut sum_t = Vector::zeros(obj.dim);
    for _ in 0..opts.iterations {
        if let Some(i) = runner.step()? {
            sampled_indices.push(i);
        }
        let t = runner.t();
        sum_w = sum_w.add_scaled(1.0, runner.w());
        sum_t = sum_t.add_scaled(1.0, runner.theta());
        if opts.records(t) {
            iterates.push(Iterate { t, w: runner.w().clone(), theta: runner.theta().clone() });
            averages.push(Iterate { t, w: sum_w.scale(1.0 / t as f64), theta: sum_t.scale(1.0 / t as f64) });
        }
    }
    Ok(Trajectory { iterates, averages, sampled_indices, seed: opts.seed, stride: opts.stride })
}

/// `(w̄_T, θ̄_T)`, the arithmetic mean of iterates `1..=T`.
pub fn average_iterates(traj: &Trajectory, t: usize) -> Result<(Vector, Vector)> {
    if t == 0 || t > traj.len() {
        return Err(LabError::InvalidParameter(format!("average over T={t} of a {}-step trajectory", traj.len())));
    }
    if traj.stride == 1 {
        let dim = traj.iterates[0].w.dim();
        let (mut sw, mut st) = (Vector::zeros(dim), Vector::zeros(dim));
        for it in &traj.iterates[1..=t] {
            sw = sw.add_scaled(1.0, &it.w);
            st = st.add_scaled(1.0, &it.theta);
        }
        return Ok((sw.scale(1.0 / t as f64), st.scale(1.0 / t as f64)));
    }
    traj.averages
        .iter()
        .find(|a| a.t == t)
        .map(|a| (a.w.clone(), a.theta.clone()))
        .ok_or_else(|| LabError::InvalidParameter(format!("iteration {t} was not recorded (stride {})", traj.stride)))
}
