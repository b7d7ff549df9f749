//! Independent references used to check the library: closed-form saddles,
//! exact divergence recursions, finite differences, Monte-Carlo constant
//! estimates and a dense linear-system route for the proximal step.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bounds::thm4_bound;
use crate::data::{joint_distance, project_ball, uniform_in_ball, Dataset, Vector};
use crate::error::{check_dim, LabError, Result};
use crate::objectives::{Constants, Data, Objective, ObjectiveKind};
use crate::optimizers::{average_iterates, run, AlgorithmSpec, Mode, RunOptions, Schedule};
use crate::stability::mean_and_se;

#[derive(Clone, Debug, PartialEq)]
pub struct SaddlePoint {
    pub w_star: Vector,
    pub theta_star: Vector,
    /// `R_S(w*, θ*)`.
    pub value: f64,
}

/// Saddle point of the empirical risk.
///
/// ScScQuadratic: the first-order conditions `z̄ − θ + μw = 0`, `−w − μθ = 0`
/// give `w* = −μz̄/(1+μ²)`, `θ* = z̄/(1+μ²)` (the unconstrained saddle).
/// Bilinear: `w* = 0`, `θ* = z̄` when `z̄` lies in the θ-ball. Otherwise the
/// saddle sits on both spheres: `w* = −ρ_w ẑ`, `θ* = ρ_θ ẑ` with `ẑ = z̄/‖z̄‖`.
pub fn quadratic_saddle(obj: &Objective, s: &Dataset) -> Result<SaddlePoint> {
    check_dim(obj.dim, s.dim())?;
    let zbar = s.mean();
    let (w_star, theta_star) = match obj.kind {
        ObjectiveKind::ScScQuadratic { mu } => {
            let d = 1.0 + mu * mu;
            (zbar.scale(-mu / d), zbar.scale(1.0 / d))
        }
        ObjectiveKind::Bilinear => {
            let norm = zbar.norm();
            match (obj.theta_radius, obj.w_radius) {
                (Some(rho_t), Some(rho_w)) if norm > rho_t => {
                    // w ↦ wᵀẑ(‖z̄‖ − ρ_θ) is minimized on the w-sphere.
                    let dir = zbar.scale(1.0 / norm);
                    (dir.scale(-rho_w), dir.scale(rho_t))
                }
                (Some(rho_t), None) if norm > rho_t => {
                    return Err(LabError::InvalidParameter(
                        "bilinear game has no saddle: mean outside the θ-ball with unbounded w".into(),
                    ))
                }
                _ => (Vector::zeros(obj.dim), zbar.clone()),
            }
        }
        ObjectiveKind::ToyNcSc { .. } => {
            return Err(LabError::InvalidParameter(
                "quadratic_saddle covers the bilinear and quadratic objectives".into(),
            ))
        }
    };
    let value = obj.empirical_risk(&w_star, &theta_star, s)?;
    Ok(SaddlePoint { w_star, theta_star, value })
}

/// `(α/n)(1+α²)^{T/2}‖dz‖`: the growth-only form of the divergence of
/// unprojected full-batch GDA on the bilinear objective, counting a single
/// injection of the replaced sample.
pub fn bilinear_exact_delta(alpha: f64, n: usize, iterations: usize, dz: &Vector) -> f64 {
    if iterations == 0 {
        return 0.0;
    }
    alpha / n as f64 * (1.0 + alpha * alpha).powf(iterations as f64 / 2.0) * dz.norm()
}

/// Divergence of unprojected full-batch GDA on the bilinear objective when the
/// replaced sample enters every step.
///
/// Per coordinate, `c = Δw + iΔθ` obeys `c_{t+1} = (1 − iα)c_t − (α/n)Δz_j`,
/// so `c_T = −(α/n)Δz_j·(λ^T − 1)/(λ − 1)` with `λ = 1 − iα` and `|λ − 1| = α`.
/// Hence `δ_T = (‖Δz‖/n)·|λ^T − 1| = (‖Δz‖/n)·√(ρ^{2T} − 2ρ^T cos(Tφ) + 1)`,
/// `ρ = √(1+α²)`, `φ = atan α`.
pub fn bilinear_accumulated_delta(alpha: f64, n: usize, iterations: usize, dz: &Vector) -> f64 {
    let t = iterations as f64;
    let rho_t = (1.0 + alpha * alpha).powf(t / 2.0);
    let phi = alpha.atan();
    let modulus = (rho_t * rho_t - 2.0 * rho_t * (t * phi).cos() + 1.0).max(0.0).sqrt();
    dz.norm() / n as f64 * modulus
}

/// Central differences of `f(·, θ; z)` and `f(w, ·; z)` with step `h`.
pub fn finite_difference_grad(
    obj: &Objective,
    w: &Vector,
    theta: &Vector,
    z: &Vector,
    h: f64,
) -> Result<(Vector, Vector)> {
    if !(h > 0.0) {
        return Err(LabError::InvalidParameter(format!("finite-difference step must be > 0, got {h}")));
    }
    obj.value(w, theta, z)?;
    let partial = |x: &Vector, eval: &dyn Fn(&Vector) -> f64| -> Vector {
        let mut out = Vec::with_capacity(x.dim());
        for i in 0..x.dim() {
            let mut plus = x.clone().into_inner();
            let mut minus = plus.clone();
            plus[i] += h;
            minus[i] -= h;
            let fp = eval(&Vector::new(plus).expect("finite perturbation"));
            let fm = eval(&Vector::new(minus).expect("finite perturbation"));
            out.push((fp - fm) / (2.0 * h));
        }
        Vector::new(out).expect("finite differences of finite values")
    };
    let gw = partial(w, &|wp| obj.value(wp, theta, z).expect("dimensions checked"));
    let gt = partial(theta, &|tp| obj.value(w, tp, z).expect("dimensions checked"));
    Ok((gw, gt))
}

/// Monte-Carlo lower estimates of `L`, `L_w` and `ℓ` over the balls of radii
/// `rho_w`, `rho_theta`, with the data drawn from `z_sampler`.
///
/// Every sample contributes one point (gradient norms) and one pair
/// (gradient-difference ratio). Even-numbered pairs are global, odd-numbered
/// pairs are local perturbations of size `1e-3·ρ`. All quantities are running
/// maxima over a draw sequence fixed by `seed`, so the output is monotone in
/// `num_samples`.
pub fn estimate_constants(
    obj: &Objective,
    rho_w: f64,
    rho_theta: f64,
    mut z_sampler: impl FnMut(&mut ChaCha8Rng) -> Vector,
    num_samples: usize,
    seed: u64,
) -> Result<Constants> {
    if !(rho_w > 0.0 && rho_theta > 0.0 && rho_w.is_finite() && rho_theta.is_finite()) {
        return Err(LabError::InvalidParameter("estimate_constants needs finite positive radii".into()));
    }
    let d = obj.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut l, mut lw, mut ell) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..num_samples {
        let z = z_sampler(&mut rng);
        check_dim(d, z.dim())?;
        let w = uniform_in_ball(&mut rng, d, rho_w);
        let t = uniform_in_ball(&mut rng, d, rho_theta);
        let gw = obj.grad_w(&w, &t, &z)?;
        let gt = obj.grad_theta(&w, &t, &z)?;
        lw = lw.max(gw.norm());
        l = l.max((gw.norm_squared() + gt.norm_squared()).sqrt());

        let (w2, t2) = if k % 2 == 0 {
            (uniform_in_ball(&mut rng, d, rho_w), uniform_in_ball(&mut rng, d, rho_theta))
        } else {
            (
                project_ball(&w.add_scaled(1.0, &uniform_in_ball(&mut rng, d, 1e-3 * rho_w)), rho_w),
                project_ball(&t.add_scaled(1.0, &uniform_in_ball(&mut rng, d, 1e-3 * rho_theta)), rho_theta),
            )
        };
        let sep = joint_distance(&w, &t, &w2, &t2);
        if sep > 0.0 {
            let gw2 = obj.grad_w(&w2, &t2, &z)?;
            let gt2 = obj.grad_theta(&w2, &t2, &z)?;
            ell = ell.max(joint_distance(&gw, &gt, &gw2, &gt2) / sep);
        }
    }
    Ok(Constants { lipschitz: l, lipschitz_w: lw, smoothness: ell, mu: obj.kind.mu() })
}

/// Largest observed `‖∇f_max(w) − ∇f_max(w')‖/‖w − w'‖` over pairs in the
/// w-ball, each pair evaluated at one data point from `z_sampler`. Pairs
/// alternate between global and local (size `1e-3·ρ_w`) as in
/// [`estimate_constants`].
pub fn fmax_smoothness_estimate(
    obj: &Objective,
    rho_w: f64,
    mut z_sampler: impl FnMut(&mut ChaCha8Rng) -> Vector,
    num_pairs: usize,
    seed: u64,
) -> Result<f64> {
    let d = obj.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for k in 0..num_pairs {
        let z = z_sampler(&mut rng);
        let w = uniform_in_ball(&mut rng, d, rho_w);
        let w2 = if k % 2 == 0 {
            uniform_in_ball(&mut rng, d, rho_w)
        } else {
            project_ball(&w.add_scaled(1.0, &uniform_in_ball(&mut rng, d, 1e-3 * rho_w)), rho_w)
        };
        let sep = w.distance(&w2);
        if sep == 0.0 {
            continue;
        }
        let (g1, _) = obj.max_grad_w(&w, Data::Sample(&z))?;
        let (g2, _) = obj.max_grad_w(&w2, Data::Sample(&z))?;
        best = best.max(g1.distance(&g2) / sep);
    }
    Ok(best)
}

/// Proximal saddle step for the bilinear and quadratic objectives through a
/// dense `2d × 2d` LU solve of
/// `[(1+ημ)I, −ηI; ηI, (1+ημ)I]·[w̃; θ̃] = [w − ηz; θ]`. Unprojected.
pub fn ppm_linear_system_solve(
    obj: &Objective,
    w: &Vector,
    theta: &Vector,
    z: &Vector,
    eta: f64,
) -> Result<(Vector, Vector)> {
    let mu = match obj.kind {
        ObjectiveKind::Bilinear => 0.0,
        ObjectiveKind::ScScQuadratic { mu } => mu,
        ObjectiveKind::ToyNcSc { .. } => {
            return Err(LabError::InvalidParameter("the proximal step of the toy objective is not linear".into()))
        }
    };
    let d = obj.dim;
    check_dim(d, w.dim())?;
    check_dim(d, theta.dim())?;
    check_dim(d, z.dim())?;
    let a = 1.0 + eta * mu;
    let mut m = DMatrix::<f64>::zeros(2 * d, 2 * d);
    let mut rhs = DVector::<f64>::zeros(2 * d);
    for i in 0..d {
        m[(i, i)] = a;
        m[(i, d + i)] = -eta;
        m[(d + i, i)] = eta;
        m[(d + i, d + i)] = a;
        rhs[i] = w[i] - eta * z[i];
        rhs[d + i] = theta[i];
    }
    let sol = m.lu().solve(&rhs).ok_or_else(|| LabError::InvalidParameter("singular proximal system".into()))?;
    let w_new = Vector::new(sol.rows(0, d).iter().copied().collect())?;
    let t_new = Vector::new(sol.rows(d, d).iter().copied().collect())?;
    Ok((w_new, t_new))
}

/// `‖w' − w + η∇_w f(w', θ')‖ + ‖θ' − θ − η∇_θ f(w', θ')‖`.
pub fn ppm_residual(
    obj: &Objective,
    w: &Vector,
    theta: &Vector,
    z: &Vector,
    eta: f64,
    w_new: &Vector,
    theta_new: &Vector,
) -> Result<f64> {
    let gw = obj.grad_w(w_new, theta_new, z)?;
    let gt = obj.grad_theta(w_new, theta_new, z)?;
    Ok((&(w_new - w) + &gw.scale(eta)).norm() + (&(theta_new - theta) - &gt.scale(eta)).norm())
}

/// Projected gradient ascent on `θ ↦ f(w, θ; z)` from `θ = 0`, stopping when an
/// iteration moves less than `1e-12` or after `max_iterations`.
pub fn numerical_inner_max(obj: &Objective, w: &Vector, z: &Vector, max_iterations: usize) -> Result<Vector> {
    let mu = obj.kind.mu();
    let step = if mu > 0.0 { 1.0 / mu } else { 1.0 };
    let mut theta = Vector::zeros(obj.dim);
    for _ in 0..max_iterations {
        let g = obj.grad_theta(w, &theta, z)?;
        let mut next = theta.add_scaled(step, &g);
        if let Some(rho) = obj.theta_radius {
            next = project_ball(&next, rho);
        }
        let moved = next.distance(&theta);
        theta = next;
        if moved <= 1e-12 {
            return Ok(theta);
        }
    }
    let residual = obj.grad_theta(w, &theta, z)?.norm();
    Err(LabError::InnerSolveFailed { residual, iterations: max_iterations })
}

/// Mean by compensated (Kahan) summation.
pub fn kahan_mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp, mut n) = (0.0f64, 0.0f64, 0usize);
    for x in xs {
        let y = x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        n += 1;
    }
    sum / n as f64
}

/// Measured optimization gap of averaged PPM iterates next to its bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceCheck {
    /// `R_S(w̄_T) − R_S(w*)`, averaged over seeds in stochastic mode.
    pub gap: f64,
    pub gap_se: f64,
    /// `D²/(2ηT)` with `D` the distance of the start to the oracle saddle.
    pub bound: f64,
    pub distance: f64,
}

/// Runs PPM with constant `η` for `T` steps on ScScQuadratic and compares the
/// worst-case empirical risk gap of the averaged iterate with `D²/(2ηT)`.
/// Full-batch mode uses only the first seed.
#[allow(clippy::too_many_arguments)]
pub fn sppm_convergence_check(
    obj: &Objective,
    s: &Dataset,
    eta: f64,
    iterations: usize,
    seeds: &[u64],
    mode: Mode,
    w0: &Vector,
    theta0: &Vector,
) -> Result<ConvergenceCheck> {
    if !matches!(obj.kind, ObjectiveKind::ScScQuadratic { .. }) {
        return Err(LabError::InvalidParameter("sppm_convergence_check needs the quadratic objective".into()));
    }
    if seeds.is_empty() {
        return Err(LabError::InvalidParameter("need at least one seed".into()));
    }
    let saddle = quadratic_saddle(obj, s)?;
    let distance = joint_distance(w0, theta0, &saddle.w_star, &saddle.theta_star);
    let bound = thm4_bound(distance, eta, iterations)?;
    let r_star = obj.worst_case_empirical_risk(&saddle.w_star, s)?;
    let spec = AlgorithmSpec::ppm(mode, Schedule::Constant(eta));
    let seeds = if mode == Mode::FullBatch { &seeds[..1] } else { seeds };
    let mut gaps = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let opts = RunOptions::new(iterations, seed).with_stride(iterations.max(1));
        let traj = run(spec, obj, s, w0, theta0, &opts)?;
        let (wbar, _) = average_iterates(&traj, iterations)?;
        gaps.push(obj.worst_case_empirical_risk(&wbar, s)? - r_star);
    }
    let (gap, gap_se) = mean_and_se(&gaps);
    Ok(ConvergenceCheck { gap, gap_se, bound, distance })
}
