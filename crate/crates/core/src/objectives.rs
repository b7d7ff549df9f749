//! Minimax objectives `f(w, θ; z)`, their gradients, closed-form inner
//! maximizers and the risk functionals built on them.
//!
//! Every objective here is affine in the data point `z`. The average of
//! `f(w, θ; zᵢ)` over a dataset therefore equals `f(w, θ; z̄)` at the sample
//! mean, and the same holds for gradients and inner maximizers. Full-batch
//! computations use this identity.

use crate::data::{project_ball, Dataset, Vector};
use crate::error::{check_dim, LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObjectiveKind {
    /// `wᵀ(z − θ)`
    Bilinear,
    /// `wᵀ(z − θ) + (μ/2)(‖w‖² − ‖θ‖²)`
    ScScQuadratic { mu: f64 },
    /// `sin(w)ᵀθ + θᵀz − (μ/2)‖θ‖²`, sine taken elementwise.
    ToyNcSc { mu: f64 },
}

impl ObjectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::Bilinear => "bilinear",
            ObjectiveKind::ScScQuadratic { .. } => "scsc-quadratic",
            ObjectiveKind::ToyNcSc { .. } => "toy-ncsc",
        }
    }

    pub fn mu(&self) -> f64 {
        match *self {
            ObjectiveKind::Bilinear => 0.0,
            ObjectiveKind::ScScQuadratic { mu } | ObjectiveKind::ToyNcSc { mu } => mu,
        }
    }

    pub fn class(&self) -> ConvexityClass {
        match *self {
            ObjectiveKind::Bilinear => ConvexityClass::ConvexConcave,
            ObjectiveKind::ScScQuadratic { mu } => ConvexityClass::StronglyConvexStronglyConcave { mu },
            ObjectiveKind::ToyNcSc { mu } => ConvexityClass::NonconvexStronglyConcave { mu },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConvexityClass {
    ConvexConcave,
    StronglyConvexStronglyConcave { mu: f64 },
    NonconvexStronglyConcave { mu: f64 },
    NonconvexNonconcave,
}

/// Lipschitz, smoothness and strong-concavity parameters consumed by the
/// bounds. `lipschitz` is the joint constant `L`, `lipschitz_w` the constant in
/// `w` alone, `smoothness` is `ℓ` and `mu` the strong convexity/concavity
/// modulus (0 when absent).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    pub lipschitz: f64,
    pub lipschitz_w: f64,
    pub smoothness: f64,
    pub mu: f64,
}

impl Constants {
    pub fn new(lipschitz: f64, lipschitz_w: f64, smoothness: f64, mu: f64) -> Result<Self> {
        let c = Self { lipschitz, lipschitz_w, smoothness, mu };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::InvalidParameter(m));
        if self.lipschitz.is_nan() || self.lipschitz_w.is_nan() || self.lipschitz_w < 0.0 {
            return bad(format!("Lipschitz constants must be >= 0 (L={}, L_w={})", self.lipschitz, self.lipschitz_w));
        }
        if self.lipschitz_w > self.lipschitz {
            return bad(format!("L_w={} exceeds L={}", self.lipschitz_w, self.lipschitz));
        }
        if !(self.smoothness > 0.0) {
            return bad(format!("smoothness must be > 0, got {}", self.smoothness));
        }
        if !(self.mu >= 0.0) || (self.mu > 0.0 && self.mu > self.smoothness) {
            return bad(format!("need 0 <= mu <= ell, got mu={} ell={}", self.mu, self.smoothness));
        }
        Ok(())
    }

    /// `ℓ/μ`, defined only for `μ > 0`.
    pub fn kappa(&self) -> Option<f64> {
        (self.mu > 0.0).then(|| self.smoothness / self.mu)
    }
}

/// Maximizer of `θ ↦ f(w, θ; z)` over the feasible θ-set and the maximal value.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerMax {
    pub theta: Vector,
    pub value: f64,
}

/// A data argument: a single sample, or a dataset whose averaged objective is
/// meant.
#[derive(Clone, Copy, Debug)]
pub enum Data<'a> {
    Sample(&'a Vector),
    Batch(&'a Dataset),
}

impl<'a> Data<'a> {
    /// The point at which the (averaged) objective is evaluated.
    pub fn point(&self) -> &'a Vector {
        match *self {
            Data::Sample(z) => z,
            Data::Batch(s) => s.mean(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub dim: usize,
    /// `None` means the w-feasible set is all of ℝᵈ.
    pub w_radius: Option<f64>,
    pub theta_radius: Option<f64>,
    pub constants: Constants,
}

impl Objective {
    /// Unbounded feasible sets. The smoothness constant is set analytically
    /// where it is finite; Lipschitz constants start at infinity until
    /// [`Objective::with_constants`] or [`Objective::with_radii`] supplies them.
    pub fn new(kind: ObjectiveKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::InvalidParameter("objective dim must be >= 1".into()));
        }
        match kind {
            ObjectiveKind::ScScQuadratic { mu } | ObjectiveKind::ToyNcSc { mu } if !(mu > 0.0) => {
                return Err(LabError::InvalidParameter(format!("mu must be > 0, got {mu}")));
            }
            _ => {}
        }
        let mut obj = Self {
            kind,
            dim,
            w_radius: None,
            theta_radius: None,
            constants: Constants {
                lipschitz: f64::INFINITY,
                lipschitz_w: f64::INFINITY,
                smoothness: 1.0,
                mu: kind.mu(),
            },
        };
        obj.constants.smoothness = obj.analytic_smoothness();
        Ok(obj)
    }

    pub fn bilinear(dim: usize) -> Result<Self> {
        Self::new(ObjectiveKind::Bilinear, dim)
    }

    pub fn scsc_quadratic(dim: usize, mu: f64) -> Result<Self> {
        Self::new(ObjectiveKind::ScScQuadratic { mu }, dim)
    }

    pub fn toy_ncsc(dim: usize, mu: f64) -> Result<Self> {
        Self::new(ObjectiveKind::ToyNcSc { mu }, dim)
    }

    /// Sets the feasible radii and refreshes the analytic smoothness constant.
    pub fn with_radii(mut self, w_radius: Option<f64>, theta_radius: Option<f64>) -> Result<Self> {
        for r in [w_radius, theta_radius].into_iter().flatten() {
            if !(r > 0.0) {
                return Err(LabError::InvalidParameter(format!("feasible radius must be > 0, got {r}")));
            }
        }
        self.w_radius = w_radius;
        self.theta_radius = theta_radius;
        self.constants.smoothness = self.analytic_smoothness();
        Ok(self)
    }

    pub fn with_constants(mut self, constants: Constants) -> Result<Self> {
        constants.validate()?;
        self.constants = constants;
        Ok(self)
    }

    pub fn class(&self) -> ConvexityClass {
        self.kind.class()
    }

    /// Smoothness `ℓ` of the gradient field over the feasible set: the largest
    /// spectral norm of the field's Jacobian. Infinite for the non-convex
    /// objective when θ is unbounded.
    pub fn analytic_smoothness(&self) -> f64 {
        match self.kind {
            ObjectiveKind::Bilinear => 1.0,
            ObjectiveKind::ScScQuadratic { mu } => (1.0 + mu * mu).sqrt(),
            ObjectiveKind::ToyNcSc { mu } => match self.theta_radius {
                // Per-coordinate Jacobian [[-sin(w)θ, cos w], [cos w, -μ]];
                // its norm is convex in the entries, so the sup sits at a
                // vertex of |sin(w)θ| <= ρ, |cos w| <= 1.
                Some(rho) => [rho, -rho]
                    .into_iter()
                    .map(|a| {
                        let mid = (a - mu) / 2.0;
                        let rad = (((a + mu) / 2.0).powi(2) + 1.0).sqrt();
                        (mid + rad).abs().max((mid - rad).abs())
                    })
                    .fold(0.0, f64::max)
                    .max(mu),
                None => f64::INFINITY,
            },
        }
    }

    /// Upper bounds on `L`, `L_w` and `ℓ` over the feasible balls when every
    /// data point satisfies `‖z‖ <= data_radius`.
    pub fn region_constants(&self, data_radius: f64) -> Result<Constants> {
        let (rw, rt) = match (self.w_radius, self.theta_radius) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(LabError::InvalidParameter("region constants need finite feasible radii".into())),
        };
        let (gw, gt) = match self.kind {
            ObjectiveKind::Bilinear => (data_radius + rt, rw),
            ObjectiveKind::ScScQuadratic { mu } => (data_radius + rt + mu * rw, rw + mu * rt),
            ObjectiveKind::ToyNcSc { mu } => (rt, rw.min((self.dim as f64).sqrt()) + data_radius + mu * rt),
        };
        Constants::new((gw * gw + gt * gt).sqrt(), gw, self.analytic_smoothness(), self.kind.mu())
    }

    fn check(&self, w: &Vector, theta: &Vector, z: &Vector) -> Result<()> {
        check_dim(self.dim, w.dim())?;
        check_dim(self.dim, theta.dim())?;
        check_dim(self.dim, z.dim())
    }

    pub fn value(&self, w: &Vector, theta: &Vector, z: &Vector) -> Result<f64> {
        self.check(w, theta, z)?;
        Ok(self.value_unchecked(w, theta, z))
    }

    pub(crate) fn value_unchecked(&self, w: &Vector, theta: &Vector, z: &Vector) -> f64 {
        match self.kind {
            ObjectiveKind::Bilinear => w.dot(&(z - theta)),
            ObjectiveKind::ScScQuadratic { mu } => {
                w.dot(&(z - theta)) + 0.5 * mu * (w.norm_squared() - theta.norm_squared())
            }
            ObjectiveKind::ToyNcSc { mu } => {
                w.map(f64::sin).dot(theta) + theta.dot(z) - 0.5 * mu * theta.norm_squared()
            }
        }
    }

    pub fn grad_w(&self, w: &Vector, theta: &Vector, z: &Vector) -> Result<Vector> {
        self.check(w, theta, z)?;
        Ok(self.grad_w_unchecked(w, theta, z))
    }

    pub(crate) fn grad_w_unchecked(&self, w: &Vector, theta: &Vector, z: &Vector) -> Vector {
        match self.kind {
            ObjectiveKind::Bilinear => z - theta,
            ObjectiveKind::ScScQuadratic { mu } => (z - theta).add_scaled(mu, w),
            ObjectiveKind::ToyNcSc { .. } => w.zip_map(theta, |wi, ti| wi.cos() * ti),
        }
    }

    pub fn grad_theta(&self, w: &Vector, theta: &Vector, z: &Vector) -> Result<Vector> {
        self.check(w, theta, z)?;
        Ok(self.grad_theta_unchecked(w, theta, z))
    }

    pub(crate) fn grad_theta_unchecked(&self, w: &Vector, theta: &Vector, z: &Vector) -> Vector {
        match self.kind {
            ObjectiveKind::Bilinear => -w,
            ObjectiveKind::ScScQuadratic { mu } => (-w).add_scaled(-mu, theta),
            ObjectiveKind::ToyNcSc { mu } => w.map(f64::sin).add_scaled(1.0, z).add_scaled(-mu, theta),
        }
    }

    /// Maximizer over the feasible θ-set of the (averaged) objective at `w`.
    ///
    /// For the two quadratic-in-θ objectives the θ-dependence is
    /// `−(μ/2)‖θ − c‖² + const`, so the constrained maximizer is the projection
    /// of the unconstrained one `c` onto the ball. The bilinear objective is
    /// linear in θ and is maximized on the sphere at `−ρ·w/‖w‖`; with `w = 0`
    /// every feasible θ is optimal and the zero vector is returned.
    pub fn inner_max(&self, w: &Vector, data: Data<'_>) -> Result<InnerMax> {
        let z = data.point();
        check_dim(self.dim, w.dim())?;
        check_dim(self.dim, z.dim())?;
        let theta = match self.kind {
            ObjectiveKind::Bilinear => {
                let wn = w.norm();
                if wn == 0.0 {
                    Vector::zeros(self.dim)
                } else {
                    match self.theta_radius {
                        Some(rho) => w.scale(-rho / wn),
                        None => return Err(LabError::NoClosedFormMaximizer("bilinear objective with unbounded θ")),
                    }
                }
            }
            ObjectiveKind::ScScQuadratic { mu } => self.clip_theta(w.scale(-1.0 / mu)),
            ObjectiveKind::ToyNcSc { mu } => self.clip_theta(w.map(f64::sin).add_scaled(1.0, z).scale(1.0 / mu)),
        };
        let value = self.value_unchecked(w, &theta, z);
        Ok(InnerMax { theta, value })
    }

    fn clip_theta(&self, theta: Vector) -> Vector {
        match self.theta_radius {
            Some(rho) => project_ball(&theta, rho),
            None => theta,
        }
    }

    /// Gradient of `f_max(w) = max_θ f(w, θ)` by Danskin's theorem, together
    /// with the maximizer it was taken at.
    pub fn max_grad_w(&self, w: &Vector, data: Data<'_>) -> Result<(Vector, InnerMax)> {
        let inner = self.inner_max(w, data)?;
        let g = self.grad_w_unchecked(w, &inner.theta, data.point());
        Ok((g, inner))
    }

    /// `(1/n) Σ f(w, θ; zᵢ)`, summed sample by sample.
    pub fn empirical_risk(&self, w: &Vector, theta: &Vector, s: &Dataset) -> Result<f64> {
        if s.is_empty() {
            return Err(LabError::EmptyDataset);
        }
        self.check(w, theta, s.mean())?;
        let total: f64 = s.samples().iter().map(|z| self.value_unchecked(w, theta, z)).sum();
        Ok(total / s.len() as f64)
    }

    /// `max_θ R_S(w, θ)` via the closed-form maximizer of the averaged objective.
    pub fn worst_case_empirical_risk(&self, w: &Vector, s: &Dataset) -> Result<f64> {
        Ok(self.inner_max(w, Data::Batch(s))?.value)
    }

    /// Worst-case risk under a population whose mean is `population_mean`.
    pub fn worst_case_true_risk(&self, w: &Vector, population_mean: &Vector) -> Result<f64> {
        Ok(self.inner_max(w, Data::Sample(population_mean))?.value)
    }

    /// `ε_gen(w) = wᵀ(E[Z] − Ē_S[Z])`. Exact for the two objectives whose
    /// θ-maximization does not involve `z`; the θ-terms cancel between the
    /// true and empirical worst-case risks.
    pub fn generalization_risk(&self, w: &Vector, s: &Dataset, population_mean: &Vector) -> Result<f64> {
        match self.kind {
            ObjectiveKind::Bilinear | ObjectiveKind::ScScQuadratic { .. } => {
                check_dim(self.dim, w.dim())?;
                check_dim(self.dim, population_mean.dim())?;
                check_dim(self.dim, s.dim())?;
                Ok(w.dot(&(population_mean - s.mean())))
            }
            ObjectiveKind::ToyNcSc { .. } => Err(LabError::NoClosedFormGenRisk("toy non-convex objective")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_gaussian_dataset, uniform_in_ball};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn value_examples() {
        let bil = Objective::bilinear(1).unwrap();
        assert_eq!(bil.value(&v(&[1.0]), &v(&[0.0]), &v(&[3.0])).unwrap(), 3.0);
        let q = Objective::scsc_quadratic(1, 0.1).unwrap();
        assert_eq!(q.value(&v(&[0.0]), &v(&[0.0]), &v(&[5.0])).unwrap(), 0.0);
        let toy = Objective::toy_ncsc(1, 0.5).unwrap();
        assert!((toy.value(&v(&[0.0]), &v(&[2.0]), &v(&[1.0])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let bil = Objective::bilinear(2).unwrap();
        let err = bil.value(&v(&[1.0]), &v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap_err();
        assert!(matches!(err, LabError::DimensionMismatch { expected: 2, got: 1 }));
        assert!(bil.grad_theta(&v(&[1.0, 1.0]), &v(&[0.0]), &v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn gradient_examples() {
        let bil = Objective::bilinear(1).unwrap();
        let (w, t, z) = (v(&[1.0]), v(&[2.0]), v(&[3.0]));
        assert_eq!(bil.grad_w(&w, &t, &z).unwrap(), v(&[1.0]));
        assert_eq!(bil.grad_theta(&w, &t, &z).unwrap(), v(&[-1.0]));
        let q = Objective::scsc_quadratic(1, 0.1).unwrap();
        let zero = v(&[0.0]);
        assert_eq!(q.grad_w(&zero, &zero, &v(&[1.0])).unwrap(), v(&[1.0]));
        assert_eq!(q.grad_theta(&zero, &zero, &v(&[1.0])).unwrap()[0].abs(), 0.0);
    }

    #[test]
    fn inner_max_examples() {
        let toy = Objective::toy_ncsc(1, 0.5).unwrap();
        let m = toy.inner_max(&v(&[0.0]), Data::Sample(&v(&[1.0]))).unwrap();
        assert!((m.theta[0] - 2.0).abs() < 1e-15 && (m.value - 1.0).abs() < 1e-15);

        let bil = Objective::bilinear(1).unwrap().with_radii(None, Some(2.0)).unwrap();
        let m = bil.inner_max(&v(&[1.0]), Data::Sample(&v(&[3.0]))).unwrap();
        assert_eq!(m.theta, v(&[-2.0]));
        assert_eq!(m.value, 5.0);

        let q = Objective::scsc_quadratic(1, 0.1).unwrap().with_radii(Some(100.0), Some(100.0)).unwrap();
        let m = q.inner_max(&v(&[0.0]), Data::Sample(&v(&[4.2]))).unwrap();
        assert_eq!(m.theta[0].abs(), 0.0);
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn bilinear_zero_w_returns_zero_theta_even_unbounded() {
        let bil = Objective::bilinear(3).unwrap();
        let m = bil.inner_max(&Vector::zeros(3), Data::Sample(&v(&[1.0, 2.0, 3.0]))).unwrap();
        assert_eq!(m.theta, Vector::zeros(3));
        assert_eq!(m.value, 0.0);
        let err = bil.inner_max(&v(&[1.0, 0.0, 0.0]), Data::Sample(&v(&[1.0, 2.0, 3.0]))).unwrap_err();
        assert!(matches!(err, LabError::NoClosedFormMaximizer(_)));
    }

    #[test]
    fn scsc_inner_max_clips_to_boundary() {
        let q = Objective::scsc_quadratic(2, 0.1).unwrap().with_radii(None, Some(5.0)).unwrap();
        let w = v(&[3.0, 4.0]);
        let m = q.inner_max(&w, Data::Sample(&v(&[0.0, 0.0]))).unwrap();
        assert!((m.theta[0] + 3.0).abs() < 1e-12 && (m.theta[1] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn inner_max_dominates_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let objs = [
            Objective::bilinear(3).unwrap().with_radii(Some(2.0), Some(2.0)).unwrap(),
            Objective::scsc_quadratic(3, 0.5).unwrap().with_radii(Some(2.0), Some(2.0)).unwrap(),
            Objective::scsc_quadratic(3, 0.5).unwrap().with_radii(Some(2.0), Some(50.0)).unwrap(),
            Objective::toy_ncsc(3, 0.5).unwrap().with_radii(Some(2.0), Some(1.0)).unwrap(),
            Objective::toy_ncsc(3, 0.5).unwrap().with_radii(Some(2.0), Some(50.0)).unwrap(),
        ];
        for obj in &objs {
            let rt = obj.theta_radius.unwrap();
            for _ in 0..20 {
                let w = uniform_in_ball(&mut rng, 3, 2.0);
                let z = uniform_in_ball(&mut rng, 3, 1.5);
                let m = obj.inner_max(&w, Data::Sample(&z)).unwrap();
                assert!(m.theta.norm() <= rt * (1.0 + 1e-12));
                let g = obj.grad_theta(&w, &m.theta, &z).unwrap();
                if m.theta.norm() < rt * (1.0 - 1e-9) {
                    assert!(g.norm() < 1e-10, "{:?} interior gradient {}", obj.kind, g.norm());
                } else {
                    // At the boundary the ascent direction points outward, along θ*.
                    assert!(g.dot(&m.theta) >= -1e-10);
                    let tangential = g.add_scaled(-g.dot(&m.theta) / m.theta.norm_squared(), &m.theta);
                    assert!(tangential.norm() < 1e-9 * (1.0 + g.norm()));
                }
                for _ in 0..50 {
                    let t = uniform_in_ball(&mut rng, 3, rt);
                    assert!(obj.value(&w, &t, &z).unwrap() <= m.value + 1e-9);
                }
            }
        }
    }

    #[test]
    fn empirical_risk_examples() {
        let bil = Objective::bilinear(1).unwrap();
        let s = Dataset::new(vec![v(&[2.0]), v(&[4.0])]).unwrap();
        assert_eq!(bil.empirical_risk(&v(&[1.0]), &v(&[0.0]), &s).unwrap(), 3.0);
        let q = Objective::scsc_quadratic(1, 0.1).unwrap();
        let s1 = Dataset::new(vec![v(&[0.0])]).unwrap();
        assert!((q.empirical_risk(&v(&[1.0]), &v(&[1.0]), &s1).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(
            q.empirical_risk(&v(&[0.3]), &v(&[0.7]), &s1).unwrap(),
            q.value(&v(&[0.3]), &v(&[0.7]), &v(&[0.0])).unwrap()
        );
    }

    #[test]
    fn empirical_risk_matches_value_at_mean() {
        let ds = make_gaussian_dataset(4, 200, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for obj in [
            Objective::bilinear(4).unwrap(),
            Objective::scsc_quadratic(4, 0.3).unwrap(),
            Objective::toy_ncsc(4, 0.3).unwrap(),
        ] {
            let w = uniform_in_ball(&mut rng, 4, 3.0);
            let t = uniform_in_ball(&mut rng, 4, 3.0);
            let per_sample = obj.empirical_risk(&w, &t, &ds).unwrap();
            let at_mean = obj.value(&w, &t, ds.mean()).unwrap();
            assert!((per_sample - at_mean).abs() < 1e-12, "{:?}", obj.kind);
        }
    }

    #[test]
    fn worst_case_examples() {
        let bil = Objective::bilinear(1).unwrap().with_radii(None, Some(2.0)).unwrap();
        let s = Dataset::new(vec![v(&[2.0]), v(&[4.0])]).unwrap();
        assert_eq!(bil.worst_case_empirical_risk(&v(&[1.0]), &s).unwrap(), 5.0);
        assert_eq!(bil.worst_case_empirical_risk(&v(&[0.0]), &s).unwrap(), 0.0);
    }

    #[test]
    fn generalization_risk_examples() {
        let bil = Objective::bilinear(2).unwrap();
        let s = Dataset::new(vec![v(&[0.1, -0.2])]).unwrap();
        let g = bil.generalization_risk(&v(&[1.0, 1.0]), &s, &Vector::zeros(2)).unwrap();
        assert!((g - 0.1).abs() < 1e-15);
        assert_eq!(bil.generalization_risk(&Vector::zeros(2), &s, &Vector::zeros(2)).unwrap(), 0.0);
        assert_eq!(bil.generalization_risk(&v(&[3.0, -1.0]), &s, &v(&[0.1, -0.2])).unwrap(), 0.0);
        let toy = Objective::toy_ncsc(2, 0.5).unwrap();
        assert!(matches!(
            toy.generalization_risk(&v(&[1.0, 1.0]), &s, &Vector::zeros(2)),
            Err(LabError::NoClosedFormGenRisk(_))
        ));
    }

    #[test]
    fn generalization_risk_equals_worst_case_difference() {
        let ds = make_gaussian_dataset(5, 40, 2).unwrap();
        let pop = Vector::zeros(5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for obj in [
            Objective::bilinear(5).unwrap().with_radii(Some(10.0), Some(10.0)).unwrap(),
            Objective::scsc_quadratic(5, 0.1).unwrap().with_radii(Some(10.0), Some(10.0)).unwrap(),
            Objective::scsc_quadratic(5, 0.1).unwrap().with_radii(Some(10.0), Some(1000.0)).unwrap(),
        ] {
            for _ in 0..50 {
                let w = uniform_in_ball(&mut rng, 5, 10.0);
                let diff =
                    obj.worst_case_true_risk(&w, &pop).unwrap() - obj.worst_case_empirical_risk(&w, &ds).unwrap();
                let closed = obj.generalization_risk(&w, &ds, &pop).unwrap();
                assert!((diff - closed).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn toy_is_strongly_concave_in_theta() {
        let mu = 0.7;
        let obj = Objective::toy_ncsc(3, mu).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..500 {
            let w = uniform_in_ball(&mut rng, 3, 5.0);
            let z = uniform_in_ball(&mut rng, 3, 5.0);
            let t1 = uniform_in_ball(&mut rng, 3, 5.0);
            let t2 = uniform_in_ball(&mut rng, 3, 5.0);
            let lhs = obj.value(&w, &t2, &z).unwrap();
            let d = &t2 - &t1;
            let rhs = obj.value(&w, &t1, &z).unwrap() + obj.grad_theta(&w, &t1, &z).unwrap().dot(&d)
                - 0.5 * mu * d.norm_squared();
            assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn constants_validation() {
        assert!(Constants::new(1.0, 2.0, 1.0, 0.0).is_err());
        assert!(Constants::new(2.0, 1.0, 1.0, 2.0).is_err());
        assert!(Constants::new(2.0, 1.0, 0.0, 0.0).is_err());
        let c = Constants::new(2.0, 1.0, 1.0, 0.25).unwrap();
        assert_eq!(c.kappa(), Some(4.0));
        assert_eq!(Constants::new(2.0, 1.0, 1.0, 0.0).unwrap().kappa(), None);
    }

    #[test]
    fn analytic_smoothness_bounds_random_jacobian_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let obj = Objective::toy_ncsc(2, 0.4).unwrap().with_radii(Some(3.0), Some(2.0)).unwrap();
        let ell = obj.analytic_smoothness();
        for _ in 0..2000 {
            let z = uniform_in_ball(&mut rng, 2, 1.0);
            let (w1, t1) = (uniform_in_ball(&mut rng, 2, 3.0), uniform_in_ball(&mut rng, 2, 2.0));
            let scale = if rng.random::<bool>() { 1e-3 } else { 1.0 };
            let w2 = w1.add_scaled(scale, &uniform_in_ball(&mut rng, 2, 1.0));
            let t2 = project_ball(&t1.add_scaled(scale, &uniform_in_ball(&mut rng, 2, 1.0)), 2.0);
            let gw = &obj.grad_w(&w1, &t1, &z).unwrap() - &obj.grad_w(&w2, &t2, &z).unwrap();
            let gt = &obj.grad_theta(&w1, &t1, &z).unwrap() - &obj.grad_theta(&w2, &t2, &z).unwrap();
            let num = (gw.norm_squared() + gt.norm_squared()).sqrt();
            let den = crate::data::joint_distance(&w1, &t1, &w2, &t2);
            assert!(num <= ell * den * (1.0 + 1e-9) + 1e-15);
        }
    }
}
