//! Coupled runs on neighboring datasets, generalization-risk curves and
//! Monte-Carlo stability estimates.
//!
//! Stochastic coupled runs share one index stream: both runners are seeded
//! identically and the datasets have equal size, so at every iteration they
//! sample the same position.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{format_f64, gaussian_vector, joint_distance, Dataset, Vector};
use crate::error::{check_dim, LabError, Result};
use crate::objectives::Objective;
use crate::optimizers::{AlgorithmSpec, RunOptions, Runner};

/// Pairs closer than this are redrawn by [`estimate_expansivity`].
pub const MIN_SEPARATION: f64 = 1e-8;

/// Copy of `s` with sample `i` replaced by `z_new`.
pub fn make_neighbor_dataset(s: &Dataset, i: usize, z_new: Vector) -> Result<Dataset> {
    s.with_replaced(i, z_new)
}

/// Neighbor of `s` with a uniformly chosen index replaced by a fresh standard
/// normal draw. Returns the dataset and the replaced index.
pub fn random_neighbor<R: Rng + ?Sized>(s: &Dataset, rng: &mut R) -> Result<(Dataset, usize)> {
    let i = rng.random_range(0..s.len());
    let z = gaussian_vector(rng, s.dim());
    Ok((s.with_replaced(i, z)?, i))
}

fn replaced_index(s: &Dataset, s_neighbor: &Dataset) -> Result<Option<usize>> {
    match s.differing_indices(s_neighbor)?.as_slice() {
        [] => Ok(None),
        [i] => Ok(Some(*i)),
        _ => Err(LabError::NotNeighbors),
    }
}

/// Divergences between two coupled runs at the recorded iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityTrace {
    pub t: Vec<usize>,
    pub delta_w: Vec<f64>,
    pub delta_theta: Vec<f64>,
    pub delta: Vec<f64>,
    /// `None` when the two datasets coincide.
    pub replaced_index: Option<usize>,
    pub sampled_indices: Vec<usize>,
    pub seed: u64,
}

impl StabilityTrace {
    pub fn final_delta_w(&self) -> f64 {
        *self.delta_w.last().expect("trace holds t = 0")
    }

    pub fn final_delta(&self) -> f64 {
        *self.delta.last().expect("trace holds t = 0")
    }

    /// CSV with header `t,delta_w,delta_theta,delta`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["t", "delta_w", "delta_theta", "delta"])?;
        for k in 0..self.t.len() {
            out.write_record([
                self.t[k].to_string(),
                format_f64(self.delta_w[k]),
                format_f64(self.delta_theta[k]),
                format_f64(self.delta[k]),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Two runners advanced in lockstep on neighboring datasets.
#[derive(Clone, Debug)]
pub struct PairedRunner<'a> {
    a: Runner<'a>,
    b: Runner<'a>,
    replaced_index: Option<usize>,
}

impl<'a> PairedRunner<'a> {
    pub fn new(
        spec: AlgorithmSpec,
        obj: &'a Objective,
        s: &'a Dataset,
        s_neighbor: &'a Dataset,
        w0: &Vector,
        theta0: &Vector,
        seed: u64,
    ) -> Result<Self> {
        let replaced_index = replaced_index(s, s_neighbor)?;
        Ok(Self {
            a: Runner::new(spec, obj, s, w0, theta0, seed)?,
            b: Runner::new(spec, obj, s_neighbor, w0, theta0, seed)?,
            replaced_index,
        })
    }

    /// Advances both runs; returns the shared sampled index in stochastic mode.
    pub fn step(&mut self) -> Result<Option<usize>> {
        let i = self.a.step()?;
        let j = self.b.step()?;
        debug_assert_eq!(i, j);
        Ok(i)
    }

    pub fn first(&self) -> &Runner<'a> {
        &self.a
    }

    pub fn second(&self) -> &Runner<'a> {
        &self.b
    }

    pub fn replaced_index(&self) -> Option<usize> {
        self.replaced_index
    }

    pub fn delta_w(&self) -> f64 {
        self.a.w().distance(self.b.w())
    }

    pub fn delta_theta(&self) -> f64 {
        self.a.theta().distance(self.b.theta())
    }

    pub fn delta(&self) -> f64 {
        joint_distance(self.a.w(), self.a.theta(), self.b.w(), self.b.theta())
    }
}

/// Runs `spec` on `s` and `s_neighbor` from the same start with a shared index
/// stream and records the divergences.
pub fn paired_run(
    spec: AlgorithmSpec,
    obj: &Objective,
    s: &Dataset,
    s_neighbor: &Dataset,
    w0: &Vector,
    theta0: &Vector,
    opts: &RunOptions,
) -> Result<StabilityTrace> {
    let mut pair = PairedRunner::new(spec, obj, s, s_neighbor, w0, theta0, opts.seed)?;
    let mut trace = StabilityTrace {
        t: vec![0],
        delta_w: vec![0.0],
        delta_theta: vec![0.0],
        delta: vec![0.0],
        replaced_index: pair.replaced_index(),
        sampled_indices: Vec::new(),
        seed: opts.seed,
    };
    for t in 1..=opts.iterations {
        if let Some(i) = pair.step()? {
            trace.sampled_indices.push(i);
        }
        if opts.records(t) {
            trace.t.push(t);
            trace.delta_w.push(pair.delta_w());
            trace.delta_theta.push(pair.delta_theta());
            trace.delta.push(pair.delta());
        }
    }
    Ok(trace)
}

/// Signed `ε_gen(w_t)` at the recorded iterations of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct GenRiskCurve {
    pub t: Vec<usize>,
    pub gen_risk: Vec<f64>,
    pub seed: u64,
    pub spec: AlgorithmSpec,
}

impl GenRiskCurve {
    pub fn max_abs(&self) -> f64 {
        self.gen_risk.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// CSV with header `t,gen_risk`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["t", "gen_risk"])?;
        for (t, g) in self.t.iter().zip(&self.gen_risk) {
            out.write_record([t.to_string(), format_f64(*g)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Closed-form generalization risk along one run, evaluated at `t = 0` and at
/// every recorded iteration.
pub fn gen_risk_curve(
    spec: AlgorithmSpec,
    obj: &Objective,
    s: &Dataset,
    population_mean: &Vector,
    w0: &Vector,
    theta0: &Vector,
    opts: &RunOptions,
) -> Result<GenRiskCurve> {
    let mut runner = Runner::new(spec, obj, s, w0, theta0, opts.seed)?;
    let mut curve = GenRiskCurve {
        t: vec![0],
        gen_risk: vec![obj.generalization_risk(w0, s, population_mean)?],
        seed: opts.seed,
        spec,
    };
    for t in 1..=opts.iterations {
        runner.step()?;
        if opts.records(t) {
            curve.t.push(t);
            curve.gen_risk.push(obj.generalization_risk(runner.w(), s, population_mean)?);
        }
    }
    Ok(curve)
}

/// A point `(w, θ)` of the joint space.
pub type Point = (Vector, Vector);

/// Largest observed ratio `‖G(u) − G(u')‖ / ‖u − u'‖` over `num_pairs` pairs
/// drawn by `sampler`. Pairs closer than [`MIN_SEPARATION`] are redrawn.
pub fn estimate_expansivity<G, P>(map: G, mut sampler: P, num_pairs: usize, seed: u64) -> Result<f64>
where
    G: Fn(&Vector, &Vector) -> Result<Point>,
    P: FnMut(&mut ChaCha8Rng) -> (Point, Point),
{
    if num_pairs == 0 {
        return Err(LabError::InvalidParameter("num_pairs must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..num_pairs {
        let mut attempts = 0;
        let ((w1, t1), (w2, t2)) = loop {
            let pair = sampler(&mut rng);
            let sep = joint_distance(&pair.0 .0, &pair.0 .1, &pair.1 .0, &pair.1 .1);
            if sep >= MIN_SEPARATION {
                break pair;
            }
            attempts += 1;
            if attempts >= 1000 {
                return Err(LabError::InvalidParameter("sampler keeps producing coincident pairs".into()));
            }
        };
        let (gw1, gt1) = map(&w1, &t1)?;
        let (gw2, gt2) = map(&w2, &t2)?;
        let ratio = joint_distance(&gw1, &gt1, &gw2, &gt2) / joint_distance(&w1, &t1, &w2, &t2);
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Pair sampler drawing both points uniformly from the feasible balls.
pub fn ball_pair_sampler(dim: usize, rho_w: f64, rho_theta: f64) -> impl FnMut(&mut ChaCha8Rng) -> (Point, Point) {
    move |rng| {
        let mut draw =
            || (crate::data::uniform_in_ball(rng, dim, rho_w), crate::data::uniform_in_ball(rng, dim, rho_theta));
        let a = draw();
        let b = draw();
        (a, b)
    }
}

/// Mean with its standard error (`0` for a single value).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Result of [`estimate_uniform_stability`].
#[derive(Clone, Debug, PartialEq)]
pub struct UniformStabilityEstimate {
    /// Largest `|mean_seeds f(w_T, θ; z) − f(w'_T, θ; z)|` over probes and
    /// replacements.
    pub estimate: f64,
    /// Standard error of the mean that attained `estimate`.
    pub standard_error: f64,
    /// `L_w · mean_seeds δ_{w,T}`, maximized over replacements.
    pub lipschitz_bound: f64,
    /// Standard error of the mean `δ_{w,T}` that attained `lipschitz_bound`.
    pub lipschitz_bound_se: f64,
    /// Mean of `δ_{w,T}` for each replacement.
    pub mean_delta_w: Vec<f64>,
}

/// Monte-Carlo estimate of uniform stability in minimization.
///
/// For each of `num_replacements` neighbors (uniform index, fresh standard
/// normal sample, drawn from `replacement_seed`) the algorithm is run from
/// `(w0, θ0)` on both datasets once per seed in `seeds`, and the final `w`
/// iterates are compared at every probe.
#[allow(clippy::too_many_arguments)]
pub fn estimate_uniform_stability(
    spec: AlgorithmSpec,
    obj: &Objective,
    s: &Dataset,
    w0: &Vector,
    theta0: &Vector,
    probes: &[(Vector, Vector)],
    iterations: usize,
    num_replacements: usize,
    replacement_seed: u64,
    seeds: &[u64],
) -> Result<UniformStabilityEstimate> {
    if probes.is_empty() || seeds.is_empty() || num_replacements == 0 {
        return Err(LabError::InvalidParameter("need probes, seeds and at least one replacement".into()));
    }
    for (z, theta) in probes {
        check_dim(obj.dim, z.dim())?;
        check_dim(obj.dim, theta.dim())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(replacement_seed);
    let mut out = UniformStabilityEstimate {
        estimate: 0.0,
        standard_error: 0.0,
        lipschitz_bound: 0.0,
        lipschitz_bound_se: 0.0,
        mean_delta_w: Vec::with_capacity(num_replacements),
    };
    let l_w = obj.constants.lipschitz_w;
    for _ in 0..num_replacements {
        let (neighbor, _) = random_neighbor(s, &mut rng)?;
        let mut deltas = Vec::with_capacity(seeds.len());
        let mut diffs = vec![Vec::with_capacity(seeds.len()); probes.len()];
        for &seed in seeds {
            let mut pair = PairedRunner::new(spec, obj, s, &neighbor, w0, theta0, seed)?;
            for _ in 0..iterations {
                pair.step()?;
            }
            deltas.push(pair.delta_w());
            let (wa, wb) = (pair.first().w(), pair.second().w());
            for (k, (z, theta)) in probes.iter().enumerate() {
                diffs[k].push(obj.value(wa, theta, z)? - obj.value(wb, theta, z)?);
            }
        }
        for d in &diffs {
            let (m, se) = mean_and_se(d);
            if m.abs() > out.estimate {
                out.estimate = m.abs();
                out.standard_error = se;
            }
        }
        let (md, sd) = mean_and_se(&deltas);
        if l_w * md >= out.lipschitz_bound {
            out.lipschitz_bound = l_w * md;
            out.lipschitz_bound_se = l_w * sd;
        }
        out.mean_delta_w.push(md);
    }
    Ok(out)
}

/// Fixed probe set: `count` pairs with `z` standard normal and `θ` uniform in
/// the ball of radius `rho_theta`.
pub fn make_probes(dim: usize, count: usize, rho_theta: f64, seed: u64) -> Vec<(Vector, Vector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (gaussian_vector(&mut rng, dim), crate::data::uniform_in_ball(&mut rng, dim, rho_theta)))
        .collect()
}

/// Largest joint gradient norm `‖(∇_w f, ∇_θ f)‖` at the given points over the
/// given samples. Used as the measured Lipschitz constant `L̂` of a run.
pub fn gradient_bound<'p>(
    obj: &Objective,
    points: impl IntoIterator<Item = (&'p Vector, &'p Vector)>,
    samples: &[Vector],
) -> Result<f64> {
    let mut best = 0.0f64;
    for (w, theta) in points {
        for z in samples {
            let gw = obj.grad_w(w, theta, z)?;
            let gt = obj.grad_theta(w, theta, z)?;
            best = best.max((gw.norm_squared() + gt.norm_squared()).sqrt());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_gaussian_dataset;
    use crate::optimizers::{Mode, Schedule};

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn neighbor_replacement() {
        let s = Dataset::new(vec![v(&[1.0]), v(&[2.0])]).unwrap();
        let n = make_neighbor_dataset(&s, 0, v(&[5.0])).unwrap();
        assert_eq!(n.samples(), &[v(&[5.0]), v(&[2.0])]);
        assert_eq!(make_neighbor_dataset(&s, 1, v(&[2.0])).unwrap(), s);
        assert!(matches!(make_neighbor_dataset(&s, 2, v(&[0.0])), Err(LabError::IndexOutOfRange { .. })));
        let mut a = Vec::new();
        let mut b = Vec::new();
        s.write_csv(&mut a).unwrap();
        n.write_csv(&mut b).unwrap();
        let (a, b) = (String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap());
        assert_eq!(a.lines().zip(b.lines()).filter(|(x, y)| x != y).count(), 1);
    }

    #[test]
    fn identical_datasets_give_zero_trace() {
        let obj = Objective::scsc_quadratic(3, 0.1).unwrap().with_radii(Some(10.0), Some(10.0)).unwrap();
        let s = make_gaussian_dataset(3, 20, 1).unwrap();
        let spec = AlgorithmSpec::gda(Mode::Stochastic, Schedule::Constant(0.05), Schedule::Constant(0.05));
        let tr =
            paired_run(spec, &obj, &s, &s, &v(&[1.0, 0.0, 0.0]), &Vector::zeros(3), &RunOptions::new(100, 3)).unwrap();
        assert!(tr.delta.iter().all(|&d| d == 0.0));
        assert_eq!(tr.replaced_index, None);
    }

    #[test]
    fn rejects_non_neighbors() {
        let obj = Objective::bilinear(1).unwrap();
        let s = Dataset::new(vec![v(&[1.0]), v(&[2.0])]).unwrap();
        let t = Dataset::new(vec![v(&[0.0]), v(&[0.0])]).unwrap();
        let spec = AlgorithmSpec::gda(Mode::FullBatch, Schedule::Constant(0.1), Schedule::Constant(0.1));
        let err = paired_run(spec, &obj, &s, &t, &v(&[0.0]), &v(&[0.0]), &RunOptions::new(1, 0)).unwrap_err();
        assert!(matches!(err, LabError::NotNeighbors));
    }

    #[test]
    fn trace_invariants() {
        let obj = Objective::toy_ncsc(4, 0.5).unwrap().with_radii(Some(5.0), Some(5.0)).unwrap();
        let s = make_gaussian_dataset(4, 10, 2).unwrap();
        let (n, i) = random_neighbor(&s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let spec = AlgorithmSpec::gda(Mode::Stochastic, Schedule::InverseT(0.5), Schedule::InverseT(0.5));
        let tr =
            paired_run(spec, &obj, &s, &n, &Vector::zeros(4), &Vector::zeros(4), &RunOptions::new(300, 5)).unwrap();
        assert_eq!(tr.replaced_index, Some(i));
        assert_eq!(tr.delta[0], 0.0);
        for k in 0..tr.t.len() {
            let (dw, dt, d) = (tr.delta_w[k], tr.delta_theta[k], tr.delta[k]);
            assert!(d >= dw.max(dt) - 1e-15 && d <= dw + dt + 1e-15);
        }
        assert!(tr.final_delta() > 0.0);
    }

    #[test]
    fn exported_csv_headers() {
        let obj = Objective::bilinear(1).unwrap();
        let s = Dataset::new(vec![v(&[1.0]), v(&[2.0])]).unwrap();
        let n = make_neighbor_dataset(&s, 0, v(&[0.0])).unwrap();
        let spec = AlgorithmSpec::gda(Mode::FullBatch, Schedule::Constant(0.1), Schedule::Constant(0.1));
        let tr = paired_run(spec, &obj, &s, &n, &v(&[0.0]), &v(&[0.0]), &RunOptions::new(3, 0)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,delta_w,delta_theta,delta\n"));
        assert_eq!(text.lines().count(), 5);
        let c = gen_risk_curve(spec, &obj, &s, &v(&[0.0]), &v(&[0.0]), &v(&[0.0]), &RunOptions::new(3, 0)).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("t,gen_risk\n"));
    }

    #[test]
    fn gen_risk_curve_zero_when_w_stays_zero() {
        // z̄ = θ0 = 0 keeps the bilinear gradients at zero.
        let obj = Objective::bilinear(2).unwrap();
        let s = Dataset::new(vec![v(&[1.0, -1.0]), v(&[-1.0, 1.0])]).unwrap();
        let spec = AlgorithmSpec::gda(Mode::FullBatch, Schedule::Constant(0.1), Schedule::Constant(0.1));
        let c = gen_risk_curve(
            spec,
            &obj,
            &s,
            &v(&[0.3, 0.3]),
            &Vector::zeros(2),
            &Vector::zeros(2),
            &RunOptions::new(50, 0),
        )
        .unwrap();
        assert!(c.gen_risk.iter().all(|&g| g == 0.0));
        assert_eq!(c.t.len(), 51);
    }

    #[test]
    fn gen_risk_curve_rejects_toy() {
        let obj = Objective::toy_ncsc(1, 0.5).unwrap();
        let s = Dataset::new(vec![v(&[1.0])]).unwrap();
        let spec = AlgorithmSpec::gda(Mode::FullBatch, Schedule::Constant(0.1), Schedule::Constant(0.1));
        assert!(gen_risk_curve(spec, &obj, &s, &v(&[0.0]), &v(&[0.0]), &v(&[0.0]), &RunOptions::new(2, 0)).is_err());
    }

    #[test]
    fn identity_map_expansivity_is_one() {
        let e =
            estimate_expansivity(|w, t| Ok((w.clone(), t.clone())), ball_pair_sampler(3, 1.0, 1.0), 200, 0).unwrap();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn expansivity_rejects_degenerate_sampler() {
        let z = Vector::zeros(1);
        let same = move |_: &mut ChaCha8Rng| ((z.clone(), z.clone()), (z.clone(), z.clone()));
        assert!(estimate_expansivity(|w, t| Ok((w.clone(), t.clone())), same, 1, 0).is_err());
    }

    #[test]
    fn uniform_stability_zero_iterations_is_zero() {
        let obj = Objective::scsc_quadratic(2, 0.1).unwrap().with_radii(Some(5.0), Some(5.0)).unwrap();
        let obj = obj.clone().with_constants(obj.region_constants(5.0).unwrap()).unwrap();
        let s = make_gaussian_dataset(2, 10, 0).unwrap();
        let spec = AlgorithmSpec::gda(Mode::Stochastic, Schedule::Constant(0.05), Schedule::Constant(0.05));
        let probes = make_probes(2, 8, 5.0, 1);
        let est =
            estimate_uniform_stability(spec, &obj, &s, &Vector::zeros(2), &Vector::zeros(2), &probes, 0, 3, 2, &[0, 1])
                .unwrap();
        assert_eq!(est.estimate, 0.0);
        assert_eq!(est.lipschitz_bound, 0.0);
    }

    #[test]
    fn mean_and_se_examples() {
        assert_eq!(mean_and_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_and_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
