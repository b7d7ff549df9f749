//! Dense vectors, datasets and their CSV form.

use std::io::{Read, Write};
use std::ops::{Add, Index, Mul, Neg, Sub};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, LabError, Result};

/// A dense real vector.
///
/// Values built through [`Vector::new`] are checked for finiteness. Arithmetic
/// helpers do not re-check; callers that may overflow should call
/// [`Vector::is_finite`].
#[derive(Clone, Debug, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(LabError::InvalidParameter("vector must have dim >= 1".into()));
        }
        if let Some((index, &value)) = entries.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(LabError::NonFinite { index, value });
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn scale(&self, a: f64) -> Vector {
        self.map(|v| a * v)
    }

    /// `self + a * x`
    pub fn add_scaled(&self, a: f64, x: &Vector) -> Vector {
        self.zip_map(x, |s, v| s + a * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Vector, f: impl Fn(f64, f64) -> f64) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = LabError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl<'a> Add<&'a Vector> for &'a Vector {
    type Output = Vector;
    fn add(self, rhs: &'a Vector) -> Vector {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Vector> for &'a Vector {
    type Output = Vector;
    fn sub(self, rhs: &'a Vector) -> Vector {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        rhs.scale(self)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.map(|v| -v)
    }
}

/// Euclidean distance of the stacked pair `[a1; b1]` to `[a2; b2]`.
pub fn joint_distance(a1: &Vector, b1: &Vector, a2: &Vector, b2: &Vector) -> f64 {
    (a1.distance(a2).powi(2) + b1.distance(b2).powi(2)).sqrt()
}

/// Projection onto the centered Euclidean ball of radius `rho`.
pub fn project_ball(u: &Vector, rho: f64) -> Vector {
    let norm = u.norm();
    if norm <= rho {
        u.clone()
    } else {
        u.scale(rho / norm)
    }
}

pub(crate) fn project_optional(u: Vector, radius: Option<f64>) -> Vector {
    match radius {
        Some(rho) => project_ball(&u, rho),
        None => u,
    }
}

/// An ordered collection of samples sharing one dimension. The sample mean is
/// computed once at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Vector>,
    mean: Vector,
}

impl Dataset {
    pub fn new(samples: Vec<Vector>) -> Result<Self> {
        let first = samples.first().ok_or(LabError::EmptyDataset)?;
        let dim = first.dim();
        for s in &samples {
            check_dim(dim, s.dim())?;
        }
        let mean = mean_of(&samples, dim);
        Ok(Self { samples, mean })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn samples(&self) -> &[Vector] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> Result<&Vector> {
        self.samples.get(i).ok_or(LabError::IndexOutOfRange { index: i, len: self.len() })
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    /// Copy with sample `i` replaced by `z`.
    pub fn with_replaced(&self, i: usize, z: Vector) -> Result<Dataset> {
        if i >= self.len() {
            return Err(LabError::IndexOutOfRange { index: i, len: self.len() });
        }
        check_dim(self.dim(), z.dim())?;
        let mut samples = self.samples.clone();
        samples[i] = z;
        Dataset::new(samples)
    }

    /// Indices at which two equally sized datasets differ.
    pub fn differing_indices(&self, other: &Dataset) -> Result<Vec<usize>> {
        if self.len() != other.len() {
            return Err(LabError::InvalidParameter(format!(
                "datasets have different sizes ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        check_dim(self.dim(), other.dim())?;
        Ok(self.samples.iter().zip(&other.samples).enumerate().filter(|(_, (a, b))| a != b).map(|(i, _)| i).collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for s in &self.samples {
            w.write_record(s.iter().map(|v| format_f64(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the headerless CSV form. Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
        let mut r =
            csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let mut samples = Vec::new();
        for record in r.records() {
            let record = record?;
            let entries = record
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| LabError::Parse(format!("{f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            samples.push(Vector::new(entries)?);
        }
        Dataset::new(samples)
    }
}

fn mean_of(samples: &[Vector], dim: usize) -> Vector {
    let mut acc = vec![0.0; dim];
    for s in samples {
        for (a, v) in acc.iter_mut().zip(s.iter()) {
            *a += v;
        }
    }
    let n = samples.len() as f64;
    Vector(acc.into_iter().map(|a| a / n).collect())
}

/// Seventeen significant digits; parses back to the identical `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `n` i.i.d. standard normal vectors of dimension `d`, reproducible from `seed`.
pub fn make_gaussian_dataset(d: usize, n: usize, seed: u64) -> Result<Dataset> {
    if d == 0 || n == 0 {
        return Err(LabError::InvalidParameter(format!("need d >= 1 and n >= 1, got d={d}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n).map(|_| gaussian_vector(&mut rng, d)).collect();
    Dataset::new(samples)
}

pub fn gaussian_vector<R: rand::Rng + ?Sized>(rng: &mut R, d: usize) -> Vector {
    Vector((0..d).map(|_| StandardNormal.sample(rng)).collect())
}

/// Uniform sample from the centered ball of radius `rho` in dimension `d`.
pub fn uniform_in_ball<R: rand::Rng + ?Sized>(rng: &mut R, d: usize, rho: f64) -> Vector {
    let dir = loop {
        let g = gaussian_vector(rng, d);
        let n = g.norm();
        if n > 0.0 {
            break g.scale(1.0 / n);
        }
    };
    let u: f64 = rng.random();
    dir.scale(rho * u.powf(1.0 / d as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vector_rejects_non_finite_and_empty() {
        assert!(matches!(Vector::new(vec![1.0, f64::NAN]), Err(LabError::NonFinite { index: 1, .. })));
        assert!(Vector::new(vec![]).is_err());
        assert_eq!(Vector::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn project_ball_scales_outside_points() {
        let p = project_ball(&Vector::new(vec![3.0, 4.0]).unwrap(), 1.0);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let inside = Vector::new(vec![0.1, 0.0]).unwrap();
        assert_eq!(project_ball(&inside, 1.0), inside);
    }

    #[test]
    fn dataset_requires_samples_and_matching_dims() {
        assert!(matches!(Dataset::new(vec![]), Err(LabError::EmptyDataset)));
        let bad = Dataset::new(vec![Vector::zeros(2), Vector::zeros(3)]);
        assert!(matches!(bad, Err(LabError::DimensionMismatch { expected: 2, got: 3 })));
    }

    #[test]
    fn gaussian_dataset_shape_and_determinism() {
        let a = make_gaussian_dataset(50, 1000, 7).unwrap();
        assert_eq!((a.len(), a.dim()), (1000, 50));
        let b = make_gaussian_dataset(50, 1000, 7).unwrap();
        let bits =
            |d: &Dataset| -> Vec<u64> { d.samples().iter().flat_map(|s| s.iter().map(|v| v.to_bits())).collect() };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&make_gaussian_dataset(50, 1000, 8).unwrap()));
    }

    #[test]
    fn gaussian_dataset_moments() {
        let n = 100_000;
        let ds = make_gaussian_dataset(50, n, 3).unwrap();
        let tol = 5.0 / (n as f64).sqrt();
        for j in 0..50 {
            let mean = ds.mean()[j];
            let var = ds.samples().iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / n as f64;
            assert!(mean.abs() < tol, "coordinate {j} mean {mean}");
            assert!((var - 1.0).abs() < 0.1, "coordinate {j} variance {var}");
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let ds = make_gaussian_dataset(4, 25, 11).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 25);
        assert!(!text.lines().next().unwrap().contains("dim"));
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn neighbor_replacement() {
        let ds = Dataset::new(vec![Vector::new(vec![1.0]).unwrap(), Vector::new(vec![2.0]).unwrap()]).unwrap();
        let nb = ds.with_replaced(0, Vector::new(vec![5.0]).unwrap()).unwrap();
        assert_eq!(nb.samples()[0][0], 5.0);
        assert_eq!(nb.samples()[1][0], 2.0);
        assert_eq!(ds.differing_indices(&nb).unwrap(), vec![0]);
        assert!(matches!(ds.with_replaced(2, Vector::zeros(1)), Err(LabError::IndexOutOfRange { index: 2, len: 2 })));
    }

    proptest! {
        #[test]
        fn projection_is_nonexpansive_toward_feasible_points(
            u in proptest::collection::vec(-50.0f64..50.0, 3),
            v in proptest::collection::vec(-1.0f64..1.0, 3),
            rho in 0.1f64..10.0,
        ) {
            let u = Vector::new(u).unwrap();
            let v = project_ball(&Vector::new(v).unwrap(), rho);
            let p = project_ball(&u, rho);
            prop_assert!(p.norm() <= rho * (1.0 + 1e-12));
            prop_assert!(p.distance(&v) <= u.distance(&v) + 1e-12);
        }

        #[test]
        fn format_f64_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
