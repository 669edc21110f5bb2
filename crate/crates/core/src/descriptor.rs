//! Face descriptors, distance kernels and set sufficient statistics.
//!
//! The mean pairwise squared distance between two face sets only depends on
//! each set's size, vector sum and sum of squared norms:
//!
//! ```text
//! 1/(nA nB) ΣΣ ‖a − b‖² = ΣA‖a‖²/nA + ΣB‖b‖²/nB − 2 (Σa · Σb)/(nA nB)
//! ```
//!
//! so track-to-cloud costs cost O(dim) once the statistics are cached.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as zero by [`l2_normalize`].
pub const ZERO_NORM_EPS: f64 = 1e-12;

/// A single face embedding.
///
/// Ingested and synthetic descriptors are unit norm; cluster centroids built
/// from them are not, so the type itself does not enforce normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaceDescriptor(Vec<f64>);

impl FaceDescriptor {
    pub fn new(values: Vec<f64>) -> Self {
        FaceDescriptor(values)
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

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        check_dims(dim, self.dim())
    }
}

impl AsRef<[f64]> for FaceDescriptor {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn sq_dist_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Scales `v` to unit Euclidean norm.
pub fn l2_normalize(v: &[f64]) -> Result<FaceDescriptor> {
    let norm = dot(v, v).sqrt();
    if !(norm >= ZERO_NORM_EPS) {
        return Err(Error::ZeroVector { norm });
    }
    Ok(FaceDescriptor(v.iter().map(|x| x / norm).collect()))
}

/// [`l2_normalize`] with an up-front dimension check.
pub fn l2_normalize_dim(v: &[f64], dim: usize) -> Result<FaceDescriptor> {
    check_dims(dim, v.len())?;
    l2_normalize(v)
}

pub fn sq_euclidean(a: &FaceDescriptor, b: &FaceDescriptor) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(sq_dist_unchecked(&a.0, &b.0))
}

pub fn euclidean(a: &FaceDescriptor, b: &FaceDescriptor) -> Result<f64> {
    sq_euclidean(a, b).map(f64::sqrt)
}

/// Count, vector sum and squared-norm sum of a face set.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSetStats {
    count: usize,
    vector_sum: Vec<f64>,
    sqnorm_sum: f64,
}

impl FaceSetStats {
    pub fn empty(dim: usize) -> Self {
        FaceSetStats {
            count: 0,
            vector_sum: vec![0.0; dim],
            sqnorm_sum: 0.0,
        }
    }

    /// Stats over `faces`, accumulated in iteration order.
    pub fn from_faces<'a, I>(dim: usize, faces: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FaceDescriptor>,
    {
        let mut stats = FaceSetStats::empty(dim);
        for f in faces {
            stats.push(f)?;
        }
        Ok(stats)
    }

    pub fn push(&mut self, face: &FaceDescriptor) -> Result<()> {
        check_dims(self.dim(), face.dim())?;
        for (s, x) in self.vector_sum.iter_mut().zip(&face.0) {
            *s += x;
        }
        self.sqnorm_sum += dot(&face.0, &face.0);
        self.count += 1;
        Ok(())
    }

    /// Componentwise sum, i.e. the stats of the disjoint union.
    pub fn merge(&mut self, other: &FaceSetStats) -> Result<()> {
        check_dims(self.dim(), other.dim())?;
        for (s, x) in self.vector_sum.iter_mut().zip(&other.vector_sum) {
            *s += x;
        }
        self.sqnorm_sum += other.sqnorm_sum;
        self.count += other.count;
        Ok(())
    }

    pub fn merged(&self, other: &FaceSetStats) -> Result<FaceSetStats> {
        let mut out = self.clone();
        out.merge(other)?;
        Ok(out)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.vector_sum.len()
    }

    pub fn vector_sum(&self) -> &[f64] {
        &self.vector_sum
    }

    pub fn sqnorm_sum(&self) -> f64 {
        self.sqnorm_sum
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Mean of ‖a − b‖² over all pairs (a ∈ A, b ∈ B), in closed form.
///
/// Cancellation can push the closed form a few ulps below zero for
/// (near-)identical sets; the result is clamped at zero.
pub fn mean_pairwise_sqdist(a: &FaceSetStats, b: &FaceSetStats) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    check_dims(a.dim(), b.dim())?;
    let na = a.count as f64;
    let nb = b.count as f64;
    let cross = dot(&a.vector_sum, &b.vector_sum) / (na * nb);
    let d = a.sqnorm_sum / na + b.sqnorm_sum / nb - 2.0 * cross;
    Ok(d.max(0.0))
}
