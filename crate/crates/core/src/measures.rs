//! Finite discrete probability measures on the real line.
//!
//! A [`DiscreteMeasure`] is always held in canonical form: support points
//! strictly increasing, duplicates merged, weights non-negative and summing
//! to one. A [`MeasurePair`] puts two measures on a shared support so that
//! divergences can be evaluated point by point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weights more negative than this are rejected outright.
pub const NEGATIVE_WEIGHT_TOL: f64 = 1e-12;

/// Largest accepted deviation of the weight sum from one.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("points and weights differ in length ({points} vs {weights})")]
    LengthMismatch { points: usize, weights: usize },
    #[error("weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}")]
    WeightSumInvalid { sum: f64 },
    #[error("weight {weight} at index {index} is negative")]
    NegativeWeight { index: usize, weight: f64 },
    #[error("weight at index {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("support point at index {index} is not finite")]
    NonFinitePoint { index: usize },
    #[error("mixture parameter t = {t} lies outside [0, 1]")]
    TOutOfRange { t: f64 },
    #[error("invalid moment constraint: {0}")]
    InvalidMomentSpec(String),
}

/// A probability measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = MeasureError;

    fn try_from(raw: RawMeasure) -> Result<Self, Self::Error> {
        DiscreteMeasure::new(&raw.points, &raw.weights)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure {
            points: m.points,
            weights: m.weights,
        }
    }
}

impl DiscreteMeasure {
    /// Builds a canonical measure from raw atoms.
    ///
    /// Points are sorted and exact duplicates merged by summing their
    /// weights. Weights in `[-1e-12, 0)` are clamped to zero. The weight sum
    /// must be within `1e-9` of one; when it is off by more than rounding
    /// noise the weights are rescaled to sum to one.
    pub fn new(points: &[f64], weights: &[f64]) -> Result<Self, MeasureError> {
        if points.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                points: points.len(),
                weights: weights.len(),
            });
        }
        let mut atoms = Vec::with_capacity(points.len());
        for (index, (&u, &w)) in points.iter().zip(weights).enumerate() {
            if !u.is_finite() {
                return Err(MeasureError::NonFinitePoint { index });
            }
            if !w.is_finite() {
                return Err(MeasureError::NonFiniteWeight { index });
            }
            if w < -NEGATIVE_WEIGHT_TOL {
                return Err(MeasureError::NegativeWeight { index, weight: w });
            }
            atoms.push((u, w.max(0.0)));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (u, w) in atoms {
            match merged.last_mut() {
                // -0.0 and 0.0 are the same support point.
                Some(last) if last.0 == u => last.1 += w,
                _ => merged.push((u, w)),
            }
        }

        let sum: f64 = merged.iter().map(|a| a.1).sum();
        if !((sum - 1.0).abs() <= WEIGHT_SUM_TOL) {
            return Err(MeasureError::WeightSumInvalid { sum });
        }
        // Within summation noise the weights are left untouched, which keeps
        // canonicalization idempotent and serialization bit-faithful.
        let noise = 2.0 * merged.len() as f64 * f64::EPSILON;
        if (sum - 1.0).abs() > noise {
            for atom in &mut merged {
                atom.1 /= sum;
            }
        }

        let (points, weights) = merged.into_iter().unzip();
        Ok(Self { points, weights })
    }

    /// Unit mass at `u`.
    pub fn point_mass(u: f64) -> Result<Self, MeasureError> {
        Self::new(&[u], &[1.0])
    }

    /// Trusted constructor for weights produced by exact convex combinations
    /// on an already canonical support.
    pub(crate) fn from_canonical(points: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(points.len(), weights.len());
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(weights.iter().all(|&w| w >= 0.0));
        Self { points, weights }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean and variance. The variance is accumulated around the mean, so
    /// it is non-negative by construction.
    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| u * w)
            .sum();
        let variance: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(u, w)| w * (u - mean) * (u - mean))
            .sum();
        (mean, variance)
    }

    /// Weight assigned to `u`, zero when `u` is not a support point.
    pub fn mass_at(&self, u: f64) -> f64 {
        match self.points.binary_search_by(|x| x.total_cmp(&u)) {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    fn expand_to(&self, support: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; support.len()];
        let mut j = 0;
        for (i, &u) in self.points.iter().enumerate() {
            while support[j] != u {
                j += 1;
            }
            out[j] = self.weights[i];
        }
        out
    }
}

/// Convenience alias matching the free-function style of the rest of the
/// crate.
pub fn make_measure(points: &[f64], weights: &[f64]) -> Result<DiscreteMeasure, MeasureError> {
    DiscreteMeasure::new(points, weights)
}

pub fn moments(m: &DiscreteMeasure) -> (f64, f64) {
    m.moments()
}

/// Two measures expressed on the union of their supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair", into = "RawPair")]
pub struct MeasurePair {
    p: DiscreteMeasure,
    q: DiscreteMeasure,
}

#[derive(Serialize, Deserialize)]
struct RawPair {
    p: DiscreteMeasure,
    q: DiscreteMeasure,
}

impl From<RawPair> for MeasurePair {
    fn from(raw: RawPair) -> Self {
        MeasurePair::new(&raw.p, &raw.q)
    }
}

impl From<MeasurePair> for RawPair {
    fn from(pair: MeasurePair) -> Self {
        RawPair {
            p: pair.p,
            q: pair.q,
        }
    }
}

impl MeasurePair {
    /// Re-expresses both measures on the union of their supports, padding
    /// with zero weights.
    pub fn new(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Self {
        let mut support: Vec<f64> = p.points.iter().chain(&q.points).copied().collect();
        support.sort_by(f64::total_cmp);
        support.dedup();
        let pw = p.expand_to(&support);
        let qw = q.expand_to(&support);
        Self {
            p: DiscreteMeasure::from_canonical(support.clone(), pw),
            q: DiscreteMeasure::from_canonical(support, qw),
        }
    }

    /// Builds a pair from weights on a common list of points.
    pub fn from_weights(
        points: &[f64],
        p_weights: &[f64],
        q_weights: &[f64],
    ) -> Result<Self, MeasureError> {
        let p = DiscreteMeasure::new(points, p_weights)?;
        let q = DiscreteMeasure::new(points, q_weights)?;
        Ok(Self::new(&p, &q))
    }

    pub fn p(&self) -> &DiscreteMeasure {
        &self.p
    }

    pub fn q(&self) -> &DiscreteMeasure {
        &self.q
    }

    pub fn points(&self) -> &[f64] {
        &self.p.points
    }

    pub fn p_weights(&self) -> &[f64] {
        &self.p.weights
    }

    pub fn q_weights(&self) -> &[f64] {
        &self.q.weights
    }

    /// The same pair with the roles of `P` and `Q` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            p: self.q.clone(),
            q: self.p.clone(),
        }
    }

    /// `(1 - t) P + t Q`, the point at parameter `t` on the segment from
    /// `P` to `Q`. Endpoints reproduce `P` and `Q` exactly.
    pub fn mixture(&self, t: f64) -> Result<DiscreteMeasure, MeasureError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(MeasureError::TOutOfRange { t });
        }
        let weights = self
            .p
            .weights
            .iter()
            .zip(&self.q.weights)
            .map(|(&p, &q)| (1.0 - t) * p + t * q)
            .collect();
        Ok(DiscreteMeasure::from_canonical(
            self.p.points.clone(),
            weights,
        ))
    }

    /// `(P, Q_t)` with `Q_t = (1 - t) P + t Q`.
    pub fn toward_q(&self, t: f64) -> Result<Self, MeasureError> {
        Ok(Self {
            p: self.p.clone(),
            q: self.mixture(t)?,
        })
    }

    /// `(P_t, Q)` with `P_t = (1 - t) Q + t P`.
    pub fn toward_p(&self, t: f64) -> Result<Self, MeasureError> {
        Ok(Self {
            p: self.swapped().mixture(t)?,
            q: self.q.clone(),
        })
    }
}

pub fn mixture(pair: &MeasurePair, t: f64) -> Result<DiscreteMeasure, MeasureError> {
    pair.mixture(t)
}

/// Prescribed means and standard deviations of a pair `(P, Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub mean_p: f64,
    pub sigma_p: f64,
    pub mean_q: f64,
    pub sigma_q: f64,
}

impl MomentSpec {
    pub fn new(mean_p: f64, sigma_p: f64, mean_q: f64, sigma_q: f64) -> Result<Self, MeasureError> {
        Self {
            mean_p,
            sigma_p,
            mean_q,
            sigma_q,
        }
        .validated()
    }

    /// Checks finiteness and non-negative deviations.
    pub fn validated(self) -> Result<Self, MeasureError> {
        let fields = [self.mean_p, self.sigma_p, self.mean_q, self.sigma_q];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(MeasureError::InvalidMomentSpec(format!(
                "non-finite field in {self:?}"
            )));
        }
        if self.sigma_p < 0.0 || self.sigma_q < 0.0 {
            return Err(MeasureError::InvalidMomentSpec(format!(
                "negative standard deviation in {self:?}"
            )));
        }
        Ok(self)
    }

    /// Exchanges the roles of `P` and `Q`.
    pub fn swapped(self) -> Self {
        Self {
            mean_p: self.mean_q,
            sigma_p: self.sigma_q,
            mean_q: self.mean_p,
            sigma_q: self.sigma_p,
        }
    }

    /// Mean gap `m_P - m_Q`.
    pub fn gap(&self) -> f64 {
        self.mean_p - self.mean_q
    }

    pub fn var_p(&self) -> f64 {
        self.sigma_p * self.sigma_p
    }

    pub fn var_q(&self) -> f64 {
        self.sigma_q * self.sigma_q
    }

    /// Whether `pair` has these moments, to relative tolerance `rel_tol`
    /// (scaled by the spread of the spec).
    pub fn is_satisfied_by(&self, pair: &MeasurePair, rel_tol: f64) -> bool {
        let (mp, vp) = pair.p().moments();
        let (mq, vq) = pair.q().moments();
        let scale = 1.0 + self.mean_p.abs().max(self.mean_q.abs());
        let vscale = 1.0 + self.var_p().max(self.var_q()) + self.mean_p.powi(2).max(self.mean_q.powi(2));
        (mp - self.mean_p).abs() <= rel_tol * scale
            && (mq - self.mean_q).abs() <= rel_tol * scale
            && (vp - self.var_p()).abs() <= rel_tol * vscale
            && (vq - self.var_q()).abs() <= rel_tol * vscale
    }
}
