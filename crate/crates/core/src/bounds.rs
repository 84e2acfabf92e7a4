//! Lower bounds on α- and Rényi divergences under mean and variance
//! constraints, attained by an explicit two-point pair.

use serde::Serialize;
use thiserror::Error;

use crate::divergences::{
    alpha_from_cells, renyi_from_cells, AlphaOrder, Cell, DivergenceError, ExtendedValue,
};
use crate::measures::{MeasureError, MeasurePair, MomentSpec};

/// Mean gaps at or below this magnitude are treated as equal means.
pub const EQUAL_MEANS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("means coincide (gap {0:e}); the bound is zero")]
    EqualMeans(f64),
    #[error(transparent)]
    InvalidSpec(#[from] MeasureError),
    #[error("order {0} is outside the supported range")]
    InvalidOrder(f64),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<DivergenceError> for BoundError {
    fn from(e: DivergenceError) -> Self {
        match e {
            DivergenceError::InvalidOrder(a) => BoundError::InvalidOrder(a),
            other => BoundError::Internal(other.to_string()),
        }
    }
}

/// Two-point pair `R = r δ_{u1} + (1-r) δ_{u2}`, `S = s δ_{u1} + (1-s) δ_{u2}`
/// matching a [`MomentSpec`].
///
/// Besides `r` and `s` the complements and the difference `r - s` are kept
/// separately; each is computed without cancellation, which keeps the
/// binary divergence accurate when `r` and `s` are close to each other or to
/// the ends of `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryPair {
    pub r: f64,
    pub s: f64,
    pub u1: f64,
    pub u2: f64,
    pub a: f64,
    pub v: f64,
    #[serde(skip)]
    r_complement: f64,
    #[serde(skip)]
    s_complement: f64,
    #[serde(skip)]
    difference: f64,
}

impl BinaryPair {
    /// `1 - r`.
    pub fn r_complement(&self) -> f64 {
        self.r_complement
    }

    /// `1 - s`.
    pub fn s_complement(&self) -> f64 {
        self.s_complement
    }

    /// `r - s`, equal to `a / (2v)`.
    pub fn difference(&self) -> f64 {
        self.difference
    }

    fn cells(&self) -> [Cell; 2] {
        let d = self.difference;
        let first = if self.r > 0.0 && self.s > 0.0 {
            Cell { p: self.r, q: self.s, delta: d / self.s }
        } else {
            Cell::from_masses(self.r, self.s)
        };
        let second = if self.r_complement > 0.0 && self.s_complement > 0.0 {
            Cell {
                p: self.r_complement,
                q: self.s_complement,
                delta: -d / self.s_complement,
            }
        } else {
            Cell::from_masses(self.r_complement, self.s_complement)
        };
        [first, second]
    }

    /// `d_A^(α)(r‖s)`.
    pub fn alpha_divergence(&self, alpha: f64) -> ExtendedValue {
        alpha_from_cells(self.cells(), alpha)
    }

    /// `d_R^(α)(r‖s)`.
    pub fn renyi_divergence(&self, order: AlphaOrder) -> Result<ExtendedValue, DivergenceError> {
        renyi_from_cells(&self.cells(), order)
    }

    /// The pair `(R, S)` as measures on `{u1, u2}`.
    pub fn to_measure_pair(&self) -> Result<MeasurePair, MeasureError> {
        MeasurePair::from_weights(
            &[self.u1, self.u2],
            &[self.r, self.r_complement],
            &[self.s, self.s_complement],
        )
    }
}

/// Value of a lower bound together with the pair attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound: ExtendedValue,
    /// The bound is the infimum over all pairs with the given moments.
    pub tight_guaranteed: bool,
    pub equal_means: bool,
    pub witness: Option<BinaryPair>,
}

impl BoundReport {
    fn equal_means(tight: bool) -> Self {
        Self {
            bound: ExtendedValue::ZERO,
            tight_guaranteed: tight,
            equal_means: true,
            witness: None,
        }
    }
}

/// Splits `1` into `((D + σx) / 2D, (D - σx) / 2D)`, computing the smaller
/// part from `(D + x)(D - x) = prod` to avoid cancellation.
fn split(d: f64, x: f64, sign: f64, prod: f64) -> (f64, f64) {
    let large = (d + x.abs()) / (2.0 * d);
    let small = prod / (2.0 * d * (d + x.abs()));
    if sign * x >= 0.0 {
        (large, small)
    } else {
        (small, large)
    }
}

fn clamp_unit(x: f64) -> Result<f64, BoundError> {
    if (-1e-12..=1.0 + 1e-12).contains(&x) {
        Ok(x.clamp(0.0, 1.0))
    } else {
        Err(BoundError::Internal(format!("probability {x} escaped [0, 1]")))
    }
}

/// Builds the extremal two-point pair for `spec`.
pub fn binary_pair_from_moments(spec: &MomentSpec) -> Result<BinaryPair, BoundError> {
    let spec = spec.validated()?;
    let a = spec.gap();
    if a.abs() <= EQUAL_MEANS_TOL {
        return Err(BoundError::EqualMeans(a));
    }
    let (vp, vq) = (spec.var_p(), spec.var_q());
    let sign = a.signum();
    let a2 = a * a;

    let x = vq - vp + a2;
    let y = vq - vp - a2;
    // D² = X² + 4a²V_P = Y² + 4a²V_Q
    let d = x.hypot(2.0 * a.abs() * spec.sigma_p);
    let v = d / (2.0 * a.abs());

    let (r, rc) = split(d, x, sign, 4.0 * a2 * vp);
    let (s, sc) = split(d, y, sign, 4.0 * a2 * vq);
    let (r, rc, s, sc) = (clamp_unit(r)?, clamp_unit(rc)?, clamp_unit(s)?, clamp_unit(sc)?);
    let difference = a * a.abs() / d;

    let (u1, u2) = if spec.sigma_p > 0.0 {
        (
            spec.mean_p + spec.sigma_p * (rc / r).sqrt(),
            spec.mean_p - spec.sigma_p * (r / rc).sqrt(),
        )
    } else if a > 0.0 {
        // R = δ_{m_P}; the second atom comes from S's moment equations
        (spec.mean_p, spec.mean_q - vq / a)
    } else {
        (spec.mean_q - vq / a, spec.mean_p)
    };

    Ok(BinaryPair {
        r,
        s,
        u1,
        u2,
        a,
        v,
        r_complement: rc,
        s_complement: sc,
        difference,
    })
}

/// Lower bound on `D_A^(α)(P‖Q)` over pairs with the moments in `spec`.
///
/// The value is the binary divergence of the extremal pair for every finite
/// `α`; it is certified tight only for `α ∈ [-1, 2]`.
pub fn alpha_lower_bound(spec: &MomentSpec, alpha: f64) -> Result<BoundReport, BoundError> {
    if !alpha.is_finite() {
        return Err(BoundError::InvalidOrder(alpha));
    }
    let tight = (-1.0..=2.0).contains(&alpha);
    match binary_pair_from_moments(spec) {
        Err(BoundError::EqualMeans(_)) => Ok(BoundReport::equal_means(tight)),
        Err(e) => Err(e),
        Ok(pair) => Ok(BoundReport {
            bound: pair.alpha_divergence(alpha),
            tight_guaranteed: tight,
            equal_means: false,
            witness: Some(pair),
        }),
    }
}

/// Lower bound on the Rényi divergence `D_R^(α)(P‖Q)` for `α ∈ [0, 2]`.
pub fn renyi_lower_bound(spec: &MomentSpec, order: AlphaOrder) -> Result<BoundReport, BoundError> {
    let alpha = match order {
        AlphaOrder::Finite(a) if (0.0..=2.0).contains(&a) => a,
        AlphaOrder::Finite(a) => return Err(BoundError::InvalidOrder(a)),
        AlphaOrder::Infinity => return Err(BoundError::InvalidOrder(f64::INFINITY)),
    };
    match binary_pair_from_moments(spec) {
        Err(BoundError::EqualMeans(_)) => Ok(BoundReport::equal_means(true)),
        Err(e) => Err(e),
        Ok(pair) => Ok(BoundReport {
            bound: pair.renyi_divergence(AlphaOrder::Finite(alpha))?,
            tight_guaranteed: true,
            equal_means: false,
            witness: Some(pair),
        }),
    }
}

fn unequal_gap(spec: &MomentSpec) -> Result<f64, BoundError> {
    let spec = spec.validated()?;
    let a = spec.gap();
    if a.abs() <= EQUAL_MEANS_TOL {
        Err(BoundError::EqualMeans(a))
    } else {
        Ok(a)
    }
}

/// `a² / (2σ_Q²)`, the bound at `α = 2`; `+∞` when `σ_Q = 0`.
pub fn chi2_bound_closed_form(spec: &MomentSpec) -> Result<f64, BoundError> {
    let a = unequal_gap(spec)?;
    let vq = spec.var_q();
    Ok(if vq == 0.0 {
        f64::INFINITY
    } else {
        a * a / (2.0 * vq)
    })
}

/// `4(1 - √(c / (a² + c)))` with `c = (σ_P + σ_Q)²`, the bound at `α = 1/2`.
///
/// Evaluated as `4a² / ((a² + c)(1 + √(c / (a² + c))))`, which has no
/// cancellation for small gaps.
pub fn hellinger_bound_closed_form(spec: &MomentSpec) -> Result<f64, BoundError> {
    let a = unequal_gap(spec)?;
    let c = (spec.sigma_p + spec.sigma_q).powi(2);
    let a2 = a * a;
    let root = (c / (a2 + c)).sqrt();
    Ok(4.0 * a2 / ((a2 + c) * (1.0 + root)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mp: f64, sp: f64, mq: f64, sq: f64) -> MomentSpec {
        MomentSpec::new(mp, sp, mq, sq).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn golden_ratio_pair() {
        let b = binary_pair_from_moments(&spec(1.0, 1.0, 0.0, 1.0)).unwrap();
        let sqrt5 = 5f64.sqrt();
        assert_eq!(b.a, 1.0);
        assert!(close(b.v, sqrt5 / 2.0, 1e-15));
        assert!(close(b.r, (sqrt5 + 1.0) / (2.0 * sqrt5), 1e-15));
        assert!(close(b.s, (sqrt5 - 1.0) / (2.0 * sqrt5), 1e-15));
        assert!(close(b.u1, (1.0 + sqrt5) / 2.0, 1e-15));
        assert!(close(b.u2, (1.0 - sqrt5) / 2.0, 1e-15));
        assert!(close(b.difference(), 1.0 / sqrt5, 1e-15));
        assert!(close(b.r - b.s, b.a / (2.0 * b.v), 1e-12));
        assert!(close(b.s * b.s_complement() * 4.0 * b.v * b.v, 1.0, 1e-12));
    }

    #[test]
    fn degenerate_p() {
        let b = binary_pair_from_moments(&spec(1.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!(b.r, 1.0);
        assert_eq!(b.r_complement(), 0.0);
        assert!(close(b.s, 0.5, 1e-15));
        assert_eq!(b.u1, 1.0);
        assert_eq!(b.u2, -1.0);
        let m = b.to_measure_pair().unwrap();
        assert!(spec(1.0, 0.0, 0.0, 1.0).is_satisfied_by(&m, 1e-12));

        let b = binary_pair_from_moments(&spec(-1.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!(b.r, 0.0);
        assert!(close(b.s, 0.5, 1e-15));
        assert_eq!(b.u2, -1.0);
        assert_eq!(b.u1, 1.0);
    }

    #[test]
    fn both_point_masses() {
        let b = binary_pair_from_moments(&spec(2.0, 0.0, 0.5, 0.0)).unwrap();
        assert_eq!((b.r, b.s, b.u1, b.u2), (1.0, 0.0, 2.0, 0.5));
        assert!(alpha_lower_bound(&spec(2.0, 0.0, 0.5, 0.0), 2.0)
            .unwrap()
            .bound
            .is_infinite());
        let b = binary_pair_from_moments(&spec(0.5, 0.0, 2.0, 0.0)).unwrap();
        assert_eq!((b.r, b.s, b.u1, b.u2), (0.0, 1.0, 2.0, 0.5));
    }

    #[test]
    fn swap_symmetry() {
        let sp = spec(0.3, 1.7, -1.1, 0.6);
        let b = binary_pair_from_moments(&sp).unwrap();
        let c = binary_pair_from_moments(&sp.swapped()).unwrap();
        assert!(close(b.r, c.s, 1e-14) && close(b.s, c.r, 1e-14));
        assert_eq!(b.a, -c.a);
    }

    #[test]
    fn equal_means_branch() {
        assert!(matches!(
            binary_pair_from_moments(&spec(1.0, 1.0, 1.0, 2.0)),
            Err(BoundError::EqualMeans(_))
        ));
        for a in [-2.0, 0.5, 3.0] {
            let r = alpha_lower_bound(&spec(1.0, 1.0, 1.0, 2.0), a).unwrap();
            assert!(r.equal_means && r.witness.is_none());
            assert_eq!(r.bound.value(), 0.0);
        }
    }

    #[test]
    fn documented_bounds() {
        let sp = spec(1.0, 1.0, 0.0, 1.0);
        let chi = alpha_lower_bound(&sp, 2.0).unwrap();
        assert!(chi.tight_guaranteed);
        assert!(close(chi.bound.value(), 0.5, 1e-15));
        let hel = alpha_lower_bound(&sp, 0.5).unwrap().bound.value();
        assert!(close(hel, 4.0 * (1.0 - (0.8f64).sqrt()), 1e-14));
        assert!((hel - 0.42229).abs() < 1e-5);
        assert!(close(chi2_bound_closed_form(&sp).unwrap(), 0.5, 1e-15));
        assert!(close(hellinger_bound_closed_form(&sp).unwrap(), hel, 1e-14));
        assert!(!alpha_lower_bound(&sp, 3.0).unwrap().tight_guaranteed);
        assert!(!alpha_lower_bound(&sp, -1.5).unwrap().tight_guaranteed);
    }

    #[test]
    fn closed_form_edges() {
        assert_eq!(chi2_bound_closed_form(&spec(1.0, 1.0, 0.0, 0.0)).unwrap(), f64::INFINITY);
        assert_eq!(hellinger_bound_closed_form(&spec(1.0, 0.0, 0.0, 0.0)).unwrap(), 4.0);
        assert!(matches!(
            chi2_bound_closed_form(&spec(1.0, 1.0, 1.0, 0.5)),
            Err(BoundError::EqualMeans(_))
        ));
    }

    #[test]
    fn renyi_bounds() {
        let r = renyi_lower_bound(&spec(1.0, 1.0, 0.0, 1.0), 0.0.into()).unwrap();
        assert_eq!(r.bound.value(), 0.0);
        let r = renyi_lower_bound(&spec(1.0, 0.0, 0.0, 1.0), 0.0.into()).unwrap();
        assert!(close(r.bound.value(), 2f64.ln(), 1e-15));
        let sp = spec(0.4, 0.9, -0.2, 1.3);
        let kl = alpha_lower_bound(&sp, 1.0).unwrap().bound;
        let rk = renyi_lower_bound(&sp, 1.0.into()).unwrap().bound;
        assert_eq!(kl, rk);
        assert!(matches!(
            renyi_lower_bound(&sp, 2.5.into()),
            Err(BoundError::InvalidOrder(_))
        ));
        assert!(renyi_lower_bound(&sp, AlphaOrder::Infinity).is_err());
    }

    #[test]
    fn report_json_shape() {
        let r = alpha_lower_bound(&spec(1.0, 0.0, 0.0, 0.0), 2.0).unwrap();
        let j = serde_json::to_value(&r).unwrap();
        assert_eq!(j["bound"], "inf");
        let w = j["witness"].as_object().unwrap();
        let mut keys: Vec<_> = w.keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["a", "r", "s", "u1", "u2", "v"]);
        let e = alpha_lower_bound(&spec(0.0, 1.0, 0.0, 2.0), 2.0).unwrap();
        let j = serde_json::to_value(&e).unwrap();
        assert!(j["witness"].is_null());
        assert_eq!(j["equal_means"], true);
    }
}
