//! Numerical checks of the differential and integral relations linking
//! `D_A^(α)` and `D_A^(α+1)` along the mixture path `Q_t = P + t(Q - P)`.
//!
//! Forward relations, for `α ≠ -1` and `α > -1` respectively:
//!
//! ```text
//! D_A^(α+1)(P‖Q_t) = t^(2-α) / (α+1) · d/dt [t^(α-1) D_A^(α)(P‖Q_t)]
//! D_A^(α)(P‖Q_t)   = (α+1) t^(1-α) ∫_0^t s^(α-2) D_A^(α+1)(P‖Q_s) ds
//! ```
//!
//! The backward versions along `P_t = Q + t(P - Q)` follow from the forward
//! ones applied to `(Q, P, -α)` by duality, and are computed that way.

mod precise;
pub mod quadrature;

use serde::Serialize;
use thiserror::Error;

use crate::divergences::{alpha_from_cells, Cell};
use crate::measures::MeasurePair;
use precise::PrecisePath;
use quadrature::{integrate, QuadratureFailure};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative accuracy requested from the quadrature.
pub const QUADRATURE_REL_TOL: f64 = 1e-13;

const QUADRATURE_ABS_TOL: f64 = 1e-300;
const QUADRATURE_MAX_INTERVALS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelationError {
    #[error("relation is not defined at α = {0}")]
    AlphaExcluded(f64),
    #[error("step h = {h} does not fit inside (0, t] at t = {t}")]
    StepTooLarge { t: f64, h: f64 },
    #[error("path parameter t = {0} outside (0, 1]")]
    TOutOfRange(f64),
    #[error("a divergence along the path is infinite")]
    InfiniteDivergence,
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),
    #[error("P and Q coincide, so the path is constant")]
    DegeneratePath,
}

/// Both sides of a relation and how far apart they are.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationResidual {
    pub alpha: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub method_detail: String,
}

impl RelationResidual {
    fn new(alpha: f64, t: f64, lhs: f64, rhs: f64, method_detail: String) -> Self {
        let abs_residual = (lhs - rhs).abs();
        let rel_residual = abs_residual / lhs.abs().max(rhs.abs()).max(1e-300);
        Self {
            alpha,
            t,
            lhs,
            rhs,
            abs_residual,
            rel_residual,
            method_detail,
        }
    }
}

fn check_t(t: f64) -> Result<(), RelationError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(RelationError::TOutOfRange(t))
    }
}

/// Cells of `(P, Q_s)` with `δ = s(p - q) / q_s`, accurate for small `s`.
fn path_cells(pair: &MeasurePair, s: f64) -> impl Iterator<Item = Cell> + '_ {
    pair.p_weights()
        .iter()
        .zip(pair.q_weights())
        .map(move |(&p, &q)| {
            let qs = if s == 1.0 { q } else { p + s * (q - p) };
            if p > 0.0 && qs > 0.0 {
                Cell {
                    p,
                    q: qs,
                    delta: s * (p - q) / qs,
                }
            } else {
                Cell::from_masses(p, qs)
            }
        })
}

/// `D_A^(α)(P‖Q_s)` evaluated along the path without forming `Q_s` as a
/// measure.
pub fn path_divergence(pair: &MeasurePair, s: f64, alpha: f64) -> f64 {
    alpha_from_cells(path_cells(pair, s), alpha).value()
}

fn diff_forward(
    pair: &MeasurePair,
    alpha: f64,
    t: f64,
    h: f64,
    report_alpha: f64,
) -> Result<RelationResidual, RelationError> {
    if alpha == -1.0 {
        return Err(RelationError::AlphaExcluded(report_alpha));
    }
    check_t(t)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(RelationError::StepTooLarge { t, h });
    }
    let one_sided = t + h > 1.0;
    if t - h <= 0.0 || (one_sided && t - 2.0 * h <= 0.0) {
        return Err(RelationError::StepTooLarge { t, h });
    }

    let mut path = PrecisePath::new(pair.p_weights(), pair.q_weights());
    let derivative = path
        .derivative(t, h, alpha - 1.0, alpha, one_sided)
        .ok_or(RelationError::InfiniteDivergence)?;
    let rhs = t.powf(2.0 - alpha) / (alpha + 1.0) * derivative;
    let lhs = path
        .divergence_at(t, alpha + 1.0)
        .ok_or(RelationError::InfiniteDivergence)?;
    let stencil = if one_sided { "one-sided 3-point" } else { "central" };
    Ok(RelationResidual::new(
        report_alpha,
        t,
        lhs,
        rhs,
        format!("{stencil} difference, h = {h:e}, 128-bit path evaluation"),
    ))
}

/// Checks `D_A^(α+1)(P‖Q_t) = t^(2-α)/(α+1) · d/dt[t^(α-1) D_A^(α)(P‖Q_t)]`
/// with a central difference of step `h` (one-sided when `t + h > 1`).
///
/// Both sides are evaluated in 128-bit arithmetic so that the residual
/// reflects the truncation error of the stencil and not cancellation.
pub fn check_diff_relation_fwd(
    pair: &MeasurePair,
    alpha: f64,
    t: f64,
    h: f64,
) -> Result<RelationResidual, RelationError> {
    diff_forward(pair, alpha, t, h, alpha)
}

/// Checks `D_A^(α)(P_t‖Q) = t^(2+α)/(1-α) · d/dt[t^(-α-1) D_A^(α+1)(P_t‖Q)]`
/// along `P_t = Q + t(P - Q)`.
pub fn check_diff_relation_bwd(
    pair: &MeasurePair,
    alpha: f64,
    t: f64,
    h: f64,
) -> Result<RelationResidual, RelationError> {
    if alpha == 1.0 {
        return Err(RelationError::AlphaExcluded(alpha));
    }
    diff_forward(&pair.swapped(), -alpha, t, h, alpha)
}

fn integral_forward(
    pair: &MeasurePair,
    alpha: f64,
    t: f64,
    report_alpha: f64,
) -> Result<RelationResidual, RelationError> {
    if alpha.is_nan() || alpha <= -1.0 {
        return Err(RelationError::AlphaExcluded(report_alpha));
    }
    check_t(t)?;
    let lhs = path_divergence(pair, t, alpha);
    if lhs.is_infinite() {
        return Err(RelationError::InfiniteDivergence);
    }
    // s = t w^m with m = 1/(α+1) turns s^(α-2) ds into m t^(α+1) s^(-2) dw,
    // and D_A^(α+1)(P‖Q_s) = O(s²) keeps the new integrand bounded at w = 0.
    let m = 1.0 / (alpha + 1.0);
    let integrand = |w: f64| {
        let s = t * w.powf(m);
        if s == 0.0 {
            return f64::NAN;
        }
        path_divergence(pair, s, alpha + 1.0) / s / s
    };
    let res = integrate(
        integrand,
        0.0,
        1.0,
        QUADRATURE_ABS_TOL,
        QUADRATURE_REL_TOL,
        QUADRATURE_MAX_INTERVALS,
    )
    .map_err(|e| match e {
        QuadratureFailure::NonFinite { x } if path_divergence(pair, t * x.powf(m), alpha + 1.0).is_infinite() => {
            RelationError::InfiniteDivergence
        }
        other => RelationError::QuadratureNonConvergence(format!("{other:?}")),
    })?;
    // (α+1) t^(1-α) · m t^(α+1) = t²
    let rhs = t * t * res.value;
    Ok(RelationResidual::new(
        report_alpha,
        t,
        lhs,
        rhs,
        format!(
            "adaptive Gauss-Kronrod 21 in w with s = t·w^{m:.6}, {} intervals, {} nodes, est. error {:.3e}",
            res.intervals,
            res.evaluations,
            res.error * t * t
        ),
    ))
}

/// Checks `D_A^(α)(P‖Q_t) = (α+1) t^(1-α) ∫_0^t s^(α-2) D_A^(α+1)(P‖Q_s) ds`
/// for `α > -1`. At `α = 1` this is `D(P‖Q_t) = ∫_0^t s^(-1) χ²(P‖Q_s) ds`.
pub fn check_integral_relation(
    pair: &MeasurePair,
    alpha: f64,
    t: f64,
) -> Result<RelationResidual, RelationError> {
    integral_forward(pair, alpha, t, alpha)
}

/// Checks `D_A^(α+1)(P_t‖Q) = (1-α) t^(1+α) ∫_0^t s^(-α-2) D_A^(α)(P_s‖Q) ds`
/// for `α < 1`.
pub fn check_integral_relation_bwd(
    pair: &MeasurePair,
    alpha: f64,
    t: f64,
) -> Result<RelationResidual, RelationError> {
    if alpha.is_nan() || alpha >= 1.0 {
        return Err(RelationError::AlphaExcluded(alpha));
    }
    integral_forward(&pair.swapped(), -alpha, t, alpha)
}

/// Behaviour of `D_A^(α)(P‖Q_t)` as `t → 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallTOrder {
    pub alpha: f64,
    /// Least-squares slope of `log(t^(α-1) D)` against `log t`.
    pub slope: f64,
    pub expected_slope: f64,
    /// `D_A^(α)(P‖Q_t) / t²` at the smallest `t`.
    pub ratio_at_min_t: f64,
    /// `½ Σ (p - q)² / p`, the limit of `D / t²`.
    pub limit_constant: f64,
    /// `½ Σ (p - q)² / q`, for comparison.
    pub pearson_half: f64,
    pub t_grid: Vec<f64>,
}

/// Number of log-spaced `t` values between `1e-4` and `1e-2`.
pub const SMALL_T_POINTS: usize = 21;

/// Fits the exponent of `t^(α-1) D_A^(α)(P‖Q_t)` on `t ∈ [1e-4, 1e-2]` and
/// compares `D / t²` with its limit.
pub fn small_t_order(pair: &MeasurePair, alpha: f64) -> Result<SmallTOrder, RelationError> {
    if !alpha.is_finite() {
        return Err(RelationError::AlphaExcluded(alpha));
    }
    if pair.p_weights() == pair.q_weights() {
        return Err(RelationError::DegeneratePath);
    }
    let t_grid: Vec<f64> = (0..SMALL_T_POINTS)
        .map(|i| 10f64.powf(-4.0 + 2.0 * i as f64 / (SMALL_T_POINTS - 1) as f64))
        .collect();
    let mut xs = Vec::with_capacity(t_grid.len());
    let mut ys = Vec::with_capacity(t_grid.len());
    let mut ratio_at_min_t = f64::NAN;
    for &t in &t_grid {
        let d = path_divergence(pair, t, alpha);
        if d.is_infinite() {
            return Err(RelationError::InfiniteDivergence);
        }
        if d <= 0.0 {
            return Err(RelationError::DegeneratePath);
        }
        if ratio_at_min_t.is_nan() {
            ratio_at_min_t = d / (t * t);
        }
        xs.push(t.ln());
        ys.push((alpha - 1.0) * t.ln() + d.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();

    let (mut limit_constant, mut pearson_half) = (0.0, 0.0);
    for (&p, &q) in pair.p_weights().iter().zip(pair.q_weights()) {
        let d2 = (p - q) * (p - q);
        if d2 > 0.0 {
            limit_constant += if p > 0.0 { d2 / p } else { f64::INFINITY };
            pearson_half += if q > 0.0 { d2 / q } else { f64::INFINITY };
        }
    }
    Ok(SmallTOrder {
        alpha,
        slope: sxy / sxx,
        expected_slope: alpha + 1.0,
        ratio_at_min_t,
        limit_constant: 0.5 * limit_constant,
        pearson_half: 0.5 * pearson_half,
        t_grid,
    })
}
